"""Dirichlet-process Gaussian mixture over random frequencies.

The mixture weights are never materialized: assignments follow the
Chinese restaurant process, and component parameters carry conjugate
Normal-Inverse-Wishart updates. Everything here operates on a
`SpectralState`, the mutable bundle of (frequencies, assignments,
component parameters) that the sampler sweeps over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionError, InvalidCovarianceError
from .rff import GaussianMixtureSpec, gaussian_logpdf

__all__ = [
    "NiwPrior",
    "NiwPosterior",
    "ComponentParams",
    "SpectralState",
    "niw_posterior",
    "sample_component_params",
    "crp_assignment_distribution",
    "crp_prior_weights",
    "gibbs_sample_assignments",
    "resample_components",
    "init_spectral_state",
    "state_to_mixture_spec",
]


def _validated_cov(mat, name):
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise InvalidCovarianceError(f"{name} must be a square matrix, got shape {mat.shape}")
    if not np.allclose(mat, mat.T, atol=1e-10):
        raise InvalidCovarianceError(f"{name} must be symmetric")
    try:
        chol = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise InvalidCovarianceError(f"{name} must be positive definite") from exc
    return mat, chol


@dataclass(frozen=True)
class NiwPrior:
    """Normal-Inverse-Wishart parameters (prior or posterior)."""

    mu0: np.ndarray
    kappa0: float
    psi0: np.ndarray
    nu0: float
    psi_chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mu0 = np.atleast_1d(np.asarray(self.mu0, dtype=float))
        psi0, psi_chol = _validated_cov(self.psi0, "psi0")
        if mu0.shape != (psi0.shape[0],):
            raise DimensionError(
                f"mu0 has shape {mu0.shape}, expected ({psi0.shape[0]},)"
            )
        if self.kappa0 <= 0:
            raise ValueError(f"kappa0 must be positive, got {self.kappa0}")
        if self.nu0 <= psi0.shape[0] - 1:
            raise ValueError(
                f"nu0 must exceed d-1 = {psi0.shape[0] - 1}, got {self.nu0}"
            )
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "psi0", psi0)
        object.__setattr__(self, "psi_chol", psi_chol)
        object.__setattr__(self, "kappa0", float(self.kappa0))
        object.__setattr__(self, "nu0", float(self.nu0))

    @property
    def dim(self):
        return self.mu0.shape[0]

    @classmethod
    def default_for_dim(cls, d):
        """Weakly informative default: nu0 = d+2 keeps E[cov] = psi0 finite."""
        return cls(mu0=np.zeros(d), kappa0=1.0, psi0=np.eye(d), nu0=float(d + 2))


# Conjugacy: the posterior is again Normal-Inverse-Wishart, so it chains.
NiwPosterior = NiwPrior


@dataclass(frozen=True)
class ComponentParams:
    mu: np.ndarray
    cov: np.ndarray
    chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        cov, chol = _validated_cov(self.cov, "cov")
        if mu.shape != (cov.shape[0],):
            raise DimensionError(f"mu has shape {mu.shape}, expected ({cov.shape[0]},)")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "chol", chol)

    @property
    def dim(self):
        return self.mu.shape[0]

    @classmethod
    def _from_chol(cls, mu, cov, chol):
        """Trusted constructor for draws that already carry their factor."""
        self = object.__new__(cls)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "chol", chol)
        return self


def niw_posterior(prior, observations):
    """Conjugate update of a Normal-Inverse-Wishart by observed rows."""
    obs = np.atleast_2d(np.asarray(observations, dtype=float))
    m = obs.shape[0]
    if m == 0:
        raise ValueError("niw_posterior requires at least one observation")
    if obs.shape[1] != prior.dim:
        raise DimensionError(
            f"observations have dim {obs.shape[1]}, prior has dim {prior.dim}"
        )
    mean = obs.mean(axis=0)
    centered = obs - mean
    scatter = centered.T @ centered
    shift = mean - prior.mu0
    kappa_n = prior.kappa0 + m
    shrink = (prior.kappa0 * m / kappa_n) * np.outer(shift, shift)
    psi_n = prior.psi0 + scatter + shrink
    mu_n = (prior.kappa0 * prior.mu0 + m * mean) / kappa_n
    return NiwPrior(mu0=mu_n, kappa0=kappa_n, psi0=psi_n, nu0=prior.nu0 + m)


def sample_component_params(post, rng):
    """Draw (mu, cov) from a Normal-Inverse-Wishart.

    cov comes from the inverse Wishart via a Bartlett factor (one chi2
    vector and the subdiagonal normals per draw; considerably cheaper
    than generic library samplers, which matters because the assignment
    sweep draws one fresh component per frequency).
    """
    d = post.dim
    nu = post.nu0
    if d == 1:
        chi = rng.chisquare(nu)
        if chi <= 0.0:
            raise InvalidCovarianceError("degenerate chi-square draw in Bartlett factor")
        var = post.psi0[0, 0] / chi
        chol = np.array([[np.sqrt(var)]])
        cov = np.array([[var]])
    else:
        chi = rng.chisquare(nu - np.arange(d))
        if np.any(chi <= 0.0):
            raise InvalidCovarianceError("degenerate chi-square draw in Bartlett factor")
        a = np.zeros((d, d))
        a[np.diag_indices(d)] = np.sqrt(chi)
        a[np.tril_indices(d, -1)] = rng.standard_normal(d * (d - 1) // 2)
        # cov = L A^{-T} A^{-1} L^T  ~  InverseWishart(psi0, nu0)
        b = solve_triangular(a, post.psi_chol.T, lower=True).T
        cov = b @ b.T
        cov = 0.5 * (cov + cov.T)
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise InvalidCovarianceError(
                "inverse-Wishart draw lost positive definiteness"
            ) from exc
    mu = post.mu0 + (chol @ rng.standard_normal(d)) / np.sqrt(post.kappa0)
    return ComponentParams._from_chol(mu, cov, chol)


@dataclass
class SpectralState:
    """Frequencies, their component assignments, and component parameters.

    Mutated in place by the Gibbs operations below; labels are dense
    (0..K-1) and every live component holds at least one frequency.
    """

    freqs: np.ndarray
    z: np.ndarray
    components: list
    alpha: float

    def __post_init__(self):
        self.freqs = np.atleast_2d(np.asarray(self.freqs, dtype=float))
        self.z = np.asarray(self.z, dtype=np.int64)
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def n_freq(self):
        return self.freqs.shape[0]

    @property
    def dim(self):
        return self.freqs.shape[1]

    @property
    def n_components(self):
        return len(self.components)

    @property
    def counts(self):
        return np.bincount(self.z[self.z >= 0], minlength=len(self.components))

    def validate(self):
        counts = self.counts
        if counts.size != len(self.components):
            raise ValueError("assignment labels exceed the live component list")
        if np.any(counts < 1):
            raise ValueError("empty component present; labels must be compacted")
        if counts.sum() != self.n_freq:
            raise ValueError("assignment counts do not cover every frequency")
        for params in self.components:
            if params.dim != self.dim:
                raise DimensionError("component dimension differs from frequencies")

    def copy(self):
        return SpectralState(
            freqs=self.freqs.copy(),
            z=self.z.copy(),
            components=list(self.components),
            alpha=self.alpha,
        )


def crp_prior_weights(counts, alpha):
    """Seating probabilities [existing..., new] for one more customer."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum() + alpha
    return np.concatenate([counts, [alpha]]) / total


def crp_assignment_distribution(j, state, prior, rng, new_params=None):
    """Posterior assignment probabilities for frequency j.

    Returns (probs, params) where probs has one entry per live component
    plus a final entry for a fresh component whose parameters are params.
    params are drawn from the prior unless injected via new_params (a
    determinism hook for tests).
    """
    omega = state.freqs[j]
    counts = state.counts.astype(float)
    zj = state.z[j]
    if zj >= 0:
        counts[zj] -= 1.0
    if new_params is None:
        new_params = sample_component_params(prior, rng)
    n_comp = len(state.components)
    logw = np.empty(n_comp + 1)
    for k in range(n_comp):
        ck = counts[k]
        if ck > 0:
            params = state.components[k]
            logw[k] = math.log(ck) + gaussian_logpdf(omega, params.mu, params.chol)
        else:
            logw[k] = -np.inf
    logw[n_comp] = math.log(state.alpha) + gaussian_logpdf(
        omega, new_params.mu, new_params.chol
    )
    shift = logw.max()
    w = np.exp(logw - shift)
    return w / w.sum(), new_params


def _drop_component(state, k):
    state.components.pop(k)
    state.z[state.z > k] -= 1


def gibbs_sample_assignments(state, prior, rng):
    """One collapsed sweep over all frequency assignments (in place)."""
    for j in range(state.n_freq):
        k_old = int(state.z[j])
        state.z[j] = -1
        if not np.any(state.z == k_old):
            _drop_component(state, k_old)
        probs, new_params = crp_assignment_distribution(j, state, prior, rng)
        u = rng.random()
        choice = int(np.searchsorted(np.cumsum(probs), u, side="right"))
        choice = min(choice, len(state.components))
        if choice == len(state.components):
            state.components.append(new_params)
        state.z[j] = choice
    return state


def resample_components(state, prior, rng):
    """Redraw every live component's (mu, cov) from its posterior (in place)."""
    for k in range(len(state.components)):
        members = state.freqs[state.z == k]
        post = niw_posterior(prior, members)
        state.components[k] = sample_component_params(post, rng)
    return state


def init_spectral_state(freqs, alpha, prior, rng):
    """Start with every frequency in a single posterior-drawn component."""
    freqs = np.atleast_2d(np.asarray(freqs, dtype=float))
    post = niw_posterior(prior, freqs)
    params = sample_component_params(post, rng)
    return SpectralState(
        freqs=freqs,
        z=np.zeros(freqs.shape[0], dtype=np.int64),
        components=[params],
        alpha=alpha,
    )


def state_to_mixture_spec(state):
    """Export the learned mixture with weights m_k / M."""
    counts = state.counts
    return GaussianMixtureSpec(
        weights=counts / counts.sum(),
        means=np.stack([c.mu for c in state.components]),
        covs=np.stack([c.cov for c in state.components]),
    )
