"""Random Fourier feature maps and Gaussian-mixture spectral densities.

A stationary kernel k(x - y) with spectral density rho(omega) is
approximated by the Monte Carlo feature map

    phi(x) = M^{-1/2} [cos(W x), sin(W x)],   W ~ rho i.i.d.,

so that phi(x)^T phi(y) -> k(x - y) as the number of frequencies M grows.
When rho is a Gaussian mixture the kernel has the closed form

    K(t) = sum_k pi_k exp(-t^T Sigma_k t / 2) cos(mu_k^T t),

which this module evaluates exactly for use as a Monte Carlo oracle and
for exporting learned kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidCovarianceError

_LOG_2PI = math.log(2.0 * math.pi)

__all__ = [
    "GaussianMixtureSpec",
    "feature_map",
    "kernel_estimate",
    "kernel_estimate_lags",
    "mixture_kernel_eval",
    "mixture_pdf",
    "sample_frequencies",
    "gaussian_logpdf",
]


def _as_matrix(w):
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2:
        raise DimensionError(f"frequency matrix must be 2-d, got shape {w.shape}")
    return w


def _chol_or_raise(cov, what="covariance"):
    cov = np.asarray(cov, dtype=np.float64)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise InvalidCovarianceError(f"{what} must be square, got shape {cov.shape}")
    if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-10):
        raise InvalidCovarianceError(f"{what} is not symmetric")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise InvalidCovarianceError(f"{what} is not positive definite") from exc


@dataclass
class GaussianMixtureSpec:
    """Finite Gaussian mixture over frequency space.

    Parameters
    ----------
    weights : (K,) array, positive, summing to 1.
    means : (K, d) array of component means.
    covs : (K, d, d) array of symmetric positive definite covariances.
    """

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    chols: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        self.covs = np.asarray(self.covs, dtype=np.float64)
        k = self.weights.shape[0]
        if self.means.shape[0] != k:
            raise DimensionError(
                f"{k} weights but {self.means.shape[0]} component means"
            )
        d = self.means.shape[1]
        if self.covs.shape != (k, d, d):
            raise DimensionError(
                f"covariance stack must have shape {(k, d, d)}, got {self.covs.shape}"
            )
        if np.any(self.weights <= 0.0):
            raise ValueError("mixture weights must be strictly positive")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"mixture weights sum to {self.weights.sum()!r}, not 1")
        self.chols = np.empty_like(self.covs)
        for j in range(k):
            self.chols[j] = _chol_or_raise(self.covs[j], f"component {j} covariance")

    @property
    def n_components(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.means.shape[1]


def feature_map(x, w):
    """Random Fourier feature vector(s) of `x` under frequencies `w`.

    Parameters
    ----------
    x : (d,) or (n, d) array of input points.
    w : (M, d) frequency matrix.

    Returns
    -------
    (2M,) or (n, 2M) array: cosine block then sine block, scaled by
    M^{-1/2} so every feature vector has unit Euclidean norm.
    """
    w = _as_matrix(w)
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[1] != w.shape[1]:
        raise DimensionError(
            f"input dimension {x2.shape[1]} != frequency dimension {w.shape[1]}"
        )
    proj = x2 @ w.T
    out = np.concatenate([np.cos(proj), np.sin(proj)], axis=1)
    out /= np.sqrt(w.shape[0])
    return out[0] if single else out


def kernel_estimate(x, y, w):
    """Monte Carlo kernel value between two points.

    Computed on the lag t = x - y as mean(cos(W t)), which equals
    dot(feature_map(x), feature_map(y)) algebraically and is exactly
    shift invariant in floating point; kernel_estimate(x, x) is exactly 1.
    """
    w = _as_matrix(w)
    t = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    if t.ndim != 1 or t.shape[0] != w.shape[1]:
        raise DimensionError(
            f"lag has shape {t.shape}, expected ({w.shape[1]},)"
        )
    return float(np.mean(np.cos(w @ t)))


def kernel_estimate_lags(lags, w):
    """Monte Carlo kernel values on a grid of lags, shape (n,) out."""
    w = _as_matrix(w)
    lags = np.atleast_2d(np.asarray(lags, dtype=np.float64))
    if lags.shape[1] != w.shape[1]:
        raise DimensionError(
            f"lag dimension {lags.shape[1]} != frequency dimension {w.shape[1]}"
        )
    return np.cos(lags @ w.T).mean(axis=1)


def mixture_kernel_eval(t, spec):
    """Exact kernel of a Gaussian-mixture spectral density at lag(s) `t`.

    K(t) = sum_k pi_k exp(-t^T Sigma_k t / 2) cos(mu_k^T t); K(0) = 1.
    """
    t = np.asarray(t, dtype=np.float64)
    single = t.ndim == 1
    t2 = np.atleast_2d(t)
    if t2.shape[1] != spec.dim:
        raise DimensionError(f"lag dimension {t2.shape[1]} != spec dimension {spec.dim}")
    out = np.zeros(t2.shape[0])
    for k in range(spec.n_components):
        quad = np.einsum("ni,ij,nj->n", t2, spec.covs[k], t2)
        out += spec.weights[k] * np.exp(-0.5 * quad) * np.cos(t2 @ spec.means[k])
    return float(out[0]) if single else out


def gaussian_logpdf(x, mean, chol):
    """Log density of N(mean, L L^T) at x, given the lower Cholesky factor L.

    `x` may be (d,) or (n, d); returns a scalar or (n,) array.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1 and x.shape[0] == 1:
        # scalar fast path: the assignment sweep calls this per frequency
        s = chol[0, 0]
        zv = (x[0] - mean[0]) / s
        return float(-0.5 * zv * zv - math.log(s) - 0.5 * _LOG_2PI)
    single = x.ndim == 1
    dev = np.atleast_2d(x) - mean
    d = dev.shape[1]
    # solve L z = dev^T for all points at once
    from scipy.linalg import solve_triangular

    z = solve_triangular(chol, dev.T, lower=True, check_finite=False)
    quad = np.einsum("in,in->n", z, z)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    out = -0.5 * (d * np.log(2.0 * np.pi) + logdet + quad)
    return float(out[0]) if single else out


def mixture_pdf(omega, spec):
    """Density of the mixture spectral measure at frequency point(s)."""
    omega = np.asarray(omega, dtype=np.float64)
    single = omega.ndim == 1
    pts = np.atleast_2d(omega)
    if pts.shape[1] != spec.dim:
        raise DimensionError(
            f"point dimension {pts.shape[1]} != spec dimension {spec.dim}"
        )
    dens = np.zeros(pts.shape[0])
    for k in range(spec.n_components):
        dens += spec.weights[k] * np.exp(
            gaussian_logpdf(pts, spec.means[k], spec.chols[k])
        )
    return float(dens[0]) if single else dens


def sample_frequencies(spec, m, rng):
    """Draw an (m, d) frequency matrix from the mixture spectral density."""
    if m < 1:
        raise ValueError(f"need at least one frequency, got m={m}")
    comp = rng.choice(spec.n_components, size=m, p=spec.weights)
    z = rng.standard_normal((m, spec.dim))
    w = spec.means[comp] + np.einsum("nij,nj->ni", spec.chols[comp], z)
    return w
