"""Closed-form model evidence for Bayesian linear regression on features.

Conjugate normal-inverse-gamma model on a design Phi (N x p):

    y | beta, v ~ N(Phi beta, v I),   beta | v ~ N(mu_beta, v sigma^2 I),
    v ~ InvGamma(a0, b0),

so with Lambda0 = I / sigma^2 the marginal likelihood of y is available
in closed form and single-column swaps of Phi only touch one row/column
of Lambda_n = Phi^T Phi + Lambda0. `swap_frequency_update` exploits that
with rank-1 Cholesky updates, costing O(N p + p^2) instead of a full
O(p^3) refactorization; it is the workhorse behind frequency Metropolis
steps where Phi changes two columns at a time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln

from .errors import DimensionError, UndefinedVarianceError
from .lowrank import apply_swap4, solve_r, solve_rt
from .rff import feature_map

__all__ = [
    "NigPrior",
    "RegressionPosterior",
    "build_design",
    "fit_posterior",
    "log_evidence",
    "swap_frequency_update",
    "predict_mean",
    "predict_mean_var",
    "log_predictive_density",
]

log = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class NigPrior:
    """Normal-inverse-gamma prior: Lambda0 = I / sigma^2, v ~ IG(a0, b0)."""

    sigma: float = 1.0
    a0: float = 1.0
    b0: float = 1.0
    mu_beta: float = 0.0  # common prior mean for every weight

    def __post_init__(self):
        if self.sigma <= 0.0 or self.a0 <= 0.0 or self.b0 <= 0.0:
            raise ValueError("sigma, a0 and b0 must all be positive")

    @property
    def lam0(self):
        return 1.0 / (self.sigma * self.sigma)

    def mu_vec(self, p):
        return np.full(p, float(self.mu_beta))


@dataclass(frozen=True)
class RegressionPosterior:
    """Posterior state; immutable. `r_upper` is chol(Lambda_n), upper."""

    r_upper: np.ndarray
    eta: np.ndarray
    mu_n: np.ndarray
    a_n: float
    b_n: float
    n_obs: int
    yty: float
    log_evidence: float

    @property
    def dim(self):
        return self.eta.shape[0]


def build_design(x, w):
    """Feature design matrix (N, 2M) for inputs x under frequencies w."""
    phi = feature_map(x, w)
    return np.atleast_2d(phi)


def _evidence_from_parts(n_obs, p, prior, a_n, b_n, logdet_lambda_n):
    logdet_lambda0 = p * np.log(prior.lam0)
    return float(
        -0.5 * n_obs * LOG_2PI
        + gammaln(a_n)
        - gammaln(prior.a0)
        + prior.a0 * np.log(prior.b0)
        - a_n * np.log(b_n)
        + 0.5 * (logdet_lambda0 - logdet_lambda_n)
    )


def _prior_quad_const(prior, p):
    # mu_beta^T Lambda0 mu_beta for the constant-mean prior
    return prior.lam0 * p * float(prior.mu_beta) ** 2


def fit_posterior(phi, y, prior):
    """Fit the conjugate posterior and marginal evidence from scratch.

    Parameters
    ----------
    phi : (N, p) design matrix (N may be 0).
    y : (N,) targets.
    prior : NigPrior.
    """
    phi = np.atleast_2d(np.asarray(phi, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n_obs, p = phi.shape
    if y.shape[0] != n_obs:
        raise DimensionError(f"design has {n_obs} rows but y has {y.shape[0]}")

    lam = phi.T @ phi
    lam[np.diag_indices(p)] += prior.lam0
    r_upper = np.ascontiguousarray(np.linalg.cholesky(lam).T)

    eta = prior.lam0 * prior.mu_vec(p) + phi.T @ y
    w = solve_rt(r_upper, eta)
    quad = float(w @ w)
    mu_n = solve_r(r_upper, w)

    yty = float(y @ y)
    a_n = prior.a0 + 0.5 * n_obs
    b_n = prior.b0 + 0.5 * (yty + _prior_quad_const(prior, p) - quad)
    logdet = 2.0 * float(np.sum(np.log(np.diag(r_upper))))
    return RegressionPosterior(
        r_upper=r_upper,
        eta=eta,
        mu_n=mu_n,
        a_n=float(a_n),
        b_n=float(b_n),
        n_obs=n_obs,
        yty=yty,
        log_evidence=_evidence_from_parts(n_obs, p, prior, a_n, b_n, logdet),
    )


def log_evidence(post, prior):
    """Marginal log evidence, recomputed from the posterior state."""
    logdet = 2.0 * float(np.sum(np.log(np.diag(post.r_upper))))
    return _evidence_from_parts(
        post.n_obs, post.dim, prior, post.a_n, post.b_n, logdet
    )


def swap_frequency_update(post, phi, j, new_cos, new_sin, y, prior):
    """Posterior after replacing feature columns j and M+j of `phi`.

    `phi` is the CURRENT design (old columns in place) and is not
    modified; on acceptance the caller writes the new columns in. Falls
    back to a full refactorization when a rank-1 downdate loses positive
    definiteness through roundoff.
    """
    n_obs, p = phi.shape
    m = p // 2
    if not 0 <= j < m:
        raise DimensionError(f"frequency index {j} out of range for M={m}")
    jm = m + j

    d_cos = new_cos - phi[:, j]
    d_sin = new_sin - phi[:, jm]
    gmat = phi.T @ np.column_stack((d_cos, d_sin))
    cc = float(d_cos @ d_cos)
    ss = float(d_sin @ d_sin)
    cs = float(d_cos @ d_sin)

    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    gc = gmat[:, 0] * inv_sqrt2
    gc[j] += 0.5 * cc * inv_sqrt2
    gs = gmat[:, 1] * inv_sqrt2
    gs[j] += cs * inv_sqrt2
    gs[jm] += 0.5 * ss * inv_sqrt2

    up_c = gc.copy()
    up_c[j] += inv_sqrt2
    down_c = gc
    down_c[j] -= inv_sqrt2
    up_s = gs.copy()
    up_s[jm] += inv_sqrt2
    down_s = gs
    down_s[jm] -= inv_sqrt2

    r_new = post.r_upper.copy()
    ok = apply_swap4(r_new, up_c, up_s, down_c, down_s)
    if not ok:
        log.warning("rank-1 downdate failed at column %d; refactorizing", j)
        phi2 = phi.copy()
        phi2[:, j] = new_cos
        phi2[:, jm] = new_sin
        return fit_posterior(phi2, y, prior)

    mu_vec_jm = prior.lam0 * float(prior.mu_beta)
    eta_new = post.eta.copy()
    eta_new[j] = mu_vec_jm + float(new_cos @ y)
    eta_new[jm] = mu_vec_jm + float(new_sin @ y)

    w = solve_rt(r_new, eta_new)
    quad = float(w @ w)
    mu_n = solve_r(r_new, w)
    b_n = prior.b0 + 0.5 * (post.yty + _prior_quad_const(prior, p) - quad)
    logdet = 2.0 * float(np.sum(np.log(np.diag(r_new))))
    return RegressionPosterior(
        r_upper=r_new,
        eta=eta_new,
        mu_n=mu_n,
        a_n=post.a_n,
        b_n=float(b_n),
        n_obs=post.n_obs,
        yty=post.yty,
        log_evidence=_evidence_from_parts(post.n_obs, p, prior, post.a_n, b_n, logdet),
    )


def _posterior_quad(post, phi_x):
    z = solve_triangular(
        post.r_upper, phi_x.T, lower=False, trans="T", check_finite=False
    )
    return np.einsum("in,in->n", z, z)


def predict_mean(post, phi_x):
    """Posterior predictive mean(s) for feature row(s) phi_x."""
    phi_x = np.atleast_2d(np.asarray(phi_x, dtype=np.float64))
    out = phi_x @ post.mu_n
    return out


def predict_mean_var(post, phi_x):
    """Posterior predictive mean and variance.

    Raises UndefinedVarianceError when a_n <= 1 (the Student-t predictive
    has no second moment); the exception carries the mean.
    """
    phi_x = np.atleast_2d(np.asarray(phi_x, dtype=np.float64))
    mean = phi_x @ post.mu_n
    if post.a_n <= 1.0:
        raise UndefinedVarianceError(
            f"predictive variance undefined for a_n={post.a_n} <= 1", mean=mean
        )
    var = (post.b_n / (post.a_n - 1.0)) * (1.0 + _posterior_quad(post, phi_x))
    return mean, var


def log_predictive_density(post, phi_x, y_new):
    """Log density of new observation(s) under the Student-t predictive."""
    phi_x = np.atleast_2d(np.asarray(phi_x, dtype=np.float64))
    y_new = np.asarray(y_new, dtype=np.float64).reshape(-1)
    nu = 2.0 * post.a_n
    mean = phi_x @ post.mu_n
    s2 = (post.b_n / post.a_n) * (1.0 + _posterior_quad(post, phi_x))
    resid2 = (y_new - mean) ** 2
    out = (
        gammaln(0.5 * (nu + 1.0))
        - gammaln(0.5 * nu)
        - 0.5 * np.log(nu * np.pi * s2)
        - 0.5 * (nu + 1.0) * np.log1p(resid2 / (nu * s2))
    )
    return out if out.shape[0] > 1 else float(out[0])
