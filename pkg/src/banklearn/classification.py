"""Laplace approximation for logistic outputs over random features.

The regression model has a closed-form evidence; the logistic one does
not, so frequency proposals are scored by a Monte Carlo likelihood
ratio under weight draws from a Gaussian (Laplace) fit of the current
posterior. This module owns that fit, the draws, the ratio, and the
moderated predictive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import expit, log_expit, logsumexp

from .errors import DimensionError, InvalidCovarianceError

__all__ = [
    "GaussianPrior",
    "LaplacePosterior",
    "log_likelihood_class",
    "class_loglik_from_logits",
    "fit_laplace",
    "sample_beta_laplace",
    "evidence_ratio_class",
    "laplace_log_evidence",
    "predict_proba",
]

MAX_NEWTON_ITERS = 100
GRAD_TOL_SCALE = 1e-6


@dataclass(frozen=True)
class GaussianPrior:
    """Isotropic Gaussian weight prior: beta ~ N(mu_beta, sigma^2 I)."""

    sigma: float = 1.0
    mu_beta: float = 0.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def lam0(self):
        return 1.0 / (self.sigma * self.sigma)

    def mu_vec(self, p):
        return np.full(p, float(self.mu_beta))


@dataclass(frozen=True)
class LaplacePosterior:
    """Gaussian fit N(beta0, S_n^{-1}) at the posterior mode."""

    beta0: np.ndarray
    s_n: np.ndarray
    s_chol: np.ndarray = field(repr=False, compare=False)
    converged: bool
    iterations: int
    grad_norm: float

    @property
    def dim(self):
        return self.beta0.shape[0]


def _check_labels(y):
    y = np.asarray(y, dtype=float)
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("labels must take values in {0, 1}")
    return y


def class_loglik_from_logits(logits, y):
    """Bernoulli log likelihood from logits, summed over observations.

    logits may be (n,) for one weight vector or (L, n) for a batch;
    returns a float or an (L,) array accordingly.
    """
    ll = y * log_expit(logits) + (1.0 - y) * log_expit(-logits)
    return ll.sum(axis=-1)


def log_likelihood_class(phi, y, beta):
    y = _check_labels(y)
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    if phi.shape[0] != y.shape[0]:
        raise DimensionError(
            f"design has {phi.shape[0]} rows but {y.shape[0]} labels given"
        )
    return float(class_loglik_from_logits(phi @ beta, y))


def _log_posterior(phi, y, beta, prior):
    resid = beta - prior.mu_beta
    return class_loglik_from_logits(phi @ beta, y) - 0.5 * prior.lam0 * float(
        resid @ resid
    )


def fit_laplace(phi, y, prior, beta_init=None, max_iter=MAX_NEWTON_ITERS):
    """Find the logistic posterior mode by damped Newton (IRLS) steps.

    Exhausting the iteration budget returns a LaplacePosterior with
    converged=False carrying the best iterate; callers choose whether
    that is fatal.
    """
    y = _check_labels(y)
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    n, p = phi.shape
    lam0 = prior.lam0
    mu = prior.mu_vec(p)
    beta = mu.copy() if beta_init is None else np.asarray(beta_init, dtype=float).copy()

    obj = _log_posterior(phi, y, beta, prior)
    grad_norm = np.inf
    iterations = 0
    converged = False
    for _ in range(max_iter):
        z = phi @ beta
        s = expit(z)
        grad = phi.T @ (y - s) - lam0 * (beta - mu)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < GRAD_TOL_SCALE * (1.0 + abs(obj)):
            converged = True
            break
        d = s * (1.0 - s)
        hess = phi.T @ (phi * d[:, None])
        hess[np.diag_indices(p)] += lam0
        step = np.linalg.solve(hess, grad)
        slope = float(grad @ step)
        t = 1.0
        for _ in range(60):
            cand = beta + t * step
            cand_obj = _log_posterior(phi, y, cand, prior)
            if cand_obj >= obj + 1e-4 * t * slope:
                break
            t *= 0.5
        beta = beta + t * step
        obj = cand_obj
        iterations += 1

    z = phi @ beta
    s = expit(z)
    d = s * (1.0 - s)
    s_n = phi.T @ (phi * d[:, None])
    s_n[np.diag_indices(p)] += lam0
    s_n = 0.5 * (s_n + s_n.T)
    try:
        s_chol = np.linalg.cholesky(s_n)
    except np.linalg.LinAlgError as exc:
        raise InvalidCovarianceError("curvature matrix lost positive definiteness") from exc
    if not converged:
        grad = phi.T @ (y - s) - lam0 * (beta - mu)
        grad_norm = float(np.linalg.norm(grad))
    return LaplacePosterior(
        beta0=beta,
        s_n=s_n,
        s_chol=s_chol,
        converged=converged,
        iterations=iterations,
        grad_norm=grad_norm,
    )


def sample_beta_laplace(lap, n_draws, rng):
    """Draw n_draws weight vectors from N(beta0, S_n^{-1})."""
    z = rng.standard_normal((lap.dim, n_draws))
    # cov = S_n^{-1} = L^{-T} L^{-1}, so beta = beta0 + L^{-T} z
    shaped = solve_triangular(lap.s_chol, z, lower=True, trans="T")
    return lap.beta0 + shaped.T


def evidence_ratio_class(phi_star, phi_current, y, lap_current, n_draws=100, rng=None, betas=None):
    """Monte Carlo acceptance ratio min(1, mean likelihood ratio).

    Weight draws come from the Laplace fit of the CURRENT design; pass
    betas to reuse draws across proposals that share that design.
    """
    y = _check_labels(y)
    if betas is None:
        if rng is None:
            raise ValueError("either betas or rng must be provided")
        betas = sample_beta_laplace(lap_current, n_draws, rng)
    ll_star = class_loglik_from_logits(betas @ np.asarray(phi_star, dtype=float).T, y)
    ll_cur = class_loglik_from_logits(betas @ np.asarray(phi_current, dtype=float).T, y)
    diffs = np.sort(ll_star - ll_cur)
    log_mean = logsumexp(diffs) - math.log(diffs.shape[0])
    if log_mean >= 0.0:
        return 1.0
    return float(np.exp(log_mean))


def laplace_log_evidence(lap, phi, y, prior):
    """Gaussian-integral approximation to the marginal log likelihood.

    log p(Y) ~ log p(Y|beta0) + log N(beta0|prior) + (p/2)log 2pi
    - (1/2) logdet S_n; the 2pi terms against the prior normalizer
    collapse to the lam0 power below.
    """
    resid = lap.beta0 - prior.mu_beta
    log_post = float(class_loglik_from_logits(np.asarray(phi) @ lap.beta0, y))
    log_post -= 0.5 * prior.lam0 * float(resid @ resid)
    logdet_sn = 2.0 * float(np.sum(np.log(np.diag(lap.s_chol))))
    return log_post + 0.5 * lap.dim * math.log(prior.lam0) - 0.5 * logdet_sn


def predict_proba(lap, phi_x, moderated=True):
    """Class-1 probability; moderation shrinks toward 1/2 by the
    posterior uncertainty of the logit (probit approximation)."""
    phi_x = np.atleast_2d(np.asarray(phi_x, dtype=float))
    logits = phi_x @ lap.beta0
    if moderated:
        v = solve_triangular(lap.s_chol, phi_x.T, lower=True)
        s2 = np.einsum("in,in->n", v, v)
        logits = logits / np.sqrt(1.0 + np.pi * s2 / 8.0)
    return expit(logits)
