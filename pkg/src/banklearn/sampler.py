"""Gibbs chain over the kernel's spectral representation.

Each sweep updates, in order: mixture assignments of the frequencies,
mixture component parameters, then every frequency by a Metropolis
step whose proposal is the frequency's own mixture component. The
proposal density equals the prior factor, so the acceptance ratio
reduces to a marginal-likelihood ratio: closed form for regression,
Monte Carlo over Laplace-posterior weight draws for classification.

Regression proposals run through a compiled low-rank pass; a python
path that refits from scratch at every proposal consumes the same
random stream and exists to pin the fast path down in tests.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist
from scipy.special import logsumexp

from .classification import (
    GaussianPrior,
    class_loglik_from_logits,
    fit_laplace,
    laplace_log_evidence,
    predict_proba,
    sample_beta_laplace,
)
from .errors import ChainDivergedError, ConfigError, DimensionError
from .lowrank import solve_rt
from .mhpass import STATUS_OK, mh_pass_regression
from .regression import NigPrior, build_design, fit_posterior, predict_mean
from .spectral import (
    NiwPrior,
    SpectralState,
    gibbs_sample_assignments,
    init_spectral_state,
    resample_components,
)

__all__ = [
    "SamplerConfig",
    "SweepStats",
    "Snapshot",
    "ChainTrace",
    "median_pairwise_scale",
    "gibbs_sweep",
    "run_chain",
    "posterior_predict",
]

log = logging.getLogger(__name__)

TASKS = ("regression", "classification")
PROPOSAL_MODES = ("per-frequency", "full-block")


@dataclass(frozen=True)
class SamplerConfig:
    """Chain settings; priors left as None are resolved at run time."""

    task: str = "regression"
    n_iters: int = 200
    burn_in: int = 100
    thin: int = 5
    n_freq: int = 500
    n_evidence_draws: int = 100
    seed: int = 0
    alpha: float = 1.0
    niw: NiwPrior | None = None
    nig: NigPrior = field(default_factory=NigPrior)
    class_prior: GaussianPrior = field(default_factory=GaussianPrior)
    proposal_mode: str = "per-frequency"
    exact_updates: bool = False

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.proposal_mode not in PROPOSAL_MODES:
            raise ConfigError(
                f"proposal_mode must be one of {PROPOSAL_MODES}, got {self.proposal_mode!r}"
            )
        if self.n_iters < 0:
            raise ConfigError("n_iters must be nonnegative")
        if not 0 <= self.burn_in <= self.n_iters:
            raise ConfigError(
                f"burn_in must lie in [0, n_iters], got {self.burn_in} with n_iters={self.n_iters}"
            )
        if self.thin < 1:
            raise ConfigError("thin must be at least 1")
        if self.n_freq < 1:
            raise ConfigError("n_freq must be at least 1")
        if self.n_evidence_draws < 1:
            raise ConfigError("n_evidence_draws must be at least 1")
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")


@dataclass
class SweepStats:
    accepted: int
    proposed: int
    n_fallback: int
    log_evidence: float
    n_components: int


@dataclass(frozen=True)
class Snapshot:
    state: SpectralState
    weight_posterior: object
    log_evidence: float
    n_components: int
    accepted: int
    proposed: int


@dataclass
class ChainTrace:
    snapshots: list
    final_state: SpectralState
    final_posterior: object
    config: SamplerConfig

    def __len__(self):
        return len(self.snapshots)

    @property
    def log_evidences(self):
        return np.array([s.log_evidence for s in self.snapshots])

    @property
    def n_components(self):
        return np.array([s.n_components for s in self.snapshots])

    @property
    def acceptance_fractions(self):
        return np.array(
            [s.accepted / max(1, s.proposed) for s in self.snapshots]
        )


def median_pairwise_scale(x, rng=None, max_points=1000):
    """Median pairwise distance over a subsample; 1.0 if degenerate."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    if n < 2:
        return 1.0
    if n > max_points:
        if rng is None:
            rng = np.random.default_rng(0)
        idx = rng.permutation(n)[:max_points]
        x = x[idx]
    s = float(np.median(pdist(x)))
    return s if s > 0 else 1.0


def _resolve_niw(config, d):
    if config.niw is None:
        return NiwPrior.default_for_dim(d)
    if config.niw.mu0.shape[0] != d:
        raise DimensionError(
            f"NIW prior is {config.niw.mu0.shape[0]}-dimensional but data has d={d}"
        )
    return config.niw


# ---------------------------------------------------------------------------
# evidence contexts: per-task caches the frequency pass reads and updates


class _RegressionEvidence:
    task = "regression"

    def __init__(self, x, y, prior):
        self.x = np.ascontiguousarray(np.atleast_2d(x), dtype=np.float64)
        self.y = np.ascontiguousarray(y, dtype=np.float64).reshape(-1)
        self.prior = prior
        self.yty = float(self.y @ self.y)

    def refresh(self, freqs, rng=None):
        """Rebuild every cache from scratch for the given frequencies."""
        phi = build_design(self.x, freqs)
        post = fit_posterior(phi, self.y, self.prior)
        p = post.dim
        self.phi_t = np.ascontiguousarray(phi.T)
        self.r = post.r_upper
        self.eta = post.eta
        self.w_solve = solve_rt(self.r, self.eta)
        self.logdet = 2.0 * float(np.sum(np.log(np.diag(self.r))))
        self.a_n = post.a_n
        self.c0 = self.prior.lam0 * p * float(self.prior.mu_beta) ** 2
        # evidence = log_const - a_n log b_n - logdet/2, inverted here so
        # the formula lives in one place only
        self.log_const = (
            post.log_evidence + post.a_n * math.log(post.b_n) + 0.5 * self.logdet
        )
        self.log_evidence = post.log_evidence

    def fit_snapshot(self, freqs):
        return fit_posterior(build_design(self.x, freqs), self.y, self.prior)

    def full_log_evidence(self, freqs):
        return fit_posterior(build_design(self.x, freqs), self.y, self.prior).log_evidence


class _ClassificationEvidence:
    task = "classification"

    def __init__(self, x, y, prior, n_draws):
        self.x = np.ascontiguousarray(np.atleast_2d(x), dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64).reshape(-1)
        self.prior = prior
        self.n_draws = n_draws
        self.lap = None

    def refresh(self, freqs, rng):
        """Refit the weight posterior at the current design and redraw
        the Monte Carlo weight sample the next proposals are scored with."""
        self.phi = build_design(self.x, freqs)
        warm = self.lap.beta0 if self.lap is not None else None
        self.lap = fit_laplace(self.phi, self.y, self.prior, beta_init=warm)
        self.betas = sample_beta_laplace(self.lap, self.n_draws, rng)
        self.logits = self.betas @ self.phi.T
        self.ll_cur = class_loglik_from_logits(self.logits, self.y)
        self.log_evidence = laplace_log_evidence(self.lap, self.phi, self.y, self.prior)

    def score_swap(self, j, omega):
        """Log mean likelihood ratio for replacing frequency j by omega."""
        m = self.phi.shape[1] // 2
        proj = self.x @ omega
        scale = 1.0 / math.sqrt(m)
        nc = np.cos(proj) * scale
        ns = np.sin(proj) * scale
        d_c = nc - self.phi[:, j]
        d_s = ns - self.phi[:, m + j]
        logits_new = (
            self.logits
            + np.outer(self.betas[:, j], d_c)
            + np.outer(self.betas[:, m + j], d_s)
        )
        ll_new = class_loglik_from_logits(logits_new, self.y)
        diffs = np.sort(ll_new - self.ll_cur)
        log_mean = float(logsumexp(diffs)) - math.log(diffs.shape[0])
        return log_mean, (nc, ns, logits_new, ll_new)

    def commit_swap(self, j, payload):
        nc, ns, logits_new, ll_new = payload
        m = self.phi.shape[1] // 2
        self.phi[:, j] = nc
        self.phi[:, m + j] = ns
        self.logits = logits_new
        self.ll_cur = ll_new

    def fit_snapshot(self, freqs):
        phi = build_design(self.x, freqs)
        warm = self.lap.beta0 if self.lap is not None else None
        return fit_laplace(phi, self.y, self.prior, beta_init=warm)


def _make_context(x, y, config):
    if config.task == "regression":
        return _RegressionEvidence(x, y, config.nig)
    return _ClassificationEvidence(x, y, config.class_prior, config.n_evidence_draws)


# ---------------------------------------------------------------------------
# frequency passes


def _component_arrays(state):
    d = state.dim
    k = state.n_components
    comp_mu = np.empty((k, d))
    comp_chol = np.empty((k, d, d))
    for i, comp in enumerate(state.components):
        comp_mu[i] = comp.mu
        comp_chol[i] = comp.chol
    return comp_mu, comp_chol


def _draw_sweep_randoms(state, rng):
    m = state.n_freq
    order = rng.permutation(m).astype(np.int64)
    znorm = rng.standard_normal((m, state.dim))
    u_log = np.log(rng.random(m))
    return order, znorm, u_log


def _mh_pass_regression_fast(state, ctx, rng):
    order, znorm, u_log = _draw_sweep_randoms(state, rng)
    comp_mu, comp_chol = _component_arrays(state)
    ctx.refresh(state.freqs)
    unused = np.zeros((1, state.dim))
    status, n_accept, n_fallback, cur_logev, logdet = mh_pass_regression(
        ctx.r,
        ctx.eta,
        ctx.w_solve,
        ctx.phi_t,
        state.freqs,
        ctx.x,
        ctx.y,
        comp_mu,
        comp_chol,
        state.z,
        order,
        znorm,
        u_log,
        unused,
        False,
        ctx.log_evidence,
        ctx.logdet,
        ctx.a_n,
        ctx.prior.b0,
        ctx.yty,
        ctx.c0,
        ctx.log_const,
        ctx.prior.lam0,
    )
    if status != STATUS_OK:
        raise ChainDivergedError(
            "marginal evidence became non-finite during a frequency pass",
            state_dump={"state": state.copy(), "log_evidence": cur_logev},
        )
    ctx.log_evidence = cur_logev
    ctx.logdet = logdet
    if n_fallback:
        log.debug("frequency pass took %d dense fallbacks", n_fallback)
    return n_accept, state.n_freq, n_fallback


def _mh_pass_regression_exact(state, ctx, rng):
    """Reference pass: full refit per proposal, same random stream."""
    order, znorm, u_log = _draw_sweep_randoms(state, rng)
    comp_mu, comp_chol = _component_arrays(state)
    cur = ctx.full_log_evidence(state.freqs)
    n_accept = 0
    for step in range(state.n_freq):
        j = int(order[step])
        k = state.z[j]
        omega = comp_mu[k] + comp_chol[k] @ znorm[step]
        old = state.freqs[j].copy()
        state.freqs[j] = omega
        cand = ctx.full_log_evidence(state.freqs)
        if u_log[step] < cand - cur:
            cur = cand
            n_accept += 1
        else:
            state.freqs[j] = old
    ctx.log_evidence = cur
    return n_accept, state.n_freq, 0


def _mh_pass_classification(state, ctx, rng):
    order, znorm, u_log = _draw_sweep_randoms(state, rng)
    comp_mu, comp_chol = _component_arrays(state)
    ctx.refresh(state.freqs, rng)
    n_accept = 0
    for step in range(state.n_freq):
        j = int(order[step])
        k = state.z[j]
        omega = comp_mu[k] + comp_chol[k] @ znorm[step]
        log_mean, payload = ctx.score_swap(j, omega)
        if u_log[step] < log_mean:
            state.freqs[j] = omega
            ctx.commit_swap(j, payload)
            # weight draws must follow the accepted design
            ctx.refresh(state.freqs, rng)
            n_accept += 1
    ctx.log_evidence = laplace_log_evidence(ctx.lap, ctx.phi, ctx.y, ctx.prior)
    return n_accept, state.n_freq, 0


def _mh_pass_full_block(state, ctx, rng):
    """Propose a complete frequency matrix in one shot (poor mixing;
    kept as the literal form of the block scheme)."""
    comp_mu, comp_chol = _component_arrays(state)
    znorm = rng.standard_normal(state.freqs.shape)
    u_log = float(np.log(rng.random()))
    proposal = np.empty_like(state.freqs)
    for j in range(state.n_freq):
        k = state.z[j]
        proposal[j] = comp_mu[k] + comp_chol[k] @ znorm[j]
    if ctx.task == "regression":
        cur = ctx.full_log_evidence(state.freqs)
        cand = ctx.full_log_evidence(proposal)
        log_r = cand - cur
        accept = u_log < log_r
        if accept:
            state.freqs[:] = proposal
            ctx.log_evidence = cand
        else:
            ctx.log_evidence = cur
    else:
        ctx.refresh(state.freqs, rng)
        phi_star = build_design(ctx.x, proposal)
        ll_star = class_loglik_from_logits(ctx.betas @ phi_star.T, ctx.y)
        diffs = np.sort(ll_star - ctx.ll_cur)
        log_mean = float(logsumexp(diffs)) - math.log(diffs.shape[0])
        accept = u_log < log_mean
        if accept:
            state.freqs[:] = proposal
            ctx.refresh(state.freqs, rng)
        ctx.log_evidence = laplace_log_evidence(ctx.lap, ctx.phi, ctx.y, ctx.prior)
    return (1 if accept else 0), 1, 0


def _frequency_pass(state, ctx, config, rng):
    if config.proposal_mode == "full-block":
        return _mh_pass_full_block(state, ctx, rng)
    if ctx.task == "regression":
        if config.exact_updates:
            return _mh_pass_regression_exact(state, ctx, rng)
        return _mh_pass_regression_fast(state, ctx, rng)
    return _mh_pass_classification(state, ctx, rng)


def _sweep(state, ctx, config, niw, rng):
    gibbs_sample_assignments(state, niw, rng)
    resample_components(state, niw, rng)
    accepted, proposed, n_fallback = _frequency_pass(state, ctx, config, rng)
    return SweepStats(
        accepted=accepted,
        proposed=proposed,
        n_fallback=n_fallback,
        log_evidence=ctx.log_evidence,
        n_components=state.n_components,
    )


def gibbs_sweep(state, x, y, config, rng, context=None):
    """One full sweep (assignments, components, frequencies) in place.

    Standalone calls build a fresh evidence context; a chain passes its
    own to keep design caches alive across sweeps.
    """
    if context is None:
        context = _make_context(x, y, config)
    niw = _resolve_niw(config, state.dim)
    stats = _sweep(state, context, config, niw, rng)
    return state, stats


def run_chain(x, y, config, progress=None):
    """Run the Gibbs chain and return its thinned trace.

    progress, if given, is called after every sweep as
    progress(iteration, log_evidence, n_components, accept_fraction).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape[0] != y.shape[0]:
        raise DimensionError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
    if x.shape[0] == 0:
        raise ValueError("run_chain needs at least one observation")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("non-finite values in the training data")

    rng = np.random.default_rng(config.seed)
    d = x.shape[1]
    niw = _resolve_niw(config, d)

    scale = median_pairwise_scale(x, rng)
    freqs = rng.normal(0.0, 1.0 / scale, size=(config.n_freq, d))
    state = init_spectral_state(freqs, config.alpha, niw, rng)
    ctx = _make_context(x, y, config)

    snapshots = []
    for it in range(config.n_iters):
        stats = _sweep(state, ctx, config, niw, rng)
        if not math.isfinite(stats.log_evidence):
            raise ChainDivergedError(
                f"log evidence became non-finite at iteration {it}",
                state_dump={"iteration": it, "state": state.copy()},
            )
        if progress is not None:
            progress(
                it,
                stats.log_evidence,
                stats.n_components,
                stats.accepted / max(1, stats.proposed),
            )
        kept = it >= config.burn_in and (it - config.burn_in + 1) % config.thin == 0
        if kept:
            snapshots.append(
                Snapshot(
                    state=state.copy(),
                    weight_posterior=ctx.fit_snapshot(state.freqs),
                    log_evidence=stats.log_evidence,
                    n_components=stats.n_components,
                    accepted=stats.accepted,
                    proposed=stats.proposed,
                )
            )
    return ChainTrace(
        snapshots=snapshots,
        final_state=state.copy(),
        final_posterior=ctx.fit_snapshot(state.freqs),
        config=config,
    )


def posterior_predict(trace, x_new, final_only=False, moderated=True):
    """Average per-snapshot predictions over the kept samples.

    Regression returns posterior mean targets; classification returns
    class-1 probabilities. final_only uses only the last state.
    """
    x_new = np.asarray(x_new, dtype=np.float64)
    if x_new.ndim == 1:
        x_new = x_new[:, None]
    if final_only:
        items = [(trace.final_state, trace.final_posterior)]
    else:
        if not trace.snapshots:
            raise ValueError("trace holds no kept samples; rerun with burn_in < n_iters")
        items = [(s.state, s.weight_posterior) for s in trace.snapshots]

    task = trace.config.task
    total = np.zeros(x_new.shape[0])
    for state, post in items:
        phi = build_design(x_new, state.freqs)
        if task == "regression":
            total += predict_mean(post, phi)
        else:
            total += predict_proba(post, phi, moderated=moderated)
    return total / len(items)
