import numpy as np
import pytest

from banklearn.errors import ChainDivergedError, ConfigError
from banklearn.regression import NigPrior, build_design, fit_posterior, predict_mean
from banklearn.sampler import (
    ChainTrace,
    SamplerConfig,
    Snapshot,
    gibbs_sweep,
    median_pairwise_scale,
    posterior_predict,
    run_chain,
)
from banklearn.spectral import NiwPrior, SpectralState, init_spectral_state


def _small_regression(seed=0, n=40, d=2):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    y = np.sin(x[:, 0]) + 0.1 * rng.standard_normal(n)
    return x, y


def _small_classification(seed=0, n=60):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 2))
    y = (x[:, 0] + 0.5 * x[:, 1] > 0).astype(float)
    return x, y


def test_config_validation():
    with pytest.raises(ConfigError):
        SamplerConfig(task="ranking")
    with pytest.raises(ConfigError):
        SamplerConfig(thin=0)
    with pytest.raises(ConfigError):
        SamplerConfig(n_iters=10, burn_in=11)
    with pytest.raises(ConfigError):
        SamplerConfig(n_freq=0)
    with pytest.raises(ConfigError):
        SamplerConfig(proposal_mode="adaptive")
    # boundary: a chain that is all burn-in is legal, it just keeps nothing
    SamplerConfig(n_iters=10, burn_in=10)


def test_median_pairwise_scale():
    x = np.array([[0.0], [1.0], [2.0]])
    # pairwise distances {1, 1, 2}
    assert median_pairwise_scale(x) == pytest.approx(1.0)
    assert median_pairwise_scale(np.zeros((5, 2))) == 1.0
    assert median_pairwise_scale(np.zeros((1, 2))) == 1.0


def test_identity_proposal_is_always_accepted():
    # component mean pinned at the current frequency and zero proposal
    # noise make the proposal equal the current state exactly
    from banklearn.mhpass import STATUS_OK, mh_pass_regression
    from banklearn.sampler import _RegressionEvidence

    x, y = _small_regression(n=25, d=1)
    freqs = np.array([[0.7]])
    ctx = _RegressionEvidence(x, y, NigPrior())
    ctx.refresh(freqs)
    before = ctx.log_evidence
    comp_mu = freqs.copy()
    comp_chol = np.eye(1)[None, :, :]
    status, n_accept, n_fallback, logev, _ = mh_pass_regression(
        ctx.r, ctx.eta, ctx.w_solve, ctx.phi_t, freqs, ctx.x, ctx.y,
        comp_mu, comp_chol, np.zeros(1, dtype=np.int64),
        np.zeros(1, dtype=np.int64), np.zeros((1, 1)),
        np.log(np.array([0.5])), np.zeros((1, 1)), False,
        ctx.log_evidence, ctx.logdet, ctx.a_n, ctx.prior.b0, ctx.yty,
        ctx.c0, ctx.log_const, ctx.prior.lam0,
    )
    assert status == STATUS_OK
    assert n_accept == 1
    np.testing.assert_array_equal(freqs, comp_mu)
    assert logev == pytest.approx(before, abs=1e-9)


def test_no_data_accepts_every_proposal():
    # with zero observations the evidence is constant in the frequencies
    x = np.zeros((0, 1))
    y = np.zeros(0)
    rng = np.random.default_rng(3)
    niw = NiwPrior.default_for_dim(1)
    state = init_spectral_state(rng.standard_normal((6, 1)), 1.0, niw, rng)
    config = SamplerConfig(n_freq=6, exact_updates=True)
    state, stats = gibbs_sweep(state, x, y, config, rng)
    assert stats.accepted == stats.proposed == 6


def test_sweep_preserves_state_invariants():
    rng = np.random.default_rng(4)
    x, y = _small_regression(n=30, d=2)
    niw = NiwPrior.default_for_dim(2)
    config = SamplerConfig(n_freq=12)
    state = init_spectral_state(rng.standard_normal((12, 2)), 1.0, niw, rng)
    ctx = None
    for _ in range(6):
        state, stats = gibbs_sweep(state, x, y, config, rng)
        state.validate()
        assert 0 <= stats.accepted <= stats.proposed
        assert np.isfinite(stats.log_evidence)


def test_fast_and_exact_passes_agree_over_a_chain():
    x, y = _small_regression(seed=11, n=40, d=2)
    base = dict(task="regression", n_iters=30, burn_in=0, thin=1,
                n_freq=8, seed=123)
    fast = run_chain(x, y, SamplerConfig(**base))
    slow = run_chain(x, y, SamplerConfig(**base, exact_updates=True))
    lev_f = fast.log_evidences
    lev_s = slow.log_evidences
    assert lev_f.shape == lev_s.shape == (30,)
    np.testing.assert_allclose(lev_f, lev_s, atol=1e-6)
    acc_f = np.array([s.accepted for s in fast.snapshots])
    acc_s = np.array([s.accepted for s in slow.snapshots])
    np.testing.assert_array_equal(acc_f, acc_s)
    np.testing.assert_allclose(
        fast.final_state.freqs, slow.final_state.freqs, atol=1e-9
    )


def test_chain_is_deterministic():
    x, y = _small_regression(seed=5)
    config = SamplerConfig(n_iters=12, burn_in=4, thin=2, n_freq=6, seed=9)
    t1 = run_chain(x, y, config)
    t2 = run_chain(x, y, config)
    np.testing.assert_array_equal(t1.log_evidences, t2.log_evidences)
    np.testing.assert_array_equal(t1.final_state.freqs, t2.final_state.freqs)
    np.testing.assert_array_equal(t1.final_state.z, t2.final_state.z)
    for a, b in zip(t1.snapshots, t2.snapshots):
        np.testing.assert_array_equal(a.state.freqs, b.state.freqs)


def test_trace_length_follows_thinning():
    x, y = _small_regression(n=20, d=1)
    config = SamplerConfig(n_iters=7, burn_in=3, thin=2, n_freq=4, seed=1)
    trace = run_chain(x, y, config)
    assert len(trace) == 2  # floor((7 - 3) / 2)
    config = SamplerConfig(n_iters=6, burn_in=6, thin=1, n_freq=4, seed=1)
    trace = run_chain(x, y, config)
    assert len(trace) == 0
    assert trace.final_state is not None
    preds = posterior_predict(trace, x, final_only=True)
    assert preds.shape == (20,)
    with pytest.raises(ValueError):
        posterior_predict(trace, x)


def test_evidence_improves_over_burn_in():
    # the chain should climb from its RBF-ish start on mixture data
    wins = 0
    for seed in range(10):
        rng = np.random.default_rng(1000 + seed)
        x = rng.normal(0.0, 4.0, size=(250, 1))
        w_true = np.concatenate(
            [rng.normal(0.0, 0.5, 20), rng.normal(2.4, 0.5, 20)]
        )[:, None]
        phi = build_design(x, w_true)
        beta = rng.standard_normal(80)
        y = phi @ beta + 0.5 * rng.standard_normal(250)
        config = SamplerConfig(n_iters=40, burn_in=0, thin=1, n_freq=24,
                               seed=seed)
        trace = run_chain(x, y, config)
        lev = trace.log_evidences
        if lev[30:].mean() > lev[:5].mean():
            wins += 1
    assert wins >= 8


def test_acceptance_fraction_in_open_interval_after_burn_in():
    x, y = _small_regression(seed=21, n=60, d=1)
    config = SamplerConfig(n_iters=30, burn_in=10, thin=1, n_freq=16, seed=2)
    trace = run_chain(x, y, config)
    fracs = trace.acceptance_fractions
    assert np.all(fracs >= 0) and np.all(fracs <= 1)
    # pooled over the kept sweeps the rate is neither frozen nor total
    pooled = sum(s.accepted for s in trace.snapshots) / sum(
        s.proposed for s in trace.snapshots
    )
    assert 0.0 < pooled < 1.0


def test_posterior_predict_matches_manual_average():
    x, y = _small_regression(seed=6, n=30, d=1)
    config = SamplerConfig(n_iters=9, burn_in=3, thin=3, n_freq=5, seed=3)
    trace = run_chain(x, y, config)
    assert len(trace) == 2
    x_new = np.linspace(-2, 2, 7)[:, None]
    got = posterior_predict(trace, x_new)
    parts = [
        predict_mean(s.weight_posterior, build_design(x_new, s.state.freqs))
        for s in trace.snapshots
    ]
    np.testing.assert_allclose(got, np.mean(parts, axis=0), rtol=1e-12)


def test_posterior_predict_identical_snapshots_collapse():
    x, y = _small_regression(seed=7, n=25, d=1)
    config = SamplerConfig(n_iters=5, burn_in=4, thin=1, n_freq=4, seed=4)
    trace = run_chain(x, y, config)
    snap = trace.snapshots[0]
    tripled = ChainTrace(
        snapshots=[snap, snap, snap],
        final_state=trace.final_state,
        final_posterior=trace.final_posterior,
        config=config,
    )
    x_new = np.linspace(-1, 1, 5)
    one = posterior_predict(trace, x_new)
    three = posterior_predict(tripled, x_new)
    np.testing.assert_allclose(one, three, rtol=1e-12)


def test_classification_chain_smoke():
    x, y = _small_classification(seed=8)
    config = SamplerConfig(task="classification", n_iters=10, burn_in=4,
                           thin=2, n_freq=6, n_evidence_draws=32, seed=5)
    trace = run_chain(x, y, config)
    assert len(trace) == 3
    assert np.isfinite(trace.log_evidences).all()
    probs = posterior_predict(trace, x)
    assert probs.shape == (60,)
    assert np.all((probs >= 0) & (probs <= 1))
    # the learned probabilities should separate the classes somewhat
    assert probs[y == 1].mean() > probs[y == 0].mean()
    again = run_chain(x, y, config)
    np.testing.assert_array_equal(trace.log_evidences, again.log_evidences)


def test_full_block_mode_runs():
    x, y = _small_regression(seed=9, n=30, d=1)
    config = SamplerConfig(n_iters=10, burn_in=2, thin=1, n_freq=5, seed=6,
                           proposal_mode="full-block")
    trace = run_chain(x, y, config)
    assert len(trace) == 8
    assert np.isfinite(trace.log_evidences).all()
    assert np.all(trace.acceptance_fractions <= 1)


def test_progress_callback_sees_every_sweep():
    x, y = _small_regression(seed=10, n=20, d=1)
    seen = []
    config = SamplerConfig(n_iters=6, burn_in=6, thin=1, n_freq=4, seed=7)
    run_chain(x, y, config, progress=lambda it, lev, k, acc: seen.append((it, lev, k, acc)))
    assert [s[0] for s in seen] == list(range(6))
    assert all(np.isfinite(s[1]) for s in seen)
    assert all(s[2] >= 1 for s in seen)
    assert all(0.0 <= s[3] <= 1.0 for s in seen)


def test_divergent_inputs_raise():
    x, y = _small_regression(seed=12, n=20, d=1)
    config = SamplerConfig(n_iters=4, burn_in=0, thin=1, n_freq=4, seed=8)
    with pytest.raises(ValueError):
        run_chain(x, y * np.inf, config)
    with np.errstate(over="ignore"), pytest.raises(ChainDivergedError) as exc_info:
        # targets this large overflow y'y, poisoning the evidence
        run_chain(x, y * 1e200, config)
    assert "state" in exc_info.value.state_dump


def test_run_chain_input_checks():
    config = SamplerConfig(n_iters=2, burn_in=0, thin=1, n_freq=2)
    with pytest.raises(ValueError):
        run_chain(np.zeros((0, 1)), np.zeros(0), config)
    from banklearn.errors import DimensionError
    with pytest.raises(DimensionError):
        run_chain(np.zeros((5, 1)), np.zeros(4), config)
