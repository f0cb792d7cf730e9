import numpy as np
import pytest

from banklearn.baselines import (
    KernelFamily,
    default_banks,
    family_for_length,
    kernel_closed_form,
    mkl_features,
    mkl_fit_predict,
    ridge_fit,
    rks_fit_predict,
    spectral_sampler_for,
)
from banklearn.data import Dataset, kfold_splits
from banklearn.rff import feature_map, kernel_estimate_lags


def test_family_validation():
    with pytest.raises(ValueError):
        KernelFamily("matern", 1.0)
    with pytest.raises(ValueError):
        KernelFamily("rbf", 0.0)
    assert family_for_length("rbf", 2.0).scale == 2.0
    assert family_for_length("laplace", 2.0).scale == 0.5
    assert family_for_length("cauchy", 4.0).scale == 0.25


@pytest.mark.parametrize("tag,scale", [
    ("rbf", 1.0), ("rbf", 2.5),
    ("laplace", 1.0), ("laplace", 0.5),
    ("cauchy", 1.0), ("cauchy", 2.0),
])
def test_spectral_pairs_match_closed_forms(tag, scale):
    family = KernelFamily(tag, scale)
    rng = np.random.default_rng(hash((tag, scale)) % 2**32)
    w = spectral_sampler_for(family, 1, 10_000, rng)
    lags = np.array([[0.25], [1.0], [2.0]])
    est = kernel_estimate_lags(lags, w)
    exact = kernel_closed_form(family, lags)
    np.testing.assert_allclose(est, exact, atol=0.05)


def test_lag_zero_is_exactly_one():
    rng = np.random.default_rng(0)
    for tag in ("rbf", "laplace", "cauchy"):
        w = spectral_sampler_for(KernelFamily(tag, 1.0), 2, 64, rng)
        est = kernel_estimate_lags(np.zeros((1, 2)), w)
        assert est[0] == 1.0


def test_closed_form_values():
    lag1 = np.array([1.0])
    assert kernel_closed_form(KernelFamily("rbf", 1.0), lag1)[0] == pytest.approx(np.exp(-0.5))
    assert kernel_closed_form(KernelFamily("laplace", 1.0), lag1)[0] == pytest.approx(np.exp(-1.0))
    assert kernel_closed_form(KernelFamily("cauchy", 1.0), lag1)[0] == pytest.approx(0.5)
    # multivariate forms: product/sum structure
    t = np.array([1.0, 2.0])
    assert kernel_closed_form(KernelFamily("laplace", 0.5), t)[0] == pytest.approx(np.exp(-1.5))
    assert kernel_closed_form(KernelFamily("cauchy", 1.0), t)[0] == pytest.approx(1.0 / (2 * 5))


def test_ridge_recovers_linear_in_features_data():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((100, 2))
    w = rng.standard_normal((8, 2))
    phi = feature_map(x, w)
    beta_true = rng.standard_normal(16)
    y = phi @ beta_true
    beta = ridge_fit(phi, y, 1e-8)
    assert np.mean((phi @ beta - y) ** 2) < 1e-4


def test_infinite_shrinkage_sends_predictions_to_zero():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((60, 1))
    y = rng.standard_normal(60)
    w = rng.standard_normal((10, 1))
    phi = feature_map(x, w)
    beta = ridge_fit(phi, y, 1e12)
    assert np.max(np.abs(phi @ beta)) < 1e-3


def _split(ds, seed=0):
    fold = kfold_splits(ds.n, 5, seed)[0]
    return ds.subset(fold.fit_idx), ds.subset(fold.val_idx), ds.subset(fold.test_idx)


def test_rks_fit_predict_smoke_and_determinism():
    rng_data = np.random.default_rng(3)
    x = rng_data.normal(0, 2, (150, 1))
    y = np.sin(2 * x[:, 0]) + 0.1 * rng_data.standard_normal(150)
    train, val, test = _split(Dataset(x, y))
    res1 = rks_fit_predict(train, val, test, "rbf", 32, np.random.default_rng(7))
    res2 = rks_fit_predict(train, val, test, "rbf", 32, np.random.default_rng(7))
    np.testing.assert_array_equal(res1.predictions, res2.predictions)
    assert res1.metric.name == "mse"
    assert res1.metric.value < np.var(test.y)  # beats predicting zero
    assert res1.chosen["lambda"] > 0
    assert res1.chosen["family"] == "rbf"


def test_rks_classification_runs():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((120, 2))
    y = ((x**2).sum(axis=1) > 1.4).astype(float)
    train, val, test = _split(Dataset(x, y, "classification"))
    res = rks_fit_predict(train, val, test, "rbf", 24, np.random.default_rng(8))
    assert res.metric.name == "error"
    assert np.all((res.predictions >= 0) & (res.predictions <= 1))
    assert res.metric.value < 0.5


def test_mkl_features_layout_and_gram():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((6, 2))
    banks = [
        (KernelFamily("rbf", 1.0), rng.standard_normal((1, 2))),
        (KernelFamily("laplace", 1.0), rng.standard_normal((1, 2))),
    ]
    feats = mkl_features(x, banks)
    assert feats.shape == (6, 4)
    np.testing.assert_array_equal(feats[:, :2], feature_map(x, banks[0][1]))
    np.testing.assert_array_equal(feats[:, 2:], feature_map(x, banks[1][1]))
    # dot of concatenated features = sum of per-bank kernel estimates
    lag = (x[0] - x[3])[None, :]
    want = sum(kernel_estimate_lags(lag, w)[0] for _, w in banks)
    assert feats[0] @ feats[3] == pytest.approx(want, rel=1e-12)


def test_mkl_single_bank_reduces_to_feature_map():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((10, 3))
    w = rng.standard_normal((5, 3))
    bank = [(KernelFamily("rbf", 1.0), w)]
    np.testing.assert_array_equal(mkl_features(x, bank), feature_map(x, w))


def test_mkl_single_bank_fit_equals_rks():
    rng_data = np.random.default_rng(7)
    x = rng_data.normal(0, 2, (120, 1))
    y = np.sin(x[:, 0]) + 0.1 * rng_data.standard_normal(120)
    train, val, test = _split(Dataset(x, y))
    length = 2.0
    rks = rks_fit_predict(train, val, test, "rbf", 16,
                          np.random.default_rng(9), lengths=(length,))
    mkl = mkl_fit_predict(train, val, test, 16, np.random.default_rng(9),
                          banks=[family_for_length("rbf", length)])
    np.testing.assert_array_equal(rks.predictions, mkl.predictions)


def test_default_banks_cover_families_and_budget():
    rng = np.random.default_rng(10)
    x = rng.standard_normal((50, 2))
    banks = default_banks(x, 90, rng)
    assert len(banks) == 9
    tags = [f.tag for f, _ in banks]
    assert tags.count("rbf") == tags.count("laplace") == tags.count("cauchy") == 3
    assert all(w.shape == (10, 2) for _, w in banks)


def test_mkl_with_true_family_beats_misspecified_rks():
    # sharp laplace-kernel data at the bank's own 4/s rate: the rbf-only
    # fit has to trade off the peak against the tails, the bank does not
    from banklearn.data import standardize
    from banklearn.sampler import median_pairwise_scale

    wins = 0
    for seed in range(20):
        rng = np.random.default_rng(3000 + seed)
        x = rng.normal(0, 4, (150, 1))
        s = median_pairwise_scale(x)
        w_true = (4.0 / s) * rng.standard_cauchy((150, 1))
        phi = feature_map(x, w_true)
        y = phi @ rng.standard_normal(300) + 0.3 * rng.standard_normal(150)
        fold = kfold_splits(150, 5, seed)[0]
        ds = Dataset(x, y)
        train, others, _ = standardize(
            ds.subset(fold.fit_idx),
            [ds.subset(fold.val_idx), ds.subset(fold.test_idx)],
        )
        val, test = others
        rks = rks_fit_predict(train, val, test, "rbf", 300,
                              np.random.default_rng(seed))
        mkl = mkl_fit_predict(train, val, test, 300,
                              np.random.default_rng(seed))
        if mkl.metric.value <= rks.metric.value:
            wins += 1
    assert wins >= 15


def test_fit_result_predict_matches_reported_predictions():
    rng_data = np.random.default_rng(11)
    x = rng_data.normal(0, 2, (100, 2))
    y = x[:, 0] * x[:, 1] + 0.1 * rng_data.standard_normal(100)
    train, val, test = _split(Dataset(x, y))
    res = mkl_fit_predict(train, val, test, 36, np.random.default_rng(12))
    np.testing.assert_allclose(res.predict(test.x), res.predictions, rtol=1e-12)
