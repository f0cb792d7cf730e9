import numpy as np
import pytest

from banklearn.data import (
    Dataset,
    kfold_splits,
    load_csv,
    metrics,
    standardize,
    summarize_folds,
    synth_generate,
    synth_spec_default,
    write_csv,
)
from banklearn.errors import DimensionError
from banklearn.rff import feature_map


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ValueError):
        Dataset(np.array([[np.nan]]), np.array([1.0]))
    with pytest.raises(DimensionError):
        Dataset(np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 1)), np.array([0.0, 2.0]), task="classification")
    ds = Dataset(np.zeros((2, 1)), np.array([0.0, 1.0]), task="classification")
    assert ds.n == 2 and ds.dim == 1


def test_load_csv_basic(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b,t\n1.0,2.0,3.0\n4,5e-1,6\n-7.25,8,9\n")
    res = load_csv(p, header=True)
    assert res.dataset.n == 3
    assert res.dataset.dim == 2
    assert res.n_skipped == 0
    np.testing.assert_allclose(res.dataset.y, [3.0, 6.0, 9.0])
    np.testing.assert_allclose(res.dataset.x[1], [4.0, 0.5])
    # target by name puts the remaining columns in file order
    res2 = load_csv(p, header=True, target="a")
    np.testing.assert_allclose(res2.dataset.y, [1.0, 4.0, -7.25])
    np.testing.assert_allclose(res2.dataset.x[:, 0], [2.0, 0.5, 8.0])


def test_load_csv_bad_row_raises_with_coordinates(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("1.0,2.0\n3.0,oops\n5.0,6.0\n")
    with pytest.raises(ValueError, match=r"row 2, column 2"):
        load_csv(p)


def test_load_csv_skip_flag_counts_rows(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("1.0,2.0\n3.0,oops\n5.0,6.0\n")
    res = load_csv(p, skip_bad=True)
    assert res.dataset.n == 2
    assert res.n_skipped == 1
    assert res.skipped_rows == (2,)


def test_load_csv_label_mapping(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("0.1,-1\n0.2,+1\n0.3,-1\n")
    res = load_csv(p, label_map={"-1": 0, "+1": 1}, task="classification")
    np.testing.assert_array_equal(res.dataset.y, [0.0, 1.0, 0.0])


def test_load_csv_empty_and_missing(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("\n\n")
    with pytest.raises(ValueError):
        load_csv(p)
    with pytest.raises(OSError):
        load_csv(tmp_path / "absent.csv")


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((20, 3)) * 10.0 ** rng.integers(-8, 8, size=(20, 3))
    y = rng.standard_normal(20)
    p = tmp_path / "rt.csv"
    write_csv(p, x, y)
    res = load_csv(p)
    np.testing.assert_allclose(res.dataset.x, x, rtol=0, atol=0)
    np.testing.assert_allclose(res.dataset.y, y, rtol=0, atol=0)


def test_standardize_round_trip_and_train_stats_only():
    rng = np.random.default_rng(1)
    train = Dataset(rng.normal(3.0, 2.0, (50, 2)), rng.normal(-5.0, 7.0, 50))
    test = Dataset(train.x + 4.0, train.y + 2.0)
    train_s, (test_s,), rec = standardize(train, [test])
    np.testing.assert_allclose(train_s.x.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(train_s.x.std(axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(rec.inverse_y(train_s.y), train.y, atol=1e-10)
    # the shifted split keeps its shift after train-stat standardization
    assert abs(test_s.x.mean()) > 0.5
    assert abs(test_s.y.mean()) > 0.1


def test_standardize_constant_column_flagged():
    x = np.column_stack([np.full(10, 2.5), np.arange(10.0)])
    train = Dataset(x, np.arange(10.0))
    train_s, _, rec = standardize(train)
    assert rec.const_cols.tolist() == [True, False]
    np.testing.assert_array_equal(train_s.x[:, 0], 0.0)


def test_standardize_is_idempotent():
    rng = np.random.default_rng(2)
    train = Dataset(rng.normal(5, 3, (40, 3)), rng.normal(0, 2, 40))
    once, _, _ = standardize(train)
    twice, _, _ = standardize(once)
    np.testing.assert_allclose(twice.x.mean(axis=0), 0.0, atol=1e-10)
    np.testing.assert_allclose(twice.x.std(axis=0), 1.0, atol=1e-10)
    np.testing.assert_allclose(twice.x, once.x, atol=1e-10)


def test_standardize_x_can_be_disabled():
    rng = np.random.default_rng(3)
    train = Dataset(rng.normal(5, 3, (30, 2)), rng.normal(1, 2, 30))
    train_s, _, rec = standardize(train, standardize_x=False)
    np.testing.assert_array_equal(train_s.x, train.x)
    assert abs(train_s.y.mean()) < 1e-12


def test_classification_labels_not_standardized():
    rng = np.random.default_rng(4)
    y = (rng.random(30) < 0.3).astype(float)
    train = Dataset(rng.standard_normal((30, 2)), y, task="classification")
    train_s, _, rec = standardize(train)
    np.testing.assert_array_equal(train_s.y, y)
    np.testing.assert_array_equal(rec.inverse_y(y), y)


def test_kfold_shapes_and_coverage():
    splits = kfold_splits(10, 5, seed=0)
    assert len(splits) == 5
    all_test = np.concatenate([s.test_idx for s in splits])
    assert sorted(all_test.tolist()) == list(range(10))
    assert all(s.test_idx.size == 2 for s in splits)
    for s in splits:
        train = s.train_idx
        assert np.intersect1d(train, s.test_idx).size == 0
        assert np.intersect1d(s.fit_idx, s.val_idx).size == 0
        assert s.val_idx.size >= 1


def test_kfold_remainder_rule():
    splits = kfold_splits(11, 5, seed=0)
    sizes = sorted((s.test_idx.size for s in splits), reverse=True)
    assert sizes == [3, 2, 2, 2, 2]


def test_kfold_determinism_and_errors():
    a = kfold_splits(30, 5, seed=7)
    b = kfold_splits(30, 5, seed=7)
    for s, t in zip(a, b):
        np.testing.assert_array_equal(s.test_idx, t.test_idx)
        np.testing.assert_array_equal(s.fit_idx, t.fit_idx)
    c = kfold_splits(30, 5, seed=8)
    assert any(
        not np.array_equal(s.test_idx, t.test_idx) for s, t in zip(a, c)
    )
    with pytest.raises(ValueError):
        kfold_splits(4, 5, seed=0)
    with pytest.raises(ValueError):
        kfold_splits(10, 1, seed=0)


@pytest.mark.parametrize("n,k", [(5, 2), (17, 5), (100, 10), (1000, 7)])
def test_kfold_property_sweep(n, k):
    splits = kfold_splits(n, k, seed=n + k)
    all_test = np.concatenate([s.test_idx for s in splits])
    assert sorted(all_test.tolist()) == list(range(n))
    sizes = [s.test_idx.size for s in splits]
    assert max(sizes) - min(sizes) <= 1
    for s in splits:
        combined = np.sort(np.concatenate([s.train_idx, s.test_idx]))
        np.testing.assert_array_equal(combined, np.arange(n))


def test_metrics_regression():
    truth = np.array([1.0, 2.0, 3.0])
    rec = metrics(truth, truth, "regression")
    assert rec.name == "mse" and rec.value == 0.0
    rec = metrics(truth + 2.0, truth, "regression")
    assert rec.value == pytest.approx(4.0)
    with pytest.raises(DimensionError):
        metrics(truth, truth[:2], "regression")


def test_metrics_standardized_constant_predictor():
    rng = np.random.default_rng(5)
    train = Dataset(rng.standard_normal((200, 1)), rng.normal(3, 5, 200))
    train_s, _, _ = standardize(train)
    rec = metrics(np.zeros(200), train_s.y, "regression")
    assert rec.value == pytest.approx(1.0, abs=1e-10)


def test_metrics_classification():
    truth = np.array([0.0, 1.0, 1.0, 0.0])
    probs = np.array([0.2, 0.9, 0.4, 0.7])
    rec = metrics(probs, truth, "classification")
    assert rec.name == "error"
    assert rec.value == pytest.approx(0.5)
    assert metrics(1.0 - truth, truth, "classification").value == 1.0
    assert metrics(truth, truth, "classification").value == 0.0


def test_summarize_folds():
    mean, se = summarize_folds([1.0, 2.0, 3.0])
    assert mean == pytest.approx(2.0)
    assert se == pytest.approx(1.0 / np.sqrt(3.0))
    assert summarize_folds([4.0]) == (4.0, 0.0)


def test_synth_default_recipe():
    res = synth_generate(seed=0)
    ds = res.dataset
    assert ds.n == 1000 and ds.dim == 1
    assert res.freqs.shape == (250, 1)
    assert abs(ds.x.std() - 4.0) / 4.0 < 0.05
    spec = res.spec
    np.testing.assert_allclose(spec.weights, [0.5, 0.5])
    np.testing.assert_allclose(spec.means[:, 0], [0.0, 3 * np.pi / 4])


def test_synth_noise_free_targets():
    res = synth_generate(n=50, m_true=20, noise=0.0, seed=1)
    expect = feature_map(res.dataset.x, res.freqs) @ res.beta
    np.testing.assert_array_equal(res.dataset.y, expect)


def test_synth_determinism():
    a = synth_generate(n=30, m_true=10, seed=2)
    b = synth_generate(n=30, m_true=10, seed=2)
    np.testing.assert_array_equal(a.dataset.x, b.dataset.x)
    np.testing.assert_array_equal(a.dataset.y, b.dataset.y)
    np.testing.assert_array_equal(a.freqs, b.freqs)
    c = synth_generate(n=30, m_true=10, seed=3)
    assert not np.array_equal(a.dataset.y, c.dataset.y)


def test_write_folds_csv(tmp_path):
    from banklearn.data import write_folds_csv

    splits = kfold_splits(11, 5, seed=3)
    path = tmp_path / "folds.csv"
    write_folds_csv(path, splits, 11)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "index,fold"
    assert len(lines) == 12
    folds = [int(line.split(",")[1]) for line in lines[1:]]
    assert sorted(set(folds)) == [0, 1, 2, 3, 4]
    for i, split in enumerate(splits):
        for idx in split.test_idx:
            assert folds[idx] == i
