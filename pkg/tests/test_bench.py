import numpy as np
import pytest

from banklearn.bench import (
    CSV_HEADER,
    BenchmarkReport,
    MethodSpec,
    run_benchmark,
)
from banklearn.data import Dataset


def _reg_dataset(n=60, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(0, 2, (n, 2))
    y = np.sin(x[:, 0]) + 0.5 * x[:, 1] + 0.1 * rng.standard_normal(n)
    return Dataset(x, y)


def _cls_dataset(n=80, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(0, 2, (n, 2))
    y = (x[:, 0] + 0.2 * rng.standard_normal(n) > 0).astype(float)
    return Dataset(x, y, "classification")


_FAST_BANK = MethodSpec("bank", {"n_iters": 6, "burn_in": 2, "thin": 2,
                                 "n_freq": 6, "n_evidence_draws": 8})
_FAST_RKS = MethodSpec("rks", {"m": 24})
_FAST_MKL = MethodSpec("mkl", {"m_total": 27})


def test_single_method_table():
    report = run_benchmark(_reg_dataset(), [_FAST_RKS], k=4, seed=1)
    assert [r.method for r in report.results] == ["rks"]
    row = report.results[0]
    assert row.ok and len(row.fold_values) == 4
    assert np.isfinite(row.mean) and np.isfinite(row.stderr)
    assert row.seconds > 0
    csv = report.to_csv()
    assert csv.splitlines()[0] == CSV_HEADER
    assert csv.splitlines()[1].startswith("rks,")
    assert "rks" in report.to_text()


def test_all_methods_and_row_order():
    report = run_benchmark(
        _reg_dataset(), [_FAST_BANK, _FAST_RKS, _FAST_MKL], k=3, seed=2
    )
    assert [r.method for r in report.results] == ["bank", "rks", "mkl"]
    assert all(r.ok for r in report.results)
    assert len(report.to_csv().splitlines()) == 4


def test_metric_values_deterministic():
    a = run_benchmark(_reg_dataset(), [_FAST_RKS, _FAST_MKL], k=3, seed=5)
    b = run_benchmark(_reg_dataset(), [_FAST_RKS, _FAST_MKL], k=3, seed=5)
    for ra, rb in zip(a.results, b.results):
        assert ra.fold_values == rb.fold_values
        assert ra.mean == rb.mean and ra.stderr == rb.stderr


def test_method_stream_independent_of_list_order():
    ab = run_benchmark(_reg_dataset(), [_FAST_RKS, _FAST_MKL], k=3, seed=5)
    ba = run_benchmark(_reg_dataset(), [_FAST_MKL, _FAST_RKS], k=3, seed=5)
    rks_ab = next(r for r in ab.results if r.method == "rks")
    rks_ba = next(r for r in ba.results if r.method == "rks")
    assert rks_ab.fold_values == rks_ba.fold_values


def test_thread_pool_matches_sequential():
    seq = run_benchmark(_reg_dataset(), [_FAST_RKS, _FAST_MKL], k=3, seed=7,
                        threads=1)
    par = run_benchmark(_reg_dataset(), [_FAST_RKS, _FAST_MKL], k=3, seed=7,
                        threads=3)
    for rs, rp in zip(seq.results, par.results):
        assert rs.fold_values == rp.fold_values


def test_partial_failure_keeps_other_rows():
    bad = MethodSpec("rks", {"family": "matern"})
    report = run_benchmark(_reg_dataset(), [bad, _FAST_MKL], k=3, seed=0)
    failed, okrow = report.results
    assert not failed.ok and "matern" in failed.error
    assert okrow.ok
    assert report.any_failed
    lines = report.to_csv().splitlines()
    assert lines[1].startswith("rks,failed,")
    assert "failed" in report.to_text()


def test_validation_errors():
    ds = _reg_dataset()
    with pytest.raises(ValueError, match="unknown method"):
        MethodSpec("gp")
    with pytest.raises(ValueError, match="at least one"):
        run_benchmark(ds, [], k=3)
    with pytest.raises(ValueError, match="duplicate"):
        run_benchmark(ds, ["rks", "rks"], k=3)


def test_classification_benchmark():
    report = run_benchmark(_cls_dataset(), [_FAST_RKS], k=3, seed=3)
    row = report.results[0]
    assert row.ok and 0.0 <= row.mean < 0.5
    assert "error" in report.to_text()


def test_progress_callback():
    seen = []
    run_benchmark(
        _reg_dataset(), [_FAST_RKS], k=3, seed=0,
        progress=lambda name, fold, outcome: seen.append((name, fold)),
    )
    assert seen == [("rks", 0), ("rks", 1), ("rks", 2)]


def test_report_is_plain_data():
    report = run_benchmark(_reg_dataset(), [_FAST_RKS], k=3, seed=0)
    assert isinstance(report, BenchmarkReport)
    assert report.task == "regression" and report.k == 3 and report.seed == 0
