"""Dataset loading, standardization, folds, metrics, synthetic data.

All transforms are pure; standardization statistics always come from
the training split alone and travel in a record that can undo them.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .rff import GaussianMixtureSpec, feature_map, sample_frequencies

__all__ = [
    "Dataset",
    "LoadResult",
    "StandardizeRecord",
    "FoldSplit",
    "load_csv",
    "write_csv",
    "write_folds_csv",
    "standardize",
    "kfold_splits",
    "metrics",
    "MetricRecord",
    "summarize_folds",
    "synth_spec_default",
    "synth_generate",
    "SynthResult",
]

TASKS = ("regression", "classification")


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    task: str = "regression"

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if x.shape[0] != y.shape[0]:
            raise DimensionError(
                f"x has {x.shape[0]} rows but y has {y.shape[0]} entries"
            )
        if x.shape[0] == 0:
            raise ValueError("dataset is empty")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise ValueError("dataset contains non-finite values")
        if self.task == "classification" and not np.all((y == 0) | (y == 1)):
            raise ValueError("classification labels must be 0 or 1")

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def dim(self):
        return self.x.shape[1]

    def subset(self, idx):
        return Dataset(self.x[idx], self.y[idx], self.task)


@dataclass(frozen=True)
class LoadResult:
    dataset: Dataset
    skipped_rows: tuple  # 1-based data row numbers that were dropped

    @property
    def n_skipped(self):
        return len(self.skipped_rows)


def _parse_row(fields, target_idx, label_map, row_no):
    vals = []
    for col, raw in enumerate(fields):
        text = raw.strip()
        if text == "":
            raise ValueError(f"row {row_no}, column {col + 1}: empty field")
        if col == target_idx and label_map is not None:
            if text not in label_map:
                raise ValueError(
                    f"row {row_no}, column {col + 1}: label {text!r} not in mapping"
                )
            vals.append(float(label_map[text]))
            continue
        try:
            vals.append(float(text))
        except ValueError:
            raise ValueError(
                f"row {row_no}, column {col + 1}: cannot parse {text!r}"
            ) from None
    return vals


def load_csv(path, target="last", header=False, label_map=None,
             skip_bad=False, task="regression"):
    """Read a comma-separated numeric file into a Dataset.

    target names the target column: "last", a 0-based index, or (with
    header=True) a column name. label_map converts raw target strings,
    e.g. {"-1": 0, "+1": 1}. Bad rows raise with row and column
    coordinates unless skip_bad is set, in which case they are counted
    in the returned report.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        rows = [r for r in reader if r and not all(f.strip() == "" for f in r)]
    if not rows:
        raise ValueError(f"{path}: file holds no data rows")

    names = None
    if header:
        names = [f.strip() for f in rows[0]]
        rows = rows[1:]
        if not rows:
            raise ValueError(f"{path}: file holds a header but no data rows")
    n_cols = len(rows[0])

    if target == "last":
        target_idx = n_cols - 1
    elif isinstance(target, int):
        target_idx = target if target >= 0 else n_cols + target
    else:
        if names is None:
            raise ValueError("column-name target needs header=True")
        if target not in names:
            raise ValueError(f"no column named {target!r} in header {names}")
        target_idx = names.index(target)
    if not 0 <= target_idx < n_cols:
        raise ValueError(f"target column {target} out of range for {n_cols} columns")

    if label_map is not None:
        label_map = {str(k).strip(): v for k, v in label_map.items()}

    parsed = []
    skipped = []
    for i, fields in enumerate(rows):
        row_no = i + 1
        try:
            if len(fields) != n_cols:
                raise ValueError(
                    f"row {row_no}: expected {n_cols} fields, got {len(fields)}"
                )
            parsed.append(_parse_row(fields, target_idx, label_map, row_no))
        except ValueError:
            if not skip_bad:
                raise
            skipped.append(row_no)
    if not parsed:
        raise ValueError(f"{path}: every data row was skipped")

    mat = np.array(parsed, dtype=np.float64)
    y = mat[:, target_idx]
    x = np.delete(mat, target_idx, axis=1)
    return LoadResult(Dataset(x, y, task), tuple(skipped))


def write_csv(path, x, y=None, header=None):
    """Write a numeric matrix (plus optional target column) as CSV with
    round-trip-exact float formatting."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if header is not None:
            writer.writerow(header)
        for i in range(x.shape[0]):
            row = [f"{v:.17g}" for v in x[i]]
            if y is not None:
                row.append(f"{y[i]:.17g}")
            writer.writerow(row)


@dataclass(frozen=True)
class StandardizeRecord:
    """Train-split statistics; enough to transform and to undo."""

    x_mean: np.ndarray
    x_scale: np.ndarray
    const_cols: np.ndarray
    y_mean: float
    y_scale: float
    standardize_x: bool
    task: str

    def apply(self, ds):
        x = ds.x
        if self.standardize_x:
            x = (x - self.x_mean) / self.x_scale
        y = ds.y
        if self.task == "regression":
            y = (y - self.y_mean) / self.y_scale
        return Dataset(x, y, ds.task)

    def inverse_y(self, y_std):
        if self.task != "regression":
            return np.asarray(y_std)
        return np.asarray(y_std) * self.y_scale + self.y_mean


def standardize(train, others=(), standardize_x=True):
    """Standardize by train statistics only.

    Returns (train_out, list_of_others_out, record). Zero-variance
    columns are centered but left at scale 1 and flagged.
    """
    x_mean = train.x.mean(axis=0)
    x_std = train.x.std(axis=0)
    const_cols = x_std == 0.0
    x_scale = np.where(const_cols, 1.0, x_std)
    if train.task == "regression":
        y_mean = float(train.y.mean())
        y_std = float(train.y.std())
        y_scale = y_std if y_std > 0 else 1.0
    else:
        y_mean, y_scale = 0.0, 1.0
    record = StandardizeRecord(
        x_mean=x_mean,
        x_scale=x_scale,
        const_cols=const_cols,
        y_mean=y_mean,
        y_scale=y_scale,
        standardize_x=standardize_x,
        task=train.task,
    )
    return record.apply(train), [record.apply(ds) for ds in others], record


@dataclass(frozen=True)
class FoldSplit:
    """One outer fold: fit on fit_idx, pick hyperparameters on val_idx,
    report on test_idx. train_idx is fit plus val."""

    fit_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray

    @property
    def train_idx(self):
        return np.concatenate([self.fit_idx, self.val_idx])


def kfold_splits(n, k, seed):
    """Disjoint, exhaustive folds with a fixed 20% validation slice."""
    if k < 2:
        raise ValueError(f"need k >= 2 folds, got {k}")
    if n < k:
        raise ValueError(f"cannot split {n} rows into {k} folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    test_folds = np.array_split(perm, k)
    splits = []
    for i in range(k):
        test_idx = test_folds[i]
        rest = np.concatenate([test_folds[j] for j in range(k) if j != i])
        n_val = max(1, int(round(0.2 * rest.size)))
        splits.append(
            FoldSplit(
                fit_idx=rest[n_val:].copy(),
                val_idx=rest[:n_val].copy(),
                test_idx=test_idx.copy(),
            )
        )
    return splits


def write_folds_csv(path, splits, n):
    """Export fold assignments as (index, fold) rows, test membership."""
    fold_of = np.full(n, -1, dtype=np.int64)
    for i, split in enumerate(splits):
        fold_of[split.test_idx] = i
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "fold"])
        for idx in range(n):
            writer.writerow([idx, fold_of[idx]])


@dataclass(frozen=True)
class MetricRecord:
    name: str
    value: float
    n: int


def metrics(predictions, truth, task):
    """MSE for regression; 0-1 error at the 0.5 threshold otherwise."""
    predictions = np.asarray(predictions, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    if predictions.shape[0] != truth.shape[0]:
        raise DimensionError(
            f"{predictions.shape[0]} predictions against {truth.shape[0]} targets"
        )
    if task == "regression":
        err = predictions - truth
        return MetricRecord("mse", float(err @ err / err.size), err.size)
    hard = predictions >= 0.5
    return MetricRecord(
        "error", float(np.mean(hard != (truth >= 0.5))), truth.size
    )


def summarize_folds(values):
    """Mean and standard error of a per-fold metric."""
    values = np.asarray(values, dtype=np.float64)
    mean = float(values.mean())
    if values.size < 2:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / math.sqrt(values.size))


def synth_spec_default():
    """Two-component spectral mixture: weights 1/2, means 0 and 3*pi/4,
    both variances 1/4 (in one dimension)."""
    return GaussianMixtureSpec(
        weights=np.array([0.5, 0.5]),
        means=np.array([[0.0], [3.0 * np.pi / 4.0]]),
        covs=np.array([[[0.25]], [[0.25]]]),
    )


@dataclass(frozen=True)
class SynthResult:
    dataset: Dataset
    spec: GaussianMixtureSpec
    freqs: np.ndarray
    beta: np.ndarray


def synth_generate(spec=None, n=1000, m_true=250, noise=1.0, x_std=4.0, seed=0):
    """Draw a regression dataset whose kernel is a known spectral
    mixture: X ~ N(0, x_std^2), frequencies from the mixture, weights
    beta ~ N(0, I), targets phi(X) beta plus Gaussian noise."""
    if spec is None:
        spec = synth_spec_default()
    rng = np.random.default_rng(seed)
    d = spec.dim
    x = rng.normal(0.0, x_std, size=(n, d))
    freqs = sample_frequencies(spec, m_true, rng)
    beta = rng.standard_normal(2 * m_true)
    y = feature_map(x, freqs) @ beta
    if noise > 0:
        y = y + rng.normal(0.0, noise, size=n)
    return SynthResult(Dataset(x, y, "regression"), spec, freqs, beta)
