"""Versioned on-disk model artifacts.

A model file is a ZIP container holding `meta.json` (method, task,
seed, hyperparameters, array manifest, all plain text) next to one
entry per matrix under `arrays/`, stored as raw little-endian 64-bit
values in C order. Entries are written uncompressed with fixed
timestamps in sorted order, so saving the same model twice produces
the same bytes.

Loaded kernel-learner models rebuild genuine spectral states, so
kernel and density export work on them directly. The per-snapshot
weight posteriors are rebuilt only to prediction strength: enough
for point predictions and class probabilities, not for the Student-t
predictive variance (that would require the full design factor,
which is deliberately not persisted).
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass

import numpy as np

from .baselines import FitResult, KernelFamily
from .classification import GaussianPrior, LaplacePosterior
from .data import MetricRecord, StandardizeRecord
from .errors import ModelFormatError
from .regression import NigPrior
from .sampler import ChainTrace, SamplerConfig, Snapshot, posterior_predict
from .spectral import ComponentParams, NiwPrior, SpectralState

__all__ = [
    "FORMAT_VERSION",
    "BankModel",
    "BaselineModel",
    "StoredWeights",
    "load_model",
    "save_model",
]

FORMAT_NAME = "bank-model"
FORMAT_VERSION = 1

# fixed DOS epoch keeps archive bytes independent of wall clock
_ZIP_TIME = (1980, 1, 1, 0, 0, 0)
_DTYPES = {"<f8", "<i8"}


@dataclass(frozen=True)
class StoredWeights:
    """Prediction-grade regression posterior reloaded from disk."""

    mu_n: np.ndarray
    a_n: float
    b_n: float
    n_obs: int
    log_evidence: float

    @property
    def dim(self):
        return self.mu_n.shape[0]


@dataclass(frozen=True)
class BankModel:
    """A sampled kernel-learner chain plus its preprocessing record."""

    trace: ChainTrace
    record: StandardizeRecord | None
    meta: dict

    @property
    def task(self):
        return self.trace.config.task

    @property
    def dim(self):
        return self.trace.final_state.dim

    def predict(self, x, final_only=False, moderated=True):
        """Predictions in model (standardized) units."""
        return posterior_predict(
            self.trace, x, final_only=final_only, moderated=moderated
        )


@dataclass(frozen=True)
class BaselineModel:
    """A fitted random-feature baseline plus its preprocessing record."""

    result: FitResult
    task: str
    record: StandardizeRecord | None
    meta: dict

    @property
    def dim(self):
        return self.result.freqs[0].shape[1]

    def predict(self, x):
        return self.result.predict(x)


class _ArrayWriter:
    """Collects named arrays and renders the manifest + zip entries."""

    def __init__(self):
        self._arrays = {}

    def add(self, name, arr):
        arr = np.asarray(arr)
        if arr.dtype.kind == "f":
            arr = np.ascontiguousarray(arr, dtype="<f8")
        elif arr.dtype.kind in "iub":
            arr = np.ascontiguousarray(arr, dtype="<i8")
        else:
            raise TypeError(f"cannot persist array of dtype {arr.dtype}")
        if name in self._arrays:
            raise ValueError(f"duplicate array name {name!r}")
        self._arrays[name] = arr
        return name

    def manifest(self):
        return {
            name: {"dtype": arr.dtype.str, "shape": list(arr.shape)}
            for name, arr in self._arrays.items()
        }

    def entries(self):
        for name in sorted(self._arrays):
            yield f"arrays/{name}", self._arrays[name].tobytes(order="C")


def _record_to_meta(record, arrays):
    if record is None:
        return None
    arrays.add("std/x_mean", record.x_mean)
    arrays.add("std/x_scale", record.x_scale)
    arrays.add("std/const_cols", record.const_cols.astype(np.int64))
    return {
        "y_mean": record.y_mean,
        "y_scale": record.y_scale,
        "standardize_x": bool(record.standardize_x),
        "task": record.task,
    }


def _record_from_meta(section, arrays):
    if section is None:
        return None
    return StandardizeRecord(
        x_mean=arrays["std/x_mean"],
        x_scale=arrays["std/x_scale"],
        const_cols=arrays["std/const_cols"].astype(bool),
        y_mean=float(section["y_mean"]),
        y_scale=float(section["y_scale"]),
        standardize_x=bool(section["standardize_x"]),
        task=section["task"],
    )


def _config_to_meta(config):
    niw = None
    if config.niw is not None:
        niw = {
            "mu0": config.niw.mu0.tolist(),
            "kappa0": config.niw.kappa0,
            "psi0": config.niw.psi0.tolist(),
            "nu0": config.niw.nu0,
        }
    return {
        "task": config.task,
        "n_iters": config.n_iters,
        "burn_in": config.burn_in,
        "thin": config.thin,
        "n_freq": config.n_freq,
        "n_evidence_draws": config.n_evidence_draws,
        "seed": config.seed,
        "alpha": config.alpha,
        "proposal_mode": config.proposal_mode,
        "exact_updates": config.exact_updates,
        "niw": niw,
        "nig": {
            "sigma": config.nig.sigma,
            "a0": config.nig.a0,
            "b0": config.nig.b0,
            "mu_beta": config.nig.mu_beta,
        },
        "class_prior": {
            "sigma": config.class_prior.sigma,
            "mu_beta": config.class_prior.mu_beta,
        },
    }


def _config_from_meta(section):
    niw = None
    if section["niw"] is not None:
        niw = NiwPrior(
            mu0=np.asarray(section["niw"]["mu0"], dtype=float),
            kappa0=section["niw"]["kappa0"],
            psi0=np.asarray(section["niw"]["psi0"], dtype=float),
            nu0=section["niw"]["nu0"],
        )
    return SamplerConfig(
        task=section["task"],
        n_iters=section["n_iters"],
        burn_in=section["burn_in"],
        thin=section["thin"],
        n_freq=section["n_freq"],
        n_evidence_draws=section["n_evidence_draws"],
        seed=section["seed"],
        alpha=section["alpha"],
        proposal_mode=section["proposal_mode"],
        exact_updates=section["exact_updates"],
        niw=niw,
        nig=NigPrior(**section["nig"]),
        class_prior=GaussianPrior(**section["class_prior"]),
    )


def _state_to_meta(state, prefix, arrays):
    arrays.add(f"{prefix}/freqs", state.freqs)
    arrays.add(f"{prefix}/z", state.z)
    for j, comp in enumerate(state.components):
        arrays.add(f"{prefix}/comp{j}/mu", comp.mu)
        arrays.add(f"{prefix}/comp{j}/cov", comp.cov)
    return {"alpha": state.alpha, "n_components": len(state.components)}


def _state_from_meta(section, prefix, arrays):
    components = [
        ComponentParams(
            mu=arrays[f"{prefix}/comp{j}/mu"],
            cov=arrays[f"{prefix}/comp{j}/cov"],
        )
        for j in range(section["n_components"])
    ]
    return SpectralState(
        freqs=arrays[f"{prefix}/freqs"],
        z=arrays[f"{prefix}/z"],
        components=components,
        alpha=float(section["alpha"]),
    )


def _weights_to_meta(post, task, prefix, arrays):
    if task == "regression":
        arrays.add(f"{prefix}/mu_n", post.mu_n)
        return {
            "a_n": post.a_n,
            "b_n": post.b_n,
            "n_obs": post.n_obs,
            "log_evidence": post.log_evidence,
        }
    arrays.add(f"{prefix}/beta0", post.beta0)
    arrays.add(f"{prefix}/s_chol", post.s_chol)
    return {
        "converged": bool(post.converged),
        "iterations": int(post.iterations),
        "grad_norm": float(post.grad_norm),
    }


def _weights_from_meta(section, task, prefix, arrays):
    if task == "regression":
        return StoredWeights(
            mu_n=arrays[f"{prefix}/mu_n"],
            a_n=float(section["a_n"]),
            b_n=float(section["b_n"]),
            n_obs=int(section["n_obs"]),
            log_evidence=float(section["log_evidence"]),
        )
    s_chol = arrays[f"{prefix}/s_chol"]
    return LaplacePosterior(
        beta0=arrays[f"{prefix}/beta0"],
        s_n=s_chol @ s_chol.T,
        s_chol=s_chol,
        converged=bool(section["converged"]),
        iterations=int(section["iterations"]),
        grad_norm=float(section["grad_norm"]),
    )


def _bank_to_meta(model, arrays):
    trace = model.trace
    task = trace.config.task
    snaps = []
    for i, snap in enumerate(trace.snapshots):
        entry = {
            "state": _state_to_meta(snap.state, f"snap{i}", arrays),
            "weights": _weights_to_meta(
                snap.weight_posterior, task, f"snap{i}", arrays
            ),
            "log_evidence": snap.log_evidence,
            "n_components": snap.n_components,
            "accepted": snap.accepted,
            "proposed": snap.proposed,
        }
        snaps.append(entry)
    final = {
        "state": _state_to_meta(trace.final_state, "final", arrays),
        "weights": _weights_to_meta(trace.final_posterior, task, "final", arrays),
    }
    return {
        "config": _config_to_meta(trace.config),
        "snapshots": snaps,
        "final": final,
    }


def _bank_from_meta(section, arrays):
    config = _config_from_meta(section["config"])
    snaps = []
    for i, entry in enumerate(section["snapshots"]):
        snaps.append(
            Snapshot(
                state=_state_from_meta(entry["state"], f"snap{i}", arrays),
                weight_posterior=_weights_from_meta(
                    entry["weights"], config.task, f"snap{i}", arrays
                ),
                log_evidence=float(entry["log_evidence"]),
                n_components=int(entry["n_components"]),
                accepted=int(entry["accepted"]),
                proposed=int(entry["proposed"]),
            )
        )
    final = section["final"]
    return ChainTrace(
        snapshots=snaps,
        final_state=_state_from_meta(final["state"], "final", arrays),
        final_posterior=_weights_from_meta(
            final["weights"], config.task, "final", arrays
        ),
        config=config,
    )


def _baseline_to_meta(model, arrays):
    res = model.result
    for i, (fam, freqs) in enumerate(zip(res.families, res.freqs)):
        arrays.add(f"bank{i}/freqs", freqs)
    arrays.add("beta", res.beta)
    arrays.add("predictions", res.predictions)
    return {
        "families": [
            {"tag": fam.tag, "scale": fam.scale} for fam in res.families
        ],
        "chosen": res.chosen,
        "metric": {
            "name": res.metric.name,
            "value": res.metric.value,
            "n": res.metric.n,
        },
        "task": model.task,
    }


def _baseline_from_meta(section, arrays):
    families = tuple(
        KernelFamily(f["tag"], f["scale"]) for f in section["families"]
    )
    freqs = tuple(arrays[f"bank{i}/freqs"] for i in range(len(families)))
    metric = section["metric"]
    result = FitResult(
        predictions=arrays["predictions"],
        metric=MetricRecord(metric["name"], metric["value"], metric["n"]),
        chosen=section["chosen"],
        families=families,
        freqs=freqs,
        beta=arrays["beta"],
    )
    return result, section["task"]


def _json_scalar(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__} in model metadata")


def save_model(path, model):
    """Write a BankModel or BaselineModel as a versioned archive."""
    if not isinstance(model, (BankModel, BaselineModel)):
        raise TypeError(f"cannot persist object of type {type(model).__name__}")
    arrays = _ArrayWriter()
    meta = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "extra": dict(model.meta),
    }
    meta["standardize"] = _record_to_meta(model.record, arrays)
    if isinstance(model, BankModel):
        meta["kind"] = "bank"
        meta["bank"] = _bank_to_meta(model, arrays)
    else:
        meta["kind"] = "baseline"
        meta["baseline"] = _baseline_to_meta(model, arrays)
    meta["arrays"] = arrays.manifest()

    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as zf:
        payload = json.dumps(
            meta, sort_keys=True, indent=1, default=_json_scalar
        ).encode()
        entries = [("meta.json", payload)]
        entries.extend(arrays.entries())
        for name, payload in sorted(entries):
            info = zipfile.ZipInfo(name, date_time=_ZIP_TIME)
            info.external_attr = 0o644 << 16
            zf.writestr(info, payload)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def _read_arrays(zf, manifest):
    out = {}
    for name, spec in manifest.items():
        if spec["dtype"] not in _DTYPES:
            raise ModelFormatError(
                f"array {name!r} has unsupported dtype {spec['dtype']!r}"
            )
        try:
            raw = zf.read(f"arrays/{name}")
        except KeyError:
            raise ModelFormatError(
                f"manifest names array {name!r} but the archive lacks it"
            ) from None
        arr = np.frombuffer(raw, dtype=np.dtype(spec["dtype"]))
        expected = int(np.prod(spec["shape"], dtype=np.int64))
        if arr.size != expected:
            raise ModelFormatError(
                f"array {name!r} holds {arr.size} values, manifest says {expected}"
            )
        out[name] = arr.reshape(spec["shape"]).copy()
    return out


def load_model(path):
    """Read a model archive back; raises ModelFormatError on anything
    that is not a compatible model file."""
    try:
        with zipfile.ZipFile(path, "r") as zf:
            try:
                meta = json.loads(zf.read("meta.json"))
            except KeyError:
                raise ModelFormatError(f"{path}: missing meta.json") from None
            if not isinstance(meta, dict) or meta.get("format") != FORMAT_NAME:
                raise ModelFormatError(f"{path}: not a {FORMAT_NAME} file")
            version = meta.get("format_version")
            if version != FORMAT_VERSION:
                raise ModelFormatError(
                    f"{path}: format_version {version} is not supported "
                    f"(this build reads version {FORMAT_VERSION})"
                )
            arrays = _read_arrays(zf, meta.get("arrays", {}))
    except zipfile.BadZipFile:
        raise ModelFormatError(f"{path}: not a model archive") from None

    record = _record_from_meta(meta.get("standardize"), arrays)
    extra = meta.get("extra", {})
    if meta.get("kind") == "bank":
        trace = _bank_from_meta(meta["bank"], arrays)
        return BankModel(trace=trace, record=record, meta=extra)
    if meta.get("kind") == "baseline":
        result, task = _baseline_from_meta(meta["baseline"], arrays)
        return BaselineModel(result=result, task=task, record=record, meta=extra)
    raise ModelFormatError(f"{path}: unknown model kind {meta.get('kind')!r}")
