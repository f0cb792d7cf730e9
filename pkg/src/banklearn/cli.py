"""Command-line interface.

Subcommands: train, predict, benchmark, kernel-export, synth. Runs
are configured by an INI-style key=value file; every effective value
(defaults included) is echoed to <out>/effective-config.ini so a run
can be reproduced from its output directory alone.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import traceback

import numpy as np

from . import __version__
from .baselines import mkl_fit_predict, rks_fit_predict
from .bench import MethodSpec, run_benchmark
from .classification import GaussianPrior
from .data import (
    Dataset,
    kfold_splits,
    load_csv,
    metrics,
    standardize,
    synth_generate,
    write_csv,
    write_folds_csv,
)
from .errors import ConfigError, ModelFormatError
from .model_store import BankModel, BaselineModel, load_model, save_model
from .regression import NigPrior
from .rff import mixture_kernel_eval, mixture_pdf
from .sampler import SamplerConfig, posterior_predict, run_chain
from .spectral import state_to_mixture_spec

__all__ = ["main"]


class _UsageError(Exception):
    """Anything the user can fix by editing flags, config, or inputs."""


# ---------------------------------------------------------------------------
# config file handling

def _bool(raw):
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected a boolean")


def _choice(*allowed):
    def conv(raw):
        value = raw.strip()
        if value not in allowed:
            raise ValueError(f"expected one of {', '.join(allowed)}")
        return value

    conv.label = f"one of {', '.join(allowed)}"
    return conv


# (default, converter) per key; the parsed config always carries every key
_SCHEMA = {
    "run": {
        "task": ("regression", _choice("regression", "classification")),
        "method": ("bank", _choice("bank", "rks", "mkl")),
        "seed": (0, int),
        "out": ("bank-out", str),
    },
    "data": {
        "path": ("", str),
        "target": ("last", str),
        "header": (False, _bool),
        "label_map": ("", str),
        "skip_bad": (False, _bool),
        "standardize_x": (True, _bool),
        "synth": (False, _bool),
        "synth_n": (1000, int),
        "synth_m_true": (250, int),
        "synth_noise": (1.0, float),
        "synth_x_std": (4.0, float),
    },
    "sampler": {
        "n_iters": (200, int),
        "burn_in": (100, int),
        "thin": (5, int),
        "n_freq": (500, int),
        "n_evidence_draws": (100, int),
        "alpha": (1.0, float),
        "proposal_mode": ("per-frequency", _choice("per-frequency", "full-block")),
        "exact_updates": (False, _bool),
        "nig_sigma": (1.0, float),
        "nig_a0": (1.0, float),
        "nig_b0": (1.0, float),
        "nig_mu_beta": (0.0, float),
        "class_sigma": (1.0, float),
        "class_mu_beta": (0.0, float),
    },
    "rks": {
        "family": ("rbf", _choice("rbf", "laplace", "cauchy")),
        "m": (300, int),
    },
    "mkl": {
        "m_total": (300, int),
    },
    "benchmark": {
        "methods": ("bank, rks, mkl", str),
        "k": (5, int),
    },
}


def load_config(path=None):
    """Schema-checked config with every default filled in."""
    cfg = {
        section: {key: default for key, (default, _) in fields.items()}
        for section, fields in _SCHEMA.items()
    }
    if path is None:
        return cfg
    if not os.path.exists(path):
        raise ConfigError(f"config file does not exist: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(
                f"unknown config section [{section}]; expected one of "
                f"{', '.join(_SCHEMA)}"
            )
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"unknown config key {section}.{key}; expected one of "
                    f"{', '.join(_SCHEMA[section])}"
                )
            _, conv = _SCHEMA[section][key]
            try:
                cfg[section][key] = conv(raw)
            except ValueError as exc:
                label = getattr(conv, "label", conv.__name__)
                detail = str(exc) or f"expected {label}"
                raise ConfigError(
                    f"{section}.{key}: cannot use {raw!r} ({detail})"
                ) from None
    return cfg


def _value_to_str(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def echo_config(cfg, out_dir):
    parser = configparser.ConfigParser(interpolation=None)
    for section, fields in cfg.items():
        parser[section] = {k: _value_to_str(v) for k, v in fields.items()}
    path = os.path.join(out_dir, "effective-config.ini")
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)
    return path


def _parse_target(cfg):
    raw = cfg["data"]["target"].strip()
    if raw == "last":
        return "last"
    try:
        return int(raw)
    except ValueError:
        pass
    if not cfg["data"]["header"]:
        raise ConfigError(
            f"data.target {raw!r} is a column name but data.header is false"
        )
    return raw


def _parse_label_map(raw):
    raw = raw.strip()
    if not raw:
        return None
    out = {}
    for item in raw.split(","):
        if ":" not in item:
            raise ConfigError(
                f"data.label_map entry {item.strip()!r} is not raw:label"
            )
        key, _, val = item.partition(":")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise ConfigError(
                f"data.label_map label {val.strip()!r} is not a number"
            ) from None
    return out


def _resolve_dataset(cfg):
    data = cfg["data"]
    task = cfg["run"]["task"]
    if data["synth"]:
        if task != "regression":
            raise ConfigError("data.synth generates regression data only")
        res = synth_generate(
            n=data["synth_n"],
            m_true=data["synth_m_true"],
            noise=data["synth_noise"],
            x_std=data["synth_x_std"],
            seed=cfg["run"]["seed"],
        )
        return res.dataset
    if not data["path"]:
        raise ConfigError(
            "data.path is required when data.synth is false"
        )
    if not os.path.exists(data["path"]):
        raise ConfigError(f"data.path does not exist: {data['path']}")
    try:
        loaded = load_csv(
            data["path"],
            target=_parse_target(cfg),
            header=data["header"],
            label_map=_parse_label_map(data["label_map"]),
            skip_bad=data["skip_bad"],
            task=task,
        )
    except (ValueError, OSError) as exc:
        raise _UsageError(f"data.path {data['path']}: {exc}") from None
    return loaded.dataset


def _sampler_options(cfg):
    s = cfg["sampler"]
    return {
        "n_iters": s["n_iters"],
        "burn_in": s["burn_in"],
        "thin": s["thin"],
        "n_freq": s["n_freq"],
        "n_evidence_draws": s["n_evidence_draws"],
        "alpha": s["alpha"],
        "proposal_mode": s["proposal_mode"],
        "exact_updates": s["exact_updates"],
        "nig": NigPrior(
            sigma=s["nig_sigma"], a0=s["nig_a0"], b0=s["nig_b0"],
            mu_beta=s["nig_mu_beta"],
        ),
        "class_prior": GaussianPrior(
            sigma=s["class_sigma"], mu_beta=s["class_mu_beta"],
        ),
    }


def _method_spec(cfg, name):
    if name == "bank":
        return MethodSpec("bank", _sampler_options(cfg))
    if name == "rks":
        return MethodSpec("rks", {"family": cfg["rks"]["family"],
                                  "m": cfg["rks"]["m"]})
    return MethodSpec("mkl", {"m_total": cfg["mkl"]["m_total"]})


# ---------------------------------------------------------------------------
# commands

def _say(args, message):
    if not args.quiet:
        print(message)


def cmd_train(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["run"]["seed"] = args.seed
    if args.out is not None:
        cfg["run"]["out"] = args.out
    out_dir = cfg["run"]["out"]
    os.makedirs(out_dir, exist_ok=True)
    echo_config(cfg, out_dir)

    dataset = _resolve_dataset(cfg)
    task = cfg["run"]["task"]
    method = cfg["run"]["method"]
    seed = cfg["run"]["seed"]
    if cfg["data"]["synth"]:
        data_path = os.path.join(out_dir, "train-data.csv")
        write_csv(data_path, dataset.x, dataset.y)

    # hold out one fold so the reported metric is out-of-sample
    try:
        fold = kfold_splits(dataset.n, 5, seed)[0]
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    train, others, record = standardize(
        dataset.subset(fold.fit_idx),
        [dataset.subset(fold.val_idx), dataset.subset(fold.test_idx)],
        standardize_x=cfg["data"]["standardize_x"],
    )
    val, test = others

    meta = {
        "method": method,
        "task": task,
        "seed": seed,
        "target": cfg["data"]["target"],
        "library_version": __version__,
    }
    if method == "bank":
        sconfig = SamplerConfig(task=task, seed=seed, **_sampler_options(cfg))
        merged = Dataset(
            np.vstack([train.x, val.x]),
            np.concatenate([train.y, val.y]),
            task,
        )
        trace = run_chain(merged.x, merged.y, sconfig)
        preds = posterior_predict(trace, test.x)
        model = BankModel(trace=trace, record=record, meta=meta)
    elif method == "rks":
        rng = np.random.default_rng(seed)
        res = rks_fit_predict(train, val, test, cfg["rks"]["family"],
                              cfg["rks"]["m"], rng)
        preds = res.predictions
        model = BaselineModel(result=res, task=task, record=record, meta=meta)
    else:
        rng = np.random.default_rng(seed)
        res = mkl_fit_predict(train, val, test, cfg["mkl"]["m_total"], rng)
        preds = res.predictions
        model = BaselineModel(result=res, task=task, record=record, meta=meta)

    rec = metrics(preds, test.y, task)
    report = {
        "task": task,
        "method": method,
        "seed": seed,
        "metric": rec.name,
        "value": rec.value,
        "n_train": int(train.n + val.n),
        "n_test": int(test.n),
    }
    metrics_path = os.path.join(out_dir, "metrics.json")
    with open(metrics_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
        fh.write("\n")
    model_path = os.path.join(out_dir, "model.bank")
    save_model(model_path, model)
    _say(args, f"{method} {task}: held-out {rec.name} = {rec.value:.6f}")
    _say(args, f"model:   {model_path}")
    _say(args, f"metrics: {metrics_path}")
    return 0


def _read_feature_matrix(path, header):
    if not os.path.exists(path):
        raise _UsageError(f"data file does not exist: {path}")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0,
                          ndmin=2)
    except ValueError as exc:
        raise _UsageError(f"{path}: {exc}") from None
    if data.size == 0:
        raise _UsageError(f"{path}: no data rows")
    return data


def _strip_target(data, d, target, path):
    cols = data.shape[1]
    if cols == d:
        return data
    if cols == d + 1:
        idx = cols - 1 if target == "last" else int(target)
        return np.delete(data, idx, axis=1)
    raise _UsageError(
        f"model expects d={d} feature columns; {path} has {cols} columns "
        f"(accepted: {d} or {d + 1} with the target included)"
    )


def cmd_predict(args):
    model = _load_model_checked(args.model)
    data = _read_feature_matrix(args.data, args.header)
    target = model.meta.get("target", "last")
    x = _strip_target(data, model.dim, target, args.data)
    record = model.record
    if record is not None and record.standardize_x:
        x = (x - record.x_mean) / record.x_scale
    preds = model.predict(x)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        if model.task == "classification":
            fh.write("index,prediction,probability\n")
            for i, p in enumerate(preds):
                fh.write(f"{i},{int(p >= 0.5)},{p:.17g}\n")
        else:
            if record is not None:
                preds = record.inverse_y(preds)
            fh.write("index,prediction\n")
            for i, p in enumerate(preds):
                fh.write(f"{i},{p:.17g}\n")
    _say(args, f"wrote {len(preds)} predictions to {args.out}")
    return 0


def cmd_benchmark(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["run"]["seed"] = args.seed
    if args.out is not None:
        cfg["run"]["out"] = args.out
    out_dir = cfg["run"]["out"]
    os.makedirs(out_dir, exist_ok=True)
    echo_config(cfg, out_dir)

    dataset = _resolve_dataset(cfg)
    seed = cfg["run"]["seed"]
    k = cfg["benchmark"]["k"]
    names = [m.strip() for m in cfg["benchmark"]["methods"].split(",") if m.strip()]
    try:
        specs = [_method_spec(cfg, name) if name in ("bank", "rks", "mkl")
                 else MethodSpec(name) for name in names]
        folds = kfold_splits(dataset.n, k, seed)
        report = run_benchmark(dataset, specs, k=k, seed=seed,
                               threads=args.threads)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None

    csv_path = os.path.join(out_dir, "benchmark.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_csv())
    write_folds_csv(os.path.join(out_dir, "folds.csv"), folds, dataset.n)
    _say(args, report.to_text())
    _say(args, f"table: {csv_path}")
    if report.any_failed:
        print("error: at least one method failed; see the table",
              file=sys.stderr)
        return 1
    return 0


def _load_model_checked(path):
    if not os.path.exists(path):
        raise _UsageError(f"model file does not exist: {path}")
    return load_model(path)


def cmd_kernel_export(args):
    model = _load_model_checked(args.model)
    if not isinstance(model, BankModel):
        raise _UsageError(
            "kernel export needs a sampled kernel-learner model; "
            "this file holds a fixed-kernel baseline"
        )
    if args.t_points < 1 or args.omega_points < 1:
        raise _UsageError("grids need at least one point")
    if args.t_max <= 0 or args.omega_max <= 0:
        raise _UsageError("grid extents must be positive")
    d = model.dim
    if not 0 <= args.axis < d:
        raise _UsageError(f"axis {args.axis} out of range for d={d}")

    snapshots = model.trace.snapshots or [None]
    if snapshots[0] is None:
        states = [model.trace.final_state]
    else:
        states = [s.state for s in snapshots]
    specs = [state_to_mixture_spec(state) for state in states]

    direction = np.zeros(d)
    direction[args.axis] = 1.0
    t_grid = np.linspace(-args.t_max, args.t_max, args.t_points)
    lags = t_grid[:, None] * direction[None, :]
    k_avg = np.mean([mixture_kernel_eval(lags, spec) for spec in specs], axis=0)

    w_grid = np.linspace(-args.omega_max, args.omega_max, args.omega_points)
    omegas = w_grid[:, None] * direction[None, :]
    rho_avg = np.mean([mixture_pdf(omegas, spec) for spec in specs], axis=0)

    os.makedirs(args.out, exist_ok=True)
    kernel_path = os.path.join(args.out, "kernel.csv")
    with open(kernel_path, "w", encoding="utf-8") as fh:
        fh.write("t,k\n")
        for t, kv in zip(t_grid, k_avg):
            fh.write(f"{t:.17g},{kv:.17g}\n")
    density_path = os.path.join(args.out, "density.csv")
    with open(density_path, "w", encoding="utf-8") as fh:
        fh.write("omega,rho\n")
        for w, rv in zip(w_grid, rho_avg):
            fh.write(f"{w:.17g},{rv:.17g}\n")
    _say(args, f"kernel:  {kernel_path}")
    _say(args, f"density: {density_path}")
    return 0


def cmd_synth(args):
    try:
        res = synth_generate(n=args.n, m_true=args.m_true, noise=args.noise,
                             x_std=args.x_std, seed=args.seed or 0)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    write_csv(args.out, res.dataset.x, res.dataset.y)
    _say(args, f"wrote {res.dataset.n} rows (d={res.dataset.dim}, "
               f"target last) to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# wiring

def _resolve_threads(raw):
    if raw is not None:
        value = raw
    else:
        env = os.environ.get("BANK_THREADS", "1")
        try:
            value = int(env)
        except ValueError:
            raise _UsageError(
                f"BANK_THREADS must be an integer, got {env!r}"
            ) from None
    if value < 1:
        raise _UsageError(f"thread count must be at least 1, got {value}")
    return value


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="bank",
        description="Learn shift-invariant kernels by sampling their "
                    "spectral density; fit and compare random-feature models.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="fit one method, save model + metrics")
    train.add_argument("--config", required=True, help="INI run config")
    train.add_argument("--seed", type=int, help="override run.seed")
    train.add_argument("--out", help="override run.out directory")
    train.add_argument("--quiet", action="store_true")
    train.set_defaults(func=cmd_train)

    predict = sub.add_parser("predict", help="apply a saved model to a CSV")
    predict.add_argument("--model", required=True)
    predict.add_argument("--data", required=True)
    predict.add_argument("--out", required=True, help="predictions CSV path")
    predict.add_argument("--header", action="store_true",
                         help="data file starts with a header row")
    predict.add_argument("--quiet", action="store_true")
    predict.set_defaults(func=cmd_predict)

    bench = sub.add_parser("benchmark", help="cross-validated method table")
    bench.add_argument("--config", required=True)
    bench.add_argument("--seed", type=int, help="override run.seed")
    bench.add_argument("--out", help="override run.out directory")
    bench.add_argument("--threads", type=int,
                       help="worker threads (default: BANK_THREADS or 1)")
    bench.add_argument("--quiet", action="store_true")
    bench.set_defaults(func=cmd_benchmark)

    export = sub.add_parser("kernel-export",
                            help="write kernel and spectral-density grids")
    export.add_argument("--model", required=True)
    export.add_argument("--out", required=True, help="output directory")
    export.add_argument("--t-max", type=float, default=10.0)
    export.add_argument("--t-points", type=int, default=401)
    export.add_argument("--omega-max", type=float, default=10.0)
    export.add_argument("--omega-points", type=int, default=401)
    export.add_argument("--axis", type=int, default=0,
                        help="coordinate axis for the d>1 slice")
    export.add_argument("--quiet", action="store_true")
    export.set_defaults(func=cmd_kernel_export)

    synth = sub.add_parser("synth", help="emit a synthetic benchmark CSV")
    synth.add_argument("--out", required=True, help="output CSV path")
    synth.add_argument("--n", type=int, default=1000)
    synth.add_argument("--m-true", type=int, default=250)
    synth.add_argument("--noise", type=float, default=1.0)
    synth.add_argument("--x-std", type=float, default=4.0)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--quiet", action="store_true")
    synth.set_defaults(func=cmd_synth)
    return parser


def _dump_diagnostics(args):
    out = getattr(args, "out", None)
    if out and not os.path.splitext(out)[1]:
        directory = out
    elif out:
        directory = os.path.dirname(out) or "."
    else:
        directory = "."
    try:
        os.makedirs(directory, exist_ok=True)
        path = os.path.join(directory, "bank-error.txt")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(traceback.format_exc())
        return path
    except OSError:
        return None


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if hasattr(args, "threads"):
            args.threads = _resolve_threads(args.threads)
        return args.func(args)
    except (_UsageError, ConfigError, ModelFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - the CLI boundary
        dump = _dump_diagnostics(args)
        message = f"error: {type(exc).__name__}: {exc}"
        if dump:
            message += f"\ndiagnostics: {dump}"
        print(message, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
