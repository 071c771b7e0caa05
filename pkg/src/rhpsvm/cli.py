"""Command-line interface.

Subcommands: train, predict, cv, losscurve, bench (noise | stability |
outlier) and bound.  Every run is deterministic given its flags and --seed;
outputs contain no timestamps and repeated identical invocations produce
byte-identical files.  Flag values can also come from a JSON config file
(--config); explicit flags win.  The effective configuration is echoed into
every output.

Exit status: 0 on success, 1 on a usage/validation error, 2 on a runtime or
solver error.
"""

from __future__ import annotations

import argparse
import itertools
import sys

import numpy as np

from . import jsonio
from .data import (
    Dataset,
    NoiseSpec,
    inject_label_noise,
    parse_csv,
    parse_libsvm,
    standardize,
    stratified_kfold,
    stratified_split,
)
from .evaluation import (
    FitConfig,
    accuracy_metrics,
    bound_inputs_for_model,
    bound_terms,
    outlier_shift,
    resampling_stability,
)
from .kernels import KernelSpec
from .losses import LossKind, LossParams, loss_table, loss_table_csv
from .model import decision_values, fit, load, predict_many, save
from .solver import SolverConfig, SolverError

__all__ = ["main", "entry"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); we want exit(1)
        raise UsageError(message)


_LOSS_NAMES = {"rhp": LossKind.RESCALED_HP, "hp": LossKind.HUBERIZED_PINBALL,
               "pinball": LossKind.PINBALL, "hinge": LossKind.HINGE}

_DEFAULTS = {
    "format": "csv", "loss": "rhp", "kernel": "linear",
    "gamma": 1.0, "degree": 3, "coef0": 0.0,
    "C": 1.0, "eta": 1.0, "lambda_": 1.0, "s": 1.0, "tau": 0.5,
    "standardize": False, "seed": 0, "folds": 5, "zeta": 0.05,
    "gamma_scale": 1.0, "repeats": 5, "resamples": 10, "distance": 100.0,
    "test_fraction": 0.3, "rates": "0,0.1,0.2",
}

_DEFAULT_GRID = {
    "C": [0.1, 1.0, 10.0, 100.0],
    "tau": [0.1, 0.5, 0.9],
    "s": [0.5, 1.0, 2.0],
    "lambda": [0.5, 1.0, 2.0],
    "eta": [1.0],
    "gamma": [0.01, 0.1, 1.0],
}


def _add_common(sp):
    sp.add_argument("--config", default=None, help="JSON file with default flag values")
    sp.add_argument("--seed", type=int, default=None)


def _add_data(sp, required=True):
    sp.add_argument("--data", required=required)
    sp.add_argument("--format", choices=["csv", "libsvm"], default=None)


def _add_hyper(sp):
    sp.add_argument("--loss", choices=sorted(_LOSS_NAMES), default=None)
    sp.add_argument("--kernel", choices=["linear", "rbf", "poly"], default=None)
    sp.add_argument("--gamma", type=float, default=None)
    sp.add_argument("--degree", type=int, default=None)
    sp.add_argument("--coef0", type=float, default=None)
    sp.add_argument("--C", type=float, default=None)
    sp.add_argument("--eta", type=float, default=None)
    sp.add_argument("--lambda", dest="lambda_", type=float, default=None)
    sp.add_argument("--s", type=float, default=None)
    sp.add_argument("--tau", type=float, default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="rhpsvm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("train", help="train a model and write a model file")
    _add_common(sp); _add_data(sp); _add_hyper(sp)
    sp.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=None)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("predict", help="predict with a saved model")
    _add_common(sp); _add_data(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("cv", help="cross-validated accuracy over a parameter grid")
    _add_common(sp); _add_data(sp); _add_hyper(sp)
    sp.add_argument("--folds", type=int, default=None)
    sp.add_argument("--grid", default=None, help="JSON file listing candidate values")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("losscurve", help="tabulate a loss and its derivative as CSV")
    _add_common(sp)
    sp.add_argument("--loss", choices=sorted(_LOSS_NAMES), default=None)
    sp.add_argument("--eta", type=float, default=None)
    sp.add_argument("--lambda", dest="lambda_", type=float, default=None)
    sp.add_argument("--s", type=float, default=None)
    sp.add_argument("--tau", type=float, default=None)
    sp.add_argument("--umin", type=float, required=True)
    sp.add_argument("--umax", type=float, required=True)
    sp.add_argument("--step", type=float, required=True)
    sp.add_argument("--out", default=None)

    bench = sub.add_parser("bench", help="robustness and stability benchmarks")
    bsub = bench.add_subparsers(dest="bench_command", required=True, parser_class=_Parser)

    sp = bsub.add_parser("noise", help="accuracy under training-label noise")
    _add_common(sp); _add_data(sp); _add_hyper(sp)
    sp.add_argument("--rates", default=None, help="comma-separated flip rates")
    sp.add_argument("--repeats", type=int, default=None)
    sp.add_argument("--test-fraction", dest="test_fraction", type=float, default=None)
    sp.add_argument("--out", required=True)

    sp = bsub.add_parser("stability", help="bootstrap resampling stability")
    _add_common(sp); _add_data(sp); _add_hyper(sp)
    sp.add_argument("--resamples", type=int, default=None)
    sp.add_argument("--test-fraction", dest="test_fraction", type=float, default=None)
    sp.add_argument("--out", required=True)

    sp = bsub.add_parser("outlier", help="hyperplane rotation under one far outlier")
    _add_common(sp); _add_data(sp); _add_hyper(sp)
    sp.add_argument("--distance", type=float, default=None)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("bound", help="evaluate the generalization bound for a model")
    _add_common(sp); _add_data(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--zeta", type=float, default=None)
    sp.add_argument("--gamma-scale", dest="gamma_scale", type=float, default=None)
    sp.add_argument("--out", default=None)

    return parser


def _resolve(args) -> dict:
    """Merge flags over config-file values over built-in defaults."""
    from_file = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                from_file = jsonio.loads(fh.read())
        except (OSError, ValueError) as err:
            raise UsageError(f"cannot read config file {args.config}: {err}") from None
        if not isinstance(from_file, dict):
            raise UsageError("config file must contain a JSON object")
    eff = {}
    for key, value in vars(args).items():
        if key in ("command", "bench_command", "config"):
            continue
        if value is not None:
            eff[key] = value
        elif key in from_file or key.replace("_", "-") in from_file:
            eff[key] = from_file.get(key, from_file.get(key.replace("_", "-")))
        else:
            eff[key] = _DEFAULTS.get(key)
    return eff


def _validate_loss_params(eff) -> LossParams:
    try:
        return LossParams(eta=eff["eta"], lambda_=eff["lambda_"], s=eff["s"], tau=eff["tau"])
    except ValueError as err:
        raise UsageError(str(err)) from None


def _validate_kernel(eff) -> KernelSpec:
    try:
        if eff["kernel"] == "linear":
            return KernelSpec.linear()
        if eff["kernel"] == "rbf":
            return KernelSpec.rbf(eff["gamma"])
        return KernelSpec.polynomial(int(eff["degree"]), eff["coef0"])
    except ValueError as err:
        raise UsageError(str(err)) from None


def _validate_solver(eff) -> SolverConfig:
    try:
        return SolverConfig(C=eff["C"], seed=eff["seed"])
    except ValueError as err:
        raise UsageError(str(err)) from None


def _load_dataset(eff) -> Dataset:
    with open(eff["data"], encoding="utf-8") as fh:
        text = fh.read()
    if eff["format"] == "libsvm":
        return parse_libsvm(text, name=eff["data"])
    return parse_csv(text, name=eff["data"])


def _echo(eff) -> dict:
    return {k: (v if not isinstance(v, bool) else v) for k, v in sorted(eff.items())}


def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _csv_with_config(header: str, rows: list[str], eff: dict) -> str:
    import json as _json
    comment = "# config " + _json.dumps(_echo(eff), sort_keys=True)
    return "\n".join([comment, header] + rows) + "\n"


def _cmd_train(eff) -> int:
    params = _validate_loss_params(eff)
    kernel = _validate_kernel(eff)
    cfg = _validate_solver(eff)
    kind = _LOSS_NAMES[eff["loss"]]
    ds = _load_dataset(eff)
    meta_extra = {}
    if eff["standardize"]:
        ds, transform = standardize(ds)
        meta_extra["standardize"] = {"mu": list(transform.mu), "sigma": list(transform.sigma)}
    model = fit(ds, kernel, params, cfg, kind)
    meta = dict(model.meta)
    meta.update(meta_extra)
    meta["config"] = _echo(eff)
    from dataclasses import replace
    model = replace(model, meta=meta)
    _write(eff["out"], save(model))
    preds = predict_many(model, ds.features)
    metrics = accuracy_metrics(preds, ds.labels)
    summary = {
        "n_train": ds.n, "d": ds.d,
        "iterations": meta.get("iterations"),
        "final_objective": meta.get("final_objective"),
        "train_accuracy": metrics.accuracy,
        "model_file": eff["out"],
        "config": _echo(eff),
    }
    sys.stdout.write(jsonio.dumps(summary))
    return 0


def _apply_model_transform(model, X):
    info = model.meta.get("standardize")
    if info:
        return (np.asarray(X, dtype=float) - np.asarray(info["mu"])) / np.asarray(info["sigma"])
    return X


def _cmd_predict(eff) -> int:
    with open(eff["model"], encoding="utf-8") as fh:
        model = load(fh.read())
    ds = _load_dataset(eff)
    X = _apply_model_transform(model, ds.features)
    values = decision_values(model, X)
    preds = np.where(values >= 0.0, 1, -1)
    rows = [f"{i},{v:.17g},{int(label):d}" for i, (v, label) in enumerate(zip(values, preds))]
    _write(eff["out"], _csv_with_config("index,decision,prediction", rows, eff))
    metrics = accuracy_metrics(preds.astype(float), ds.labels)
    sys.stdout.write(jsonio.dumps({
        "accuracy": metrics.accuracy,
        "tp": metrics.tp, "tn": metrics.tn, "fp": metrics.fp, "fn": metrics.fn,
        "config": _echo(eff),
    }))
    return 0


def _cmd_losscurve(eff) -> int:
    params = _validate_loss_params(eff)
    kind = _LOSS_NAMES[eff["loss"]]
    if not (eff["umin"] < eff["umax"]):
        raise UsageError("--umin must be smaller than --umax")
    if not (eff["step"] > 0):
        raise UsageError("--step must be positive")
    rows = loss_table(kind, params, eff["umin"], eff["umax"], eff["step"])
    text = loss_table_csv(rows)
    if eff.get("out"):
        _write(eff["out"], text)
    else:
        sys.stdout.write(text)
    return 0


def _grid_values(eff) -> dict:
    grid = dict(_DEFAULT_GRID)
    if eff.get("grid"):
        try:
            with open(eff["grid"], encoding="utf-8") as fh:
                user = jsonio.loads(fh.read())
        except (OSError, ValueError) as err:
            raise UsageError(f"cannot read grid file {eff['grid']}: {err}") from None
        if not isinstance(user, dict):
            raise UsageError("grid file must contain a JSON object")
        grid.update(user)
    if eff["kernel"] != "rbf":
        grid["gamma"] = [None]
    return grid


def _cmd_cv(eff) -> int:
    _validate_loss_params(eff)
    kernel_name = eff["kernel"]
    kind = _LOSS_NAMES[eff["loss"]]
    ds = _load_dataset(eff)
    folds_k = eff["folds"]
    grid = _grid_values(eff)
    try:
        folds = stratified_kfold(ds, folds_k, eff["seed"])
    except ValueError as err:
        raise UsageError(str(err)) from None
    from .data import subset

    header = "C,tau,s,lambda,eta,kernel,gamma,mean_accuracy,std_accuracy"
    rows = []
    best = None
    cells = itertools.product(grid["C"], grid["tau"], grid["s"], grid["lambda"],
                              grid["eta"], grid["gamma"])
    for C, tau, s, lam, eta, gamma in cells:
        try:
            params = LossParams(eta=eta, lambda_=lam, s=s, tau=tau)
            kernel = _validate_kernel({**eff, "gamma": gamma}) if gamma is not None \
                else _validate_kernel(eff)
            cfg = SolverConfig(C=C, seed=eff["seed"])
        except (ValueError, UsageError) as err:
            raise UsageError(f"bad grid cell: {err}") from None
        accs = []
        for train_idx, test_idx in folds:
            train, test = subset(ds, train_idx), subset(ds, test_idx)
            model = fit(train, kernel, params, cfg, kind)
            preds = predict_many(model, test.features)
            accs.append(accuracy_metrics(preds, test.labels).accuracy)
        accs = np.asarray(accs)
        mean, std = float(accs.mean()), float(accs.std())
        gtxt = f"{gamma:.17g}" if gamma is not None else ""
        rows.append(f"{C:.17g},{tau:.17g},{s:.17g},{lam:.17g},{eta:.17g},"
                    f"{kernel_name},{gtxt},{mean:.17g},{std:.17g}")
        cell = {"C": C, "tau": tau, "s": s, "lambda": lam, "eta": eta,
                "gamma": gamma, "mean_accuracy": mean, "std_accuracy": std}
        if best is None or mean > best["mean_accuracy"]:
            best = cell
    _write(eff["out"], _csv_with_config(header, rows, eff))
    sys.stdout.write(jsonio.dumps({"best": best, "cells": len(rows), "config": _echo(eff)}))
    return 0


def _bench_configs(eff, kernel, cfg):
    out = {}
    for name, kind in (("rhp", LossKind.RESCALED_HP), ("hp", LossKind.HUBERIZED_PINBALL),
                       ("pinball", LossKind.PINBALL), ("hinge", LossKind.HINGE)):
        params = _validate_loss_params(eff)
        out[name] = FitConfig(kind=kind, params=params, kernel=kernel, solver=cfg)
    return out


def _cmd_bench_noise(eff) -> int:
    kernel = _validate_kernel(eff)
    cfg = _validate_solver(eff)
    try:
        rates = [float(tok) for tok in str(eff["rates"]).split(",") if tok.strip() != ""]
        if not rates:
            raise ValueError("empty --rates")
        for rate in rates:
            NoiseSpec(rate=rate, seed=0)
    except ValueError as err:
        raise UsageError(f"--rates: {err}") from None
    if eff["repeats"] < 1:
        raise UsageError("--repeats must be >= 1")
    ds = _load_dataset(eff)
    train, test = stratified_split(ds, eff["test_fraction"], eff["seed"])
    configs = _bench_configs(eff, kernel, cfg)
    header = "rate,model,mean_accuracy,std_accuracy"
    rows = []
    for rate in rates:
        for name, config in configs.items():
            accs = []
            for rep in range(eff["repeats"]):
                noisy = inject_label_noise(train, NoiseSpec(rate=rate, seed=eff["seed"] + 7919 * rep))
                model = fit(noisy, config.kernel, config.params, config.solver, config.kind)
                preds = predict_many(model, test.features)
                accs.append(accuracy_metrics(preds, test.labels).accuracy)
            accs = np.asarray(accs)
            rows.append(f"{rate:.17g},{name},{accs.mean():.17g},{accs.std():.17g}")
    _write(eff["out"], _csv_with_config(header, rows, eff))
    return 0


def _cmd_bench_stability(eff) -> int:
    kernel = _validate_kernel(eff)
    cfg = _validate_solver(eff)
    if eff["resamples"] < 2:
        raise UsageError("--resamples must be >= 2")
    ds = _load_dataset(eff)
    train, test = stratified_split(ds, eff["test_fraction"], eff["seed"])
    configs = _bench_configs(eff, kernel, cfg)
    report = {}
    for name, config in configs.items():
        rep = resampling_stability(train, test, config, eff["resamples"], eff["seed"])
        report[name] = {
            "accuracies": [run.accuracy for run in rep.runs],
            "seeds": [run.seed for run in rep.runs],
            "redraws": [run.redraws for run in rep.runs],
            "mean": rep.mean,
            "std": rep.std,
        }
    report["config"] = _echo(eff)
    _write(eff["out"], jsonio.dumps(report))
    return 0


def _cmd_bench_outlier(eff) -> int:
    kernel = _validate_kernel(eff)
    if eff["kernel"] != "linear":
        raise UsageError("bench outlier supports --kernel linear only")
    cfg = _validate_solver(eff)
    ds = _load_dataset(eff)
    params = _validate_loss_params(eff)
    pos_mean = ds.features[ds.labels == 1.0].mean(axis=0)
    norm = float(np.linalg.norm(pos_mean))
    direction = pos_mean / norm if norm > 0 else np.eye(ds.d)[0]
    outlier_x = eff["distance"] * direction
    conf_rhp = FitConfig(LossKind.RESCALED_HP, params, kernel, cfg)
    conf_hinge = FitConfig(LossKind.HINGE, params, kernel, cfg)
    rep = outlier_shift(ds, outlier_x, -1.0, conf_rhp, conf_hinge)
    _write(eff["out"], jsonio.dumps({
        "outlier": {"distance": eff["distance"], "point": list(outlier_x), "label": -1},
        "angle_rhp": rep.angle_a, "angle_hinge": rep.angle_b,
        "norm_ratio_rhp": rep.norm_ratio_a, "norm_ratio_hinge": rep.norm_ratio_b,
        "config": _echo(eff),
    }))
    return 0


def _cmd_bound(eff) -> int:
    if not (0.0 < eff["zeta"] < 1.0):
        raise UsageError("--zeta must lie strictly inside (0, 1)")
    if not (eff["gamma_scale"] > 0.0):
        raise UsageError("--gamma-scale must be positive")
    with open(eff["model"], encoding="utf-8") as fh:
        model = load(fh.read())
    ds = _load_dataset(eff)
    X = _apply_model_transform(model, ds.features)
    ds_eval = Dataset(features=np.asarray(X, dtype=float), labels=ds.labels, name=ds.name)
    inputs = bound_inputs_for_model(model, ds_eval, eff["zeta"], eff["gamma_scale"])
    rep = bound_terms(inputs)
    payload = {
        "loss_term": rep.loss_term,
        "capacity_term": rep.capacity_term,
        "confidence_term": rep.confidence_term,
        "total": rep.total,
        "inputs": {
            "sum_loss": inputs.sum_loss, "n": inputs.n, "gamma": inputs.gamma,
            "b_norm": inputs.b_norm, "iota": inputs.iota,
            "gram_trace": inputs.gram_trace, "zeta": inputs.zeta,
        },
        "config": _echo(eff),
    }
    text = jsonio.dumps(payload)
    if eff.get("out"):
        _write(eff["out"], text)
    else:
        sys.stdout.write(text)
    return 0


_COMMANDS = {
    ("train", None): _cmd_train,
    ("predict", None): _cmd_predict,
    ("cv", None): _cmd_cv,
    ("losscurve", None): _cmd_losscurve,
    ("bench", "noise"): _cmd_bench_noise,
    ("bench", "stability"): _cmd_bench_stability,
    ("bench", "outlier"): _cmd_bench_outlier,
    ("bound", None): _cmd_bound,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except SystemExit as err:  # --help
        return 0 if err.code in (0, None) else int(err.code)
    handler = _COMMANDS[(args.command, getattr(args, "bench_command", None))]
    try:
        eff = _resolve(args)
        return handler(eff)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except SolverError as err:
        print(f"solver error: {err}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def entry():  # console-script hook
    raise SystemExit(main())
