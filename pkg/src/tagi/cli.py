"""Command-line front end.

    tagi moments-check --samples 1000000 --seed 0 --cases 100
    tagi toy1d   --config toy.json  --out runs/toy
    tagi regress --config uci.json  --dataset boston --out runs/boston
    tagi mnist   --config mnist.json --limit 10000 --out runs/mnist

Configs are JSON; every key is optional and unknown keys are rejected.
Benchmark files are looked up in ``$TAGI_DATA_DIR`` (default ``./data``).
Exit codes: 0 success, 1 config error, 2 data error, 3 moments-check band
failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import data as tdata
from .heads import decision_fractions
from .moments import GaussianQuad, product_cross_cov, product_mean, product_product_cov, product_var
from .net import InitSpec, NetworkArch, init_network
from .oracle import mc_product_moments
from .train import (ClassificationTask, TrainConfig, benchmark_regression, fit, predict, regression_metrics, train_epoch,
                    train_stream)

log = logging.getLogger("tagi")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_BAND = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# datasets known by name; paths are relative to the data directory

DATASETS = {
    "boston": {"path": "boston.csv", "target_columns": ["medv"], "splits": 20, "test_size": 51},
    "concrete": {"path": "concrete.csv", "target_columns": [-1], "splits": 20, "test_size": 103},
    "energy": {"path": "energy.csv", "target_columns": [-2], "drop_columns": [-1], "splits": 20, "test_size": 77},
    "kin8nm": {"path": "kin8nm.csv", "target_columns": [-1], "splits": 20, "test_size": 819},
    "naval": {"path": "naval.csv", "target_columns": [-1], "drop_columns": [-2], "splits": 20, "test_size": 1193},
    "power": {"path": "power.csv", "target_columns": [-1], "splits": 20, "test_size": 957},
    "protein": {"path": "protein.csv", "target_columns": [0], "splits": 5, "test_size": 4373},
    "wine": {"path": "wine.csv", "target_columns": [-1], "splits": 20, "test_size": 160},
    "yacht": {"path": "yacht.csv", "target_columns": [-1], "splits": 20, "test_size": 31},
    "mnist": {
        "train_images": "train-images-idx3-ubyte",
        "train_labels": "train-labels-idx1-ubyte",
        "test_images": "t10k-images-idx3-ubyte",
        "test_labels": "t10k-labels-idx1-ubyte",
    },
    # 5 000-image subset, split into train/test by the harness
    "mnist5k": {
        "train_images": "mnist5k-images-idx3-ubyte",
        "train_labels": "mnist5k-labels-idx1-ubyte",
        "test_size": 1000,
    },
}

# --------------------------------------------------------------------------
# configuration

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_count = {"type": "integer", "minimum": 1}
_col = {"type": ["integer", "string"]}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "task": {"enum": ["regression", "classification"]},
        "seed": {"type": "integer", "minimum": 0},
        "arch": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "hidden": {"type": "array", "items": _count},
                "activation": {"enum": ["relu", "softplus", "tanh", "sigmoid", "linear"]},
            },
        },
        "init": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"gain": _pos, "bias_var": _pos},
        },
        "train": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epochs": _count,
                "batch_size": _count,
                "early_stop": {"type": "boolean"},
                "sigma_v": {"anyOf": [_pos, {"type": "null"}]},
                "sigma_v_grid": {"type": "array", "items": _pos},
                "alpha": _pos,
                "cv_folds": {"type": "integer", "minimum": 2},
                "cv_epochs": {"anyOf": [_count, {"type": "null"}]},
            },
        },
        "data": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dataset": {"type": "string"},
                "path": {"type": "string"},
                "target_columns": {"type": "array", "items": _col, "minItems": 1},
                "drop_columns": {"type": "array", "items": _col},
                "delimiter": {"type": ["string", "null"]},
                "normalization": {"enum": ["standard", "range", "none"]},
                "splits": _count,
                "test_size": _count,
                "n_train": _count,
                "n_val": _count,
                "n_test": _count,
                "noise_std": {"type": "number", "minimum": 0},
                "x_range": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "train_images": {"type": "string"},
                "train_labels": {"type": "string"},
                "test_images": {"type": "string"},
                "test_labels": {"type": "string"},
                "val_fraction": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "checkpoints": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "phis": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}},
            },
        },
    },
}

DEFAULTS = {
    "toy1d": {
        "task": "regression",
        "seed": 0,
        "arch": {"hidden": [100], "activation": "relu"},
        "init": {"gain": 0.25, "bias_var": 0.01},
        # sigma_v null: the generating noise std expressed in normalised units
        "train": {"epochs": 50, "batch_size": 1, "early_stop": True, "sigma_v": None},
        "data": {"n_train": 20, "n_val": 20, "n_test": 100, "noise_std": 3.0, "x_range": [-4.0, 4.0],
                 "normalization": "range"},
    },
    "regress": {
        "task": "regression",
        "seed": 0,
        "arch": {"hidden": [50], "activation": "relu"},
        "init": {"gain": 0.25, "bias_var": 0.01},
        "train": {"epochs": 40, "batch_size": 1, "early_stop": False, "sigma_v": 1.0,
                  "sigma_v_grid": [0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5, 0.75, 1.0], "cv_folds": 5,
                  "cv_epochs": None},
        "data": {"normalization": "standard"},
    },
    "mnist": {
        "task": "classification",
        "seed": 0,
        "arch": {"hidden": [100, 100], "activation": "relu"},
        "init": {"gain": 1.0, "bias_var": 0.01},
        "train": {"epochs": 1, "batch_size": 1, "early_stop": False, "sigma_v": 0.2, "sigma_v_grid": [],
                  "alpha": 1.0 / 3.0},
        "data": {"dataset": "mnist", "val_fraction": 0.05, "checkpoints": [0, 60, 600, 6000, 60000],
                 "phis": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.999]},
    },
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve_config(command: str, user: dict | None = None) -> dict:
    """Validate a user config and fill in the command's defaults."""
    user = user or {}
    try:
        jsonschema.validate(user, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config {where}: {e.message}") from None
    cfg = _merge(DEFAULTS[command], user)
    jsonschema.validate(cfg, CONFIG_SCHEMA)
    return cfg


def load_config(command: str, path) -> dict:
    if path is None:
        return resolve_config(command)
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return resolve_config(command, raw)


def _arch(cfg, input_dim, output_dim) -> NetworkArch:
    return NetworkArch(input_dim, tuple(cfg["arch"]["hidden"]), output_dim, cfg["arch"]["activation"])


def _init(cfg) -> InitSpec:
    return InitSpec(cfg["init"]["gain"], cfg["init"]["bias_var"])


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


# --------------------------------------------------------------------------
# moments-check


def random_quad(rng) -> GaussianQuad:
    """Means in [-2, 2]; PSD covariance with variances in [0.01, 4]."""
    mu = rng.uniform(-2.0, 2.0, 4)
    g = rng.standard_normal((4, 6))
    corr = g @ g.T
    d = np.sqrt(np.diag(corr))
    corr = corr / np.outer(d, d)
    sd = np.sqrt(rng.uniform(0.01, 4.0, 4))
    return GaussianQuad(mu, corr * np.outer(sd, sd))


def _fixed_quads():
    # the worked product examples: a correlated pair and an independent pair
    c = np.zeros((4, 4))
    c[:2, :2] = [[1.0, 0.4], [0.4, 2.0]]
    c[2:, 2:] = np.eye(2)
    yield "pair_correlated", GaussianQuad(np.array([0.5, -0.7, 0.0, 0.0]), c)
    c = np.zeros((4, 4))
    c[:2, :2] = np.diag([0.25, 0.25])
    c[2:, 2:] = c[:2, :2]
    yield "pair_independent", GaussianQuad(np.array([1.0, 2.0, 1.0, 2.0]), c)


def closed_forms(quad: GaussianQuad) -> dict:
    return {
        "mean12": product_mean(quad.pair(0, 1)),
        "cross_cov": product_cross_cov(quad),
        "prod_prod_cov": product_product_cov(quad),
        "var12": product_var(quad.pair(0, 1)),
    }


def run_moments_check(samples: int, seed: int, cases: int, n_se: float = 4.0) -> dict:
    rng = np.random.default_rng(seed)
    named = list(_fixed_quads()) + [(f"random_{i}", random_quad(rng)) for i in range(cases)]
    rows = []
    for i, (name, quad) in enumerate(named):
        est = mc_product_moments(quad, samples, seed=seed * 1_000_003 + i)
        checks = {}
        for key, value in closed_forms(quad).items():
            e = est[key]
            checks[key] = {
                "closed_form": value,
                "estimate": e.value,
                "std_error": e.std_error,
                "z": e.z_score(value),
                "band": [e.value - n_se * e.std_error, e.value + n_se * e.std_error],
                "pass": bool(e.covers(value, n_se)),
            }
        rows.append({"case": name, "mu": quad.mu.tolist(), "cov": quad.cov.tolist(), "checks": checks,
                     "pass": all(c["pass"] for c in checks.values())})
    random_rows = [r for r in rows if r["case"].startswith("random_")]
    return {
        "samples": samples,
        "seed": seed,
        "n_se": n_se,
        "cases": rows,
        "random_cases_passed": sum(r["pass"] for r in random_rows),
        "random_cases": len(random_rows),
        "all_pass": all(r["pass"] for r in rows),
    }


# --------------------------------------------------------------------------
# toy 1-D regression


def run_toy1d(cfg: dict) -> dict:
    """Train on the cubic toy problem with validation-based epoch selection.

    Returns a dict with ``summary`` (JSON-able), ``epochs`` rows
    ``(epoch, train_ll, val_ll)`` and ``curves`` rows
    ``(epoch, x, mean, lower, upper)`` in original units.
    """
    d, seed = cfg["data"], cfg["seed"]
    lo, hi = d["x_range"]
    kw = dict(noise_std=d["noise_std"], x_range=(lo, hi))
    train = tdata.make_toy_cubic(d["n_train"], rng_seed=3 * seed, **kw)
    val = tdata.make_toy_cubic(d["n_val"], rng_seed=3 * seed + 1, **kw)
    test = tdata.make_toy_cubic(d["n_test"], rng_seed=3 * seed + 2, **kw)
    norm = tdata.Normalizer.fit(train, d["normalization"])
    sigma_v = cfg["train"]["sigma_v"]
    if sigma_v is None:
        sigma_v = max(d["noise_std"], 1e-6) / float(norm.y.scale[0])
    t = cfg["train"]
    tc = TrainConfig(epochs=t["epochs"], batch_size=t["batch_size"], shuffle_seed=seed, sigma_v=sigma_v,
                     early_stop=t["early_stop"])
    arch = _arch(cfg, 1, 1)
    prior = init_network(arch, _init(cfg), seed)
    ntrain, nval = norm.apply(train), norm.apply(val)
    res = fit(arch, ntrain, nval, tc, params=prior)
    after_one = train_epoch(prior, ntrain, tc, activation=arch.activation, epoch=1)

    grid = np.linspace(lo - 1.0, hi + 1.0, 201)[:, None]
    snapshots = {0: prior, 1: after_one, res.best_epoch: res.params, tc.epochs: res.final_params}
    curves = []
    for epoch in sorted(snapshots):
        p = predict(snapshots[epoch], norm.x.normalize(grid), arch.activation)
        m = norm.y.denormalize(p.mean)[:, 0]
        s = np.sqrt(norm.y.denormalize_var(p.var + sigma_v**2))[:, 0]
        curves += [(epoch, float(x), float(a), float(a - 3 * b), float(a + 3 * b))
                   for x, a, b in zip(grid[:, 0], m, s)]

    p = predict(res.params, norm.x.normalize(test.x), arch.activation)
    m = norm.y.denormalize(p.mean)
    s = np.sqrt(norm.y.denormalize_var(p.var + sigma_v**2))
    coverage = float(np.mean(np.abs(test.y - m) <= 3 * s))

    metrics = regression_metrics(p, test.y, sigma_v, norm)
    summary = {
        "best_epoch": res.best_epoch,
        "epochs": tc.epochs,
        "sigma_v": sigma_v,
        "val_ll_best": res.val_ll[res.best_epoch],
        "val_ll_last": res.val_ll[-1],
        "test_rmse": metrics.rmse,
        "test_ll": metrics.avg_ll,
        "test_coverage_3sigma": coverage,
        "config": cfg,
        "seed": seed,
    }
    epochs = [(e, tr, va) for e, (tr, va) in enumerate(zip(res.train_ll, res.val_ll))]
    return {"summary": summary, "epochs": epochs, "curves": curves}


# --------------------------------------------------------------------------
# regression benchmark


def _resolve_path(p: str) -> Path:
    path = Path(p)
    return path if path.is_absolute() else tdata.data_dir() / path


def load_regression_dataset(cfg: dict, name: str | None):
    """Load a CSV benchmark; config ``data`` keys override the named entry."""
    d = dict(cfg["data"])
    if name is not None:
        if name not in DATASETS or "path" not in DATASETS[name]:
            raise ConfigError(f"unknown dataset {name!r}; known: {sorted(k for k in DATASETS if 'mnist' not in k)}")
        d = {**DATASETS[name], **d}
    if "path" not in d:
        raise ConfigError("no dataset: give --dataset or data.path")
    path = _resolve_path(d["path"])
    if not path.exists():
        raise FileNotFoundError(f"dataset file missing: {path} (set ${tdata.DATA_DIR_ENV})")
    ds = tdata.load_csv(path, d.get("target_columns", [-1]), d.get("delimiter"), d.get("drop_columns", ()))
    return ds, d


def run_regress(cfg: dict, dataset: str | None, jobs: int = 1) -> dict:
    ds, d = load_regression_dataset(cfg, dataset)
    t = cfg["train"]
    tc = TrainConfig(epochs=t["epochs"], batch_size=t["batch_size"], shuffle_seed=cfg["seed"], sigma_v=t["sigma_v"],
                     sigma_v_grid=tuple(t["sigma_v_grid"]), folds=t["cv_folds"], cv_epochs=t["cv_epochs"])
    arch = _arch(cfg, ds.x.shape[1], ds.y.shape[1])
    splits = d.get("splits", 20)
    test_size = d.get("test_size") or int(np.ceil(0.1 * len(ds)))
    t0 = time.perf_counter()
    res = benchmark_regression(ds, arch, tc, splits=splits, test_size=test_size, split_seed=cfg["seed"],
                               init=_init(cfg), init_seed=cfg["seed"], jobs=jobs)
    wall = time.perf_counter() - t0
    summary = res.summary()
    timing = {"seconds_per_fold": summary.pop("seconds_per_fold"), "wall_seconds": wall, "jobs": jobs}
    summary.update({
        "dataset": dataset or d.get("path"),
        "data": d,
        "n": len(ds),
        "input_dim": ds.x.shape[1],
        "train_size": len(ds) - test_size,
        "test_size": test_size,
        "config": cfg,
        "seed": cfg["seed"],
    })
    return {"metrics": summary, "timing": timing}


# --------------------------------------------------------------------------
# MNIST


def load_mnist(cfg: dict):
    d = cfg["data"]
    files = dict(DATASETS.get(d.get("dataset", "mnist"), {}))
    if "train_images" in d and "test_images" not in d:
        # own training files without a test pair: hold out part of them instead
        files.pop("test_images", None)
        files.pop("test_labels", None)
    files.update({k: v for k, v in d.items() if k in ("train_images", "train_labels", "test_images", "test_labels",
                                                     "test_size")})
    if "train_images" not in files:
        raise ConfigError("no MNIST files configured")
    train = tdata.load_mnist_idx(_resolve_path(files["train_images"]), _resolve_path(files["train_labels"]))
    if "test_images" in files:
        test = tdata.load_mnist_idx(_resolve_path(files["test_images"]), _resolve_path(files["test_labels"]))
    else:
        split = tdata.kfold(len(train), 2, seed=cfg["seed"], test_size=files.get("test_size", len(train) // 5))[0]
        train, test = train.subset(split.train), train.subset(split.test)
    return train, test


def run_mnist(cfg: dict, limit: int | None = None) -> dict:
    """Online classification with checkpointed test evaluation.

    Returns ``metrics`` (JSON-able) and ``decisions`` rows
    ``(observations, phi, correct, incorrect, unknown)``.
    """
    train, test = load_mnist(cfg)
    seed, t, d = cfg["seed"], cfg["train"], cfg["data"]
    rng = np.random.default_rng([seed, 1])
    order = rng.permutation(len(train))
    grid = tuple(t["sigma_v_grid"]) or (t["sigma_v"],)
    need_val = t["early_stop"] or len(grid) > 1
    n_val = int(round(d["val_fraction"] * len(train))) if need_val else 0
    val, train = train.subset(order[:n_val]), train.subset(order[n_val:])
    if limit is not None:
        train = train.subset(np.arange(min(limit, len(train))))

    task = ClassificationTask(10, t["alpha"])
    arch = _arch(cfg, train.x.shape[1], task.output_dim())
    prior = init_network(arch, _init(cfg), seed)
    targets = task.targets(train.y)
    phis = np.asarray(d["phis"])

    # sigma_v candidates (and epochs) are compared on the validation split
    chosen = float(grid[0])
    if len(grid) > 1:
        scores = []
        for s in grid:
            p = train_stream(prior, train.x, targets, s, activation=arch.activation, batch_size=t["batch_size"])
            scores.append(float(np.mean(task.log_likelihood(predict(p, val.x, arch.activation), val.y, s))))
        chosen = float(grid[int(np.argmax(scores))])
        log.info("sigma_v scores %s -> %s", dict(zip(grid, scores)), chosen)

    checkpoints = sorted({c for c in d["checkpoints"] if c <= len(train)} | {len(train)})
    records, decisions = [], []

    def on_checkpoint(count, params):
        probs = task.probabilities(predict(params, test.x, arch.activation), chosen)
        truth_p = probs[np.arange(len(test)), test.y]
        err = float(np.mean(probs.argmax(axis=-1) != test.y))
        records.append({"observations": count, "test_error": err, "median_true_prob": float(np.median(truth_p)),
                        "mean_true_prob": float(np.mean(truth_p))})
        for phi, row in zip(phis, decision_fractions(probs, test.y, phis)):
            decisions.append((count, float(phi), *map(float, row)))
        log.info("after %d observations: test error %.4f", count, err)

    params = train_stream(prior, train.x, targets, chosen, activation=arch.activation,
                          batch_size=t["batch_size"], checkpoints=checkpoints, on_checkpoint=on_checkpoint)
    epoch_errors = [records[-1]["test_error"]]
    best_epoch, best_params = 1, params
    val_ll = []
    if t["epochs"] > 1:
        tc = TrainConfig(epochs=1, batch_size=t["batch_size"], shuffle_seed=seed, sigma_v=chosen)
        best_ll = -np.inf
        for e in range(1, t["epochs"] + 1):
            if e > 1:
                params = train_epoch(params, train, tc, activation=arch.activation, task=task, epoch=e)
                probs = task.probabilities(predict(params, test.x, arch.activation), chosen)
                epoch_errors.append(float(np.mean(probs.argmax(axis=-1) != test.y)))
            if len(val):
                ll = float(np.mean(task.log_likelihood(predict(params, val.x, arch.activation), val.y, chosen)))
                val_ll.append(ll)
                if ll > best_ll:
                    best_ll, best_epoch, best_params = ll, e, params
            else:
                best_epoch, best_params = e, params
    if not t["early_stop"]:
        best_epoch = t["epochs"]
    metrics = {
        "train_size": len(train),
        "val_size": len(val),
        "test_size": len(test),
        "sigma_v": chosen,
        "checkpoints": records,
        "test_error_epoch1": epoch_errors[0],
        "test_error_per_epoch": epoch_errors,
        "val_ll_per_epoch": val_ll,
        "best_epoch": best_epoch,
        "test_error": epoch_errors[best_epoch - 1],
        "config": cfg,
        "seed": seed,
        "limit": limit,
    }
    return {"metrics": metrics, "decisions": decisions}


# --------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tagi", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    m = sub.add_parser("moments-check", help="Monte-Carlo check of the product-moment formulas")
    m.add_argument("--samples", type=int, default=1_000_000)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--cases", type=int, default=100)
    m.add_argument("--out", type=Path, help="write the JSON report here instead of stdout")

    for name, help_ in (("toy1d", "cubic toy regression"), ("regress", "repeated-split regression benchmark"),
                        ("mnist", "online MNIST classification")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path)
        p.add_argument("--out", type=Path, required=True)
        p.add_argument("--seed", type=int, help="override the config seed")
        if name == "regress":
            p.add_argument("--dataset", help=f"one of {sorted(k for k in DATASETS if 'mnist' not in k)}")
            p.add_argument("--jobs", type=int, default=1, help="worker processes for the splits")
        if name == "mnist":
            p.add_argument("--limit", type=int, help="truncate the training stream")
    return ap


def _with_seed(cfg, seed):
    if seed is not None:
        cfg["seed"] = seed
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "moments-check":
            if args.samples < 10_000 or args.cases < 0:
                raise ConfigError("--samples must be >= 10000 and --cases >= 0")
            report = run_moments_check(args.samples, args.seed, args.cases)
            text = json.dumps(report, indent=2, sort_keys=True) + "\n"
            if args.out:
                args.out.parent.mkdir(parents=True, exist_ok=True)
                args.out.write_text(text)
            else:
                sys.stdout.write(text)
            return EXIT_OK if report["all_pass"] else EXIT_BAND

        cfg = _with_seed(load_config(args.command, args.config), args.seed)
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "toy1d":
            res = run_toy1d(cfg)
            _write_csv(args.out / "epochs.csv", ["epoch", "train_ll", "val_ll"], res["epochs"])
            _write_csv(args.out / "predictive.csv", ["epoch", "x", "mean", "lower", "upper"], res["curves"])
            _write_json(args.out / "summary.json", res["summary"])
        elif args.command == "regress":
            if args.jobs < 1:
                raise ConfigError("--jobs must be >= 1")
            res = run_regress(cfg, args.dataset, args.jobs)
            _write_json(args.out / "metrics.json", res["metrics"])
            _write_json(args.out / "timing.json", res["timing"])
        else:
            if args.limit is not None and args.limit < 1:
                raise ConfigError("--limit must be >= 1")
            res = run_mnist(cfg, args.limit)
            _write_json(args.out / "metrics.json", res["metrics"])
            _write_csv(args.out / "decisions.csv", ["observations", "phi", "correct", "incorrect", "unknown"],
                       res["decisions"])
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, tdata.DataError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
