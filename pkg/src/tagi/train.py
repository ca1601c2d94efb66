"""Online training, early stopping, observation-noise selection and metrics.

Training is one observation (or one small batch) at a time.  Independent runs
(cross-validation folds, grid candidates, benchmark splits) are advanced in
lockstep by stacking their parameters along a leading axis; runs never
interact, the stacking only amortises numpy call overhead.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Dataset, Normalizer, kfold
from .heads import ClassTree, HeadConfig, class_marginals
from .infer import assimilate, infer_deltas, merge_batch
from .net import GaussianVector, InitSpec, LayerParams, NetworkArch, forward, init_network, stack_params, unstack_params

LOG_2PI = np.log(2.0 * np.pi)


# --------------------------------------------------------------------------
# tasks


class RegressionTask:
    name = "regression"

    def output_dim(self, y_dim: int) -> int:
        return y_dim

    def targets(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return y[:, None] if y.ndim == 1 else y

    def log_likelihood(self, pred: GaussianVector, y, sigma_v) -> np.ndarray:
        """Per-observation predictive log density (summed over outputs)."""
        var = pred.var + np.asarray(sigma_v)[..., None] ** 2
        return -0.5 * np.sum(LOG_2PI + np.log(var) + (y - pred.mean) ** 2 / var, axis=-1)


class ClassificationTask:
    name = "classification"

    def __init__(self, num_classes: int, alpha: float = 1.0 / 3.0):
        self.tree = ClassTree(num_classes)
        self.alpha = alpha

    def output_dim(self, y_dim: int = 1) -> int:
        return self.tree.output_units

    def targets(self, labels) -> np.ndarray:
        return self.tree.observation(np.asarray(labels, dtype=int))

    def probabilities(self, pred: GaussianVector, sigma_v) -> np.ndarray:
        var = pred.var + np.asarray(sigma_v)[..., None] ** 2
        return class_marginals(GaussianVector(pred.mean, var), HeadConfig(self.alpha, 1.0), self.tree)

    def log_likelihood(self, pred: GaussianVector, labels, sigma_v) -> np.ndarray:
        probs = self.probabilities(pred, sigma_v)
        p = np.take_along_axis(probs, np.asarray(labels, dtype=int)[..., None], axis=-1)[..., 0]
        return np.log(np.maximum(p, 1e-300))


# --------------------------------------------------------------------------
# configuration and results


@dataclass
class TrainConfig:
    epochs: int = 40
    batch_size: int = 1
    shuffle_seed: int = 0
    sigma_v: float = 1.0
    sigma_v_grid: tuple[float, ...] = ()
    early_stop: bool = False
    folds: int = 5
    #: epochs used inside the sigma_v cross-validation (defaults to ``epochs``)
    cv_epochs: int | None = None

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not self.sigma_v > 0:
            raise ValueError("sigma_v must be positive")
        self.sigma_v_grid = tuple(float(s) for s in self.sigma_v_grid)
        if any(s <= 0 for s in self.sigma_v_grid):
            raise ValueError("sigma_v grid values must be positive")


@dataclass
class Metrics:
    rmse: float = float("nan")
    avg_ll: float = float("nan")
    class_error: float = float("nan")
    per_epoch_val_ll: list[float] = field(default_factory=list)


@dataclass
class FitResult:
    params: list[LayerParams]
    best_epoch: int
    val_ll: list[float]
    train_ll: list[float]
    final_params: list[LayerParams] | None = None


# --------------------------------------------------------------------------
# lockstep engine


def _pad(arrays: Sequence[np.ndarray], fill) -> np.ndarray:
    n = max(len(a) for a in arrays)
    out = np.full((len(arrays), n) + arrays[0].shape[1:], fill, dtype=float)
    for r, a in enumerate(arrays):
        out[r, : len(a)] = a
    return out


def _expand(params: Sequence[LayerParams], axis: int) -> list[LayerParams]:
    return [LayerParams(*(np.expand_dims(a, axis) for a in p.arrays())) for p in params]


def predict_runs(params, activation: str, xs: np.ndarray) -> GaussianVector:
    """Output moments for stacked runs: params ``(R, ...)``, inputs ``(R, n, X)``."""
    out, _ = forward(_expand(params, 1), GaussianVector.deterministic(xs), activation)
    return out


def _epoch_orders(lengths, n_max, seeds, epoch):
    orders = np.full((len(lengths), n_max), n_max, dtype=int)  # n_max indexes the padding row
    for r, (n, s) in enumerate(zip(lengths, seeds)):
        orders[r, :n] = np.random.default_rng([int(s), int(epoch)]).permutation(n)
    return orders


def run_epoch(params, xs, ys, lengths, sigma_v, activation, batch_size, seeds, epoch):
    """One pass over every run's training data in lockstep.

    ``xs``/``ys`` are padded ``(R, n_max, .)`` arrays; rows past a run's
    length are skipped (their targets are NaN, so they condition nothing).
    """
    R, n_max = xs.shape[:2]
    xs = np.concatenate([xs, np.zeros((R, 1, xs.shape[2]))], axis=1)
    ys = np.concatenate([ys, np.full((R, 1, ys.shape[2]), np.nan)], axis=1)
    orders = _epoch_orders(lengths, n_max, seeds, epoch)
    rows = np.arange(R)[:, None]
    sv = np.asarray(sigma_v, dtype=float)
    for start in range(0, n_max, batch_size):
        idx = orders[:, start : start + batch_size]
        x, y = xs[rows, idx], ys[rows, idx]  # (R, B, .)
        if batch_size == 1:
            params = assimilate(params, x[:, 0], y[:, 0], sv[:, None], activation)
        else:
            _, caches = forward(_expand(params, 1), GaussianVector.deterministic(x), activation)
            post = infer_deltas(_expand(params, 1), caches, y, sv[:, None, None])
            # padding rows have no observed targets and must not dilute the average
            params = _merge_observed(params, post, ~np.all(np.isnan(y), axis=-1))
    return params


def _merge_observed(params, post, observed):
    counts = observed.sum(axis=1)
    if np.all(counts == observed.shape[1]):
        return merge_batch(params, post, axis=1)
    merged = []
    for p, q in zip(params, post):
        arrays = []
        for a, b in zip(p.arrays(), q.arrays()):
            w = observed.reshape(observed.shape + (1,) * (a.ndim - 1)).astype(float)
            d = np.sum((b - a[:, None]) * w, axis=1) / np.maximum(counts, 1).reshape((-1,) + (1,) * (a.ndim - 1))
            arrays.append(a + d)
        merged.append(LayerParams(*arrays))
    return merge_batch(params, [LayerParams(*(np.expand_dims(a, 1) for a in m.arrays())) for m in merged], axis=1)


@dataclass
class RunSet:
    """Several independent training runs advanced together."""

    params: list[LayerParams]  # stacked, leading axis R
    train_x: list[np.ndarray]
    train_y: list[np.ndarray]  # dense targets (NaN = unobserved)
    sigma_v: np.ndarray  # (R,)
    seeds: np.ndarray  # (R,) shuffle seeds
    activation: str = "relu"
    val_x: list[np.ndarray] | None = None
    val_y: list[np.ndarray] | None = None  # raw targets passed to task.log_likelihood
    raw_train_y: list[np.ndarray] | None = None  # raw training targets, for training log-likelihood

    @property
    def size(self) -> int:
        return len(self.sigma_v)


def _mean_ll(task, params, activation, xs, ys, sigma_v):
    """Average log-likelihood per run over (possibly ragged) evaluation sets."""
    out = np.empty(len(xs))
    X = _pad(xs, 0.0)
    pred = predict_runs(params, activation, X)
    for r, (x, y) in enumerate(zip(xs, ys)):
        n = len(x)
        p = GaussianVector(pred.mean[r, :n], pred.var[r, :n])
        out[r] = np.mean(task.log_likelihood(p, y, sigma_v[r]))
    return out


def train_runs(runs: RunSet, epochs: int, task=None, batch_size: int = 1, keep_best: bool = False,
               train_ll: bool = False):
    """Train all runs for ``epochs`` epochs.

    Returns ``(final_params, best_params, val_ll, train_ll)`` where ``val_ll``
    and ``train_ll`` are ``(R, epochs + 1)`` arrays whose column 0 holds the
    prior (epoch 0).  ``best_params`` tracks, per run, the epoch with maximal
    validation log-likelihood when ``keep_best`` is set.
    """
    task = task or RegressionTask()
    xs = _pad(runs.train_x, 0.0)
    ys = _pad(runs.train_y, np.nan)
    lengths = [len(x) for x in runs.train_x]
    params = runs.params
    has_val = runs.val_x is not None
    val_ll = np.full((runs.size, epochs + 1), np.nan)
    tr_ll = np.full((runs.size, epochs + 1), np.nan)
    best = [p.copy() for p in params] if keep_best else None
    best_ll = np.full(runs.size, -np.inf)

    def evaluate(e, params):
        if has_val:
            val_ll[:, e] = _mean_ll(task, params, runs.activation, runs.val_x, runs.val_y, runs.sigma_v)
        if train_ll:
            tr_ll[:, e] = _mean_ll(task, params, runs.activation, runs.train_x, runs.raw_train_y, runs.sigma_v)

    evaluate(0, params)
    for e in range(1, epochs + 1):
        params = run_epoch(params, xs, ys, lengths, runs.sigma_v, runs.activation, batch_size, runs.seeds, e)
        evaluate(e, params)
        if keep_best and has_val:
            improved = val_ll[:, e] > best_ll
            best_ll = np.where(improved, val_ll[:, e], best_ll)
            for b, p in zip(best, params):
                for ab, ap in zip(b.arrays(), p.arrays()):
                    ab[improved] = ap[improved]
    return params, best, val_ll, tr_ll


# --------------------------------------------------------------------------
# single-run API


def _single_runset(params, dataset: Dataset, task, sigma_v, seed, activation, val_set=None) -> RunSet:
    runs = RunSet(
        stack_params([params]),
        [dataset.x],
        [task.targets(dataset.y)],
        np.array([float(sigma_v)]),
        np.array([seed]),
        activation,
        None if val_set is None else [val_set.x],
        None if val_set is None else [val_set.y],
        [dataset.y],
    )
    return runs


def train_epoch(params: Sequence[LayerParams], dataset: Dataset, cfg: TrainConfig, *, activation: str = "relu",
                task=None, epoch: int = 1) -> list[LayerParams]:
    """One epoch of sequential assimilation; the result is the next epoch's prior."""
    task = task or RegressionTask()
    if len(dataset) == 0:
        return [p.copy() for p in params]
    runs = _single_runset(params, dataset, task, cfg.sigma_v, cfg.shuffle_seed, activation)
    out = run_epoch(runs.params, _pad(runs.train_x, 0.0), _pad(runs.train_y, np.nan), [len(dataset)],
                    runs.sigma_v, activation, cfg.batch_size, runs.seeds, epoch)
    return unstack_params(out, 0)


def fit(arch: NetworkArch, train_set: Dataset, val_set: Dataset | None, cfg: TrainConfig, *,
        task=None, init: InitSpec = InitSpec(), init_seed: int = 0, params=None) -> FitResult:
    """Train for up to ``cfg.epochs`` epochs, recycling each posterior as the next prior.

    With ``cfg.early_stop`` and a validation set, the parameters of the epoch
    with maximal validation log-likelihood are returned.
    """
    task = task or RegressionTask()
    params = params if params is not None else init_network(arch, init, init_seed)
    runs = _single_runset(params, train_set, task, cfg.sigma_v, cfg.shuffle_seed, arch.activation, val_set)
    keep = cfg.early_stop and val_set is not None
    final, best, val_ll, tr_ll = train_runs(runs, cfg.epochs, task, cfg.batch_size, keep_best=keep, train_ll=True)
    val = val_ll[0].tolist()
    if keep:
        best_epoch = int(np.nanargmax(val_ll[0, 1:])) + 1
        chosen = unstack_params(best, 0)
    else:
        best_epoch = cfg.epochs
        chosen = unstack_params(final, 0)
    return FitResult(chosen, best_epoch, val, tr_ll[0].tolist(), unstack_params(final, 0))


def predict(params, x, activation: str = "relu") -> GaussianVector:
    """Latent output moments for a matrix of deterministic covariates."""
    out, _ = forward(params, GaussianVector.deterministic(x), activation)
    return out


# --------------------------------------------------------------------------
# observation-noise selection


def _cv_runs(arch, datasets, grid, folds, cfg, task, init, init_seed, normalize, keys):
    """Build the (dataset, candidate, fold) run grid for cross-validation."""
    nets, tx, ty, vx, vy, sv, seeds, raw = [], [], [], [], [], [], [], []
    base = init_network(arch, init, init_seed)
    for d, ds in zip(keys, datasets):
        splits = kfold(len(ds), folds, seed=cfg.shuffle_seed + 7919 * d)
        for g, s in enumerate(grid):
            for f, split in enumerate(splits):
                tr, va = ds.subset(split.train), ds.subset(split.test)
                if normalize:
                    nz = Normalizer.fit(tr)
                    tr, va = nz.apply(tr), nz.apply(va)
                nets.append(base)
                tx.append(tr.x)
                ty.append(task.targets(tr.y))
                raw.append(tr.y)
                vx.append(va.x)
                vy.append(va.y)
                sv.append(s)
                seeds.append(cfg.shuffle_seed * 1000003 + 101 * d + f)
    return RunSet(stack_params(nets), tx, ty, np.array(sv), np.array(seeds), arch.activation, vx, vy, raw)


def select_sigma_v_many(arch: NetworkArch, datasets: Sequence[Dataset], cfg: TrainConfig, *, task=None,
                        init: InitSpec = InitSpec(), init_seed: int = 0, normalize: bool = False, keys=None):
    """Cross-validated choice of sigma_v for several datasets at once.

    ``keys`` (default ``0..len-1``) seed each dataset's fold assignment, so a
    dataset gets the same folds whichever group it is processed in.  Returns
    ``(chosen, scores)`` with ``scores`` of shape ``(len(datasets), len(grid))``
    holding mean validation log-likelihoods.
    """
    keys = list(range(len(datasets))) if keys is None else list(keys)
    task = task or RegressionTask()
    grid = cfg.sigma_v_grid or (cfg.sigma_v,)
    if len(grid) == 1:
        return np.full(len(datasets), grid[0]), np.zeros((len(datasets), 1))
    runs = _cv_runs(arch, datasets, grid, cfg.folds, cfg, task, init, init_seed, normalize, keys)
    epochs = cfg.cv_epochs or cfg.epochs
    _, _, val_ll, _ = train_runs(runs, epochs, task, cfg.batch_size, keep_best=False)
    if cfg.early_stop:
        per_run = np.nanmax(val_ll[:, 1:], axis=1)
    else:
        per_run = val_ll[:, -1]
    scores = per_run.reshape(len(datasets), len(grid), cfg.folds).mean(axis=2)
    # ties (and NaN-free equal scores) go to the larger sigma_v
    order = np.argsort(grid)
    chosen = []
    for row in scores:
        ranked = row[order]
        best = np.flatnonzero(ranked == np.nanmax(ranked))[-1]
        chosen.append(grid[order[best]])
    return np.array(chosen), scores


def select_sigma_v(arch: NetworkArch, dataset: Dataset, cfg: TrainConfig, *, task=None,
                   init: InitSpec = InitSpec(), init_seed: int = 0, normalize: bool = False) -> float:
    """sigma_v from ``cfg.sigma_v_grid`` maximising k-fold validation log-likelihood.

    An empty grid means no search: ``cfg.sigma_v`` is returned as is.
    """
    chosen, _ = select_sigma_v_many(arch, [dataset], cfg, task=task, init=init, init_seed=init_seed,
                                    normalize=normalize)
    return float(chosen[0])


# --------------------------------------------------------------------------
# evaluation


def regression_metrics(pred: GaussianVector, y, sigma_v, norm: Normalizer | None = None) -> Metrics:
    """RMSE and average log-likelihood in original target units."""
    mean, var = pred.mean, pred.var + np.asarray(sigma_v) ** 2
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if norm is not None and norm.y is not None:
        mean, var = norm.y.denormalize(mean), norm.y.denormalize_var(var)
    rmse = float(np.sqrt(np.mean((y - mean) ** 2)))
    ll = -0.5 * np.sum(LOG_2PI + np.log(var) + (y - mean) ** 2 / var, axis=-1)
    return Metrics(rmse=rmse, avg_ll=float(np.mean(ll)))


def evaluate(params, test_set: Dataset, norm_stats: Normalizer | None, task=None, *, sigma_v: float = 1.0,
             activation: str = "relu") -> Metrics:
    """Test metrics; ``test_set`` is in raw units, ``norm_stats`` from training data."""
    task = task or RegressionTask()
    if len(test_set) == 0:
        raise ValueError("empty test set")
    x = norm_stats.x.normalize(test_set.x) if norm_stats is not None else test_set.x
    pred = predict(params, x, activation)
    if task.name == "regression":
        return regression_metrics(pred, test_set.y, sigma_v, norm_stats)
    probs = task.probabilities(pred, sigma_v)
    labels = np.asarray(test_set.y, dtype=int)
    err = float(np.mean(probs.argmax(axis=-1) != labels))
    ll = float(np.mean(np.log(np.maximum(probs[np.arange(len(labels)), labels], 1e-300))))
    return Metrics(avg_ll=ll, class_error=err)


# --------------------------------------------------------------------------
# repeated-split regression benchmark


@dataclass
class BenchmarkResult:
    rmse: list[float]
    avg_ll: list[float]
    sigma_v: list[float]
    seconds: list[float]

    def summary(self) -> dict:
        r, l = np.array(self.rmse), np.array(self.avg_ll)
        return {
            "rmse_mean": float(r.mean()),
            "rmse_std": float(r.std()),
            "ll_mean": float(l.mean()),
            "ll_std": float(l.std()),
            "folds": len(r),
            "rmse": self.rmse,
            "ll": self.avg_ll,
            "sigma_v": self.sigma_v,
            "seconds_per_fold": self.seconds,
        }


def _benchmark_group(dataset, splits, keys, arch, cfg, init, init_seed):
    trains = [dataset.subset(s.train) for s in splits]
    tests = [dataset.subset(s.test) for s in splits]
    norms = [Normalizer.fit(tr) for tr in trains]
    ntrains = [nz.apply(tr) for nz, tr in zip(norms, trains)]

    t0 = time.perf_counter()
    chosen, _ = select_sigma_v_many(arch, ntrains, cfg, init=init, init_seed=init_seed, keys=keys)
    base = init_network(arch, init, init_seed)
    runs = RunSet(
        stack_params([base] * len(splits)),
        [t.x for t in ntrains],
        [t.y for t in ntrains],
        np.asarray(chosen, dtype=float),
        np.array([cfg.shuffle_seed * 1000003 + 17 + k for k in keys]),
        arch.activation,
    )
    final, _, _, _ = train_runs(runs, cfg.epochs, batch_size=cfg.batch_size)
    seconds = (time.perf_counter() - t0) / len(splits)

    out = []
    for i in range(len(splits)):
        m = evaluate(unstack_params(final, i), tests[i], norms[i], sigma_v=chosen[i], activation=arch.activation)
        out.append((m.rmse, m.avg_ll, float(chosen[i]), seconds))
    return out


def benchmark_regression(dataset: Dataset, arch: NetworkArch, cfg: TrainConfig, *, splits: int = 20,
                         test_size: int | None = None, split_seed: int = 0, init: InitSpec = InitSpec(),
                         init_seed: int = 0, jobs: int = 1) -> BenchmarkResult:
    """Repeated random train/test splits with per-split sigma_v cross-validation.

    For each split the training part is standardised, sigma_v is chosen by
    ``cfg.folds``-fold CV over ``cfg.sigma_v_grid``, the network is trained for
    ``cfg.epochs`` epochs with the chosen value and scored on the test part
    in original units.  With ``jobs > 1`` groups of splits run in separate
    processes; results do not depend on the grouping.
    """
    if test_size is None:
        test_size = int(np.ceil(0.1 * len(dataset)))
    split_list = kfold(len(dataset), splits, seed=split_seed, test_size=test_size)
    keys = list(range(splits))
    groups = [keys[g::jobs] for g in range(jobs)] if jobs > 1 else [keys]
    groups = [g for g in groups if g]
    args = [(dataset, [split_list[k] for k in g], g, arch, cfg, init, init_seed) for g in groups]
    if len(groups) == 1:
        results = [_benchmark_group(*args[0])]
    else:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(len(groups)) as pool:
            results = list(pool.map(_benchmark_group, *zip(*args)))
    per_split = {}
    for g, res in zip(groups, results):
        per_split.update(zip(g, res))
    rows = [per_split[k] for k in keys]
    return BenchmarkResult(*(list(col) for col in zip(*rows)))


# --------------------------------------------------------------------------
# streaming with checkpoints


def train_stream(params: Sequence[LayerParams], x: np.ndarray, targets: np.ndarray, sigma_v: float, *,
                 activation: str = "relu", batch_size: int = 1, checkpoints: Sequence[int] = (),
                 on_checkpoint=None) -> list[LayerParams]:
    """Assimilate rows of ``x``/``targets`` in the given order.

    ``on_checkpoint(count, params)`` is called once the first ``count``
    observations have been seen, for every ``count`` in ``checkpoints``
    (``0`` means before any update).
    """
    pending = sorted(set(int(c) for c in checkpoints if 0 <= c <= len(x)))
    sv = np.asarray(sigma_v, dtype=float)
    seen = 0

    def fire():
        while pending and pending[0] <= seen:
            on_checkpoint(pending.pop(0), params)

    if on_checkpoint is not None:
        fire()
    while seen < len(x):
        # batches never straddle a checkpoint, so every checkpoint sees an exact count
        stop = min(seen + batch_size, len(x))
        if pending:
            stop = min(stop, max(pending[0], seen + 1))
        if stop - seen == 1:
            params = assimilate(params, x[seen], targets[seen], sv, activation)
        else:
            xb, yb = x[seen:stop], targets[seen:stop]
            _, caches = forward(_expand(params, 0), GaussianVector.deterministic(xb), activation)
            post = infer_deltas(_expand(params, 0), caches, yb, sv)
            params = merge_batch(params, post, axis=0)
        seen = stop
        if on_checkpoint is not None:
            fire()
    return params
