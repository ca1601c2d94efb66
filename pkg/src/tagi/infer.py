"""Layer-wise Gaussian inference of hidden states and parameters.

Only diagonal covariances are kept.  One observation is assimilated by
conditioning the output layer and then sweeping backwards with
Rauch-Tung-Striebel style smoother gains, layer by layer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .net import GaussianVector, LayerCache, LayerParams, get_activation

#: floor applied to updated variances (guards floating-point cancellation)
VAR_FLOOR = 1e-12


class DegenerateInferenceError(ArithmeticError):
    """A zero-variance unit received a non-zero update."""


@dataclass(frozen=True)
class ObservationModel:
    """Independent Gaussian observation noise, one standard deviation per output."""

    sigma_v: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sigma_v, dtype=float)
        if np.any(~(s > 0)):
            raise ValueError(f"observation noise must be positive, got {s}")
        object.__setattr__(self, "sigma_v", s)

    @property
    def var(self) -> np.ndarray:
        return self.sigma_v**2


@dataclass(frozen=True)
class PosteriorDelta:
    """Change in hidden-state moments produced by conditioning."""

    d_mean: np.ndarray
    d_var: np.ndarray

    def apply(self, prior: GaussianVector) -> GaussianVector:
        return GaussianVector(prior.mean + self.d_mean, _floor(prior.var, prior.var + self.d_var))

    @classmethod
    def between(cls, prior: GaussianVector, post: GaussianVector) -> "PosteriorDelta":
        return cls(post.mean - prior.mean, post.var - prior.var)


def _floor(old, new):
    # clamp only values that the update pushed below the floor; a prior that
    # was already below it is never raised
    return np.where(new < VAR_FLOOR, np.minimum(old, VAR_FLOOR), new)


def _as_obs(obs) -> ObservationModel:
    return obs if isinstance(obs, ObservationModel) else ObservationModel(obs)


def output_delta(mu_z, var_z, y, sigma_v) -> PosteriorDelta:
    """Conditioning delta for ``y = z + v``; ``NaN`` entries of ``y`` are unobserved."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != np.shape(mu_z)[-1]:
        raise IndexError(f"observation has {y.shape[-1]} entries, output layer has {np.shape(mu_z)[-1]}")
    observed = ~np.isnan(y)
    gain = var_z / (var_z + np.asarray(sigma_v) ** 2)
    innovation = np.where(observed, y - mu_z, 0.0)
    gain = np.where(observed, gain, 0.0)
    return PosteriorDelta(gain * innovation, -gain * var_z)


def update_output_layer(cache_out: LayerCache, y_obs, obs) -> GaussianVector:
    """Posterior moments of the output layer given a (partial) observation.

    ``y_obs`` has one entry per output unit; ``NaN`` marks units that are not
    observed (e.g. off-path units of a classification tree).
    """
    obs = _as_obs(obs)
    delta = output_delta(cache_out.mu_z, cache_out.var_z, y_obs, obs.sigma_v)
    return delta.apply(cache_out.prior)


def cross_cov_z(prev_cache: LayerCache, params: LayerParams) -> np.ndarray:
    """cov(z_k, z+_i) as a ``(fan_in, fan_out)`` matrix."""
    if prev_cache.mu_z.shape[-1] != params.fan_in:
        raise ValueError(f"cache has {prev_cache.mu_z.shape[-1]} units, layer expects {params.fan_in}")
    jv = prev_cache.jac * prev_cache.var_z
    return np.swapaxes(params.w_mean, -1, -2) * jv[..., :, None]


def cross_cov_theta(prev_cache: LayerCache, params: LayerParams):
    """cov(theta, z+) for a layer's parameters.

    Each weight ``w[i, k]`` and bias ``b[i]`` only covaries with ``z+_i``, so
    the result is returned densely as ``(cov_w, cov_b)`` shaped like the
    weights and biases.
    """
    if prev_cache.mu_a.shape[-1] != params.fan_in:
        raise ValueError(f"cache has {prev_cache.mu_a.shape[-1]} units, layer expects {params.fan_in}")
    return params.w_var * prev_cache.mu_a[..., None, :], params.b_var.copy()


def _safe_ratio(num, var, what):
    nonzero = var > 0
    if np.any(~nonzero & (num != 0)):
        raise DegenerateInferenceError(f"{what}: zero prior variance with non-zero posterior change")
    return np.where(nonzero, num / np.where(nonzero, var, 1.0), 0.0)


def smooth_step_delta(prev_cache: LayerCache, params: LayerParams, next_var, delta: PosteriorDelta,
                      need_state: bool = True):
    """Propagate a hidden-state delta one layer down.

    Returns ``(prev_delta, new_params)``; ``prev_delta`` is ``None`` when
    ``need_state`` is false (the covariate layer).
    """
    # gain / prior variance, folded so no (fan_out, fan_in) gain matrix is built
    r_mean = _safe_ratio(delta.d_mean, next_var, "mean update")
    r_var = _safe_ratio(delta.d_var, next_var**2, "variance update")

    mu_a = prev_cache.mu_a
    w_var, b_var = params.w_var, params.b_var
    w_mean = params.w_mean + w_var * (r_mean[..., :, None] * mu_a[..., None, :])
    w_var_new = w_var + w_var**2 * (r_var[..., :, None] * (mu_a**2)[..., None, :])
    b_mean = params.b_mean + b_var * r_mean
    b_var_new = b_var + b_var**2 * r_var
    new_params = LayerParams(w_mean, _floor(w_var, w_var_new), b_mean, _floor(b_var, b_var_new))

    if not need_state:
        return None, new_params
    jv = prev_cache.jac * prev_cache.var_z
    d_mean = jv * np.matmul(r_mean[..., None, :], params.w_mean)[..., 0, :]
    d_var = jv**2 * np.matmul(r_var[..., None, :], params.w_mean**2)[..., 0, :]
    return PosteriorDelta(d_mean, d_var), new_params


def smooth_step(prev_cache: LayerCache, params: LayerParams, next_prior: GaussianVector,
                next_post: GaussianVector):
    """One backward step: condition a layer's states and parameters on the
    posterior of the layer above.

    Returns ``(prev_post, new_params)``.
    """
    delta = PosteriorDelta.between(next_prior, next_post)
    prev_delta, new_params = smooth_step_delta(prev_cache, params, next_prior.var, delta)
    return prev_delta.apply(prev_cache.prior), new_params


def infer_deltas(params: Sequence[LayerParams], caches: Sequence[LayerCache], y_obs, sigma_v):
    """Full backward sweep; returns the updated parameters of every layer.

    Hidden-state posteriors only live for the duration of the sweep.
    """
    out = caches[-1]
    delta = output_delta(out.mu_z, out.var_z, y_obs, sigma_v)
    new = [None] * len(params)
    for j in range(len(params) - 1, -1, -1):
        delta, new[j] = smooth_step_delta(caches[j], params[j], caches[j + 1].var_z, delta, need_state=j > 0)
    return new


def infer_observation(params: Sequence[LayerParams], caches: Sequence[LayerCache], y_obs, obs) -> list[LayerParams]:
    """Assimilate one observation (``caches`` from ``forward`` on the same input)."""
    return infer_deltas(params, caches, y_obs, _as_obs(obs).sigma_v)


def input_posterior(params: Sequence[LayerParams], caches: Sequence[LayerCache], y_obs, obs) -> GaussianVector:
    """Posterior of the covariates themselves; diagnostic only, never persisted."""
    out = caches[-1]
    delta = output_delta(out.mu_z, out.var_z, y_obs, _as_obs(obs).sigma_v)
    for j in range(len(params) - 1, -1, -1):
        delta, _ = smooth_step_delta(caches[j], params[j], caches[j + 1].var_z, delta)
    return delta.apply(caches[0].prior)


def merge_batch(prior: Sequence[LayerParams], posteriors: Sequence[LayerParams], axis: int = 0) -> list[LayerParams]:
    """Combine posteriors computed independently against a shared prior.

    ``posteriors`` carry the batch along ``axis``; the mean and variance
    deltas are averaged over it.
    """
    merged = []
    for p, post in zip(prior, posteriors):
        w_mean, w_var, b_mean, b_var = (
            a + np.mean(b - np.expand_dims(a, axis), axis=axis) for a, b in zip(p.arrays(), post.arrays())
        )
        merged.append(LayerParams(w_mean, _floor(p.w_var, w_var), b_mean, _floor(p.b_var, b_var)))
    return merged


def _floored(old, new):
    return _floor(old, new) if new.min() < VAR_FLOOR else new


#: elements per row block of the fused weight update (keeps temporaries in cache)
_BLOCK = 16_384


def _weight_update(w_mean, w_var, r_mean, r_var, a):
    """Posterior weight moments, computed in row blocks.

    Same operations, in the same order, as :func:`smooth_step_delta`; the
    blocking only keeps the working set small for wide layers.
    """
    new_mean = np.empty_like(w_mean)
    new_var = np.empty_like(w_var)
    rows = w_mean.shape[-2]
    step = max(1, _BLOCK // (w_mean.size // rows))
    a_row = a[..., None, :]
    a2_row = (a * a)[..., None, :]
    for s in range(0, rows, step):
        blk = (..., slice(s, s + step), slice(None))
        wv = w_var[blk]
        t = np.multiply(r_mean[..., s : s + step, None], a_row)
        t *= wv
        np.add(w_mean[blk], t, out=new_mean[blk])
        np.multiply(r_var[..., s : s + step, None], a2_row, out=t)
        t *= np.multiply(wv, wv)
        np.add(wv, t, out=new_var[blk])
    return new_mean, new_var


def assimilate(params: Sequence[LayerParams], x, y, sigma_v, activation: str = "relu") -> list[LayerParams]:
    """Forward pass and backward sweep for one deterministic observation.

    Numerically the same computation as ``forward`` followed by
    :func:`infer_deltas`, fused so that no cache objects are built.  This is
    the hot loop of training.  Leading batch axes on ``params``, ``x`` and
    ``y`` index independent runs.
    """
    act = get_activation(activation)
    last = len(params) - 1
    mu_a = np.asarray(x, dtype=float)
    var_a = None  # deterministic covariates
    inputs, var_zs, jacs, squares = [], [], [], []
    for j, p in enumerate(params):
        mu_z = np.matmul(p.w_mean, mu_a[..., None])[..., 0] + p.b_mean
        if var_a is None:
            var_z = np.matmul(p.w_var, (mu_a * mu_a)[..., None])[..., 0] + p.b_var
            squares.append(None)
        else:
            w2 = p.w_mean * p.w_mean
            var_z = (np.matmul(p.w_var, (var_a + mu_a * mu_a)[..., None])[..., 0]
                     + np.matmul(w2, var_a[..., None])[..., 0] + p.b_var)
            squares.append(w2)
        inputs.append(mu_a)
        var_zs.append(var_z)
        if j < last:
            jac = act.deriv(mu_z)
            jacs.append(jac)
            mu_a, var_a = act.fn(mu_z), jac * jac * var_z

    delta = output_delta(mu_z, var_z, y, sigma_v)
    d_mean, d_var = delta.d_mean, delta.d_var
    new = [None] * len(params)
    for j in range(last, -1, -1):
        p, var_z = params[j], var_zs[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            r_mean = d_mean / var_z
            r_var = d_var / (var_z * var_z)
        if not (np.isfinite(r_mean).all() and np.isfinite(r_var).all()):
            r_mean = _safe_ratio(d_mean, var_z, "mean update")
            r_var = _safe_ratio(d_var, var_z * var_z, "variance update")
        w_mean, w_var = _weight_update(p.w_mean, p.w_var, r_mean, r_var, inputs[j])
        b_mean = p.b_mean + p.b_var * r_mean
        b_var = p.b_var + p.b_var * p.b_var * r_var
        new[j] = LayerParams(w_mean, _floored(p.w_var, w_var), b_mean, _floored(p.b_var, b_var))
        if j > 0:
            jv = jacs[j - 1] * var_zs[j - 1]
            d_mean = jv * np.matmul(r_mean[..., None, :], p.w_mean)[..., 0, :]
            d_var = jv * jv * np.matmul(r_var[..., None, :], squares[j])[..., 0, :]
    return new
