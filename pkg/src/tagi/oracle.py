"""Brute-force reference computations used to check the analytical code.

Nothing here is used for training.  Monte-Carlo estimators report block
jackknife standard errors; the exact conditioning routine works on an explicit
joint covariance and is only meant for systems of a few dozen variables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .moments import GaussianQuad, product_cross_cov, product_mean, product_product_cov
from .net import LayerParams, forward, get_activation, GaussianVector

#: independent blocks used by the jackknife
JACKKNIFE_BLOCKS = 100
_CHUNK = 200_000


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    samples: int

    def __post_init__(self):
        if self.std_error < 0 or self.samples < 1:
            raise ValueError("invalid Monte-Carlo estimate")

    def z_score(self, target: float) -> float:
        """Distance to ``target`` in standard errors (inf if the SE is zero and they differ)."""
        diff = abs(float(target) - self.value)
        if self.std_error == 0:
            return 0.0 if diff == 0 else np.inf
        return diff / self.std_error

    def covers(self, target: float, n_se: float = 4.0, atol: float = 1e-12) -> bool:
        return abs(float(target) - self.value) <= n_se * self.std_error + atol


class _BlockSums:
    """Per-block running sums for covariance statistics, then jackknife."""

    def __init__(self, blocks: int):
        self.blocks = blocks
        self.n = np.zeros(blocks)
        self.sums: dict = {}

    def add(self, block: int, **arrays):
        first = next(iter(arrays.values()))
        self.n[block] += first.shape[0]
        for k, a in arrays.items():
            s = self.sums.setdefault(k, np.zeros((self.blocks,) + a.shape[1:]))
            s[block] += a.sum(axis=0)

    def jackknife(self, stat):
        """``stat(sums_dict, n)`` on the full data and on each leave-one-block-out set."""
        total = {k: v.sum(axis=0) for k, v in self.sums.items()}
        n = self.n.sum()
        full = stat(total, n)
        loo = np.stack([stat({k: total[k] - v[b] for k, v in self.sums.items()}, n - self.n[b])
                        for b in range(self.blocks)])
        g = self.blocks
        se = np.sqrt((g - 1) / g * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))
        return full, se


def _cov_stat(a, b):
    return lambda s, n: s[a + b] / n - (s[a] / n) * (s[b] / n)


def _sqrt_psd(cov: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(cov)
    if vals.min() < -1e-9 * max(1.0, vals.max()):
        raise ValueError("covariance is not positive semi-definite")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def _chunks(n: int, blocks: int):
    """Yield ``(block, size)`` pieces: every block gets ``n // blocks`` (+1) samples."""
    sizes = np.full(blocks, n // blocks)
    sizes[: n % blocks] += 1
    for b, s in enumerate(sizes):
        while s > 0:
            take = min(s, _CHUNK)
            yield b, take
            s -= take


def mc_product_moments(quad: GaussianQuad, n_samples: int = 1_000_000, seed: int = 0) -> dict[str, McEstimate]:
    """Monte-Carlo estimates of the product moments of a Gaussian 4-vector.

    Keys: ``mean12`` (E[X1 X2]), ``cross_cov`` (cov(X3, X1 X2)),
    ``prod_prod_cov`` (cov(X1 X2, X3 X4)) and ``var12`` (var(X1 X2)).
    """
    if n_samples < 10_000:
        raise ValueError("n_samples must be at least 1e4")
    root = _sqrt_psd(np.asarray(quad.cov, dtype=float))
    mu = np.asarray(quad.mu, dtype=float)
    rng = np.random.default_rng(seed)
    acc = _BlockSums(JACKKNIFE_BLOCKS)
    for block, size in _chunks(n_samples, JACKKNIFE_BLOCKS):
        x = mu + rng.standard_normal((size, 4)) @ root.T
        p = x[:, 0] * x[:, 1]
        q = x[:, 2] * x[:, 3]
        acc.add(block, p=p, x3=x[:, 2], q=q, pp=p * p, px3=p * x[:, 2], pq=p * q)
    out = {}
    for key, stat in (
        ("mean12", lambda s, n: s["p"] / n),
        ("cross_cov", _cov_stat("p", "x3")),
        ("prod_prod_cov", _cov_stat("p", "q")),
        ("var12", _cov_stat("p", "p")),
    ):
        v, se = acc.jackknife(stat)
        out[key] = McEstimate(float(v), float(se), n_samples)
    return out


# --------------------------------------------------------------------------
# exact Gaussian conditioning


def exact_conditioning_oracle(joint_mean, joint_cov, observed_indices, observed_values):
    """Conditional moments of the whole vector given some of its entries.

    Observed entries come back equal to their values with zero (co)variance.
    """
    mean = np.asarray(joint_mean, dtype=float)
    cov = np.asarray(joint_cov, dtype=float)
    n = mean.shape[0]
    if n > 50:
        raise ValueError("exact conditioning is limited to 50 variables")
    if cov.shape != (n, n) or not np.allclose(cov, cov.T, atol=1e-12):
        raise ValueError("joint covariance must be a symmetric square matrix")
    obs = np.atleast_1d(np.asarray(observed_indices, dtype=int))
    vals = np.atleast_1d(np.asarray(observed_values, dtype=float))
    s_oo = cov[np.ix_(obs, obs)]
    s_ao = cov[:, obs]
    try:
        factor = linalg.cho_factor(s_oo)
    except linalg.LinAlgError:
        raise np.linalg.LinAlgError("observed covariance block is singular") from None
    if np.linalg.cond(s_oo) > 1e14:
        raise np.linalg.LinAlgError("observed covariance block is singular")
    gain = linalg.cho_solve(factor, s_ao.T).T  # (n, |obs|)
    post_mean = mean + gain @ (vals - mean[obs])
    post_cov = cov - gain @ s_ao.T
    return post_mean, 0.5 * (post_cov + post_cov.T)


@dataclass
class JointSystem:
    """Explicit joint Gaussian over parameters, hidden states and the observation."""

    mean: np.ndarray
    cov: np.ndarray
    names: list[tuple]  # ("w", layer, i, k) / ("b", layer, i) / ("z", layer, i) / ("y", i)

    def index(self, name) -> int:
        return self.names.index(name)


def build_joint_system(params: Sequence[LayerParams], x, sigma_v) -> JointSystem:
    """Full-covariance joint of (theta, Z, Y) for a linear-activation network.

    Every hidden state is a sum of weight-times-input products; the means and
    all (co)variances of those products come from the product-moment formulas
    with the complete covariance of everything built so far, so no independence
    between units of a layer is assumed.
    """
    x = np.asarray(x, dtype=float)
    names: list[tuple] = []
    mean: list[float] = []
    cov = np.zeros((0, 0))

    def add(new_names, new_mean, cross, block):
        nonlocal cov
        m = cov.shape[0]
        k = len(new_names)
        grown = np.zeros((m + k, m + k))
        grown[:m, :m] = cov
        grown[:m, m:] = cross
        grown[m:, :m] = cross.T
        grown[m:, m:] = block
        cov = grown
        names.extend(new_names)
        mean.extend(new_mean)

    # covariates: deterministic, carried as zero-variance variables
    add([("x", i) for i in range(len(x))], list(x), np.zeros((0, len(x))), np.zeros((len(x), len(x))))
    a_idx = [names.index(("x", i)) for i in range(len(x))]
    for j, p in enumerate(params):
        out, fan_in = p.w_mean.shape
        w_names = [("w", j, i, k) for i in range(out) for k in range(fan_in)]
        b_names = [("b", j, i) for i in range(out)]
        m = cov.shape[0]
        add(w_names + b_names, list(p.w_mean.ravel()) + list(p.b_mean),
            np.zeros((m, len(w_names) + len(b_names))),
            np.diag(np.concatenate([p.w_var.ravel(), p.b_var])))
        w_idx = [[names.index(("w", j, i, k)) for k in range(fan_in)] for i in range(out)]
        b_idx = [names.index(("b", j, i)) for i in range(out)]

        def quad(i1, i2, i3, i4):
            idx = [i1, i2, i3, i4]
            return GaussianQuad(np.array([mean[t] for t in idx]), cov[np.ix_(idx, idx)])

        n_old = cov.shape[0]
        z_mean = np.zeros(out)
        cross = np.zeros((n_old, out))
        block = np.zeros((out, out))
        for i in range(out):
            terms = list(zip(w_idx[i], a_idx))
            z_mean[i] = sum(product_mean(quad(w, a, w, a).pair(0, 1)) for w, a in terms) + mean[b_idx[i]]
            for v in range(n_old):
                # cov(V, sum_k W_ik A_k + B_i) term by term
                cross[v, i] = sum(product_cross_cov(quad(w, a, v, v)) for w, a in terms) + cov[v, b_idx[i]]
            for l in range(i + 1):
                other = list(zip(w_idx[l], a_idx))
                c = sum(product_product_cov(quad(w1, a1, w2, a2)) for w1, a1 in terms for w2, a2 in other)
                c += cov[b_idx[i], b_idx[l]]
                # bias-product covariances (zero under the diagonal prior, kept for generality)
                c += sum(product_cross_cov(quad(w, a, b_idx[l], b_idx[l])) for w, a in terms)
                c += sum(product_cross_cov(quad(w, a, b_idx[i], b_idx[i])) for w, a in other)
                block[i, l] = block[l, i] = c
        add([("z", j + 1, i) for i in range(out)], list(z_mean), cross, block)
        a_idx = [names.index(("z", j + 1, i)) for i in range(out)]

    # observation y = z_out + v
    sv2 = np.broadcast_to(np.asarray(sigma_v, dtype=float) ** 2, (len(a_idx),))
    n_old = cov.shape[0]
    cross = cov[:, a_idx]
    block = cov[np.ix_(a_idx, a_idx)] + np.diag(sv2)
    add([("y", i) for i in range(len(a_idx))], [mean[t] for t in a_idx], cross, block)
    return JointSystem(np.array(mean), cov, names)


def exact_parameter_posterior(params: Sequence[LayerParams], x, y, sigma_v) -> list[LayerParams]:
    """Parameter means and marginal variances from exact joint conditioning."""
    system = build_joint_system(params, x, sigma_v)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    y_idx = [system.index(("y", i)) for i in range(len(y))]
    mean, cov = exact_conditioning_oracle(system.mean, system.cov, y_idx, y)
    var = np.diag(cov)
    out = []
    for j, p in enumerate(params):
        w_m, w_v = np.empty_like(p.w_mean), np.empty_like(p.w_var)
        b_m, b_v = np.empty_like(p.b_mean), np.empty_like(p.b_var)
        for i in range(p.fan_out):
            for k in range(p.fan_in):
                t = system.index(("w", j, i, k))
                w_m[i, k], w_v[i, k] = mean[t], var[t]
            t = system.index(("b", j, i))
            b_m[i], b_v[i] = mean[t], var[t]
        out.append(LayerParams(w_m, w_v, b_m, b_v))
    return out


# --------------------------------------------------------------------------
# Monte-Carlo forward propagation


def sample_network(params: Sequence[LayerParams], x: GaussianVector, n: int, rng, activation: str = "relu",
                   linearize: bool = True, lin_points=None):
    """Draw ``n`` joint samples of parameters and hidden states.

    With ``linearize`` the activation of every hidden layer is replaced by its
    first-order expansion around ``lin_points[j]`` (the analytical means), so
    the analytical moments are the exact targets.  Returns a dict of lists:
    ``w``, ``b``, ``z`` (pre-activations per layer) and ``a`` (inputs to each
    layer, starting with the covariates).
    """
    act = get_activation(activation)
    a = x.mean + np.sqrt(x.var) * rng.standard_normal((n, len(x)))
    out = {"w": [], "b": [], "z": [], "a": [a]}
    last = len(params) - 1
    for j, p in enumerate(params):
        w = p.w_mean + np.sqrt(p.w_var) * rng.standard_normal((n,) + p.w_mean.shape)
        b = p.b_mean + np.sqrt(p.b_var) * rng.standard_normal((n,) + p.b_mean.shape)
        z = np.einsum("nik,nk->ni", w, a) + b
        if j < last:
            if linearize:
                mu = lin_points[j]
                a = act.fn(mu) + act.deriv(mu) * (z - mu)
            else:
                a = act.fn(z)
            out["a"].append(a)
        out["w"].append(w)
        out["b"].append(b)
        out["z"].append(z)
    return out


def _analytical_means(params, x, activation):
    _, caches = forward(params, x, activation)
    return [c.mu_z for c in caches[1:]]


def mc_forward_linearized(params: Sequence[LayerParams], x: GaussianVector, n_samples: int = 1_000_000,
                          seed: int = 0, activation: str = "relu", layer: int = -1):
    """Per-unit Monte-Carlo mean and variance of a layer's pre-activations.

    Activations are linearised at the analytical hidden-state means.  Returns
    ``(means, variances)`` as lists of :class:`McEstimate`, one per unit of
    ``layer`` (default: output layer).
    """
    lin = _analytical_means(params, x, activation)
    rng = np.random.default_rng(seed)
    acc = _BlockSums(JACKKNIFE_BLOCKS)
    for block, size in _chunks(n_samples, JACKKNIFE_BLOCKS):
        z = sample_network(params, x, size, rng, activation, True, lin)["z"][layer]
        acc.add(block, z=z, zz=z * z)
    m, m_se = acc.jackknife(lambda s, n: s["z"] / n)
    v, v_se = acc.jackknife(_cov_stat("z", "z"))
    means = [McEstimate(float(a), float(b), n_samples) for a, b in zip(m, m_se)]
    variances = [McEstimate(float(a), float(b), n_samples) for a, b in zip(v, v_se)]
    return means, variances


def mc_cross_covariances(params: Sequence[LayerParams], x: GaussianVector, layer: int, n_samples: int = 1_000_000,
                         seed: int = 0, activation: str = "relu"):
    """MC estimates of cov(z_k, z+_i) and cov(w_ik, z+_i), cov(b_i, z+_i).

    ``layer`` indexes ``params``; ``z`` is the layer's input state (the
    covariates when ``layer == 0``) and ``z+`` its output.  Returns arrays of
    values and standard errors: ``(zz, zz_se, wz, wz_se, bz, bz_se)`` shaped
    ``(fan_in, fan_out)``, ``(fan_out, fan_in)`` and ``(fan_out,)``.
    """
    lin = _analytical_means(params, x, activation)
    rng = np.random.default_rng(seed)
    acc = _BlockSums(JACKKNIFE_BLOCKS)
    for block, size in _chunks(n_samples, JACKKNIFE_BLOCKS):
        s = sample_network(params, x, size, rng, activation, True, lin)
        prev = s["a"][0] if layer == 0 else s["z"][layer - 1]
        nxt = s["z"][layer]
        w, b = s["w"][layer], s["b"][layer]
        acc.add(block, p=prev, q=nxt, w=w, b=b,
                pq=prev[:, :, None] * nxt[:, None, :], wq=w * nxt[:, :, None], bq=b * nxt)
    zz, zz_se = acc.jackknife(lambda s, n: s["pq"] / n - np.outer(s["p"] / n, s["q"] / n))
    wz, wz_se = acc.jackknife(lambda s, n: s["wq"] / n - (s["w"] / n) * (s["q"] / n)[:, None])
    bz, bz_se = acc.jackknife(_cov_stat("b", "q"))
    return zz, zz_se, wz, wz_se, bz, bz_se


def mc_forward_nonlinear(params: Sequence[LayerParams], x: GaussianVector, n_samples: int = 200_000,
                         seed: int = 0, activation: str = "relu", layer: int = -1) -> dict:
    """Diagnostic: moments and skewness of a layer under the true activations.

    This measures the approximation error of linearised propagation, not an
    implementation error, and is never used as a pass/fail check.
    """
    rng = np.random.default_rng(seed)
    z = np.concatenate([sample_network(params, x, size, rng, activation, linearize=False)["z"][layer]
                        for _, size in _chunks(n_samples, 10)])
    mu = z.mean(axis=0)
    sd = z.std(axis=0)
    skew = np.mean(((z - mu) / np.where(sd > 0, sd, 1.0)) ** 3, axis=0)
    return {"mean": mu, "var": sd**2, "skewness": skew}
