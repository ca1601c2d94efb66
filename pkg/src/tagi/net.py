"""Approximate Gaussian feedforward network: parameters, activations and the
moment-propagating forward pass.

Every array carried here may have arbitrary leading batch dimensions; weight
matrices are ``(..., fan_out, fan_in)`` and vectors ``(..., n)``.  This lets
the same code evaluate a whole test set at once, or advance several
independent networks in lockstep.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import expit


@dataclass(frozen=True)
class GaussianVector:
    """Mean and diagonal variance of a Gaussian random vector."""

    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        var = np.asarray(self.var, dtype=float)
        if mean.shape != var.shape:
            raise ValueError(f"mean shape {mean.shape} != var shape {var.shape}")
        if np.any(var < 0):
            raise ValueError("variances must be non-negative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)

    @classmethod
    def deterministic(cls, x) -> "GaussianVector":
        x = np.asarray(x, dtype=float)
        return cls(x, np.zeros_like(x))

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.var)

    def __len__(self):
        return self.mean.shape[-1]


# --------------------------------------------------------------------------
# activations


class Activation(NamedTuple):
    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]


def _softplus(z):
    # log(1 + e^z) without overflow for large |z|
    return np.logaddexp(0.0, z)


ACTIVATIONS = {
    "linear": Activation("linear", lambda z: np.asarray(z, dtype=float).copy(), np.ones_like),
    # derivative at exactly 0 is 0 so dead units stay variance-free
    "relu": Activation("relu", lambda z: np.maximum(z, 0.0), lambda z: (z > 0).astype(float)),
    "softplus": Activation("softplus", _softplus, expit),
    "tanh": Activation("tanh", np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "sigmoid": Activation("sigmoid", expit, lambda z: expit(z) * expit(-z)),
}


def get_activation(name: str) -> Activation:
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}; expected one of {sorted(ACTIVATIONS)}") from None


def activation_moments(kind: str, mu_z, var_z):
    """Push ``N(mu_z, var_z)`` through an activation linearised at ``mu_z``.

    Returns ``(mu_a, var_a, jac)`` with ``jac`` the diagonal of the Jacobian.
    """
    act = get_activation(kind)
    mu_z = np.asarray(mu_z, dtype=float)
    jac = act.deriv(mu_z)
    return act.fn(mu_z), jac**2 * var_z, jac


# --------------------------------------------------------------------------
# architecture and parameters


@dataclass(frozen=True)
class NetworkArch:
    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1 or self.output_dim < 1 or any(h < 1 for h in self.hidden):
            raise ValueError(f"all layer widths must be >= 1, got {self.widths}")
        get_activation(self.activation)

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.output_dim)

    @property
    def num_params(self) -> int:
        w = self.widths
        return sum((a + 1) * b for a, b in zip(w[:-1], w[1:]))


@dataclass(frozen=True)
class InitSpec:
    """Prior for the parameters: weight variance ``gain * 2 / (fan_in + fan_out)``."""

    gain: float = 0.25
    bias_var: float = 0.01


@dataclass
class LayerParams:
    """Means and diagonal variances of one layer's weights and biases."""

    w_mean: np.ndarray
    w_var: np.ndarray
    b_mean: np.ndarray
    b_var: np.ndarray

    def __post_init__(self):
        if self.w_mean.shape != self.w_var.shape or self.b_mean.shape != self.b_var.shape:
            raise ValueError("mean/variance shape mismatch")
        if self.w_mean.shape[:-1] != self.b_mean.shape:
            raise ValueError(f"weights {self.w_mean.shape} inconsistent with biases {self.b_mean.shape}")

    @property
    def fan_in(self) -> int:
        return self.w_mean.shape[-1]

    @property
    def fan_out(self) -> int:
        return self.w_mean.shape[-2]

    def copy(self) -> "LayerParams":
        return LayerParams(self.w_mean.copy(), self.w_var.copy(), self.b_mean.copy(), self.b_var.copy())

    def arrays(self):
        return self.w_mean, self.w_var, self.b_mean, self.b_var

    def equals(self, other: "LayerParams") -> bool:
        """Bit-for-bit equality."""
        return all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))


def init_network(arch: NetworkArch, init: InitSpec = InitSpec(), rng_seed: int = 0) -> list[LayerParams]:
    """Sample prior means from ``N(0, prior variance)``; deterministic in the seed."""
    rng = np.random.default_rng(rng_seed)
    params = []
    widths = arch.widths
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        w_var = np.full((fan_out, fan_in), init.gain * 2.0 / (fan_in + fan_out))
        b_var = np.full(fan_out, float(init.bias_var))
        w_mean = rng.normal(0.0, np.sqrt(w_var))
        b_mean = rng.normal(0.0, np.sqrt(b_var))
        params.append(LayerParams(w_mean, w_var, b_mean, b_var))
    return params


def stack_params(networks: Sequence[Sequence[LayerParams]]) -> list[LayerParams]:
    """Stack several networks of identical shape along a new leading axis."""
    return [
        LayerParams(*(np.stack(arrs) for arrs in zip(*(net[j].arrays() for net in networks))))
        for j in range(len(networks[0]))
    ]


def unstack_params(params: Sequence[LayerParams], index) -> list[LayerParams]:
    return [LayerParams(*(a[index].copy() for a in p.arrays())) for p in params]


# --------------------------------------------------------------------------
# forward pass


@dataclass
class LayerCache:
    """Forward-pass record for one layer of hidden states.

    ``caches[0]`` describes the covariates themselves (unit Jacobian); the
    last entry is the output layer, for which the activation is the identity.
    """

    mu_z: np.ndarray
    var_z: np.ndarray
    jac: np.ndarray
    mu_a: np.ndarray
    var_a: np.ndarray
    input_mu: np.ndarray | None = field(default=None, repr=False)
    input_var: np.ndarray | None = field(default=None, repr=False)

    @property
    def prior(self) -> GaussianVector:
        return GaussianVector(self.mu_z, self.var_z)


def _matvec(w, a):
    return np.matmul(w, a[..., None])[..., 0]


def linear_moments(p: LayerParams, mu_a, var_a):
    """Mean and variance of ``W a + b`` with independent diagonal Gaussians."""
    # sum_k of product_mean_var_independent(w_ik, a_k), written as matvecs
    mu_z = _matvec(p.w_mean, mu_a) + p.b_mean
    var_z = _matvec(p.w_var, var_a + mu_a**2) + _matvec(p.w_mean**2, var_a) + p.b_var
    return mu_z, var_z


def input_cache(x: GaussianVector) -> LayerCache:
    ones = np.ones_like(x.mean)
    return LayerCache(x.mean, x.var, ones, x.mean, x.var)


def forward(params: Sequence[LayerParams], x: GaussianVector, activation: str = "relu"):
    """Propagate input moments through the network.

    Returns the output-layer moments and the list of per-layer caches
    (``len(params) + 1`` entries, the first one for the input).
    """
    if x.mean.shape[-1] != params[0].fan_in:
        raise ValueError(f"input has {x.mean.shape[-1]} features, network expects {params[0].fan_in}")
    caches = [input_cache(x)]
    mu_a, var_a = x.mean, x.var
    last = len(params) - 1
    for j, p in enumerate(params):
        if p.fan_in != mu_a.shape[-1]:
            raise ValueError(f"layer {j} expects {p.fan_in} inputs, got {mu_a.shape[-1]}")
        mu_z, var_z = linear_moments(p, mu_a, var_a)
        if j == last:
            jac = np.ones_like(mu_z)
            new_mu_a, new_var_a = mu_z, var_z
        else:
            new_mu_a, new_var_a, jac = activation_moments(activation, mu_z, var_z)
        caches.append(LayerCache(mu_z, var_z, jac, new_mu_a, new_var_a, mu_a, var_a))
        mu_a, var_a = new_mu_a, new_var_a
    return GaussianVector(caches[-1].mu_z, caches[-1].var_z), caches


def forward_point(params: Sequence[LayerParams], x, activation: str = "relu") -> np.ndarray:
    """Ordinary point-estimate network evaluated at the parameter means."""
    a = np.asarray(x, dtype=float)
    for j, p in enumerate(params):
        z = _matvec(p.w_mean, a) + p.b_mean
        a = z if j == len(params) - 1 else get_activation(activation).fn(z)
    return a

