"""Moments of products of jointly Gaussian random variables.

These closed forms are exact for the first two moments of a product; treating
the product itself as Gaussian is the approximation the rest of the package
builds on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: tolerance on the Cauchy-Schwarz / PSD checks done at construction time
VALIDATION_TOL = 1e-9


@dataclass(frozen=True)
class GaussianPair:
    """Two jointly Gaussian scalars ``X1, X2``."""

    mu1: float
    mu2: float
    var1: float
    var2: float
    cov12: float = 0.0

    def __post_init__(self):
        if self.var1 < 0 or self.var2 < 0:
            raise ValueError("variances must be non-negative")
        if self.cov12**2 > self.var1 * self.var2 + VALIDATION_TOL:
            raise ValueError(
                f"cov12={self.cov12} violates Cauchy-Schwarz for "
                f"var1={self.var1}, var2={self.var2}"
            )

    def swapped(self) -> "GaussianPair":
        return GaussianPair(self.mu2, self.mu1, self.var2, self.var1, self.cov12)


@dataclass(frozen=True)
class GaussianQuad:
    """Four jointly Gaussian scalars with mean ``mu`` (4,) and covariance ``cov`` (4, 4)."""

    mu: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if mu.shape != (4,) or cov.shape != (4, 4):
            raise ValueError(f"expected shapes (4,) and (4, 4), got {mu.shape} and {cov.shape}")
        if not np.allclose(cov, cov.T, atol=VALIDATION_TOL, rtol=0):
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(cov).min() < -VALIDATION_TOL:
            raise ValueError("covariance must be positive semi-definite")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "cov", cov)

    def pair(self, i: int = 0, j: int = 1) -> GaussianPair:
        """Marginal pair ``(X_i, X_j)`` (0-based indices)."""
        c = self.cov
        return GaussianPair(self.mu[i], self.mu[j], c[i, i], c[j, j], c[i, j])

    def permuted(self, order) -> "GaussianQuad":
        order = np.asarray(order)
        return GaussianQuad(self.mu[order], self.cov[np.ix_(order, order)])


def product_mean(pair: GaussianPair) -> float:
    """E[X1 X2]."""
    return pair.mu1 * pair.mu2 + pair.cov12


def product_var(pair: GaussianPair) -> float:
    """var(X1 X2)."""
    m1, m2, v1, v2, c = pair.mu1, pair.mu2, pair.var1, pair.var2, pair.cov12
    return v1 * v2 + c**2 + 2.0 * c * m1 * m2 + v1 * m2**2 + v2 * m1**2


def product_cross_cov(quad: GaussianQuad) -> float:
    """cov(X3, X1 X2); only the first three variables are read."""
    mu, c = quad.mu, quad.cov
    return c[0, 2] * mu[1] + c[1, 2] * mu[0]


def product_product_cov(quad: GaussianQuad) -> float:
    """cov(X1 X2, X3 X4)."""
    mu, c = quad.mu, quad.cov
    return (
        c[0, 2] * c[1, 3]
        + c[0, 3] * c[1, 2]
        + c[0, 2] * mu[1] * mu[3]
        + c[0, 3] * mu[1] * mu[2]
        + c[1, 2] * mu[0] * mu[3]
        + c[1, 3] * mu[0] * mu[2]
    )


def product_mean_var_independent(mu1, var1, mu2, var2):
    """Mean and variance of ``X1 X2`` for independent factors.

    Vectorised over numpy broadcasting; this is the kernel used by the
    diagonal-covariance forward pass.
    """
    mean = mu1 * mu2
    var = var1 * var2 + var1 * mu2**2 + var2 * mu1**2
    return mean, var
