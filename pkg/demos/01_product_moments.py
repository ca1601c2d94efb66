"""
Moments of Gaussian products
============================

Closed-form moments of products of jointly Gaussian variables, compared with
a Monte-Carlo estimate.
"""

import numpy as np

from tagi.moments import GaussianQuad, product_cross_cov, product_mean, product_product_cov, product_var
from tagi.oracle import mc_product_moments

mu = np.array([0.3, -1.1, 0.8, 1.5])
a = np.array([[0.8, 0.3, -0.2, 0.1],
              [0.3, 1.0, -0.3, 0.2],
              [-0.2, -0.3, 1.1, 0.0],
              [0.1, 0.2, 0.0, 0.5]])
quad = GaussianQuad(mu, a @ a.T)

closed = {
    "mean12": product_mean(quad.pair(0, 1)),
    "cross_cov": product_cross_cov(quad),
    "prod_prod_cov": product_product_cov(quad),
    "var12": product_var(quad.pair(0, 1)),
}

# a million joint draws, jackknife standard errors
mc = mc_product_moments(quad, 1_000_000, seed=0)

print(f"{'moment':>14} {'closed form':>12} {'monte carlo':>12} {'z':>6}")
for key, value in closed.items():
    e = mc[key]
    print(f"{key:>14} {value:12.5f} {e.value:12.5f} {e.z_score(value):6.2f}")
