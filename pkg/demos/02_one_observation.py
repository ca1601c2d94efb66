"""
Assimilating one observation
============================

Forward moments through a small network, then the backward sweep that
conditions every layer's parameters on a single observation.  For a linear
network whose layers do not share random parents the result equals exact
Gaussian conditioning of the full joint.
"""

import numpy as np

from tagi.infer import infer_deltas
from tagi.net import GaussianVector, InitSpec, NetworkArch, forward, init_network
from tagi.oracle import exact_parameter_posterior

arch = NetworkArch(input_dim=2, hidden=(3,), output_dim=1, activation="linear")
params = init_network(arch, InitSpec(gain=1.0, bias_var=0.1), rng_seed=0)

x = np.array([0.8, -0.4])
y = np.array([0.9])
sigma_v = 0.3

out, caches = forward(params, GaussianVector.deterministic(x), "linear")
print("prior predictive:", out.mean, out.var + sigma_v**2)

posterior = infer_deltas(params, caches, y, sigma_v)
exact = exact_parameter_posterior(params, x, y, sigma_v)

for j, (ours, ref) in enumerate(zip(posterior, exact)):
    gap = max(np.abs(u - v).max() for u, v in zip(ours.arrays(), ref.arrays()))
    print(f"layer {j}: largest difference from exact conditioning {gap:.1e}")

# variances only ever shrink
print("weight variance ratio, layer 0:")
print(np.round(posterior[0].w_var / params[0].w_var, 3))
