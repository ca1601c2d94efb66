"""
Cubic toy regression with early stopping
========================================

Twenty noisy points from y = x^3 + v.  Each epoch's posterior becomes the
next epoch's prior; a separate validation set picks the epoch.
"""

import numpy as np

from tagi import cli

cfg = cli.resolve_config("toy1d")
res = cli.run_toy1d(cfg)
s = res["summary"]

print(f"sigma_v (normalised units): {s['sigma_v']:.4f}")
print(f"best epoch: {s['best_epoch']} of {s['epochs']}")
print(f"test RMSE {s['test_rmse']:.2f}, LL {s['test_ll']:.2f}, 3-sigma coverage {s['test_coverage_3sigma']:.2f}")

print("\nepoch  train LL  val LL")
for epoch, tr, va in res["epochs"][::5]:
    print(f"{epoch:5d} {tr:9.3f} {va:7.3f}")

# the prior band is wide, the trained one hugs the curve
curves = np.array(res["curves"])
for epoch in np.unique(curves[:, 0]):
    c = curves[curves[:, 0] == epoch]
    print(f"epoch {int(epoch):2d}: mean band width {np.mean(c[:, 4] - c[:, 3]):8.1f}")
