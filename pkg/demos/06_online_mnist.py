"""
Online digit classification
===========================

A single pass over a 5000-image MNIST subset, one image at a time.  Test
error and the median probability of the true class are tracked as images
arrive; the decision table splits test images into correct, incorrect and
unknown for a few confidence thresholds.
"""

from tagi import cli

cfg = cli.resolve_config("mnist", {"data": {"dataset": "mnist5k", "checkpoints": [0, 40, 400, 4000]}})
res = cli.run_mnist(cfg)
m = res["metrics"]

print(f"{m['train_size']} training images, {m['test_size']} test images, sigma_v {m['sigma_v']}")
for c in m["checkpoints"]:
    print(f"after {c['observations']:5d}: error {c['test_error']:.3f}, median true-class prob {c['median_true_prob']:.3f}")

print("\nobservations   phi  correct  incorrect  unknown")
for n, phi, ok, bad, unk in res["decisions"]:
    if phi in (0.5, 0.9, 0.99):
        print(f"{n:12d} {phi:5.2f} {ok:8.3f} {bad:10.3f} {unk:8.3f}")
