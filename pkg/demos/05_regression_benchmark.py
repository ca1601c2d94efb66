"""
Repeated-split regression benchmark
===================================

Boston housing, 1 x 50 ReLU, 40 epochs.  For each split the observation noise
is chosen by 5-fold cross-validation on the training part.  Three splits keep
this quick; the full protocol uses twenty (``tagi regress --dataset boston``).
"""

import numpy as np

from tagi import cli
from tagi.data import data_dir, load_csv
from tagi.net import InitSpec, NetworkArch
from tagi.train import TrainConfig, benchmark_regression

entry = cli.DATASETS["boston"]
ds = load_csv(data_dir() / entry["path"], entry["target_columns"])
print(f"{len(ds)} rows, {ds.x.shape[1]} features")

cfg = TrainConfig(epochs=40, sigma_v_grid=(0.1, 0.2, 0.3, 0.5, 1.0), folds=5)
arch = NetworkArch(ds.x.shape[1], (50,), 1)
res = benchmark_regression(ds, arch, cfg, splits=3, test_size=entry["test_size"], init=InitSpec())

for rmse, ll, sv in zip(res.rmse, res.avg_ll, res.sigma_v):
    print(f"RMSE {rmse:.2f}  LL {ll:.2f}  sigma_v {sv}")
print(f"mean RMSE {np.mean(res.rmse):.2f}, mean LL {np.mean(res.avg_ll):.2f}")
