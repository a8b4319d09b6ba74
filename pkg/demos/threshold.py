"""Bisect for the largest learning rate that still converges (R1).

Uses a shortened budget; every probe trains from the same initialization.
"""
from lrlab.mlp import NetworkSpec
from lrlab.regimes import classify_regime, find_convergence_threshold
from lrlab.sweep import chance_level
from lrlab.tick import generate_tick_dataset
from lrlab.trainer import OptimizerConfig, pretrain

ds = generate_tick_dataset(data_seed=0, label_noise=0.2)
spec = NetworkSpec(input_dim=ds.train_x.shape[1], frozen_head_seed=0)


def label(lr):
    res = pretrain(spec, ds, OptimizerConfig(lr, 32, 1.0, 8000, 200), init_seed=0, batch_seed=0)
    lab = "R3" if res.diverged else classify_regime(res.records, chance_level(ds.test_y))
    print(f"  lr {lr:.4e} -> {lab}")
    return lab


br = find_convergence_threshold(label, 1e-3, 0.3, rel_tol=0.1)
print(f"threshold in [{br.lr_low:.4e}, {br.lr_high:.4e}] after {br.calls} trainings")
