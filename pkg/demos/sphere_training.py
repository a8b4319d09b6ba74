"""Projected SGD on the unit sphere at three learning rates.

The parameter norm never moves, the effective learning rate is lr / |theta|^2,
and the final regime label depends only on the learning rate.
"""
from lrlab.mlp import NetworkSpec
from lrlab.regimes import classify_regime
from lrlab.sweep import chance_level
from lrlab.tick import generate_tick_dataset
from lrlab.trainer import OptimizerConfig, pretrain

ds = generate_tick_dataset(data_seed=0, label_noise=0.2)
spec = NetworkSpec(input_dim=ds.train_x.shape[1], hidden_dim=32, frozen_head_seed=0)

for lr in (3e-3, 3e-2, 1.0):
    cfg = OptimizerConfig(learning_rate=lr, batch_size=32, radius=1.0, max_steps=10000, eval_every=160)
    res = pretrain(spec, ds, cfg, init_seed=0, batch_seed=0)
    last = res.records[-1]
    label = classify_regime(res.records, chance_level(ds.test_y))
    norms = [r.total_norm for r in res.records]
    print(f"lr {lr:g}: {label}  train loss {last.train_loss:.2e}  test acc {last.test_accuracy:.3f}  "
          f"norm in [{min(norms):.15f}, {max(norms):.15f}]")
