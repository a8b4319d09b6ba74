"""Angles and linear-path barriers between fine-tuned solutions.

Two fine-tunes from a moderate-PLR start stay in one basin (barrier near 0);
independent initializations are far apart on the sphere.
"""
from lrlab.geometry import angular_distance, linear_barrier
from lrlab.mlp import NetworkSpec, error, init_params
from lrlab.tick import generate_tick_dataset
from lrlab.trainer import OptimizerConfig, finetune, pretrain

ds = generate_tick_dataset(data_seed=1, label_noise=0.2)
spec = NetworkSpec(input_dim=ds.train_x.shape[1], frozen_head_seed=1)
train_err = lambda v: error(spec, v, ds.train_x, ds.train_y)

pre = pretrain(spec, ds, OptimizerConfig(0.015, 32, 1.0, 10000, 500), init_seed=1, batch_seed=1)
fts = [finetune(spec, pre.params, ds, OptimizerConfig(flr, 32, 1.0, 5000, 500), batch_seed=1,
                  flr_regime="R1").params
       for flr in (1e-4, 1e-3)]
bar = linear_barrier(fts[0], fts[1], train_err)
print(f"fine-tunes: angle {angular_distance(*fts):.4f} rad, train barrier {bar.barrier:.4f}")

a, b = init_params(spec, 10), init_params(spec, 11)
bar = linear_barrier(a, b, train_err)
print(f"random inits: angle {angular_distance(a, b):.4f} rad, train barrier {bar.barrier:.4f}")
print(f"a point with itself: barrier {linear_barrier(a, a, train_err).barrier}")
