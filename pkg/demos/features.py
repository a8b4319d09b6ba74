"""Single-feature accuracy profiles: how many features does a network rely on?

A profile sorts the 16 single-feature test accuracies; the sparsity gap is the
top accuracy minus the mean of the rest.
"""
from lrlab.features import single_feature_accuracies, sparsity_gap
from lrlab.mlp import NetworkSpec, init_params
from lrlab.tick import generate_single_feature_sets, generate_tick_dataset
from lrlab.trainer import OptimizerConfig, pretrain

ds = generate_tick_dataset(data_seed=2, label_noise=0.2)
sets = generate_single_feature_sets(ds, data_seed=2)
spec = NetworkSpec(input_dim=ds.train_x.shape[1], frozen_head_seed=2)

for name, theta in [("random init", init_params(spec, 2)),
                    ("lr 0.01", pretrain(spec, ds, OptimizerConfig(0.01, 32, 1.0, 10000, 1000), 2, 2).params),
                    ("lr 0.001", pretrain(spec, ds, OptimizerConfig(0.001, 32, 1.0, 10000, 1000), 2, 2).params)]:
    prof = single_feature_accuracies(spec, theta, sets)
    print(f"{name:12s} gap {sparsity_gap(prof):.3f}  sorted {' '.join(f'{v:.2f}' for v in prof.sorted)}")
