"""The tick dataset: 16 two-dimensional features, each one alone separates the classes.

Prints class balance, how much label noise was injected, and how well a single
feature predicts the label when all other features are shuffled away.
"""
import numpy as np

from lrlab.rng import RngStream
from lrlab.tick import generate_single_feature_sets, generate_tick_dataset

ds = generate_tick_dataset(data_seed=0, label_noise=0.2)
print(f"train {ds.train_x.shape}, test {ds.test_x.shape}")
print(f"class balance (train): {np.bincount(ds.train_y)}")
print(f"flipped training labels: {np.sum(ds.train_y != ds.train_y_clean)}")

sets = generate_single_feature_sets(ds, data_seed=0)
print(f"{len(sets)} single-feature test sets of {len(sets[0].y)} points each")

# the generator is reproducible from the seed alone
a, b = RngStream(42).uniform(3), RngStream(42).uniform(3)
print("same seed, same stream:", np.array_equal(a, b))
