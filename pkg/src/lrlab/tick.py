"""Synthetic binary task built from 16 independent 2D "tick" features.

Within one feature the two classes are separated by the V-shaped curve
``y = |x| - 0.25`` on ``x in [-1, 1]``. Class 1 is sampled uniformly from the
part of the box ``[-1, 1] x [-2, 2]`` lying at least ``MARGIN`` above the curve (in
the vertical direction), class 0 from the part at least ``MARGIN`` below it.
Every feature of a sample is drawn from the class-conditional law of that
sample's label, so each feature alone determines the clean label.

Optionally a fixed fraction of *training* labels is flipped after sampling
(``label_noise``); the test split always keeps clean labels. Without noise
every learning rate that trains at all drives the loss to zero, so the
intermediate regime never appears.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import PreconditionError
from .rng import RngStream

N_FEATURES = 16
FEATURE_DIM = 2
N_TRAIN = 512
N_TEST = 2000
OFFSET = 0.25
MARGIN = 0.1
Y_RANGE = 2.0  # vertical half-height of the sampling box


def boundary(x):
    return np.abs(x) - OFFSET


@dataclass
class TickDataset:
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    data_seed: int = 0
    label_noise: float = 0.0
    train_y_clean: np.ndarray | None = field(default=None, repr=False)
    feature_count: int = N_FEATURES
    feature_dim: int = FEATURE_DIM

    @property
    def n_classes(self) -> int:
        return 2


@dataclass
class SingleFeatureTestSet:
    feature_index: int
    x: np.ndarray
    y: np.ndarray = field(repr=False)


def _sample_feature(rng: RngStream, label: int, n: int) -> np.ndarray:
    """Rejection-sample ``n`` 2D points of one class."""
    out = np.empty((n, 2))
    filled = 0
    while filled < n:
        need = n - filled
        # class regions each cover roughly 40% of the box
        u = rng.uniform(2 * (3 * need + 8)).reshape(-1, 2)
        batch = np.column_stack([2.0 * u[:, 0] - 1.0, Y_RANGE * (2.0 * u[:, 1] - 1.0)])
        gap = batch[:, 1] - boundary(batch[:, 0])
        keep = batch[gap >= MARGIN] if label == 1 else batch[gap <= -MARGIN]
        take = min(need, len(keep))
        out[filled:filled + take] = keep[:take]
        filled += take
    return out


def _balanced_labels(rng: RngStream, n: int) -> np.ndarray:
    y = np.zeros(n, dtype=np.int64)
    y[: n // 2] = 1
    return y[rng.permutation(n)]


def _sample_split(rng: RngStream, n: int) -> tuple[np.ndarray, np.ndarray]:
    y = _balanced_labels(rng, n)
    x = np.empty((n, N_FEATURES * FEATURE_DIM))
    for i in range(N_FEATURES):
        block = np.empty((n, 2))
        for label in (0, 1):
            mask = y == label
            block[mask] = _sample_feature(rng, label, int(mask.sum()))
        x[:, 2 * i:2 * i + 2] = block
    return x, y


def flip_labels(y: np.ndarray, fraction: float, rng: RngStream) -> np.ndarray:
    """Flip ``round(fraction * n_c)`` random labels within each class ``c``.

    Flipping the same share of both classes keeps a balanced split balanced.
    """
    if not 0.0 <= fraction < 0.5:
        raise PreconditionError(f"label noise must lie in [0, 0.5), got {fraction}")
    out = y.copy()
    for label in (0, 1):
        members = np.flatnonzero(y == label)
        k = round(fraction * members.size)
        idx = members[rng.permutation(members.size)[:k]]
        out[idx] = 1 - label
    return out


def generate_tick_dataset(data_seed: int, label_noise: float = 0.0) -> TickDataset:
    rng = RngStream.for_purpose(data_seed, "tick-data")
    train_x, train_y = _sample_split(rng, N_TRAIN)
    test_x, test_y = _sample_split(rng, N_TEST)
    noisy = flip_labels(train_y, label_noise, RngStream.for_purpose(data_seed, "label-noise"))
    return TickDataset(train_x, noisy, test_x, test_y, data_seed=data_seed,
                       label_noise=label_noise, train_y_clean=train_y)


def sample_boundary(rng: RngStream, n: int) -> np.ndarray:
    """Points spread uniformly (in arc length) along the decision curve."""
    # both arms have slope magnitude 1, so uniform x is uniform arc length
    xs = rng.uniform(n, -1.0, 1.0)
    return np.column_stack([xs, boundary(xs)])


def generate_single_feature_sets(ds: TickDataset, data_seed: int) -> list[SingleFeatureTestSet]:
    """One test set per feature: that feature informative, the rest on the boundary."""
    rng = RngStream.for_purpose(data_seed, "tick-single-feature")
    n = len(ds.test_y)
    sets = []
    for i in range(ds.feature_count):
        y = _balanced_labels(rng, n)
        x = np.empty((n, ds.feature_count * FEATURE_DIM))
        for j in range(ds.feature_count):
            if j == i:
                block = np.empty((n, 2))
                for label in (0, 1):
                    mask = y == label
                    block[mask] = _sample_feature(rng, label, int(mask.sum()))
            else:
                block = sample_boundary(rng, n)
            x[:, 2 * j:2 * j + 2] = block
        sets.append(SingleFeatureTestSet(i, x, y))
    return sets


def csv_header(feature_count: int = N_FEATURES) -> list[str]:
    cols = []
    for i in range(feature_count):
        cols += [f"f{i}_x", f"f{i}_y"]
    return cols + ["label"]


def write_csv(path, x: np.ndarray, y: np.ndarray) -> None:
    """Write samples as CSV with header ``f0_x, f0_y, ..., f15_y, label``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(csv_header(x.shape[1] // 2))
        for row, label in zip(x, y):
            w.writerow([repr(float(v)) for v in row] + [int(label)])


def read_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    x = np.array([[float(v) for v in r[:-1]] for r in body]).reshape(len(body), -1)
    y = np.array([int(r[-1]) for r in body], dtype=np.int64)
    return x, y
