"""Single-feature accuracy profiles and their aggregation across runs."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import PreconditionError
from .mlp import NetworkSpec, accuracy


@dataclass
class FeatureProfile:
    raw: np.ndarray
    run: dict = field(default_factory=dict)

    def __post_init__(self):
        self.raw = np.asarray(self.raw, dtype=np.float64)

    @property
    def sorted(self) -> np.ndarray:
        return np.sort(self.raw)[::-1]


def single_feature_accuracies(spec: NetworkSpec, theta, sets: Sequence, n_features: int = 16,
                              run: dict | None = None) -> FeatureProfile:
    if len(sets) != n_features:
        raise PreconditionError(f"expected {n_features} single-feature sets, got {len(sets)}")
    raw = np.empty(n_features)
    for s in sets:
        raw[s.feature_index] = accuracy(spec, theta, s.x, s.y)
    return FeatureProfile(raw, dict(run or {}))


def aggregate_profiles(profiles: Sequence[FeatureProfile]) -> tuple[np.ndarray, np.ndarray]:
    """Rank-wise mean and (population) standard deviation of sorted profiles."""
    if not profiles:
        raise PreconditionError("no profiles to aggregate")
    if len({p.raw.size for p in profiles}) != 1:
        raise PreconditionError("profiles have mixed lengths")
    ranks = np.stack([p.sorted for p in profiles])
    return ranks.mean(axis=0), ranks.std(axis=0)


def sparsity_gap(profile: FeatureProfile) -> float:
    """Top accuracy minus the mean of all others; larger means more specialized."""
    s = profile.sorted
    return float(np.mean(s[0] - s[1:]))
