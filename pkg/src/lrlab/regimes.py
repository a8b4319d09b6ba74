"""Regime labels for fixed-LR training runs and the convergence-threshold search."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import BracketError, PreconditionError

R1, R2, R2A, R2B, R3 = "R1", "R2", "R2A", "R2B", "R3"
LABELS = (R1, R2A, R2B, R3)


@dataclass(frozen=True)
class RegimeThresholds:
    """Numeric cut-offs for the qualitative regime definitions."""
    converged_loss: float = 1e-3
    chance_band: float = 0.03
    tail_fraction: float = 0.10
    min_records: int = 10
    accuracy_spread: float = 0.02
    barrier: float = 0.05


DEFAULT_THRESHOLDS = RegimeThresholds()


@dataclass
class RegimeLabel:
    value: str
    evidence: dict = field(default_factory=dict)

    def __str__(self) -> str:
        return self.value

    def __eq__(self, other):
        if isinstance(other, RegimeLabel):
            return self.value == other.value
        return self.value == other

    def __hash__(self):
        return hash(self.value)

    @property
    def is_r1(self) -> bool:
        return self.value == R1


@dataclass
class ThresholdBracket:
    lr_low: float
    lr_high: float
    label_low: RegimeLabel
    label_high: RegimeLabel
    calls: int = 0

    @property
    def ratio(self) -> float:
        return self.lr_high / self.lr_low


def classify_regime(records: Sequence, chance: float,
                    thresholds: RegimeThresholds = DEFAULT_THRESHOLDS) -> RegimeLabel:
    """Label a fixed-LR training trace as R1, R2 or R3 from its final window.

    The window is the last ``tail_fraction`` of the records (at least one).
    Converged training loss wins over the chance check, so a run that fits
    the training set is R1 even if it generalizes poorly.
    """
    if len(records) < thresholds.min_records:
        raise PreconditionError(
            f"need at least {thresholds.min_records} records, got {len(records)}")
    k = max(1, int(math.ceil(len(records) * thresholds.tail_fraction)))
    tail = records[-k:]
    loss = float(np.mean([r.train_loss for r in tail]))
    acc = float(np.mean([r.test_accuracy for r in tail]))
    evidence = {"tail_records": k, "tail_train_loss": loss, "tail_test_accuracy": acc, "chance": chance}
    # a non-finite loss never counts as converged
    if math.isfinite(loss) and loss < thresholds.converged_loss:
        return RegimeLabel(R1, evidence)
    if abs(acc - chance) <= thresholds.chance_band:
        return RegimeLabel(R3, evidence)
    return RegimeLabel(R2, evidence)


def split_regime2(plr: float, finetune_accuracies: Mapping[float, float],
                  barriers: Mapping | Sequence[float],
                  thresholds: RegimeThresholds = DEFAULT_THRESHOLDS) -> RegimeLabel:
    """Split regime 2 by fine-tune agreement and linear connectivity.

    2A when the fine-tuned test accuracies agree to within ``accuracy_spread``
    and every pairwise train-error barrier stays below ``barrier``.
    """
    if len(finetune_accuracies) < 2:
        raise PreconditionError("need fine-tune results for at least two FLRs")
    vals = list(barriers.values()) if isinstance(barriers, Mapping) else list(barriers)
    if not vals:
        raise PreconditionError("need at least one pairwise barrier")
    accs = list(finetune_accuracies.values())
    spread = max(accs) - min(accs)
    worst = max(vals)
    evidence = {"plr": plr, "accuracy_spread": spread, "max_barrier": worst}
    if spread < thresholds.accuracy_spread and worst < thresholds.barrier:
        return RegimeLabel(R2A, evidence)
    return RegimeLabel(R2B, evidence)


def find_convergence_threshold(train_fn: Callable[[float], RegimeLabel | str], lr_min: float,
                               lr_max: float, rel_tol: float = 0.05) -> ThresholdBracket:
    """Bisect in log-LR space for the boundary between R1 and everything above it."""
    if not (0 < lr_min < lr_max) or not rel_tol > 0:
        raise PreconditionError("need 0 < lr_min < lr_max and rel_tol > 0")

    def label(lr):
        out = train_fn(lr)
        return out if isinstance(out, RegimeLabel) else RegimeLabel(str(out))

    lo_label = label(lr_min)
    if not lo_label.is_r1:
        raise BracketError(f"lr_min={lr_min:g} is {lo_label}, expected R1")
    hi_label = label(lr_max)
    if hi_label.is_r1:
        raise BracketError(f"lr_max={lr_max:g} is R1, expected above the threshold")
    lo, hi, calls = lr_min, lr_max, 2
    while hi / lo >= 1.0 + rel_tol:
        mid = math.sqrt(lo * hi)
        lab = label(mid)
        calls += 1
        if lab.is_r1:
            lo, lo_label = mid, lab
        else:
            hi, hi_label = mid, lab
    return ThresholdBracket(lo, hi, lo_label, hi_label, calls)
