"""Loss-landscape diagnostics: angles, linear-path barriers, sharpness."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import EvaluationError, NotReachedError, PreconditionError
from .mlp import NetworkSpec, _values, loss_and_grad


@dataclass
class BarrierResult:
    barrier: float
    alpha_star: float
    alphas: np.ndarray
    errors: np.ndarray
    error_1: float
    error_2: float

    def excess(self) -> np.ndarray:
        """Error on the path minus the chord between endpoint errors."""
        # chord written as e2 + a (e1 - e2) so equal endpoints give an exact zero
        return self.errors - (self.error_2 + self.alphas * (self.error_1 - self.error_2))

    def to_dict(self) -> dict:
        return {
            "barrier": self.barrier,
            "alpha_star": self.alpha_star,
            "error_1": self.error_1,
            "error_2": self.error_2,
            "alphas": [float(a) for a in self.alphas],
            "errors": [float(e) for e in self.errors],
        }


@dataclass
class SharpnessResult:
    mean_grad_norm: float
    batch_size: int
    loss: float
    batch_norms: np.ndarray = field(repr=False, default=None)


def angular_distance(theta1, theta2) -> float:
    a, b = _values(theta1), _values(theta2)
    if a.shape != b.shape:
        raise PreconditionError("parameter vectors differ in shape")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise PreconditionError("angular distance undefined for a zero vector")
    cos = float(np.dot(a, b) / (na * nb))
    return math.acos(min(1.0, max(-1.0, cos)))


def alpha_grid(points: int = 25) -> np.ndarray:
    if points < 2:
        raise PreconditionError("alpha grid needs both endpoints")
    return np.linspace(0.0, 1.0, points)


def linear_barrier(theta1, theta2, error_fn: Callable[[np.ndarray], float],
                   grid_points: int = 25, alphas: Sequence[float] | None = None) -> BarrierResult:
    """Largest excess of ``error_fn`` on the straight segment over the endpoint chord.

    The path point ``alpha * theta1 + (1 - alpha) * theta2`` is evaluated as
    is; for a scale-invariant network its radius does not matter. The result
    can be negative when the whole path lies below the chord.
    """
    a, b = _values(theta1), _values(theta2)
    if a.shape != b.shape:
        raise PreconditionError("parameter vectors differ in shape")
    grid = alpha_grid(grid_points) if alphas is None else np.asarray(alphas, dtype=np.float64)
    if not (np.any(grid == 0.0) and np.any(grid == 1.0)):
        raise PreconditionError("alpha grid must contain 0 and 1")
    errs = np.empty(grid.size)
    for i, alpha in enumerate(grid):
        if alpha == 1.0:
            point = a
        elif alpha == 0.0:
            point = b
        else:
            point = alpha * a + (1 - alpha) * b
        e = float(error_fn(point))
        if not math.isfinite(e):
            raise EvaluationError(f"error function returned {e} at alpha={alpha}")
        errs[i] = e
    e1 = errs[np.flatnonzero(grid == 1.0)[0]]
    e2 = errs[np.flatnonzero(grid == 0.0)[0]]
    excess = errs - (e2 + grid * (e1 - e2))
    excess[(grid == 0.0) | (grid == 1.0)] = 0.0
    k = int(np.argmax(excess))
    return BarrierResult(float(excess[k]), float(grid[k]), grid, errs, float(e1), float(e2))


def sharpness(spec: NetworkSpec, theta, xs, ys, batch_size: int) -> SharpnessResult:
    """Mean stochastic gradient norm over consecutive batches (fixed data order)."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys)
    if len(ys) == 0:
        raise PreconditionError("dataset is empty")
    if batch_size < 1:
        raise PreconditionError("batch size must be positive")
    norms, losses, sizes = [], [], []
    for start in range(0, len(ys), batch_size):
        lo, g = loss_and_grad(spec, theta, xs[start:start + batch_size], ys[start:start + batch_size])
        norms.append(np.linalg.norm(g))
        losses.append(lo)
        sizes.append(min(batch_size, len(ys) - start))
    norms = np.array(norms)
    if not np.all(np.isfinite(norms)):
        raise EvaluationError("non-finite gradient norm")
    full_loss = float(np.dot(losses, sizes) / np.sum(sizes))
    return SharpnessResult(float(norms.mean()), batch_size, full_loss, norms)


def loss_matched_point(losses: Sequence[float], metrics: Sequence[Mapping[str, float]],
                       target: float = 6e-4) -> dict[str, float]:
    """Interpolate metrics to where a decreasing loss trace crosses ``target``.

    Uses the first consecutive pair with ``loss_t >= target >= loss_{t+1}``
    and returns ``w * m_t + (1 - w) * m_{t+1}`` with
    ``w = (loss_{t+1} - target) / (loss_{t+1} - loss_t)``.
    """
    if len(losses) != len(metrics):
        raise PreconditionError("one metrics entry per loss value required")
    for t in range(len(losses)):
        if losses[t] == target:
            return dict(metrics[t])
        if t + 1 < len(losses) and losses[t] >= target >= losses[t + 1]:
            if losses[t + 1] == target:
                return dict(metrics[t + 1])
            w = (losses[t + 1] - target) / (losses[t + 1] - losses[t])
            return {k: w * metrics[t][k] + (1 - w) * metrics[t + 1][k] for k in metrics[t]}
    raise NotReachedError(f"loss trace never crosses {target:g}")
