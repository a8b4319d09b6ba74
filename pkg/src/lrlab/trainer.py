"""Projected SGD on a sphere of fixed radius, plus the training protocols built on it."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba as nb
import numpy as np

from .errors import DegenerateError, DivergedError, PreconditionError
from .mlp import NetworkSpec, ParamVector, _evaluate, _loss_grad, init_params
from .rng import RngStream, shuffle_inplace

OK = "ok"
DIVERGED = "diverged-numerically"


@dataclass
class OptimizerConfig:
    learning_rate: float
    batch_size: int = 32
    radius: float = 1.0
    max_steps: int = 40000
    eval_every: int = 160
    swa_checkpoints: int = 5

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise PreconditionError("learning rate must be positive")
        if self.batch_size < 1 or self.eval_every < 1 or self.max_steps < 0:
            raise PreconditionError("batch_size and eval_every must be >= 1, max_steps >= 0")


@dataclass
class TrainRecord:
    step: int
    train_loss: float
    train_accuracy: float
    test_accuracy: float
    group_norms: dict[str, float]
    total_norm: float

    def row(self) -> dict:
        out = {
            "step": self.step,
            "train_loss": self.train_loss,
            "train_accuracy": self.train_accuracy,
            "test_accuracy": self.test_accuracy,
            "total_norm": self.total_norm,
        }
        out.update({f"norm_{k}": v for k, v in self.group_norms.items()})
        return out


@dataclass
class RunResult:
    params: ParamVector
    records: list[TrainRecord]
    checkpoints: list[ParamVector] = field(default_factory=list)
    status: str = OK
    steps: int = 0

    @property
    def diverged(self) -> bool:
        return self.status == DIVERGED


@dataclass
class ConvergenceResult:
    epochs: int | None
    params: ParamVector
    final_loss: float
    test_accuracy: float

    @property
    def timed_out(self) -> bool:
        return self.epochs is None


def projected_sgd_step(theta: ParamVector, grad, lr: float) -> ParamVector:
    """One SGD step followed by projection back onto the sphere of radius ``theta.radius``."""
    v = theta.values - lr * np.asarray(grad, dtype=np.float64)
    nrm = np.linalg.norm(v)
    if nrm == 0.0 or not np.isfinite(nrm):
        raise DegenerateError("SGD step landed on the origin; cannot project")
    return theta.with_values(v * (theta.radius / nrm))


def effective_lr(lr: float, theta_group) -> float:
    """Learning rate seen on the unit sphere: ``lr / ||theta_group||^2``."""
    nrm2 = float(np.dot(theta_group, theta_group))
    if nrm2 == 0.0:
        raise DegenerateError("effective LR undefined for a zero-norm group")
    return lr / nrm2


@nb.njit(cache=True)
def _run_steps(theta, X, Y, head, d, h, eps, lr, radius, batch_size, n_steps, perm, pos, rng_state):
    """Run ``n_steps`` projected SGD steps in place.

    Returns ``(pos, steps_done, status)``; status 1 flags a non-finite loss or
    gradient, 2 a collapse to the origin.
    """
    n = X.shape[0]
    grad = np.empty_like(theta)
    for step in range(n_steps):
        if pos >= n:
            for i in range(n):
                perm[i] = i
            shuffle_inplace(rng_state, perm)
            pos = 0
        stop = min(n, pos + batch_size)
        loss = _loss_grad(theta, X, Y, perm[pos:stop], head, d, h, eps, grad)
        if not np.isfinite(loss):
            return pos, step, 1
        nrm2 = 0.0
        for i in range(theta.shape[0]):
            v = theta[i] - lr * grad[i]
            theta[i] = v
            nrm2 += v * v
        if not np.isfinite(nrm2):
            return pos, step, 1
        if nrm2 == 0.0:
            return pos, step, 2
        scale = radius / np.sqrt(nrm2)
        for i in range(theta.shape[0]):
            theta[i] *= scale
        pos = stop
    return pos, n_steps, 0


class SphereSGD:
    """Stateful projected-SGD run over one dataset.

    Batches are drawn without replacement; the order is reshuffled from the
    batch-order stream at the start of every epoch.
    """

    def __init__(self, spec: NetworkSpec, theta: ParamVector, dataset, lr: float,
                 batch_size: int, batch_seed: int):
        self.spec = spec
        self.theta = theta.copy()
        self.X = np.ascontiguousarray(dataset.train_x, dtype=np.float64)
        self.Y = np.ascontiguousarray(dataset.train_y, dtype=np.int64)
        if batch_size > len(self.Y):
            raise PreconditionError("batch size exceeds dataset size")
        self.test_X = np.ascontiguousarray(dataset.test_x, dtype=np.float64)
        self.test_Y = np.ascontiguousarray(dataset.test_y, dtype=np.int64)
        self.lr = float(lr)
        self.batch_size = batch_size
        self.rng = RngStream.for_purpose(batch_seed, "batch-order")
        self.perm = np.arange(len(self.Y), dtype=np.int64)
        self.pos = len(self.Y)
        self.step = 0
        self.status = OK

    @property
    def steps_per_epoch(self) -> int:
        return math.ceil(len(self.Y) / self.batch_size)

    def run(self, n_steps: int) -> bool:
        """Advance ``n_steps``; returns False once the run has failed numerically."""
        if self.status != OK or n_steps <= 0:
            return self.status == OK
        backup = self.theta.values.copy()
        spec = self.spec
        self.pos, done, flag = _run_steps(
            self.theta.values, self.X, self.Y, spec.frozen_head, spec.input_dim,
            spec.hidden_dim, spec.layernorm_epsilon, self.lr, self.theta.radius,
            self.batch_size, n_steps, self.perm, self.pos, self.rng.state)
        self.step += done
        if flag:
            self.status = DIVERGED
            # parameters are partially updated; keep the last chunk-start state
            self.theta.values[:] = backup
        return flag == 0

    def record(self) -> TrainRecord:
        spec = self.spec
        args = (spec.frozen_head, spec.input_dim, spec.hidden_dim, spec.layernorm_epsilon)
        tr_loss, tr_acc = _evaluate(self.theta.values, self.X, self.Y, *args)
        _, te_acc = _evaluate(self.theta.values, self.test_X, self.test_Y, *args)
        return TrainRecord(self.step, float(tr_loss), float(tr_acc), float(te_acc),
                           self.theta.group_norms(), self.theta.norm)

    def train_loss(self) -> float:
        spec = self.spec
        return float(_evaluate(self.theta.values, self.X, self.Y, spec.frozen_head, spec.input_dim,
                               spec.hidden_dim, spec.layernorm_epsilon)[0])


def _train(spec, theta0, dataset, cfg: OptimizerConfig, batch_seed: int, swa: bool) -> RunResult:
    if abs(theta0.radius - cfg.radius) > 1e-12 or abs(theta0.norm - cfg.radius) > 1e-10 * max(1.0, cfg.radius):
        raise PreconditionError("starting point must lie on the configured sphere")
    run = SphereSGD(spec, theta0, dataset, cfg.learning_rate, cfg.batch_size, batch_seed)
    records = [run.record()]
    while run.step < cfg.max_steps:
        chunk = min(cfg.eval_every, cfg.max_steps - run.step)
        if not run.run(chunk):
            break
        records.append(run.record())
    final = run.theta.copy()
    checkpoints: list[ParamVector] = []
    if swa and run.status == OK:
        checkpoints.append(final.copy())
        for _ in range(cfg.swa_checkpoints - 1):
            if not run.run(run.steps_per_epoch):
                break
            checkpoints.append(run.theta.copy())
    return RunResult(final, records, checkpoints, run.status, run.step)


def pretrain(spec: NetworkSpec, dataset, cfg: OptimizerConfig, init_seed: int, batch_seed: int,
             theta0: ParamVector | None = None) -> RunResult:
    """Train from a fresh initialization with a fixed learning rate.

    After ``cfg.max_steps`` the run continues ``swa_checkpoints - 1`` more
    epochs at the same rate; the endpoint and each later epoch boundary are
    kept in ``checkpoints`` for weight averaging. ``params`` is the endpoint.
    """
    if theta0 is None:
        theta0 = init_params(spec, init_seed, cfg.radius)
    return _train(spec, theta0, dataset, cfg, batch_seed, swa=True)


def finetune(spec: NetworkSpec, theta_start: ParamVector, dataset, cfg: OptimizerConfig,
             batch_seed: int, flr_regime: str | None, force: bool = False) -> RunResult:
    """Continue training from ``theta_start`` with a (regime 1) fine-tuning rate.

    ``flr_regime`` is the regime label of ``cfg.learning_rate``; anything but
    ``"R1"`` is refused unless ``force`` is set.
    """
    if not force and str(flr_regime) != "R1":
        raise PreconditionError(f"fine-tuning LR must be regime R1, got {flr_regime!r}")
    return _train(spec, theta_start, dataset, cfg, batch_seed, swa=False)


def train_until(spec: NetworkSpec, dataset, cfg: OptimizerConfig, batch_seed: int,
                theta0: ParamVector, loss_threshold: float = 1e-3,
                max_epochs: int = 20000) -> ConvergenceResult:
    """Train epoch by epoch until the full training loss drops below the threshold."""
    if not loss_threshold > 0:
        raise PreconditionError("loss threshold must be positive")
    run = SphereSGD(spec, theta0, dataset, cfg.learning_rate, cfg.batch_size, batch_seed)
    epochs = 0
    while True:
        cur = run.train_loss()
        if cur < loss_threshold:
            break
        if epochs >= max_epochs:
            epochs = None
            break
        if not run.run(run.steps_per_epoch):
            raise DivergedError(f"non-finite loss after {run.step} steps")
        epochs += 1
    rec = run.record()
    return ConvergenceResult(epochs, run.theta.copy(), rec.train_loss, rec.test_accuracy)


def swa_average(checkpoints: list[ParamVector], n: int, radius: float | None = None) -> ParamVector:
    """Mean of the last ``n`` checkpoints, rescaled onto the sphere."""
    if n < 1 or n > len(checkpoints):
        raise PreconditionError(f"need 1 <= n <= {len(checkpoints)} checkpoints, got {n}")
    tail = checkpoints[-n:]
    shapes = {c.values.shape for c in tail}
    if len(shapes) != 1:
        raise PreconditionError("checkpoints differ in shape")
    mean = np.mean([c.values for c in tail], axis=0)
    r = tail[-1].radius if radius is None else radius
    nrm = np.linalg.norm(mean)
    if nrm < 1e-300:
        raise DegenerateError("checkpoint mean is the zero vector")
    return ParamVector(mean * (r / nrm), tail[-1].groups, r)


def with_lr(cfg: OptimizerConfig, lr: float, max_steps: int | None = None) -> OptimizerConfig:
    return replace(cfg, learning_rate=lr, max_steps=cfg.max_steps if max_steps is None else max_steps)
