"""Fully scale-invariant 3-layer MLP.

Architecture (per input row ``x``)::

    h1 = ReLU(LN(W1 x + b1))
    h2 = ReLU(LN(W2 h1 + b2))
    logits = H h2            # H frozen, ||H||_F = 10

LayerNorm has no affine parameters, so each trainable group (W1, b1) and
(W2, b2) may be rescaled by any positive factor without changing the output.
The trainable vector lives on a sphere of fixed radius.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .errors import EvaluationError, PreconditionError
from .rng import RngStream, derive_seed

HEAD_NORM = 10.0


@dataclass(frozen=True)
class NetworkSpec:
    input_dim: int
    hidden_dim: int = 32
    output_dim: int = 2
    # 0 keeps every group exactly scale-invariant; constant rows map to 0.
    layernorm_epsilon: float = 0.0
    frozen_head_seed: int = 0
    frozen_head: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.frozen_head is None:
            rng = RngStream.for_purpose(self.frozen_head_seed, "frozen-head")
            head = rng.gaussian(self.output_dim * self.hidden_dim).reshape(self.output_dim, self.hidden_dim)
            head *= HEAD_NORM / np.linalg.norm(head)
        else:
            head = np.array(self.frozen_head, dtype=np.float64)
            if head.shape != (self.output_dim, self.hidden_dim):
                raise PreconditionError(f"frozen head must be {self.output_dim}x{self.hidden_dim}")
        head.flags.writeable = False
        object.__setattr__(self, "frozen_head", head)

    @property
    def groups(self) -> tuple[tuple[str, int, int], ...]:
        d, h = self.input_dim, self.hidden_dim
        n1 = h * d + h
        return (("layer1", 0, n1), ("layer2", n1, h * h + h))

    @property
    def n_params(self) -> int:
        return sum(length for _, _, length in self.groups)

    def unpack(self, values: np.ndarray):
        """Views ``(W1, b1, W2, b2)`` into a flat parameter vector."""
        d, h = self.input_dim, self.hidden_dim
        o = 0
        W1 = values[o:o + h * d].reshape(h, d); o += h * d
        b1 = values[o:o + h]; o += h
        W2 = values[o:o + h * h].reshape(h, h); o += h * h
        b2 = values[o:o + h]
        return W1, b1, W2, b2


@dataclass
class ParamVector:
    values: np.ndarray
    groups: tuple[tuple[str, int, int], ...]
    radius: float = 1.0

    def group(self, name: str) -> np.ndarray:
        for g, off, length in self.groups:
            if g == name:
                return self.values[off:off + length]
        raise KeyError(name)

    def group_norms(self) -> dict[str, float]:
        return {g: float(np.linalg.norm(self.values[o:o + n])) for g, o, n in self.groups}

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), self.groups, self.radius)

    def with_values(self, values: np.ndarray) -> "ParamVector":
        return ParamVector(np.asarray(values, dtype=np.float64), self.groups, self.radius)


def init_params(spec: NetworkSpec, init_seed: int, radius: float = 1.0) -> ParamVector:
    """Standard normal draw, then the whole vector projected to ``||theta|| = radius``."""
    rng = RngStream.for_purpose(init_seed, "init")
    v = rng.gaussian(spec.n_params)
    v *= radius / np.linalg.norm(v)
    return ParamVector(v, spec.groups, radius)


def derived_head_seed(init_seed: int) -> int:
    return derive_seed(init_seed, "head")


# ---------------------------------------------------------------- numpy route


def layer_norm(h: np.ndarray, epsilon: float = 0.0) -> np.ndarray:
    """Normalize along the last axis with population variance; no affine terms."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] < 2:
        raise PreconditionError("layer_norm needs at least 2 features")
    c = h - h.mean(axis=-1, keepdims=True)
    s = np.sqrt((c * c).mean(axis=-1, keepdims=True) + epsilon)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(s > 0, c / np.where(s > 0, s, 1.0), 0.0)
    return out


def _activations(spec: NetworkSpec, values: np.ndarray, x: np.ndarray):
    W1, b1, W2, b2 = spec.unpack(values)
    z1 = x @ W1.T + b1
    a1 = np.maximum(layer_norm(z1, spec.layernorm_epsilon), 0.0)
    z2 = a1 @ W2.T + b2
    a2 = np.maximum(layer_norm(z2, spec.layernorm_epsilon), 0.0)
    return [("layer1", z1, a1), ("layer2", z2, a2), ("head", a2 @ spec.frozen_head.T, None)]


def _values(theta) -> np.ndarray:
    return theta.values if isinstance(theta, ParamVector) else np.asarray(theta, dtype=np.float64)


def forward(spec: NetworkSpec, theta, x) -> np.ndarray:
    """Logits for one input vector or a batch of row vectors."""
    x = np.asarray(x, dtype=np.float64)
    values = _values(theta)
    if values.shape != (spec.n_params,):
        raise PreconditionError(f"expected {spec.n_params} parameters, got {values.shape}")
    if x.shape[-1] != spec.input_dim:
        raise PreconditionError(f"expected input dim {spec.input_dim}, got {x.shape[-1]}")
    single = x.ndim == 1
    logits = _activations(spec, values, np.atleast_2d(x))[-1][1]
    return logits[0] if single else logits


def _locate_nonfinite(spec, values, x) -> str:
    with np.errstate(all="ignore"):
        for name, z, a in _activations(spec, values, x):
            if not np.all(np.isfinite(z)) or (a is not None and not np.all(np.isfinite(a))):
                return name
    return "loss"


# ---------------------------------------------------------------- numba kernels


@nb.njit(cache=True)
def _ln_rows(z, eps, out, inv_s):
    B, h = z.shape
    for b in range(B):
        mu = 0.0
        for j in range(h):
            mu += z[b, j]
        mu /= h
        var = 0.0
        for j in range(h):
            c = z[b, j] - mu
            var += c * c
        var = var / h + eps
        if var > 0.0:
            s = 1.0 / np.sqrt(var)
        else:
            s = 0.0
        inv_s[b] = s
        for j in range(h):
            out[b, j] = (z[b, j] - mu) * s


@nb.njit(cache=True)
def _ln_relu_backward(da, n, inv_s, dz):
    # da: grad wrt ReLU(n); result grad wrt pre-LN z
    B, h = n.shape
    for b in range(B):
        m1 = 0.0
        m2 = 0.0
        for j in range(h):
            g = da[b, j] if n[b, j] > 0.0 else 0.0
            dz[b, j] = g
            m1 += g
            m2 += g * n[b, j]
        m1 /= h
        m2 /= h
        s = inv_s[b]
        for j in range(h):
            dz[b, j] = s * (dz[b, j] - m1 - n[b, j] * m2)


@nb.njit(cache=True)
def _forward_rows(theta, X, idx, head, d, h, eps, a1, n1, s1, a2, n2, s2, logits):
    B = idx.shape[0]
    C = head.shape[0]
    o_b1 = h * d
    o_W2 = o_b1 + h
    o_b2 = o_W2 + h * h
    z = np.empty((B, h))
    for b in range(B):
        r = idx[b]
        for i in range(h):
            acc = theta[o_b1 + i]
            base = i * d
            for k in range(d):
                acc += theta[base + k] * X[r, k]
            z[b, i] = acc
    _ln_rows(z, eps, n1, s1)
    for b in range(B):
        for i in range(h):
            a1[b, i] = n1[b, i] if n1[b, i] > 0.0 else 0.0
    for b in range(B):
        for i in range(h):
            acc = theta[o_b2 + i]
            base = o_W2 + i * h
            for k in range(h):
                acc += theta[base + k] * a1[b, k]
            z[b, i] = acc
    _ln_rows(z, eps, n2, s2)
    for b in range(B):
        for i in range(h):
            a2[b, i] = n2[b, i] if n2[b, i] > 0.0 else 0.0
    for b in range(B):
        for c in range(C):
            acc = 0.0
            for k in range(h):
                acc += head[c, k] * a2[b, k]
            logits[b, c] = acc


@nb.njit(cache=True)
def _loss_grad(theta, X, Y, idx, head, d, h, eps, grad):
    """Mean cross-entropy over rows ``idx``; writes the gradient into ``grad``."""
    B = idx.shape[0]
    C = head.shape[0]
    a1 = np.empty((B, h)); n1 = np.empty((B, h)); s1 = np.empty(B)
    a2 = np.empty((B, h)); n2 = np.empty((B, h)); s2 = np.empty(B)
    logits = np.empty((B, C))
    _forward_rows(theta, X, idx, head, d, h, eps, a1, n1, s1, a2, n2, s2, logits)
    o_b1 = h * d
    o_W2 = o_b1 + h
    o_b2 = o_W2 + h * h
    loss = 0.0
    dlog = np.empty((B, C))
    for b in range(B):
        m = logits[b, 0]
        for c in range(1, C):
            if logits[b, c] > m:
                m = logits[b, c]
        se = 0.0
        for c in range(C):
            se += np.exp(logits[b, c] - m)
        lse = m + np.log(se)
        loss += lse - logits[b, Y[idx[b]]]
        for c in range(C):
            dlog[b, c] = np.exp(logits[b, c] - lse) / B
        dlog[b, Y[idx[b]]] -= 1.0 / B
    loss /= B
    da = np.empty((B, h))
    for b in range(B):
        for k in range(h):
            acc = 0.0
            for c in range(C):
                acc += dlog[b, c] * head[c, k]
            da[b, k] = acc
    dz = np.empty((B, h))
    _ln_relu_backward(da, n2, s2, dz)
    for i in range(grad.shape[0]):
        grad[i] = 0.0
    for b in range(B):
        for i in range(h):
            g = dz[b, i]
            if g != 0.0:
                base = o_W2 + i * h
                for k in range(h):
                    grad[base + k] += g * a1[b, k]
                grad[o_b2 + i] += g
    for b in range(B):
        for k in range(h):
            acc = 0.0
            for i in range(h):
                acc += dz[b, i] * theta[o_W2 + i * h + k]
            da[b, k] = acc
    _ln_relu_backward(da, n1, s1, dz)
    for b in range(B):
        r = idx[b]
        for i in range(h):
            g = dz[b, i]
            if g != 0.0:
                base = i * d
                for k in range(d):
                    grad[base + k] += g * X[r, k]
                grad[o_b1 + i] += g
    return loss


@nb.njit(cache=True)
def _evaluate(theta, X, Y, head, d, h, eps):
    """Return (mean loss, accuracy) over all rows; ties go to the lower class."""
    n = X.shape[0]
    C = head.shape[0]
    chunk = 256
    loss = 0.0
    correct = 0
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        idx = np.arange(start, stop)
        B = stop - start
        a1 = np.empty((B, h)); n1 = np.empty((B, h)); s1 = np.empty(B)
        a2 = np.empty((B, h)); n2 = np.empty((B, h)); s2 = np.empty(B)
        logits = np.empty((B, C))
        _forward_rows(theta, X, idx, head, d, h, eps, a1, n1, s1, a2, n2, s2, logits)
        for b in range(B):
            m = logits[b, 0]
            am = 0
            for c in range(1, C):
                if logits[b, c] > m:
                    m = logits[b, c]
                    am = c
            se = 0.0
            for c in range(C):
                se += np.exp(logits[b, c] - m)
            loss += m + np.log(se) - logits[b, Y[start + b]]
            if am == Y[start + b]:
                correct += 1
    return loss / n, correct / n


# ---------------------------------------------------------------- public API


def _as_xy(xs, ys):
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(xs, dtype=np.float64)))
    Y = np.ascontiguousarray(np.asarray(ys, dtype=np.int64).reshape(-1))
    if X.shape[0] == 0 or X.shape[0] != Y.shape[0]:
        raise PreconditionError("batch must be nonempty with one label per row")
    return X, Y


def loss_and_grad(spec: NetworkSpec, theta, batch_x, batch_y) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its exact gradient w.r.t. the trainable vector."""
    X, Y = _as_xy(batch_x, batch_y)
    values = np.ascontiguousarray(_values(theta))
    if X.shape[1] != spec.input_dim:
        raise PreconditionError(f"expected input dim {spec.input_dim}, got {X.shape[1]}")
    grad = np.empty_like(values)
    loss = _loss_grad(values, X, Y, np.arange(X.shape[0]), spec.frozen_head,
                      spec.input_dim, spec.hidden_dim, spec.layernorm_epsilon, grad)
    if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
        raise EvaluationError(f"non-finite value in {_locate_nonfinite(spec, values, X)}")
    return float(loss), grad


def loss(spec: NetworkSpec, theta, xs, ys) -> float:
    return evaluate(spec, theta, xs, ys)[0]


def evaluate(spec: NetworkSpec, theta, xs, ys) -> tuple[float, float]:
    """``(mean loss, accuracy)`` over a dataset."""
    X, Y = _as_xy(xs, ys)
    values = np.ascontiguousarray(_values(theta))
    lo, acc = _evaluate(values, X, Y, spec.frozen_head, spec.input_dim,
                        spec.hidden_dim, spec.layernorm_epsilon)
    return float(lo), float(acc)


def accuracy(spec: NetworkSpec, theta, xs, ys) -> float:
    """Fraction of rows whose argmax logit (lowest index on ties) equals the label."""
    return evaluate(spec, theta, xs, ys)[1]


def error(spec: NetworkSpec, theta, xs, ys) -> float:
    return 1.0 - accuracy(spec, theta, xs, ys)
