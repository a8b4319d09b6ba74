import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lrlab.errors import EvaluationError, NotReachedError, PreconditionError
from lrlab.geometry import alpha_grid, angular_distance, linear_barrier, loss_matched_point, sharpness
from lrlab.mlp import NetworkSpec, init_params, loss_and_grad
from lrlab.rng import RngStream

vecs = arrays(np.float64, 6, elements=st.floats(-10, 10)).filter(lambda v: np.linalg.norm(v) > 1e-3)


def test_angle_trivial_cases():
    e1, e2 = np.array([1.0, 0, 0]), np.array([0, 1.0, 0])
    assert angular_distance(e1, e1) == 0.0
    assert abs(angular_distance(e1, e2) - math.pi / 2) < 1e-12
    assert abs(angular_distance(e1, -e1) - math.pi) < 1e-12
    assert angular_distance(3 * e1, 0.5 * e1) == 0.0
    with pytest.raises(PreconditionError):
        angular_distance(e1, np.zeros(3))


@given(vecs, vecs, st.floats(0.01, 100))
@settings(max_examples=100)
def test_angle_is_a_scale_free_metric(a, b, s):
    d = angular_distance(a, b)
    assert 0.0 <= d <= math.pi
    assert d == pytest.approx(angular_distance(b, a), abs=1e-12)
    assert d == pytest.approx(angular_distance(s * a, b), abs=1e-7)


@given(vecs, vecs, vecs)
@settings(max_examples=100)
def test_angle_triangle_inequality(a, b, c):
    assert angular_distance(a, c) <= angular_distance(a, b) + angular_distance(b, c) + 1e-7


def test_barrier_midpoint_bump():
    def err(v):
        return 0.5 if abs(v[0] - 0.5) < 1e-12 else 0.0

    res = linear_barrier(np.array([1.0]), np.array([0.0]), err, alphas=[0, 0.25, 0.5, 0.75, 1])
    assert res.barrier == 0.5 and res.alpha_star == 0.5
    assert res.error_1 == 0.0 and res.error_2 == 0.0


def test_barrier_of_identical_points_is_zero():
    spec = NetworkSpec(4, 5, 2, frozen_head_seed=0)
    theta = init_params(spec, 0)
    x = RngStream(0).gaussian(200).reshape(50, 4)
    y = (x[:, 0] > 0).astype(int)
    from lrlab.mlp import error
    res = linear_barrier(theta, theta, lambda v: error(spec, v, x, y))
    assert res.barrier == 0.0
    assert np.all(res.excess() == 0.0)


def test_barrier_can_be_negative_and_uses_chord():
    # error linear in alpha gives zero excess; concave-down dip gives negative
    res = linear_barrier(np.array([1.0]), np.array([0.0]), lambda v: 0.2 + 0.6 * v[0])
    assert abs(res.barrier) < 1e-12
    res = linear_barrier(np.array([1.0]), np.array([0.0]), lambda v: 0.5 - 0.4 * v[0] * (1 - v[0]), grid_points=5)
    assert res.barrier == 0.0  # endpoints are pinned at zero excess
    assert np.all(res.excess()[1:-1] < 0)


def test_grid_needs_endpoints():
    with pytest.raises(PreconditionError):
        linear_barrier(np.ones(2), np.zeros(2), lambda v: 0.0, alphas=[0.0, 0.5])
    with pytest.raises(PreconditionError):
        alpha_grid(1)
    with pytest.raises(EvaluationError):
        linear_barrier(np.ones(2), np.zeros(2), lambda v: math.nan)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=10))
@settings(max_examples=50)
def test_superset_grid_never_smaller(extra):
    f = lambda v: float(np.sin(7 * v[0]) ** 2 * 0.3)
    a, b = np.array([1.0]), np.array([0.0])
    base = linear_barrier(a, b, f, grid_points=9)
    sup = linear_barrier(a, b, f, alphas=np.union1d(base.alphas, extra))
    assert sup.barrier >= base.barrier


def test_sharpness_full_batch_equals_gradient_norm():
    spec = NetworkSpec(4, 5, 2, frozen_head_seed=0)
    theta = init_params(spec, 1)
    x = RngStream(1).gaussian(120).reshape(30, 4)
    y = (x[:, 1] > 0).astype(int)
    full = sharpness(spec, theta, x, y, 30)
    lo, g = loss_and_grad(spec, theta, x, y)
    assert full.mean_grad_norm == pytest.approx(np.linalg.norm(g), rel=1e-12)
    assert full.loss == pytest.approx(lo, rel=1e-12)
    parts = sharpness(spec, theta, x, y, 7)
    assert len(parts.batch_norms) == 5 and parts.loss == pytest.approx(lo, rel=1e-12)


def test_loss_matched_interpolation():
    losses = [1e-2, 1e-3, 5e-4, 1e-4]
    metrics = [{"s": 4.0}, {"s": 3.0}, {"s": 2.0}, {"s": 1.0}]
    out = loss_matched_point(losses, metrics, 6e-4)
    w = (5e-4 - 6e-4) / (5e-4 - 1e-3)
    assert out["s"] == pytest.approx(w * 3.0 + (1 - w) * 2.0)
    assert loss_matched_point(losses, metrics, 1e-3) == {"s": 3.0}
    with pytest.raises(NotReachedError):
        loss_matched_point(losses, metrics, 1e-6)
