import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lrlab.errors import DegenerateError, PreconditionError
from lrlab.mlp import NetworkSpec, ParamVector, init_params, loss, loss_and_grad
from lrlab.rng import RngStream
from lrlab.tick import generate_tick_dataset
from lrlab.trainer import (OptimizerConfig, SphereSGD, effective_lr, finetune, pretrain, projected_sgd_step,
                           swa_average, train_until)

SPEC = NetworkSpec(input_dim=3, hidden_dim=6, output_dim=2, frozen_head_seed=2)


def toy_data(n=50, seed=0):
    rng = RngStream(seed)
    x = rng.gaussian(n * 3).reshape(n, 3)
    y = (x[:, 0] + 0.5 * x[:, 1] > 0).astype(int)
    return SimpleNamespace(train_x=x, train_y=y, test_x=x[:20], test_y=y[:20])


@given(st.integers(0, 1000), st.floats(1e-4, 10.0), st.floats(0.2, 5.0))
@settings(max_examples=40, deadline=None)
def test_projected_step_closed_form(seed, lr, radius):
    theta = init_params(SPEC, seed, radius)
    g = RngStream(seed + 1).gaussian(SPEC.n_params)
    out = projected_sgd_step(theta, g, lr)
    v = theta.values - lr * g
    np.testing.assert_allclose(out.values, v * radius / np.linalg.norm(v), rtol=1e-13, atol=1e-15)
    assert abs(out.norm - radius) < 1e-10 * radius


def test_projected_step_collapse():
    theta = ParamVector(np.array([1.0, 0.0]), (("g", 0, 2),))
    with pytest.raises(DegenerateError):
        projected_sgd_step(theta, np.array([1.0, 0.0]), 1.0)


def test_effective_lr():
    assert effective_lr(0.1, np.array([3.0, 4.0])) == pytest.approx(0.1 / 25)
    with pytest.raises(DegenerateError):
        effective_lr(0.1, np.zeros(3))


def test_config_validation():
    with pytest.raises(PreconditionError):
        OptimizerConfig(0.0)
    with pytest.raises(PreconditionError):
        OptimizerConfig(0.1, batch_size=0)


def test_minibatch_run_matches_reference_loop():
    data = toy_data()
    theta0 = init_params(SPEC, 1)
    lr, bs, steps = 0.05, 16, 10
    run = SphereSGD(SPEC, theta0, data, lr, bs, batch_seed=5)
    run.run(steps)
    # independent replay: reshuffle at every epoch start, batches in order, last batch short
    rng = RngStream.for_purpose(5, "batch-order")
    theta, perm, pos = theta0.copy(), None, len(data.train_y)
    for _ in range(steps):
        if pos >= len(data.train_y):
            perm, pos = rng.permutation(len(data.train_y)), 0
        idx = perm[pos:pos + bs]
        _, g = loss_and_grad(SPEC, theta, data.train_x[idx], data.train_y[idx])
        theta = projected_sgd_step(theta, g, lr)
        pos += len(idx)
    # summation order differs between the kernels, so agreement is to rounding only
    np.testing.assert_allclose(run.theta.values, theta.values, rtol=1e-9, atol=1e-12)
    assert run.steps_per_epoch == math.ceil(50 / 16)


def test_sphere_invariant_over_training():
    data = generate_tick_dataset(0, 0.2)
    spec = NetworkSpec(32, frozen_head_seed=1)
    res = pretrain(spec, data, OptimizerConfig(0.05, max_steps=4000, eval_every=100), 0, 0)
    assert res.status == "ok" and len(res.records) == 41
    for r in res.records:
        assert abs(r.total_norm - 1.0) < 1e-10
        assert abs(math.hypot(*r.group_norms.values()) - 1.0) < 1e-10
    assert [r.step for r in res.records] == list(range(0, 4001, 100))


def test_pretrain_deterministic_and_seed_sensitive():
    data = toy_data()
    cfg = OptimizerConfig(0.1, batch_size=8, max_steps=200, eval_every=50)
    a = pretrain(SPEC, data, cfg, 0, 0)
    b = pretrain(SPEC, data, cfg, 0, 0)
    c = pretrain(SPEC, data, cfg, 0, 1)
    np.testing.assert_array_equal(a.params.values, b.params.values)
    assert not np.array_equal(a.params.values, c.params.values)


def test_swa_checkpoints_are_endpoint_plus_epochs():
    data = toy_data()
    cfg = OptimizerConfig(0.1, batch_size=10, max_steps=100, eval_every=50, swa_checkpoints=5)
    res = pretrain(SPEC, data, cfg, 0, 0)
    assert len(res.checkpoints) == 5
    np.testing.assert_array_equal(res.checkpoints[0].values, res.params.values)
    # replay: each later checkpoint is one more epoch (5 steps) of the same run
    run = SphereSGD(SPEC, init_params(SPEC, 0), data, 0.1, 10, 0)
    run.run(100)
    for ck in res.checkpoints[1:]:
        run.run(5)
        np.testing.assert_array_equal(ck.values, run.theta.values)


def test_swa_average_closed_form():
    groups = (("g", 0, 3),)
    cks = [ParamVector(np.array(v, float), groups) for v in ([1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0])]
    out = swa_average(cks, 3, radius=2.0)
    expect = np.array([1.0, 2.0, 1.0]) / 3
    np.testing.assert_allclose(out.values, expect * 2.0 / np.linalg.norm(expect))
    with pytest.raises(PreconditionError):
        swa_average(cks, 5)
    same = swa_average([cks[0]] * 4, 4)
    np.testing.assert_array_equal(same.values, cks[0].values)


def test_finetune_requires_regime_one():
    data = toy_data()
    theta = init_params(SPEC, 0)
    cfg = OptimizerConfig(1e-3, batch_size=10, max_steps=10, eval_every=5)
    with pytest.raises(PreconditionError):
        finetune(SPEC, theta, data, cfg, 0, flr_regime="R2")
    assert finetune(SPEC, theta, data, cfg, 0, flr_regime="R2", force=True).steps == 10
    assert finetune(SPEC, theta, data, cfg, 0, flr_regime="R1").checkpoints == []


def test_start_must_be_on_sphere():
    data = toy_data()
    theta = init_params(SPEC, 0).with_values(init_params(SPEC, 0).values * 2)
    with pytest.raises(PreconditionError):
        finetune(SPEC, theta, data, OptimizerConfig(1e-3, batch_size=10, max_steps=5), 0, "R1")


def test_train_until_converges_and_times_out():
    data = toy_data()
    theta = init_params(SPEC, 0)
    cfg = OptimizerConfig(0.05, batch_size=10)
    res = train_until(SPEC, data, cfg, 0, theta, loss_threshold=0.05, max_epochs=3000)
    assert not res.timed_out and res.final_loss < 0.05
    assert loss(SPEC, res.params, data.train_x, data.train_y) == pytest.approx(res.final_loss)
    short = train_until(SPEC, data, cfg, 0, theta, loss_threshold=1e-12, max_epochs=2)
    assert short.timed_out


def test_divergence_is_flagged():
    data = toy_data()
    data.train_x = data.train_x.copy()
    data.train_x[3, 0] = np.inf
    res = pretrain(SPEC, data, OptimizerConfig(0.1, batch_size=50, max_steps=20, eval_every=10), 0, 0)
    assert res.diverged and res.checkpoints == []
    assert np.all(np.isfinite(res.params.values))
