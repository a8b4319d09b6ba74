import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lrlab.errors import PreconditionError
from lrlab.features import FeatureProfile, aggregate_profiles, single_feature_accuracies, sparsity_gap
from lrlab.mlp import NetworkSpec, accuracy, init_params
from lrlab.trainer import OptimizerConfig, pretrain
from lrlab.tick import generate_single_feature_sets, generate_tick_dataset

profiles = arrays(np.float64, 16, elements=st.floats(0, 1))


def test_gap_examples():
    assert sparsity_gap(FeatureProfile(np.full(16, 0.7))) == 0.0
    assert sparsity_gap(FeatureProfile([1.0] + [0.5] * 15)) == pytest.approx(0.5)


@given(profiles, st.permutations(range(16)))
@settings(max_examples=60)
def test_sorting_and_gap_permutation_invariant(raw, perm):
    a, b = FeatureProfile(raw), FeatureProfile(raw[list(perm)])
    np.testing.assert_array_equal(a.sorted, b.sorted)
    assert sparsity_gap(a) == sparsity_gap(b)
    assert np.all(np.diff(a.sorted) <= 0)
    assert sparsity_gap(a) >= 0


def test_aggregate_sorts_before_averaging():
    p1 = FeatureProfile([1.0, 0.5] + [0.5] * 14)
    p2 = FeatureProfile([0.5, 1.0] + [0.5] * 14)
    mean, sd = aggregate_profiles([p1, p2])
    assert mean[0] == 1.0 and sd[0] == 0.0
    m1, s1 = aggregate_profiles([p1])
    np.testing.assert_array_equal(m1, p1.sorted)
    assert np.all(s1 == 0)
    with pytest.raises(PreconditionError):
        aggregate_profiles([p1, FeatureProfile([0.5] * 8)])
    with pytest.raises(PreconditionError):
        aggregate_profiles([])


def test_single_feature_accuracies_match_direct_evaluation():
    ds = generate_tick_dataset(1)
    sets = generate_single_feature_sets(ds, 1)
    spec = NetworkSpec(32, frozen_head_seed=3)
    theta = init_params(spec, 3)
    prof = single_feature_accuracies(spec, theta, sets, run={"plr": 0.1})
    for s in sets:
        assert prof.raw[s.feature_index] == accuracy(spec, theta, s.x, s.y)
    assert prof.run == {"plr": 0.1}
    with pytest.raises(PreconditionError):
        single_feature_accuracies(spec, theta, sets[:3])


def test_chance_floor_for_a_trained_net():
    ds = generate_tick_dataset(2)
    sets = generate_single_feature_sets(ds, 2)
    spec = NetworkSpec(32, frozen_head_seed=4)
    res = pretrain(spec, ds, OptimizerConfig(0.05, max_steps=3000, eval_every=1000, swa_checkpoints=1), 0, 0)
    prof = single_feature_accuracies(spec, res.params, sets)
    floor = 0.5 - 3 * np.sqrt(0.25 / 2000)
    assert np.all(prof.raw >= floor)
