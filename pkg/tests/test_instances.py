import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cqbandit.instances import (
    ContextDistribution,
    FeatureMap,
    Instance,
    InstanceError,
    LinearCost,
    RewardModel,
    TabularCost,
    context_from_uniform,
    mab_instance,
    mean_cost,
    mean_reward,
    random_linear_instance,
    realize_linear_cost,
    realize_reward,
    reward_from_uniform,
    sample_round,
    ward_costs,
    ward_instance,
    WARD_CAPACITY,
    WARD_FAIRNESS,
    WARD_RESOURCE,
)


def test_mab_means(mab):
    np.testing.assert_allclose(mab.mean_rewards[0], [0.1, 0.2, 0.4, 0.7])
    np.testing.assert_allclose(mab.mean_costs[0, 0], [-0.5, -0.1, 0.0, -0.3])
    assert mab.K == 1 and mab.J == 4 and mab.d == 4
    assert mab.delta == 0.5


def test_ward_cost_encoding():
    w = ward_costs([WARD_CAPACITY, WARD_FAIRNESS, WARD_RESOURCE])
    np.testing.assert_allclose(w[2], -0.125)
    np.testing.assert_allclose(w[0], [-0.2, -0.2, -0.05, -0.05, -0.05, -0.05])
    np.testing.assert_allclose(w[1], [-0.05, -0.05, 0.1, 0.1, 0.25, 0.25])


def test_ward_instance_shapes(ward):
    assert (ward.K, ward.J, ward.d, ward.n_contexts) == (3, 6, 6, 8)
    r = ward.mean_rewards
    assert r.min() >= 0 and r.max() <= 1
    assert ward.delta == pytest.approx(0.05, abs=1e-9)


def test_ward_jitter_bounds_checked():
    with pytest.raises(InstanceError):
        ward_instance(cost_jitter=0.9)


@pytest.mark.parametrize("bad", [
    dict(p=[0.5, 0.6]),
    dict(p=[-0.1, 1.1]),
])
def test_context_distribution_validation(bad):
    with pytest.raises(InstanceError):
        ContextDistribution(np.array(bad["p"]))


def test_feature_norm_validation():
    with pytest.raises(InstanceError):
        FeatureMap(np.full((1, 2, 2), 0.8))


def test_reward_range_validation():
    with pytest.raises(InstanceError):
        mab_instance([0.1, 1.2], [0.1, 0.1], 0.5)
    with pytest.raises(InstanceError):
        Instance(ContextDistribution(np.ones(1)), FeatureMap.onehot(1, 2), RewardModel(np.array([-0.5, 0.5])),
                 TabularCost.deterministic(np.zeros((1, 1, 2))), T=10)


def test_delta_validation(mab):
    with pytest.raises(InstanceError):
        mab.with_delta(0.0)
    with pytest.raises(InstanceError):
        mab.with_delta(1.5)


def test_shape_mismatch():
    with pytest.raises(InstanceError):
        Instance(ContextDistribution(np.ones(2)), FeatureMap.onehot(1, 2), RewardModel(np.array([0.5, 0.5])),
                 TabularCost.deterministic(np.zeros((1, 1, 2))), T=10)


def test_monte_carlo_means_match(mab):
    mab = mab.with_horizon(20_000)
    n = 20_000
    rs = mab.streams(5)
    costs = np.array([sample_round(mab, rs, t).cost_matrix[0] for t in range(1, n + 1)])
    np.testing.assert_allclose(costs.mean(axis=0), mab.mean_costs[0, 0], atol=0.015)
    rewards = np.array([realize_reward(mab, rs, t, 0, 3) for t in range(1, n + 1)])
    assert rewards.mean() == pytest.approx(0.7, abs=0.015)


def test_gaussian_reward_noise():
    u = np.linspace(0.0005, 0.9995, 2001)
    x = reward_from_uniform(0.3, u, "gaussian", 2.0)
    assert x.mean() == pytest.approx(0.3, abs=1e-9)
    assert np.all(np.isfinite(reward_from_uniform(0.3, np.array([0.0]), "gaussian", 1.0)))


def test_linear_cost_instance():
    inst = random_linear_instance(3, linear_cost=True, T=100)
    assert isinstance(inst.cost, LinearCost) and inst.linear_cost
    c, j = 2, 1
    assert mean_cost(inst, c, j, 0) == pytest.approx(inst.cost.mu_star[0] @ inst.cost.psi.phi[c, j])
    rs = inst.streams(0)
    vals = np.array([realize_linear_cost(inst, rs, t, c, j)[0] for t in range(1, 4001)])
    assert vals.mean() == pytest.approx(mean_cost(inst, c, j, 0), abs=0.06)
    assert sample_round(inst, rs, 1).cost_matrix is None


def test_random_linear_rewards_in_unit_interval():
    for seed in range(20):
        inst = random_linear_instance(seed, T=10)
        r = inst.mean_rewards
        assert r.min() >= 0 and r.max() <= 1
        assert mean_reward(inst, 0, 0) == pytest.approx(r[0, 0])


def test_sample_round_bounds(mab):
    with pytest.raises(ValueError):
        sample_round(mab, mab.streams(0), mab.T + 1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=6), st.floats(0, 1, exclude_max=True))
def test_context_from_uniform_in_support(weights, u):
    p = np.array(weights) / sum(weights)
    c = int(context_from_uniform(p, u))
    assert 0 <= c < p.size
    assert p[c] > 0
