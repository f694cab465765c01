import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cqbandit import simplex
from cqbandit.acceptance import random_policy_search_instance, random_tiny_instance
from cqbandit.instances import ContextDistribution, FeatureMap, Instance, RewardModel, TabularCost
from cqbandit.oracle import (
    InvalidMixture,
    LpInfeasible,
    TooLarge,
    best_anytime_policy_value,
    brute_force_value,
    cost_aggregates,
    interior_solution,
    mixture,
    require_optimal,
    slater_margin,
    solve_baseline,
    solve_tightened,
)


def _slater_seeds(n):
    out = []
    for seed in range(n):
        inst = random_tiny_instance(seed)
        if solve_baseline(inst).optimal and slater_margin(inst) > 0:
            out.append(seed)
    return out


SLATER_SEEDS = _slater_seeds(40)


def tiny(r, w, p=(1.0,)):
    """One-hot instance from per-context reward rows and (K, C, J) cost means."""
    r = np.atleast_2d(np.asarray(r, dtype=float))
    C, J = r.shape
    phi = np.eye(C * J).reshape(C, J, C * J)
    return Instance(ContextDistribution(np.asarray(p)), FeatureMap(phi), RewardModel(r.reshape(-1)),
                    TabularCost.deterministic(np.asarray(w, dtype=float)), T=10)


def test_mab_baseline(mab):
    sol = solve_baseline(mab)
    assert sol.optimal
    assert sol.objective == 0.7
    np.testing.assert_allclose(sol.x, [[0, 0, 0, 1]])
    assert slater_margin(mab) == 0.5


def test_mab_tightened(mab):
    sol = solve_tightened(mab, 0.3)
    np.testing.assert_allclose(sol.x, [[0, 0, 0, 1]], atol=1e-12)
    assert sol.active_margin[0] == pytest.approx(0.0, abs=1e-12)
    assert not solve_tightened(mab, 0.6).optimal
    with pytest.raises(LpInfeasible):
        require_optimal(solve_tightened(mab, 0.6))
    with pytest.raises(ValueError):
        solve_tightened(mab, -0.1)


def test_budget_binding_mixes_two_arms():
    # best arm costs +0.5, safe arm costs -0.5: optimum splits evenly
    inst = tiny([[0.2, 1.0]], [[[-0.5, 0.5]]])
    sol = solve_baseline(inst)
    np.testing.assert_allclose(sol.x, [[0.5, 0.5]], atol=1e-12)
    assert sol.objective == pytest.approx(0.6)
    assert brute_force_value(inst) == pytest.approx(0.6)


def test_infeasible_and_margin():
    inst = tiny([[0.2, 1.0]], [[[0.1, 0.5]]])
    assert not solve_baseline(inst).optimal
    assert np.isnan(brute_force_value(inst))
    with pytest.raises(LpInfeasible):
        slater_margin(inst)


def test_margin_clamped_to_one():
    inst = tiny([[0.5, 0.5]], [[[-1.0, -1.0]]])
    assert slater_margin(inst) == 1.0


def test_two_context_costs_pool_across_contexts():
    # context 0 can only comply, context 1 has slack to spend
    inst = tiny([[0.0, 1.0], [0.0, 1.0]], [[[-0.4, 0.2], [-0.6, 0.2]]], p=(0.5, 0.5))
    sol = solve_baseline(inst)
    assert sol.objective == pytest.approx(brute_force_value(inst))
    assert cost_aggregates(inst, sol.x)[0] <= 1e-12


@pytest.mark.parametrize("seed", range(40))
def test_simplex_matches_enumeration(seed):
    inst = random_tiny_instance(seed)
    sol = solve_baseline(inst)
    bf = brute_force_value(inst)
    assert sol.optimal == np.isfinite(bf)
    if sol.optimal:
        assert sol.objective == pytest.approx(bf, abs=1e-9)
        np.testing.assert_allclose(sol.x.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(cost_aggregates(inst, sol.x) <= 1e-9)


@pytest.mark.parametrize("seed", SLATER_SEEDS)
def test_tightened_monotone_and_gap(seed):
    inst = random_tiny_instance(seed)
    dstar = slater_margin(inst)
    base = solve_baseline(inst).objective
    prev = base
    for eps in np.linspace(0, dstar, 6):
        obj = solve_tightened(inst, float(eps)).objective
        assert obj <= prev + 1e-9
        assert base - obj <= eps / dstar + 1e-9
        assert obj == pytest.approx(brute_force_value(inst, float(eps)), abs=1e-9)
        prev = obj


@pytest.mark.parametrize("seed", SLATER_SEEDS[:10])
def test_mixture_is_feasible_for_tightened(seed):
    inst = random_tiny_instance(seed)
    dstar = slater_margin(inst)
    xs, xi = solve_baseline(inst), interior_solution(inst)
    for eps in (0.0, dstar / 3, dstar):
        x = mixture(eps, dstar, xs, xi)
        assert np.all(cost_aggregates(inst, x) <= -eps + 1e-9)
        np.testing.assert_allclose(x.sum(axis=1), 1.0)


def test_mixture_rejects_bad_eps(mab):
    xs, xi = solve_baseline(mab), interior_solution(mab)
    with pytest.raises(InvalidMixture):
        mixture(0.6, 0.5, xs, xi)
    with pytest.raises(InvalidMixture):
        mixture(0.1, 0.0, xs, xi)


def test_brute_force_cap():
    inst = tiny(np.full((1, 13), 0.5), np.full((1, 1, 13), -0.1))
    with pytest.raises(TooLarge):
        brute_force_value(inst)


@pytest.mark.parametrize("seed", range(30))
def test_policy_search_below_fluid_bound(seed):
    inst = random_policy_search_instance(seed)
    best = best_anytime_policy_value(inst)
    assert np.isfinite(best)
    assert best <= inst.T * solve_baseline(inst).objective + 1e-9


def test_policy_search_hand_example():
    # alternate safe (-0.5, r=0) and risky (+0.5, r=1): 2 of 4 rounds risky at best
    inst = tiny([[0.0, 1.0]], [[[-0.5, 0.5]]]).with_horizon(4)
    assert best_anytime_policy_value(inst) == pytest.approx(2.0)
    assert 4 * solve_baseline(inst).objective == pytest.approx(2.0)


# -- the simplex on its own ----------------------------------------------------


def test_simplex_equality_and_bounds():
    res = simplex.solve(np.array([1.0, 2.0]), np.array([[1.0, 1.0]]), np.array([1.0]),
                        np.array([[0.0, 1.0]]), np.array([0.25]))
    assert res.status == "optimal"
    np.testing.assert_allclose(res.x, [0.75, 0.25])
    assert res.objective == pytest.approx(1.25)


def test_simplex_unbounded():
    with pytest.raises(simplex.Unbounded):
        simplex.solve(np.array([1.0, 0.0]), A_ub=np.array([[0.0, 1.0]]), b_ub=np.array([1.0]))


def test_simplex_redundant_rows():
    A = np.array([[1.0, 1.0], [2.0, 2.0]])
    res = simplex.solve(np.array([0.0, 1.0]), A, np.array([1.0, 2.0]))
    assert res.status == "optimal" and res.objective == pytest.approx(1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_simplex_solution_feasible_and_at_least_any_vertex(n, m, seed):
    gen = np.random.default_rng(seed)
    c = gen.uniform(-1, 1, n)
    A_ub = gen.uniform(-1, 1, (m, n))
    b_ub = gen.uniform(0, 1, m)
    A_eq, b_eq = np.ones((1, n)), np.ones(1)
    res = simplex.solve(c, A_eq, b_eq, A_ub, b_ub)
    vertices = np.eye(n)
    feasible = [v for v in vertices if np.all(A_ub @ v <= b_ub + 1e-12)]
    if res.status != "optimal":
        assert not feasible
        return
    x = res.x
    assert np.all(x >= -1e-9)
    assert abs(x.sum() - 1) <= 1e-9
    assert np.all(A_ub @ x <= b_ub + 1e-9)
    for v in feasible:
        assert res.objective >= c @ v - 1e-9
