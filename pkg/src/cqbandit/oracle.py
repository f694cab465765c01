"""Exact LP baselines, Slater margin, and an enumeration cross-check.

The fluid problem is

    max   sum_{c,j} p_c r(c,j) x[c,j]
    s.t.  sum_j x[c,j] = 1,  x >= 0                   for every context c
          sum_{c,j} p_c w_k(c,j) x[c,j] + eps <= 0     for every constraint k

with ``eps = 0`` for the regret baseline.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import simplex
from .instances import Instance


class LpInfeasible(ValueError):
    pass


class InvalidMixture(ValueError):
    pass


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class LpSolution:
    x: np.ndarray  # (C, J) action probabilities per context
    objective: float
    status: str
    active_margin: np.ndarray  # slack of each cost constraint, -(sum p w x) - eps

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _lp_data(instance: Instance):
    p = instance.contexts.p
    r = instance.mean_rewards
    w = instance.mean_costs
    C, J = r.shape
    obj = (p[:, None] * r).reshape(-1)
    A_eq = np.kron(np.eye(C), np.ones((1, J)))
    A_ub = (p[None, :, None] * w).reshape(w.shape[0], -1)
    return obj, A_eq, A_ub, (C, J)


def cost_aggregates(instance: Instance, x: np.ndarray) -> np.ndarray:
    """``sum_{c,j} p_c w_k(c,j) x[c,j]`` for each k."""
    return np.einsum("c,kcj,cj->k", instance.contexts.p, instance.mean_costs, x)


def solve_tightened(instance: Instance, eps: float) -> LpSolution:
    if eps < 0:
        raise ValueError("eps must be >= 0")
    obj, A_eq, A_ub, shape = _lp_data(instance)
    res = simplex.solve(obj, A_eq, np.ones(shape[0]), A_ub, np.full(A_ub.shape[0], -eps))
    if res.status != "optimal":
        nan = np.full(shape, np.nan)
        return LpSolution(nan, float("nan"), "infeasible", np.full(A_ub.shape[0], np.nan))
    x = np.maximum(res.x.reshape(shape), 0.0)
    return LpSolution(x, float(obj @ x.reshape(-1)), "optimal", -cost_aggregates(instance, x) - eps)


def solve_baseline(instance: Instance) -> LpSolution:
    return solve_tightened(instance, 0.0)


def require_optimal(sol: LpSolution) -> LpSolution:
    if not sol.optimal:
        raise LpInfeasible("no action distribution satisfies the cost constraints")
    return sol


def _max_margin(instance: Instance):
    _, A_eq, A_ub, (C, J) = _lp_data(instance)
    n = C * J
    K = A_ub.shape[0]
    # variables (x, s): max s  s.t.  A_ub x + s <= 0,  s <= 1
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_eq_s = np.hstack([A_eq, np.zeros((C, 1))])
    A_ub_s = np.vstack([np.hstack([A_ub, np.ones((K, 1))]), np.eye(1, n + 1, n)])
    res = simplex.solve(c, A_eq_s, np.ones(C), A_ub_s, np.concatenate([np.zeros(K), [1.0]]))
    if res.status != "optimal":
        raise LpInfeasible("baseline LP is infeasible; no Slater margin exists")
    return res, (C, J)


def slater_margin(instance: Instance) -> float:
    """Largest ``delta <= 1`` with some x having every cost aggregate <= -delta."""
    res, _ = _max_margin(instance)
    return float(min(max(res.objective, 0.0), 1.0))


def interior_solution(instance: Instance) -> LpSolution:
    """An x attaining the Slater margin (the max-margin LP's optimiser)."""
    res, (C, J) = _max_margin(instance)
    x = np.maximum(res.x[:-1].reshape(C, J), 0.0)
    obj = float((instance.contexts.p[:, None] * instance.mean_rewards * x).sum())
    return LpSolution(x, obj, "optimal", -cost_aggregates(instance, x))


def mixture(eps: float, delta: float, x_star: LpSolution, x_interior: LpSolution) -> np.ndarray:
    """``(1 - eps/delta) x_star + (eps/delta) x_interior``."""
    if delta <= 0 or eps < 0 or eps > delta:
        raise InvalidMixture(f"need 0 <= eps <= delta and delta > 0, got eps={eps}, delta={delta}")
    if eps == 0:
        return x_star.x.copy()
    if eps == delta:
        return x_interior.x.copy()
    a = eps / delta
    return (1.0 - a) * x_star.x + a * x_interior.x


BRUTE_FORCE_CAP = 12


def brute_force_value(instance: Instance, eps: float = 0.0) -> float:
    """Optimal value by enumerating basic feasible solutions.

    Returns ``nan`` when no vertex is feasible.  Only for ``|C| * J <= 12``.
    """
    obj, A_eq, A_ub, (C, J) = _lp_data(instance)
    n = C * J
    if n > BRUTE_FORCE_CAP:
        raise TooLarge(f"|C|*J = {n} exceeds the enumeration cap {BRUTE_FORCE_CAP}")
    K = A_ub.shape[0]
    # candidate active constraints: K cost rows, then n nonnegativity rows
    rows = np.vstack([A_ub, np.eye(n)])
    rhs = np.concatenate([np.full(K, -eps), np.zeros(n)])
    best = -np.inf
    for active in itertools.combinations(range(K + n), n - C):
        M = np.vstack([A_eq, rows[list(active)]])
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, np.concatenate([np.ones(C), rhs[list(active)]]))
        if np.all(x >= -1e-9) and np.all(A_ub @ x + eps <= 1e-9):
            best = max(best, float(obj @ x))
    return best if np.isfinite(best) else float("nan")


def best_anytime_policy_value(instance: Instance) -> float:
    """Exhaustive search for a single-context, deterministic-cost instance.

    With one context and deterministic costs a deterministic policy sees
    nothing it could not reconstruct from its own past actions, so the policy
    space is the set of action sequences.  Returns the best expected reward of
    a sequence whose cumulative cost is <= 0 after every round, or ``-inf``.
    """
    if instance.n_contexts != 1:
        raise ValueError("exhaustive policy search needs a single context")
    r = instance.mean_rewards[0]
    w = instance.mean_costs[:, 0, :]
    if instance.linear_cost or np.any(instance.cost.low != instance.cost.high):
        raise ValueError("exhaustive policy search needs deterministic costs")
    J, T = instance.J, instance.T
    if J**T > 10**6:
        raise TooLarge("policy space too large to enumerate")
    best = -np.inf
    for seq in itertools.product(range(J), repeat=T):
        cum = np.cumsum(w[:, seq], axis=1)
        if np.all(cum <= 1e-12):
            best = max(best, float(r[list(seq)].sum()))
    return best
