"""Acceptance battery: scaling and correctness checks with pinned tolerances.

``run_suite("full")`` uses the horizons and seed counts the checks are
specified at; ``"quick"`` shrinks them for a smoke run.  Tolerances are the
same in both suites.
"""

from __future__ import annotations

import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import metrics
from .algorithm import simulate
from .dual import Schedule, tau_prime
from .experiment import ExperimentConfig, preset_instance, run_experiment
from .instances import ContextDistribution, FeatureMap, Instance, RewardModel, TabularCost
from .oracle import best_anytime_policy_value, brute_force_value, slater_margin, solve_baseline, solve_tightened

SUITES = ("quick", "full")

# pinned tolerances
SLOPE_MAIN = (0.40, 0.65)
SLOPE_LINEAR_COST = (0.40, 0.70)
TAU_HAT_CAP_MAIN = 2000
TAU_HAT_CAP_LINEAR_COST = 20_000
TAIL_FREQ_MAX = 0.05
QUEUE_RATIO_MAX = 2.0
COVERAGE_MIN = 0.99
LP_TOL = 1e-7
GAP_TOL = 1e-9
POLICY_BOUND_TOL = 1e-9

PARAMS = {
    "full": dict(main_seeds=50, main_T=100_000, tail_seeds=200, tail_T=10_000, queue_seeds=20, queue_T=10_000,
                 cov_runs=1000, cov_T=1000, lp_instances=100, policy_instances=60, lc_seeds=50, lc_T=100_000),
    "quick": dict(main_seeds=10, main_T=20_000, tail_seeds=100, tail_T=10_000, queue_seeds=10, queue_T=10_000,
                  cov_runs=300, cov_T=1000, lp_instances=30, policy_instances=20, lc_seeds=10, lc_T=20_000),
}


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d}. {self.name}: {self.detail} ({self.seconds:.1f}s)"


class Battery:
    """Shared state so criteria 1-2 and 6-7 reuse the same simulations and instances."""

    def __init__(self, suite: str = "full"):
        if suite not in SUITES:
            raise ValueError(f"unknown suite {suite!r}; expected one of {SUITES}")
        self.suite = suite
        self.params = PARAMS[suite]
        self._main = None
        self._tiny = None

    # -- shared fixtures ---------------------------------------------------

    def main_runs(self):
        if self._main is None:
            P = self.params
            inst = preset_instance("mab", P["main_T"])
            sched = Schedule.for_instance("experiment-mab", inst)
            batch = simulate(inst, "pessimistic-optimistic", sched, range(P["main_seeds"]))
            self._main = (inst, batch, solve_baseline(inst).objective)
        return self._main

    def tiny_instances(self):
        if self._tiny is None:
            self._tiny = [random_tiny_instance(s) for s in range(self.params["lp_instances"])]
        return self._tiny

    # -- criteria ------------------------------------------------------------

    def c1_regret_slope(self) -> CriterionResult:
        inst, batch, opt = self.main_runs()
        reg, _ = metrics.regret_curve(batch, opt)
        pos = np.maximum(reg, 0.0)
        lo, hi = 1000, inst.T
        if np.any(pos[lo - 1:hi] <= 0):
            return CriterionResult(1, "sqrt(tau) regret rate", False, "regret not positive on the fit range")
        slope = metrics.loglog_slope(pos, (lo, hi))
        ok = SLOPE_MAIN[0] <= slope <= SLOPE_MAIN[1]
        return CriterionResult(1, "sqrt(tau) regret rate", ok,
                               f"slope {slope:.3f} on [{lo}, {hi}], need {SLOPE_MAIN}; R({hi}) = {reg[-1]:.1f}")

    def c2_zero_violation(self) -> CriterionResult:
        _, batch, _ = self.main_runs()
        tau_hat = metrics.first_zero_violation_round(metrics.violation_curve(batch))
        ok = tau_hat is not None and tau_hat <= TAU_HAT_CAP_MAIN
        return CriterionResult(2, "zero violation after finite tau'", ok, f"tau_hat = {tau_hat}, cap {TAU_HAT_CAP_MAIN}")

    def c3_tail_decay(self) -> CriterionResult:
        P = self.params
        inst = preset_instance("mab", P["tail_T"])
        batch = simulate(inst, "pessimistic-optimistic", Schedule.for_instance("experiment-mab", inst), range(P["tail_seeds"]))
        freq = metrics.pathwise_violation_freq(batch, 0)
        checks = [f for f in (100, 1000, 10_000) if f <= inst.T]
        vals = [float(freq[t - 1]) for t in checks]
        ok = vals[-1] <= TAIL_FREQ_MAX and all(a >= b for a, b in zip(vals, vals[1:]))
        return CriterionResult(3, "pathwise tail decay", ok, f"freq at {checks} = {vals}, need nonincreasing, last <= {TAIL_FREQ_MAX}")

    def c4_queue_bounded(self) -> CriterionResult:
        P = self.params
        stats = []
        for T in (P["queue_T"], 2 * P["queue_T"]):
            inst = preset_instance("mab", T)
            sched = Schedule.for_instance("experiment-mab", inst)
            batch = simulate(inst, "pessimistic-optimistic", sched, range(P["queue_seeds"]))
            t_min = tau_prime(sched, inst.delta)
            stats.append(float(metrics.queue_stats(batch, t_min)[0]))
        lo, hi = min(stats), max(stats)
        ratio = 1.0 if hi == 0 else (np.inf if lo == 0 else hi / lo)
        ok = ratio < QUEUE_RATIO_MAX
        return CriterionResult(4, "queue boundedness", ok, f"max Q/sqrt(t) over t >= tau' = {stats}, ratio {ratio:.3f} < {QUEUE_RATIO_MAX}")

    def c5_coverage(self) -> CriterionResult:
        P = self.params
        inst = preset_instance("linear", P["cov_T"])
        batch = simulate(inst, "pessimistic-optimistic", Schedule.for_instance("theory-main", inst),
                         range(P["cov_runs"]), p=1.0 / inst.T, trace=True)
        frac = float(batch.trace["covered"].all(axis=1).mean())
        return CriterionResult(5, "confidence coverage", frac >= COVERAGE_MIN,
                               f"theta_star in every B_t for {frac:.4f} of {batch.n} runs (d={inst.d}), need >= {COVERAGE_MIN}")

    def c6_lp_equivalence(self) -> CriterionResult:
        worst = 0.0
        mismatched = 0
        for inst in self.tiny_instances():
            sol = solve_baseline(inst)
            bf = brute_force_value(inst)
            if sol.optimal != np.isfinite(bf):
                mismatched += 1
            elif sol.optimal:
                worst = max(worst, abs(sol.objective - bf))
        mab = preset_instance("mab", 10)
        obj, margin = solve_baseline(mab).objective, slater_margin(mab)
        ok = mismatched == 0 and worst <= LP_TOL and obj == 0.7 and margin == 0.5
        return CriterionResult(6, "LP oracle equivalence", ok,
                               f"max |simplex - enumeration| = {worst:.2e} over {len(self.tiny_instances())} instances, "
                               f"{mismatched} status mismatches; MAB objective {obj!r}, delta* {margin!r}")

    def c7_tightening_gap(self) -> CriterionResult:
        worst = -np.inf
        checked = 0
        for inst in self.tiny_instances():
            base = solve_baseline(inst)
            if not base.optimal:
                continue
            dstar = slater_margin(inst)
            if dstar <= 0:
                continue
            for eps in np.linspace(0.0, dstar, 10):
                tight = solve_tightened(inst, float(eps))
                if not tight.optimal:
                    return CriterionResult(7, "tightening gap <= eps/delta*", False, f"tightened LP infeasible at eps={eps} <= delta*={dstar}")
                worst = max(worst, (base.objective - tight.objective) - eps / dstar)
                checked += 1
        ok = checked > 0 and worst <= GAP_TOL
        return CriterionResult(7, "tightening gap <= eps/delta*", ok, f"max (gap - eps/delta*) = {worst:.2e} over {checked} (instance, eps) pairs")

    def c8_policy_bound(self) -> CriterionResult:
        worst = -np.inf
        for s in range(self.params["policy_instances"]):
            inst = random_policy_search_instance(s)
            lp = solve_baseline(inst)
            best = best_anytime_policy_value(inst)
            if not lp.optimal:
                if np.isfinite(best):
                    return CriterionResult(8, "fluid LP upper bound", False, f"instance {s}: LP infeasible but a policy is feasible")
                continue
            worst = max(worst, best - inst.T * lp.objective)
        ok = worst <= POLICY_BOUND_TOL
        return CriterionResult(8, "fluid LP upper bound", ok, f"max (best policy - T * LP) = {worst:.2e}")

    def c9_linear_cost(self) -> CriterionResult:
        P = self.params
        inst = preset_instance("linear-cost", P["lc_T"])
        batch = simulate(inst, "pessimistic-optimistic", Schedule.for_instance("theory-linear-cost", inst), range(P["lc_seeds"]))
        opt = solve_baseline(inst).objective
        reg, _ = metrics.regret_curve(batch, opt)
        pos = np.maximum(reg, 0.0)
        lo, hi = 1000, inst.T
        slope = metrics.loglog_slope(pos, (lo, hi)) if np.all(pos[lo - 1:] > 0) else float("nan")
        tau_hat = metrics.first_zero_violation_round(metrics.violation_curve(batch))
        slope_ok = SLOPE_LINEAR_COST[0] <= slope <= SLOPE_LINEAR_COST[1]
        viol_ok = tau_hat is not None and tau_hat <= TAU_HAT_CAP_LINEAR_COST
        return CriterionResult(9, "linear-cost variant", slope_ok and viol_ok,
                               f"slope {slope:.3f} on [{lo}, {hi}], need {SLOPE_LINEAR_COST}; "
                               f"tau_hat = {tau_hat}, cap {TAU_HAT_CAP_LINEAR_COST}; delta = {inst.delta:.4f}")

    def c10_determinism(self) -> CriterionResult:
        cfg = ExperimentConfig(instance="mab", T=3000, n_replications=4, write_trajectories=False, workers=1)
        with tempfile.TemporaryDirectory() as tmp:
            outs = [Path(tmp, name) for name in ("a", "b", "c")]
            run_experiment(cfg, outs[0])
            run_experiment(cfg, outs[1])
            # a different worker split must not change the bytes either
            run_experiment(ExperimentConfig(**{**cfg.__dict__, "workers": 2}), outs[2])
            blobs = [(o / "aggregate.csv").read_bytes() for o in outs]
        same = blobs[0] == blobs[1] == blobs[2]
        detail = "aggregate CSV byte-identical across repeated runs and worker counts" if same else "aggregate CSVs differ"
        return CriterionResult(10, "determinism", same, detail)

    def criteria(self) -> list[Callable[[], CriterionResult]]:
        return [self.c1_regret_slope, self.c2_zero_violation, self.c3_tail_decay, self.c4_queue_bounded,
                self.c5_coverage, self.c6_lp_equivalence, self.c7_tightening_gap, self.c8_policy_bound,
                self.c9_linear_cost, self.c10_determinism]


def timed(fn: Callable[[], CriterionResult]) -> CriterionResult:
    t0 = time.perf_counter()
    res = fn()
    res.seconds = time.perf_counter() - t0
    return res


def run_suite(suite: str = "full", echo: Callable[[str], None] = print) -> list[CriterionResult]:
    battery = Battery(suite)
    results = []
    for crit in battery.criteria():
        res = timed(crit)
        echo(res.line())
        results.append(res)
    return results


def random_tiny_instance(seed: int) -> Instance:
    """|C| <= 2, J <= 3, K <= 2 deterministic-cost instance with one-hot features."""
    gen = np.random.default_rng(10_000 + seed)
    C, J, K = int(gen.integers(1, 3)), int(gen.integers(1, 4)), int(gen.integers(1, 3))
    u = gen.uniform(0.2, 0.8)
    p = np.array([1.0]) if C == 1 else np.array([u, 1.0 - u])
    phi = np.eye(C * J).reshape(C, J, C * J)
    theta = gen.uniform(0, 1, C * J)
    cost = TabularCost.deterministic(gen.uniform(-1, 1, (K, C, J)))
    return Instance(ContextDistribution(p), FeatureMap(phi), RewardModel(theta), cost, T=10, name=f"tiny-{seed}")


def random_policy_search_instance(seed: int) -> Instance:
    """Single context, J <= 3, K = 1, T <= 6, deterministic costs with a safe action."""
    gen = np.random.default_rng(20_000 + seed)
    J, T = int(gen.integers(2, 4)), int(gen.integers(2, 7))
    w = gen.uniform(-1, 1, J)
    w[gen.integers(J)] = -gen.uniform(0.05, 1.0)
    cost = TabularCost.deterministic(w.reshape(1, 1, J))
    return Instance(ContextDistribution(np.ones(1)), FeatureMap.onehot(1, J), RewardModel(gen.uniform(0, 1, J)), cost, T=T, name=f"policy-search-{seed}")
