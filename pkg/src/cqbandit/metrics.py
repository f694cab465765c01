"""Regret, violation, tail-frequency and queue statistics over replications.

Expectations are estimated by across-replication sample means, folded in
seed-list order so results are reproducible to the last bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .algorithm import Trajectory, TrajectoryBatch

Runs = Union[TrajectoryBatch, Trajectory, Sequence[Trajectory]]


class MetricsError(ValueError):
    pass


def as_batch(runs: Runs) -> TrajectoryBatch:
    if isinstance(runs, TrajectoryBatch):
        return runs
    if isinstance(runs, Trajectory):
        return TrajectoryBatch.stack([runs])
    try:
        return TrajectoryBatch.stack(list(runs))
    except ValueError as exc:
        raise MetricsError(str(exc)) from exc


def _cummean(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Across-run mean and standard error of per-run cumulative sums."""
    cum = np.cumsum(x, axis=1)
    n = cum.shape[0]
    mean = cum.mean(axis=0)
    if n < 2:
        return mean, np.zeros_like(mean)
    return mean, cum.std(axis=0, ddof=1) / np.sqrt(n)


def regret_curve(runs: Runs, opt_per_round: float, realized: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Pseudo-regret ``tau * opt - mean cumulative reward`` and its stderr.

    Mean rewards ``r(c, A)`` are used unless ``realized`` is set.
    """
    b = as_batch(runs)
    mean, se = _cummean(b.reward if realized else b.mean_reward)
    tau = np.arange(1, b.T + 1)
    return tau * opt_per_round - mean, se


def violation_curve(runs: Runs, use_means: bool = False) -> np.ndarray:
    """``sum_k max(0, mean over runs of cumulative cost_k)``."""
    b = as_batch(runs)
    cum = np.cumsum(b.mean_cost if use_means else b.cost, axis=1).mean(axis=0)
    return np.maximum(cum, 0.0).sum(axis=1)


def pathwise_violation_freq(runs: Runs, k: int) -> np.ndarray:
    """Fraction of runs whose realized cumulative cost ``k`` is > 0 at each round."""
    b = as_batch(runs)
    if not 0 <= k < b.K:
        raise MetricsError(f"constraint index {k} outside [0, {b.K})")
    return (np.cumsum(b.cost[:, :, k], axis=1) > 0).mean(axis=0)


def queue_at(runs: Runs) -> np.ndarray:
    """``Q(s)`` for ``s = 1 .. T + 1`` with shape (n, T + 1, K); ``Q(1) = 0``."""
    b = as_batch(runs)
    return np.concatenate([np.zeros((b.n, 1, b.K)), b.q], axis=1)


def queue_stats(runs: Runs, t_min: int) -> np.ndarray:
    """Per-constraint ``max over runs and s >= t_min of Q(s) / sqrt(s)``."""
    b = as_batch(runs)
    if t_min < 1 or t_min > b.T + 1:
        raise MetricsError(f"t_min={t_min} outside [1, {b.T + 1}]")
    Q = queue_at(b)[:, t_min - 1:, :]
    s = np.arange(t_min, b.T + 2)
    return (Q / np.sqrt(s)[None, :, None]).max(axis=(0, 1))


def loglog_slope(curve, t_range: tuple[int, int]) -> float:
    """Least-squares slope of ``log curve[tau]`` against ``log tau``.

    ``curve[tau - 1]`` is the value at round ``tau``; every integer round in
    the inclusive range enters the fit.
    """
    lo, hi = t_range
    y = np.asarray(curve, dtype=float)[lo - 1:hi]
    if lo < 1 or hi > len(curve) or hi <= lo:
        raise MetricsError(f"bad range {t_range} for a curve of length {len(curve)}")
    if np.any(y <= 0):
        raise MetricsError("nonpositive values: log-log slope undefined")
    x = np.log(np.arange(lo, hi + 1, dtype=float))
    return float(np.polyfit(x, np.log(y), 1)[0])


def first_zero_violation_round(violation: np.ndarray) -> int | None:
    """Smallest ``tau_hat`` with ``violation[tau] == 0`` for every ``tau >= tau_hat``."""
    bad = np.flatnonzero(violation > 0)
    if bad.size == 0:
        return 1
    last = int(bad[-1]) + 1  # 1-based round of the last violation
    return last + 1 if last < violation.size else None


@dataclass
class AggregateCurves:
    n_runs: int
    regret: np.ndarray
    regret_stderr: np.ndarray
    violation: np.ndarray
    pathwise_violation_freq: np.ndarray  # (K, T)
    queue_over_sqrt_t: np.ndarray  # (K,)

    def summary(self, t_min: int = 1) -> dict:
        T = self.regret.size
        pos = np.maximum(self.regret, 0)
        out = {
            "n_runs": self.n_runs,
            "T": T,
            "final_regret": float(self.regret[-1]),
            "final_regret_stderr": float(self.regret_stderr[-1]),
            "final_violation": float(self.violation[-1]),
            "zero_violation_from": first_zero_violation_round(self.violation),
            "final_violation_freq": [float(f[-1]) for f in self.pathwise_violation_freq],
            "queue_over_sqrt_t": [float(v) for v in self.queue_over_sqrt_t],
            "queue_t_min": t_min,
        }
        lo = min(1000, max(1, T // 100))
        if T > lo and np.all(pos[lo - 1:] > 0):
            out["regret_loglog_slope"] = loglog_slope(pos, (lo, T))
            out["slope_range"] = [lo, T]
        return out


def aggregate(runs: Runs, opt_per_round: float, t_min: int = 1, realized: bool = False) -> AggregateCurves:
    b = as_batch(runs)
    reg, se = regret_curve(b, opt_per_round, realized=realized)
    return AggregateCurves(
        n_runs=b.n,
        regret=reg,
        regret_stderr=se,
        violation=violation_curve(b),
        pathwise_violation_freq=np.stack([pathwise_violation_freq(b, k) for k in range(b.K)]),
        queue_over_sqrt_t=queue_stats(b, t_min),
    )
