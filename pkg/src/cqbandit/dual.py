"""Virtual queues and the V_t / epsilon_t schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

SCHEDULE_KINDS = ("theory-main", "theory-linear-cost", "experiment-mab", "experiment-ward", "custom")


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class Schedule:
    """A named (V_t, epsilon_t) pair.

    ``delta``, ``K``, ``d`` and ``T`` are only read by the kinds that need
    them; ``custom`` takes two callables of the round index.
    """

    kind: str
    delta: Optional[float] = None
    K: int = 1
    d: int = 1
    T: int = 1
    v_fn: Optional[Callable[[int], float]] = None
    eps_fn: Optional[Callable[[int], float]] = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ScheduleError(f"unknown schedule {self.kind!r}; expected one of {SCHEDULE_KINDS}")
        if self.kind.startswith("theory") and (self.delta is None or not 0.0 < self.delta <= 1.0):
            raise ScheduleError(f"schedule {self.kind} needs delta in (0, 1], got {self.delta}")
        if self.kind == "custom" and (self.v_fn is None or self.eps_fn is None):
            raise ScheduleError("custom schedule needs v_fn and eps_fn")
        if self.K < 1 or self.d < 1 or self.T < 1:
            raise ScheduleError("K, d and T must be positive")

    @classmethod
    def for_instance(cls, kind: str, instance, delta: Optional[float] = None) -> "Schedule":
        return cls(kind, instance.delta if delta is None else delta, instance.K, instance.d, instance.T)


def v_t(schedule: Schedule, t) -> float:
    """Scaling V_t; accepts a scalar round index or an array of them."""
    s, k = schedule, schedule.kind
    if k == "theory-main":
        return s.delta * s.K**0.25 * np.sqrt(2.0 * t / 3.0)
    if k == "theory-linear-cost":
        return s.delta * s.d * np.sqrt(t) * math.log(1 + s.T) / 4.0
    if k == "experiment-mab":
        return np.sqrt(t)
    if k == "experiment-ward":
        return 4.0 * np.sqrt(t)
    return s.v_fn(t)


def epsilon_t(schedule: Schedule, t) -> float:
    """Tightness epsilon_t; accepts a scalar round index or an array of them."""
    s, k = schedule, schedule.kind
    if k == "theory-main":
        return s.K**0.75 * np.sqrt(6.0 / t)
    if k == "theory-linear-cost":
        return 4.0 * s.d * math.log(1 + s.T) / np.sqrt(t)
    if k == "experiment-mab":
        return 6.0 / np.sqrt(t)
    if k == "experiment-ward":
        return 1.0 / np.sqrt(t)
    return s.eps_fn(t)


def tau_prime(schedule: Schedule, delta: Optional[float] = None, t_max: int = 10**9) -> int:
    """Smallest round with ``epsilon_t <= delta / 2``.

    All built-in schedules have ``epsilon_t = a / sqrt(t)``; the candidate
    ``ceil((2a/delta)^2)`` is nudged by one in either direction to absorb
    floating-point error.
    """
    delta = schedule.delta if delta is None else delta
    if delta is None or delta <= 0:
        raise ScheduleError("tau' needs a positive delta")
    target = delta / 2.0
    a = epsilon_t(schedule, 1)
    t = max(1, math.ceil((a / target) ** 2))
    while t > 1 and epsilon_t(schedule, t - 1) <= target:
        t -= 1
    while epsilon_t(schedule, t) > target:
        t += 1
        if t > t_max:
            raise ScheduleError("epsilon_t never drops below delta/2")
    return t


@dataclass
class QueueVector:
    q: np.ndarray

    @classmethod
    def zeros(cls, K: int) -> "QueueVector":
        return cls(np.zeros(K))


def dual_update(q: QueueVector, chosen_costs, eps: float) -> QueueVector:
    """``Q_k <- max(0, Q_k + W_k + eps)`` for the costs of the action taken."""
    return QueueVector(np.maximum(0.0, q.q + np.asarray(chosen_costs, dtype=float) + eps))
