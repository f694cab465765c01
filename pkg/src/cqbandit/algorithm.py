"""Pessimistic-optimistic policy, its linear-cost variant, and comparators.

Two execution paths share the same arithmetic:

* :func:`step` / :func:`step_linear_cost` advance one replication by one round
  and mirror the algorithm box line by line;
* :func:`simulate` advances many replications in lockstep with batched numpy
  operations and is what experiments use.

Both read their randomness from :mod:`cqbandit.rng` streams addressed by
``(seed, purpose, round)``, so a replication's trajectory does not depend on
which path produced it or on how many other replications ran alongside it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import confidence as conf
from .dual import QueueVector, Schedule, dual_update, epsilon_t, v_t
from .instances import (
    Instance,
    LinearCost,
    Observation,
    context_from_uniform,
    realize_linear_cost,
    realize_reward,
    reward_from_uniform,
)
from .oracle import require_optimal, solve_baseline
from .rng import BLOCK, Purpose, RoundStreams, batch_block

POLICIES = ("pessimistic-optimistic", "linucb-unconstrained", "oracle-lp", "uniform")
LEARNING_POLICIES = ("pessimistic-optimistic", "linucb-unconstrained")


class PolicyError(ValueError):
    pass


def default_p(T: int) -> float:
    return 1.0 / T


def pseudo_values(r_hat, cost_est, q, v: float) -> np.ndarray:
    """``r_hat[j] - (1/v) * sum_k cost_est[k][j] * q[k]``."""
    if v <= 0:
        raise ValueError("V_t must be positive")
    q = q.q if isinstance(q, QueueVector) else np.asarray(q, dtype=float)
    return np.asarray(r_hat, dtype=float) - (q @ np.asarray(cost_est, dtype=float)) / v


def select_action(values) -> int:
    """Index of the largest value; ties go to the smallest index."""
    return int(np.argmax(values))


@dataclass
class AlgState:
    ridge_reward: conf.RidgeState
    queues: QueueVector
    schedule: Schedule
    m: float
    p: float
    policy: str = "pessimistic-optimistic"
    ridge_cost: Optional[list[conf.RidgeState]] = None
    t: int = 0

    @classmethod
    def init(cls, instance: Instance, schedule: Schedule, policy: str = "pessimistic-optimistic", p: Optional[float] = None) -> "AlgState":
        if policy not in LEARNING_POLICIES:
            raise PolicyError(f"step() drives learning policies only, not {policy!r}")
        ridge_cost = None
        if instance.linear_cost:
            ridge_cost = [conf.ridge_init(instance.cost.psi.d) for _ in range(instance.K)]
        return cls(
            ridge_reward=conf.ridge_init(instance.d),
            queues=QueueVector.zeros(instance.K),
            schedule=schedule,
            m=instance.m,
            p=default_p(instance.T) if p is None else p,
            policy=policy,
            ridge_cost=ridge_cost,
        )


@dataclass(frozen=True)
class RoundRecord:
    t: int
    c: int
    action: int
    reward: float
    cost: np.ndarray  # realized costs of the chosen action, per k
    mean_reward: float
    mean_cost: np.ndarray
    q: np.ndarray  # queues after this round's update
    values: np.ndarray


def _optimistic_rewards(state: AlgState, phis: np.ndarray) -> np.ndarray:
    rad = conf.radius(state.ridge_reward.n_updates, phis.shape[1], state.m, state.p)
    return np.array([conf.optimistic_reward(state.ridge_reward, rad, x) for x in phis])


def step(state: AlgState, obs: Observation, instance: Instance, rng: RoundStreams):
    """One round of the main (costs-observed-first) algorithm."""
    if obs.cost_matrix is None:
        raise PolicyError("main setting needs the round's full cost matrix before acting")
    t = state.t + 1
    v, eps = float(v_t(state.schedule, t)), float(epsilon_t(state.schedule, t))
    phis = instance.features.phi[obs.c]
    r_hat = _optimistic_rewards(state, phis)
    if state.policy == "linucb-unconstrained":
        values = r_hat
    else:
        values = pseudo_values(r_hat, obs.cost_matrix, state.queues, v)
    j = select_action(values)
    chosen = obs.cost_matrix[:, j]
    queues = dual_update(state.queues, chosen, eps)
    R = realize_reward(instance, rng, t, obs.c, j)
    ridge = conf.rank_one_update(state.ridge_reward, phis[j], R)
    new = AlgState(ridge, queues, state.schedule, state.m, state.p, state.policy, None, t)
    record = RoundRecord(
        t, obs.c, j, R, chosen.copy(), float(instance.mean_rewards[obs.c, j]),
        instance.mean_costs[:, obs.c, j].copy(), queues.q.copy(), values,
    )
    return j, new, record


def step_linear_cost(state: AlgState, obs: Observation, instance: Instance, rng: RoundStreams):
    """One round of the variant whose costs are revealed after acting."""
    if not instance.linear_cost or state.ridge_cost is None:
        raise PolicyError("linear-cost step needs a linear cost model")
    t = state.t + 1
    v, eps = float(v_t(state.schedule, t)), float(epsilon_t(state.schedule, t))
    phis = instance.features.phi[obs.c]
    psis = instance.cost.psi.phi[obs.c]
    r_hat = _optimistic_rewards(state, phis)
    rad_w = conf.radius(state.ridge_cost[0].n_updates, psis.shape[1], 1.0, state.p)
    w_check = np.array([[conf.pessimistic_cost(rs, rad_w, x) for x in psis] for rs in state.ridge_cost])
    if state.policy == "linucb-unconstrained":
        values = r_hat
    else:
        values = pseudo_values(r_hat, w_check, state.queues, v)
    j = select_action(values)
    queues = dual_update(state.queues, w_check[:, j], eps)
    R = realize_reward(instance, rng, t, obs.c, j)
    W = realize_linear_cost(instance, rng, t, obs.c, j)
    ridge = conf.rank_one_update(state.ridge_reward, phis[j], R)
    ridge_cost = [conf.rank_one_update(rs, psis[j], W[k]) for k, rs in enumerate(state.ridge_cost)]
    new = AlgState(ridge, queues, state.schedule, state.m, state.p, state.policy, ridge_cost, t)
    record = RoundRecord(
        t, obs.c, j, R, np.asarray(W, dtype=float), float(instance.mean_rewards[obs.c, j]),
        instance.mean_costs[:, obs.c, j].copy(), queues.q.copy(), values,
    )
    return j, new, record


# -- trajectories -----------------------------------------------------------


@dataclass
class Trajectory:
    """Per-round record of one replication (arrays indexed by round - 1)."""

    context: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    cost: np.ndarray  # (T, K) realized cost of the chosen action
    mean_reward: np.ndarray
    mean_cost: np.ndarray  # (T, K)
    q: np.ndarray  # (T, K) queues after each round's update
    seed: int = 0
    policy: str = ""
    schedule: str = ""
    instance: str = ""
    trace: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return self.action.size

    @property
    def K(self) -> int:
        return self.cost.shape[1]


@dataclass
class TrajectoryBatch:
    """Replications stacked along a leading axis, ordered by seed list."""

    seeds: np.ndarray
    context: np.ndarray  # (n, T)
    action: np.ndarray
    reward: np.ndarray
    cost: np.ndarray  # (n, T, K)
    mean_reward: np.ndarray
    mean_cost: np.ndarray
    q: np.ndarray
    policy: str = ""
    schedule: str = ""
    instance: str = ""
    trace: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.seeds.size

    @property
    def T(self) -> int:
        return self.action.shape[1]

    @property
    def K(self) -> int:
        return self.cost.shape[2]

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> Trajectory:
        return Trajectory(
            self.context[i], self.action[i], self.reward[i], self.cost[i], self.mean_reward[i],
            self.mean_cost[i], self.q[i], int(self.seeds[i]), self.policy, self.schedule, self.instance,
            {k: v[i] for k, v in self.trace.items()},
        )

    @classmethod
    def stack(cls, runs: Sequence["Trajectory | TrajectoryBatch"]) -> "TrajectoryBatch":
        parts = [r if isinstance(r, TrajectoryBatch) else _as_batch(r) for r in runs]
        if not parts:
            raise ValueError("no trajectories to stack")
        first = parts[0]
        for p in parts[1:]:
            if (p.instance, p.T, p.K) != (first.instance, first.T, first.K):
                raise ValueError("mismatched runs: trajectories come from different instances or horizons")
        cat = lambda name: np.concatenate([getattr(p, name) for p in parts])
        trace_keys = set.intersection(*(set(p.trace) for p in parts)) if parts else set()
        return cls(
            cat("seeds"), cat("context"), cat("action"), cat("reward"), cat("cost"), cat("mean_reward"),
            cat("mean_cost"), cat("q"), first.policy, first.schedule, first.instance,
            {k: np.concatenate([p.trace[k] for p in parts]) for k in sorted(trace_keys)},
        )


def _as_batch(tr: Trajectory) -> TrajectoryBatch:
    return TrajectoryBatch(
        np.array([tr.seed]), tr.context[None], tr.action[None], tr.reward[None], tr.cost[None],
        tr.mean_reward[None], tr.mean_cost[None], tr.q[None], tr.policy, tr.schedule, tr.instance,
        {k: v[None] for k, v in tr.trace.items()},
    )


def run_stepwise(instance: Instance, schedule: Schedule, seed: int, policy: str = "pessimistic-optimistic", p: Optional[float] = None) -> Trajectory:
    """Reference loop over :func:`step`; slow, used to cross-check :func:`simulate`."""
    from .instances import sample_round

    state = AlgState.init(instance, schedule, policy, p)
    rng = instance.streams(seed)
    stepper = step_linear_cost if instance.linear_cost else step
    recs = []
    for t in range(1, instance.T + 1):
        _, state, rec = stepper(state, sample_round(instance, rng, t), instance, rng)
        recs.append(rec)
    return Trajectory(
        np.array([r.c for r in recs]), np.array([r.action for r in recs]), np.array([r.reward for r in recs]),
        np.array([r.cost for r in recs]), np.array([r.mean_reward for r in recs]),
        np.array([r.mean_cost for r in recs]), np.array([r.q for r in recs]), seed, policy, schedule.kind, instance.name,
    )


# -- batched simulation -----------------------------------------------------


def simulate(
    instance: Instance,
    policy: str,
    schedule: Schedule,
    seeds: Sequence[int],
    p: Optional[float] = None,
    trace: bool = False,
) -> TrajectoryBatch:
    """Run ``len(seeds)`` independent replications for ``instance.T`` rounds.

    ``trace=True`` additionally records, per round, the confidence radius,
    ``||theta_star - theta_hat||_Sigma`` and whether the reward ellipsoid
    covers ``theta_star`` (and for linear costs, cost-ellipsoid coverage and
    whether every pessimistic estimate lies below its true mean).
    """
    if policy not in POLICIES:
        raise PolicyError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    seeds = np.asarray(seeds, dtype=np.int64).reshape(-1)
    n, T, K, J, d = seeds.size, instance.T, instance.K, instance.J, instance.d
    p = default_p(T) if p is None else p
    if not 0 < p <= 1:
        raise ValueError("confidence parameter p must lie in (0, 1]")
    linear = isinstance(instance.cost, LinearCost)
    phi = instance.features.phi
    r_mean = instance.mean_rewards
    w_mean = instance.mean_costs
    rows = np.arange(n)

    x_star = None
    if policy == "oracle-lp":
        x_star = np.cumsum(require_optimal(solve_baseline(instance)).x, axis=1)

    learning = policy in LEARNING_POLICIES
    ridge = conf.RidgeBatch.init(n, d) if learning else None
    if linear:
        psi = instance.cost.psi.phi
        ridge_w = [conf.RidgeBatch.init(n, psi.shape[2]) for _ in range(K)] if learning else None
    q = np.zeros((n, K))

    out = {
        "context": np.empty((n, T), dtype=np.int64),
        "action": np.empty((n, T), dtype=np.int64),
        "reward": np.empty((n, T)),
        "cost": np.empty((n, T, K)),
        "mean_reward": np.empty((n, T)),
        "mean_cost": np.empty((n, T, K)),
        "q": np.empty((n, T, K)),
    }
    tr = {}
    if trace and learning:
        tr = {"beta_sqrt": np.empty((n, T)), "theta_err": np.empty((n, T)), "covered": np.empty((n, T), dtype=bool)}
        if linear:
            tr.update({"cost_covered": np.empty((n, T), dtype=bool), "cost_under": np.empty((n, T), dtype=bool)})

    widths = instance.stream_widths()
    theta_star = instance.reward.theta_star
    for t in range(1, T + 1):
        i = (t - 1) % BLOCK
        if i == 0:
            b = (t - 1) // BLOCK
            ctx_blk = context_from_uniform(instance.contexts.p, batch_block(seeds, Purpose.CONTEXT, b, 1)[:, :, 0])
            rew_u = batch_block(seeds, Purpose.REWARD, b, 1)[:, :, 0]
            pol_u = batch_block(seeds, Purpose.POLICY, b, 1)[:, :, 0]
            if linear:
                noise_u = batch_block(seeds, Purpose.COST_NOISE, b, widths[Purpose.COST_NOISE])
            else:
                cu = batch_block(seeds, Purpose.COST, b, widths[Purpose.COST]).reshape(n, BLOCK, K, J)
                cost = instance.cost
                cidx = ctx_blk  # (n, BLOCK)
                prob = np.moveaxis(cost.prob[:, cidx, :], 0, 2)  # (n, BLOCK, K, J)
                W_blk = np.where(cu < prob, np.moveaxis(cost.high[:, cidx, :], 0, 2), np.moveaxis(cost.low[:, cidx, :], 0, 2))
        c = ctx_blk[:, i]
        v = float(v_t(schedule, t))
        eps = float(epsilon_t(schedule, t))

        if learning:
            Phi = phi[c]  # (n, J, d)
            beta = conf.radius(ridge.n_updates, d, instance.m, p).beta_sqrt
            r_hat = np.minimum(1.0, ridge.means(Phi) + beta * ridge.widths(Phi))
            if linear:
                Psi = psi[c]
                beta_w = conf.radius(ridge_w[0].n_updates, Psi.shape[2], 1.0, p).beta_sqrt
                width_w = ridge_w[0].widths(Psi)
                W_est = np.stack([np.clip(rw.means(Psi) - beta_w * width_w, -1.0, 1.0) for rw in ridge_w], axis=1)
            else:
                W_est = W_blk[:, i]  # (n, K, J) observed before acting
            if policy == "linucb-unconstrained":
                values = r_hat
            else:
                values = r_hat - np.einsum("nk,nkj->nj", q, W_est) / v
            a = np.argmax(values, axis=1)
            if tr:
                tr["beta_sqrt"][:, t - 1] = beta
                err = ridge.sigma_norm(theta_star)
                tr["theta_err"][:, t - 1] = err
                tr["covered"][:, t - 1] = err <= beta
                if linear:
                    cov = np.ones(n, dtype=bool)
                    for k, rw in enumerate(ridge_w):
                        cov &= rw.sigma_norm(instance.cost.mu_star[k]) <= beta_w
                    tr["cost_covered"][:, t - 1] = cov
                    tr["cost_under"][:, t - 1] = np.all(W_est <= w_mean[:, c, :].transpose(1, 0, 2) + 1e-12, axis=(1, 2))
        elif policy == "uniform":
            a = np.minimum((pol_u[:, i] * J).astype(np.int64), J - 1)
        else:
            a = np.minimum((pol_u[:, i][:, None] >= x_star[c]).sum(axis=1), J - 1)

        mr = r_mean[c, a]
        R = reward_from_uniform(mr, rew_u[:, i], instance.reward.noise, instance.reward.sigma)
        mc = w_mean[:, c, a].T  # (n, K)
        if linear:
            Wr = instance.cost.realize_chosen(mc, noise_u[:, i])
            q_in = W_est[rows, :, a] if learning else Wr
        else:
            Wr = W_blk[rows, i, :, a]
            q_in = Wr
        q = np.maximum(0.0, q + q_in + eps)

        if learning:
            ridge.update(Phi[rows, a], R)
            if linear:
                x = Psi[rows, a]
                for k, rw in enumerate(ridge_w):
                    rw.update(x, Wr[:, k])

        out["context"][:, t - 1] = c
        out["action"][:, t - 1] = a
        out["reward"][:, t - 1] = R
        out["cost"][:, t - 1] = Wr
        out["mean_reward"][:, t - 1] = mr
        out["mean_cost"][:, t - 1] = mc
        out["q"][:, t - 1] = q

    return TrajectoryBatch(seeds, **out, policy=policy, schedule=schedule.kind, instance=instance.name, trace=tr)


def run(instance: Instance, policy: str, schedule: Schedule, seed: int, p: Optional[float] = None, trace: bool = False) -> Trajectory:
    return simulate(instance, policy, schedule, [seed], p=p, trace=trace)[0]
