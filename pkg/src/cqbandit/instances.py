"""Problem instances: contexts, feature maps, reward and cost models, sampling.

All cost models are written in the "cumulative cost must stay <= 0" form.
Experiment-style thresholds (a per-round budget, ward allotments) are folded
into the cost by subtracting the threshold from the raw consumption.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import ndtri

from .rng import Purpose, RoundStreams

TOL = 1e-12

# smallest gap from 0 and 1 used when mapping uniforms through ndtri
_HALF_ULP = 2.0**-54


class InstanceError(ValueError):
    """Raised when an instance violates a modelling invariant."""


@dataclass(frozen=True)
class ContextDistribution:
    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).reshape(-1)
        if p.size == 0:
            raise InstanceError("context distribution is empty")
        if np.any(p < 0) or abs(p.sum() - 1.0) > TOL:
            raise InstanceError(f"context probabilities must be >= 0 and sum to 1, got {p}")
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.p.size


@dataclass(frozen=True)
class FeatureMap:
    """Dense table ``phi[c, j]`` of vectors in R^d with Euclidean norm <= 1."""

    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim != 3:
            raise InstanceError(f"feature table must have shape (C, J, d), got {phi.shape}")
        if not np.all(np.isfinite(phi)):
            raise InstanceError("feature table has non-finite entries")
        norms = np.linalg.norm(phi, axis=2)
        if np.any(norms > 1.0 + TOL):
            c, j = np.unravel_index(np.argmax(norms), norms.shape)
            raise InstanceError(f"feature norm {norms[c, j]:.6g} > 1 at (c={c}, j={j})")
        object.__setattr__(self, "phi", phi)

    @property
    def d(self) -> int:
        return self.phi.shape[2]

    @classmethod
    def onehot(cls, n_contexts: int, n_actions: int) -> "FeatureMap":
        phi = np.zeros((n_contexts, n_actions, n_actions))
        phi[:, np.arange(n_actions), np.arange(n_actions)] = 1.0
        return cls(phi)


@dataclass(frozen=True)
class RewardModel:
    """``R = <theta_star, phi> + noise`` with a 1-sub-Gaussian noise family.

    ``noise="gaussian"`` adds ``sigma * N(0, 1)`` (sigma <= 1).  ``"bernoulli"``
    returns a {0, 1} draw with the mean reward as success probability.
    """

    theta_star: np.ndarray
    m: Optional[float] = None
    noise: str = "bernoulli"
    sigma: float = 1.0

    def __post_init__(self):
        theta = np.asarray(self.theta_star, dtype=float).reshape(-1)
        object.__setattr__(self, "theta_star", theta)
        m = float(np.linalg.norm(theta)) if self.m is None else float(self.m)
        if m < 0 or np.linalg.norm(theta) > m + TOL:
            raise InstanceError(f"||theta_star|| = {np.linalg.norm(theta):.6g} exceeds m = {m}")
        object.__setattr__(self, "m", m)
        if self.noise not in ("gaussian", "bernoulli"):
            raise InstanceError(f"unknown reward noise {self.noise!r}")
        if self.noise == "gaussian" and not 0.0 <= self.sigma <= 1.0:
            raise InstanceError("gaussian reward noise needs 0 <= sigma <= 1")


@dataclass(frozen=True)
class TabularCost:
    """Two-point cost distributions, one per ``(k, c, j)``.

    ``W = high`` with probability ``prob`` and ``low`` otherwise.  A
    deterministic cost has ``low == high``; a shifted Bernoulli ``B - s`` has
    ``low = -s`` and ``high = 1 - s``.
    """

    low: np.ndarray
    high: np.ndarray
    prob: np.ndarray
    variant: str = field(default="tabular", init=False)

    def __post_init__(self):
        low, high, prob = (np.asarray(a, dtype=float) for a in (self.low, self.high, self.prob))
        if not (low.shape == high.shape == prob.shape) or low.ndim != 3:
            raise InstanceError("tabular cost arrays must share shape (K, C, J)")
        if np.any(np.abs(low) > 1 + TOL) or np.any(np.abs(high) > 1 + TOL):
            raise InstanceError("tabular cost support must lie in [-1, 1]")
        if np.any(prob < 0) or np.any(prob > 1):
            raise InstanceError("tabular cost probabilities must lie in [0, 1]")
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)
        object.__setattr__(self, "prob", prob)

    @classmethod
    def deterministic(cls, means) -> "TabularCost":
        means = np.asarray(means, dtype=float)
        return cls(means, means.copy(), np.zeros_like(means))

    @classmethod
    def shifted_bernoulli(cls, prob, shift) -> "TabularCost":
        prob = np.asarray(prob, dtype=float)
        shift = np.broadcast_to(np.asarray(shift, dtype=float), prob.shape)
        return cls(-shift, 1.0 - shift, prob)

    @property
    def K(self) -> int:
        return self.low.shape[0]

    @property
    def means(self) -> np.ndarray:
        return self.low + (self.high - self.low) * self.prob

    def realize(self, c, u: np.ndarray) -> np.ndarray:
        """Realized ``K x J`` cost matrix for context ``c`` from uniforms ``u``."""
        u = u.reshape(self.K, -1)
        return np.where(u < self.prob[:, c, :], self.high[:, c, :], self.low[:, c, :])


@dataclass(frozen=True)
class LinearCost:
    """Costs ``w_k(c, j) = <mu_star[k], psi(c, j)>`` revealed only after acting."""

    mu_star: np.ndarray
    psi: FeatureMap
    noise: str = "gaussian"
    sigma: float = 1.0
    variant: str = field(default="linear", init=False)

    def __post_init__(self):
        mu = np.atleast_2d(np.asarray(self.mu_star, dtype=float))
        if mu.shape[1] != self.psi.d:
            raise InstanceError("mu_star and psi dimensions differ")
        if np.any(np.linalg.norm(mu, axis=1) > 1 + TOL):
            raise InstanceError("||mu_star|| must be <= 1")
        if self.noise not in ("gaussian", "bernoulli"):
            raise InstanceError(f"unknown cost noise {self.noise!r}")
        if self.noise == "gaussian" and not 0.0 <= self.sigma <= 1.0:
            raise InstanceError("gaussian cost noise needs 0 <= sigma <= 1")
        object.__setattr__(self, "mu_star", mu)
        if np.any(np.abs(self.means) > 1 + TOL):
            raise InstanceError("linear mean costs must lie in [-1, 1]")

    @property
    def K(self) -> int:
        return self.mu_star.shape[0]

    @property
    def means(self) -> np.ndarray:
        return np.einsum("kd,cjd->kcj", self.mu_star, self.psi.phi)

    def realize_chosen(self, mean: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Noisy costs of the chosen action given its mean vector and uniforms."""
        if self.noise == "gaussian":
            return mean + self.sigma * ndtri(np.clip(u, _HALF_ULP, 1 - _HALF_ULP))
        # {-1, +1} draw with the right mean
        return np.where(u < (1.0 + mean) / 2.0, 1.0, -1.0)


CostModel = Union[TabularCost, LinearCost]


@dataclass(frozen=True)
class Observation:
    """What the learner sees before acting in round ``t``.

    In the tabular setting the whole ``K x J`` matrix of this round's costs is
    revealed up front; in the linear-cost setting ``cost_matrix`` is ``None``.
    """

    t: int
    c: int
    cost_matrix: Optional[np.ndarray]


@dataclass(frozen=True)
class Instance:
    contexts: ContextDistribution
    features: FeatureMap
    reward: RewardModel
    cost: CostModel
    T: int
    delta: Optional[float] = None
    name: str = "custom"

    def __post_init__(self):
        C, J, d = self.features.phi.shape
        if self.contexts.n != C:
            raise InstanceError(f"{self.contexts.n} context probabilities for {C} feature rows")
        if self.reward.theta_star.size != d:
            raise InstanceError(f"theta_star has dimension {self.reward.theta_star.size}, features have {d}")
        if isinstance(self.cost, TabularCost):
            if self.cost.low.shape[1:] != (C, J):
                raise InstanceError("cost table shape does not match (C, J)")
        else:
            if self.cost.psi.phi.shape[:2] != (C, J):
                raise InstanceError("cost feature table shape does not match (C, J)")
        if self.T < 1:
            raise InstanceError("horizon T must be >= 1")
        if self.delta is not None and not 0.0 < self.delta <= 1.0:
            raise InstanceError(f"delta must lie in (0, 1], got {self.delta}")
        r = self.mean_rewards
        if np.any(r < -TOL) or np.any(r > 1 + TOL):
            c, j = np.unravel_index(np.argmax(np.maximum(-r, r - 1)), r.shape)
            raise InstanceError(f"mean reward {r[c, j]:.6g} outside [0, 1] at (c={c}, j={j})")

    @property
    def n_contexts(self) -> int:
        return self.contexts.n

    @property
    def J(self) -> int:
        return self.features.phi.shape[1]

    @property
    def d(self) -> int:
        return self.features.d

    @property
    def K(self) -> int:
        return self.cost.K

    @property
    def m(self) -> float:
        return self.reward.m

    @property
    def linear_cost(self) -> bool:
        return isinstance(self.cost, LinearCost)

    @property
    def mean_rewards(self) -> np.ndarray:
        """``r[c, j]`` for every context and action."""
        return self.features.phi @ self.reward.theta_star

    @property
    def mean_costs(self) -> np.ndarray:
        """``w[k, c, j]``."""
        return self.cost.means

    def stream_widths(self) -> dict[Purpose, int]:
        widths = {Purpose.CONTEXT: 1, Purpose.REWARD: 1, Purpose.POLICY: 1}
        if self.linear_cost:
            widths[Purpose.COST_NOISE] = self.K
        else:
            widths[Purpose.COST] = self.K * self.J
        return widths

    def streams(self, seed: int) -> RoundStreams:
        return RoundStreams(seed, self.stream_widths())

    def with_delta(self, delta: Optional[float]) -> "Instance":
        return Instance(self.contexts, self.features, self.reward, self.cost, self.T, delta, self.name)

    def with_horizon(self, T: int) -> "Instance":
        return Instance(self.contexts, self.features, self.reward, self.cost, T, self.delta, self.name)


def context_from_uniform(p: np.ndarray, u):
    """Inverse-CDF context draw; works elementwise on arrays."""
    cdf = np.cumsum(p)
    return np.minimum(np.searchsorted(cdf, u, side="right"), p.size - 1)


def sample_round(instance: Instance, rng: RoundStreams, t: int) -> Observation:
    if not 1 <= t <= instance.T:
        raise ValueError(f"round {t} outside [1, {instance.T}]")
    c = int(context_from_uniform(instance.contexts.p, rng.row(Purpose.CONTEXT, t)[0]))
    if instance.linear_cost:
        return Observation(t, c, None)
    return Observation(t, c, instance.cost.realize(c, rng.row(Purpose.COST, t)))


def reward_from_uniform(mean, u, noise: str, sigma: float):
    if noise == "bernoulli":
        return (u < mean).astype(float) if isinstance(u, np.ndarray) else float(u < mean)
    return mean + sigma * ndtri(np.clip(u, _HALF_ULP, 1 - _HALF_ULP))


def realize_reward(instance: Instance, rng: RoundStreams, t: int, c: int, j: int) -> float:
    u = rng.row(Purpose.REWARD, t)[0]
    return float(reward_from_uniform(mean_reward(instance, c, j), u, instance.reward.noise, instance.reward.sigma))


def realize_linear_cost(instance: Instance, rng: RoundStreams, t: int, c: int, j: int) -> np.ndarray:
    """Post-action cost vector in the linear-cost setting."""
    mean = instance.mean_costs[:, c, j]
    return instance.cost.realize_chosen(mean, rng.row(Purpose.COST_NOISE, t))


def mean_reward(instance: Instance, c: int, j: int) -> float:
    return float(instance.reward.theta_star @ instance.features.phi[c, j])


def mean_cost(instance: Instance, c: int, j: int, k: int) -> float:
    cost = instance.cost
    if isinstance(cost, LinearCost):
        return float(cost.mu_star[k] @ cost.psi.phi[c, j])
    return float(cost.means[k, c, j])


def _auto_delta(instance: Instance, delta: Optional[float]) -> Instance:
    if delta is not None:
        return instance.with_delta(delta)
    from .oracle import slater_margin

    margin = slater_margin(instance)
    return instance.with_delta(margin if margin > 0 else None)


def mab_instance(
    r_bar: Sequence[float],
    c_bar: Sequence[float],
    budget: float,
    T: int = 10_000,
    delta: Optional[float] = None,
) -> Instance:
    """Single-context Bernoulli bandit with one budget constraint.

    Arm ``j`` is embedded as the unit vector ``e_j`` and its cost is
    ``Bernoulli(c_bar[j]) - budget``, so "average cost per round <= budget"
    becomes "cumulative recentred cost <= 0".
    """
    r_bar = np.asarray(r_bar, dtype=float)
    c_bar = np.asarray(c_bar, dtype=float)
    if r_bar.shape != c_bar.shape or r_bar.ndim != 1:
        raise InstanceError("r_bar and c_bar must be vectors of equal length")
    if np.any(r_bar < 0) or np.any(r_bar > 1):
        raise InstanceError("mean rewards must lie in [0, 1]")
    if np.any(c_bar < 0) or np.any(c_bar > 1) or budget < 0 or budget > 1:
        raise InstanceError("Bernoulli cost means and budget must lie in [0, 1]")
    J = r_bar.size
    inst = Instance(
        contexts=ContextDistribution(np.ones(1)),
        features=FeatureMap.onehot(1, J),
        reward=RewardModel(r_bar, noise="bernoulli"),
        cost=TabularCost.shifted_bernoulli(c_bar.reshape(1, 1, J), budget),
        T=T,
        name="mab",
    )
    return _auto_delta(inst, delta)


MAB_DEFAULTS = dict(r_bar=(0.1, 0.2, 0.4, 0.7), c_bar=(0.0, 0.4, 0.5, 0.2), budget=0.5)

WARD_CAPACITY = (0.2, 0.2, 0.175, 0.175, 0.175, 0.175)
WARD_FAIRNESS = (0.175, 0.175, 0.15, 0.15, 0.125, 0.125)
WARD_RESOURCE = (0.1875,) * 6


def ward_costs(vectors: Sequence[Sequence[float]]) -> np.ndarray:
    """Mean cost ``1 - J * v[k][j]`` of sending one patient to ward ``j``.

    Each patient consumes one unit; ward ``j``'s per-patient allotment for
    constraint type ``k`` is its normalised share ``v[k][j]`` scaled by the
    number of wards.
    """
    v = np.asarray(vectors, dtype=float)
    return 1.0 - v.shape[1] * v


def ward_instance(
    capacity: Sequence[float] = WARD_CAPACITY,
    fairness: Sequence[float] = WARD_FAIRNESS,
    resource: Sequence[float] = WARD_RESOURCE,
    seed: int = 0,
    n_contexts: int = 8,
    d: int = 6,
    cost_jitter: float = 0.25,
    T: int = 10_000,
    delta: Optional[float] = None,
) -> Instance:
    """Synthetic inpatient-routing instance with K=3 cost types and J=6 wards.

    Costs follow :func:`ward_costs`; with ``cost_jitter > 0`` each realized
    cost is its mean plus or minus ``cost_jitter`` with equal probability.
    Patient types and the reward parameter are drawn from ``seed``; the
    reward parameter is redrawn until every mean reward lies in [0, 1].
    """
    vecs = [np.asarray(v, dtype=float) for v in (capacity, fairness, resource)]
    if any(v.shape != (6,) for v in vecs):
        raise InstanceError("ward vectors must each have 6 entries")
    if d < 2 or n_contexts < 1:
        raise InstanceError("ward instance needs d >= 2 and at least one context")
    J = 6
    means = ward_costs(vecs)
    if cost_jitter < 0 or np.any(np.abs(means) + cost_jitter > 1):
        raise InstanceError("cost jitter pushes ward costs outside [-1, 1]")
    gen = np.random.default_rng(seed)
    # phi(c, j) = (1, u_cj) / sqrt(2) with u_cj on the unit sphere
    u = gen.standard_normal((n_contexts, J, d - 1))
    u /= np.linalg.norm(u, axis=2, keepdims=True)
    phi = np.concatenate([np.ones((n_contexts, J, 1)), u], axis=2) / np.sqrt(2.0)
    for _ in range(10_000):
        theta = np.concatenate([[0.7], 0.3 * gen.standard_normal(d - 1)])
        r = phi @ theta
        if np.all(r >= 0) and np.all(r <= 1):
            break
    else:  # pragma: no cover - acceptance probability is far from zero
        raise InstanceError("could not sample a reward parameter with means in [0, 1]")
    table = np.broadcast_to(means[:, None, :], (3, n_contexts, J))
    cost = TabularCost(table - cost_jitter, table + cost_jitter, np.full(table.shape, 0.5))
    inst = Instance(
        contexts=ContextDistribution(np.full(n_contexts, 1.0 / n_contexts)),
        features=FeatureMap(phi),
        reward=RewardModel(theta, noise="bernoulli"),
        cost=cost,
        T=T,
        name="ward",
    )
    return _auto_delta(inst, delta)


def random_linear_instance(
    seed: int,
    d: int = 4,
    J: int = 4,
    n_contexts: int = 5,
    K: int = 1,
    T: int = 1000,
    linear_cost: bool = False,
    reward_noise: str = "gaussian",
    sigma: float = 1.0,
    delta: Optional[float] = None,
) -> Instance:
    """Random instance with ``r = (1 + <g, u>) / 2``-style features.

    Features are ``phi = (1, u) / sqrt(2)`` with ``u`` on the unit sphere and
    ``theta_star = (1/sqrt(2), g / sqrt(2))`` with ``||g|| <= 1``, so every
    mean reward lies in [0, 1].  Costs are either tabular deterministic means
    in [-1, 0.5] or linear in a second random feature table.
    """
    gen = np.random.default_rng(seed)

    def sphere(shape):
        x = gen.standard_normal(shape)
        return x / np.linalg.norm(x, axis=-1, keepdims=True)

    phi = np.concatenate([np.ones((n_contexts, J, 1)), sphere((n_contexts, J, d - 1))], axis=2) / np.sqrt(2)
    g = sphere(d - 1) * gen.uniform(0.3, 1.0)
    theta = np.concatenate([[1.0], g]) / np.sqrt(2)
    if linear_cost:
        psi = FeatureMap(sphere((n_contexts, J, d)) * gen.uniform(0.5, 1.0, (n_contexts, J, 1)))
        mu = sphere((K, d)) * 0.8
        cost: CostModel = LinearCost(mu, psi, noise="gaussian", sigma=sigma)
    else:
        cost = TabularCost.deterministic(gen.uniform(-1.0, 0.5, (K, n_contexts, J)))
    inst = Instance(
        contexts=ContextDistribution(np.full(n_contexts, 1.0 / n_contexts)),
        features=FeatureMap(phi),
        reward=RewardModel(theta, noise=reward_noise, sigma=sigma),
        cost=cost,
        T=T,
        name=f"random-linear-{seed}",
    )
    return _auto_delta(inst, delta)
