"""Ridge-regression state and confidence-ellipsoid queries.

The ellipsoid ``{theta : ||theta - theta_hat||_Sigma <= beta_sqrt}`` has the
closed-form extrema ``<theta_hat, x> +/- beta_sqrt * ||x||_{Sigma^-1}``, so
no inner optimisation is needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

REFACTOR_EVERY = 1024
DRIFT_REFACTOR = 1e-10
DRIFT_FAIL = 1e-8


class NumericalDegeneracy(ArithmeticError):
    pass


@dataclass
class RidgeState:
    sigma: np.ndarray
    sigma_inv: np.ndarray
    b: np.ndarray
    theta_hat: np.ndarray
    n_updates: int = 0

    @property
    def d(self) -> int:
        return self.b.size

    def copy(self) -> "RidgeState":
        return RidgeState(self.sigma.copy(), self.sigma_inv.copy(), self.b.copy(), self.theta_hat.copy(), self.n_updates)


@dataclass(frozen=True)
class Radius:
    beta_sqrt: float
    p: float


def ridge_init(d: int) -> RidgeState:
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return RidgeState(np.eye(d), np.eye(d), np.zeros(d), np.zeros(d), 0)


def inverse_drift(sigma: np.ndarray, sigma_inv: np.ndarray) -> float:
    return float(np.max(np.abs(sigma @ sigma_inv - np.eye(sigma.shape[-1]))))


def rank_one_update(state: RidgeState, phi, y: float) -> RidgeState:
    """Return the state after observing response ``y`` at feature ``phi``."""
    phi = np.asarray(phi, dtype=float)
    sigma = state.sigma + np.outer(phi, phi)
    u = state.sigma_inv @ phi
    sigma_inv = state.sigma_inv - np.outer(u, u) / (1.0 + phi @ u)
    n = state.n_updates + 1
    if n % REFACTOR_EVERY == 0:
        sigma_inv = _refactor(sigma, sigma_inv)
    b = state.b + y * phi
    return RidgeState(sigma, sigma_inv, b, sigma_inv @ b, n)


def _refactor(sigma: np.ndarray, sigma_inv: np.ndarray) -> np.ndarray:
    if inverse_drift(sigma, sigma_inv) <= DRIFT_REFACTOR:
        return sigma_inv
    fresh = np.linalg.inv(sigma)
    if inverse_drift(sigma, fresh) > DRIFT_FAIL:
        raise NumericalDegeneracy("covariance inverse drift persists after re-factorisation")
    return fresh


def radius(t: int, d: int, m: float, p: float) -> Radius:
    """Radius after ``t`` updates: ``m + sqrt(2 log(1/p) + d log((d + t) / d))``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    return Radius(m + np.sqrt(2.0 * np.log(1.0 / p) + d * np.log((d + t) / d)), p)


def ellipsoid_width(state: RidgeState, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sqrt(max(x @ state.sigma_inv @ x, 0.0)))


def optimistic_reward(state: RidgeState, rad: Radius, phi) -> float:
    """Upper end of the ellipsoid along ``phi``, clipped above at 1."""
    return min(1.0, float(state.theta_hat @ phi) + rad.beta_sqrt * ellipsoid_width(state, phi))


def pessimistic_cost(state: RidgeState, rad: Radius, psi) -> float:
    """Lower end of the ellipsoid along ``psi``, clipped to [-1, 1]."""
    return float(np.clip(float(state.theta_hat @ psi) - rad.beta_sqrt * ellipsoid_width(state, psi), -1.0, 1.0))


def contains(state: RidgeState, rad: Radius, theta) -> bool:
    diff = np.asarray(theta, dtype=float) - state.theta_hat
    return bool(np.sqrt(max(diff @ state.sigma @ diff, 0.0)) <= rad.beta_sqrt)


# -- batched counterparts, leading axis = replication -----------------------


@dataclass
class RidgeBatch:
    """``n`` independent ridge states advanced in lockstep."""

    sigma: np.ndarray  # (n, d, d)
    sigma_inv: np.ndarray  # (n, d, d)
    b: np.ndarray  # (n, d)
    theta_hat: np.ndarray  # (n, d)
    n_updates: int = 0
    _eye: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._eye = np.eye(self.b.shape[1])

    @classmethod
    def init(cls, n: int, d: int) -> "RidgeBatch":
        eye = np.broadcast_to(np.eye(d), (n, d, d))
        return cls(eye.copy(), eye.copy(), np.zeros((n, d)), np.zeros((n, d)))

    def widths(self, X: np.ndarray) -> np.ndarray:
        """``||x||_{Sigma^-1}`` for features ``X`` of shape (n, J, d)."""
        q = np.einsum("nja,nab,njb->nj", X, self.sigma_inv, X)
        return np.sqrt(np.maximum(q, 0.0))

    def means(self, X: np.ndarray) -> np.ndarray:
        return np.einsum("njd,nd->nj", X, self.theta_hat)

    def update(self, x: np.ndarray, y: np.ndarray) -> None:
        """In-place rank-one update with rows ``x`` (n, d) and responses ``y`` (n,)."""
        self.sigma += x[:, :, None] * x[:, None, :]
        u = np.einsum("nab,nb->na", self.sigma_inv, x)
        denom = 1.0 + np.einsum("na,na->n", x, u)
        self.sigma_inv -= (u[:, :, None] * u[:, None, :]) / denom[:, None, None]
        self.n_updates += 1
        if self.n_updates % REFACTOR_EVERY == 0:
            self._refactor()
        self.b += y[:, None] * x
        self.theta_hat = np.einsum("nab,nb->na", self.sigma_inv, self.b)

    def _refactor(self) -> None:
        drift = np.max(np.abs(self.sigma @ self.sigma_inv - self._eye), axis=(1, 2))
        bad = np.flatnonzero(drift > DRIFT_REFACTOR)
        if bad.size:
            fresh = np.linalg.inv(self.sigma[bad])
            if np.max(np.abs(self.sigma[bad] @ fresh - self._eye)) > DRIFT_FAIL:
                raise NumericalDegeneracy("covariance inverse drift persists after re-factorisation")
            self.sigma_inv[bad] = fresh

    def sigma_norm(self, v: np.ndarray) -> np.ndarray:
        """``||v_n - theta_hat_n||_{Sigma_n}`` for v of shape (n, d) or (d,)."""
        diff = v - self.theta_hat
        return np.sqrt(np.maximum(np.einsum("na,nab,nb->n", diff, self.sigma, diff), 0.0))

    def state(self, i: int) -> RidgeState:
        return RidgeState(self.sigma[i].copy(), self.sigma_inv[i].copy(), self.b[i].copy(), self.theta_hat[i].copy(), self.n_updates)
