"""Dense two-phase primal simplex with Bland's anti-cycling rule.

Solves ``max c.x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0`` on tiny
problems.  Inequalities get slack columns, every row gets a phase-1 artificial,
and entering/leaving variables are always the lowest eligible index, which
makes the returned vertex a deterministic function of the input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-11
FEAS_TOL = 1e-9


class Unbounded(ArithmeticError):
    pass


@dataclass
class SimplexResult:
    status: str  # "optimal" | "infeasible"
    x: np.ndarray
    objective: float


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    for r in range(tab.shape[0]):
        if r != row and tab[r, col] != 0.0:
            tab[r] -= tab[r, col] * tab[row]


def _run(tab: np.ndarray, basis: list[int], allowed: np.ndarray) -> None:
    """Maximise the objective stored in the last row (as reduced costs)."""
    m = len(basis)
    while True:
        obj = tab[-1, :-1]
        entering = [j for j in np.flatnonzero(obj < -PIVOT_TOL) if allowed[j]]
        if not entering:
            return
        col = entering[0]
        column = tab[:m, col]
        rhs = tab[:m, -1]
        best, leave = None, None
        for r in range(m):
            if column[r] > PIVOT_TOL:
                ratio = rhs[r] / column[r]
                # Bland: ties broken by smallest basic variable index
                if best is None or ratio < best - 1e-13 or (abs(ratio - best) <= 1e-13 and basis[r] < basis[leave]):
                    best, leave = ratio, r
        if leave is None:
            raise Unbounded("objective is unbounded above")
        _pivot(tab, leave, col)
        basis[leave] = col


def solve(c, A_eq=None, b_eq=None, A_ub=None, b_ub=None) -> SimplexResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).reshape(-1)
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).reshape(-1)
    m_eq, m_ub = A_eq.shape[0], A_ub.shape[0]
    m = m_eq + m_ub
    n_struct = n + m_ub  # structural + slack columns

    A = np.zeros((m, n_struct))
    A[:m_eq, :n] = A_eq
    A[m_eq:, :n] = A_ub
    A[m_eq:, n:] = np.eye(m_ub)
    b = np.concatenate([b_eq, b_ub])
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # tableau: [A | I_art | b], last row = reduced costs
    tab = np.zeros((m + 1, n_struct + m + 1))
    tab[:m, :n_struct] = A
    tab[:m, n_struct:n_struct + m] = np.eye(m)
    tab[:m, -1] = b
    basis = list(range(n_struct, n_struct + m))

    # phase 1: maximise -sum(artificials)
    tab[-1, n_struct:n_struct + m] = 1.0
    for r in range(m):
        tab[-1] -= tab[r]
    allowed = np.ones(n_struct + m, dtype=bool)
    _run(tab, basis, allowed)
    if -tab[-1, -1] > FEAS_TOL:
        return SimplexResult("infeasible", np.full(n, np.nan), float("nan"))

    # drive zero-level artificials out of the basis, dropping redundant rows
    r = 0
    while r < len(basis):
        if basis[r] >= n_struct:
            nz = np.flatnonzero(np.abs(tab[r, :n_struct]) > PIVOT_TOL)
            if nz.size:
                _pivot(tab, r, int(nz[0]))
                basis[r] = int(nz[0])
            else:
                tab = np.delete(tab, r, axis=0)
                del basis[r]
                continue
        r += 1

    # phase 2
    tab[-1, :] = 0.0
    tab[-1, :n] = -c
    for r, j in enumerate(basis):
        if tab[-1, j] != 0.0:
            tab[-1] -= tab[-1, j] * tab[r]
    allowed[n_struct:] = False
    _run(tab, basis, allowed)

    x = np.zeros(n_struct + m)
    for r, j in enumerate(basis):
        x[j] = tab[r, -1]
    x = x[:n]
    return SimplexResult("optimal", x, float(c @ x))
