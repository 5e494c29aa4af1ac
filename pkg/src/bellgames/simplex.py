"""Dense two-phase simplex for the small equality-form programs used here.

Solves min c.x subject to A x = b, x >= 0.  Instances in this package stay
under a few hundred variables and a couple dozen rows, so a dense tableau
with Bland's anti-cycling rule is simple and entirely adequate.
"""

from __future__ import annotations

import numpy as np


class LpInfeasibleError(ArithmeticError):
    """The constraints A x = b, x >= 0 admit no solution."""


class LpUnboundedError(ArithmeticError):
    """The objective decreases without bound on the feasible set."""


FEASIBILITY_TOL = 1e-9
PIVOT_TOL = 1e-10
REDUCED_COST_TOL = 1e-10


def _pivot(tableau: np.ndarray, basis: list[int], row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])
    basis[row - 1] = col


def _iterate(tableau: np.ndarray, basis: list[int], n_cols: int, max_iters: int) -> None:
    """Run simplex pivots to optimality.  Bland's rule: lowest eligible index."""
    m = tableau.shape[0] - 1
    for _ in range(max_iters):
        enter = -1
        for j in range(n_cols):
            if tableau[0, j] < -REDUCED_COST_TOL:
                enter = j
                break
        if enter < 0:
            return
        leave = -1
        best_ratio = np.inf
        for i in range(m):
            coef = tableau[1 + i, enter]
            if coef > PIVOT_TOL:
                ratio = tableau[1 + i, -1] / coef
                if ratio < best_ratio - 1e-12 or (
                    abs(ratio - best_ratio) <= 1e-12
                    and (leave < 0 or basis[i] < basis[leave])
                ):
                    best_ratio = ratio
                    leave = i
        if leave < 0:
            raise LpUnboundedError("objective is unbounded below")
        _pivot(tableau, basis, 1 + leave, enter)
    raise ArithmeticError(f"simplex did not converge within {max_iters} pivots")


def solve_lp(c, A, b, max_iters: int | None = None) -> tuple[float, np.ndarray]:
    """Minimize c.x subject to A x = b and x >= 0.

    Returns (objective value, x).  Raises LpInfeasibleError or
    LpUnboundedError; any other failure to converge raises ArithmeticError.
    """
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    c = np.array(c, dtype=float)
    if A.ndim != 2:
        raise ValueError("A must be a 2-D matrix")
    m, n = A.shape
    if b.shape != (m,) or c.shape != (n,):
        raise ValueError(f"shape mismatch: A {A.shape}, b {b.shape}, c {c.shape}")
    if n == 0:
        raise ValueError("no variables")
    if max_iters is None:
        max_iters = 2000 + 50 * (m + n)

    if m == 0:
        if c.min() < -REDUCED_COST_TOL:
            raise LpUnboundedError("objective is unbounded below")
        return 0.0, np.zeros(n)

    flip = b < 0
    A[flip] *= -1.0
    b = np.abs(b)

    # Phase 1: artificial basis, minimize the sum of artificials.
    tableau = np.zeros((m + 1, n + m + 1))
    tableau[1:, :n] = A
    tableau[1:, n : n + m] = np.eye(m)
    tableau[1:, -1] = b
    tableau[0, n : n + m] = 1.0
    tableau[0] -= tableau[1:].sum(axis=0)  # price out the artificial basis
    basis = list(range(n, n + m))
    _iterate(tableau, basis, n + m, max_iters)
    if -tableau[0, -1] > 1e-7:
        raise LpInfeasibleError(f"phase-1 residual {-tableau[0, -1]:.3e}")

    # Drive leftover artificials out of the basis; rows that cannot pivot on
    # an original column are redundant and get dropped.
    for i in range(m):
        if basis[i] >= n:
            row = tableau[1 + i, :n]
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) > PIVOT_TOL:
                _pivot(tableau, basis, 1 + i, j)
    keep = [i for i in range(m) if basis[i] < n]
    basis = [basis[i] for i in keep]
    tableau = tableau[np.r_[0, [1 + i for i in keep]]][:, np.r_[np.arange(n), -1]]

    # Phase 2: original objective, priced out over the current basis.
    tableau[0, :] = 0.0
    tableau[0, :n] = c
    for i, var in enumerate(basis):
        if c[var] != 0.0:
            tableau[0] -= c[var] * tableau[1 + i]
    _iterate(tableau, basis, n, max_iters)

    x = np.zeros(n)
    for i, var in enumerate(basis):
        x[var] = tableau[1 + i, -1]
    x = np.where(np.abs(x) < 1e-12, 0.0, x)
    residual = float(np.max(np.abs(A @ x - b))) if m else 0.0
    if residual > FEASIBILITY_TOL:
        raise ArithmeticError(f"solution violates constraints by {residual:.3e}")
    return float(c @ x), x


def solve_zero_sum(payoff) -> tuple[float, np.ndarray, np.ndarray]:
    """Value and optimal mixed strategies of a zero-sum matrix game.

    The row player maximizes, the column player minimizes.  Both players'
    programs are solved; the duality gap is checked against 1e-6.
    """
    payoff = np.asarray(payoff, dtype=float)
    if payoff.ndim != 2 or payoff.size == 0:
        raise ValueError("payoff must be a non-empty 2-D matrix")

    def maximin_mixture(matrix: np.ndarray) -> tuple[float, np.ndarray]:
        # Shift so the value is strictly positive, then use the classic
        # reciprocal formulation: min sum(u) s.t. M^T u >= 1, u >= 0.
        shift = 1.0 - matrix.min()
        m_pos = matrix + shift
        n_rows, n_cols = m_pos.shape
        # Equality form with surplus variables s: M^T u - s = 1.
        a_eq = np.hstack([m_pos.T, -np.eye(n_cols)])
        b_eq = np.ones(n_cols)
        cost = np.concatenate([np.ones(n_rows), np.zeros(n_cols)])
        total, ux = solve_lp(cost, a_eq, b_eq)
        if total <= 0:
            raise ArithmeticError("degenerate zero-sum program")
        mixture = ux[:n_rows] / total
        return 1.0 / total - shift, mixture

    row_value, row_mixture = maximin_mixture(payoff)
    col_value_neg, col_mixture = maximin_mixture(-payoff.T)
    gap = abs(row_value + col_value_neg)
    if gap > 1e-6:
        raise ArithmeticError(f"zero-sum duality gap {gap:.3e} exceeds 1e-6")
    return row_value, row_mixture, col_mixture
