"""Dense two-phase tableau simplex for small standard-form LPs.

    minimize c @ x  subject to  A @ x = b,  x >= 0

Rows whose column set already contains a unit vector start with that column
basic; the remaining rows get artificial variables that phase one drives to
zero. Pricing is Dantzig's rule, switching to Bland's rule after a run of
degenerate pivots so the method cannot cycle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_EPS = 1e-10
_BLAND_AFTER = 50


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None
    fun: float
    iterations: int
    reduced: np.ndarray | None = None  # reduced costs at the optimum


@njit(cache=True)
def _find_unit_columns(A):
    """For every row, the index of a unit column with its 1 in that row, or -1."""
    m, n = A.shape
    basis = np.full(m, -1, dtype=np.int64)
    for j in range(n):
        row = -1
        unit = True
        for i in range(m):
            a = A[i, j]
            if a != 0.0:
                if row >= 0 or a != 1.0:
                    unit = False
                    break
                row = i
        if unit and row >= 0 and basis[row] < 0:
            basis[row] = j
    return basis


@njit(cache=True)
def _pivot(T, row, col):
    m1, w = T.shape
    piv = T[row, col]
    for j in range(w):
        T[row, j] /= piv
    for i in range(m1):
        if i == row:
            continue
        f = T[i, col]
        if f != 0.0:
            for j in range(w):
                T[i, j] -= f * T[row, j]


@njit(cache=True)
def _run(T, basis, n_cols, max_iter, bland_after, eps):
    """Iterate on tableau ``T`` (last row = reduced costs, last column = rhs).

    Returns ``(code, iterations)`` with code 0 optimal, 1 unbounded,
    2 iteration limit.
    """
    m = T.shape[0] - 1
    rhs = T.shape[1] - 1
    degenerate = 0
    for it in range(max_iter):
        col = -1
        if degenerate >= bland_after:
            for j in range(n_cols):
                if T[m, j] < -eps:
                    col = j
                    break
        else:
            best = -eps
            for j in range(n_cols):
                if T[m, j] < best:
                    best = T[m, j]
                    col = j
        if col < 0:
            return 0, it
        row = -1
        best_ratio = np.inf
        for i in range(m):
            a = T[i, col]
            if a > eps:
                ratio = T[i, rhs] / a
                tol = eps * max(1.0, abs(best_ratio)) if best_ratio < np.inf else 0.0
                if ratio < best_ratio - tol:
                    best_ratio = ratio
                    row = i
                elif ratio <= best_ratio + tol and basis[i] < basis[row]:
                    # lowest basic index among ties (Bland)
                    row = i
        if row < 0:
            return 1, it
        if best_ratio <= eps:
            degenerate += 1
        else:
            degenerate = 0
        _pivot(T, row, col)
        basis[row] = col
    return 2, max_iter


@njit(cache=True)
def _two_phase(c, A, b, max_iter, bland_after, eps):
    """Codes: 0 optimal, 1 unbounded, 2 iteration limit, 3 infeasible."""
    m, n = A.shape
    basis = _find_unit_columns(A)
    n_art = 0
    for i in range(m):
        if basis[i] < 0:
            n_art += 1
    width = n + n_art
    T = np.zeros((m + 1, width + 1))
    T[:m, :n] = A
    T[:m, width] = b
    a = 0
    for i in range(m):
        if basis[i] < 0:
            T[i, n + a] = 1.0
            basis[i] = n + a
            a += 1
    iters = 0
    if n_art:
        # phase one: minimize the sum of artificials
        for j in range(n, width):
            T[m, j] = 1.0
        for i in range(m):
            if basis[i] >= n:
                T[m, :] -= T[i, :]
        code, iters = _run(T, basis, width, max_iter, bland_after, eps)
        if code == 2:
            return 2, T, basis, iters
        bmax = 1.0
        for i in range(m):
            bmax = max(bmax, abs(b[i]))
        if -T[m, width] > 1e-9 * bmax:
            return 3, T, basis, iters
        # drive remaining artificials out of the basis
        for i in range(m):
            if basis[i] >= n:
                for j in range(n):
                    if abs(T[i, j]) > 1e-9:
                        _pivot(T, i, j)
                        basis[i] = j
                        break
        keep = basis < n  # rows still holding an artificial are redundant
        rows = np.flatnonzero(keep)
        T2 = np.empty((rows.size + 1, n + 1))
        for r in range(rows.size):
            T2[r, :n] = T[rows[r], :n]
            T2[r, n] = T[rows[r], width]
        T = T2
        basis = basis[keep]
        m = rows.size
    else:
        T2 = np.empty((m + 1, n + 1))
        T2[:, :] = T
        T = T2
    T[m, :] = 0.0
    T[m, :n] = c
    for i in range(m):
        cb = c[basis[i]]
        if cb != 0.0:
            T[m, :] -= cb * T[i, :]
    code, it2 = _run(T, basis, n, max_iter, bland_after, eps)
    return code, T, basis, iters + it2


def simplex(c, A, b, max_iter: int | None = None) -> LPResult:
    """Solve ``min c@x s.t. A@x = b, x >= 0`` with the two-phase method."""
    c = np.asarray(c, dtype=float)
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    m, n = A.shape
    if m == 0:
        if np.any(c < -_EPS):
            return LPResult(UNBOUNDED, None, -np.inf, 0)
        return LPResult(OPTIMAL, np.zeros(n), 0.0, 0, reduced=c.copy())
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    max_iter = max_iter or 50 * (m + n)

    code, T, basis, iters = _two_phase(c, A, b, max_iter, _BLAND_AFTER, _EPS)
    if code == 2:
        raise RuntimeError(f"simplex did not converge in {max_iter} iterations")
    if code == 3:
        return LPResult(INFEASIBLE, None, np.nan, iters)
    if code == 1:
        return LPResult(UNBOUNDED, None, -np.inf, iters)
    m = T.shape[0] - 1
    x = np.zeros(n)
    x[basis] = T[:m, -1]
    x[x < 0] = 0.0
    return LPResult(OPTIMAL, x, float(c @ x), iters, reduced=T[-1, :n].copy())
