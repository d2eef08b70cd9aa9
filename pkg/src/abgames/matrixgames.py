"""Exact solvers for one-shot matrix and bimatrix games.

The zero-sum solver enumerates square kernels (submatrices whose cofactor
formulas yield a basic optimal solution) in deterministic order, which is
exact up to linear-algebra precision and much faster than an LP round trip
for the small matrices this package works with.  scipy's HiGHS solver is
kept as a fallback for larger matrices and as an independent cross-check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog

from .errors import InternalInconsistency, SizeCapExceeded

KERNEL_ENUM_LIMIT = 6
BIMATRIX_SIZE_CAP = 8
DUALITY_GAP_TOL = 1e-9
# scipy's HiGHS backend certifies primal/dual feasibility to about 1e-7
LP_GAP_TOL = 1e-7


@dataclass(frozen=True)
class MatrixGameSolution:
    """Value and optimal mixed strategies of a zero-sum matrix game."""

    value: float
    row_optimal: np.ndarray
    col_optimal: np.ndarray
    duality_gap: float


def _clean_distribution(w: np.ndarray) -> np.ndarray:
    w = np.where(w < 1e-15, 0.0, w)
    return w / w.sum()


@lru_cache(maxsize=None)
def _subset_pairs(m: int, n: int, k: int):
    rows = np.array(list(itertools.combinations(range(m), k)), dtype=np.intp)
    cols = np.array(list(itertools.combinations(range(n), k)), dtype=np.intp)
    # lexicographic candidate order: row subset outer, column subset inner
    ri = np.repeat(np.arange(len(rows)), len(cols))
    ci = np.tile(np.arange(len(cols)), len(rows))
    return rows[ri], cols[ci]


def _batch_adjugate(mats: np.ndarray) -> np.ndarray:
    """Classical adjugates of a (N, k, k) batch, valid for singular inputs."""
    n, k, _ = mats.shape
    if k == 1:
        return np.ones_like(mats)
    adj = np.empty_like(mats)
    idx = np.arange(k)
    for i in range(k):
        rows = idx[idx != i]
        sub_rows = mats[:, rows, :]
        for j in range(k):
            cols = idx[idx != j]
            minors = sub_rows[:, :, cols]
            adj[:, j, i] = (-1) ** (i + j) * np.linalg.det(minors)
    return adj


def _kernel_enumeration(a: np.ndarray, tol: float):
    m, n = a.shape
    ones_checks = np.maximum(1.0, np.abs(a).max()) * tol
    for k in range(1, min(m, n) + 1):
        rows, cols = _subset_pairs(m, n, k)
        sub = a[rows[:, :, None], cols[:, None, :]]
        det = np.linalg.det(sub)
        adj = _batch_adjugate(sub)
        s = adj.sum(axis=(1, 2))
        with np.errstate(divide="ignore", invalid="ignore"):
            v = det / s
            x_sub = adj.sum(axis=1) / s[:, None]
            y_sub = adj.sum(axis=2) / s[:, None]
        ok = np.isfinite(v)
        ok &= np.all(x_sub >= -1e-11, axis=1) & np.all(y_sub >= -1e-11, axis=1)
        x_full = np.zeros((len(rows), m))
        np.put_along_axis(x_full, rows, np.where(ok[:, None], x_sub, 0.0), axis=1)
        y_full = np.zeros((len(rows), n))
        np.put_along_axis(y_full, cols, np.where(ok[:, None], y_sub, 0.0), axis=1)
        col_vals = x_full @ a
        row_vals = y_full @ a.T
        ok &= np.all(col_vals >= v[:, None] - ones_checks, axis=1)
        ok &= np.all(row_vals <= v[:, None] + ones_checks, axis=1)
        hits = np.flatnonzero(ok)
        if hits.size:
            b = hits[0]
            x = _clean_distribution(x_full[b])
            y = _clean_distribution(y_full[b])
            lower = float((x @ a).min())
            upper = float((a @ y).max())
            return MatrixGameSolution(float(v[b]), x, y, upper - lower)
    return None


def _zero_sum_lp(a: np.ndarray) -> MatrixGameSolution:
    """LP formulation: used as fallback and as an independent oracle in tests."""
    m, n = a.shape
    c = np.zeros(m + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-a.T, np.ones((n, 1))])
    a_eq = np.hstack([np.ones((1, m)), np.zeros((1, 1))])
    res_r = linprog(
        c, A_ub=a_ub, b_ub=np.zeros(n), A_eq=a_eq, b_eq=[1.0],
        bounds=[(0, None)] * m + [(None, None)], method="highs",
    )
    c2 = np.zeros(n + 1)
    c2[-1] = 1.0
    a_ub2 = np.hstack([a, -np.ones((m, 1))])
    a_eq2 = np.hstack([np.ones((1, n)), np.zeros((1, 1))])
    res_c = linprog(
        c2, A_ub=a_ub2, b_ub=np.zeros(m), A_eq=a_eq2, b_eq=[1.0],
        bounds=[(0, None)] * n + [(None, None)], method="highs",
    )
    if not (res_r.success and res_c.success):
        raise InternalInconsistency(f"matrix game LP failed: {res_r.message} / {res_c.message}")
    x = _clean_distribution(res_r.x[:m])
    y = _clean_distribution(res_c.x[:n])
    v_row = float(res_r.x[-1])
    v_col = float(res_c.x[-1])
    return MatrixGameSolution((v_row + v_col) / 2.0, x, y, v_col - v_row)


def zero_sum_value(matrix: np.ndarray) -> MatrixGameSolution:
    """Value and optimal strategies of the zero-sum game `matrix` (row maximizes).

    The reported strategies guarantee the value against every pure reply up
    to the duality gap: at most 1e-9 when kernel enumeration succeeds, and
    bounded by the LP solver's feasibility tolerance otherwise.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise ValueError("matrix must be 2-d and nonempty")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    if min(a.shape) <= KERNEL_ENUM_LIMIT:
        sol = _kernel_enumeration(a, tol=1e-10)
        if sol is not None and abs(sol.duality_gap) <= DUALITY_GAP_TOL:
            return sol
    sol = _zero_sum_lp(a)
    if abs(sol.duality_gap) > LP_GAP_TOL:
        raise InternalInconsistency(f"duality gap {sol.duality_gap} above tolerance")
    return sol


def bimatrix_equilibria(a: np.ndarray, b: np.ndarray, tol: float = 1e-9):
    """All equilibria found by equal-size support enumeration, deterministic order.

    Returns a list of (x, y, u1, u2).  Complete for nondegenerate games;
    degenerate games may have further equilibria on unbalanced supports.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("payoff matrices must share a shape")
    m, n = a.shape
    if m > BIMATRIX_SIZE_CAP or n > BIMATRIX_SIZE_CAP:
        raise SizeCapExceeded(f"bimatrix support enumeration capped at {BIMATRIX_SIZE_CAP}")
    found = []
    for k in range(1, min(m, n) + 1):
        for s1 in itertools.combinations(range(m), k):
            for s2 in itertools.combinations(range(n), k):
                eq = _support_pair_solution(a, b, s1, s2, tol)
                if eq is not None:
                    found.append(eq)
    return found


def _support_pair_solution(a, b, s1, s2, tol):
    m, n = a.shape
    k = len(s1)
    # y makes player 1 indifferent across s1; x makes player 2 indifferent across s2
    ay = np.zeros((k, k))
    ay[: k - 1] = a[np.ix_(s1[1:], s2)] - a[np.ix_(s1[:1], s2)]
    ay[k - 1] = 1.0
    rhs = np.zeros(k)
    rhs[k - 1] = 1.0
    bx = np.zeros((k, k))
    bx[: k - 1] = (b[np.ix_(s1, s2[1:])] - b[np.ix_(s1, s2[:1])]).T
    bx[k - 1] = 1.0
    try:
        y_sub = np.linalg.solve(ay, rhs)
        x_sub = np.linalg.solve(bx, rhs)
    except np.linalg.LinAlgError:
        return None
    if np.any(y_sub < -tol) or np.any(x_sub < -tol):
        return None
    x = np.zeros(m)
    x[list(s1)] = np.clip(x_sub, 0.0, None)
    y = np.zeros(n)
    y[list(s2)] = np.clip(y_sub, 0.0, None)
    x, y = _clean_distribution(x), _clean_distribution(y)
    u1 = float(a[np.ix_(s1, s2)][0] @ y[list(s2)])
    u2 = float(x[list(s1)] @ b[np.ix_(s1, s2)][:, 0])
    if np.any(a @ y > u1 + tol) or np.any(x @ b > u2 + tol):
        return None
    return x, y, u1, u2
