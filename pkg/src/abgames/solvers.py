"""Value solvers for zero-sum absorbing games and minmax machinery.

A zero-sum absorbing view is a triple (p, r, z) of absorption probability,
absorbing payoff and nonabsorbed stage payoff tables, oriented so the row
player maximizes.  The discounted value solves the one-shot fixed point

    v = val[ p r + (1 - p)(lam z + (1 - lam) v) ]

whose right-hand side is nondecreasing and (1 - lam)-Lipschitz in v, so the
root is unique; it is found by a bracketed secant iteration.  Undiscounted
minmax values are vanishing-discount limits over a geometric schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InternalInconsistency, UnsupportedPayoffForMinmax
from .game import Constant, GameSpec, LimsupAverage, MixedAction
from .matrixgames import MatrixGameSolution, zero_sum_value

DEFAULT_SCHEDULE = tuple(2.0 ** -n for n in range(1, 21))
# floor set by the matrix-game LP fallback, whose value carries ~1e-8 noise
VALUE_RESIDUAL_TOL = 1e-8
CONSISTENCY_TOL = 1e-6
TRACE_DIVERGENCE_TOL = 1e-3


@dataclass(frozen=True)
class DiscountedSolution:
    """Fixed-point solution of one discounted zero-sum absorbing game."""

    value: float
    row_optimal: np.ndarray
    col_optimal: np.ndarray
    residual: float
    iterations: int


@dataclass(frozen=True)
class VanishingReport:
    """Discounted value trace along a vanishing schedule plus its limit."""

    schedule: tuple
    values: tuple
    extrapolated: float
    converged: bool
    last_solution: DiscountedSolution


@dataclass(frozen=True)
class MinmaxReport:
    """Minmax values with one-shot consistency residuals and candidate actions.

    punisher_i is the opposing player's stationary candidate for holding
    player i down to v_i; safe_i is player i's own action from the one-shot
    game, protecting her conditional absorbing payoff at level v_i.
    """

    v1: float
    v2: float
    method1: str
    method2: str
    residual1: float
    residual2: float
    punisher1: MixedAction
    punisher2: MixedAction
    safe1: MixedAction
    safe2: MixedAction
    trace1: Optional[VanishingReport]
    trace2: Optional[VanishingReport]

    def value(self, player: int) -> float:
        return self.v1 if player == 1 else self.v2

    def punisher(self, player: int) -> MixedAction:
        return self.punisher1 if player == 1 else self.punisher2


def _safe_tables(p, r):
    p = np.asarray(p, dtype=float)
    mask = p > 0.0
    r_safe = np.where(mask, np.nan_to_num(np.asarray(r, dtype=float)), 0.0)
    return p, mask, r_safe


def discounted_one_shot(p, r, z, lam: float, v: float) -> np.ndarray:
    """Entry table of the discounted one-shot game at continuation value v."""
    p, _, r_safe = _safe_tables(p, r)
    return p * r_safe + (1.0 - p) * (lam * np.asarray(z, dtype=float) + (1.0 - lam) * v)


def shapley_discounted_value(p, r, z, lam: float, bracket=None, max_iter: int = 200) -> DiscountedSolution:
    """Discounted value of the absorbing view (p, r, z) at discount factor lam."""
    if not 0.0 < lam <= 1.0:
        raise ValueError("discount factor must lie in (0, 1]")
    p, mask, r_safe = _safe_tables(p, r)
    z = np.asarray(z, dtype=float)
    cand = list(z.ravel())
    if mask.any():
        cand.extend(r_safe[mask].ravel())
    lo_full, hi_full = min(cand), max(cand)

    def phi(v):
        sol = zero_sum_value(p * r_safe + (1.0 - p) * (lam * z + (1.0 - lam) * v))
        return sol.value - v, sol

    lo, hi = lo_full, hi_full
    if bracket is not None:
        lo = max(lo_full, bracket[0])
        hi = min(hi_full, bracket[1])
        if lo > hi:
            lo, hi = lo_full, hi_full
    if hi - lo < 1e-15:
        _, sol = phi(lo)
        return DiscountedSolution(lo, sol.row_optimal, sol.col_optimal, abs(sol.value - lo), 1)
    f_lo, sol_lo = phi(lo)
    f_hi, sol_hi = phi(hi)
    if f_lo < 0.0 or f_hi > 0.0:
        # hint bracket missed the root; restart from the full range
        lo, hi = lo_full, hi_full
        f_lo, sol_lo = phi(lo)
        f_hi, sol_hi = phi(hi)
    best_v, best_f, best_sol = (lo, f_lo, sol_lo) if abs(f_lo) < abs(f_hi) else (hi, f_hi, sol_hi)
    iterations = 2
    side = 0
    while iterations < max_iter and hi - lo > 1e-14 and abs(best_f) > 1e-16:
        denom = f_hi - f_lo
        if denom >= 0.0 or not math.isfinite(denom):
            c = 0.5 * (lo + hi)
        else:
            c = (lo * f_hi - hi * f_lo) / denom
            if not (lo < c < hi):
                c = 0.5 * (lo + hi)
        f_c, sol_c = phi(c)
        iterations += 1
        if abs(f_c) < abs(best_f):
            best_v, best_f, best_sol = c, f_c, sol_c
        if f_c > 0.0:
            lo, f_lo = c, f_c
            if side == 1:
                f_hi *= 0.5  # Illinois damping against one-sided stalls
            side = 1
        elif f_c < 0.0:
            hi, f_hi = c, f_c
            if side == -1:
                f_lo *= 0.5
            side = -1
        else:
            break
    if abs(best_f) > VALUE_RESIDUAL_TOL:
        raise InternalInconsistency(f"discounted fixed point residual {best_f} at lam={lam}")
    return DiscountedSolution(best_v, best_sol.row_optimal, best_sol.col_optimal, abs(best_f), iterations)


def _extrapolate(values):
    vals = np.asarray(values, dtype=float)
    extrap = float(vals[-1])
    converged = True
    if len(vals) >= 2 and abs(vals[-1] - vals[-2]) > TRACE_DIVERGENCE_TOL:
        converged = False
    if len(vals) >= 3:
        tail = vals[-6:]
        d = np.diff(tail)
        if np.all(d > 0.0) or np.all(d < 0.0):
            ratios = d[1:] / d[:-1]
            ratio = float(np.median(ratios)) if ratios.size else 0.5
            ratio = min(max(ratio, 0.02), 0.95)
            extrap = float(vals[-1] + d[-1] * ratio / (1.0 - ratio))
    return extrap, converged


def vanishing_discount_value(p, r, z, schedule=None) -> VanishingReport:
    """Discounted values along a decreasing schedule with geometric-tail extrapolation.

    The extrapolation applies one Richardson-type step when the last five
    trace differences share a strict sign, using the empirical difference
    ratio; otherwise the final trace value is reported.
    """
    schedule = tuple(DEFAULT_SCHEDULE if schedule is None else schedule)
    if not schedule or any(b <= 0 for b in schedule):
        raise ValueError("schedule must contain positive discount factors")
    if any(b2 >= b1 for b1, b2 in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly decreasing")
    values = []
    sol = None
    bracket = None
    width = None
    for lam in schedule:
        sol = shapley_discounted_value(p, r, z, lam, bracket=bracket)
        values.append(sol.value)
        if len(values) >= 2:
            width = max(8.0 * abs(values[-1] - values[-2]), 1e-6)
        if width is not None:
            bracket = (values[-1] - width, values[-1] + width)
    extrapolated, converged = _extrapolate(values)
    return VanishingReport(schedule, tuple(values), extrapolated, converged, sol)


# ---------------------------------------------------------------------------
# minmax


def _oriented_view(game: GameSpec, player: int):
    """(p, r, z) with the maximizing player's actions on rows."""
    spec = game.tail_payoff(player)
    if isinstance(spec, Constant):
        z = np.full(game.shape, spec.value)
    elif isinstance(spec, LimsupAverage):
        z = np.asarray(spec.stage_values, dtype=float)
    else:
        raise UnsupportedPayoffForMinmax(
            f"player {player} payoff {type(spec).__name__} needs a declared minmax"
        )
    p = game.absorb_prob
    r = game.absorb_payoff(player)
    if player == 2:
        return p.T, r.T, z.T
    return p, r, z


def one_shot_auxiliary(game: GameSpec, player: int, v: float) -> np.ndarray:
    """One-shot game p r + (1 - p) v with the named player's actions on rows."""
    p = game.absorb_prob
    r = np.where(game.absorbing_mask, np.nan_to_num(game.absorb_payoff(player)), 0.0)
    phi = p * r + (1.0 - p) * v
    return phi.T if player == 2 else phi


def minmax_values(game: GameSpec, schedule=None) -> MinmaxReport:
    """Minmax value of each player with punisher and safe-action candidates.

    Constant and LimsupAverage payoffs are solved by the vanishing-discount
    limit of the zero-sum absorbing game in which the player maximizes her
    own payoff; other variants must carry declared_minmax.  Each value is
    cross-checked through the one-shot game at level v: a declared value
    failing the check is rejected, a computed one is rejected only on gross
    disagreement.
    """
    out = {}
    for player in (1, 2):
        spec = game.tail_payoff(player)
        trace = None
        try:
            p, r, z = _oriented_view(game, player)
        except UnsupportedPayoffForMinmax:
            if spec.declared_minmax is None:
                raise
            v = float(spec.declared_minmax)
            method = "declared"
        else:
            trace = vanishing_discount_value(p, r, z, schedule)
            v = trace.extrapolated
            method = "vanishing_discount"
            declared = spec.declared_minmax
            if declared is not None and abs(declared - v) > 1e-4:
                raise InternalInconsistency(
                    f"declared minmax {declared} disagrees with computed {v} for player {player}"
                )
        phi_sol = zero_sum_value(one_shot_auxiliary(game, player, v))
        residual = abs(phi_sol.value - v)
        if method == "declared" and residual > CONSISTENCY_TOL:
            raise InternalInconsistency(
                f"declared minmax {v} fails one-shot consistency (residual {residual})"
            )
        if residual > 1e-4:
            raise InternalInconsistency(
                f"one-shot consistency residual {residual} for player {player}"
            )
        if trace is not None:
            punisher = MixedAction.from_numeric(trace.last_solution.col_optimal)
        else:
            punisher = MixedAction.from_numeric(phi_sol.col_optimal)
        out[player] = {
            "v": v,
            "method": method,
            "residual": residual,
            "punisher": punisher,
            "safe": MixedAction.from_numeric(phi_sol.row_optimal),
            "trace": trace,
        }
    return MinmaxReport(
        v1=out[1]["v"], v2=out[2]["v"],
        method1=out[1]["method"], method2=out[2]["method"],
        residual1=out[1]["residual"], residual2=out[2]["residual"],
        punisher1=out[1]["punisher"], punisher2=out[2]["punisher"],
        safe1=out[1]["safe"], safe2=out[2]["safe"],
        trace1=out[1]["trace"], trace2=out[2]["trace"],
    )


# ---------------------------------------------------------------------------
# safe polytopes


@dataclass(frozen=True)
class SafePolytope:
    """Mixed actions whose absorbing payoff stays at or above a level.

    Membership of y: for every opposing action with positive absorption
    probability against y, the player's conditional absorbing payoff is at
    least the level; linearized as ineq @ y >= 0 componentwise.
    """

    player: int
    level: float
    ineq: np.ndarray
    vertices: tuple

    def contains(self, weights, tol: float = 1e-9) -> bool:
        w = np.asarray(weights, dtype=float)
        if abs(w.sum() - 1.0) > 1e-9 or np.any(w < -tol):
            return False
        return bool(np.all(self.ineq @ w >= -tol))


def safe_polytope(game: GameSpec, player: int, level: float) -> SafePolytope:
    """H-representation and vertex enumeration of the safe set at `level`."""
    p = game.absorb_prob
    r = np.where(game.absorbing_mask, np.nan_to_num(game.absorb_payoff(player)), 0.0)
    g = p * (r - level)
    ineq = g.T if player == 1 else g
    # rows: opposing actions; columns: own actions
    vertices = _simplex_polytope_vertices(ineq)
    return SafePolytope(player, level, ineq, tuple(vertices))


def _simplex_polytope_vertices(ineq: np.ndarray, tol: float = 1e-9):
    """Vertices of {y in simplex : ineq @ y >= 0} by active-set enumeration."""
    import itertools

    n_rows, d = ineq.shape
    if d == 1:
        y = np.ones(1)
        return [y] if np.all(ineq @ y >= -tol) else []
    stacked = np.vstack([np.eye(d), ineq])
    seen = set()
    verts = []
    for active in itertools.combinations(range(stacked.shape[0]), d - 1):
        a = np.vstack([stacked[list(active)], np.ones((1, d))])
        b = np.zeros(d)
        b[-1] = 1.0
        try:
            y = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            continue
        if np.any(y < -tol) or np.any(ineq @ y < -tol):
            continue
        y = np.clip(y, 0.0, None)
        y /= y.sum()
        key = tuple(np.round(y, 9))
        if key not in seen:
            seen.add(key)
            verts.append(y)
    verts.sort(key=lambda v: tuple(v))
    return verts
