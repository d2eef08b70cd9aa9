"""Auxiliary-game pipeline: discounted traces, limit profiles, classification.

Given minmax values v and a slack epsilon, the auxiliary game keeps the
absorption structure of the base game but replaces every nonabsorbed play's
payoff with the constant v_i - epsilon.  Stationary discounted equilibria of
the related discounted games are traced along a vanishing schedule; their
limit profile decides which of three construction cases applies, with a
further split of the third case by the difficult-case conditions on the
players' safe polytopes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import (
    NoCaseMatched,
    NoEquilibriumFound,
    NoStableCluster,
    SandwichViolation,
    SizeCapExceeded,
)
from .game import GameSpec, MixedAction, MixedProfile, absorption_prob, conditional_absorbing_payoff
from .solvers import DEFAULT_SCHEDULE, SafePolytope, safe_polytope, vanishing_discount_value

CLASSIFY_TOL = 1e-6
SANDWICH_TOL = 1e-4
CLUSTER_RADIUS = 1e-3
EQUILIBRIUM_TOL = 1e-9
VALUE_GRID_POINTS = 33
ACTION_CAP = 8


@dataclass(frozen=True)
class AuxiliaryGame:
    """Absorbing game with constant nonabsorbing stage payoffs v_i - epsilon."""

    base: GameSpec
    v1: float
    v2: float
    epsilon: float

    def stage_payoff(self, player: int) -> float:
        return (self.v1 if player == 1 else self.v2) - self.epsilon

    def tables(self, player: int):
        """(p, r, z) tables with the named player's actions on rows."""
        p = self.base.absorb_prob
        r = self.base.absorb_payoff(player)
        if player == 2:
            p, r = p.T, r.T
        return p, r, np.full(p.shape, self.stage_payoff(player))

    def stationary_value(self, profile: MixedProfile, player: int) -> float:
        """Expected payoff of i.i.d. play: r* when absorbing, v_i - eps otherwise."""
        if absorption_prob(self.base, profile) > 0.0:
            return conditional_absorbing_payoff(self.base, profile, player)
        return self.stage_payoff(player)


def build_auxiliary(game: GameSpec, v, epsilon: float) -> AuxiliaryGame:
    v1, v2 = float(v[0]), float(v[1])
    if not 0.0 < epsilon <= min(v1, v2) + 1.0:
        raise ValueError(f"epsilon {epsilon} outside (0, min(v)+1]")
    for which, val in (("v1", v1), ("v2", v2)):
        if not -1e-9 <= val <= game.bound + 1e-9:
            raise ValueError(f"{which}={val} outside [0, bound]")
    return AuxiliaryGame(game, v1, v2, epsilon)


def auxiliary_minmax(aux: AuxiliaryGame, schedule=None):
    """Minmax pair of the auxiliary game; must sit in [v_i - eps, v_i]."""
    out = []
    for player in (1, 2):
        p, r, z = aux.tables(player)
        rep = vanishing_discount_value(p, r, z, schedule)
        v_inf = rep.extrapolated
        v_base = aux.v1 if player == 1 else aux.v2
        if not v_base - aux.epsilon - SANDWICH_TOL <= v_inf <= v_base + SANDWICH_TOL:
            raise SandwichViolation(
                f"player {player}: auxiliary minmax {v_inf} outside "
                f"[{v_base - aux.epsilon}, {v_base}] by more than {SANDWICH_TOL}"
            )
        out.append(v_inf)
    return out[0], out[1]


# ---------------------------------------------------------------------------
# discounted equilibria


def _support_pairs(m: int, n: int):
    subs1 = [s for k in range(1, m + 1) for s in itertools.combinations(range(m), k)]
    subs2 = [s for k in range(1, n + 1) for s in itertools.combinations(range(n), k)]
    subs1.sort()
    subs2.sort()
    return [(s1, s2) for s1 in subs1 for s2 in subs2]


def _one_shot_tables(aux: AuxiliaryGame, lam: float, u1: float, u2: float):
    p = aux.base.absorb_prob
    a1 = p * aux.base.safe_absorb_payoff(1) + (1.0 - p) * (
        lam * aux.stage_payoff(1) + (1.0 - lam) * u1)
    a2 = p * aux.base.safe_absorb_payoff(2) + (1.0 - p) * (
        lam * aux.stage_payoff(2) + (1.0 - lam) * u2)
    return a1, a2


def _solve_block(rows, size, lstsq: bool):
    """Tie the given payoff rows at a common value w; solve for (weights, w)."""
    m = np.zeros((len(rows) + 1, size + 1))
    b = np.zeros(len(rows) + 1)
    for i, row in enumerate(rows):
        m[i, :size] = row
        m[i, size] = -1.0
    m[-1, :size] = 1.0
    b[-1] = 1.0
    if m.shape[0] == m.shape[1] and not lstsq:
        try:
            sol = np.linalg.solve(m, b)
        except np.linalg.LinAlgError:
            return None
    else:
        sol, *_ = np.linalg.lstsq(m, b, rcond=None)
        if not np.all(np.isfinite(sol)) or np.max(np.abs(m @ sol - b)) > 1e-9:
            return None
    if not np.all(np.isfinite(sol)):
        return None
    return sol


def _stationary_deviation_values(aux: AuxiliaryGame, lam: float, player: int, other_mixed: np.ndarray):
    """Closed-form discounted value of each pure stationary deviation."""
    p = aux.base.absorb_prob
    r = aux.base.safe_absorb_payoff(player)
    z = aux.stage_payoff(player)
    if player == 1:
        mass = p @ other_mixed
        flux = (p * r) @ other_mixed
    else:
        mass = p.T @ other_mixed
        flux = (p * r).T @ other_mixed
    return (flux + (1.0 - mass) * lam * z) / (1.0 - (1.0 - mass) * (1.0 - lam))


def discounted_equilibrium(aux: AuxiliaryGame, lam: float):
    """Stationary equilibrium of the discounted auxiliary game.

    Support enumeration in lexicographic order with a nested scalar fixed
    point: for each support pair, the one-shot indifference system is solved
    at the current continuation values, which are then updated by the
    consistency map (a contraction of modulus at most 1 - lam).  The first
    pair whose solution passes every inequality check within 1e-9 wins.
    """
    m, n = aux.base.shape
    if max(m, n) > ACTION_CAP:
        raise SizeCapExceeded(f"support enumeration capped at {ACTION_CAP} actions")
    if not 0.0 < lam < 1.0:
        raise ValueError("discount factor must lie in (0, 1)")
    pairs = _support_pairs(m, n)
    for lstsq in (False, True):
        for s1, s2 in pairs:
            if not lstsq and len(s1) != len(s2):
                continue
            res = _try_support_pair(aux, lam, s1, s2, lstsq)
            if res is not None:
                return res
    raise NoEquilibriumFound(f"no support pair admits an equilibrium at lam={lam}")


def _value_bracket(aux: AuxiliaryGame, player: int):
    p = aux.base.absorb_prob
    cand = [aux.stage_payoff(player)]
    mask = p > 0.0
    if mask.any():
        r = aux.base.safe_absorb_payoff(player)
        cand.extend([float(r[mask].min()), float(r[mask].max())])
    return min(cand), max(cand)


def _illinois(evaluate, a, fa, b, fb):
    """Root of a bracketing interval; None if evaluation degenerates.

    The sign change may sit at a pole of the rational map rather than a
    root, so the best iterate is accepted only when the residual is tiny.
    """
    best = None
    side = 0
    for _ in range(120):
        denom = fb - fa
        c = (a * fb - b * fa) / denom if denom != 0.0 else 0.5 * (a + b)
        lo_c, hi_c = (a, b) if a < b else (b, a)
        if not lo_c < c < hi_c:
            c = 0.5 * (a + b)
        out = evaluate(c)
        if out is None:
            return None
        fc, wc = out
        if best is None or abs(fc) < abs(best[2]):
            best = (c, wc, fc)
        if abs(fc) <= 1e-13 or abs(b - a) < 1e-15:
            break
        if (fa < 0.0) != (fc < 0.0):
            b, fb = c, fc
            if side == -1:
                fa *= 0.5
            side = -1
        else:
            a, fa = c, fc
            if side == 1:
                fb *= 0.5
            side = 1
    if best is None or abs(best[2]) > 1e-11:
        return None
    return best[0], best[1]


def _own_value_roots(aux: AuxiliaryGame, lam: float, player: int, own_support, opp_support,
                     lstsq: bool):
    """All roots of w(u) - u where w ties the player's support rows at continuation u.

    w(u) comes from the opponent-mixture indifference system, so each root is
    a candidate stationary discounted payoff on this support pair.  w is a
    rational function of u (linear system entries are affine in u), hence it
    can cross the diagonal several times and has poles where the tie system
    degenerates; a sign scan over the payoff bracket catches every crossing
    that is not confined between adjacent grid points.  Returns a list of
    (u, opponent weights) in increasing u order.
    """

    def evaluate(u):
        if player == 1:
            a1, _ = _one_shot_tables(aux, lam, u, 0.0)
            rows = [a1[i, list(opp_support)] for i in own_support]
        else:
            _, a2 = _one_shot_tables(aux, lam, 0.0, u)
            rows = [a2[list(opp_support), j] for j in own_support]
        sol = _solve_block(rows, len(opp_support), lstsq)
        if sol is None:
            return None
        return float(sol[-1]) - u, sol[:-1]

    lo, hi = _value_bracket(aux, player)
    if hi - lo < 1e-15:
        out = evaluate(lo)
        return [(lo, out[1])] if out is not None and abs(out[0]) < 1e-9 else []
    grid = np.linspace(lo, hi, VALUE_GRID_POINTS)
    samples = [(float(u), evaluate(float(u))) for u in grid]
    roots = []
    for (ua, oa), (ub, ob) in zip(samples, samples[1:]):
        if oa is None or ob is None:
            continue
        fa, fb = oa[0], ob[0]
        if fa == 0.0:
            roots.append((ua, oa[1]))
            continue
        if (fa < 0.0) == (fb < 0.0):
            continue
        found = _illinois(evaluate, ua, fa, ub, fb)
        if found is not None:
            roots.append(found)
    tail_u, tail_out = samples[-1]
    if tail_out is not None and tail_out[0] == 0.0:
        roots.append((tail_u, tail_out[1]))
    unique = []
    for u, w in roots:
        if all(abs(u - seen) > 1e-9 for seen, _ in unique):
            unique.append((u, w))
    return unique


def _check_candidate(aux: AuxiliaryGame, lam: float, s1, s2, u1, u2, x1_part, x2_part):
    x1 = np.zeros(aux.base.shape[0])
    x2 = np.zeros(aux.base.shape[1])
    x1[list(s1)] = x1_part
    x2[list(s2)] = x2_part
    if np.any(x1 < -EQUILIBRIUM_TOL) or np.any(x2 < -EQUILIBRIUM_TOL):
        return None
    x1 = np.clip(x1, 0.0, None)
    x2 = np.clip(x2, 0.0, None)
    if abs(x1.sum() - 1.0) > 1e-7 or abs(x2.sum() - 1.0) > 1e-7:
        return None
    x1 /= x1.sum()
    x2 /= x2.sum()
    a1, a2 = _one_shot_tables(aux, lam, u1, u2)
    # support optimality and no profitable one-shot deviation
    payoff1 = a1 @ x2
    payoff2 = x1 @ a2
    if np.max(np.abs(payoff1[list(s1)] - u1)) > EQUILIBRIUM_TOL:
        return None
    if np.max(np.abs(payoff2[list(s2)] - u2)) > EQUILIBRIUM_TOL:
        return None
    if payoff1.max() > u1 + EQUILIBRIUM_TOL or payoff2.max() > u2 + EQUILIBRIUM_TOL:
        return None
    dev1 = _stationary_deviation_values(aux, lam, 1, x2)
    dev2 = _stationary_deviation_values(aux, lam, 2, x1)
    residual = max(0.0, float(dev1.max() - u1), float(dev2.max() - u2))
    if residual > 1e-7:
        return None
    profile = MixedProfile(MixedAction.from_numeric(x1), MixedAction.from_numeric(x2))
    return profile, (u1, u2), residual


def _try_support_pair(aux: AuxiliaryGame, lam: float, s1, s2, lstsq: bool):
    # the two continuation values decouple: each player's indifference system
    # involves only her own one-shot table, so candidate values multiply out
    roots1 = _own_value_roots(aux, lam, 1, s1, s2, lstsq)
    if not roots1:
        return None
    roots2 = _own_value_roots(aux, lam, 2, s2, s1, lstsq)
    for u1, x2_part in roots1:
        for u2, x1_part in roots2:
            res = _check_candidate(aux, lam, s1, s2, u1, u2, x1_part, x2_part)
            if res is not None:
                return res
    return None


@dataclass(frozen=True)
class TraceEntry:
    lam: float
    profile: MixedProfile
    payoffs: tuple
    residual: float


@dataclass(frozen=True)
class DiscountedTrace:
    entries: tuple

    def __post_init__(self):
        lams = [e.lam for e in self.entries]
        if any(b >= a for a, b in zip(lams, lams[1:])):
            raise ValueError("trace discount factors must be strictly decreasing")


def discounted_trace(aux: AuxiliaryGame, schedule=None) -> DiscountedTrace:
    schedule = tuple(DEFAULT_SCHEDULE if schedule is None else schedule)
    entries = []
    for lam in schedule:
        profile, payoffs, residual = discounted_equilibrium(aux, lam)
        entries.append(TraceEntry(lam, profile, payoffs, residual))
    return DiscountedTrace(tuple(entries))


# ---------------------------------------------------------------------------
# limit profile


@dataclass(frozen=True)
class LimitProfile:
    x0: MixedProfile
    cluster_radius: float
    selected_subsequence: tuple
    is_absorbing: bool
    absorption_margin: float


def _flat(profile: MixedProfile) -> np.ndarray:
    return np.concatenate([profile.x1.weights, profile.x2.weights])


def limit_profile(trace: DiscountedTrace, game: GameSpec, radius: float = CLUSTER_RADIUS) -> LimitProfile:
    """Cluster the trace profiles and average the cluster at the smallest discounts."""
    entries = trace.entries
    if len(entries) < 5:
        raise ValueError("trace needs at least 5 entries")
    flats = [_flat(e.profile) for e in entries]
    tail = flats[-3:]
    dists = [float(np.max(np.abs(a - b))) for a, b in itertools.combinations(tail, 2)]
    if all(d > radius for d in dists):
        raise NoStableCluster(
            f"three smallest-discount profiles pairwise {min(dists):.3g} apart (> {radius})"
        )
    anchor = flats[-1]
    selected = [i for i, f in enumerate(flats) if np.max(np.abs(f - anchor)) <= radius]
    center = np.mean([flats[i] for i in selected], axis=0)
    # one refinement pass keeps every member within the radius of the mean
    selected = [i for i in selected if np.max(np.abs(flats[i] - center)) <= radius]
    center = np.mean([flats[i] for i in selected], axis=0)
    n1 = entries[0].profile.x1.weights.size
    x1 = MixedAction.from_numeric(center[:n1], tol=1e-6)
    x2 = MixedAction.from_numeric(center[n1:], tol=1e-6)
    x0 = MixedProfile(x1, x2)
    spread = max(float(np.max(np.abs(flats[i] - center))) for i in selected)
    margin = absorption_prob(game, x0)
    return LimitProfile(x0, spread, tuple(selected), margin > CLASSIFY_TOL, margin)


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class Case1Report:
    x0: MixedProfile
    p0: float
    r_star: tuple
    checks: dict


@dataclass(frozen=True)
class Case2Report:
    x0: MixedProfile
    player: int
    action: int
    r_star: tuple
    checks: dict


@dataclass(frozen=True)
class Case3SoftReport:
    x0: MixedProfile
    player: int
    action: int
    y_other: MixedAction
    r_star: tuple
    checks: dict


@dataclass(frozen=True)
class Case3HardReport:
    x0: MixedProfile
    evidence: dict


@dataclass(frozen=True)
class CaseReport:
    tag: str
    detail: object
    raw: dict
    near_boundary: tuple


def _other(player: int) -> int:
    return 2 if player == 1 else 1


def _unilateral_profile(x0: MixedProfile, player: int, action: int, size: int) -> MixedProfile:
    own = MixedAction.pure(action, size)
    if player == 1:
        return MixedProfile(own, x0.x2)
    return MixedProfile(x0.x1, own)


def _absorbing_deviations(game: GameSpec, x0: MixedProfile, player: int, tol: float):
    """(action, mass, r*) for own actions absorbing against the other side of x0."""
    out = []
    for a in range(game.n_actions(player)):
        prof = _unilateral_profile(x0, player, a, game.n_actions(player))
        mass = absorption_prob(game, prof)
        if mass > tol:
            out.append((a, mass, conditional_absorbing_payoff(game, prof, player)))
    return out


def classify(
    game: GameSpec,
    aux: AuxiliaryGame,
    lim: LimitProfile,
    v,
    epsilon: float,
    tol: float = CLASSIFY_TOL,
) -> CaseReport:
    """Sort the limit profile into one of the three construction cases.

    The cases are not exclusive; ties break toward the lowest-numbered case
    since earlier cases yield simpler equilibria.  Every numeric slack of
    every condition is recorded in the raw evaluation map.
    """
    x0 = lim.x0
    v1, v2 = float(v[0]), float(v[1])
    level = (v1 - epsilon, v2 - epsilon)
    p0 = absorption_prob(game, x0)
    near = []

    def note(slack):
        if abs(slack) <= 10.0 * tol:
            near.append(round(float(slack), 12))
        return float(slack)

    raw = {"p_x0": p0, "tol": tol}
    devs = {i: _absorbing_deviations(game, x0, i, tol) for i in (1, 2)}

    # Case 1: absorbing limit, payoff above level, no better absorbing deviation
    case1 = {"a_slack": note(p0 - tol)}
    if p0 > tol:
        r_star = (
            conditional_absorbing_payoff(game, x0, 1),
            conditional_absorbing_payoff(game, x0, 2),
        )
        case1["b_slack"] = [note(r_star[i - 1] - (level[i - 1] - tol)) for i in (1, 2)]
        case1["c_slack"] = [
            (i, a, note(r_star[i - 1] + tol - r))
            for i in (1, 2)
            for (a, _, r) in devs[i]
        ]
        case1["holds"] = all(s >= 0 for s in case1["b_slack"]) and all(
            s >= 0 for (_, _, s) in case1["c_slack"]
        )
        raw["case1"] = case1
        if case1["holds"]:
            detail = Case1Report(x0, p0, r_star, case1)
            return CaseReport("case1", detail, raw, tuple(near))
    else:
        case1["holds"] = False
        raw["case1"] = case1

    # Case 2: nonabsorbing limit with a mutually acceptable absorbing exit
    case2 = {"a_slack": note(tol - p0), "candidates": []}
    witness = None
    if p0 <= tol:
        for i in (1, 2):
            for (a, mass, _) in devs[i]:
                prof = _unilateral_profile(x0, i, a, game.n_actions(i))
                r_pair = (
                    conditional_absorbing_payoff(game, prof, 1),
                    conditional_absorbing_payoff(game, prof, 2),
                )
                c_slack = [note(r_pair[j - 1] - (level[j - 1] - tol)) for j in (1, 2)]
                d_slack = [
                    (j, aj, note(r_pair[j - 1] + tol - rj))
                    for j in (1, 2)
                    for (aj, _, rj) in devs[j]
                ]
                ok = all(s >= 0 for s in c_slack) and all(s >= 0 for (_, _, s) in d_slack)
                case2["candidates"].append(
                    {"player": i, "action": a, "b_slack": note(mass - tol),
                     "c_slack": c_slack, "d_slack": d_slack, "holds": ok}
                )
                if ok and witness is None:
                    witness = (i, a, r_pair, {"b_slack": mass - tol,
                                              "c_slack": c_slack, "d_slack": d_slack})
    case2["holds"] = witness is not None
    raw["case2"] = case2
    if witness is not None:
        i, a, r_pair, checks = witness
        detail = Case2Report(x0, i, a, r_pair, checks)
        return CaseReport("case2", detail, raw, tuple(near))

    # Case 3: nonabsorbing limit, every absorbing deviation at or below level
    case3 = {"a_slack": note(tol - p0)}
    if p0 <= tol:
        case3["b_slack"] = [
            (i, a, note(level[i - 1] + tol - r))
            for i in (1, 2)
            for (a, _, r) in devs[i]
        ]
        case3["holds"] = all(s >= 0 for (_, _, s) in case3["b_slack"])
    else:
        case3["holds"] = False
    raw["case3"] = case3
    if case3["holds"]:
        y1 = safe_polytope(game, 1, v1)
        y2 = safe_polytope(game, 2, v2)
        holds, payload = difficult_conditions(game, (v1, v2), y1, y2)
        raw["difficult"] = payload["evidence"] if holds else payload["raw"]
        if holds:
            return CaseReport("case3hard", Case3HardReport(x0, payload["evidence"]),
                              raw, tuple(near))
        w = payload["witness"]
        detail = Case3SoftReport(x0, w["player"], w["action"], w["y_other"],
                                 w["r_star"], w["checks"])
        return CaseReport("case3soft", detail, raw, tuple(near))

    raise NoCaseMatched(f"no case matched: p(x0)={p0}, raw={raw}")


# ---------------------------------------------------------------------------
# difficult-case conditions


def _mass_and_rstar(game: GameSpec, player: int, action: int, y_other: np.ndarray):
    """Absorption mass and both conditional payoffs of (action, y_other)."""
    p = game.absorb_prob if player == 1 else game.absorb_prob.T
    row = p[action]
    mass = float(row @ y_other)
    if mass <= 0.0:
        return mass, None
    stars = []
    for j in (1, 2):
        r = game.safe_absorb_payoff(j) if player == 1 else game.safe_absorb_payoff(j).T
        stars.append(float((row * r[action]) @ y_other) / mass)
    return mass, tuple(stars)


def _good_response_lp(game: GameSpec, searcher: int, action: int, poly: SafePolytope,
                      v_searcher: float, tol: float):
    """Best absorbing-flux margin of `searcher` playing `action` against poly.

    Maximizes sum_b y(b) p(action,b) (r(action,b) - v) over y in the safe
    polytope with absorbing mass at least tol; None when no such y exists.
    """
    p = game.absorb_prob if searcher == 1 else game.absorb_prob.T
    r = game.safe_absorb_payoff(searcher) if searcher == 1 else game.safe_absorb_payoff(searcher).T
    d = p.shape[1]
    mass = p[action]
    if mass.max() <= 0.0:
        return None
    obj = mass * (r[action] - v_searcher)
    a_ub = np.vstack([-poly.ineq, -mass[None, :]])
    b_ub = np.concatenate([np.zeros(poly.ineq.shape[0]), [-tol]])
    res = linprog(-obj, A_ub=a_ub, b_ub=b_ub,
                  A_eq=np.ones((1, d)), b_eq=[1.0], bounds=[(0.0, 1.0)] * d,
                  method="highs")
    if not res.success:
        return None
    return float(obj @ res.x), np.asarray(res.x)


def _lift_witness(game: GameSpec, player: int, y_other: np.ndarray, v, tol: float):
    """Part-1 lift: pick the searcher's best absorbing action meeting (a),(b)."""
    v_own = v[player - 1]
    best = None
    for slack in (1e-9, 1e-6):
        for a in range(game.n_actions(player)):
            mass, stars = _mass_and_rstar(game, player, a, y_other)
            if mass <= tol or stars is None:
                continue
            own = stars[player - 1]
            if own < v_own - slack:
                continue
            if best is None or own > best[1]:
                best = (a, own, stars, mass)
        if best is not None:
            break
    if best is None:
        raise NoCaseMatched(
            f"witness lift failed for player {player}: averaging argument "
            "found no absorbing action above the minmax level"
        )
    a, _, stars, mass = best
    c_slack = []
    for a2 in range(game.n_actions(player)):
        m2, s2 = _mass_and_rstar(game, player, a2, y_other)
        if m2 > tol and s2 is not None:
            c_slack.append((a2, stars[player - 1] + tol - s2[player - 1]))
    checks = {
        "a_slack": mass - tol,
        "b_slack": [stars[0] - v[0], stars[1] - v[1]],
        "c_slack": c_slack,
    }
    return {
        "player": player,
        "action": a,
        "y_other": MixedAction.from_numeric(y_other, tol=1e-6),
        "r_star": stars,
        "checks": checks,
    }


def difficult_conditions(game: GameSpec, v, y1: SafePolytope, y2: SafePolytope,
                         tol: float = CLASSIFY_TOL):
    """Evaluate the three no-escape conditions on the safe polytopes.

    Condition 1: every profile in Y1 x Y2 is nonabsorbing (exact via vertex
    pairs, p being bilinear).  Conditions 2 and 3: neither player has an
    absorbing response against the other's safe set reaching her own minmax
    (one feasibility LP per action).  Returns (holds, payload): on failure
    the payload carries the witness in the (player, action, y_other) form,
    lifted so the no-better-absorbing-deviation property holds as well.
    """
    p = game.absorb_prob
    evidence = {}

    best_pair, best_p = None, 0.0
    for w1 in y1.vertices:
        for w2 in y2.vertices:
            val = float(w1 @ p @ w2)
            if val > best_p:
                best_p, best_pair = val, (w1, w2)
    evidence["condition1"] = {"max_absorption": best_p,
                              "argmax": None if best_pair is None else
                              (tuple(best_pair[0]), tuple(best_pair[1]))}
    if best_p > 1e-9:
        w1, w2 = best_pair
        witness = _lift_witness(game, 1, w2, v, tol)
        return False, {"witness": witness, "raw": evidence}

    for cond, searcher, poly in (("condition2", 2, y1), ("condition3", 1, y2)):
        margins = {}
        hit = None
        for a in range(game.n_actions(searcher)):
            out = _good_response_lp(game, searcher, a, poly, v[searcher - 1], tol)
            if out is None:
                margins[a] = None
                continue
            margin, y_star = out
            margins[a] = margin
            if margin >= -1e-9 and hit is None:
                hit = y_star
        evidence[cond] = margins
        if hit is not None:
            witness = _lift_witness(game, searcher, hit, v, tol)
            return False, {"witness": witness, "raw": evidence}

    return True, {"evidence": evidence, "raw": evidence}


# ---------------------------------------------------------------------------
# driver


@dataclass(frozen=True)
class PipelineResult:
    minmax: object
    aux: AuxiliaryGame
    v_inf: tuple
    trace: DiscountedTrace
    limit: LimitProfile
    case: CaseReport


def run_pipeline(game: GameSpec, epsilon: float, schedule=None,
                 tol: float = CLASSIFY_TOL) -> PipelineResult:
    """Full classification pipeline from a validated game to a CaseReport."""
    from .solvers import minmax_values

    rep = minmax_values(game, schedule)
    v = (min(max(rep.v1, 0.0), game.bound), min(max(rep.v2, 0.0), game.bound))
    aux = build_auxiliary(game, v, epsilon)
    v_inf = auxiliary_minmax(aux, schedule)
    trace = discounted_trace(aux, schedule)
    lim = limit_profile(trace, game)
    case = classify(game, aux, lim, v, epsilon, tol)
    return PipelineResult(rep, aux, v_inf, trace, lim, case)
