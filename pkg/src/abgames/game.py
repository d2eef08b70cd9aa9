"""Model of two-player absorbing games with tail-measurable payoffs.

A game is given by finite action sets for both players, a per-cell absorption
probability table p, absorbing payoff tables r1/r2 defined exactly on the
cells with p > 0, and one tail-measurable payoff description per player for
runs that never absorb.  Payoffs live in [0, payoff_bound].

Stage indices are 1-based throughout.  Action tables are numpy arrays with
player 1 on rows and player 2 on columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    EmptyWindow,
    GameValidationError,
    NonAbsorbingProfile,
    UnsupportedExactEvaluation,
)

NORMALIZATION_TOL = 1e-12
SUPPORT_ZERO = 1e-15
DEFAULT_WINDOW = 0.5


# ---------------------------------------------------------------------------
# tail payoff descriptions


class PayoffSpec:
    """Base class for tail-measurable payoff descriptions."""

    declared_minmax: Optional[float]


@dataclass(frozen=True, eq=False)
class Constant(PayoffSpec):
    """Every nonabsorbed run pays the same value."""

    value: float
    declared_minmax: Optional[float] = None


@dataclass(frozen=True, eq=False)
class LimsupAverage(PayoffSpec):
    """Limsup of running averages of stage values."""

    stage_values: np.ndarray
    declared_minmax: Optional[float] = None


@dataclass(frozen=True, eq=False)
class EvenStageLimsupAverage(PayoffSpec):
    """Limsup of running averages taken along even stages only."""

    stage_values: np.ndarray
    declared_minmax: Optional[float] = None


@dataclass(frozen=True, eq=False)
class LimsupStage(PayoffSpec):
    """Limsup of the raw stage value sequence."""

    stage_values: np.ndarray
    declared_minmax: Optional[float] = None


@dataclass(frozen=True, eq=False)
class Buchi(PayoffSpec):
    """hit_payoff when some profile in `profiles` occurs infinitely often."""

    profiles: frozenset
    hit_payoff: float
    miss_payoff: float
    declared_minmax: Optional[float] = None


@dataclass(frozen=True, eq=False)
class CoBuchi(PayoffSpec):
    """finite_payoff when profiles in `profiles` occur only finitely often."""

    profiles: frozenset
    finite_payoff: float
    infinite_payoff: float
    declared_minmax: Optional[float] = None


def payoff_values_range(spec: PayoffSpec):
    """(min, max) over the values a spec can emit."""
    if isinstance(spec, Constant):
        return spec.value, spec.value
    if isinstance(spec, (LimsupAverage, EvenStageLimsupAverage, LimsupStage)):
        return float(np.min(spec.stage_values)), float(np.max(spec.stage_values))
    if isinstance(spec, Buchi):
        lo, hi = sorted((spec.hit_payoff, spec.miss_payoff))
        return lo, hi
    if isinstance(spec, CoBuchi):
        lo, hi = sorted((spec.finite_payoff, spec.infinite_payoff))
        return lo, hi
    raise TypeError(f"unknown payoff spec {type(spec).__name__}")


# ---------------------------------------------------------------------------
# mixed actions and profiles


@dataclass(frozen=True, eq=False)
class MixedAction:
    """Probability vector over one player's actions.

    Entries below SUPPORT_ZERO are treated as exact zeros; the sum must be
    within NORMALIZATION_TOL of one.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).copy()
        if w.ndim != 1 or w.size == 0:
            raise ValueError("mixed action must be a nonempty vector")
        if np.any(w < -SUPPORT_ZERO):
            raise ValueError(f"negative weight in mixed action: {w}")
        w[w < SUPPORT_ZERO] = 0.0
        if abs(w.sum() - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"mixed action sums to {w.sum()!r}, not 1")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @staticmethod
    def pure(index: int, size: int) -> "MixedAction":
        w = np.zeros(size)
        w[index] = 1.0
        return MixedAction(w)

    @staticmethod
    def from_numeric(weights, tol: float = 1e-9) -> "MixedAction":
        """Build from solver output, forgiving roundoff up to tol."""
        w = np.asarray(weights, dtype=float).copy()
        if np.any(w < -tol):
            raise ValueError(f"negative weight in mixed action: {w}")
        w[w < 0.0] = 0.0
        s = w.sum()
        if abs(s - 1.0) > tol:
            raise ValueError(f"mixed action sums to {s!r}, not 1")
        return MixedAction(w / s)

    @staticmethod
    def uniform(size: int) -> "MixedAction":
        return MixedAction(np.full(size, 1.0 / size))

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0.0)

    @property
    def is_pure(self) -> bool:
        return self.support.size == 1

    def __repr__(self):
        return f"MixedAction({np.array2string(self.weights, precision=6)})"


@dataclass(frozen=True, eq=False)
class MixedProfile:
    """A mixed action for each player."""

    x1: MixedAction
    x2: MixedAction

    def joint(self) -> np.ndarray:
        return np.outer(self.x1.weights, self.x2.weights)

    @property
    def is_pure(self) -> bool:
        return self.x1.is_pure and self.x2.is_pure

    def pure_cell(self):
        return int(self.x1.support[0]), int(self.x2.support[0])


@dataclass(frozen=True)
class RunPrefix:
    """Finite prefix of a play: joint action indices, absorption stage if any."""

    actions: tuple
    absorbed_at: Optional[int] = None

    def __post_init__(self):
        if self.absorbed_at is not None:
            if not 1 <= self.absorbed_at <= len(self.actions):
                raise ValueError("absorbed_at outside the recorded prefix")

    def __len__(self):
        return len(self.actions)


# ---------------------------------------------------------------------------
# game spec and validation


@dataclass(frozen=True, eq=False)
class GameSpec:
    """Complete description of an absorbing game."""

    actions1: tuple
    actions2: tuple
    absorb_prob: np.ndarray
    absorb_payoff1: np.ndarray
    absorb_payoff2: np.ndarray
    payoff1: PayoffSpec
    payoff2: PayoffSpec
    bound: float = 1.0
    name: str = ""

    def __post_init__(self):
        for attr in ("absorb_prob", "absorb_payoff1", "absorb_payoff2"):
            arr = np.array(getattr(self, attr), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, attr, arr)
        object.__setattr__(self, "actions1", tuple(self.actions1))
        object.__setattr__(self, "actions2", tuple(self.actions2))

    @property
    def shape(self):
        return len(self.actions1), len(self.actions2)

    @property
    def absorbing_mask(self) -> np.ndarray:
        return self.absorb_prob > 0.0

    def absorb_payoff(self, player: int) -> np.ndarray:
        return self.absorb_payoff1 if player == 1 else self.absorb_payoff2

    def tail_payoff(self, player: int) -> PayoffSpec:
        return self.payoff1 if player == 1 else self.payoff2

    def safe_absorb_payoff(self, player: int) -> np.ndarray:
        """Absorbing payoff table with zeros on nonabsorbing cells."""
        return np.where(self.absorbing_mask, np.nan_to_num(self.absorb_payoff(player)), 0.0)

    def actions(self, player: int) -> tuple:
        return self.actions1 if player == 1 else self.actions2

    def n_actions(self, player: int) -> int:
        return len(self.actions(player))


def _check_stage_table(name, table, shape, bound, violations):
    arr = np.asarray(table, dtype=float)
    if arr.shape != shape:
        violations.append(f"{name} has shape {arr.shape}, expected {shape}")
        return
    if not np.all(np.isfinite(arr)):
        violations.append(f"{name} contains non-finite entries")
    elif np.any(arr < -NORMALIZATION_TOL) or np.any(arr > bound + NORMALIZATION_TOL):
        violations.append(f"{name} leaves [0, {bound}]")


def _check_payoff_spec(name, spec, shape, bound, violations):
    if isinstance(spec, Constant):
        if not 0.0 <= spec.value <= bound:
            violations.append(f"{name} constant {spec.value} leaves [0, {bound}]")
    elif isinstance(spec, (LimsupAverage, EvenStageLimsupAverage, LimsupStage)):
        _check_stage_table(f"{name} stage values", spec.stage_values, shape, bound, violations)
    elif isinstance(spec, (Buchi, CoBuchi)):
        lo, hi = payoff_values_range(spec)
        if lo < 0.0 or hi > bound:
            violations.append(f"{name} payoffs leave [0, {bound}]")
        for cell in spec.profiles:
            i, j = cell
            if not (0 <= i < shape[0] and 0 <= j < shape[1]):
                violations.append(f"{name} references cell {cell} outside the table")
    else:
        violations.append(f"{name} has unknown payoff type {type(spec).__name__}")
    declared = spec.declared_minmax
    if declared is not None and not 0.0 <= declared <= bound:
        violations.append(f"{name} declared minmax {declared} leaves [0, {bound}]")


def validate_game(game: GameSpec) -> GameSpec:
    """Check all structural constraints; return the game or raise with every violation."""
    violations = []
    m, n = len(game.actions1), len(game.actions2)
    if m == 0 or n == 0:
        violations.append("empty action set")
    if len(set(game.actions1)) != m or len(set(game.actions2)) != n:
        violations.append("duplicate action labels")
    if game.bound <= 0 or not math.isfinite(game.bound):
        violations.append(f"payoff bound {game.bound} must be positive and finite")
    p = game.absorb_prob
    if p.shape != (m, n):
        violations.append(f"absorb_prob has shape {p.shape}, expected {(m, n)}")
        raise GameValidationError(violations)
    if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        violations.append("absorption probabilities leave [0, 1]")
    for player in (1, 2):
        r = game.absorb_payoff(player)
        if r.shape != (m, n):
            violations.append(f"absorb_payoff{player} has shape {r.shape}, expected {(m, n)}")
            continue
        on = game.absorbing_mask
        vals = r[on]
        if np.any(~np.isfinite(vals)):
            violations.append(f"absorb_payoff{player} undefined on an absorbing cell")
        elif vals.size and (vals.min() < 0.0 or vals.max() > game.bound + NORMALIZATION_TOL):
            violations.append(f"absorb_payoff{player} leaves [0, {game.bound}]")
        if np.any(np.isfinite(r[~on])):
            # tolerated but suspicious: payoff on a cell that never absorbs
            pass
        _check_payoff_spec(f"payoff{player}", game.tail_payoff(player), (m, n), game.bound, violations)
    if violations:
        raise GameValidationError(violations)
    return game


# ---------------------------------------------------------------------------
# stationary evaluation


def absorption_prob(game: GameSpec, profile: MixedProfile) -> float:
    """Per-stage absorption probability under i.i.d. play of the profile."""
    return float(np.sum(profile.joint() * game.absorb_prob))


def conditional_absorbing_payoff(game: GameSpec, profile: MixedProfile, player: int) -> float:
    """Expected absorbing payoff conditional on absorption, r*_i(x).

    Scale-invariant in the absorption probabilities: scaling p by c > 0
    leaves the value unchanged.
    """
    joint = profile.joint()
    flux = joint * game.absorb_prob
    total = flux.sum()
    if total <= 0.0:
        raise NonAbsorbingProfile("profile has zero absorption probability")
    return float(np.sum(flux * game.safe_absorb_payoff(player)) / total)


def iid_tail_value(spec: PayoffSpec, profile: MixedProfile, joint: Optional[np.ndarray] = None) -> float:
    """Exact tail payoff under i.i.d. play of a nonabsorbing profile.

    Supported exactly: Constant, LimsupAverage, EvenStageLimsupAverage, and
    any variant under a pure profile.  Buchi/CoBuchi/LimsupStage with
    nondegenerate randomness raise UnsupportedExactEvaluation.
    """
    if joint is None:
        joint = profile.joint()
    if isinstance(spec, Constant):
        return spec.value
    if isinstance(spec, (LimsupAverage, EvenStageLimsupAverage)):
        # strong law of large numbers along all stages or along even stages
        return float(np.sum(joint * spec.stage_values))
    if profile.is_pure:
        cell = profile.pure_cell()
        if isinstance(spec, LimsupStage):
            return float(spec.stage_values[cell])
        if isinstance(spec, Buchi):
            return spec.hit_payoff if cell in spec.profiles else spec.miss_payoff
        if isinstance(spec, CoBuchi):
            return spec.infinite_payoff if cell in spec.profiles else spec.finite_payoff
    raise UnsupportedExactEvaluation(
        f"{type(spec).__name__} has no exact value under nondegenerate i.i.d. play"
    )


def stationary_payoff(game: GameSpec, profile: MixedProfile, player: int) -> float:
    """Exact payoff of i.i.d. play of `profile`: r* when absorbing, tail value otherwise."""
    if absorption_prob(game, profile) > 0.0:
        return conditional_absorbing_payoff(game, profile, player)
    return iid_tail_value(game.tail_payoff(player), profile)


# ---------------------------------------------------------------------------
# run evaluation


def window_start(length: int, window: float) -> int:
    """First 1-based stage inside the trailing window of the given fraction."""
    if length <= 0:
        raise EmptyWindow("empty run prefix")
    return int(math.floor((1.0 - window) * length)) + 1


def evaluate_run(
    prefix: RunPrefix,
    spec: PayoffSpec,
    window: float = DEFAULT_WINDOW,
    absorbing_values: Optional[np.ndarray] = None,
):
    """Payoff of a recorded run prefix.

    Absorbed runs pay the absorbing table at the absorption profile (exact).
    Unabsorbed runs get the window estimator of the tail payoff over the
    trailing `window` fraction of stages.  Returns (value, exact_flag).
    """
    if not 0.0 < window <= 1.0:
        raise ValueError("window fraction must lie in (0, 1]")
    if prefix.absorbed_at is not None:
        if absorbing_values is None:
            raise ValueError("absorbed prefix needs the absorbing payoff table")
        cell = prefix.actions[prefix.absorbed_at - 1]
        value = float(absorbing_values[cell])
        if not math.isfinite(value):
            raise ValueError(f"absorbing payoff undefined at {cell}")
        return value, True
    if isinstance(spec, Constant):
        return spec.value, True
    first = window_start(len(prefix), window)
    stages = range(first, len(prefix) + 1)
    cells = [prefix.actions[t - 1] for t in stages]
    if not cells:
        raise EmptyWindow("no stages in window")
    if isinstance(spec, LimsupAverage):
        vals = [spec.stage_values[c] for c in cells]
        return float(np.mean(vals)), False
    if isinstance(spec, EvenStageLimsupAverage):
        vals = [spec.stage_values[prefix.actions[t - 1]] for t in stages if t % 2 == 0]
        if not vals:
            raise EmptyWindow("no even stages in window")
        return float(np.mean(vals)), False
    if isinstance(spec, LimsupStage):
        return float(max(spec.stage_values[c] for c in cells)), False
    if isinstance(spec, Buchi):
        hit = any(c in spec.profiles for c in cells)
        return (spec.hit_payoff if hit else spec.miss_payoff), False
    if isinstance(spec, CoBuchi):
        hit = any(c in spec.profiles for c in cells)
        return (spec.infinite_payoff if hit else spec.finite_payoff), False
    raise TypeError(f"unknown payoff spec {type(spec).__name__}")


def truncated_iid_value(
    spec: PayoffSpec,
    joint: np.ndarray,
    horizon: int,
    window: float = DEFAULT_WINDOW,
) -> float:
    """Exact expectation of the window estimator under i.i.d. play.

    This is what evaluate_run converges to in mean over runs of length
    `horizon` that never absorb; used as the deterministic truncation
    fallback when no exact tail value exists.
    """
    first = window_start(horizon, window)
    n_stages = horizon - first + 1
    if isinstance(spec, Constant):
        return spec.value
    if isinstance(spec, LimsupAverage):
        return float(np.sum(joint * spec.stage_values))
    if isinstance(spec, EvenStageLimsupAverage):
        if sum(1 for t in range(first, horizon + 1) if t % 2 == 0) == 0:
            raise EmptyWindow("no even stages in window")
        return float(np.sum(joint * spec.stage_values))
    if isinstance(spec, LimsupStage):
        values = np.asarray(spec.stage_values, dtype=float).ravel()
        weights = np.asarray(joint, dtype=float).ravel()
        order = np.argsort(values)
        values, weights = values[order], weights[order]
        cdf = np.cumsum(weights)
        cdf = np.clip(cdf / cdf[-1], 0.0, 1.0)
        prev = 0.0
        expect = 0.0
        for v, c in zip(values, cdf):
            top = c ** n_stages
            expect += v * (top - prev)
            prev = top
        return float(expect)
    if isinstance(spec, (Buchi, CoBuchi)):
        mask = np.zeros_like(joint, dtype=bool)
        for cell in spec.profiles:
            mask[cell] = True
        miss_all = float((1.0 - joint[mask].sum()) ** n_stages)
        if isinstance(spec, Buchi):
            return spec.miss_payoff * miss_all + spec.hit_payoff * (1.0 - miss_all)
        return spec.finite_payoff * miss_all + spec.infinite_payoff * (1.0 - miss_all)
    raise TypeError(f"unknown payoff spec {type(spec).__name__}")
