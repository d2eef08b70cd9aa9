"""Finite-phase strategy machines with stage counters and statistical triggers.

A machine plays a fixed mixed action per phase and moves between phases only
when a trigger fires.  Three trigger kinds exist: OutOfSupport reacts to a
single opponent action outside a whitelisted set, FrequencyTest reacts to a
block of opponent actions whose empirical frequencies drift from a reference
mixture, and StageExpiry reacts to a stage-count deadline.  Machines are
immutable; all execution state lives in MachineState so a single machine can
drive any number of concurrent evaluations.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .game import MixedAction


def hoeffding_threshold(n_actions: int, blocks: int, budget: float, block_length: int) -> float:
    """Per-action frequency threshold with union-bounded false-positive mass.

    Under truthful i.i.d. play, Hoeffding gives P(|f_a - q_a| > kappa) <=
    2 exp(-2 kappa^2 B) per action and block; the union over n_actions
    actions and `blocks` blocks stays below `budget` at this kappa.
    """
    if block_length < 1 or blocks < 1:
        raise ValueError("block length and block count must be positive")
    if not 0.0 < budget < 1.0:
        raise ValueError("false-positive budget must lie in (0, 1)")
    if n_actions < 1:
        raise ValueError("need at least one monitored action")
    return math.sqrt(math.log(2.0 * n_actions * blocks / budget) / (2.0 * block_length))


@dataclass(frozen=True)
class StatTestSpec:
    """Block frequency test against a reference mixture.

    The threshold must match the Hoeffding/union-bound formula for the
    declared budget; the constructor recomputes it rather than trusting the
    caller.
    """

    reference_action: MixedAction
    block_length: int
    threshold: float
    false_positive_budget: float
    blocks_monitored: int

    def __post_init__(self):
        expected = hoeffding_threshold(
            self.reference_action.weights.size,
            self.blocks_monitored,
            self.false_positive_budget,
            self.block_length,
        )
        if abs(self.threshold - expected) > 1e-12:
            raise ValueError(
                f"threshold {self.threshold!r} does not match the Hoeffding "
                f"formula value {expected!r}"
            )
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold!r}")


@dataclass(frozen=True)
class OutOfSupport:
    """Fires when the opponent plays an action outside `support`."""

    support: tuple

    def __post_init__(self):
        acts = tuple(self.support)
        if not acts or len(set(acts)) != len(acts) or list(acts) != sorted(acts):
            raise ValueError("support must be a sorted tuple of distinct actions")
        if any(not isinstance(a, int) or a < 0 for a in acts):
            raise ValueError("support entries must be nonnegative integers")
        object.__setattr__(self, "support", acts)


@dataclass(frozen=True)
class FrequencyTest:
    """Fires at a block boundary when empirical frequencies drift."""

    spec: StatTestSpec


@dataclass(frozen=True)
class StageExpiry:
    """Fires once the phase has lasted `stages` stages."""

    stages: int

    def __post_init__(self):
        if not isinstance(self.stages, int) or self.stages < 1:
            raise ValueError("stage deadline must be a positive integer")


_TRIGGER_ORDER = (OutOfSupport, FrequencyTest, StageExpiry)


@dataclass(frozen=True)
class Phase:
    """One mixed action plus the rules for leaving it.

    `transitions` maps triggers to target phase indices as an ordered tuple
    of (trigger, target) pairs; evaluation order is fixed by trigger kind
    (OutOfSupport, then FrequencyTest, then StageExpiry) regardless of the
    tuple order.  `duration` mirrors the StageExpiry deadline when present
    and is None for unbounded phases.
    """

    action: MixedAction
    duration: Optional[int]
    transitions: tuple = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "transitions", tuple(self.transitions))
        kinds = [type(t) for t, _ in self.transitions]
        if len(set(kinds)) != len(kinds):
            raise ValueError("at most one trigger of each kind per phase")
        for trig, target in self.transitions:
            if not isinstance(trig, _TRIGGER_ORDER):
                raise ValueError(f"unknown trigger type {type(trig).__name__}")
            if not isinstance(target, int):
                raise ValueError("transition targets must be phase indices")
        expiry = self.find(StageExpiry)
        if expiry is not None and self.duration != expiry[0].stages:
            raise ValueError("phase duration must equal its StageExpiry deadline")
        if expiry is None and self.duration is not None:
            raise ValueError("bounded duration requires a StageExpiry trigger")
        if not self.transitions and self.duration is not None:
            raise ValueError("terminal phases must be unbounded self-loops")

    def find(self, kind):
        for trig, target in self.transitions:
            if isinstance(trig, kind):
                return trig, target
        return None


@dataclass(frozen=True)
class MachineState:
    """Mutable-per-stage execution state: phase plus bounded counters."""

    phase: int
    stage: int = 0
    block_pos: int = 0
    blocks_done: int = 0
    counts: tuple = ()


@dataclass(frozen=True)
class StrategyMachine:
    player: int
    phases: tuple
    initial: int = 0

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        if self.player not in (1, 2):
            raise ValueError("player must be 1 or 2")
        if not self.phases:
            raise ValueError("machine needs at least one phase")
        if not 0 <= self.initial < len(self.phases):
            raise ValueError("initial phase index out of range")
        sizes = {p.action.weights.size for p in self.phases}
        if len(sizes) != 1:
            raise ValueError("all phases must mix over the same action set")
        for phase in self.phases:
            for trig, target in phase.transitions:
                if not 0 <= target < len(self.phases):
                    raise ValueError(f"transition target {target} out of range")
            oos = phase.find(OutOfSupport)
            freq = phase.find(FrequencyTest)
            if oos is not None and freq is not None:
                n_ref = freq[0].spec.reference_action.weights.size
                if any(a >= n_ref for a in oos[0].support):
                    raise ValueError("out-of-support set exceeds the monitored action set")

    @property
    def n_own_actions(self) -> int:
        return self.phases[0].action.weights.size

    @property
    def has_frequency_test(self) -> bool:
        return any(p.find(FrequencyTest) is not None for p in self.phases)

    def phase_action(self, phase_index: int) -> MixedAction:
        return self.phases[phase_index].action


def stationary_machine(player: int, action: MixedAction, name: str = "stationary") -> StrategyMachine:
    """Single unbounded phase playing `action` forever."""
    return StrategyMachine(player, (Phase(action, None, (), name),))


def initial_state(machine: StrategyMachine) -> MachineState:
    return _enter_phase(machine, machine.initial)


def _enter_phase(machine: StrategyMachine, index: int) -> MachineState:
    phase = machine.phases[index]
    freq = phase.find(FrequencyTest)
    counts = (0,) * freq[0].spec.reference_action.weights.size if freq else ()
    return MachineState(phase=index, stage=0, block_pos=0, blocks_done=0, counts=counts)


def advance(machine: StrategyMachine, state: MachineState, opponent_action: int):
    """One stage of execution after observing the opponent's realized action.

    Returns (next_state, fired) where fired is the trigger instance that
    moved the machine, or None.  Trigger precedence within a stage is
    OutOfSupport, then FrequencyTest, then StageExpiry; counters reset on
    every phase entry; the frequency test disarms after its monitored
    blocks are spent.
    """
    phase = machine.phases[state.phase]
    oos = phase.find(OutOfSupport)
    if oos is not None and opponent_action not in oos[0].support:
        return _enter_phase(machine, oos[1]), oos[0]
    block_pos = state.block_pos
    blocks_done = state.blocks_done
    counts = state.counts
    freq = phase.find(FrequencyTest)
    if freq is not None and blocks_done < freq[0].spec.blocks_monitored:
        spec = freq[0].spec
        lifted = list(counts)
        lifted[opponent_action] += 1
        block_pos += 1
        if block_pos == spec.block_length:
            ref = spec.reference_action.weights
            emp = np.asarray(lifted, dtype=float) / spec.block_length
            if float(np.max(np.abs(emp - ref))) > spec.threshold:
                return _enter_phase(machine, freq[1]), freq[0]
            blocks_done += 1
            block_pos = 0
            counts = (0,) * len(lifted)
        else:
            counts = tuple(lifted)
    stage = state.stage + 1
    expiry = phase.find(StageExpiry)
    if expiry is not None and stage >= expiry[0].stages:
        return _enter_phase(machine, expiry[1]), expiry[0]
    if phase.duration is None:
        stage = 0
    return MachineState(state.phase, stage, block_pos, blocks_done, counts), None


def check_against_game(machine: StrategyMachine, game) -> None:
    """Shape compatibility between a machine and a game's action sets."""
    own = game.n_actions(machine.player)
    opp = game.n_actions(3 - machine.player)
    if machine.n_own_actions != own:
        raise ValueError(
            f"machine mixes over {machine.n_own_actions} actions, game has {own}"
        )
    for phase in machine.phases:
        oos = phase.find(OutOfSupport)
        if oos is not None and any(a >= opp for a in oos[0].support):
            raise ValueError("out-of-support set references a missing opponent action")
        freq = phase.find(FrequencyTest)
        if freq is not None and freq[0].spec.reference_action.weights.size != opp:
            raise ValueError("frequency test reference has the wrong action count")


def _trigger_payload(trig) -> dict:
    if isinstance(trig, OutOfSupport):
        return {"kind": "out_of_support", "support": list(trig.support)}
    if isinstance(trig, FrequencyTest):
        spec = trig.spec
        return {
            "kind": "frequency_test",
            "reference": [float(w) for w in spec.reference_action.weights],
            "block_length": spec.block_length,
            "threshold": spec.threshold,
            "false_positive_budget": spec.false_positive_budget,
            "blocks_monitored": spec.blocks_monitored,
        }
    return {"kind": "stage_expiry", "stages": trig.stages}


def _trigger_from_payload(payload: dict):
    kind = payload["kind"]
    if kind == "out_of_support":
        return OutOfSupport(tuple(int(a) for a in payload["support"]))
    if kind == "frequency_test":
        spec = StatTestSpec(
            MixedAction.from_numeric(payload["reference"]),
            int(payload["block_length"]),
            float(payload["threshold"]),
            float(payload["false_positive_budget"]),
            int(payload["blocks_monitored"]),
        )
        return FrequencyTest(spec)
    if kind == "stage_expiry":
        return StageExpiry(int(payload["stages"]))
    raise ValueError(f"unknown trigger kind {kind!r}")


def machine_to_payload(machine: StrategyMachine) -> dict:
    return {
        "player": machine.player,
        "initial": machine.initial,
        "phases": [
            {
                "name": phase.name,
                "action": [float(w) for w in phase.action.weights],
                "duration": phase.duration,
                "transitions": [
                    {"trigger": _trigger_payload(trig), "target": target}
                    for trig, target in phase.transitions
                ],
            }
            for phase in machine.phases
        ],
    }


def machine_from_payload(payload: dict) -> StrategyMachine:
    phases = tuple(
        Phase(
            MixedAction.from_numeric(entry["action"]),
            entry["duration"],
            tuple(
                (_trigger_from_payload(t["trigger"]), int(t["target"]))
                for t in entry["transitions"]
            ),
            entry.get("name", ""),
        )
        for entry in payload["phases"]
    )
    return StrategyMachine(int(payload["player"]), phases, int(payload["initial"]))
