"""Exact evaluation of machine profiles and equilibrium certificates.

The joint play of two strategy machines induces a Markov chain over pairs of
machine states.  Absorption, expected absorbing payoffs, and hitting
probabilities of nonabsorbing tails all come from linear systems on that
chain.  Frequency tests are handled at block granularity: conditional on a
block completing, the monitored action counts are multinomial, so the firing
probability at the block boundary is a conditional-binomial chain rather
than an explosion of count states.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.sparse.linalg import spsolve
from scipy.stats import binom

from .errors import (
    EmptyWindow,
    InternalInconsistency,
    StateCapExceeded,
    UnsupportedExactEvaluation,
)
from .game import (
    DEFAULT_WINDOW,
    Buchi,
    CoBuchi,
    Constant,
    EvenStageLimsupAverage,
    GameSpec,
    LimsupAverage,
    LimsupStage,
    MixedAction,
    MixedProfile,
    iid_tail_value,
    truncated_iid_value,
    window_start,
)
from .machines import (
    FrequencyTest,
    MachineState,
    OutOfSupport,
    Phase,
    StageExpiry,
    StrategyMachine,
    _enter_phase,
    advance,
    check_against_game,
    initial_state,
    machine_to_payload,
    stationary_machine,
)
from . import simkernel

STATE_CAP = 100_000
TRUNCATION_HORIZON = 100_000
CERT_SLACK = 1e-6
DEFAULT_GRID_RESOLUTION = 0.05
Z99 = 2.5758293035489004  # two-sided 99% normal quantile


# ---------------------------------------------------------------------------
# evaluation result


@dataclass(frozen=True)
class EvaluationResult:
    """Outcome of evaluating a pair of machines on a game.

    `expected_absorption_stage` conditions on absorption and is inf when the
    play never absorbs.  `phase_occupation` maps (phase1, phase2) pairs to
    expected stages spent there; nonabsorbing recurrent pairs get inf.
    """

    payoffs: tuple
    absorption_probability: float
    expected_absorption_stage: float
    phase_occupation: dict
    method: str

    def __post_init__(self):
        for u in self.payoffs:
            if not -1e-6 <= u <= 1.0 + 1e-6:
                raise InternalInconsistency(f"machine payoff {u} outside [0, 1]")
        if not -1e-6 <= self.absorption_probability <= 1.0 + 1e-6:
            raise InternalInconsistency(
                f"absorption probability {self.absorption_probability} outside [0, 1]"
            )
        if self.method not in ("exact", "truncated"):
            raise ValueError(f"unknown method tag {self.method!r}")


# ---------------------------------------------------------------------------
# block trigger probability

_TAU_CACHE = {}


def block_trigger_probability(spec, counted) -> float:
    """Probability a completed block trips the frequency test.

    `counted` is the per-action distribution of each counted observation
    (i.i.d. within the block).  The multinomial count vector is processed as
    a chain of conditional binomials, tracking the probability that every
    prefix stays inside the per-action acceptance band; the acceptance test
    reproduces the runtime comparison |counts/B - ref| > threshold exactly.
    """
    counted = np.asarray(counted, dtype=float)
    key = (
        spec.block_length,
        float(spec.threshold),
        spec.reference_action.weights.tobytes(),
        counted.tobytes(),
    )
    if key in _TAU_CACHE:
        return _TAU_CACHE[key]
    b = spec.block_length
    ref = spec.reference_action.weights
    axis = np.arange(b + 1)
    ok = [np.abs(axis / b - ref[a]) <= spec.threshold for a in range(ref.size)]
    g = np.zeros(b + 1)
    g[0] = 1.0
    remaining = 1.0
    for a in range(ref.size):
        new = np.zeros(b + 1)
        if a == ref.size - 1:
            for s in range(b + 1):
                if g[s] != 0.0 and ok[a][b - s]:
                    new[b] += g[s]
        else:
            cond = 0.0 if remaining <= 0.0 else min(max(counted[a] / remaining, 0.0), 1.0)
            for s in range(b + 1):
                if g[s] == 0.0:
                    continue
                n_max = b - s
                pmf = binom.pmf(np.arange(n_max + 1), n_max, cond)
                new[s : b + 1] += g[s] * np.where(ok[a][: n_max + 1], pmf, 0.0)
            remaining -= counted[a]
        g = new
    tau = 1.0 - min(max(float(g[b]), 0.0), 1.0)
    _TAU_CACHE[key] = tau
    return tau


# ---------------------------------------------------------------------------
# product chain construction


def _armed_test(machine: StrategyMachine, state: MachineState):
    found = machine.phases[state.phase].find(FrequencyTest)
    if found is None:
        return None
    if state.blocks_done >= found[0].spec.blocks_monitored:
        return None
    return found[0].spec, found[1]


def _expand_plain(game, m1, m2, s1, s2):
    p = game.absorb_prob
    r1 = game.safe_absorb_payoff(1)
    r2 = game.safe_absorb_payoff(2)
    x1 = m1.phases[s1.phase].action.weights
    x2 = m2.phases[s2.phase].action.weights
    pabs = 0.0
    f1 = 0.0
    f2 = 0.0
    targets = {}
    for a1 in np.flatnonzero(x1):
        for a2 in np.flatnonzero(x2):
            w = float(x1[a1] * x2[a2])
            pr = float(p[a1, a2])
            pabs += w * pr
            f1 += w * pr * r1[a1, a2]
            f2 += w * pr * r2[a1, a2]
            survive = w * (1.0 - pr)
            if survive > 0.0:
                ns1, _ = advance(m1, s1, int(a2))
                ns2, _ = advance(m2, s2, int(a1))
                key = (ns1, ns2)
                targets[key] = targets.get(key, 0.0) + survive
    return pabs, f1, f2, targets


def _expand_block(game, m1, m2, s1, s2, armed, tested):
    """Transitions out of a product state with one armed frequency test.

    Exactness requires the untested machine to hold its phase for the rest
    of the block: its expiry must not land mid-block and its out-of-support
    watch must never fire against the tested player's mixture.
    """
    spec, freq_target = armed
    p = game.absorb_prob
    r1 = game.safe_absorb_payoff(1)
    r2 = game.safe_absorb_payoff(2)
    if tested == 1:
        mt, st, mu, su = m1, s1, m2, s2
        pt, rt1, rt2 = p, r1, r2
    else:
        mt, st, mu, su = m2, s2, m1, s1
        pt, rt1, rt2 = p.T, r1.T, r2.T
    pht = mt.phases[st.phase]
    phu = mu.phases[su.phase]
    xt = pht.action.weights
    xu = phu.action.weights
    stages_left = spec.block_length - st.block_pos
    oos_u = phu.find(OutOfSupport)
    if oos_u is not None:
        watched = set(oos_u[0].support)
        if any(xt[a] > 0.0 for a in range(xt.size) if a not in watched):
            raise UnsupportedExactEvaluation(
                "opponent's out-of-support watch can fire inside a test block"
            )
    if phu.duration is not None and phu.duration - su.stage < stages_left:
        raise UnsupportedExactEvaluation("opponent phase expires inside a test block")
    if pht.duration is not None and pht.duration - st.stage < stages_left:
        raise UnsupportedExactEvaluation("tested phase expires inside its own block")

    joint = np.outer(xt, xu)
    pabs = float(np.sum(joint * pt))
    f1 = float(np.sum(joint * pt * rt1))
    f2 = float(np.sum(joint * pt * rt2))
    pbar = xt @ pt
    survive = xu * (1.0 - pbar)
    oos_t = pht.find(OutOfSupport)
    if oos_t is not None:
        on_support = np.zeros(xu.size, dtype=bool)
        on_support[list(oos_t[0].support)] = True
    else:
        on_support = np.ones(xu.size, dtype=bool)
    q_out = float(survive[~on_support].sum())
    cont_vec = np.where(on_support, survive, 0.0)
    q_cont = float(cont_vec.sum())

    at_any = int(np.flatnonzero(xt)[0])
    nsu, _ = advance(mu, su, at_any)
    targets = {}

    def add(nst, weight):
        key = (nst, nsu) if tested == 1 else (nsu, nst)
        targets[key] = targets.get(key, 0.0) + weight

    if q_out > 0.0:
        add(_enter_phase(mt, oos_t[1]), q_out)
    if q_cont > 0.0:
        stage_next = st.stage + 1 if pht.duration is not None else 0
        if stages_left == 1:
            tau = block_trigger_probability(spec, cont_vec / q_cont)
            if tau > 0.0:
                add(_enter_phase(mt, freq_target), q_cont * tau)
            keep = q_cont * (1.0 - tau)
            if keep > 0.0:
                if pht.duration is not None and stage_next >= pht.duration:
                    nst = _enter_phase(mt, pht.find(StageExpiry)[1])
                else:
                    nst = MachineState(st.phase, stage_next, 0, st.blocks_done + 1, st.counts)
                add(nst, keep)
        else:
            nst = MachineState(
                st.phase, stage_next, st.block_pos + 1, st.blocks_done, st.counts
            )
            add(nst, q_cont)
    return pabs, f1, f2, targets


def _build_chain(m1, m2, game, state_cap):
    nodes = [(initial_state(m1), initial_state(m2))]
    index = {nodes[0]: 0}
    edges = []
    pabs = []
    flux1 = []
    flux2 = []
    i = 0
    while i < len(nodes):
        s1, s2 = nodes[i]
        armed1 = _armed_test(m1, s1)
        armed2 = _armed_test(m2, s2)
        if armed1 is not None and armed2 is not None:
            raise UnsupportedExactEvaluation(
                "both machines run frequency tests at once"
            )
        if armed1 is not None:
            row = _expand_block(game, m1, m2, s1, s2, armed1, tested=1)
        elif armed2 is not None:
            row = _expand_block(game, m1, m2, s1, s2, armed2, tested=2)
        else:
            row = _expand_plain(game, m1, m2, s1, s2)
        pa, f1, f2, targets = row
        resolved = {}
        for key, weight in targets.items():
            if key not in index:
                index[key] = len(nodes)
                nodes.append(key)
                if len(nodes) > state_cap:
                    raise StateCapExceeded(
                        f"machine product chain exceeds {state_cap} states"
                    )
            resolved[index[key]] = resolved.get(index[key], 0.0) + weight
        pabs.append(pa)
        flux1.append(f1)
        flux2.append(f2)
        edges.append(resolved)
        i += 1
    return nodes, edges, np.asarray(pabs), np.asarray(flux1), np.asarray(flux2)


# ---------------------------------------------------------------------------
# tail evaluation


def _node_profile(m1, m2, node) -> MixedProfile:
    s1, s2 = node
    return MixedProfile(m1.phases[s1.phase].action, m2.phases[s2.phase].action)


def _geometric_power_sum(c: np.ndarray, m: int):
    """(sum_{t=0}^{m} c^t, c^{m+1}) by doubling."""
    eye = np.eye(c.shape[0])
    if m == 0:
        return eye, c.copy()
    if m % 2 == 1:
        half_sum, half_pow = _geometric_power_sum(c, (m - 1) // 2)
        return half_sum + half_pow @ half_sum, half_pow @ half_pow
    prev_sum, prev_pow = _geometric_power_sum(c, m - 1)
    return prev_sum + prev_pow, prev_pow @ c


def _recurrent_class_values(game, m1, m2, members, nodes, edges, horizon):
    """Window-averaged tail payoffs per entry state of a recurrent class.

    The class is closed and nonabsorbing, so play cycles inside it forever;
    payoffs use the expected joint action mixture over the trailing window,
    mirroring the run-prefix estimator.
    """
    local = {s: k for k, s in enumerate(members)}
    size = len(members)
    c = np.zeros((size, size))
    for s in members:
        for t, w in edges[s].items():
            c[local[s], local[t]] = w
    first = window_start(horizon, 0.5)
    width = horizon - first + 1
    series, _ = _geometric_power_sum(c, horizon - first)
    window_avg = (np.linalg.matrix_power(c, first - 1) @ series) / width
    joints = [np.asarray(_node_profile(m1, m2, nodes[s]).joint()) for s in members]
    values = {}
    for s in members:
        mean_joint = np.zeros_like(joints[0])
        for t in range(size):
            mean_joint += window_avg[local[s], t] * joints[t]
        values[s] = tuple(
            truncated_iid_value(game.tail_payoff(player), mean_joint, horizon)
            for player in (1, 2)
        )
    return values


def exact_profile_value(
    m1: StrategyMachine,
    m2: StrategyMachine,
    game: GameSpec,
    state_cap: int = STATE_CAP,
    horizon: int = TRUNCATION_HORIZON,
) -> EvaluationResult:
    """Payoffs, absorption statistics, and occupation of a machine pair.

    Builds the finite product chain, solves for expected visits and
    absorption, and values nonabsorbing tails exactly when they are
    single-state with a supported i.i.d. payoff; anything else is valued by
    the deterministic window truncation and tagged "truncated".
    """
    if m1.player != 1 or m2.player != 2:
        raise ValueError("machines must be passed as (player 1, player 2)")
    check_against_game(m1, game)
    check_against_game(m2, game)
    nodes, edges, pabs, flux1, flux2 = _build_chain(m1, m2, game, state_cap)
    n = len(nodes)

    rows, cols, vals = [], [], []
    for s, targets in enumerate(edges):
        for t, w in targets.items():
            rows.append(s)
            cols.append(t)
            vals.append(w)
    adjacency = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    n_comp, labels = csgraph.connected_components(
        adjacency, directed=True, connection="strong"
    )
    comp_closed = np.ones(n_comp, dtype=bool)
    comp_absorbing = np.zeros(n_comp, dtype=bool)
    for s in range(n):
        if pabs[s] > 0.0:
            comp_absorbing[labels[s]] = True
        for t in edges[s]:
            if labels[t] != labels[s]:
                comp_closed[labels[s]] = False

    method = "exact"
    tail_values = {}
    for comp in range(n_comp):
        if not comp_closed[comp] or comp_absorbing[comp]:
            continue
        members = [s for s in range(n) if labels[s] == comp]
        if len(members) == 1:
            s = members[0]
            profile = _node_profile(m1, m2, nodes[s])
            vals_s = []
            for player in (1, 2):
                spec = game.tail_payoff(player)
                try:
                    vals_s.append(iid_tail_value(spec, profile))
                except UnsupportedExactEvaluation:
                    vals_s.append(truncated_iid_value(spec, profile.joint(), horizon))
                    method = "truncated"
            tail_values[s] = tuple(vals_s)
        else:
            method = "truncated"
            tail_values.update(
                _recurrent_class_values(game, m1, m2, members, nodes, edges, horizon)
            )

    tail_set = set(tail_values)
    phase_pair = [(s1.phase, s2.phase) for s1, s2 in nodes]

    if 0 in tail_set:
        occupation = {phase_pair[0]: math.inf}
        return EvaluationResult(
            payoffs=tail_values[0],
            absorption_probability=0.0,
            expected_absorption_stage=math.inf,
            phase_occupation=occupation,
            method=method,
        )

    transient = [s for s in range(n) if s not in tail_set]
    tindex = {s: k for k, s in enumerate(transient)}
    tn = len(transient)
    q_rows, q_cols, q_vals = [], [], []
    hit_rows = {}
    for s in transient:
        for t, w in edges[s].items():
            if t in tail_set:
                hit_rows.setdefault(t, []).append((tindex[s], w))
            else:
                q_rows.append(tindex[s])
                q_cols.append(tindex[t])
                q_vals.append(w)
    q = sp.csc_matrix((q_vals, (q_rows, q_cols)), shape=(tn, tn))
    iq = sp.identity(tn, format="csc") - q
    pa = pabs[transient]
    f1 = flux1[transient]
    f2 = flux2[transient]

    absorb_prob_vec = spsolve(iq, pa)
    absorb_prob_vec = np.atleast_1d(absorb_prob_vec)
    stage_mass = spsolve(iq, pa + q @ absorb_prob_vec)
    stage_mass = np.atleast_1d(stage_mass)
    e0 = np.zeros(tn)
    e0[tindex[0]] = 1.0
    visits = np.atleast_1d(spsolve(iq.T.tocsc(), e0))

    absorption = float(visits @ pa)
    payoff1 = float(visits @ f1)
    payoff2 = float(visits @ f2)
    occupation = {}
    for s in transient:
        key = phase_pair[s]
        occupation[key] = occupation.get(key, 0.0) + float(visits[tindex[s]])
    for tail_state, entries in hit_rows.items():
        mass = sum(visits[k] * w for k, w in entries)
        if mass <= 0.0:
            continue
        v1, v2 = tail_values[tail_state]
        payoff1 += mass * v1
        payoff2 += mass * v2
        occupation[phase_pair[tail_state]] = math.inf

    if absorption > 1e-15:
        expected_stage = float(stage_mass[tindex[0]]) / absorption
    else:
        expected_stage = math.inf
    payoffs = (min(max(payoff1, 0.0), 1.0), min(max(payoff2, 0.0), 1.0))
    if abs(payoff1 - payoffs[0]) > 1e-6 or abs(payoff2 - payoffs[1]) > 1e-6:
        raise InternalInconsistency(
            f"machine payoffs ({payoff1}, {payoff2}) land outside [0, 1]"
        )
    return EvaluationResult(
        payoffs=payoffs,
        absorption_probability=min(max(absorption, 0.0), 1.0),
        expected_absorption_stage=expected_stage,
        phase_occupation=occupation,
        method=method,
    )


# ---------------------------------------------------------------------------
# deviation families


@dataclass(frozen=True)
class PureStationary:
    pass


@dataclass(frozen=True)
class MixedStationaryGrid:
    resolution: float = DEFAULT_GRID_RESOLUTION


@dataclass(frozen=True)
class ComplyThenDeviate:
    switch_stages: tuple


@dataclass(frozen=True)
class NeverAbsorb:
    pass


def _simplex_grid(n: int, steps: int):
    for combo in itertools.combinations(range(steps + n - 1), n - 1):
        bars = (-1,) + combo + (steps + n - 1,)
        yield tuple(bars[k + 1] - bars[k] - 1 for k in range(n))


def instantiate_family(family, game: GameSpec, deviator: int, comply_action=None):
    """Finite list of (label, machine) deviations for one player.

    Deterministic enumeration order; every member is a StrategyMachine.
    """
    n = game.n_actions(deviator)
    if isinstance(family, PureStationary):
        return [
            (f"pure[{a}]", stationary_machine(deviator, MixedAction.pure(a, n)))
            for a in range(n)
        ]
    if isinstance(family, MixedStationaryGrid):
        steps = int(round(1.0 / family.resolution))
        if abs(steps * family.resolution - 1.0) > 1e-9:
            raise ValueError("grid resolution must divide 1")
        members = []
        for counts in _simplex_grid(n, steps):
            weights = np.asarray(counts, dtype=float) / steps
            members.append(
                (
                    "grid[" + ",".join(f"{w:.4f}" for w in weights) + "]",
                    stationary_machine(deviator, MixedAction.from_numeric(weights)),
                )
            )
        return members
    if isinstance(family, NeverAbsorb):
        p = game.absorb_prob if deviator == 1 else game.absorb_prob.T
        quiet = [a for a in range(n) if not np.any(p[a] > 0.0)]
        return [
            (f"never_absorb[{a}]", stationary_machine(deviator, MixedAction.pure(a, n)))
            for a in quiet
        ]
    if isinstance(family, ComplyThenDeviate):
        if comply_action is None:
            raise ValueError("ComplyThenDeviate needs the on-path action to comply with")
        members = []
        for stage in family.switch_stages:
            for a in range(n):
                label = f"comply[{stage}]->pure[{a}]"
                if stage == 0:
                    members.append(
                        (label, stationary_machine(deviator, MixedAction.pure(a, n)))
                    )
                else:
                    phases = (
                        Phase(comply_action, stage, ((StageExpiry(stage), 1),), "comply"),
                        Phase(MixedAction.pure(a, n), None, (), "deviate"),
                    )
                    members.append((label, StrategyMachine(deviator, phases)))
        return members
    raise TypeError(f"unknown deviation family {type(family).__name__}")


def default_comply_stages(opponent: StrategyMachine, limit: int = 4096) -> tuple:
    """Switch stages aligned with the opponent's counters.

    Against a machine running a frequency test, switches land on block
    boundaries so the evaluation stays exact; otherwise a geometric ladder
    up to the opponent's longest deadline.
    """
    for phase in opponent.phases:
        freq = phase.find(FrequencyTest)
        if freq is not None:
            b = freq[0].spec.block_length
            k = freq[0].spec.blocks_monitored
            return tuple(b * j for j in range(k + 1))
    deadlines = [p.duration for p in opponent.phases if p.duration is not None]
    horizon = min(max(deadlines, default=8) + 1, limit)
    stages = [0]
    step = 1
    while step <= horizon:
        stages.append(step)
        step *= 2
    if deadlines:
        stages.extend(d for d in deadlines if d <= limit)
        stages.extend(d + 1 for d in deadlines if d + 1 <= limit)
    return tuple(sorted(set(stages)))


def best_response_bound(
    opponent: StrategyMachine,
    deviator: int,
    family,
    game: GameSpec,
    comply_action=None,
):
    """Best deviation value within a family against a fixed opponent machine.

    Families may be a single family or an iterable; members are evaluated in
    deterministic order and the maximizer is returned as (machine, value).
    """
    if opponent.player == deviator:
        raise ValueError("opponent machine belongs to the deviating player")
    families = family if isinstance(family, (list, tuple)) else [family]
    members = []
    for fam in families:
        members.extend(instantiate_family(fam, game, deviator, comply_action))
    if not members:
        raise ValueError("deviation family is empty for this game")
    best = None
    for label, machine in members:
        if deviator == 1:
            result = exact_profile_value(machine, opponent, game)
        else:
            result = exact_profile_value(opponent, machine, game)
        value = result.payoffs[deviator - 1]
        if best is None or value > best[2]:
            best = (machine, label, value)
    machine, label, value = best
    return machine, value, label


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class EquilibriumCertificate:
    profile: object
    target_epsilon: float
    gains: tuple
    deviations: tuple
    families: tuple
    verdict: str

    @property
    def certified(self) -> bool:
        return self.verdict == "certified-within-family"


def certify_epsilon_equilibrium(profile, game: GameSpec, families) -> EquilibriumCertificate:
    """Family-relative ε-equilibrium check of a built profile.

    Certification means: within the searched families neither player gains
    more than target_epsilon (+1e-6 slack) over her on-path machine payoff.
    A refutation carries the replayable deviation machine and its gain.
    """
    m1, m2 = profile.machine1, profile.machine2
    on_path = exact_profile_value(m1, m2, game)
    gains = []
    deviations = []
    for deviator in (1, 2):
        own_machine = m1 if deviator == 1 else m2
        opponent = m2 if deviator == 1 else m1
        comply = own_machine.phases[own_machine.initial].action
        machine, value, label = best_response_bound(
            opponent, deviator, list(families), game, comply_action=comply
        )
        gain = max(0.0, value - on_path.payoffs[deviator - 1])
        gains.append(gain)
        deviations.append(
            {
                "label": label,
                "gain": gain,
                "value": value,
                "machine": machine_to_payload(machine),
            }
        )
    target = profile.target_epsilon
    ok = all(g <= target + CERT_SLACK for g in gains)
    return EquilibriumCertificate(
        profile=profile,
        target_epsilon=target,
        gains=tuple(gains),
        deviations=tuple(deviations),
        families=tuple(type(f).__name__ for f in families),
        verdict="certified-within-family" if ok else "refuted",
    )


# ---------------------------------------------------------------------------
# Monte Carlo simulation


@dataclass(frozen=True)
class SimulationReport:
    """Aggregate of independent simulated plays of one machine pair.

    Rebuilding with the same (seed, runs, horizon, window) yields an equal
    report; per-run streams are derived as (seed, run index), so aggregation
    does not depend on execution order.
    """

    runs: int
    seed: int
    horizon: int
    window: float
    backend: str
    payoff_means: tuple
    payoff_ci99: tuple
    absorption_rate: float
    mean_absorption_stage: float
    absorption_histogram: tuple
    unabsorbed_runs: int
    trigger_rates: tuple

    def to_payload(self) -> dict:
        return {
            "runs": self.runs,
            "seed": self.seed,
            "horizon": self.horizon,
            "window": self.window,
            "backend": self.backend,
            "payoff_means": list(self.payoff_means),
            "payoff_ci99": list(self.payoff_ci99),
            "absorption_rate": self.absorption_rate,
            "mean_absorption_stage": self.mean_absorption_stage,
            "absorption_histogram": [list(pair) for pair in self.absorption_histogram],
            "unabsorbed_runs": self.unabsorbed_runs,
            "trigger_rates": {
                f"machine{k + 1}": {
                    "out_of_support": rates[0],
                    "frequency_test": rates[1],
                    "stage_expiry": rates[2],
                }
                for k, rates in enumerate(self.trigger_rates)
            },
        }


def _window_estimates(spec, raw, suffix, t_max, first, any_unabsorbed):
    """Per-run tail payoff estimates from the kernel's window statistics.

    Matches the run evaluator: trailing-window mean for averages, window
    maximum for stage suprema, window recurrence hits for reachability."""
    runs = raw["stage"].shape[0]
    if isinstance(spec, Constant):
        return np.full(runs, spec.value)
    if isinstance(spec, LimsupAverage):
        return raw["wsum" + suffix] / (t_max - first + 1)
    if isinstance(spec, EvenStageLimsupAverage):
        n_even = sum(1 for t in range(first, t_max + 1) if t % 2 == 0)
        if n_even == 0 and any_unabsorbed:
            raise EmptyWindow("no even stages in window")
        return raw["esum" + suffix] / max(n_even, 1)
    if isinstance(spec, LimsupStage):
        return raw["wmax" + suffix]
    hits = raw["hit" + suffix].astype(bool)
    if isinstance(spec, Buchi):
        return np.where(hits, spec.hit_payoff, spec.miss_payoff)
    if isinstance(spec, CoBuchi):
        return np.where(hits, spec.infinite_payoff, spec.finite_payoff)
    raise TypeError(f"unknown payoff spec {type(spec).__name__}")


def monte_carlo(
    m1: StrategyMachine,
    m2: StrategyMachine,
    game: GameSpec,
    runs: int,
    t_max: int,
    seed: int,
    window: float = DEFAULT_WINDOW,
    backend=None,
) -> SimulationReport:
    """Simulate the machine pair and aggregate payoffs and absorption.

    Absorbed runs pay the absorbing table at the realized cell; unabsorbed
    runs get the trailing-window estimator of their tail payoff.  Confidence
    intervals are 99% normal half-widths of the per-run payoff samples.
    """
    if runs < 2:
        raise ValueError("need at least two runs for a confidence interval")
    first = window_start(t_max, window)
    raw = simkernel.run_profile(m1, m2, game, runs, t_max, first, seed, backend=backend)
    stages = raw["stage"]
    absorbed = stages > 0
    any_unabsorbed = bool((~absorbed).any())

    means = []
    half_widths = []
    for player, suffix in ((1, "1"), (2, "2")):
        table = game.safe_absorb_payoff(player)
        absorbed_values = table[raw["a1"], raw["a2"]]
        tail_values = _window_estimates(
            game.tail_payoff(player), raw, suffix, t_max, first, any_unabsorbed
        )
        values = np.where(absorbed, absorbed_values, tail_values)
        means.append(float(values.mean()))
        sd = float(values.std(ddof=1))
        half_widths.append(Z99 * sd / math.sqrt(runs))

    hit_stages = stages[absorbed]
    unique, counts = np.unique(hit_stages, return_counts=True)
    histogram = tuple((int(s), int(c)) for s, c in zip(unique, counts))
    rate = float(absorbed.mean())
    mean_stage = float(hit_stages.mean()) if hit_stages.size else math.inf
    trigger_rates = tuple(
        tuple(float(f) for f in (raw[key] > 0).mean(axis=0))
        for key in ("fires1", "fires2")
    )
    return SimulationReport(
        runs=runs,
        seed=seed,
        horizon=t_max,
        window=window,
        backend=backend if backend is not None else simkernel.backend_name(),
        payoff_means=tuple(means),
        payoff_ci99=tuple(half_widths),
        absorption_rate=rate,
        mean_absorption_stage=mean_stage,
        absorption_histogram=histogram,
        unabsorbed_runs=int(runs - absorbed.sum()),
        trigger_rates=trigger_rates,
    )


def certify_punisher(
    game: GameSpec,
    punished: int,
    punisher_action: MixedAction,
    level: float,
    epsilon: float,
    comply_action=None,
    resolution: float = DEFAULT_GRID_RESOLUTION,
):
    """Check a stationary punisher holds the punished player near her minmax.

    Accepts iff the punished player's best response over PureStationary,
    ComplyThenDeviate, and the mixed stationary grid stays at or below
    level + epsilon/2 (+1e-6 slack).  Returns (accepted, worst value, label).
    """
    punisher_machine = stationary_machine(3 - punished, punisher_action, "punish")
    if comply_action is None:
        comply_action = MixedAction.uniform(game.n_actions(punished))
    families = [
        PureStationary(),
        ComplyThenDeviate(default_comply_stages(punisher_machine)),
        MixedStationaryGrid(resolution),
    ]
    _, value, label = best_response_bound(
        punisher_machine, punished, families, game, comply_action=comply_action
    )
    return value <= level + epsilon / 2.0 + CERT_SLACK, value, label
