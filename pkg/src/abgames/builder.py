"""Builders that compile case reports into executable strategy machines.

All three constructions share one recipe: play a target profile until
absorption is nearly certain, within a deadline or under a frequency test,
and fall back to stationary punishment once a deviation is detected.  Every
numeric parameter comes from an explicit inequality whose inputs are stored
in the profile's parameter ledger, so the construction can be re-audited
from the ledger alone.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DeltaTooLarge,
    InfeasibleEta,
    KappaOutOfRange,
    PunisherNotCertified,
    StateCapExceeded,
    WitnessInvalid,
)
from .game import (
    GameSpec,
    MixedAction,
    MixedProfile,
    absorption_prob,
    conditional_absorbing_payoff,
)
from .machines import (
    FrequencyTest,
    OutOfSupport,
    Phase,
    StageExpiry,
    StatTestSpec,
    StrategyMachine,
    hoeffding_threshold,
    machine_to_payload,
)
from .pipeline import Case1Report, Case2Report, Case3SoftReport, PipelineResult
from .verify import (
    ComplyThenDeviate,
    MixedStationaryGrid,
    PureStationary,
    _simplex_grid,
    certify_epsilon_equilibrium,
    certify_punisher,
    default_comply_stages,
)

BUILD_TOL = 1e-6
DELTA_FLOOR = 1e-12
PUNISHER_GRID_RESOLUTION = 0.1
INITIAL_BLOCK = 16
MAX_BLOCK = 1 << 22
# Deadlines above this make the product chain (and any honest simulation)
# impractically large; the halving search stops before reaching them.
MAX_DEADLINE = 20_000
GATE_GRID_RESOLUTION = 0.2

__all__ = [
    "EquilibriumProfile",
    "build_case1",
    "build_case2",
    "build_case3_soft",
    "build_equilibrium",
    "certification_families",
    "choose_eta_n_case1",
    "punisher_candidates",
    "select_punishers",
    "statistical_test_params",
]


# ---------------------------------------------------------------------------
# parameter choices


def choose_eta_n_case1(r_star, p0, v, bound, epsilon):
    """Tremble budget eta and deadline N for an absorbing main phase.

    eta is capped at epsilon/(2*bound) so the event of missing the deadline
    cannot move any payoff by more than epsilon/2, and must keep
    (1-eta)*r*_i + eta*bound above v_i - 3*epsilon/2 for both players; N is
    the smallest deadline with 1-(1-p0)^N >= 1-eta.  InfeasibleEta means the
    payoff inequality fails even here, i.e. the classification was wrong.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if bound <= 0.0:
        raise ValueError("payoff bound must be positive")
    if not 0.0 < p0 <= 1.0:
        raise ValueError(f"main-phase absorption must lie in (0, 1], got {p0!r}")
    eta = min(epsilon / (2.0 * bound), 0.5)
    for i in (0, 1):
        have = (1.0 - eta) * float(r_star[i]) + eta * bound
        need = float(v[i]) - 1.5 * epsilon
        if have < need - 1e-12:
            raise InfeasibleEta(
                f"(1-eta) r*_{i + 1} + eta M = {have:.9f} falls short of "
                f"v_{i + 1} - 3 eps/2 = {need:.9f} at eta={eta}"
            )
    if p0 >= 1.0:
        return eta, 1
    n = max(1, math.ceil(math.log(eta) / math.log(1.0 - p0) - 1e-12))
    while (1.0 - p0) ** n > eta:
        n += 1
    while n > 1 and (1.0 - p0) ** (n - 1) <= eta:
        n -= 1
    return eta, n


def statistical_test_params(
    x_ref: MixedAction, blocks: int, eta_test: float, block_length: int
) -> StatTestSpec:
    """Frequency-test specification with union-bounded false-positive mass.

    The per-action threshold is the Hoeffding radius at confidence
    eta_test / (n_actions * blocks); under truthful i.i.d. play of x_ref the
    total trigger probability over all monitored blocks stays below
    eta_test.  KappaOutOfRange means the block length cannot resolve any
    drift at this budget; callers grow the block and retry.
    """
    if not isinstance(blocks, int) or blocks < 1:
        raise ValueError("block count must be a positive integer")
    if not isinstance(block_length, int) or block_length < 1:
        raise ValueError("block length must be a positive integer")
    kappa = hoeffding_threshold(
        x_ref.weights.size, blocks, eta_test, block_length
    )
    if kappa >= 1.0:
        raise KappaOutOfRange(
            f"threshold {kappa:.4f} >= 1 at B={block_length}, K={blocks}, "
            f"budget={eta_test}; no frequency can drift that far"
        )
    return StatTestSpec(
        reference_action=x_ref,
        block_length=block_length,
        threshold=kappa,
        false_positive_budget=eta_test,
        blocks_monitored=blocks,
    )


# ---------------------------------------------------------------------------
# punishers


def punisher_candidates(base, n_actions: int, epsilon: float,
                        grid_resolution: float = PUNISHER_GRID_RESOLUTION):
    """Deterministic ladder of stationary punisher candidates.

    Starts from the solver's minmax action when given and tilts toward each
    pure action and the uniform mixture with growing weight; the pure
    actions and the uniform mixture follow.  A coarse simplex grid closes
    the ladder, ordered by distance from the seed, so near misses of the
    tilt stage still get swept up.
    """
    seed = base if base is not None else MixedAction.uniform(n_actions)
    raw = [seed]
    for w in (epsilon / 2.0, epsilon, 0.25, 0.5):
        if not 0.0 < w < 1.0:
            continue
        for a in range(n_actions):
            tilt = (1.0 - w) * seed.weights + w * MixedAction.pure(a, n_actions).weights
            raw.append(MixedAction(tilt))
        raw.append(MixedAction((1.0 - w) * seed.weights + w / n_actions))
    raw.extend(MixedAction.pure(a, n_actions) for a in range(n_actions))
    raw.append(MixedAction.uniform(n_actions))
    steps = round(1.0 / grid_resolution)
    sweep = sorted(
        _simplex_grid(n_actions, steps),
        key=lambda c: (round(float(np.sum((np.asarray(c) / steps - seed.weights) ** 2)), 12), c),
    )
    raw.extend(MixedAction(np.asarray(c, dtype=float) / steps) for c in sweep)
    out, seen = [], set()
    for cand in raw:
        key = tuple(np.round(cand.weights, 12))
        if key not in seen:
            seen.add(key)
            out.append(cand)
    return out


def select_punishers(game: GameSpec, v, epsilon: float, comply, seeds=(None, None)):
    """First certified punisher per player from the candidate ladder.

    comply[i-1] is player i's on-path action, used to seed the
    comply-then-deviate family of the certification.  Raises
    PunisherNotCertified when the whole ladder fails for some player.
    """
    chosen = []
    for punished in (1, 2):
        n_opp = game.n_actions(2 if punished == 1 else 1)
        best = None
        for cand in punisher_candidates(seeds[punished - 1], n_opp, epsilon):
            ok, value, label = certify_punisher(
                game,
                punished,
                cand,
                float(v[punished - 1]),
                epsilon,
                comply_action=comply[punished - 1],
            )
            if ok:
                chosen.append(cand)
                break
            if best is None or value < best[0]:
                best = (value, label)
        else:
            raise PunisherNotCertified(
                f"no stationary candidate holds player {punished} near "
                f"{float(v[punished - 1]):.6f}; best response stayed at "
                f"{best[0]:.6f} via {best[1]}"
            )
    return tuple(chosen)


def _certify_pair(game, v, epsilon, punishers, comply):
    """Check both given punishers; raise PunisherNotCertified on failure."""
    if punishers is None:
        return select_punishers(game, v, epsilon, comply)
    q1, q2 = punishers
    for punished, action in ((1, q1), (2, q2)):
        ok, value, label = certify_punisher(
            game,
            punished,
            action,
            float(v[punished - 1]),
            epsilon,
            comply_action=comply[punished - 1],
        )
        if not ok:
            raise PunisherNotCertified(
                f"player {punished} reaches {value:.6f} via {label} against "
                f"the proposed punisher; allowed "
                f"{float(v[punished - 1]):.6f} + eps/2"
            )
    return q1, q2


# ---------------------------------------------------------------------------
# profile container


@dataclass(frozen=True)
class EquilibriumProfile:
    """A built machine pair with its construction parameters.

    punishments = (q1, q2): q_i is the stationary action of player -i that
    holds player i near her minmax; machine -i plays it in its punishment
    phase.
    """

    machine1: StrategyMachine
    machine2: StrategyMachine
    target_epsilon: float
    tag: str
    parameters: dict = field(repr=False)
    punishments: tuple = field(repr=False)

    def to_payload(self) -> dict:
        return {
            "tag": self.tag,
            "target_epsilon": self.target_epsilon,
            "parameters": dict(self.parameters),
            "machine1": machine_to_payload(self.machine1),
            "machine2": machine_to_payload(self.machine2),
            "punishments": [
                [float(w) for w in q.weights] for q in self.punishments
            ],
        }


def _support(action: MixedAction) -> tuple:
    return tuple(int(a) for a in action.support)


def _deadline_machine(player, own, opp_ref, n_stages, punish_action):
    main = Phase(
        own,
        n_stages,
        ((OutOfSupport(_support(opp_ref)), 1), (StageExpiry(n_stages), 1)),
        "main",
    )
    punish = Phase(punish_action, None, (), "punish")
    return StrategyMachine(player, (main, punish))


def _absorbing_rows(game: GameSpec, player: int, other: MixedAction, tol: float):
    """(action, mass, r*) for own pure rows absorbing against `other`."""
    out = []
    n = game.n_actions(player)
    for a in range(n):
        own = MixedAction.pure(a, n)
        prof = MixedProfile(own, other) if player == 1 else MixedProfile(other, own)
        mass = absorption_prob(game, prof)
        if mass > tol:
            out.append((a, mass, conditional_absorbing_payoff(game, prof, player)))
    return out


def _expect_case(report, tag, detail_type):
    if report.tag != tag:
        raise ValueError(f"expected a {tag} report, got {report.tag}")
    if not isinstance(report.detail, detail_type):
        raise ValueError(f"{tag} report carries {type(report.detail).__name__}")
    return report.detail


# ---------------------------------------------------------------------------
# certification families


def _thin_stages(stages, cap: int = 16) -> tuple:
    ordered = sorted(stages)
    if len(ordered) <= cap:
        return tuple(ordered)
    keep = {ordered[0], ordered[-2], ordered[-1]}
    j = 1
    while j < len(ordered) - 2:
        keep.add(ordered[j])
        j *= 2
    return tuple(sorted(keep))


def certification_families(
    machine1: StrategyMachine,
    machine2: StrategyMachine,
    resolution: float = GATE_GRID_RESOLUTION,
):
    """Deviation families whose members stay exactly evaluable vs the pair.

    Switch stages align with any armed frequency test so the block-granular
    chain expansion applies; otherwise they follow the machines' deadlines.
    """
    aligned = None
    for machine in (machine1, machine2):
        for phase in machine.phases:
            hit = phase.find(FrequencyTest)
            if hit is None:
                continue
            spec = hit[0].spec
            marks = {spec.block_length * j for j in range(spec.blocks_monitored + 1)}
            marks.add(spec.block_length * spec.blocks_monitored + 1)
            aligned = marks if aligned is None else aligned & marks
    if aligned is None:
        stages = set(default_comply_stages(machine1))
        stages |= set(default_comply_stages(machine2))
    else:
        stages = aligned
    return [
        PureStationary(),
        ComplyThenDeviate(_thin_stages(stages)),
        MixedStationaryGrid(resolution),
    ]


# ---------------------------------------------------------------------------
# case 1


def _recheck_case1(game, x0, r_star, v, epsilon, tol):
    p0 = absorption_prob(game, x0)
    if p0 <= tol:
        raise WitnessInvalid(
            f"limit profile absorbs with probability {p0}, not a case-1 input"
        )
    for i in (1, 2):
        if float(r_star[i - 1]) < float(v[i - 1]) - epsilon - tol:
            raise WitnessInvalid(
                f"conditional payoff {r_star[i - 1]} of player {i} fell below "
                f"v - eps = {float(v[i - 1]) - epsilon}"
            )
        other = x0.x2 if i == 1 else x0.x1
        for a, _, r in _absorbing_rows(game, i, other, tol):
            if r > float(r_star[i - 1]) + tol:
                raise WitnessInvalid(
                    f"player {i} gains {r - float(r_star[i - 1]):.3e} by "
                    f"absorbing via action {a}; case-1 conditions fail"
                )
    return p0


def build_case1(report, game: GameSpec, v, epsilon: float, punishers=None,
                tol: float = BUILD_TOL) -> EquilibriumProfile:
    """Machines for an absorbing limit profile: play x0 for N stages, punish after.

    Both machines carry the deadline; out-of-support play by the opponent
    triggers punishment immediately.  The punishers must hold each player
    within epsilon/2 of her minmax, which is checked here, not assumed.
    Target gain bound: 2 epsilon.
    """
    detail = _expect_case(report, "case1", Case1Report)
    x0, r_star = detail.x0, detail.r_star
    p0 = _recheck_case1(game, x0, r_star, v, epsilon, tol)
    eta, n_stages = choose_eta_n_case1(r_star, p0, v, game.bound, epsilon)
    q1, q2 = _certify_pair(game, v, epsilon, punishers, (x0.x1, x0.x2))
    machine1 = _deadline_machine(1, x0.x1, x0.x2, n_stages, q2)
    machine2 = _deadline_machine(2, x0.x2, x0.x1, n_stages, q1)
    params = {
        "eta": eta,
        "N": n_stages,
        "p_main": p0,
        "r_main": tuple(float(r) for r in r_star),
        "v": tuple(float(x) for x in v),
        "bound": game.bound,
        "epsilon": epsilon,
        "absorb_by_deadline": 1.0 - (1.0 - p0) ** n_stages,
    }
    return EquilibriumProfile(
        machine1, machine2, 2.0 * epsilon, "case1", params, (q1, q2)
    )


# ---------------------------------------------------------------------------
# cases 2 and 3-soft: tested constructions


def _tilt(base: MixedAction, action: int, delta: float) -> MixedAction:
    pure = MixedAction.pure(action, base.weights.size)
    return MixedAction((1.0 - delta) * base.weights + delta * pure.weights)


def _delta_ladder(epsilon: float):
    delta = min(epsilon / 2.0, 0.5)
    while delta >= DELTA_FLOOR:
        yield delta
        delta /= 2.0


def _build_tested(game, v, epsilon, base_own, mover, action, reference,
                  target, tag, delta, punishers, tol, extra):
    """Shared construction for the two nonabsorbing cases.

    The mover tilts her limit action onto the absorbing exit with weight
    delta; the opponent plays the reference and switches to punishment at
    the deadline; the mover watches the reference with a frequency test
    plus a support check and punishes on either trigger.
    """
    other = 2 if mover == 1 else 1
    comply = [None, None]
    comply[mover - 1] = base_own
    comply[other - 1] = reference
    q1, q2 = _certify_pair(game, v, epsilon, punishers, tuple(comply))

    if delta is not None and not 0.0 < delta <= 1.0:
        raise DeltaTooLarge(
            f"absorbing weight must lie in (0, 1], got {delta!r}"
        )
    candidates = [delta] if delta is not None else _delta_ladder(epsilon)
    explicit = delta is not None
    reason = "halving search exhausted"
    for step in candidates:
        own_hat = _tilt(base_own, action, step)
        x_hat = (
            MixedProfile(own_hat, reference)
            if mover == 1
            else MixedProfile(reference, own_hat)
        )
        p_hat = absorption_prob(game, x_hat)
        if p_hat <= 0.0:
            reason = f"profile stays nonabsorbing at delta={step}"
            break
        r_hat = (
            conditional_absorbing_payoff(game, x_hat, 1),
            conditional_absorbing_payoff(game, x_hat, 2),
        )
        try:
            eta, n_raw = choose_eta_n_case1(r_hat, p_hat, v, game.bound, epsilon)
        except InfeasibleEta as exc:
            reason = str(exc)
            if explicit:
                break
            continue
        if n_raw > MAX_DEADLINE:
            reason = f"deadline {n_raw} exceeds evaluation capacity"
            break
        eta_test = eta
        block = INITIAL_BLOCK
        spec = None
        while block <= MAX_BLOCK:
            blocks = max(1, math.ceil(n_raw / block))
            try:
                spec = statistical_test_params(reference, blocks, eta_test, block)
                break
            except KappaOutOfRange:
                block *= 2
        if spec is None:
            reason = "no block length fits the false-positive budget"
            break
        n_total = spec.block_length * spec.blocks_monitored

        punish_mover = q2 if mover == 1 else q1
        punish_other = q1 if mover == 1 else q2
        main_mover = Phase(
            own_hat,
            None,
            ((OutOfSupport(_support(reference)), 1), (FrequencyTest(spec), 1)),
            "main",
        )
        machine_mover = StrategyMachine(
            mover, (main_mover, Phase(punish_mover, None, (), "punish"))
        )
        main_other = Phase(
            reference, n_total, ((StageExpiry(n_total), 1),), "main"
        )
        machine_other = StrategyMachine(
            other, (main_other, Phase(punish_other, None, (), "punish"))
        )
        machine1, machine2 = (
            (machine_mover, machine_other)
            if mover == 1
            else (machine_other, machine_mover)
        )
        params = {
            "eta": eta,
            "eta_test": eta_test,
            "N": n_total,
            "N_raw": n_raw,
            "delta": step,
            "B": spec.block_length,
            "K": spec.blocks_monitored,
            "kappa": spec.threshold,
            "p_main": p_hat,
            "r_main": tuple(float(r) for r in r_hat),
            "v": tuple(float(x) for x in v),
            "bound": game.bound,
            "epsilon": epsilon,
            "player": mover,
            "action": int(action),
            "absorb_by_deadline": 1.0 - (1.0 - p_hat) ** n_total,
        }
        params.update(extra)
        profile = EquilibriumProfile(
            machine1, machine2, target, tag, params, (q1, q2)
        )
        try:
            certificate = certify_epsilon_equilibrium(
                profile, game, certification_families(machine1, machine2)
            )
        except StateCapExceeded as exc:
            reason = f"product chain too large at delta={step}: {exc}"
            break
        if certificate.certified:
            return profile
        worst = max(
            certificate.deviations, key=lambda dev: dev["gain"]
        )
        reason = (
            f"gain {worst['gain']:.6f} via {worst['label']} at delta={step}"
        )
        if explicit:
            break
    raise DeltaTooLarge(f"no certified absorbing weight found: {reason}")


def _recheck_case2(game, detail, v, epsilon, tol):
    x0, mover, action = detail.x0, detail.player, detail.action
    if absorption_prob(game, x0) > tol:
        raise WitnessInvalid("limit profile absorbs; not a case-2 input")
    reference = x0.x2 if mover == 1 else x0.x1
    own = MixedAction.pure(action, game.n_actions(mover))
    prof = (
        MixedProfile(own, reference) if mover == 1 else MixedProfile(reference, own)
    )
    if absorption_prob(game, prof) <= tol:
        raise WitnessInvalid(
            f"exit action {action} of player {mover} does not absorb"
        )
    r_pair = (
        conditional_absorbing_payoff(game, prof, 1),
        conditional_absorbing_payoff(game, prof, 2),
    )
    for j in (1, 2):
        if r_pair[j - 1] < float(v[j - 1]) - epsilon - tol:
            raise WitnessInvalid(
                f"exit payoff {r_pair[j - 1]:.6f} of player {j} fell below "
                f"v - eps"
            )
        other = x0.x2 if j == 1 else x0.x1
        for a, _, r in _absorbing_rows(game, j, other, tol):
            if r > r_pair[j - 1] + tol:
                raise WitnessInvalid(
                    f"player {j} prefers absorbing via action {a}; "
                    "case-2 conditions fail"
                )
    return reference


def build_case2(report, game: GameSpec, v, epsilon: float, delta=None,
                punishers=None, tol: float = BUILD_TOL) -> EquilibriumProfile:
    """Machines for a nonabsorbing limit with a mutually acceptable exit.

    The designated player mixes weight delta onto the exit action and runs
    a frequency test against the opponent's limit action; the opponent
    plays her limit action until the block-aligned deadline.  When delta is
    None a halving search from epsilon/2 picks the largest weight whose
    profile the verifier certifies.  Target gain bound: 2 epsilon.
    """
    detail = _expect_case(report, "case2", Case2Report)
    reference = _recheck_case2(game, detail, v, epsilon, tol)
    base_own = detail.x0.x1 if detail.player == 1 else detail.x0.x2
    return _build_tested(
        game,
        v,
        epsilon,
        base_own,
        detail.player,
        detail.action,
        reference,
        2.0 * epsilon,
        "case2",
        delta,
        punishers,
        tol,
        {},
    )


def _recheck_case3(game, witness, x0, v, tol):
    mover, action, reference = witness
    own = MixedAction.pure(action, game.n_actions(mover))
    prof = (
        MixedProfile(own, reference) if mover == 1 else MixedProfile(reference, own)
    )
    mass = absorption_prob(game, prof)
    if mass <= tol:
        raise WitnessInvalid(
            f"witness action {action} of player {mover} does not absorb "
            "against the safe mixture"
        )
    r_pair = (
        conditional_absorbing_payoff(game, prof, 1),
        conditional_absorbing_payoff(game, prof, 2),
    )
    for j in (1, 2):
        if r_pair[j - 1] < float(v[j - 1]) - tol:
            raise WitnessInvalid(
                f"witness payoff {r_pair[j - 1]:.6f} of player {j} fell "
                f"below the minmax value {float(v[j - 1]):.6f}"
            )
    for a, _, r in _absorbing_rows(game, mover, reference, tol):
        if r > r_pair[mover - 1] + tol:
            raise WitnessInvalid(
                f"player {mover} prefers absorbing via action {a}; "
                "witness maximality fails"
            )
    base_own = x0.x1 if mover == 1 else x0.x2
    quiet = (
        MixedProfile(base_own, reference)
        if mover == 1
        else MixedProfile(reference, base_own)
    )
    if absorption_prob(game, quiet) > tol:
        raise WitnessInvalid(
            "limit action against the safe mixture absorbs; the deadline "
            "phase would not be quiet"
        )
    return base_own


def build_case3_soft(witness, game: GameSpec, v, epsilon: float, x0,
                     delta=None, punishers=None,
                     tol: float = BUILD_TOL) -> EquilibriumProfile:
    """Machines for the soft difficult case from an LP witness.

    witness = (player, action, y_other): the player's absorbing action
    meets both minmax levels against the opponent mixture y_other and is
    maximal among her absorbing actions there.  Same machine shape as the
    case-2 build with the opponent playing y_other; the frequency test
    references y_other.  Target gain bound: epsilon.
    """
    mover, action, reference = witness
    if mover not in (1, 2):
        raise ValueError("witness player must be 1 or 2")
    base_own = _recheck_case3(game, (mover, int(action), reference), x0, v, tol)
    return _build_tested(
        game,
        v,
        epsilon,
        base_own,
        mover,
        int(action),
        reference,
        float(epsilon),
        "case3soft",
        delta,
        punishers,
        tol,
        {"reference": tuple(float(w) for w in reference.weights)},
    )


# ---------------------------------------------------------------------------
# dispatch


def build_equilibrium(result: PipelineResult, game: GameSpec, epsilon: float,
                      delta=None, punishers=None,
                      tol: float = BUILD_TOL) -> EquilibriumProfile:
    """Build the machines for whichever case the pipeline reported.

    Punisher seeds come from the minmax solver's stationary candidates;
    the certified pair may tilt away from them.  The difficult case has no
    construction and raises ValueError.
    """
    report = result.case
    rep = result.minmax
    v = (
        min(max(rep.v1, 0.0), game.bound),
        min(max(rep.v2, 0.0), game.bound),
    )
    if punishers is None:
        if report.tag == "case3soft":
            detail = report.detail
            comply = [detail.x0.x1, detail.x0.x2]
            comply[(2 if detail.player == 1 else 1) - 1] = detail.y_other
        elif report.tag in ("case1", "case2"):
            comply = [report.detail.x0.x1, report.detail.x0.x2]
        else:
            raise ValueError("the difficult case has no construction")
        punishers = select_punishers(
            game, v, epsilon, tuple(comply), (rep.punisher1, rep.punisher2)
        )
    if report.tag == "case1":
        return build_case1(report, game, v, epsilon, punishers, tol)
    if report.tag == "case2":
        return build_case2(report, game, v, epsilon, delta, punishers, tol)
    if report.tag == "case3soft":
        detail = report.detail
        witness = (detail.player, detail.action, detail.y_other)
        return build_case3_soft(
            witness, game, v, epsilon, detail.x0, delta, punishers, tol
        )
    raise ValueError("the difficult case has no construction")
