"""Command-line interface: game files, reports, and a stable exit-code contract.

Game files are JSON under the versioned schema "abgames-game-v1".  Every
number may be written as a JSON number, a decimal string, or an exact
fraction "n/d"; strings are parsed through `fractions.Fraction` before any
float conversion so fixtures can pin values near classifier tolerances.
The canonical serializer emits shortest-round-trip decimal strings, so
`serialize(parse(f))` is byte-identical for canonical fixtures.

Exit codes: 0 success or certified, 1 usage or bad input file, 2 payoff
variant unsupported by the requested computation, 3 difficult-case game
(scripts can branch on it), 4 construction or certification failure, and
5 internal inconsistency (numerics contradicting what the theory promises).
"""

import argparse
import hashlib
import json
import math
import sys
from dataclasses import is_dataclass, fields as dataclass_fields
from fractions import Fraction
from importlib import resources

import numpy as np

from . import __version__
from .builder import build_equilibrium, certification_families
from .errors import (
    AbgamesError,
    DeltaTooLarge,
    GameValidationError,
    InfeasibleEta,
    InternalInconsistency,
    KappaOutOfRange,
    NoCaseMatched,
    PunisherNotCertified,
    SandwichViolation,
    SchemaViolation,
    SizeCapExceeded,
    StateCapExceeded,
    UnsupportedExactEvaluation,
    UnsupportedPayoffForMinmax,
    WitnessInvalid,
)
from .game import (
    Buchi,
    CoBuchi,
    Constant,
    EvenStageLimsupAverage,
    GameSpec,
    LimsupAverage,
    LimsupStage,
    MixedAction,
    MixedProfile,
    validate_game,
)
from .pipeline import run_pipeline
from .solvers import minmax_values
from .verify import (
    ComplyThenDeviate,
    MixedStationaryGrid,
    PureStationary,
    certify_epsilon_equilibrium,
    exact_profile_value,
    monte_carlo,
)

GAME_SCHEMA = "abgames-game-v1"
REPORT_SCHEMA = "abgames-report-v1"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNSUPPORTED = 2
EXIT_DIFFICULT = 3
EXIT_NOT_CERTIFIED = 4
EXIT_INTERNAL = 5

_BUILD_FAILURES = (
    PunisherNotCertified,
    DeltaTooLarge,
    InfeasibleEta,
    KappaOutOfRange,
    WitnessInvalid,
    StateCapExceeded,
    SizeCapExceeded,
)
_INTERNAL_FAILURES = (InternalInconsistency, SandwichViolation, NoCaseMatched)

__all__ = [
    "GAME_SCHEMA",
    "REPORT_SCHEMA",
    "bundled_fixture",
    "main",
    "parse_game",
    "parse_game_payload",
    "serialize_game",
]


# ---------------------------------------------------------------------------
# numbers


def _parse_number(raw, where, errors, allow_null=False):
    """Float from a JSON number, decimal string, or exact fraction string."""
    if raw is None:
        if allow_null:
            return math.nan
        errors.append(f"{where}: null is only allowed on nonabsorbing payoff cells")
        return math.nan
    if isinstance(raw, bool):
        errors.append(f"{where}: booleans are not numbers")
        return math.nan
    if isinstance(raw, (int, float)):
        return float(raw)
    if isinstance(raw, str):
        try:
            return float(Fraction(raw))
        except (ValueError, ZeroDivisionError):
            errors.append(f"{where}: cannot parse {raw!r} as decimal or fraction")
            return math.nan
    errors.append(f"{where}: expected a number, got {type(raw).__name__}")
    return math.nan


def _format_number(x) -> str:
    # repr gives the shortest string that round-trips the float
    return repr(float(x))


def _cell(x):
    return None if math.isnan(x) else _format_number(x)


# ---------------------------------------------------------------------------
# game files


_PAYOFF_FIELDS = {
    "constant": ("value",),
    "limsup_average": ("stage_values",),
    "even_stage_limsup_average": ("stage_values",),
    "limsup_stage": ("stage_values",),
    "buchi": ("profiles", "hit_payoff", "miss_payoff"),
    "cobuchi": ("profiles", "finite_payoff", "infinite_payoff"),
}

_TOP_FIELDS = (
    "schema",
    "name",
    "actions1",
    "actions2",
    "absorb_prob",
    "absorb_payoff1",
    "absorb_payoff2",
    "payoff1",
    "payoff2",
    "bound",
)


def _check_fields(payload, allowed, required, where, errors):
    for key in payload:
        if key not in allowed:
            errors.append(f"{where}.{key}: unknown field")
    missing = [key for key in required if key not in payload]
    for key in missing:
        errors.append(f"{where}.{key}: missing required field")
    return not missing


def _parse_actions(payload, key, errors):
    raw = payload.get(key)
    if not isinstance(raw, list) or not raw or not all(isinstance(a, str) for a in raw):
        errors.append(f"$.{key}: expected a nonempty list of action labels")
        return ("?",)
    return tuple(raw)


def _parse_table(payload, key, shape, errors, allow_null=False, unit=False):
    raw = payload.get(key)
    where = f"$.{key}"
    if not isinstance(raw, list) or len(raw) != shape[0] or any(
        not isinstance(row, list) or len(row) != shape[1] for row in raw
    ):
        errors.append(f"{where}: expected a {shape[0]}x{shape[1]} table")
        return np.zeros(shape)
    out = np.zeros(shape)
    for i, row in enumerate(raw):
        for j, entry in enumerate(row):
            cell = f"{where}[{i}][{j}]"
            out[i, j] = _parse_number(entry, cell, errors, allow_null=allow_null)
            if unit and not math.isnan(out[i, j]) and not 0.0 <= out[i, j] <= 1.0:
                errors.append(f"{cell}: probability {float(out[i, j])!r} outside [0, 1]")
    return out


def _parse_profiles(raw, where, shape, errors):
    profiles = set()
    if not isinstance(raw, list):
        errors.append(f"{where}: expected a list of [row, column] pairs")
        return frozenset()
    for k, entry in enumerate(raw):
        if (
            not isinstance(entry, list)
            or len(entry) != 2
            or not all(isinstance(c, int) and not isinstance(c, bool) for c in entry)
        ):
            errors.append(f"{where}[{k}]: expected an [row, column] index pair")
            continue
        i, j = entry
        if not (0 <= i < shape[0] and 0 <= j < shape[1]):
            errors.append(f"{where}[{k}]: profile ({i}, {j}) outside the action space")
            continue
        profiles.add((i, j))
    return frozenset(profiles)


def _parse_payoff(payload, key, shape, errors):
    raw = payload.get(key)
    where = f"$.{key}"
    if not isinstance(raw, dict):
        errors.append(f"{where}: expected a payoff object")
        return Constant(0.0)
    kind = raw.get("kind")
    if kind not in _PAYOFF_FIELDS:
        errors.append(f"{where}.kind: unknown payoff kind {kind!r}")
        return Constant(0.0)
    specific = _PAYOFF_FIELDS[kind]
    _check_fields(raw, ("kind", "declared_minmax") + specific, ("kind",) + specific,
                  where, errors)
    declared = None
    if raw.get("declared_minmax") is not None:
        declared = _parse_number(raw["declared_minmax"], f"{where}.declared_minmax", errors)

    if kind == "constant":
        return Constant(_parse_number(raw.get("value"), f"{where}.value", errors),
                        declared_minmax=declared)
    if kind in ("limsup_average", "even_stage_limsup_average", "limsup_stage"):
        table_payload = {"stage_values": raw.get("stage_values")}
        table = _parse_table(table_payload, "stage_values", shape, errors)
        cls = {
            "limsup_average": LimsupAverage,
            "even_stage_limsup_average": EvenStageLimsupAverage,
            "limsup_stage": LimsupStage,
        }[kind]
        return cls(table, declared_minmax=declared)
    profiles = _parse_profiles(raw.get("profiles"), f"{where}.profiles", shape, errors)
    if kind == "buchi":
        return Buchi(
            profiles,
            hit_payoff=_parse_number(raw.get("hit_payoff"), f"{where}.hit_payoff", errors),
            miss_payoff=_parse_number(raw.get("miss_payoff"), f"{where}.miss_payoff", errors),
            declared_minmax=declared,
        )
    return CoBuchi(
        profiles,
        finite_payoff=_parse_number(raw.get("finite_payoff"), f"{where}.finite_payoff", errors),
        infinite_payoff=_parse_number(raw.get("infinite_payoff"), f"{where}.infinite_payoff", errors),
        declared_minmax=declared,
    )


def parse_game_payload(payload) -> GameSpec:
    """GameSpec from a decoded game document; raises SchemaViolation with
    one located message per problem."""
    errors = []
    if not isinstance(payload, dict):
        raise SchemaViolation(["$: game document must be a JSON object"])
    if payload.get("schema") != GAME_SCHEMA:
        errors.append(f"$.schema: expected {GAME_SCHEMA!r}, got {payload.get('schema')!r}")
    _check_fields(
        payload, _TOP_FIELDS,
        ("schema", "actions1", "actions2", "absorb_prob",
         "absorb_payoff1", "absorb_payoff2", "payoff1", "payoff2"),
        "$", errors,
    )
    name = payload.get("name", "")
    if not isinstance(name, str):
        errors.append("$.name: expected a string")
        name = ""
    actions1 = _parse_actions(payload, "actions1", errors)
    actions2 = _parse_actions(payload, "actions2", errors)
    shape = (len(actions1), len(actions2))
    absorb_prob = _parse_table(payload, "absorb_prob", shape, errors, unit=True)
    pay1 = _parse_table(payload, "absorb_payoff1", shape, errors, allow_null=True)
    pay2 = _parse_table(payload, "absorb_payoff2", shape, errors, allow_null=True)
    tail1 = _parse_payoff(payload, "payoff1", shape, errors)
    tail2 = _parse_payoff(payload, "payoff2", shape, errors)
    bound = 1.0
    if "bound" in payload:
        bound = _parse_number(payload["bound"], "$.bound", errors)
    if errors:
        raise SchemaViolation(errors)
    game = GameSpec(
        actions1=actions1, actions2=actions2,
        absorb_prob=absorb_prob,
        absorb_payoff1=pay1, absorb_payoff2=pay2,
        payoff1=tail1, payoff2=tail2,
        bound=bound, name=name,
    )
    validate_game(game)
    return game


def _load(path):
    try:
        with open(path, "rb") as handle:
            raw = handle.read()
    except OSError as exc:
        raise SchemaViolation([f"{path}: {exc.strerror or exc}"]) from exc
    try:
        payload = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaViolation([f"{path}: not valid JSON ({exc})"]) from exc
    return parse_game_payload(payload), raw


def parse_game(path) -> GameSpec:
    """Parse and validate a game file."""
    return _load(path)[0]


def _payoff_payload(spec) -> dict:
    if isinstance(spec, Constant):
        out = {"kind": "constant", "value": _format_number(spec.value)}
    elif isinstance(spec, (LimsupAverage, EvenStageLimsupAverage, LimsupStage)):
        kind = {
            LimsupAverage: "limsup_average",
            EvenStageLimsupAverage: "even_stage_limsup_average",
            LimsupStage: "limsup_stage",
        }[type(spec)]
        out = {
            "kind": kind,
            "stage_values": [[_format_number(x) for x in row] for row in spec.stage_values],
        }
    elif isinstance(spec, Buchi):
        out = {
            "kind": "buchi",
            "profiles": [list(p) for p in sorted(spec.profiles)],
            "hit_payoff": _format_number(spec.hit_payoff),
            "miss_payoff": _format_number(spec.miss_payoff),
        }
    elif isinstance(spec, CoBuchi):
        out = {
            "kind": "cobuchi",
            "profiles": [list(p) for p in sorted(spec.profiles)],
            "finite_payoff": _format_number(spec.finite_payoff),
            "infinite_payoff": _format_number(spec.infinite_payoff),
        }
    else:
        raise TypeError(f"unknown payoff spec {type(spec).__name__}")
    if spec.declared_minmax is not None:
        out["declared_minmax"] = _format_number(spec.declared_minmax)
    return out


def serialize_game(game: GameSpec) -> str:
    """Canonical text form; parse(serialize(g)) reproduces g exactly."""
    payload = {
        "schema": GAME_SCHEMA,
        "name": game.name,
        "actions1": list(game.actions1),
        "actions2": list(game.actions2),
        "absorb_prob": [[_format_number(x) for x in row] for row in game.absorb_prob],
        "absorb_payoff1": [[_cell(x) for x in row] for row in game.absorb_payoff1],
        "absorb_payoff2": [[_cell(x) for x in row] for row in game.absorb_payoff2],
        "payoff1": _payoff_payload(game.payoff1),
        "payoff2": _payoff_payload(game.payoff2),
        "bound": _format_number(game.bound),
    }
    return json.dumps(payload, indent=2) + "\n"


def bundled_fixture(name: str):
    """Filesystem path of a fixture shipped with the package."""
    return resources.files("abgames").joinpath("fixtures", name)


# ---------------------------------------------------------------------------
# report plumbing


def _jsonable(obj):
    if isinstance(obj, MixedAction):
        return [float(w) for w in obj.weights]
    if isinstance(obj, MixedProfile):
        return {"x1": _jsonable(obj.x1), "x2": _jsonable(obj.x2)}
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return None if math.isnan(x) else x
    if isinstance(obj, (np.integer, int, bool)) or obj is None or isinstance(obj, str):
        return int(obj) if isinstance(obj, np.integer) else obj
    if isinstance(obj, np.ndarray):
        return [_jsonable(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {
            (",".join(map(str, k)) if isinstance(k, tuple) else str(k)): _jsonable(x)
            for k, x in obj.items()
        }
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [_jsonable(x) for x in items]
    if is_dataclass(obj):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclass_fields(obj)}
    raise TypeError(f"cannot serialize {type(obj).__name__} into a report")


def _skeleton(command: str, path, raw: bytes, flags: dict) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "tool": {"name": "abgames", "version": __version__},
        "command": command,
        "input": {"path": str(path), "sha256": hashlib.sha256(raw).hexdigest()},
        "flags": _jsonable(flags),
    }


def _minmax_payload(rep) -> dict:
    return {
        "v1": float(rep.v1),
        "v2": float(rep.v2),
        "method1": rep.method1,
        "method2": rep.method2,
        "residual1": float(rep.residual1),
        "residual2": float(rep.residual2),
        "punisher1": _jsonable(rep.punisher1),
        "punisher2": _jsonable(rep.punisher2),
        "safe1": _jsonable(rep.safe1),
        "safe2": _jsonable(rep.safe2),
    }


def _classification_payload(result) -> dict:
    case = result.case
    payload = {
        "minmax": _minmax_payload(result.minmax),
        "auxiliary": {
            "v1_inf": float(result.v_inf[0]),
            "v2_inf": float(result.v_inf[1]),
            "stage_payoffs": [result.aux.stage_payoff(1), result.aux.stage_payoff(2)],
            "epsilon": result.aux.epsilon,
        },
        "trace": [
            {
                "lambda": entry.lam,
                "profile": _jsonable(entry.profile),
                "payoffs": _jsonable(entry.payoffs),
                "residual": entry.residual,
            }
            for entry in result.trace.entries
        ],
        "limit": _jsonable(result.limit),
        "case": {
            "tag": case.tag,
            "detail": _jsonable(case.detail),
            "ledger": _jsonable(case.raw),
            "near_boundary": _jsonable(case.near_boundary),
        },
    }
    return payload


def _write_report(report: dict, out_path) -> None:
    if out_path is None:
        return
    text = json.dumps(report, indent=2) + "\n"
    with open(out_path, "w", encoding="utf-8") as handle:
        handle.write(text)


def _parse_schedule(text):
    if text is None:
        return None
    try:
        values = tuple(float(Fraction(tok)) for tok in text.split(",") if tok.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise SchemaViolation([f"--lambda-schedule: {exc}"]) from exc
    if not values:
        raise SchemaViolation(["--lambda-schedule: empty schedule"])
    return values


def _parse_families_flag(text, machine1, machine2):
    """Concrete deviation families from a comma list like pure,comply,grid:0.05."""
    tokens = [tok.strip() for tok in (text or "pure,comply,grid").split(",") if tok.strip()]
    resolution = 0.05
    for tok in tokens:
        if tok.startswith("grid:"):
            resolution = float(Fraction(tok.split(":", 1)[1]))
    aligned = certification_families(machine1, machine2, resolution=resolution)
    by_name = {"pure": aligned[0], "comply": aligned[1], "grid": aligned[2]}
    out = []
    for tok in tokens:
        name = tok.split(":", 1)[0]
        if name not in by_name:
            raise SchemaViolation(
                [f"--families: unknown family {tok!r}; use pure, comply, grid[:res]"]
            )
        if by_name[name] not in out:
            out.append(by_name[name])
    return out


# ---------------------------------------------------------------------------
# commands


def _cmd_solve(args) -> int:
    game, raw = _load(args.game)
    rep = minmax_values(game, _parse_schedule(args.lambda_schedule))
    report = _skeleton("solve", args.game, raw, {"lambda_schedule": args.lambda_schedule})
    report["minmax"] = _minmax_payload(rep)
    print(
        f"{game.name or args.game}: "
        f"v1 = {rep.v1:.6f} ({rep.method1}, residual {rep.residual1:.2e}), "
        f"v2 = {rep.v2:.6f} ({rep.method2}, residual {rep.residual2:.2e})"
    )
    _write_report(report, args.out)
    return EXIT_OK


def _describe_case(case) -> str:
    if case.tag == "case1":
        return "absorbing limit profile kept with deadline and punishment"
    if case.tag == "case2":
        d = case.detail
        return f"player {d.player} exits via action {d.action} under a frequency test"
    if case.tag == "case3soft":
        d = case.detail
        return f"player {d.player} exits via action {d.action} against a safe response"
    return "difficult case: no construction within this theory"


def _cmd_classify(args) -> int:
    game, raw = _load(args.game)
    result = run_pipeline(
        game, args.epsilon, _parse_schedule(args.lambda_schedule), **_tol_kw(args)
    )
    report = _skeleton(
        "classify", args.game, raw,
        {"epsilon": args.epsilon, "lambda_schedule": args.lambda_schedule, "tol": args.tol},
    )
    report["classification"] = _classification_payload(result)
    x0 = result.limit.x0
    print(
        f"{game.name or args.game}: {result.case.tag} at epsilon={args.epsilon:g}; "
        f"x0 = ({_fmt_mixed(x0.x1, game.actions1)}, {_fmt_mixed(x0.x2, game.actions2)})"
    )
    print(f"  {_describe_case(result.case)}")
    _write_report(report, args.out)
    return EXIT_DIFFICULT if result.case.tag == "case3hard" else EXIT_OK


def _fmt_mixed(action: MixedAction, labels) -> str:
    picks = [
        (labels[a] if a < len(labels) else str(a), float(action.weights[a]))
        for a in action.support
    ]
    if len(picks) == 1:
        return picks[0][0]
    return "+".join(f"{w:g}*{label}" for label, w in picks)


def _tol_kw(args):
    return {} if args.tol is None else {"tol": args.tol}


def _build_profile(args, game, result):
    kwargs = {} if args.tol is None else {"tol": args.tol}
    return build_equilibrium(result, game, args.epsilon, **kwargs)


def _exact_payload(ev) -> dict:
    return {
        "payoffs": _jsonable(ev.payoffs),
        "method": ev.method,
        "absorption_probability": ev.absorption_probability,
        "expected_absorption_stage": _jsonable(ev.expected_absorption_stage),
    }


def _cmd_build_verify(args) -> int:
    game, raw = _load(args.game)
    result = run_pipeline(
        game, args.epsilon, _parse_schedule(args.lambda_schedule), **_tol_kw(args)
    )
    report = _skeleton(
        "build-verify", args.game, raw,
        {
            "epsilon": args.epsilon, "lambda_schedule": args.lambda_schedule,
            "tol": args.tol, "families": args.families,
            "runs": args.runs, "seed": args.seed, "tmax": args.tmax,
        },
    )
    report["classification"] = _classification_payload(result)
    if result.case.tag == "case3hard":
        print(f"{game.name or args.game}: case3hard; no construction applies")
        print("  evidence ledger written to the report" if args.out else
              "  rerun with --out to capture the evidence ledger")
        _write_report(report, args.out)
        return EXIT_DIFFICULT

    profile = _build_profile(args, game, result)
    families = _parse_families_flag(args.families, profile.machine1, profile.machine2)
    cert = certify_epsilon_equilibrium(profile, game, families)
    ev = exact_profile_value(profile.machine1, profile.machine2, game)
    sim = monte_carlo(
        profile.machine1, profile.machine2, game, args.runs, args.tmax, args.seed
    )
    report["profile"] = profile.to_payload()
    report["exact"] = _exact_payload(ev)
    report["certificate"] = {
        "target_epsilon": cert.target_epsilon,
        "verdict": cert.verdict,
        "gains": _jsonable(cert.gains),
        "families": list(cert.families),
        "deviations": _jsonable(cert.deviations),
    }
    report["simulation"] = sim.to_payload()
    print(
        f"{game.name or args.game}: built {profile.tag} profile, "
        f"target epsilon {profile.target_epsilon:g}"
    )
    print(
        f"  exact payoffs ({ev.payoffs[0]:.6f}, {ev.payoffs[1]:.6f}) [{ev.method}], "
        f"absorption {ev.absorption_probability:.4f}"
    )
    print(
        f"  certificate: {cert.verdict}; gains "
        f"({cert.gains[0]:.6f}, {cert.gains[1]:.6f})"
    )
    print(
        f"  simulation: {sim.runs} runs, means "
        f"({sim.payoff_means[0]:.4f}, {sim.payoff_means[1]:.4f}), "
        f"absorption rate {sim.absorption_rate:.4f}"
    )
    _write_report(report, args.out)
    return EXIT_OK if cert.certified else EXIT_NOT_CERTIFIED


def _cmd_simulate(args) -> int:
    game, raw = _load(args.game)
    result = run_pipeline(
        game, args.epsilon, _parse_schedule(args.lambda_schedule), **_tol_kw(args)
    )
    report = _skeleton(
        "simulate", args.game, raw,
        {
            "epsilon": args.epsilon, "lambda_schedule": args.lambda_schedule,
            "tol": args.tol, "runs": args.runs, "seed": args.seed, "tmax": args.tmax,
        },
    )
    if result.case.tag == "case3hard":
        report["classification"] = _classification_payload(result)
        print(f"{game.name or args.game}: case3hard; nothing to simulate")
        _write_report(report, args.out)
        return EXIT_DIFFICULT
    profile = _build_profile(args, game, result)
    sim = monte_carlo(
        profile.machine1, profile.machine2, game, args.runs, args.tmax, args.seed
    )
    report["profile"] = profile.to_payload()
    report["simulation"] = sim.to_payload()
    print(
        f"{game.name or args.game}: {sim.runs} runs at horizon {sim.horizon} "
        f"({sim.backend} backend)"
    )
    print(
        f"  payoff means ({sim.payoff_means[0]:.4f}, {sim.payoff_means[1]:.4f}) "
        f"+- ({sim.payoff_ci99[0]:.4f}, {sim.payoff_ci99[1]:.4f}) at 99%"
    )
    print(
        f"  absorption rate {sim.absorption_rate:.4f}, "
        f"mean stage {sim.mean_absorption_stage:.2f}"
    )
    _write_report(report, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abgames",
        description="Solve, classify, build, and verify absorbing games "
        "with tail-measurable payoffs.",
    )
    parser.add_argument("--version", action="version", version=f"abgames {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, epsilon=False, sim=False, families=False):
        p.add_argument("game", help="path to a game file (JSON, schema v1)")
        p.add_argument("--lambda-schedule", default=None,
                       help="comma-separated decreasing discount factors")
        p.add_argument("--out", default=None, help="write the JSON report here")
        if epsilon:
            p.add_argument("--epsilon", type=float, required=True,
                           help="equilibrium tolerance for the classification")
            p.add_argument("--tol", type=float, default=None,
                           help="numerical tolerance of the case checks")
        if families:
            p.add_argument("--families", default=None,
                           help="deviation families: pure,comply,grid[:resolution]")
        if sim:
            p.add_argument("--runs", type=int, default=10000,
                           help="independent simulated plays")
            p.add_argument("--seed", type=int, default=0, help="base random seed")
            p.add_argument("--tmax", type=int, default=2048,
                           help="stage horizon per simulated play")

    p_solve = sub.add_parser("solve", help="minmax values of both players")
    common(p_solve)
    p_solve.set_defaults(func=_cmd_solve)

    p_classify = sub.add_parser("classify", help="case classification at epsilon")
    common(p_classify, epsilon=True)
    p_classify.set_defaults(func=_cmd_classify)

    p_build = sub.add_parser(
        "build-verify", help="construct the equilibrium machines and certify them"
    )
    common(p_build, epsilon=True, sim=True, families=True)
    p_build.set_defaults(func=_cmd_build_verify)

    p_sim = sub.add_parser("simulate", help="Monte Carlo runs of the built machines")
    common(p_sim, epsilon=True, sim=True)
    p_sim.set_defaults(func=_cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except SchemaViolation as exc:
        for line in exc.violations:
            print(f"error: {line}", file=sys.stderr)
        return EXIT_USAGE
    except GameValidationError as exc:
        for line in getattr(exc, "violations", [str(exc)]):
            print(f"error: {line}", file=sys.stderr)
        return EXIT_USAGE
    except (UnsupportedPayoffForMinmax, UnsupportedExactEvaluation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except _BUILD_FAILURES as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NOT_CERTIFIED
    except _INTERNAL_FAILURES as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except AbgamesError as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
