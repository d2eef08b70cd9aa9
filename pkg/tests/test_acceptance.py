"""End-to-end acceptance gates: one test per release criterion.

Each test prints a single PASS line with its headline numbers once every
assertion inside it has held, so the suite log doubles as the acceptance
report.  The shared fuzz corpus is a fixed 200-game mix of three templates
(absorbing-everywhere, guarded sparse, tied-exit) built from one seeded
generator; every corpus game must classify and, outside the no-construction
case, build and certify.
"""

import itertools
import json
import time

import numpy as np
import pytest

from _factories import big_match, delayed_exit, exit_choice, quit_or_loop
from abgames.builder import build_equilibrium, certification_families
from abgames.cli import bundled_fixture, main as cli_main
from abgames.game import GameSpec, LimsupAverage, MixedAction
from abgames.machines import stationary_machine
from abgames.pipeline import auxiliary_minmax, build_auxiliary, run_pipeline
from abgames.solvers import (
    DEFAULT_SCHEDULE,
    minmax_values,
    safe_polytope,
    shapley_discounted_value,
    vanishing_discount_value,
)
from abgames.verify import (
    ComplyThenDeviate,
    MixedStationaryGrid,
    PureStationary,
    best_response_bound,
    certify_epsilon_equilibrium,
    default_comply_stages,
    exact_profile_value,
    monte_carlo,
)

EPS = 0.1
CORPUS_SEED = 20260815
CORPUS_TOL = 5e-4  # classification slack above the discount schedule truncation error
NAN = float("nan")


# ---------------------------------------------------------------------------
# fuzz corpus


def _labels(m, n):
    return (tuple(f"a{i + 1}" for i in range(m)), tuple(f"b{j + 1}" for j in range(n)))


def _dense_game(rng, name):
    """Every cell absorbs with probability at least 0.3."""
    m, n = int(rng.choice([2, 2, 2, 3, 3, 4])), int(rng.choice([2, 2, 3, 3]))
    if m == 4:
        n = int(rng.choice([2, 3]))
    rows, cols = _labels(m, n)
    return GameSpec(
        actions1=rows, actions2=cols,
        absorb_prob=rng.uniform(0.3, 1.0, (m, n)),
        absorb_payoff1=rng.random((m, n)), absorb_payoff2=rng.random((m, n)),
        payoff1=LimsupAverage(rng.random((m, n))),
        payoff2=LimsupAverage(rng.random((m, n))),
        name=name,
    )


def _grid_points(n, steps):
    for combo in itertools.combinations(range(steps + n - 1), n - 1):
        bars = (-1,) + combo + (steps + n - 1,)
        yield np.array([bars[k + 1] - bars[k] - 1 for k in range(n)], dtype=float) / steps


def _stationary_punish_level(game, punished, steps=20):
    """Best payoff the punished player can defend against a stationary grid mix."""
    if punished == 1:
        p = game.absorb_prob
        r = game.safe_absorb_payoff(1)
        z = game.payoff1.stage_values
    else:
        p = game.absorb_prob.T
        r = game.safe_absorb_payoff(2).T
        z = game.payoff2.stage_values.T
    best = np.inf
    for y in _grid_points(p.shape[1], steps):
        pbar = p @ y
        rbar = (p * r) @ y
        zbar = z @ y
        score = np.where(pbar > 1e-12, rbar / np.where(pbar > 1e-12, pbar, 1.0), zbar)
        best = min(best, float(score.max()))
    return best


def _sparse_game(rng, name):
    """Sparse absorption mask, kept only when stationary punishment is feasible.

    The constructor punishes with stationary mixes, so the corpus filters out
    draws whose zero-sum punishment problem needs reactive play: a draw stays
    only if some grid mix holds each player within epsilon/4 of the minmax.
    """
    while True:
        m, n = int(rng.choice([2, 2, 3])), int(rng.choice([2, 2, 3]))
        mask = rng.random((m, n)) < 0.35
        if not mask.any():
            continue
        rows, cols = _labels(m, n)
        game = GameSpec(
            actions1=rows, actions2=cols,
            absorb_prob=np.where(mask, rng.uniform(0.3, 1.0, (m, n)), 0.0),
            absorb_payoff1=np.where(mask, rng.random((m, n)), NAN),
            absorb_payoff2=np.where(mask, rng.random((m, n)), NAN),
            payoff1=LimsupAverage(rng.random((m, n))),
            payoff2=LimsupAverage(rng.random((m, n))),
            name=name,
        )
        rep = minmax_values(game)
        v = (min(max(rep.v1, 0.0), 1.0), min(max(rep.v2, 0.0), 1.0))
        if (_stationary_punish_level(game, 1) <= v[0] + EPS / 4.0
                and _stationary_punish_level(game, 2) <= v[1] + EPS / 4.0):
            return game


def _tied_exit_game(rng, name):
    """Single nonabsorbing cell whose unilateral exit pays exactly v1 - epsilon.

    Both minmax values are pinned to 0.5 by the 0.5 entries, so row B against
    column L sits on the auxiliary level for player 1 and above it for
    player 2: the classifier must take the mutually-acceptable-exit branch.
    """
    z1 = rng.uniform(0.2, 0.8, (2, 2))
    z2 = rng.uniform(0.2, 0.8, (2, 2))
    z1[0, 0] = 0.5
    z2[0, 0] = 0.5
    return GameSpec(
        actions1=("T", "B"), actions2=("L", "R"),
        absorb_prob=[[0.0, 1.0], [1.0, 1.0]],
        absorb_payoff1=[[NAN, 0.5], [0.5 - EPS, rng.uniform(0.0, 0.35)]],
        absorb_payoff2=[[NAN, rng.uniform(0.05, 0.3)],
                        [rng.uniform(0.55, 0.95), rng.uniform(0.0, 0.3)]],
        payoff1=LimsupAverage(z1), payoff2=LimsupAverage(z2),
        name=name,
    )


def _fuzz_corpus():
    rng = np.random.default_rng(CORPUS_SEED)
    games = [_dense_game(rng, f"fuzz-dense-{k:03d}") for k in range(90)]
    games += [_sparse_game(rng, f"fuzz-sparse-{k:03d}") for k in range(80)]
    games += [_tied_exit_game(rng, f"fuzz-tie-{k:03d}") for k in range(30)]
    return games


@pytest.fixture(scope="module")
def classified():
    return [(game, run_pipeline(game, EPS, tol=CORPUS_TOL)) for game in _fuzz_corpus()]


@pytest.fixture(scope="module")
def builds(classified):
    out = []
    for game, result in classified:
        if result.case.tag == "case3hard":
            continue
        profile = build_equilibrium(result, game, EPS, tol=CORPUS_TOL)
        out.append((game, result, profile))
    return out


def _report(num, detail):
    print(f"\ncriterion {num}: PASS - {detail}")


# ---------------------------------------------------------------------------
# 1. quit-timing walkthrough through the command line


def test_criterion_1_quit_timing_cli_end_to_end(tmp_path):
    path = str(bundled_fixture("exabs.game"))
    started = time.perf_counter()

    solve_out = tmp_path / "solve.json"
    assert cli_main(["solve", path, "--out", str(solve_out)]) == 0
    solve = json.loads(solve_out.read_text())
    assert abs(solve["minmax"]["v1"]) <= 1e-6
    assert abs(solve["minmax"]["residual1"]) <= 1e-6

    classify_out = tmp_path / "classify.json"
    assert cli_main(["classify", path, "--epsilon", "0.1", "--out", str(classify_out)]) == 0
    case = json.loads(classify_out.read_text())["classification"]["case"]
    assert case["tag"] == "case1"
    assert case["detail"]["x0"] == {"x1": [0.0, 1.0], "x2": [0.0, 1.0]}

    build_out = tmp_path / "build.json"
    assert cli_main(["build-verify", path, "--epsilon", "0.1", "--runs", "500",
                     "--out", str(build_out)]) == 0
    report = json.loads(build_out.read_text())
    assert report["certificate"]["verdict"] == "certified-within-family"
    exact = report["exact"]["payoffs"]
    assert abs(exact[0] - 0.0) <= 1e-6 and abs(exact[1] - 1.0) <= 1e-6

    # the deviator facing the tilted stationary punisher stays at or below eps
    game = exit_choice()
    punisher = stationary_machine(2, MixedAction([EPS, 1.0 - EPS]), "punish")
    families = [
        PureStationary(),
        ComplyThenDeviate(default_comply_stages(punisher)),
        MixedStationaryGrid(0.05),
    ]
    _, worst, label = best_response_bound(
        punisher, 1, families, game, comply_action=MixedAction.pure(1, 2)
    )
    assert worst <= EPS + 1e-6, label
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    _report(1, f"solve/classify/build-verify certified in {elapsed:.2f}s, "
               f"deviator held at {worst:.3f}")


# ---------------------------------------------------------------------------
# 2. minmax sandwich on plain random games


def _plain_random_game(rng, name):
    m = int(rng.choice([2, 3, 4], p=[0.5, 0.3, 0.2]))
    n = int(rng.choice([2, 3, 4], p=[0.5, 0.3, 0.2]))
    mask = rng.random((m, n)) < 0.5
    rows, cols = _labels(m, n)
    return GameSpec(
        actions1=rows, actions2=cols,
        absorb_prob=np.where(mask, rng.random((m, n)), 0.0),
        absorb_payoff1=np.where(mask, rng.random((m, n)), NAN),
        absorb_payoff2=np.where(mask, rng.random((m, n)), NAN),
        payoff1=LimsupAverage(rng.random((m, n))),
        payoff2=LimsupAverage(rng.random((m, n))),
        name=name,
    )


def test_criterion_2_auxiliary_minmax_sandwich():
    rng = np.random.default_rng(CORPUS_SEED + 1)
    started = time.perf_counter()
    checked = 0
    for k in range(200):
        game = _plain_random_game(rng, f"sandwich-{k:03d}")
        rep = minmax_values(game)
        v = (min(max(rep.v1, 0.0), 1.0), min(max(rep.v2, 0.0), 1.0))
        v_inf = auxiliary_minmax(build_auxiliary(game, v, EPS))
        for i in (0, 1):
            assert v[i] - EPS - 1e-4 <= v_inf[i] <= v[i] + 1e-4, (game.name, v, v_inf)
        checked += 1
    elapsed = time.perf_counter() - started
    assert checked == 200
    assert elapsed < 120.0
    _report(2, f"200/200 games inside [v - eps, v] within 1e-4 in {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 3. discounted values of the handbook zero-sum game


def test_criterion_3_big_match_discounted_schedule():
    game = big_match()
    p = game.absorb_prob
    r = game.absorb_payoff(1)
    z = game.payoff1.stage_values
    for lam in DEFAULT_SCHEDULE:
        sol = shapley_discounted_value(p, r, z, lam)
        assert abs(sol.value - 0.5) <= 1e-9, lam
        # hand oracle: the quitting row carries weight lam / (1 + lam)
        assert abs(sol.row_optimal[1] - lam / (1.0 + lam)) <= 1e-8, lam
    trace = vanishing_discount_value(p, r, z)
    assert trace.converged
    assert abs(trace.extrapolated - 0.5) <= 1e-6
    _report(3, f"value 0.5 at all {len(DEFAULT_SCHEDULE)} discounts, "
               f"limit {trace.extrapolated:.9f}")


# ---------------------------------------------------------------------------
# 4. equilibrium traces resist every pure stationary deviation


def _stationary_deviation_ceiling(aux, entry, player):
    """Largest closed-form value of deviating to one row forever."""
    p, r, _ = aux.tables(player)
    y = (entry.profile.x2 if player == 1 else entry.profile.x1).weights
    z = aux.stage_payoff(player)
    pbar = p @ y
    prbar = (p * np.nan_to_num(r)) @ y
    lam = entry.lam
    values = (prbar + (1.0 - pbar) * lam * z) / (lam + (1.0 - lam) * pbar)
    return float(values.max())


def test_criterion_4_trace_pure_deviation_residuals(classified):
    entries = 0
    worst = -np.inf
    for game, result in classified:
        for entry in result.trace.entries:
            assert entry.residual <= 1e-7, (game.name, entry.lam)
            for player in (1, 2):
                ceiling = _stationary_deviation_ceiling(result.aux, entry, player)
                gain = ceiling - entry.payoffs[player - 1]
                worst = max(worst, gain)
                assert gain <= 1e-7, (game.name, entry.lam, player, gain)
            entries += 1
    assert entries >= 200 * len(DEFAULT_SCHEDULE) * 0.9
    _report(4, f"{entries} trace entries, worst closed-form deviation gain {worst:.2e}")


# ---------------------------------------------------------------------------
# 5. built profiles meet the payoff and absorption floors


def test_criterion_5_profile_floors(builds, classified):
    constructible = sum(1 for _, res in classified if res.case.tag != "case3hard")
    assert len(builds) == constructible
    tags = {}
    for game, result, profile in builds:
        params = profile.parameters
        v = params["v"]
        eta = params["eta"]
        n_deadline = params["N"]
        p_main = params["p_main"]
        r_main = params["r_main"]
        bound = params["bound"]
        tags[result.case.tag] = tags.get(result.case.tag, 0) + 1

        reach = 1.0 - (1.0 - p_main) ** n_deadline
        assert abs(params["absorb_by_deadline"] - reach) <= 1e-9, game.name
        assert reach >= 1.0 - eta - 1e-12, game.name
        for i in (0, 1):
            assert (1.0 - eta) * r_main[i] + eta * bound >= v[i] - 1.5 * EPS - 1e-9, (
                game.name, i)

        ev = exact_profile_value(profile.machine1, profile.machine2, game)
        for i in (0, 1):
            assert ev.payoffs[i] >= v[i] - 1.5 * EPS - 1e-9, (game.name, i, ev.payoffs)
    assert tags.get("case1", 0) > 0 and tags.get("case2", 0) > 0
    assert tags.get("case3soft", 0) > 0
    _report(5, f"{len(builds)}/{constructible} builds hold the floors "
               f"(tags {dict(sorted(tags.items()))})")


# ---------------------------------------------------------------------------
# 6. every build certifies within the deviation families


def test_criterion_6_certification_sweep(builds):
    started = time.perf_counter()
    worst_gap = -np.inf
    for game, result, profile in builds:
        target = EPS if result.case.tag == "case3soft" else 2.0 * EPS
        assert abs(profile.target_epsilon - target) <= 1e-12, game.name
        families = certification_families(
            profile.machine1, profile.machine2, resolution=0.05
        )
        cert = certify_epsilon_equilibrium(profile, game, families)
        assert cert.certified, (game.name, cert.gains)
        assert max(cert.gains) <= target + 1e-6, (game.name, cert.gains)
        worst_gap = max(worst_gap, max(cert.gains) - target)
    elapsed = time.perf_counter() - started
    assert elapsed < 600.0
    _report(6, f"{len(builds)} certificates, worst gain-to-target gap "
               f"{worst_gap:.3e}, swept in {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 7. the no-construction verdict and its evidence


def test_criterion_7_difficult_evidence_brute_force(tmp_path):
    path = str(bundled_fixture("stubborn.game"))
    out = tmp_path / "stubborn.json"
    assert cli_main(["classify", path, "--epsilon", "0.1", "--out", str(out)]) == 3
    report = json.loads(out.read_text())
    case = report["classification"]["case"]
    assert case["tag"] == "case3hard"
    evidence = case["detail"]["evidence"]

    from abgames.cli import parse_game

    game = parse_game(path)
    rep = minmax_values(game)
    v = (min(max(rep.v1, 0.0), 1.0), min(max(rep.v2, 0.0), 1.0))
    poly1 = safe_polytope(game, 1, v[0])
    poly2 = safe_polytope(game, 2, v[1])
    grid1 = [y for y in _grid_points(game.n_actions(1), 50) if poly1.contains(y)]
    grid2 = [y for y in _grid_points(game.n_actions(2), 50) if poly2.contains(y)]
    assert grid1 and grid2

    # condition 1: nothing in the safe product absorbs
    p = game.absorb_prob
    brute1 = max(float(a @ p @ b) for a in grid1 for b in grid2)
    assert brute1 <= 1e-9
    assert evidence["condition1"]["max_absorption"] <= 1e-9

    # conditions 2 and 3: no absorbing reply reaches the replier's level
    checked = 0
    for cond, searcher, members in (("condition2", 2, grid1), ("condition3", 1, grid2)):
        pp = p.T if searcher == 2 else p
        rr = (game.safe_absorb_payoff(2).T if searcher == 2
              else game.safe_absorb_payoff(1))
        level = v[searcher - 1]
        for action in range(game.n_actions(searcher)):
            stored = evidence[cond][str(action)]
            mass = pp[action]
            obj = mass * (rr[action] - level)
            vals = [float(obj @ y) for y in members if float(mass @ y) >= 1e-6]
            if stored is None:
                assert not vals, (cond, action)
            else:
                assert stored < 0.0, (cond, action, stored)
                if vals:
                    brute = max(vals)
                    assert brute < 0.0, (cond, action, brute)
                    assert brute <= stored + 1e-9, (cond, action, brute, stored)
                    assert stored - brute <= 0.05, (cond, action, brute, stored)
            checked += 1
    assert checked == game.n_actions(1) + game.n_actions(2)
    _report(7, f"exit 3 with evidence; all {checked} reply margins reproduced "
               f"on the 0.02 grid")


# ---------------------------------------------------------------------------
# 8. exact evaluation against long simulations


def _criterion8_profiles(builds):
    picks = []
    for factory, eps in ((exit_choice, 0.1), (quit_or_loop, 0.1), (delayed_exit, 0.125)):
        game = factory()
        result = run_pipeline(game, eps)
        picks.append((game, build_equilibrium(result, game, eps)))
    by_tag = {}
    for game, result, profile in builds:
        by_tag.setdefault(result.case.tag, []).append((game, profile))
    order = [tag for tag in ("case1", "case2", "case3soft") if tag in by_tag]
    idx = {tag: 0 for tag in order}
    while len(picks) < 20:
        for tag in order:
            pool = by_tag[tag]
            if idx[tag] < len(pool):
                picks.append(pool[idx[tag]])
                idx[tag] += 1
            if len(picks) == 20:
                break
    return picks


def test_criterion_8_simulation_matches_exact_values(builds):
    picks = _criterion8_profiles(builds)
    assert len(picks) == 20
    hits = 0
    worst = ""
    for k, (game, profile) in enumerate(picks):
        ev = exact_profile_value(profile.machine1, profile.machine2, game)
        sim = monte_carlo(profile.machine1, profile.machine2, game,
                          runs=100_000, t_max=2048, seed=8000 + k)
        ok = all(
            abs(sim.payoff_means[i] - ev.payoffs[i]) <= sim.payoff_ci99[i] + 1e-9
            for i in (0, 1)
        )
        hits += ok
        if not ok:
            worst = (f" (missed: {game.name}, exact {ev.payoffs}, "
                     f"sim {sim.payoff_means} +- {sim.payoff_ci99})")
    assert hits >= 19, worst
    _report(8, f"{hits}/20 profiles inside the 99% band at 1e5 runs{worst}")


# ---------------------------------------------------------------------------
# 9. on-path runs rarely trip the statistical test


def test_criterion_9_on_path_false_trigger_rate(builds):
    runs = 10_000
    checked = []
    profiles = []
    game = delayed_exit()
    profiles.append((game, build_equilibrium(run_pipeline(game, 0.125), game, 0.125)))
    tie = next(
        (game, profile) for game, result, profile in builds
        if result.case.tag == "case2"
    )
    profiles.append(tie)
    for game, profile in profiles:
        eta_test = profile.parameters["eta_test"]
        ceiling = eta_test + 3.0 * np.sqrt(eta_test * (1.0 - eta_test) / runs)
        sim = monte_carlo(profile.machine1, profile.machine2, game,
                          runs=runs, t_max=2048, seed=424242)
        for machine_idx in (0, 1):
            out_of_support, frequency, _ = sim.trigger_rates[machine_idx]
            assert out_of_support == 0.0, (game.name, machine_idx)
            assert frequency <= ceiling, (game.name, machine_idx, frequency, ceiling)
            checked.append(frequency)
    _report(9, f"false-trigger rates {[f'{q:.4f}' for q in checked]} all within "
               f"budget {profiles[0][1].parameters['eta_test']:.4f} + 3 SE")
