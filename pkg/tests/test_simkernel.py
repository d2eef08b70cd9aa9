"""Simulation kernels: backend equivalence, replay fidelity, aggregation.

The two kernels must agree bit for bit, and both must agree with a direct
replay that advances the machines through the public transition function
while consuming the same per-run random streams.
"""

import math

import numpy as np
import pytest
from numpy.random import PCG64, Generator, SeedSequence

import abgames.simkernel as sk
from abgames.errors import EmptyWindow
from abgames.game import (
    Buchi,
    EvenStageLimsupAverage,
    GameSpec,
    LimsupAverage,
    MixedAction,
    MixedProfile,
    stationary_payoff,
)
from abgames.machines import (
    FrequencyTest,
    OutOfSupport,
    Phase,
    StageExpiry,
    StatTestSpec,
    StrategyMachine,
    advance,
    hoeffding_threshold,
    initial_state,
    stationary_machine,
)
from abgames.verify import exact_profile_value, monte_carlo

from _factories import big_match, stubborn_match

NAN = float("nan")
needs_compiled = pytest.mark.skipif(
    sk.backend_name() != "compiled", reason="compiled kernel not built"
)


def mixed(*weights):
    return MixedAction.from_numeric(weights)


def rich_machines():
    """One tested machine and one watcher, covering every trigger kind."""
    kappa = hoeffding_threshold(2, 2, 0.9, 4)
    spec = StatTestSpec(mixed(0.5, 0.5), 4, kappa, 0.9, 2)
    m1 = StrategyMachine(1, (
        Phase(mixed(0.1, 0.9), None, ((FrequencyTest(spec), 1),), "main"),
        Phase(mixed(0.3, 0.7), 6, ((StageExpiry(6), 2),), "mid"),
        Phase(MixedAction.pure(0, 2), None, (), "tail"),
    ))
    m2 = StrategyMachine(2, (
        Phase(mixed(0.6, 0.4), None, ((OutOfSupport((1,)), 1),), "watch"),
        Phase(mixed(0.5, 0.5), 3, ((StageExpiry(3), 0),), "flip"),
    ))
    return m1, m2


def nonabsorbing_game(payoff1, payoff2):
    return GameSpec(
        actions1=("a", "b"), actions2=("c",),
        absorb_prob=[[0.0], [0.0]],
        absorb_payoff1=[[NAN], [NAN]],
        absorb_payoff2=[[NAN], [NAN]],
        payoff1=payoff1, payoff2=payoff2,
        name="quiet",
    )


class TestBackends:
    @needs_compiled
    def test_backends_bit_identical(self):
        m1, m2 = rich_machines()
        game = big_match()
        compiled = sk.run_profile(m1, m2, game, 250, 157, 79, seed=99, backend="compiled")
        pure = sk.run_profile(m1, m2, game, 250, 157, 79, seed=99, backend="pure")
        assert set(compiled) == set(pure)
        for key in compiled:
            assert np.array_equal(compiled[key], pure[key]), key

    def test_unknown_backend_rejected(self):
        m1, m2 = rich_machines()
        with pytest.raises(ValueError):
            sk.run_profile(m1, m2, big_match(), 2, 4, 2, seed=0, backend="gpu")

    def test_machine_order_enforced(self):
        m1, m2 = rich_machines()
        with pytest.raises(ValueError):
            sk.run_profile(m2, m1, big_match(), 2, 4, 2, seed=0)

    def test_window_start_bounds(self):
        m1, m2 = rich_machines()
        with pytest.raises(ValueError):
            sk.run_profile(m1, m2, big_match(), 2, 4, 5, seed=0)


class TestReplayFidelity:
    def test_matches_public_transition_function(self):
        # Replays 30 runs with machines.advance, sampling actions from the
        # same packed cumulative weights and the same (seed, run) streams.
        m1, m2 = rich_machines()
        game = big_match()
        t_max, seed = 157, 99
        raw = sk.run_profile(m1, m2, game, 30, t_max, 79, seed=seed)
        p = game.absorb_prob
        cdf1 = sk.pack_machine(m1, 2)["cdf"].tolist()
        cdf2 = sk.pack_machine(m2, 2)["cdf"].tolist()

        def sample(row, u):
            a = 0
            while a < len(row) - 1 and u >= row[a]:
                a += 1
            return a

        for run in range(30):
            gen = Generator(PCG64(SeedSequence((seed, run))))
            s1, s2 = initial_state(m1), initial_state(m2)
            stage, cell = 0, (-1, -1)
            fires1, fires2 = [0, 0, 0], [0, 0, 0]
            for t in range(1, t_max + 1):
                u1, u2, u3 = gen.random(), gen.random(), gen.random()
                a1 = sample(cdf1[s1.phase], u1)
                a2 = sample(cdf2[s2.phase], u2)
                if u3 < p[a1, a2]:
                    stage, cell = t, (a1, a2)
                    break
                s1, f1 = advance(m1, s1, a2)
                s2, f2 = advance(m2, s2, a1)
                for fired, acc in ((f1, fires1), (f2, fires2)):
                    if fired is None:
                        continue
                    if isinstance(fired, OutOfSupport):
                        acc[0] += 1
                    elif isinstance(fired, FrequencyTest):
                        acc[1] += 1
                    else:
                        acc[2] += 1
            assert stage == raw["stage"][run]
            assert cell == (raw["a1"][run], raw["a2"][run])
            assert fires1 == list(raw["fires1"][run])
            assert fires2 == list(raw["fires2"][run])


class TestWindowStatistics:
    def test_deterministic_pair_statistics(self):
        # Pure C vs pure L never absorbs; over window stages 6..10 the cell
        # is constant, so sums and maxima are exact multiples.
        game = big_match()
        raw = sk.run_profile(
            stationary_machine(1, MixedAction.pure(0, 2)),
            stationary_machine(2, MixedAction.pure(0, 2)),
            game, 3, 10, 6, seed=1,
        )
        assert np.all(raw["stage"] == 0)
        assert np.all(raw["a1"] == -1)
        # z1(C, L) = 0, z2(C, L) = 1, five window stages of which 6, 8, 10 are even
        assert np.all(raw["wsum1"] == 0.0)
        assert np.all(raw["wsum2"] == 5.0)
        assert np.all(raw["esum2"] == 3.0)
        assert np.all(raw["wmax2"] == 1.0)
        assert np.all(raw["hit1"] == 0)

    def test_recurrence_mask_hits(self):
        # stubborn_match pays through visits to (C, L) and (C, R); playing
        # (C, L) forever must set player 1's hit flag and not player 2's.
        game = stubborn_match()
        raw = sk.run_profile(
            stationary_machine(1, MixedAction.pure(0, 2)),
            stationary_machine(2, MixedAction.pure(0, 2)),
            game, 2, 8, 5, seed=3,
        )
        assert np.all(raw["hit1"] == 1)
        assert np.all(raw["hit2"] == 0)


class TestMonteCarlo:
    def test_deterministic_report(self):
        m1, m2 = rich_machines()
        game = big_match()
        rep1 = monte_carlo(m1, m2, game, runs=400, t_max=64, seed=17)
        rep2 = monte_carlo(m1, m2, game, runs=400, t_max=64, seed=17)
        assert rep1 == rep2
        rep3 = monte_carlo(m1, m2, game, runs=400, t_max=64, seed=18)
        assert rep3.payoff_means != rep1.payoff_means

    def test_mean_matches_exact_stationary_value(self):
        game = big_match()
        m1 = stationary_machine(1, mixed(0.5, 0.5))
        m2 = stationary_machine(2, mixed(0.7, 0.3))
        exact = exact_profile_value(m1, m2, game)
        rep = monte_carlo(m1, m2, game, runs=20000, t_max=64, seed=11)
        for k in range(2):
            assert abs(rep.payoff_means[k] - exact.payoffs[k]) < rep.payoff_ci99[k]
        assert rep.absorption_rate == 1.0
        assert abs(rep.mean_absorption_stage - 2.0) < 0.05
        assert rep.absorption_histogram[0][0] == 1
        assert sum(count for _, count in rep.absorption_histogram) == 20000

    def test_mean_matches_exact_tested_machine(self):
        game = big_match()
        spec = StatTestSpec(
            mixed(0.5, 0.5), 4, hoeffding_threshold(2, 1, 0.9, 4), 0.9, 1
        )
        m1 = StrategyMachine(1, (
            Phase(MixedAction.pure(0, 2), None, ((FrequencyTest(spec), 1),), "main"),
            Phase(MixedAction.pure(1, 2), None, (), "punish"),
        ))
        m2 = stationary_machine(2, mixed(0.9, 0.1))
        exact = exact_profile_value(m1, m2, game)
        rep = monte_carlo(m1, m2, game, runs=20000, t_max=64, seed=5)
        for k in range(2):
            assert abs(rep.payoff_means[k] - exact.payoffs[k]) < 1.5 * rep.payoff_ci99[k]
        tau = 0.9 ** 4 + 0.1 ** 4
        se = math.sqrt(tau * (1 - tau) / 20000)
        assert abs(rep.trigger_rates[0][1] - tau) < 4 * se
        assert rep.trigger_rates[0][0] == 0.0
        assert rep.trigger_rates[1] == (0.0, 0.0, 0.0)

    def test_unabsorbed_constant_window(self):
        # Pure C vs pure R pays the window mean of a constant cell, so the
        # per-run samples have zero variance and the interval collapses.
        game = big_match()
        rep = monte_carlo(
            stationary_machine(1, MixedAction.pure(0, 2)),
            stationary_machine(2, MixedAction.pure(1, 2)),
            game, runs=50, t_max=32, seed=2,
        )
        assert rep.payoff_means == (1.0, 0.0)
        assert rep.payoff_ci99 == (0.0, 0.0)
        assert rep.absorption_rate == 0.0
        assert rep.unabsorbed_runs == 50
        assert rep.mean_absorption_stage == math.inf
        assert rep.absorption_histogram == ()

    def test_even_stage_estimator(self):
        # A two-phase cycle plays action a at odd stages and b at even ones;
        # the even-stage average must see only the even-stage cell.
        z = np.array([[0.25], [0.75]])
        game = nonabsorbing_game(
            EvenStageLimsupAverage(z), LimsupAverage(np.array([[0.5], [0.5]]))
        )
        m1 = StrategyMachine(1, (
            Phase(MixedAction.pure(0, 2), 1, ((StageExpiry(1), 1),), "odd"),
            Phase(MixedAction.pure(1, 2), 1, ((StageExpiry(1), 0),), "even"),
        ))
        m2 = stationary_machine(2, MixedAction.pure(0, 1))
        rep = monte_carlo(m1, m2, game, runs=4, t_max=8, seed=0)
        assert rep.payoff_means == (0.75, 0.5)

    def test_even_stage_empty_window_raises(self):
        game = nonabsorbing_game(
            EvenStageLimsupAverage(np.array([[0.25], [0.75]])),
            LimsupAverage(np.array([[0.5], [0.5]])),
        )
        m1 = stationary_machine(1, MixedAction.pure(0, 2))
        m2 = stationary_machine(2, MixedAction.pure(0, 1))
        with pytest.raises(EmptyWindow):
            monte_carlo(m1, m2, game, runs=4, t_max=1, seed=0)

    def test_run_count_floor(self):
        m1, m2 = rich_machines()
        with pytest.raises(ValueError):
            monte_carlo(m1, m2, big_match(), runs=1, t_max=4, seed=0)

    def test_payload_round_trip_fields(self):
        m1, m2 = rich_machines()
        rep = monte_carlo(m1, m2, big_match(), runs=50, t_max=16, seed=23)
        payload = rep.to_payload()
        assert payload["runs"] == 50
        assert payload["backend"] == rep.backend
        assert set(payload["trigger_rates"]) == {"machine1", "machine2"}
        assert payload["trigger_rates"]["machine2"]["out_of_support"] == rep.trigger_rates[1][0]
