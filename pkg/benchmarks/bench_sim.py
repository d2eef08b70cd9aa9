#!/usr/bin/env python3
"""Throughput comparison of the two simulation kernels.

Runs the same strategy-machine workloads through the compiled extension and
the pure-Python twin, checks that matched seeds give bit-identical reports,
and prints runs-per-second for each side.  Workloads cover a plain stationary
pair, a deadline machine with punishment phases, and a frequency-test pair.

Usage: python3 benchmarks/bench_sim.py [--runs N] [--pure-runs N] [--tmax T]
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from _factories import big_match, delayed_exit, exit_choice
from abgames.builder import build_equilibrium
from abgames.game import MixedAction
from abgames.machines import stationary_machine
from abgames.pipeline import run_pipeline
from abgames.simkernel import backend_name
from abgames.verify import monte_carlo


def workloads():
    game = big_match()
    yield ("stationary big-match pair", game,
           stationary_machine(1, MixedAction([0.5, 0.5]), "m1"),
           stationary_machine(2, MixedAction([0.5, 0.5]), "m2"))
    # the continuing row never absorbs, so every run walks the full horizon
    yield ("nonabsorbing pair (full horizon)", game,
           stationary_machine(1, MixedAction([1.0, 0.0]), "m1"),
           stationary_machine(2, MixedAction([0.5, 0.5]), "m2"))
    for factory, eps, label in (
        (exit_choice, 0.1, "deadline machines (quit-timing game)"),
        (delayed_exit, 0.125, "frequency-test machines (delayed exit)"),
    ):
        game = factory()
        profile = build_equilibrium(run_pipeline(game, eps), game, eps)
        yield (label, game, profile.machine1, profile.machine2)


def timed(m1, m2, game, runs, t_max, seed, backend):
    start = time.perf_counter()
    report = monte_carlo(m1, m2, game, runs=runs, t_max=t_max, seed=seed,
                         backend=backend)
    return report, time.perf_counter() - start


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=50_000,
                    help="runs for the compiled kernel (default 50000)")
    ap.add_argument("--pure-runs", type=int, default=2_000,
                    help="runs for the pure kernel (default 2000)")
    ap.add_argument("--match-runs", type=int, default=500,
                    help="runs for the bit-identity check (default 500)")
    ap.add_argument("--tmax", type=int, default=2048)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)

    if backend_name() != "compiled":
        print("compiled kernel unavailable; nothing to compare", file=sys.stderr)
        return 1

    print(f"default backend: {backend_name()}")
    overall = []
    for label, game, m1, m2 in workloads():
        a = monte_carlo(m1, m2, game, runs=args.match_runs, t_max=args.tmax,
                        seed=args.seed, backend="compiled")
        b = monte_carlo(m1, m2, game, runs=args.match_runs, t_max=args.tmax,
                        seed=args.seed, backend="pure")
        identical = (a.payoff_means == b.payoff_means
                     and a.absorption_histogram == b.absorption_histogram
                     and a.trigger_rates == b.trigger_rates)
        _, t_fast = timed(m1, m2, game, args.runs, args.tmax, args.seed, "compiled")
        _, t_slow = timed(m1, m2, game, args.pure_runs, args.tmax, args.seed, "pure")
        fast = args.runs / t_fast
        slow = args.pure_runs / t_slow
        overall.append(fast / slow)
        print(f"{label}:")
        print(f"  bit-identical at {args.match_runs} matched runs: {identical}")
        print(f"  compiled: {fast:,.0f} runs/s   pure: {slow:,.0f} runs/s   "
              f"speedup x{fast / slow:,.1f}")
        if not identical:
            return 1
    print(f"mean speedup x{sum(overall) / len(overall):,.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
