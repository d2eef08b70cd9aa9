"""Stage-level simulation of strategy-machine pairs.

Two interchangeable kernels share one packed array format and one per-run
seeding rule, so their outputs are bit-identical: a compiled extension
(preferred) and a pure-Python twin.  Set ABGAMES_PURE_KERNEL=1 to force the
fallback, or pass backend="pure"/"compiled" per call.

Per run `r` the stream is PCG64(SeedSequence((seed, r))); each stage consumes
three uniforms: own-action draw for player 1, for player 2, then the
absorption draw (taken every stage, absorbing when strictly below p).
"""

import os

import numpy as np

from ..game import (
    Buchi,
    CoBuchi,
    EvenStageLimsupAverage,
    LimsupAverage,
    LimsupStage,
)
from ..machines import FrequencyTest, OutOfSupport, StageExpiry, check_against_game

from . import _simpy

if os.environ.get("ABGAMES_PURE_KERNEL") == "1":
    _simcore = None
else:
    try:
        from . import _simcore
    except ImportError:
        _simcore = None


def backend_name() -> str:
    """Kernel used by default: "compiled" when the extension loaded."""
    return "pure" if _simcore is None else "compiled"


def _kernel(backend):
    if backend is None:
        return _simpy if _simcore is None else _simcore
    if backend == "pure":
        return _simpy
    if backend == "compiled":
        if _simcore is None:
            raise RuntimeError("compiled simulation kernel is not available")
        return _simcore
    raise ValueError(f"unknown backend {backend!r}")


def pack_machine(machine, n_opp: int) -> dict:
    """Flatten a StrategyMachine into the arrays both kernels consume."""
    phases = machine.phases
    n_ph = len(phases)
    n_own = machine.n_own_actions
    cdf = np.zeros((n_ph, n_own))
    dur = np.full(n_ph, -1, dtype=np.int64)
    exp_t = np.full(n_ph, -1, dtype=np.int64)
    oos_t = np.full(n_ph, -1, dtype=np.int64)
    oos_m = np.ones((n_ph, n_opp), dtype=np.uint8)
    fq_t = np.full(n_ph, -1, dtype=np.int64)
    fq_b = np.ones(n_ph, dtype=np.int64)
    fq_k = np.zeros(n_ph, dtype=np.int64)
    fq_th = np.zeros(n_ph)
    fq_ref = np.zeros((n_ph, n_opp))
    for k, phase in enumerate(phases):
        cdf[k] = np.cumsum(phase.action.weights)
        cdf[k, -1] = 1.0
        if phase.duration is not None:
            dur[k] = phase.duration
        oos = phase.find(OutOfSupport)
        if oos is not None:
            oos_t[k] = oos[1]
            oos_m[k] = 0
            for a in oos[0].support:
                oos_m[k, a] = 1
        freq = phase.find(FrequencyTest)
        if freq is not None:
            spec = freq[0].spec
            fq_t[k] = freq[1]
            fq_b[k] = spec.block_length
            fq_k[k] = spec.blocks_monitored
            fq_th[k] = spec.threshold
            fq_ref[k] = spec.reference_action.weights
        expiry = phase.find(StageExpiry)
        if expiry is not None:
            exp_t[k] = expiry[1]
    return {
        "cdf": np.ascontiguousarray(cdf),
        "dur": dur,
        "exp": exp_t,
        "oos_t": oos_t,
        "oos_m": np.ascontiguousarray(oos_m),
        "fq_t": fq_t,
        "fq_b": fq_b,
        "fq_k": fq_k,
        "fq_th": fq_th,
        "fq_ref": np.ascontiguousarray(fq_ref),
        "init": int(machine.initial),
    }


def pack_tail(spec, shape):
    """(stage values, recurrence mask) consumed by the window accumulators."""
    z = np.zeros(shape)
    mask = np.zeros(shape, dtype=np.uint8)
    if isinstance(spec, (LimsupAverage, EvenStageLimsupAverage, LimsupStage)):
        z = np.ascontiguousarray(np.asarray(spec.stage_values, dtype=float))
    elif isinstance(spec, (Buchi, CoBuchi)):
        for cell in spec.profiles:
            mask[cell] = 1
    return z, mask


def run_profile(m1, m2, game, runs, t_max, first, seed, backend=None) -> dict:
    """Simulate `runs` independent plays of (m1, m2); raw per-run statistics.

    Returns arrays keyed: stage (0 = never absorbed), a1/a2 (absorption
    cell), window sums / even-stage sums / maxima per player, recurrence-hit
    flags, and per-run trigger fire counts [out-of-support, frequency test,
    stage expiry] per machine.
    """
    if m1.player != 1 or m2.player != 2:
        raise ValueError("machines must be passed as (player 1, player 2)")
    check_against_game(m1, game)
    check_against_game(m2, game)
    if runs < 1:
        raise ValueError("need at least one run")
    if t_max < 1:
        raise ValueError("horizon must be at least one stage")
    if not 1 <= first <= t_max:
        raise ValueError("window start must lie inside the horizon")
    p = np.ascontiguousarray(game.absorb_prob, dtype=float)
    z1, mask1 = pack_tail(game.tail_payoff(1), p.shape)
    z2, mask2 = pack_tail(game.tail_payoff(2), p.shape)
    k1 = pack_machine(m1, p.shape[1])
    k2 = pack_machine(m2, p.shape[0])
    kernel = _kernel(backend)
    return kernel.run_batch(
        int(seed), int(runs), int(t_max), int(first),
        p, z1, z2, mask1, mask2,
        k1["cdf"], k1["dur"], k1["exp"], k1["oos_t"], k1["oos_m"],
        k1["fq_t"], k1["fq_b"], k1["fq_k"], k1["fq_th"], k1["fq_ref"], k1["init"],
        k2["cdf"], k2["dur"], k2["exp"], k2["oos_t"], k2["oos_m"],
        k2["fq_t"], k2["fq_b"], k2["fq_k"], k2["fq_th"], k2["fq_ref"], k2["init"],
    )
