"""Hand-built benchmark games shared across the test modules.

Every number here was derived on paper; tests treat them as frozen oracles.
"""

import numpy as np

from abgames import (
    Buchi,
    CoBuchi,
    Constant,
    GameSpec,
    LimsupAverage,
)

NAN = float("nan")


def quit_or_loop(payout1=0.7, payout2=0.3, tail1=0.2, tail2=0.6):
    """1x1 game absorbing with probability one; values are the absorb payoffs."""
    return GameSpec(
        actions1=("Q",), actions2=("*",),
        absorb_prob=[[1.0]],
        absorb_payoff1=[[payout1]], absorb_payoff2=[[payout2]],
        payoff1=Constant(tail1), payoff2=Constant(tail2),
        name="quit_or_loop",
    )


def exit_choice():
    """Quit-timing game: player 1 decides when to absorb, player 2 how.

    Player 1's tail payoff pays 1 unless (C, L) recurs forever, so only a
    mixed stationary opponent drives a best reply down toward 0; the declared
    minmax 0 passes the one-shot check with residual 0.  Player 2's tail
    payoff is flat 0.5 and her minmax computes to 0.5 at every discount.
    """
    return GameSpec(
        actions1=("C", "Q"), actions2=("L", "R"),
        absorb_prob=[[0.0, 0.0], [1.0, 1.0]],
        absorb_payoff1=[[NAN, NAN], [1.0, 0.0]],
        absorb_payoff2=[[NAN, NAN], [0.0, 1.0]],
        payoff1=CoBuchi(frozenset({(0, 0)}), finite_payoff=1.0, infinite_payoff=0.0,
                        declared_minmax=0.0),
        payoff2=Constant(0.5),
        name="exit_choice",
    )


def big_match():
    """Zero-sum Big Match with limsup-average stage payoffs.

    Discounted value is 0.5 at every discount factor; the row player's
    optimal stationary weight on the quitting row is lam / (1 + lam).
    """
    z1 = [[0.0, 1.0], [0.0, 0.0]]
    z2 = [[1.0, 0.0], [0.0, 0.0]]
    return GameSpec(
        actions1=("C", "Q"), actions2=("L", "R"),
        absorb_prob=[[0.0, 0.0], [1.0, 1.0]],
        absorb_payoff1=[[NAN, NAN], [1.0, 0.0]],
        absorb_payoff2=[[NAN, NAN], [0.0, 1.0]],
        payoff1=LimsupAverage(np.array(z1)),
        payoff2=LimsupAverage(np.array(z2)),
        name="big_match",
    )


def delayed_exit():
    """Nonabsorbing cell (T, L) supports a unilateral absorbing exit.

    Both minmax values are 0.5 at every discount.  With epsilon = 0.125 the
    auxiliary level is 0.375 and player 1's exit row B against L pays exactly
    (0.375, 0.9), sitting on the level for player 1 and above it for player 2.
    """
    return GameSpec(
        actions1=("T", "B"), actions2=("L", "R"),
        absorb_prob=[[0.0, 1.0], [1.0, 1.0]],
        absorb_payoff1=[[NAN, 0.5], [0.375, 0.0]],
        absorb_payoff2=[[NAN, 0.0], [0.9, 0.0]],
        payoff1=Constant(0.5),
        payoff2=Constant(0.5),
        name="delayed_exit",
    )


def stubborn_match():
    """Big Match dynamics with opposed recurrence payoffs and declared minmaxes.

    Each declared value 0.75 has one-shot consistency residual exactly 0.
    Safe sets: player 1 is pinned to the continuing row, player 2 to weights
    with at least 0.75 on R; no profile in their product absorbs and neither
    player has an absorbing reply that reaches the level, so no equilibrium
    construction applies at small epsilon.
    """
    return GameSpec(
        actions1=("C", "Q"), actions2=("L", "R"),
        absorb_prob=[[0.0, 0.0], [1.0, 1.0]],
        absorb_payoff1=[[NAN, NAN], [1.0, 0.0]],
        absorb_payoff2=[[NAN, NAN], [0.0, 1.0]],
        payoff1=Buchi(frozenset({(0, 0)}), hit_payoff=1.0, miss_payoff=0.0,
                      declared_minmax=0.75),
        payoff2=Buchi(frozenset({(0, 1)}), hit_payoff=1.0, miss_payoff=0.0,
                      declared_minmax=0.75),
        name="stubborn_match",
    )


BENCHMARKS = {
    "quit_or_loop": quit_or_loop,
    "exit_choice": exit_choice,
    "big_match": big_match,
    "delayed_exit": delayed_exit,
    "stubborn_match": stubborn_match,
}
