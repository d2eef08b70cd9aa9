import numpy as np
import pytest

from abgames.errors import SizeCapExceeded
from abgames.matrixgames import (
    MatrixGameSolution,
    _zero_sum_lp,
    bimatrix_equilibria,
    zero_sum_value,
)


def test_saddle_point_game():
    sol = zero_sum_value([[2.0, 3.0], [1.0, 0.0]])
    assert sol.value == pytest.approx(2.0, abs=1e-12)
    assert sol.row_optimal == pytest.approx([1.0, 0.0])
    assert sol.col_optimal == pytest.approx([1.0, 0.0])
    assert abs(sol.duality_gap) <= 1e-9


def test_mixed_2x2_closed_form():
    # indifference: 1+2p = 2-p -> p = 1/3, value 5/3; q = 1/3
    sol = zero_sum_value([[3.0, 1.0], [1.0, 2.0]])
    assert sol.value == pytest.approx(5.0 / 3.0, abs=1e-12)
    assert sol.row_optimal == pytest.approx([1.0 / 3.0, 2.0 / 3.0], abs=1e-12)
    assert sol.col_optimal == pytest.approx([1.0 / 3.0, 2.0 / 3.0], abs=1e-12)


def test_matching_pennies():
    sol = zero_sum_value([[1.0, -1.0], [-1.0, 1.0]])
    assert sol.value == pytest.approx(0.0, abs=1e-12)
    assert sol.row_optimal == pytest.approx([0.5, 0.5], abs=1e-12)


def test_rectangular_game():
    sol = zero_sum_value([[1.0, 0.0, 2.0], [0.0, 1.0, 0.5]])
    assert sol.value == pytest.approx(0.5, abs=1e-12)
    assert sol.row_optimal == pytest.approx([0.5, 0.5], abs=1e-12)
    assert sol.col_optimal[2] == pytest.approx(0.0, abs=1e-12)


def test_guarantee_against_every_pure_reply():
    rng = np.random.default_rng(7)
    for _ in range(80):
        m, n = rng.integers(1, 6, size=2)
        a = rng.random((m, n))
        sol = zero_sum_value(a)
        assert np.all(sol.row_optimal @ a >= sol.value - 1e-9)
        assert np.all(a @ sol.col_optimal <= sol.value + 1e-9)
        assert abs(sol.duality_gap) <= 1e-9


def test_kernel_solver_matches_lp_oracle():
    rng = np.random.default_rng(11)
    for _ in range(40):
        m, n = rng.integers(2, 5, size=2)
        a = np.round(rng.random((m, n)) * 4 - 2, 3)
        fast = zero_sum_value(a)
        oracle = _zero_sum_lp(a)
        assert fast.value == pytest.approx(oracle.value, abs=1e-8)


def test_bimatrix_dominant_strategies():
    a = np.array([[3.0, 0.0], [5.0, 1.0]])
    b = np.array([[3.0, 5.0], [0.0, 1.0]])
    eqs = bimatrix_equilibria(a, b)
    assert len(eqs) == 1
    x, y, u1, u2 = eqs[0]
    assert x == pytest.approx([0.0, 1.0]) and y == pytest.approx([0.0, 1.0])
    assert (u1, u2) == (1.0, 1.0)


def test_bimatrix_battle_of_sexes():
    a = np.array([[2.0, 0.0], [0.0, 1.0]])
    b = np.array([[1.0, 0.0], [0.0, 2.0]])
    eqs = bimatrix_equilibria(a, b)
    assert len(eqs) == 3
    pure = [(tuple(x), tuple(y)) for x, y, _, _ in eqs[:2]]
    assert ((1.0, 0.0), (1.0, 0.0)) in pure and ((0.0, 1.0), (0.0, 1.0)) in pure
    x, y, u1, u2 = eqs[2]
    assert x == pytest.approx([2.0 / 3.0, 1.0 / 3.0], abs=1e-12)
    assert y == pytest.approx([1.0 / 3.0, 2.0 / 3.0], abs=1e-12)
    assert u1 == pytest.approx(2.0 / 3.0) and u2 == pytest.approx(2.0 / 3.0)


def test_bimatrix_size_cap():
    big = np.zeros((9, 2))
    with pytest.raises(SizeCapExceeded):
        bimatrix_equilibria(big, big)


def test_bimatrix_equilibrium_property_random():
    rng = np.random.default_rng(3)
    for _ in range(25):
        m, n = rng.integers(2, 5, size=2)
        a, b = rng.random((m, n)), rng.random((m, n))
        for x, y, u1, u2 in bimatrix_equilibria(a, b):
            assert np.all(a @ y <= u1 + 1e-8)
            assert np.all(x @ b <= u2 + 1e-8)
