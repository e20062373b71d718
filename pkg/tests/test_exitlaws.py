import numpy as np
import pytest
from conftest import corpus_member
from hypothesis import given
from hypothesis import strategies as st

from skipfree import oracle
from skipfree.checks import exit_errors
from skipfree.errors import HypothesisNotEstablished, InvalidQuery, LevelExceeded
from skipfree.exitlaws import (
    ExitQuery,
    downcross_laplace,
    green_absorbed,
    hit_laplace_limit,
    occupation_transform,
    resolvent_green,
    upcross_laplace,
)
from skipfree.model import TruncationWindow
from skipfree.presets import preset
from skipfree.rates import Constant


def test_query_validation():
    with pytest.raises(InvalidQuery):
        ExitQuery(2, 2, 5)
    with pytest.raises(InvalidQuery):
        ExitQuery(0, 2, 5, j=5)
    with pytest.raises(InvalidQuery):
        downcross_laplace(preset("pure-death"), ExitQuery(0, 2, 5, -1.0))


def test_pure_death_unit_weight_golden():
    assert downcross_laplace(preset("pure-death"), ExitQuery(0, 2, 5, 1.0)) == pytest.approx(0.25, abs=1e-12)


def test_single_kill_site_golden():
    m = preset("single-kill-site")
    assert upcross_laplace(m, ExitQuery(0, 2, 9)) == pytest.approx(0.5, abs=1e-12)
    win = TruncationWindow(60)
    assert [green_absorbed(m, 3, y, win).value for y in (1, 2, 3, 4)] == pytest.approx([0.5, 1, 1, 0], abs=1e-12)


@given(st.integers(0, 10_000))
def test_exit_identities_match_dense_solves(seed):
    m, om, N = corpus_member(seed)
    e = exit_errors(m, om, N)
    assert e["down"] < 1e-8 and e["up"] < 1e-8 and e["occupation"] < 1e-8
    assert e["complement"] < 1e-12


@given(st.integers(0, 10_000), st.integers(1, 5))
def test_exit_identities_with_interior_target(seed, a):
    m, om, N = corpus_member(seed)
    if a >= N - 1:
        return
    ex = oracle.exit_oracle(m, om, a, N)
    for i in range(a + 1, N):
        q = ExitQuery(a, i, N, om)
        assert downcross_laplace(m, q) == pytest.approx(ex.down[i], rel=1e-8)
        assert upcross_laplace(m, q) == pytest.approx(ex.up[i], rel=1e-8, abs=1e-300)


def test_downcross_monotone_in_weight():
    m = preset("quadratic-death")
    vals = [downcross_laplace(m, ExitQuery(0, 4, 12, w)) for w in (0.0, 0.5, 1.0, 4.0)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_occupation_nonnegative():
    m, om, N = corpus_member(99)
    for i in range(1, N):
        for j in range(1, N):
            assert occupation_transform(m, ExitQuery(0, i, N, om, j)).value >= 0


def test_green_absorbed_matches_dense_solve():
    # no up-jumps: truncating the dense chain changes nothing below the window
    m = preset("geometric-kill")
    win = TruncationWindow(60)
    R = oracle.resolvent_oracle(m, 0.0, 60)
    for x in (1, 3, 7):
        for y in (1, 2, 5, 9):
            assert green_absorbed(m, x, y, win).value == pytest.approx(R[x, y], rel=1e-10, abs=1e-14)


def test_resolvent_golden_and_strictness():
    # pure death: sum W(0,u) diverges, so only the limit form is available
    win = TruncationWindow(60)
    with pytest.raises(HypothesisNotEstablished):
        resolvent_green(preset("pure-death"), 1.0, 2, 1, win)
    assert resolvent_green(preset("pure-death"), 1.0, 2, 1, win, strict=False).value == pytest.approx(0.25, abs=1e-12)
    # reach 1 (discount 1/2), then leave 1 at rate 2 with discount rate 1
    v = resolvent_green(preset("single-kill-site"), 1.0, 2, 1, win, strict=False).value
    assert v == pytest.approx(1 / 6, abs=1e-12)


def test_resolvent_matches_dense_solve_unique_regime():
    m = preset("quadratic-death")
    R = oracle.resolvent_oracle(m, 1.0, 200)
    for i, j in ((1, 1), (2, 5), (6, 3)):
        g = resolvent_green(m, 1.0, i, j, TruncationWindow(200))
        assert g.value == pytest.approx(R[i, j], rel=1e-8)


def test_resolvent_window_errors():
    with pytest.raises(LevelExceeded):
        resolvent_green(preset("quadratic-death"), 1.0, 5, 500, TruncationWindow(50))
    with pytest.raises(InvalidQuery):
        resolvent_green(preset("quadratic-death"), 0.0, 1, 1)


def test_hit_limit_ratios():
    d = hit_laplace_limit(preset("pure-death"), Constant(1.0), 1, 2, TruncationWindow(60))
    assert d.partial_sums[-1] == pytest.approx(0.5)
    d = hit_laplace_limit(preset("pure-death"), Constant(1.0), 0, 2, TruncationWindow(60))
    assert d.partial_sums[-1] == pytest.approx(0.25)
