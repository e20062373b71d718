import numpy as np
import pytest

from skipfree.errors import (
    AllZeroKilling,
    ConfigError,
    DownJumpTooFar,
    InfiniteRowRate,
    InvalidQuery,
    NegativeRate,
    NonPositiveDownRate,
)
from skipfree.model import (
    SingleDeathModel,
    TruncationWindow,
    hypothesis_report,
    killing_regime,
    nonkilling_generator,
    validate_model,
)
from skipfree.presets import preset
from skipfree.rates import Constant, ExplicitUp, Jumps, Power, Sites, Table
from skipfree.series import CONVERGED, DIVERGING


def test_window_schedule():
    assert TruncationWindow().schedule == (25, 50, 100, 200, 400)
    assert TruncationWindow(60, schedule=(10, 500)).schedule == (10, 60)
    with pytest.raises(ConfigError):
        TruncationWindow(1)
    with pytest.raises(ConfigError):
        TruncationWindow(10, tol=0)


@pytest.mark.parametrize(
    "cfg, err",
    [
        ({"down_rate": {"rule": "list", "values": [1.0, 0.0], "fill": 1.0}, "process": "Y"}, NonPositiveDownRate),
        ({"down_rate": 1.0, "killing": -1.0}, NegativeRate),
        ({"down_rate": 1.0, "up_rates": {"rule": "list", "rows": {"5": [[2, 1.0]]}}, "killing": 1.0}, DownJumpTooFar),
        ({"down_rate": 1.0, "up_rates": {"rule": "list", "rows": {"5": [[4, 1.0]]}}, "killing": 1.0}, ConfigError),
        ({"down_rate": 1.0, "killing": 0.0}, AllZeroKilling),
        ({"down_rate": 1.0, "killing": float("inf")}, InfiniteRowRate),
    ],
)
def test_validation_errors(cfg, err):
    with pytest.raises(err):
        validate_model(cfg, TruncationWindow(10))


def test_process_y_allows_zero_killing():
    m = validate_model({"down_rate": 1.0, "process": "Y"}, TruncationWindow(10))
    assert not m.is_killed


def test_tail_rate():
    m = SingleDeathModel(Constant(1.0), Jumps(((1, Constant(2.0)),)), Constant(1.0))
    assert m.tail_rate(3, 4, 0.5) == 2.5
    assert m.tail_rate(3, 5) == 0.0
    with pytest.raises(InvalidQuery):
        m.tail_rate(3, 3)


def test_total_rates_and_tails_are_read_only():
    m = preset("quadratic-death")
    q = m.total_rates(4)
    assert q[2] == pytest.approx(4 + 1 + 0.25)
    T = m.tails(5)
    with pytest.raises(ValueError):
        T[1, 2] = 0.0


def test_nonkilling_generator():
    y = nonkilling_generator(preset("single-kill-site"))
    assert not y.is_killed and y.process == "Y"


def test_killing_regime_presets():
    win = TruncationWindow()
    r = killing_regime(preset("quadratic-death"), win)
    assert r.S.verdict == CONVERGED and r.C.verdict == CONVERGED and r.small_killing
    r = killing_regime(preset("single-kill-site"), win)
    assert r.S.verdict == DIVERGING and r.small_killing
    r = killing_regime(preset("linear-killing"), win)
    assert r.C.verdict == DIVERGING and r.large_killing and not r.killing_bounded


def test_hypothesis_report():
    rep = hypothesis_report(preset("quadratic-death"), TruncationWindow(50))
    assert rep["irreducible_on_window"] and rep["killing_bounded"] and rep["max_up_jump"] == 1
    rep = hypothesis_report(preset("single-kill-site"), TruncationWindow(50))
    assert not rep["irreducible_on_window"]


def test_explicit_up_targets_beyond_window():
    up = ExplicitUp(((2, ((3, 1.0), (9, 2.0))),))
    m = SingleDeathModel(Table((1.0,) * 5), up, Sites(((1, 1.0),)))
    T = m.tails(5)
    assert T[2, 3] == 3.0 and T[2, 4] == 2.0 and T[2, 5] == 2.0
    js, rs = up.targets(2, 5)
    assert js.tolist() == [3] and rs.tolist() == [1.0]


def test_power_killing_sup_unbounded():
    assert killing_regime(SingleDeathModel(Constant(1.0), killing=Power(1.0, 1.0)), TruncationWindow(50)).killing_bounded is False
