import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from skipfree.series import CONVERGED, DIVERGING, UNDETERMINED, diagnose, series_verdict


def test_geometric_series_converges():
    terms = 0.5 ** np.arange(1, 401)
    d = diagnose("g", terms, (25, 50, 100, 200, 400), 1e-2)
    assert d.verdict == CONVERGED
    assert abs(d.value - 1.0) < 1e-12


def test_harmonic_and_constant_series_diverge():
    levels = (25, 50, 100, 200, 400)
    assert diagnose("ones", np.ones(400), levels, 1e-2).verdict == DIVERGING
    assert diagnose("h", 1.0 / np.arange(1, 401), levels, 1e-2).verdict == DIVERGING


def test_single_level_is_undetermined():
    assert series_verdict([1.0], 1e-2) == UNDETERMINED


def test_non_finite_is_diverging():
    assert series_verdict([1.0, np.inf], 1e-2) == DIVERGING


@given(st.floats(0.05, 0.8))
def test_convergent_geometric_tail_estimate_is_small(r):
    terms = r ** np.arange(1, 401)
    d = diagnose("g", terms, (25, 50, 100, 200, 400), 1e-2)
    assert d.verdict == CONVERGED
    assert d.tail_estimate is not None and d.tail_estimate <= 1e-6
