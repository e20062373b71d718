import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from skipfree import oracle
from skipfree.checks import semigroup_errors
from skipfree.errors import InvalidQuery, NegativeMass, SmallKillingNotEstablished
from skipfree.model import SingleDeathModel, TruncationWindow, killing_regime
from skipfree.potential import g_coefficients, harmonic_h
from skipfree.presets import EXPECTED_REGIME, PRESETS, preset
from skipfree.qsd import (
    CONTINUUM,
    NO_QSD,
    QsdResult,
    classify,
    decay_parameter,
    doob_g_closed_form,
    doob_transform,
    qsd_candidate,
    qsd_family,
    stationarity_residual,
)
from skipfree.rates import Constant, Jumps, Sites, Table
from skipfree.simulate import tv_distance


def test_decay_pure_death_every_level():
    est = decay_parameter(preset("pure-death"), TruncationWindow(), "Y")
    assert all(abs(v - 1.0) < 1e-9 for v in est.estimates)


def test_decay_single_kill_site():
    est = decay_parameter(preset("single-kill-site"), TruncationWindow(60))
    assert est.lambda0 == pytest.approx(1.0, abs=1e-9)


def test_decay_birth_death_monotone_levels():
    est = decay_parameter(preset("bd-drift-down"), TruncationWindow(200), "Y")
    assert est.monotone
    assert abs(est.lambda0 - (math.sqrt(2) - 1) ** 2) < 1e-3


def test_decay_matches_dense_eigenvalue():
    m = preset("quadratic-death")
    est = decay_parameter(m, TruncationWindow(100, schedule=(100,)))
    assert est.lambda0 == pytest.approx(oracle.principal_eigenpair(m, 100).rate, rel=1e-9)


@pytest.mark.parametrize("name", ["quadratic-death", "single-kill-site", "geometric-kill", "linear-killing"])
def test_decay_of_killed_chain_exceeds_chain_without_killing(name):
    m = preset(name)
    win = TruncationWindow(100)
    assert decay_parameter(m, win, "X").lambda0 >= decay_parameter(m, win, "Y").lambda0 - win.tol


def test_decay_rejects_bad_process():
    with pytest.raises(InvalidQuery):
        decay_parameter(preset("pure-death"), which="Z")


def test_qsd_pure_death_geometric():
    r = qsd_candidate(preset("pure-death"), 0.5)
    np.testing.assert_allclose(r.probs[:30], 0.5 ** np.arange(1, 31), rtol=1e-12)
    assert stationarity_residual(preset("pure-death"), r) < 1e-10


def test_qsd_pure_death_at_decay_rate_is_point_mass():
    r = qsd_candidate(preset("pure-death"), 1.0)
    assert r.probs[0] == 1.0 and np.all(r.probs[1:] == 0)


def test_qsd_above_decay_rate_has_negative_mass():
    with pytest.raises(NegativeMass):
        qsd_candidate(preset("pure-death"), 1.01)


def test_qsd_needs_small_killing():
    with pytest.raises(SmallKillingNotEstablished):
        qsd_candidate(preset("linear-killing"), 1.0, TruncationWindow(100))


def test_uniform_law_is_not_stationary():
    m = preset("quadratic-death")
    N = 50
    fake = QsdResult(1.0, np.full(N, 1.0 / N), 0.0, math.nan, "candidate", 1.0)
    assert stationarity_residual(m, fake) > 0.1


def test_qsd_unique_regime_matches_eigenvector():
    m = preset("quadratic-death")
    win = TruncationWindow(400)
    lam = decay_parameter(m, win)
    r = qsd_candidate(m, lam.lambda0, win)
    assert r.residual < 1e-6
    ep = oracle.principal_eigenpair(m, 100)
    assert tv_distance(r.probs[:100], ep.vector) < 1e-6
    assert tv_distance(r.probs, lam.vector) < 1e-6


def test_qsd_nonkilled_normalization_defect():
    m = preset("bd-drift-down")
    lam = decay_parameter(m, TruncationWindow(), "Y").lambda0
    r = qsd_candidate(m, lam * 0.5)
    assert "normalization_defect" in r.extras


def test_qsd_family_members_are_stationary():
    m = preset("geometric-kill")
    win = TruncationWindow(200)
    fam = qsd_family(m, win, n_grid=4)
    good = [r for r in fam if isinstance(r, QsdResult)]
    assert good
    for r in good:
        assert r.family_tag == "continuum-member"
        assert np.all(r.probs >= 0)


@given(st.floats(0.05, 0.95))
def test_pure_death_family_closed_form(theta):
    # shape is exact; the normalization carries the truncated tail
    r = qsd_candidate(preset("pure-death"), theta)
    # signed weights make the recursion alternate: tiny entries are accurate in absolute terms only
    np.testing.assert_allclose(r.probs[:20] / r.probs[0], (1 - theta) ** np.arange(20), rtol=1e-12, atol=1e-15)
    assert r.probs.sum() + r.tail_mass == pytest.approx(1.0, abs=TruncationWindow().tol)
    assert abs(r.probs[0] / theta - 1) <= 1.01 * r.tail_mass + 1e-12


def test_doob_without_killing_is_identity():
    m = preset("bd-drift-down")
    dm = doob_transform(m, TruncationWindow(50))
    assert dm.model == m and dm.max_residual == 0


def test_doob_single_kill_site():
    dm = doob_transform(preset("single-kill-site"), TruncationWindow(60))
    assert dm.model.down(1) == pytest.approx(2.0)
    assert dm.model.down(1) + dm.model.up.total(1) == pytest.approx(2.0)
    assert not dm.model.is_killed


@pytest.mark.parametrize("name", ["single-kill-site", "geometric-kill", "quadratic-death"])
def test_doob_rows_conservative(name):
    assert doob_transform(preset(name), TruncationWindow(60)).max_residual < 1e-8


@pytest.mark.parametrize("name", ["single-kill-site", "geometric-kill", "quadratic-death"])
def test_doob_duality(name):
    m = preset(name)
    win = TruncationWindow(60)
    dm = doob_transform(m, win)
    for q in (0.0, 0.3, 1.0):
        G = g_coefficients(dm.model, Constant(q), 40)
        for N in range(1, 41):
            for k in range(1, N + 1):
                assert doob_g_closed_form(m, q, k, N, win) == pytest.approx(G[k, N], rel=1e-8, abs=0)


def test_doob_closed_form_without_killing_reduces_to_g():
    m = preset("bd-drift-down")
    G = g_coefficients(m, Constant(0.0), 20)
    for k in range(1, 21):
        assert doob_g_closed_form(m, 0.0, k, 20, TruncationWindow(50)) == pytest.approx(G[k, 20], rel=1e-12)


def test_doob_semigroup_and_harmonicity():
    for name in ("single-kill-site", "geometric-kill", "quadratic-death"):
        harm, doob = semigroup_errors(preset(name))
        assert harm < 1e-6 and doob < 1e-6


@given(st.integers(0, 1000))
def test_doob_random_small_killing(seed):
    rng = np.random.default_rng(seed)
    n = 8
    sites = tuple((int(i), float(rng.uniform(0.1, 3.0))) for i in rng.choice(np.arange(1, n + 1), 3, replace=False))
    up = Jumps(((1, Table(tuple(rng.uniform(0.1, 2.0, n)), fill=0.0)),))
    m = SingleDeathModel(Table(tuple(rng.uniform(0.5, 5.0, n)), fill=1.0), up, Sites(sites))
    win = TruncationWindow(60)
    assert killing_regime(m, win).small_killing
    dm = doob_transform(m, win)
    assert dm.max_residual < 1e-8
    G = g_coefficients(dm.model, Constant(0.3), 20)
    for k in range(1, 21):
        assert doob_g_closed_form(m, 0.3, k, 20, win) == pytest.approx(G[k, 20], rel=1e-8)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_classify_presets(name):
    v = classify(preset(name))
    assert v.regime == EXPECTED_REGIME[name]
    assert "rule" in v.evidence and "diagnostics" in v.evidence


def test_critical_birth_death_has_no_qsd():
    m = SingleDeathModel(Constant(1.0), Jumps(((1, Constant(1.0)),)), Constant(0.0), "critical", "Y")
    v = classify(m)
    assert v.regime in (NO_QSD, CONTINUUM)
    assert v.regime == NO_QSD
    assert v.evidence["lambda_zero_threshold"] > 0


def test_bounded_killing_with_undecided_killing_series_is_unique_uniform():
    import dataclasses

    from skipfree.qsd import UNIQUE_UNIFORM, classify_regime
    from skipfree.series import UNDETERMINED

    win = TruncationWindow(200)
    m = preset("single-kill-site")
    d = killing_regime(m, win)
    d = dataclasses.replace(
        d,
        S=killing_regime(preset("quadratic-death"), win).S,
        C=dataclasses.replace(d.C, verdict=UNDETERMINED),
        large_killing=False,
        killing_bounded=True,
    )
    v = classify_regime(m, d, decay_parameter(m, win, "X"))
    assert v.regime == UNIQUE_UNIFORM
    assert v.evidence["rule"] == "bounded killing and sum W(0,u) converged"
