import math

import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st

from skipfree.errors import InvalidQuery, NoSurvivors, TooManyCensored
from skipfree.exitlaws import ExitQuery, downcross_laplace, green_absorbed
from skipfree.model import TruncationWindow
from skipfree.presets import preset
from skipfree.qsd import decay_parameter, qsd_candidate
from skipfree.simulate import (
    CENSORED,
    HIT_ZERO,
    KILLED,
    Caps,
    conditional_law,
    convergence_curve,
    estimate_exit_laplace,
    estimate_hitting_prob,
    estimate_occupation,
    noise_floor,
    sample_path,
    simulate_paths,
    tv_distance,
)


def test_tv_examples():
    assert tv_distance([0.5, 0.5], [0.5, 0.5]) == 0
    assert tv_distance([1, 0], [0, 1]) == 1
    assert tv_distance([0.5, 0.5], [1, 0]) == 0.5
    assert tv_distance([1.0], [0.0, 0.0, 1.0]) == 1


@given(st.lists(st.floats(0, 1), min_size=1, max_size=10), st.lists(st.floats(0, 1), min_size=1, max_size=10))
def test_tv_bounds_and_symmetry(a, b):
    p = np.array(a) / max(sum(a), 1e-9) if sum(a) > 0 else np.array(a)
    q = np.array(b) / max(sum(b), 1e-9) if sum(b) > 0 else np.array(b)
    d = tv_distance(p, q)
    assert 0 <= d <= 1 and d == pytest.approx(tv_distance(q, p))


def test_pure_death_path_structure():
    tr = sample_path(preset("pure-death"), 3, seed=1)
    assert [s for s, _ in tr.steps] == [3, 2, 1]
    assert tr.final_state == 0 and tr.absorption == HIT_ZERO
    assert tr.total_time == pytest.approx(sum(h for _, h in tr.steps))


@given(st.integers(0, 2**32), st.sampled_from(["quadratic-death", "single-kill-site", "linear-killing", "bd-drift-down"]))
@example(77078, "bd-drift-down")  # censored at t_max while holding
def test_paths_are_legal(seed, name):
    tr = sample_path(preset(name), 4, seed, Caps(t_max=20.0, level_max=200))
    tr.check()
    if tr.absorption == KILLED:
        assert tr.hazard > 0


@given(st.integers(0, 2**32))
def test_no_killing_never_killed(seed):
    tr = sample_path(preset("bd-drift-down"), 5, seed, Caps(t_max=50.0))
    assert tr.absorption in (HIT_ZERO, CENSORED)
    assert tr.hazard == 0


def test_determinism_and_worker_independence():
    m = preset("quadratic-death")
    a = simulate_paths(m, 5, 200, 42)
    b = simulate_paths(m, 5, 200, 42)
    c = simulate_paths(m, 5, 200, 42, workers=2)
    assert a == b == c
    assert simulate_paths(m, 5, 200, 43) != a


def test_censoring():
    m = preset("bd-drift-down")
    with pytest.raises(TooManyCensored):
        estimate_hitting_prob(m, 50, 200, 1, Caps(t_max=1.0))
    tr = sample_path(m, 50, 1, Caps(t_max=1.0))
    assert tr.absorption == CENSORED and tr.censor_reason == "t_max"


def test_hitting_without_killing_is_one():
    e = estimate_hitting_prob(preset("bd-drift-down"), 3, 500, 5)
    assert e.value == 1.0 and e.stderr == 0.0


def test_single_kill_site_hitting_probability():
    e = estimate_hitting_prob(preset("single-kill-site"), 5, 20_000, 2024)
    assert abs(e.value - 0.5) < 3 * e.stderr


def test_occupation_matches_green_function():
    m = preset("single-kill-site")
    e = estimate_occupation(m, 5, 1, 20_000, 77)
    g = green_absorbed(m, 5, 1, TruncationWindow(60)).value
    assert abs(e.value - g) < 3 * e.stderr


def test_exit_laplace_matches_closed_form():
    m = preset("quadratic-death")
    q = ExitQuery(1, 3, 8, 0.5)
    e = estimate_exit_laplace(m, q, 20_000, 9)
    assert abs(e.value - downcross_laplace(m, q)) < 3 * e.stderr


def test_conditional_law_time_zero():
    law = conditional_law(preset("pure-death"), [0.2, 0.8], 0.0, 10, 1)
    assert law.probs.tolist() == [0.2, 0.8]


def test_conditional_law_concentrates_at_one():
    m = preset("pure-death")
    tvs = []
    for t in (1.0, 4.0, 10.0):
        law = conditional_law(m, 6, t, 5000, 3)
        tvs.append(tv_distance(law.probs, [1.0]))
    assert tvs[0] > tvs[1] > tvs[2]


def test_no_survivors():
    with pytest.raises(NoSurvivors):
        conditional_law(preset("pure-death"), 1, 200.0, 50, 1)


def test_invalid_inputs():
    with pytest.raises(InvalidQuery):
        sample_path(preset("pure-death"), 0, 1)
    with pytest.raises(InvalidQuery):
        Caps(t_max=0)
    with pytest.raises(InvalidQuery):
        conditional_law(preset("pure-death"), 1, -1.0, 5, 1)


def test_noise_floor_scales_with_paths():
    nu = np.array([0.5, 0.3, 0.2])
    assert noise_floor(nu, 400) == pytest.approx(noise_floor(nu, 100) / 2)


def test_convergence_from_point_mass_and_from_qsd():
    m = preset("quadratic-death")
    win = TruncationWindow()
    nu = qsd_candidate(m, decay_parameter(m, win).lambda0, win)
    c = convergence_curve(m, 8, np.round(np.arange(0, 1.51, 0.1), 2), 20_000, 11, nu)
    assert c.gamma_hat > 0 and c.gamma_lcb > 0
    flat = convergence_curve(m, nu, [0.0, 0.5, 1.0], 20_000, 12, nu)
    ok = np.isfinite(flat.tv[1:])
    assert np.all(flat.tv[1:][ok] < 3 * flat.floor[1:][ok])
