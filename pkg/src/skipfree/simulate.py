"""Monte Carlo for the killed chain.

A path of the chain without killing is run with exponential holding times and
the embedded jump chain.  Killing is added on top: each path draws a single
unit exponential ``E`` and dies the first time the accumulated hazard
``int c(Y_s) ds`` reaches ``E``.  Because ``c`` is constant during a holding
interval, the kill instant inside that interval is found exactly.

Each path owns a Philox stream keyed by the seed with the path index in the
counter, so results do not depend on how paths are split across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import InvalidQuery, NoSurvivors, TooManyCensored
from .exitlaws import ExitQuery
from .model import SingleDeathModel
from .qsd import QsdResult
from .rates import as_rule

HIT_ZERO = "HitZero"
HIT_TARGET = "HitTarget"
EXIT_UP = "ExitUp"
KILLED = "Killed"
CENSORED = "Censored"


@dataclass(frozen=True)
class Caps:
    t_max: float = math.inf
    level_max: int = 100_000
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not (self.t_max > 0 and self.level_max > 0 and self.max_steps > 0):
            raise InvalidQuery("caps must be positive")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Visited states with their holding times; the last holding is cut at
    the terminating event.  ``final_state`` is where the path stopped (0 after
    absorption, the killed state for ``Killed``)."""

    steps: tuple  # ((state, holding), ...)
    final_state: int
    absorption: str
    total_time: float
    hazard: float
    censor_reason: str | None = None

    def check(self) -> None:
        """Raise ``AssertionError`` if the path breaks the single-death structure."""
        states = [s for s, _ in self.steps]
        assert all(h > 0 for _, h in self.steps), "non-positive holding time"
        # killing and the time cap stop the path during its last holding
        stopped_in_place = self.absorption == KILLED or self.censor_reason == "t_max"
        if stopped_in_place:
            assert self.final_state == states[-1]
        else:
            states.append(self.final_state)
        for a, b in zip(states, states[1:]):
            assert b == a - 1 or b > a, f"illegal move {a} -> {b}"
        if self.absorption == HIT_ZERO:
            assert self.final_state == 0
        assert math.isclose(self.total_time, math.fsum(h for _, h in self.steps), rel_tol=1e-12, abs_tol=1e-300)


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    stderr: float
    n_paths: int
    seed: int
    censored: int = 0
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return {"value": self.value, "stderr": self.stderr, "n_paths": self.n_paths, "seed": self.seed,
                "censored": self.censored, **self.extras}


def path_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, 0, int(index)]))


class _Rates:
    """Per-state rate lookups cached for the duration of a run."""

    def __init__(self, m: SingleDeathModel, omega=None, use_killing=True):
        self.m = m
        self.omega = None if omega is None else as_rule(omega)
        self.use_killing = use_killing and m.is_killed
        self._cache: dict = {}

    def __call__(self, i):
        r = self._cache.get(i)
        if r is None:
            m = self.m
            d = m.down(i)
            u = m.up.total(i)
            c = m.killing(i) if self.use_killing else 0.0
            w = self.omega(i) if self.omega is not None else 0.0
            r = self._cache[i] = (d, u, c, w)
        return r


@dataclass(frozen=True)
class _Outcome:
    label: str
    time: float
    final: int
    weight_integral: float
    occupation: float
    observed: tuple  # states at the observation times (0: absorbed, -1: killed, -2: censored)


def _run(rates: _Rates, x0: int, rng: np.random.Generator, caps: Caps, floor: int = 0, ceiling: int | None = None,
         occupy: int | None = None, observe=(), record=False):
    """Simulate one path; returns ``(_Outcome, steps or None)``."""
    E = rng.standard_exponential()
    t = 0.0
    k = 0.0
    wint = 0.0
    occ = 0.0
    x = x0
    steps = [] if record else None
    obs = []
    n_obs = len(observe)
    oi = 0
    label = None
    for _ in range(caps.max_steps):
        if x <= floor:
            label = HIT_ZERO if floor == 0 else HIT_TARGET
            break
        if ceiling is not None and x >= ceiling:
            label = EXIT_UP
            break
        if x > caps.level_max:
            label = CENSORED
            break
        d, u, c, w = rates(x)
        q = d + u
        hold = rng.standard_exponential() / q
        end = t + hold
        kill_at = t + (E - k) / c if c > 0 and k + c * hold >= E else math.inf
        stop = min(end, kill_at, caps.t_max)
        while oi < n_obs and observe[oi] < stop:
            obs.append(x)
            oi += 1
        dt = stop - t
        if dt > 0:
            if record:
                steps.append((x, dt))
            wint += w * dt
            if x == occupy:
                occ += dt
            k += c * dt
        t = stop
        if stop == kill_at and kill_at <= min(end, caps.t_max):
            label = KILLED
            k = E
            break
        if stop == caps.t_max and caps.t_max < end:
            label = CENSORED
            break
        if u > 0 and rng.random() * q >= d:
            x = rates.m.up.sample(x, rng.random())
        else:
            x -= 1
    else:
        label = CENSORED
    final = x
    code = {HIT_ZERO: 0, HIT_TARGET: 0, EXIT_UP: 0, KILLED: -1, CENSORED: -2}[label]
    while oi < n_obs:
        # after the path ended; censored paths stay unknown unless t_max covers the time
        obs.append(code if label != EXIT_UP else -3)
        oi += 1
    out = _Outcome(label, t, final, wint, occ, tuple(obs))
    if record:
        reason = None if label != CENSORED else ("t_max" if t >= caps.t_max else "level_max")
        out = (out, Trajectory(tuple(steps), final, label, t, k, reason))
    return out


def sample_path(m: SingleDeathModel, x0: int, seed: int, caps: Caps | None = None, path_index: int = 0) -> Trajectory:
    """One path from ``x0`` until absorption at 0, killing or a cap."""
    if x0 < 1:
        raise InvalidQuery("x0 must be >= 1")
    _, traj = _run(_Rates(m), x0, path_rng(seed, path_index), caps or Caps(), record=True)
    return traj


def _chunk(args):
    m, omega, use_killing, starts, seed, lo, hi, caps, kw = args
    rates = _Rates(m, omega, use_killing)
    out = []
    for idx in range(lo, hi):
        rng = path_rng(seed, idx)
        x0 = starts(rng) if callable(starts) else starts
        out.append(_run(rates, x0, rng, caps, **kw))
    return out


def _start_sampler(mu0):
    """``mu0``: an integer state or probabilities on ``1..K`` (index ``i-1``)."""
    if isinstance(mu0, (int, np.integer)):
        if mu0 < 1:
            raise InvalidQuery("start state must be >= 1")
        return int(mu0)
    p = np.asarray(mu0.probs if isinstance(mu0, QsdResult) else mu0, dtype=float)
    if p.ndim != 1 or np.any(p < 0) or not p.sum() > 0:
        raise InvalidQuery("initial law must be a non-negative vector with positive mass")
    cdf = np.cumsum(p / p.sum())
    return _Sampler(cdf)


@dataclass(frozen=True, eq=False)
class _Sampler:
    cdf: np.ndarray

    def __call__(self, rng):
        return int(min(np.searchsorted(self.cdf, rng.random(), side="right"), self.cdf.size - 1)) + 1


def simulate_paths(m: SingleDeathModel, mu0, n_paths: int, seed: int, caps: Caps | None = None, *, omega=None,
                   use_killing: bool = True, workers: int = 1, **kw) -> list:
    """Outcomes of ``n_paths`` independent paths, ordered by path index.

    Extra keywords go to the path runner: ``floor``, ``ceiling``, ``occupy``
    and ``observe`` (sorted times at which to record the state).
    """
    if n_paths < 1:
        raise InvalidQuery("n_paths must be >= 1")
    caps = caps or Caps()
    starts = _start_sampler(mu0)
    if workers <= 1:
        return _chunk((m, omega, use_killing, starts, seed, 0, n_paths, caps, kw))
    bounds = np.linspace(0, n_paths, workers + 1).astype(int)
    jobs = [(m, omega, use_killing, starts, seed, int(a), int(b), caps, kw) for a, b in zip(bounds, bounds[1:])]
    with ProcessPoolExecutor(workers) as ex:
        parts = list(ex.map(_chunk, jobs))
    return [o for part in parts for o in part]


def _mean_se(x: np.ndarray):
    n = x.size
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf


def _check_censored(outs, max_censored):
    cens = sum(o.label == CENSORED for o in outs)
    if cens > max_censored * len(outs):
        raise TooManyCensored(f"{cens} of {len(outs)} paths censored (limit {max_censored:.2%})")
    return cens


def estimate_hitting_prob(m: SingleDeathModel, x0: int, n_paths: int, seed: int, caps: Caps | None = None,
                          max_censored: float = 0.01, workers: int = 1) -> EstimateWithError:
    """``P_x0[T_0 < T_kill]`` among paths that were not censored."""
    outs = simulate_paths(m, x0, n_paths, seed, caps, workers=workers)
    cens = _check_censored(outs, max_censored)
    hits = np.array([o.label == HIT_ZERO for o in outs if o.label != CENSORED], dtype=float)
    v, se = _mean_se(hits)
    return EstimateWithError(v, se, n_paths, seed, cens, {"killed": int(sum(o.label == KILLED for o in outs))})


def estimate_occupation(m: SingleDeathModel, x0: int, y: int, n_paths: int, seed: int, caps: Caps | None = None,
                        max_censored: float = 0.01, workers: int = 1) -> EstimateWithError:
    """Mean time spent at ``y`` before absorption at 0 or killing."""
    if y < 1:
        raise InvalidQuery("y must be >= 1")
    outs = simulate_paths(m, x0, n_paths, seed, caps, occupy=y, workers=workers)
    cens = _check_censored(outs, max_censored)
    v, se = _mean_se(np.array([o.occupation for o in outs if o.label != CENSORED]))
    return EstimateWithError(v, se, n_paths, seed, cens)


def estimate_exit_laplace(m: SingleDeathModel, q: ExitQuery, n_paths: int, seed: int, caps: Caps | None = None,
                          max_censored: float = 0.01, workers: int = 1) -> EstimateWithError:
    """Sample mean of ``exp(-int w) 1{T_a < T_{N+} ^ T_kill}``."""
    outs = simulate_paths(m, q.i, n_paths, seed, caps, omega=q.omega, use_killing=q.with_killing,
                          floor=q.a, ceiling=q.N, workers=workers)
    cens = _check_censored(outs, max_censored)
    down = HIT_ZERO if q.a == 0 else HIT_TARGET
    vals = np.array([math.exp(-o.weight_integral) if o.label == down else 0.0 for o in outs if o.label != CENSORED])
    v, se = _mean_se(vals)
    return EstimateWithError(v, se, n_paths, seed, cens)


@dataclass(frozen=True, eq=False)
class ConditionalLaw:
    t: float
    probs: np.ndarray  # index i-1 is state i
    survivors: int
    n_paths: int

    def to_dict(self):
        return {"t": self.t, "probs": self.probs.tolist(), "survivors": self.survivors, "n_paths": self.n_paths}


def _law_from_states(states, t, n_paths):
    alive = states[states > 0]
    if alive.size == 0:
        raise NoSurvivors(f"no surviving paths at t={t}")
    counts = np.bincount(alive)[1:]
    return ConditionalLaw(float(t), counts / alive.size, int(alive.size), n_paths)


def _observe(m, mu0, times, n_paths, seed, caps, max_censored, workers):
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0):
        raise InvalidQuery("observation times must be increasing")
    caps = caps or Caps()
    caps = Caps(min(caps.t_max, float(times[-1]) * (1 + 1e-12) + 1e-300), caps.level_max, caps.max_steps)
    outs = simulate_paths(m, mu0, n_paths, seed, caps, observe=tuple(times), workers=workers)
    obs = np.array([o.observed for o in outs], dtype=np.int64).reshape(n_paths, times.size)
    lost = np.count_nonzero(obs == -2, axis=0)
    if np.any(lost > max_censored * n_paths):
        raise TooManyCensored(f"up to {int(lost.max())} of {n_paths} paths censored before the last time")
    return obs


def conditional_law(m: SingleDeathModel, mu0, t: float, n_paths: int, seed: int, caps: Caps | None = None,
                    max_censored: float = 0.01, workers: int = 1) -> ConditionalLaw:
    """Law of ``X_t`` given survival (no absorption, no killing) up to ``t``."""
    if t < 0:
        raise InvalidQuery("t must be >= 0")
    if t == 0:
        if isinstance(mu0, (int, np.integer)):
            p = np.zeros(int(mu0))
            p[-1] = 1.0
        else:
            p = np.asarray(mu0.probs if isinstance(mu0, QsdResult) else mu0, dtype=float)
            p = p / p.sum()
        return ConditionalLaw(0.0, p, n_paths, n_paths)
    obs = _observe(m, mu0, [t], n_paths, seed, caps, max_censored, workers)
    return _law_from_states(obs[:, 0], t, n_paths)


def tv_distance(p, q) -> float:
    """Total variation between laws on ``1, 2, ...``; mass missing from either
    vector is treated as sitting beyond its support."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    n = max(p.size, q.size)
    p = np.pad(p, (0, n - p.size))
    q = np.pad(q, (0, n - q.size))
    tail = abs((1.0 - p.sum()) - (1.0 - q.sum()))
    return float(min(1.0, max(0.0, 0.5 * (math.fsum(np.abs(p - q)) + tail))))


def noise_floor(nu: np.ndarray, n: int) -> float:
    """Expected TV between ``nu`` and an empirical law of ``n`` draws from it
    (normal approximation of each cell count)."""
    nu = np.asarray(nu, dtype=float)
    return float(0.5 * np.sum(np.sqrt(2.0 * nu * (1.0 - nu) / (math.pi * n))))


@dataclass(frozen=True, eq=False)
class ConvergenceCurve:
    times: np.ndarray
    tv: np.ndarray
    survivors: np.ndarray
    floor: np.ndarray
    gamma_hat: float
    gamma_se: float
    gamma_lcb: float
    fit_points: int

    def rows(self):
        return [(float(t), float(v), int(s), float(f)) for t, v, s, f in zip(self.times, self.tv, self.survivors, self.floor)]

    def to_dict(self):
        return {"gamma_hat": self.gamma_hat, "gamma_se": self.gamma_se, "gamma_lcb95": self.gamma_lcb,
                "fit_points": self.fit_points,
                "points": [{"t": t, "tv": v, "survivors": s, "noise_floor": f} for t, v, s, f in self.rows()]}


def convergence_curve(m: SingleDeathModel, mu0, t_grid, n_paths: int, seed: int, nu: QsdResult,
                      caps: Caps | None = None, signal_factor: float = 3.0, max_censored: float = 0.01,
                      workers: int = 1) -> ConvergenceCurve:
    """TV between the conditional law at each grid time and ``nu``.

    The same paths are observed at every grid time.  The decay rate is the
    negated least-squares slope of ``log TV`` against ``t`` over the points
    where TV exceeds ``signal_factor`` times the sampling noise floor; the
    lower bound is one-sided 95%.  Points without survivors get TV = nan.
    """
    times = np.asarray(t_grid, dtype=float)
    if times.size == 0 or np.any(np.diff(times) <= 0) or times[0] < 0:
        raise InvalidQuery("t_grid must be non-negative and strictly increasing")
    nu_p = np.asarray(nu.probs, dtype=float)
    obs_times = times[times > 0]
    obs = _observe(m, mu0, obs_times, n_paths, seed, caps, max_censored, workers) if obs_times.size else None
    tv, surv, floor = [], [], []
    col = 0
    for t in times:
        if t == 0:
            law = conditional_law(m, mu0, 0.0, n_paths, seed)
        else:
            try:
                law = _law_from_states(obs[:, col], t, n_paths)
            except NoSurvivors:
                law = None
            col += 1
        if law is None:
            tv.append(math.nan)
            surv.append(0)
            floor.append(math.nan)
            continue
        tv.append(tv_distance(law.probs, nu_p))
        surv.append(law.survivors)
        floor.append(noise_floor(nu_p, law.survivors))
    tv, surv, floor = np.array(tv), np.array(surv), np.array(floor)
    use = np.isfinite(tv) & (tv > signal_factor * floor) & (tv > 0)
    g, se, lcb = math.nan, math.nan, math.nan
    if np.count_nonzero(use) >= 3:
        fit = stats.linregress(times[use], np.log(tv[use]))
        dof = int(np.count_nonzero(use)) - 2
        g, se = -float(fit.slope), float(fit.stderr)
        lcb = g - float(stats.t.ppf(0.95, dof)) * se if dof > 0 else math.nan
    return ConvergenceCurve(times, tv, surv, floor, g, se, lcb, int(np.count_nonzero(use)))
