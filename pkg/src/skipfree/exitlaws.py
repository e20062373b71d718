"""Exit functionals expressed through the potential tables.

For ``a < i < N`` let ``T_a`` be the hitting time of ``a`` and ``T_{N+}`` the
first passage to ``{N, N+1, ...}``.  With effective weight ``v = w + c``
(killed chain) or ``v = w`` (chain without killing):

* downward exit:  ``E_i[e^{-int w}; T_a first] = W^v(i,N) / W^v(a,N)``
* occupation of ``j``:  ``W^v(a,j) W^v(i,N) / W^v(a,N) - W^v(i,j)``
* upward exit or killing: ``S(i) - W^v(i,N)/W^v(a,N) * S(a)`` with
  ``S(x) = 1 + sum_{x<u<N} w_u W^v(x,u)``
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    HypothesisNotEstablished,
    InvalidQuery,
    LevelExceeded,
    NumericalOverflow,
    NumericalUnderflow,
)
from .model import SingleDeathModel, TruncationWindow, killing_regime, nonkilling_generator
from .potential import extended_table, harmonic_h, potential_table, stable_difference
from .rates import Constant, RateRule, Sum, as_rule
from .series import CONVERGED, UNDETERMINED, SeriesDiagnostic, series_verdict

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ExitQuery:
    a: int
    i: int
    N: int
    omega: RateRule | None = None
    j: int | None = None
    with_killing: bool = True

    def __post_init__(self):
        object.__setattr__(self, "omega", as_rule(self.omega))
        if not (0 <= self.a < self.i < self.N):
            raise InvalidQuery(f"need 0 <= a < i < N, got a={self.a}, i={self.i}, N={self.N}")
        if self.j is not None and not (self.a < self.j < self.N):
            raise InvalidQuery(f"occupation state j={self.j} must lie in ({self.a}, {self.N})")


@dataclass(frozen=True)
class GreenValue:
    value: float
    tail_residual: float = 0.0


def _weight(m: SingleDeathModel, q: ExitQuery):
    om = q.omega.values(q.N)
    if np.any(om < 0):
        raise InvalidQuery("exit functionals need a non-negative weight")
    if q.with_killing and m.is_killed:
        return Sum((q.omega, m.killing))
    return q.omega


def _table(m, q: ExitQuery):
    eff = _weight(m, q)
    t = potential_table(m, eff, q.N)
    den = t.w[q.a, q.N]
    if not math.isfinite(den):
        raise NumericalOverflow(f"W({q.a},{q.N}) overflowed")
    if den == 0.0:
        raise NumericalUnderflow(f"W({q.a},{q.N}) underflowed to 0")
    return t


def downcross_laplace(m: SingleDeathModel, q: ExitQuery) -> float:
    t = _table(m, q)
    return float(t.w[q.i, q.N] / t.w[q.a, q.N])


def _evaluate(m, q: ExitQuery, expr):
    eff = _weight(m, q)
    return stable_difference(expr, _table(m, q), lambda prec: extended_table(m, eff, q.N, prec))


def occupation_transform(m: SingleDeathModel, q: ExitQuery) -> GreenValue:
    if q.j is None:
        raise InvalidQuery("occupation_transform needs j")
    a, i, j, N = q.a, q.i, q.j, q.N

    def expr(t, fsum):
        first = t.W(a, j) * t.W(i, N) / t.W(a, N)
        return first - t.W(i, j), first

    if j <= i:  # W(i, j) = 0: a single product, nothing cancels
        t = _table(m, q)
        return GreenValue(float(t.w[a, j] * t.w[i, N] / t.w[a, N]), 0.0)
    v, err = _evaluate(m, q, expr)
    return GreenValue(max(v, 0.0) if v >= -err else v, err)


def upcross_laplace(m: SingleDeathModel, q: ExitQuery) -> float:
    a, i, N = q.a, q.i, q.N
    om = q.omega.values(N)

    def expr(t, fsum):
        def upper(x):  # 1 + sum_{x<u<N} w_u W(x, u)
            return fsum([1.0] + [float(om[u - 1]) * t.W(x, u) for u in range(x + 1, N)])

        ratio = t.W(i, N) / t.W(a, N)
        si, sa = upper(i), ratio * upper(a)
        return si - sa, max(abs(si), abs(sa))

    return _evaluate(m, q, expr)[0]


def hit_laplace_limit(m: SingleDeathModel, omega, a: int, i: int, window: TruncationWindow | None = None) -> SeriesDiagnostic:
    """``lim_N W(i,N)/W(a,N)`` and ``lim_N Z(i,N)/Z(a,N)`` for the chain without killing.

    ``partial_sums`` are the W-ratios along the schedule; ``extras`` holds the
    Z-ratios and, when ``sum_u w_u W(0,u)`` converges, the closed form
    ``Z(i,inf)/Z(a,inf)`` at the last level.
    """
    win = window or TruncationWindow()
    if not 0 <= a < i:
        raise InvalidQuery(f"need 0 <= a < i, got a={a}, i={i}")
    y = nonkilling_generator(m) if m.is_killed else m
    omega = as_rule(omega)
    N = win.n_max
    if i >= N:
        raise LevelExceeded(f"start state {i} beyond window {N}")
    t = potential_table(y, omega, N)
    levels = tuple(L for L in win.schedule if L > i)
    if not levels:
        raise LevelExceeded(f"no schedule level above {i}")
    wr = tuple(float(t.w[i, L] / t.w[a, L]) for L in levels)
    zr = tuple(float(t.z[i, L] / t.z[a, L]) for L in levels)
    vw, vz = series_verdict(wr, win.tol), series_verdict(zr, win.tol)
    agree = abs(wr[-1] - zr[-1]) <= win.tol * (1 + abs(zr[-1]))
    verdict = CONVERGED if (vw == CONVERGED and vz == CONVERGED and agree) else (UNDETERMINED if vw == CONVERGED or vz == CONVERGED else vw)
    extras = {"z_ratios": list(zr), "w_verdict": vw, "z_verdict": vz}
    base = potential_table(y, None, N).w[0, 1:]
    C = math.fsum(omega.values(N) * base)
    Cv = series_verdict([math.fsum((omega.values(N) * base)[:L]) for L in win.schedule], win.tol)
    extras["C"] = C
    extras["C_verdict"] = Cv
    if Cv == CONVERGED:
        extras["closed_form"] = zr[-1]
    return SeriesDiagnostic(f"hit_limit({a},{i})", levels, wr, verdict, win.tol, abs(wr[-1] - zr[-1]), extras)


def green_absorbed(m: SingleDeathModel, x: int, y: int, window: TruncationWindow | None = None) -> GreenValue:
    """Expected time at ``y`` before absorption at 0 or killing, from ``x``."""
    win = window or TruncationWindow()
    if x < 1 or y < 1:
        raise InvalidQuery("green_absorbed needs x, y >= 1")
    if max(x, y) >= win.n_max:
        raise LevelExceeded(f"({x}, {y}) beyond window {win.n_max}")
    h = harmonic_h(m, win)
    t = potential_table(m, m.killing, win.n_max)
    first = t.w[0, y] * h(x)
    v = first - t.w[x, y]
    slack = 8 * _EPS * abs(first)
    return GreenValue(max(v, 0.0) if v >= -slack else v, t.w[0, y] * h.tail_bound)


def resolvent_green(m: SingleDeathModel, q: float, i: int, j: int, window: TruncationWindow | None = None,
                    strict: bool = True) -> GreenValue:
    """``E_i int_0^{T_0 ^ T_kill} e^{-qt} 1{X_t = j} dt``.

    Evaluated as ``W^v(0,j) Z^v(i,N)/Z^v(0,N) - W^v(i,j)`` with ``v = q + c``
    at the window level.  ``strict`` demands numerical evidence that both
    ``sum W(0,u)`` and ``sum c_u W(0,u)`` converge; otherwise the Z-ratio is
    used as the limit of the W-ratios and ``tail_residual`` reports how far
    the two ratios still differ along the schedule.
    """
    win = window or TruncationWindow()
    if not q > 0:
        raise InvalidQuery("resolvent needs q > 0")
    if i < 1 or j < 1:
        raise InvalidQuery("resolvent needs i, j >= 1")
    N = win.n_max
    if max(i, j) >= N:
        raise LevelExceeded(f"({i}, {j}) beyond window {N}")
    if strict:
        reg = killing_regime(m, win)
        if not (reg.S.converged and (reg.C.converged or not m.is_killed)):
            raise HypothesisNotEstablished(
                f"resolvent closed form needs sum W(0,u) and sum c_u W(0,u) to converge "
                f"(verdicts {reg.S.verdict}, {reg.C.verdict}); pass strict=False for the limit form"
            )
    eff = Sum((Constant(float(q)), m.killing)) if m.is_killed else Constant(float(q))
    t = potential_table(m, eff, N)
    zr = t.z[i, N] / t.z[0, N]
    wr = t.w[i, N] / t.w[0, N]
    if not (math.isfinite(zr) and math.isfinite(wr)):
        raise NumericalOverflow("resolvent ratios overflowed; lower n_max")
    first = t.w[0, j] * zr
    v = first - t.w[i, j]
    slack = 8 * _EPS * abs(first)
    return GreenValue(max(v, 0.0) if v >= -slack else v, float(t.w[0, j] * abs(zr - wr)))
