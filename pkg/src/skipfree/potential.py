"""Triangular potential tables ``G_n^{(k)}(w)``, ``W^{(w)}(i,j)``, ``Z^{(w)}(i,j)``.

For a weight ``w`` on the states ``1, 2, ...`` the coefficients solve

    G_n^{(n)} = 1,
    G_n^{(k)} = sum_{l=n+1}^{k} (T[n, l] + w_n) G_l^{(k)} / q_{n,n-1},

with ``T[n, l] = sum_{j >= l} q_nj``.  ``W(i, j)`` is the scaled suffix sum of
column ``j``; ``Z(i, j) = 1 + sum_{i<u<j} w_u W(i, u)``.  ``W(., j)`` is the
unique upper-triangular solution of ``(Q^Y - diag(w)) F(., j) = delta_j`` on
the rows ``1..j-1``, which makes the tables the building block for every
exit functional.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import mpmath
import numpy as np

from . import _kernels
from .errors import LevelExceeded, NumericalOverflow, SmallKillingNotEstablished
from .model import SingleDeathModel, TruncationWindow, killing_regime
from .rates import RateRule, as_rule
from .series import CONVERGED, SeriesDiagnostic, diagnose


@dataclass(frozen=True, eq=False)
class PotentialTable:
    """Tables at level ``N``; arrays are ``(N+1, N+1)`` and read-only.

    ``g[n, k]`` holds ``G_n^{(k)}``; ``w[i, j]`` and ``z[i, j]`` are zero for
    ``i >= j``.  ``negative_entries`` counts negative ``G`` values, which can
    only occur for signed weights.
    """

    omega: RateRule
    level: int
    g: np.ndarray
    w: np.ndarray
    z: np.ndarray
    negative_entries: int

    def _check(self, i, j):
        if not (0 <= i <= self.level and 0 <= j <= self.level):
            raise LevelExceeded(f"({i}, {j}) outside table level {self.level}")

    def W(self, i: int, j: int) -> float:
        self._check(i, j)
        return float(self.w[i, j])

    def Z(self, i: int, j: int) -> float:
        self._check(i, j)
        return float(self.z[i, j])

    def G(self, n: int, k: int) -> float:
        self._check(n, k)
        return float(self.g[n, k])


class _TableCache:
    """Keeps the largest table built so far for each (model, weight) pair.

    Table entries at indices ``<= N`` do not depend on the build level, so a
    larger table answers every smaller query.
    """

    def __init__(self, maxsize=64):
        self._tables: dict = {}
        self._lock = threading.Lock()
        self._maxsize = maxsize

    def get(self, key, level):
        with self._lock:
            t = self._tables.get(key)
        return t if t is not None and t.level >= level else None

    def put(self, key, table):
        with self._lock:
            old = self._tables.pop(key, None)
            if old is not None and old.level > table.level:
                table = old
            self._tables[key] = table
            while len(self._tables) > self._maxsize:
                self._tables.pop(next(iter(self._tables)))
        return table

    def clear(self):
        with self._lock:
            self._tables.clear()


_CACHE = _TableCache()


def clear_cache():
    _CACHE.clear()


def _build(m: SingleDeathModel, omega: RateRule, N: int) -> PotentialTable:
    tails = np.ascontiguousarray(m.tails(N))
    om = np.concatenate([[0.0], omega.values(N)])
    down = m.down_rates(N)
    g = _kernels.g_table(tails, om, down, N)
    w = _kernels.w_table(g, down, N)
    z = _kernels.z_table(w, om, N)
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(w)) and np.all(np.isfinite(z))):
        raise NumericalOverflow(f"potential table overflowed at level {N}; lower n_max")
    for a in (g, w, z):
        a.setflags(write=False)
    return PotentialTable(omega, N, g, w, z, int(np.count_nonzero(g < 0)))


def potential_table(m: SingleDeathModel, omega=None, N: int = 1) -> PotentialTable:
    """Tables of ``G``, ``W``, ``Z`` for weight ``omega`` up to level ``N``."""
    omega = as_rule(omega)
    N = max(int(N), 1)
    key = (m, omega)
    t = _CACHE.get(key, N)
    if t is None:
        t = _CACHE.put(key, _build(m, omega, N))
    if t.level > N:  # entries do not depend on the build level; hand out a view
        k = N + 1
        g = t.g[:k, :k]
        t = PotentialTable(omega, N, g, t.w[:k, :k], t.z[:k, :k], int(np.count_nonzero(g < 0)))
    return t


def g_coefficients(m: SingleDeathModel, omega=None, N: int = 1) -> np.ndarray:
    """``G[n, k] = G_n^{(k)}(omega)`` for ``1 <= n <= k <= N``."""
    return potential_table(m, omega, N).g


def w(m: SingleDeathModel, omega, i: int, j: int, level: int | None = None) -> float:
    level = max(i, j, 1) if level is None else level
    if i > level or j > level or i < 0 or j < 0:
        raise LevelExceeded(f"W({i}, {j}) requested beyond level {level}")
    if i >= j:
        return 0.0
    return potential_table(m, omega, j).W(i, j)


def z(m: SingleDeathModel, omega, i: int, j: int, level: int | None = None) -> float:
    level = max(i, j, 1) if level is None else level
    if i > level or j > level or i < 0 or j < 0:
        raise LevelExceeded(f"Z({i}, {j}) requested beyond level {level}")
    if i >= j:
        return 0.0
    return potential_table(m, omega, j).Z(i, j)


def z_infinity(m: SingleDeathModel, omega, i: int, window: TruncationWindow | None = None) -> SeriesDiagnostic:
    """``Z(i, inf) = 1 + sum_{u > i} omega_u W(i, u)`` along the schedule.

    When ``C = sum_u omega_u W(0, u)`` converges, ``extras['tail_bound']``
    carries the estimate ``e^C * (tail of C)`` for the truncated remainder.
    This is an estimate, not a certified bound.
    """
    win = window or TruncationWindow()
    omega = as_rule(omega)
    N = win.n_max
    if i >= N:
        raise LevelExceeded(f"start state {i} beyond window {N}")
    t = potential_table(m, omega, N)
    om = omega.values(N)
    if omega.is_zero():
        return SeriesDiagnostic(f"Z({i},inf)", win.schedule, tuple(1.0 for _ in win.schedule), CONVERGED, win.tol, 0.0)
    terms = np.zeros(N)
    terms[i:] = om[i:] * t.w[i, i + 1:]
    d = diagnose(f"Z({i},inf)", np.concatenate([[1.0], terms]), [L + 1 for L in win.schedule], win.tol)
    base = potential_table(m, None, N)
    Cterms = om * base.w[0, 1:]
    Cd = diagnose("C", Cterms, win.schedule, win.tol)
    extras = {"C": Cd.value, "C_verdict": Cd.verdict}
    if Cd.converged and np.all(om >= 0):
        extras["tail_bound"] = math.exp(Cd.value) * (Cd.tail_estimate or 0.0)
    return SeriesDiagnostic(d.name, win.schedule, d.partial_sums, d.verdict, win.tol, d.tail_estimate, extras)


@dataclass(frozen=True)
class WSeries:
    terms: np.ndarray
    partial_sums: np.ndarray

    @property
    def total(self) -> float:
        return float(self.partial_sums[-1])


def w_series(m: SingleDeathModel, omega, i: int, j: int, n_terms: int | None = None) -> WSeries:
    """Expansion of ``W^{(omega)}(i, j)`` in powers of ``omega``.

    Term ``n+1`` is ``sum_{i<u<j} term_n(i, u) omega_u W(u, j)`` with term 0
    equal to the unweighted ``W(i, j)``.  Terms vanish for ``n >= j - i``.
    """
    if not (0 <= i < j):
        raise LevelExceeded(f"w_series needs 0 <= i < j, got ({i}, {j})")
    omega = as_rule(omega)
    n_terms = (j - i - 1) if n_terms is None else n_terms
    W0 = potential_table(m, None, j).w
    om = np.concatenate([[0.0], omega.values(j)])
    row = W0[i, : j + 1].copy()  # term_n(i, u) for u = 0..j
    terms = [row[j]]
    for _ in range(n_terms):
        weighted = row * om
        weighted[: i + 1] = 0.0
        row = weighted @ W0[:, : j + 1]
        terms.append(row[j])
    terms = np.array(terms)
    return WSeries(terms, np.cumsum(terms))


@dataclass(frozen=True, eq=False)
class HarmonicFunction:
    """``h(i) = P_i[hit 0 before killing]`` for ``i = 0..N``.

    ``values[i]`` uses the level-``N`` approximation ``Z(i, N) / Z(0, N)``
    extended by ``1 / Z(0, N)`` at ``i >= N``; this truncation is exactly
    harmonic for the killed generator on the rows ``1..N-1``.
    """

    values: np.ndarray
    z0_infinity: float
    tail_bound: float
    diagnostic: SeriesDiagnostic | None

    @property
    def level(self) -> int:
        return self.values.size - 1

    @property
    def beyond(self) -> float:
        return 1.0 / self.z0_infinity

    def __call__(self, i: int) -> float:
        return float(self.values[i]) if i <= self.level else self.beyond


def harmonic_h(m: SingleDeathModel, window: TruncationWindow | None = None) -> HarmonicFunction:
    win = window or TruncationWindow()
    N = win.n_max
    if not m.is_killed:
        vals = np.ones(N + 1)
        vals.setflags(write=False)
        return HarmonicFunction(vals, 1.0, 0.0, None)
    reg = killing_regime(m, win)
    if not reg.small_killing:
        raise SmallKillingNotEstablished(
            f"sum c_u W(0,u) verdict {reg.C.verdict} (partial {reg.C.value:.6g} at level {N})"
        )
    t = potential_table(m, m.killing, N)
    zcol = np.array(t.z[:, N])
    zcol[N] = 1.0
    z0 = float(zcol[0])
    vals = zcol / z0
    vals.setflags(write=False)
    zdiag = z_infinity(m, m.killing, 0, win)
    tail = zdiag.extras.get("tail_bound", reg.C.tail_estimate or 0.0)
    return HarmonicFunction(vals, z0, float(tail) / z0, zdiag)


class ExtendedTable:
    """Lazily built ``W``/``Z`` columns in ``prec``-bit binary floating point.

    Used to re-evaluate identities whose double-precision evaluation cancels
    catastrophically (differences of large, nearly equal table products).
    Columns of ``G`` are independent, so ``W(., j)`` costs ``O(j^2)``; a
    ``Z(i, j)`` query needs every column below ``j``.
    """

    def __init__(self, m: SingleDeathModel, omega: RateRule, level: int, prec: int):
        self.level = level
        self.prec = prec
        with mpmath.workprec(prec):
            self._tails = m.tails(level)
            self._om = [mpmath.mpf(0)] + [mpmath.mpf(float(v)) for v in omega.values(level)]
            self._down = [mpmath.mpf(0)] + [mpmath.mpf(float(v)) for v in m.down.values(level)]
        self._cols: dict = {}
        self._z: dict = {}

    def _column(self, j):
        col = self._cols.get(j)
        if col is not None:
            return col
        T, om, d = self._tails, self._om, self._down
        with mpmath.workprec(self.prec):
            g = [mpmath.mpf(0)] * (j + 1)
            g[j] = mpmath.mpf(1)
            for n in range(j - 1, 0, -1):
                coef = [mpmath.mpf(float(T[n, l])) + om[n] for l in range(n + 1, j + 1)]
                g[n] = mpmath.fdot(coef, g[n + 1: j + 1]) / d[n]
            col = [mpmath.mpf(0)] * (j + 1)
            acc = mpmath.mpf(0)
            for i in range(j - 1, -1, -1):
                acc += g[i + 1]
                col[i] = acc / d[j]
        self._cols[j] = col
        return col

    def W(self, i, j):
        if not (0 <= i <= self.level and 0 <= j <= self.level):
            raise LevelExceeded(f"({i}, {j}) outside table level {self.level}")
        return self._column(j)[i] if i < j else mpmath.mpf(0)

    def Z(self, i, j):
        if i >= j:
            return mpmath.mpf(0)
        z = self._z.get((i, j))
        if z is None:
            with mpmath.workprec(self.prec):
                z = self._z[(i, j)] = mpmath.mpf(1) + mpmath.fsum(self._om[u] * self.W(i, u) for u in range(i + 1, j))
        return z


_EXT_LOCK = threading.Lock()
_EXT_CACHE: dict = {}


def extended_table(m: SingleDeathModel, omega, level: int, prec: int) -> ExtendedTable:
    omega = as_rule(omega)
    key = (m, omega, level, prec)
    with _EXT_LOCK:
        t = _EXT_CACHE.get(key)
        if t is None:
            if len(_EXT_CACHE) > 32:
                _EXT_CACHE.pop(next(iter(_EXT_CACHE)))
            t = _EXT_CACHE[key] = ExtendedTable(m, omega, level, prec)
    return t


LOSS_OK_BITS = 10  # cancellation tolerated in double precision
MAX_PREC = 4096
_EPS = float(np.finfo(float).eps)


def stable_difference(expr, double_tables, extended_tables):
    """Evaluate a difference of table expressions without silent cancellation.

    ``expr(tables, fsum)`` returns ``(value, magnitude)`` where ``magnitude``
    bounds the terms that cancel.  The double-precision tables are tried
    first; if more than ``LOSS_OK_BITS`` bits were lost, ``expr`` is re-run on
    ``extended_tables(prec)`` with growing precision until at least 64
    significant bits survive.  Returns ``(value, error_estimate)``.
    """
    v, mag = expr(double_tables, math.fsum)
    if v != 0 and mag <= abs(v) * 2.0**LOSS_OK_BITS:
        return float(v), 8 * _EPS * float(mag)
    lost = math.log2(mag / abs(v)) if v != 0 and mag > 0 else 64
    prec = 128
    while prec < min(53 + lost + 64, MAX_PREC):  # fixed ladder so cached tables get reused
        prec *= 2
    while True:
        tables = extended_tables(prec)
        with mpmath.workprec(prec):
            v, mag = expr(tables, mpmath.fsum)
            err = mag * mpmath.ldexp(1, 3 - prec)
            if (v != 0 and mag <= abs(v) * mpmath.ldexp(1, prec - 64)) or prec >= MAX_PREC:
                return float(v), float(err)
        prec = min(2 * prec, MAX_PREC)
