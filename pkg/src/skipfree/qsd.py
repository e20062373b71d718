"""Decay parameter, quasi-stationary distributions, Doob transform, regimes.

Killed chain with small killing: every ``0 < theta <= lambda_0`` gives a
candidate ``nu_i ∝ W^{(c - theta)}(0, i)``.  Chain without killing:
``nu_i = theta W^{(-theta)}(0, i)``.  The Doob transform by ``h(i) =
P_i[T_0 < T_kill]`` turns the killed chain into a conservative one that is
conditioned to reach 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    EigSolverFailure,
    InvalidQuery,
    LevelExceeded,
    NegativeMass,
    NotNormalizable,
    SmallKillingNotEstablished,
)
from .model import RegimeDiagnostic, SingleDeathModel, TruncationWindow, killing_regime, nonkilling_generator
from .potential import HarmonicFunction, extended_table, harmonic_h, potential_table, stable_difference
from .rates import ZERO, Constant, RateRule, Sum, Table, UpRates, as_rule
from .series import CONVERGED, DIVERGING, diagnose


# ---------------------------------------------------------------------------
# decay parameter


@dataclass(frozen=True, eq=False)
class DecayEstimate:
    """Principal decay rate of the generator restricted to ``1..N``.

    ``estimates[k]`` belongs to ``levels[k]``.  Killing on leaving the window
    makes the estimates upper bounds that decrease with ``N``; ``drift`` is
    the last inter-level change and ``monotone`` records whether the sequence
    was non-increasing (up to rounding).  ``vector`` is the normalized left
    eigenvector at the last level, or None when inverse iteration could not
    produce one (defective spectrum).
    """

    lambda0: float
    levels: tuple
    estimates: tuple
    drift: float
    monotone: bool
    which: str
    vector: np.ndarray | None
    degenerate: bool

    def to_dict(self):
        return {
            "lambda0": self.lambda0,
            "levels": list(self.levels),
            "estimates": list(self.estimates),
            "drift": self.drift,
            "monotone": self.monotone,
            "which": self.which,
            "degenerate": self.degenerate,
        }


def restricted_matrix(m: SingleDeathModel, N: int) -> np.ndarray:
    """``-Q`` restricted to ``1..N`` (absorption, killing and overflow are loss)."""
    B = np.diag(m.total_rates(N)[1:])
    d = m.down.values(N)
    B[np.arange(1, N), np.arange(0, N - 1)] = -d[1:]
    for i in range(1, N):
        js, rs = m.up.targets(i, N)
        B[i - 1, js - 1] -= rs
    return B


def _level_decay(B: np.ndarray, max_iter: int = 50):
    """Bisection for ``sup{r : B - r I is a nonsingular M-matrix}`` and a left vector."""
    lo, hi = 0.0, float(np.min(np.diag(B)))
    if not _kernels.m_matrix_test(B, 0.0):
        return 0.0, None
    if _kernels.m_matrix_test(B, hi):
        lo = hi
    while hi - lo > 4e-16 * max(hi, 1e-300):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _kernels.m_matrix_test(B, mid):
            lo = mid
        else:
            hi = mid
    A = B - lo * np.eye(B.shape[0])
    U, mult, ok = _kernels.hessenberg_lu(A)
    if not ok:
        return lo, None
    x = np.full(B.shape[0], 1.0 / B.shape[0])
    with np.errstate(all="ignore"):
        for it in range(max_iter):
            y = _kernels.solve_transposed(U, mult, x)
            s = y.sum()
            if not (np.all(np.isfinite(y)) and s > 0):
                return lo, None
            y = y / s
            done = np.max(np.abs(y - x)) <= 1e-15
            x = y
            if done and it >= 1:
                break
    return lo, x


def decay_parameter(m: SingleDeathModel, window: TruncationWindow | None = None, which: str = "X") -> DecayEstimate:
    """Per-level decay rates; ``which='Y'`` drops the killing first.

    The rate at level ``N`` is the largest ``r`` for which ``-Q_N - r`` is a
    nonsingular M-matrix, found by bisection on the signs of the pivots of
    its (upper-Hessenberg) LU factorization.  The left vector comes from
    inverse iteration on the transpose at that shift.
    """
    if which not in ("X", "Y"):
        raise InvalidQuery("which must be 'X' or 'Y'")
    win = window or TruncationWindow()
    chain = nonkilling_generator(m) if which == "Y" else m
    ests = []
    vec = None
    for N in win.schedule:
        B = restricted_matrix(chain, N)
        if not np.all(np.isfinite(B)):
            raise EigSolverFailure(f"non-finite rates at level {N}")
        lam, vec = _level_decay(B)
        ests.append(lam)
    ests = tuple(ests)
    drift = abs(ests[-1] - ests[-2]) if len(ests) > 1 else math.inf
    mono = all(b <= a * (1 + 1e-12) + 1e-15 for a, b in zip(ests, ests[1:]))
    return DecayEstimate(ests[-1], tuple(win.schedule), ests, drift, mono, which, vec, vec is None)


# ---------------------------------------------------------------------------
# QSD candidates


@dataclass(frozen=True, eq=False)
class QsdResult:
    """Candidate QSD on ``1..N``: ``probs[i-1]`` is the mass of state ``i``."""

    theta: float
    probs: np.ndarray
    tail_mass: float
    residual: float
    family_tag: str
    normalizer: float
    negative_entries: int = 0
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "theta": self.theta,
            "probs": self.probs.tolist(),
            "tail_mass": self.tail_mass,
            "residual": self.residual,
            "family_tag": self.family_tag,
            "normalizer": self.normalizer,
            "negative_entries": self.negative_entries,
            **self.extras,
        }


NEGATIVE_TOL = 1e-12


def qsd_candidate(m: SingleDeathModel, theta: float, window: TruncationWindow | None = None,
                  family_tag: str = "candidate") -> QsdResult:
    """QSD candidate for decay rate ``theta`` from the signed-weight table.

    Entries below ``-NEGATIVE_TOL * max|W|`` invalidate the candidate; tiny
    negative values (rounding) are reported in ``negative_entries`` and set
    to zero.
    """
    if not theta > 0:
        raise InvalidQuery("theta must be positive")
    win = window or TruncationWindow()
    N = win.n_max
    if m.is_killed:
        reg = killing_regime(m, win)
        if not reg.small_killing:
            raise SmallKillingNotEstablished(f"sum c_u W(0,u) verdict {reg.C.verdict}")
        weight: RateRule = Sum((m.killing, Constant(-float(theta))))
    else:
        weight = Constant(-float(theta))
    t = potential_table(m, weight, N)
    Wrow = np.array(t.w[0, 1:])
    scale = float(np.max(np.abs(Wrow)))
    neg = Wrow < 0
    if np.any(Wrow < -NEGATIVE_TOL * scale):
        i = int(np.argmax(Wrow < -NEGATIVE_TOL * scale)) + 1
        raise NegativeMass(f"W(0,{i}) = {Wrow[i - 1]:.3e} < 0 at theta={theta}")
    Wrow[neg] = 0.0
    diag = diagnose("normalizer", Wrow, win.schedule, win.tol)
    if diag.verdict == DIVERGING or not diag.value > 0:
        raise NotNormalizable(f"sum_i W(0,i) {diag.verdict} (partial {diag.value:.6g}) at theta={theta}")
    tail = diag.tail_estimate if diag.tail_estimate is not None else 0.0
    total = diag.value + tail
    probs = Wrow / total
    extras = {"normalizer_verdict": diag.verdict}
    if not m.is_killed:
        extras["normalization_defect"] = float(theta * diag.value - 1.0)
    res = QsdResult(float(theta), probs, float(tail / total), math.nan, family_tag, float(diag.value),
                    int(np.count_nonzero(neg)), extras)
    r = stationarity_residual(m, res)
    return QsdResult(res.theta, probs, res.tail_mass, r, family_tag, res.normalizer, res.negative_entries, extras)


def qsd_family(m: SingleDeathModel, window: TruncationWindow | None = None, lambda0: float | None = None,
               n_grid: int = 8, ratio: float = 0.5) -> list:
    """Candidates on the geometric grid ``lambda0 * ratio**k``, ``k < n_grid``."""
    win = window or TruncationWindow()
    if lambda0 is None:
        lambda0 = decay_parameter(m, win, "X" if m.is_killed else "Y").lambda0
    out = []
    for k in range(n_grid):
        theta = lambda0 * ratio**k
        try:
            out.append(qsd_candidate(m, theta, win, "continuum-member"))
        except (NegativeMass, NotNormalizable) as exc:
            out.append(exc)
    return out


def generator_rows(m: SingleDeathModel, N: int):
    """Dense rates ``q_ij`` on ``1..N`` (index ``i-1``) and total rates ``q_i``."""
    R = np.zeros((N, N))
    d = m.down.values(N)
    R[np.arange(1, N), np.arange(0, N - 1)] = d[1:]
    for i in range(1, N + 1):
        js, rs = m.up.targets(i, N)
        R[i - 1, js - 1] = rs
    return R, m.total_rates(N)[1:]


def stationarity_residual(m: SingleDeathModel, nu: QsdResult, window: TruncationWindow | None = None,
                          margin: int = 1, floor: float = 1e-8) -> float:
    """``max_j |(nu Q)_j + theta nu_j| / max(nu_j, floor)`` over ``j <= N - margin``."""
    p = np.asarray(nu.probs, dtype=float)
    N = p.size
    R, q = generator_rows(m, N)
    flux = p @ R - q * p + nu.theta * p
    J = N - margin
    if J < 1:
        raise LevelExceeded("distribution too short for the margin")
    return float(np.max(np.abs(flux[:J]) / np.maximum(p[:J], floor)))


# ---------------------------------------------------------------------------
# Doob transform


@dataclass(frozen=True, eq=False)
class DoobUp(UpRates):
    """Up rates ``q_ij h(j) / h(i)`` with ``h`` from a truncated harmonic function."""

    base: UpRates
    h: HarmonicFunction

    @property
    def max_jump(self):
        return self.base.max_jump

    def _h(self, j):
        return self.h(j)

    def tail(self, i, k):
        L = self.h.level
        head = 0.0
        if k < L:
            js, rs = self.base.targets(i, L - 1)
            keep = js >= k
            head = math.fsum(rs[keep] * self.h.values[js[keep]])
        return (head + self.base.tail(i, max(k, L)) * self.h.beyond) / self._h(i)

    def targets(self, i, n_max):
        js, rs = self.base.targets(i, n_max)
        hv = np.array([self._h(int(j)) for j in js])
        return js, rs * hv / self._h(i)

    def sample(self, i, u):
        target = u * self.total(i)
        js, rs = self.targets(i, self.h.level)
        acc = 0.0
        for j, r in zip(js, rs):
            acc += r
            if target < acc:
                return int(j)
        beyond = self.h.level
        base_u = (target - acc) / (self.base.tail(i, beyond) * self.h.beyond / self._h(i))
        # beyond the table h is constant, so the base law conditioned on j >= L applies
        return self.base.sample(i, 1.0 - (1.0 - min(base_u, 1.0)) * self.base.tail(i, beyond) / self.base.total(i))


@dataclass(frozen=True, eq=False)
class DoobModel:
    model: SingleDeathModel
    h: HarmonicFunction
    row_residual: np.ndarray  # index i-1 for rows 1..N-1

    @property
    def max_residual(self) -> float:
        return float(np.max(self.row_residual)) if self.row_residual.size else 0.0


def doob_transform(m: SingleDeathModel, window: TruncationWindow | None = None) -> DoobModel:
    win = window or TruncationWindow()
    h = harmonic_h(m, win)
    N = h.level
    if not m.is_killed:
        y = nonkilling_generator(m)
        return DoobModel(y, h, np.zeros(N - 1))
    hv = h.values
    down = Table(tuple(float(v) for v in m.down.values(N) * hv[:-1] / hv[1:]))
    up = DoobUp(m.up, h)
    dm = SingleDeathModel(down, up, ZERO, f"doob({m.name})", "Y")
    q = m.total_rates(N - 1)[1:]
    new_total = np.array([down(i) + up.total(i) for i in range(1, N)])
    return DoobModel(dm, h, np.abs(new_total - q))


def doob_g_closed_form(m: SingleDeathModel, q: float, k: int, N: int, window: TruncationWindow | None = None) -> float:
    """Coefficient ``G_k^{(N)}(q)`` of the Doob-transformed chain from the original tables."""
    win = window or TruncationWindow()
    if not 1 <= k <= N:
        raise InvalidQuery(f"need 1 <= k <= N, got k={k}, N={N}")
    if N >= win.n_max:
        raise LevelExceeded(f"N={N} must stay below the window {win.n_max}")
    harmonic_h(m, win)  # establishes small killing
    if k == N:
        return 1.0
    L = win.n_max
    weight = Sum((Constant(float(q)), m.killing)) if m.is_killed else Constant(float(q))
    dN = m.down(N)

    def expr(tabs, fsum):
        tq, tc = tabs

        def h(x):  # truncated harmonic function, as in harmonic_h
            return tc.Z(x, L) / tc.Z(0, L) if m.is_killed else 1.0

        hN = h(N - 1)
        first = dN * hN * tq.W(k - 1, N) / h(k - 1)
        second = dN * hN * tq.W(k, N) / h(k)
        return first - second, first

    value, _ = stable_difference(
        expr,
        (potential_table(m, weight, N), potential_table(m, m.killing, L)),
        lambda prec: (extended_table(m, weight, N, prec), extended_table(m, m.killing, L, prec)),
    )
    return value


# ---------------------------------------------------------------------------
# classification

NO_QSD = "NoQSD"
CONTINUUM = "Continuum"
UNIQUE = "Unique"
UNIQUE_UNIFORM = "UniqueUniform"
UNIQUE_LARGE_KILLING = "UniqueLargeKilling"
UNDETERMINED_REGIME = "Undetermined"


@dataclass(frozen=True, eq=False)
class RegimeVerdict:
    regime: str
    evidence: dict

    def to_dict(self):
        return {"regime": self.regime, "evidence": self.evidence, "status": "numerical evidence, not a proof"}


def classify_regime(m: SingleDeathModel, d: RegimeDiagnostic, lam: DecayEstimate) -> RegimeVerdict:
    """Map series verdicts and the decay estimate to a QSD regime.

    Order of the rules: large killing; then, under small killing (always
    true without killing), ``lambda_0 ~ 0`` gives NoQSD, a convergent
    ``sum W(0,u)`` gives Unique and a divergent one Continuum.  Bounded
    killing with convergent ``sum W(0,u)`` already implies small killing, so
    UniqueUniform is only reported when the killing series itself stayed
    undecided.
    """
    zero_threshold = 10.0 * lam.drift if math.isfinite(lam.drift) else 0.0
    ev = {
        "diagnostics": d.to_dict(),
        "decay": lam.to_dict(),
        "lambda_zero_threshold": zero_threshold,
        "killed": m.is_killed,
    }
    lam_zero = lam.lambda0 <= zero_threshold
    small = d.small_killing or not m.is_killed
    if m.is_killed and d.large_killing:
        regime = UNIQUE_LARGE_KILLING
        ev["rule"] = "liminf c_n proxy exceeds inf q_n on the window"
    elif small:
        if lam_zero:
            regime = NO_QSD
            ev["rule"] = "small killing and lambda_0 below the zero threshold"
        elif d.S.verdict == CONVERGED:
            regime = UNIQUE
            ev["rule"] = "small killing and sum W(0,u) converged"
            ev["uniform_convergence"] = bool(d.killing_bounded)
        elif d.S.verdict == DIVERGING:
            regime = CONTINUUM
            ev["rule"] = "small killing, lambda_0 > 0 and sum W(0,u) diverging"
        else:
            regime = UNDETERMINED_REGIME
            ev["rule"] = "sum W(0,u) undetermined"
    elif d.killing_bounded and d.S.verdict == CONVERGED:
        regime = UNIQUE_UNIFORM
        ev["rule"] = "bounded killing and sum W(0,u) converged"
    else:
        regime = UNDETERMINED_REGIME
        ev["rule"] = "no hypothesis established"
    return RegimeVerdict(regime, ev)


def classify(m: SingleDeathModel, window: TruncationWindow | None = None) -> RegimeVerdict:
    win = window or TruncationWindow()
    return classify_regime(m, killing_regime(m, win), decay_parameter(m, win, "X" if m.is_killed else "Y"))
