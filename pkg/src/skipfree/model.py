"""Single-death (downwardly skip-free) chains with killing.

State 0 is absorbing; from ``i >= 1`` the chain steps down to ``i-1`` at rate
``down(i) > 0``, jumps up according to ``up`` and is killed at rate
``killing(i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .errors import (
    AllZeroKilling,
    ConfigError,
    DownJumpTooFar,
    InfiniteRowRate,
    InvalidQuery,
    NegativeRate,
    NonPositiveDownRate,
    TailUnavailable,
)
from .rates import ZERO, ExplicitUp, NoUp, RateRule, UpRates, as_rule
from .series import CONVERGED, SeriesDiagnostic, diagnose


def _default_schedule(n_max):
    levels = [n_max >> k for k in range(4, -1, -1)]
    return tuple(sorted({L for L in levels if L >= 5} | {n_max}))


@dataclass(frozen=True)
class TruncationWindow:
    """Largest level used, convergence tolerance and the growth schedule."""

    n_max: int = 400
    tol: float = 1e-2
    schedule: tuple | None = None

    def __post_init__(self):
        if int(self.n_max) < 2:
            raise ConfigError("n_max must be >= 2")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.schedule is None:
            sched = _default_schedule(int(self.n_max))
        else:
            sched = tuple(sorted({int(L) for L in self.schedule if 1 <= int(L) <= self.n_max} | {int(self.n_max)}))
        object.__setattr__(self, "n_max", int(self.n_max))
        object.__setattr__(self, "schedule", sched)


@dataclass(frozen=True)
class SingleDeathModel:
    down: RateRule
    up: UpRates = field(default_factory=NoUp)
    killing: RateRule = ZERO
    name: str = field(default="custom", compare=False)
    process: str = "X"

    def __post_init__(self):
        object.__setattr__(self, "down", as_rule(self.down))
        object.__setattr__(self, "killing", as_rule(self.killing))
        if self.process not in ("X", "Y"):
            raise ConfigError(f"process must be 'X' or 'Y', got {self.process!r}")

    @property
    def is_killed(self) -> bool:
        return not self.killing.is_zero()

    # arrays indexed by state 0..n (entry 0 is a zero placeholder)
    def down_rates(self, n: int) -> np.ndarray:
        return np.concatenate([[0.0], self.down.values(n)])

    def killing_rates(self, n: int) -> np.ndarray:
        return np.concatenate([[0.0], self.killing.values(n)])

    def up_totals(self, n: int) -> np.ndarray:
        return np.array([0.0] + [self.up.total(i) for i in range(1, n + 1)])

    def total_rates(self, n: int) -> np.ndarray:
        """``q_i = c_i + q_{i,i-1} + sum_{j>i} q_ij`` for ``i = 0..n``."""
        return self.killing_rates(n) + self.down_rates(n) + self.up_totals(n)

    def tail_rate(self, n: int, k: int, omega=None) -> float:
        """``sum_{j >= k} q_nj + omega_n`` for ``k > n >= 1``."""
        if not (n >= 1 and k > n):
            raise InvalidQuery(f"tail_rate needs k > n >= 1, got n={n}, k={k}")
        return self.up.tail(n, k) + as_rule(omega)(n)

    def tails(self, n: int) -> np.ndarray:
        """Read-only tail matrix ``T[i, l] = sum_{j >= l} q_ij`` (``i < l <= n``)."""
        return _tail_matrix(self, n)

    def max_up_jump(self):
        return self.up.max_jump

    def to_config(self):
        from .config import model_to_config

        return model_to_config(self)


@lru_cache(maxsize=64)
def _tail_matrix(m: SingleDeathModel, n: int) -> np.ndarray:
    T = m.up.tail_matrix(n)
    T.setflags(write=False)
    return T


def nonkilling_generator(m: SingleDeathModel) -> SingleDeathModel:
    """The same chain with killing removed (conservative rows)."""
    return replace(m, killing=ZERO, process="Y", name=m.name)


def validate_model(spec, window: TruncationWindow | None = None, require_killing: bool = True) -> SingleDeathModel:
    """Build (from a config dict) and check a model on the truncation window."""
    if isinstance(spec, dict):
        from .config import model_from_config

        m = model_from_config(spec)
    elif isinstance(spec, SingleDeathModel):
        m = spec
    else:
        raise ConfigError(f"cannot build a model from {type(spec).__name__}")
    n = (window or TruncationWindow()).n_max
    d = m.down.values(n)
    c = m.killing.values(n)
    if not np.all(np.isfinite(d)) or not np.all(np.isfinite(c)):
        raise InfiniteRowRate("non-finite down or killing rate on the window")
    if np.any(d <= 0):
        i = int(np.argmax(d <= 0)) + 1
        raise NonPositiveDownRate(f"q_{{{i},{i - 1}}} = {d[i - 1]} must be positive")
    if np.any(c < 0):
        i = int(np.argmax(c < 0)) + 1
        raise NegativeRate(f"killing rate c_{i} = {c[i - 1]} is negative")
    if isinstance(m.up, ExplicitUp):
        for i, pairs in m.up.rows:
            if i < 1:
                raise ConfigError(f"up-rate row for state {i}; rows start at 1")
            for j, r in pairs:
                if j <= i - 2:
                    raise DownJumpTooFar(f"q_{{{i},{j}}} = {r}: only unit down steps are allowed")
                if j in (i - 1, i):
                    raise ConfigError(f"q_{{{i},{j}}} belongs in down_rate / the diagonal, not up_rates")
                if r < 0:
                    raise NegativeRate(f"q_{{{i},{j}}} = {r} is negative")
                if not math.isfinite(r):
                    raise InfiniteRowRate(f"q_{{{i},{j}}} is not finite")
    for i in range(1, n + 1):
        try:
            tot = m.up.total(i)
        except TailUnavailable:
            _, rs = m.up.targets(i, n)
            tot = float(np.sum(rs)) if rs.size else 0.0
            if np.any(rs < 0):
                raise NegativeRate(f"negative up rate from state {i}")
        if not math.isfinite(tot):
            raise InfiniteRowRate(f"total up rate of state {i} is not finite")
        if tot < 0:
            raise NegativeRate(f"negative up rate from state {i}")
    if require_killing and m.process == "X" and m.killing.is_zero():
        raise AllZeroKilling("killing is identically 0; declare process 'Y' for a non-killed chain")
    return m


def hypothesis_report(m: SingleDeathModel, window: TruncationWindow | None = None) -> dict:
    """Which structural hypotheses can be checked syntactically on the window."""
    n = (window or TruncationWindow()).n_max
    try:
        m.up.tail(1, 2)
        tails = True
    except TailUnavailable:
        tails = False
    # reach[i] = highest state reachable in one jump from i (inf if beyond window)
    trapped = []
    best = 0
    for i in range(1, n):
        js, _ = m.up.targets(i, n)
        reach = int(js.max()) if js.size else i
        if tails and m.up.tail(i, n + 1) > 0:
            reach = n + 1
        best = max(best, reach)
        if best <= i:
            trapped.append(i)
    sup_c = m.killing.sup()
    return {
        "process": m.process,
        "killed": m.is_killed,
        "tail_accessor": tails,
        "irreducible_on_window": not trapped,
        "first_trapping_level": trapped[0] if trapped else None,
        "killing_sup": sup_c,
        "killing_bounded": None if sup_c is None else bool(math.isfinite(sup_c)),
        "killing_liminf": m.killing.liminf(),
        "max_up_jump": m.up.max_jump,
    }


@dataclass(frozen=True)
class RegimeDiagnostic:
    S: SeriesDiagnostic
    C: SeriesDiagnostic
    CDFIBK: SeriesDiagnostic
    large_killing: bool
    liminf_c_proxy: float
    inf_q: float
    killing_bounded: bool | None

    @property
    def small_killing(self) -> bool:
        return self.C.verdict == CONVERGED

    def to_dict(self):
        return {
            "S": self.S.to_dict(),
            "C": self.C.to_dict(),
            "CDFIBK": self.CDFIBK.to_dict(),
            "large_killing": self.large_killing,
            "liminf_c_proxy": self.liminf_c_proxy,
            "inf_q": self.inf_q,
            "killing_bounded": self.killing_bounded,
        }


def killing_regime(m: SingleDeathModel, window: TruncationWindow | None = None) -> RegimeDiagnostic:
    """Partial sums of ``sum W(0,u)``, ``sum c_u W(0,u)`` and their sum."""
    from .potential import potential_table

    w = window or TruncationWindow()
    n = w.n_max
    W0 = potential_table(m, None, n).w[0, 1:]
    c = m.killing.values(n)
    S = diagnose("S", W0, w.schedule, w.tol)
    C = diagnose("C", c * W0, w.schedule, w.tol)
    D = diagnose("CDFIBK", (1.0 + c) * W0, w.schedule, w.tol)
    q = m.total_rates(n)[1:]
    liminf_proxy = float(np.min(c[n // 2:]))
    inf_q = float(np.min(q))
    sup_c = m.killing.sup()
    bounded = None if sup_c is None else bool(math.isfinite(sup_c))
    return RegimeDiagnostic(S, C, D, bool(liminf_proxy > inf_q), liminf_proxy, inf_q, bounded)
