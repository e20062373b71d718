"""Per-state rate sequences and upward-jump descriptions.

A :class:`RateRule` is a real sequence indexed by states ``i >= 1`` (down
rates, killing rates, weight functions).  An :class:`UpRates` object
describes the upward transitions ``{q_ij : j > i}`` of every state together
with the tail sums ``sum_{j >= k} q_ij`` the potential recursions need.

All objects are frozen and hashable so that models can be cached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from numbers import Real
from typing import Callable

import numpy as np

from .errors import ConfigError, LevelExceeded, TailUnavailable


class RateRule:
    """A real sequence on the states ``1, 2, 3, ...``."""

    def __call__(self, i: int) -> float:
        raise NotImplementedError

    def values(self, n: int) -> np.ndarray:
        """Values at states ``1..n`` as a float array of length ``n``."""
        return np.array([self(i) for i in range(1, n + 1)], dtype=float)

    def sup(self):
        """Analytic supremum over all states, or None if unknown."""
        return None

    def liminf(self):
        """Analytic ``liminf_{i -> inf}``, or None if unknown."""
        return None

    def is_zero(self) -> bool:
        return False

    def to_config(self):
        raise ConfigError(f"{type(self).__name__} cannot be serialized")

    def __add__(self, other):
        return Sum((self, as_rule(other)))

    def __radd__(self, other):
        return Sum((as_rule(other), self))

    def __neg__(self):
        return Scaled(self, -1.0)

    def __sub__(self, other):
        return Sum((self, -as_rule(other)))


@dataclass(frozen=True)
class Constant(RateRule):
    value: float

    def __call__(self, i):
        return float(self.value)

    def values(self, n):
        return np.full(n, float(self.value))

    def sup(self):
        return float(self.value)

    def liminf(self):
        return float(self.value)

    def is_zero(self):
        return self.value == 0

    def to_config(self):
        return {"rule": "constant", "value": self.value}


@dataclass(frozen=True)
class Power(RateRule):
    """``coef * i**exponent``."""

    coef: float
    exponent: float

    def __call__(self, i):
        return float(self.coef * float(i) ** self.exponent)

    def values(self, n):
        return self.coef * np.arange(1, n + 1, dtype=float) ** self.exponent

    def sup(self):
        if self.coef == 0 or self.exponent == 0:
            return abs(self.coef) if self.coef >= 0 else self.coef
        if self.exponent > 0:
            return math.inf if self.coef > 0 else self.coef
        return float(self.coef) if self.coef > 0 else 0.0

    def liminf(self):
        if self.exponent > 0 and self.coef > 0:
            return math.inf
        if self.exponent == 0:
            return float(self.coef)
        return 0.0 if self.exponent < 0 else -math.inf

    def is_zero(self):
        return self.coef == 0

    def to_config(self):
        return {"rule": "power", "coef": self.coef, "exponent": self.exponent}


@dataclass(frozen=True)
class Geometric(RateRule):
    """``coef * ratio**i``."""

    coef: float
    ratio: float

    def __call__(self, i):
        return float(self.coef * self.ratio ** i)

    def values(self, n):
        return self.coef * self.ratio ** np.arange(1, n + 1, dtype=float)

    def sup(self):
        if self.ratio > 1 and self.coef > 0:
            return math.inf
        return float(max(self.coef * self.ratio, 0.0 if self.ratio < 1 else self.coef * self.ratio))

    def liminf(self):
        if self.ratio < 1:
            return 0.0
        if self.ratio == 1:
            return float(self.coef)
        return math.inf if self.coef > 0 else -math.inf

    def is_zero(self):
        return self.coef == 0 or self.ratio == 0

    def to_config(self):
        return {"rule": "geometric", "coef": self.coef, "ratio": self.ratio}


@dataclass(frozen=True)
class Table(RateRule):
    """Explicit values for states ``1..len(values)``.

    Beyond the table the sequence equals ``fill``; with ``fill=None`` it is
    undefined there and queries raise :class:`LevelExceeded`.
    """

    values_: tuple
    fill: float | None = None

    def __call__(self, i):
        if i <= len(self.values_):
            return float(self.values_[i - 1])
        if self.fill is None:
            raise LevelExceeded(f"state {i} beyond explicit table of length {len(self.values_)}")
        return float(self.fill)

    def values(self, n):
        m = len(self.values_)
        if n <= m:
            return np.asarray(self.values_[:n], dtype=float)
        if self.fill is None:
            raise LevelExceeded(f"level {n} beyond explicit table of length {m}")
        return np.concatenate([np.asarray(self.values_, dtype=float), np.full(n - m, float(self.fill))])

    @property
    def defined_upto(self):
        return len(self.values_) if self.fill is None else None

    def sup(self):
        vals = list(self.values_) + ([] if self.fill is None else [self.fill])
        return float(max(vals)) if self.fill is not None else None

    def liminf(self):
        return None if self.fill is None else float(self.fill)

    def is_zero(self):
        return all(v == 0 for v in self.values_) and (self.fill in (None, 0))

    def to_config(self):
        out = {"rule": "list", "values": list(self.values_)}
        if self.fill is not None:
            out["fill"] = self.fill
        return out


@dataclass(frozen=True)
class Sites(RateRule):
    """Non-zero values at finitely many states, zero elsewhere."""

    sites: tuple  # ((state, value), ...)

    def __call__(self, i):
        for s, v in self.sites:
            if s == i:
                return float(v)
        return 0.0

    def values(self, n):
        out = np.zeros(n)
        for s, v in self.sites:
            if 1 <= s <= n:
                out[s - 1] = v
        return out

    def sup(self):
        return float(max([0.0] + [v for _, v in self.sites]))

    def liminf(self):
        return 0.0

    def is_zero(self):
        return all(v == 0 for _, v in self.sites)

    def to_config(self):
        return {"rule": "sites", "sites": {str(s): v for s, v in self.sites}}


@dataclass(frozen=True)
class Scaled(RateRule):
    base: RateRule
    factor: float

    def __call__(self, i):
        return self.factor * self.base(i)

    def values(self, n):
        return self.factor * self.base.values(n)

    def is_zero(self):
        return self.factor == 0 or self.base.is_zero()

    def to_config(self):
        return {"rule": "scaled", "base": self.base.to_config(), "factor": self.factor}


@dataclass(frozen=True)
class Sum(RateRule):
    terms: tuple

    def __call__(self, i):
        return float(sum(t(i) for t in self.terms))

    def values(self, n):
        out = np.zeros(n)
        for t in self.terms:
            out = out + t.values(n)
        return out

    def is_zero(self):
        return all(t.is_zero() for t in self.terms)

    def to_config(self):
        return {"rule": "sum", "terms": [t.to_config() for t in self.terms]}


@dataclass(frozen=True, eq=False)
class FromFunction(RateRule):
    """Wrap an arbitrary callable; not serializable, no analytic bounds."""

    fn: Callable[[int], float]

    def __call__(self, i):
        return float(self.fn(i))


ZERO = Constant(0.0)


def as_rule(x) -> RateRule:
    """Coerce None, a number, an array-like or a rule into a :class:`RateRule`."""
    if x is None:
        return ZERO
    if isinstance(x, RateRule):
        return x
    if isinstance(x, Real):
        return Constant(float(x))
    if callable(x):
        return FromFunction(x)
    arr = np.asarray(x, dtype=float).ravel()
    return Table(tuple(float(v) for v in arr))


def rule_from_config(obj) -> RateRule:
    if isinstance(obj, Real):
        return Constant(float(obj))
    if isinstance(obj, list):
        return Table(tuple(float(v) for v in obj))
    if not isinstance(obj, dict) or "rule" not in obj:
        raise ConfigError(f"cannot parse rate rule from {obj!r}")
    kind = obj["rule"]
    try:
        if kind == "constant":
            return Constant(float(obj["value"]))
        if kind == "power":
            return Power(float(obj.get("coef", 1.0)), float(obj["exponent"]))
        if kind == "geometric":
            return Geometric(float(obj.get("coef", 1.0)), float(obj["ratio"]))
        if kind == "list":
            fill = obj.get("fill")
            return Table(tuple(float(v) for v in obj["values"]), None if fill is None else float(fill))
        if kind == "sites":
            items = sorted((int(k), float(v)) for k, v in obj["sites"].items())
            return Sites(tuple(items))
        if kind == "scaled":
            return Scaled(rule_from_config(obj["base"]), float(obj["factor"]))
        if kind == "sum":
            return Sum(tuple(rule_from_config(t) for t in obj["terms"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameters for rule {kind!r}: {exc}") from exc
    raise ConfigError(f"unknown rate rule {kind!r}")


# ---------------------------------------------------------------------------
# upward jumps


class UpRates:
    """Upward transition rates ``q_ij`` for ``j > i``."""

    max_jump: int | None = None

    def tail(self, i: int, k: int) -> float:
        """``sum_{j >= k} q_ij`` for ``k > i``."""
        raise TailUnavailable(f"{type(self).__name__} has no tail accessor")

    def total(self, i: int) -> float:
        return self.tail(i, i + 1)

    def targets(self, i: int, n_max: int):
        """Targets ``j`` in ``i+1..n_max`` with positive rate, and the rates."""
        raise NotImplementedError

    def row(self, i: int, n_max: int) -> np.ndarray:
        """Dense rates to ``j = 0..n_max`` (zero for ``j <= i``)."""
        out = np.zeros(n_max + 1)
        js, rs = self.targets(i, n_max)
        out[js] = rs
        return out

    def tail_matrix(self, n: int) -> np.ndarray:
        """Array ``T`` of shape ``(n+1, n+1)`` with ``T[i, l] = tail(i, l)``
        for ``1 <= i < l <= n`` and zeros elsewhere.

        Tails are built as suffix sums of the in-window rates plus the exact
        beyond-window remainder, so only additions of non-negative terms occur.
        """
        T = np.zeros((n + 1, n + 1))
        for i in range(1, n):
            beyond = self.tail(i, n + 1)
            r = self.row(i, n)[i + 1:]
            T[i, i + 1:] = beyond + np.cumsum(r[::-1])[::-1]
        return T

    def sample(self, i: int, u: float) -> int:
        """Jump target from state ``i`` given a uniform ``u`` in ``[0, 1)``."""
        raise NotImplementedError

    def to_config(self):
        raise ConfigError(f"{type(self).__name__} cannot be serialized")


@dataclass(frozen=True)
class NoUp(UpRates):
    max_jump = 0

    def tail(self, i, k):
        return 0.0

    def targets(self, i, n_max):
        return np.zeros(0, dtype=int), np.zeros(0)

    def tail_matrix(self, n):
        return np.zeros((n + 1, n + 1))

    def sample(self, i, u):
        raise ValueError(f"state {i} has no upward jumps")

    def to_config(self):
        return {"rule": "none"}


@dataclass(frozen=True)
class Jumps(UpRates):
    """Jumps of fixed sizes: ``q_{i,i+k} = sizes[k](i)``."""

    sizes: tuple  # ((k, RateRule), ...) with k >= 1

    @property
    def max_jump(self):
        return max((k for k, _ in self.sizes), default=0)

    def _rates(self, i):
        return [(i + k, r(i)) for k, r in self.sizes]

    def tail(self, i, k):
        return float(math.fsum(r for j, r in self._rates(i) if j >= k))

    def targets(self, i, n_max):
        pairs = [(j, r) for j, r in self._rates(i) if j <= n_max and r != 0]
        return (np.array([j for j, _ in pairs], dtype=int), np.array([r for _, r in pairs], dtype=float))

    def tail_matrix(self, n):
        T = np.zeros((n + 1, n + 1))
        states = np.arange(1, n + 1)
        for k, rule in self.sizes:
            vals = rule.values(n)
            # each jump i -> i+k contributes to tails T[i, l] for i < l <= i+k
            for off in range(1, k + 1):
                idx = states[states + off <= n]
                T[idx, idx + off] += vals[idx - 1]
        return T

    def sample(self, i, u):
        rates = self._rates(i)
        total = math.fsum(r for _, r in rates)
        acc = 0.0
        for j, r in rates:
            acc += r
            if u * total < acc:
                return j
        return rates[-1][0]

    def to_config(self):
        return {"rule": "jumps", "sizes": {str(k): r.to_config() for k, r in self.sizes}}


@dataclass(frozen=True)
class ExplicitUp(UpRates):
    """Per-state finite support lists ``{i: [(j, q_ij), ...]}``.

    States absent from ``rows`` have no upward jumps.
    """

    rows: tuple  # ((i, ((j, rate), ...)), ...)

    def _row(self, i):
        for s, pairs in self.rows:
            if s == i:
                return pairs
        return ()

    @property
    def max_jump(self):
        return max((j - i for i, pairs in self.rows for j, _ in pairs), default=0)

    def tail(self, i, k):
        return float(math.fsum(r for j, r in self._row(i) if j >= k))

    def targets(self, i, n_max):
        pairs = [(j, r) for j, r in self._row(i) if i < j <= n_max and r != 0]
        return (np.array([j for j, _ in pairs], dtype=int), np.array([r for _, r in pairs], dtype=float))

    def sample(self, i, u):
        pairs = [(j, r) for j, r in self._row(i) if r > 0]
        total = math.fsum(r for _, r in pairs)
        acc = 0.0
        for j, r in pairs:
            acc += r
            if u * total < acc:
                return j
        return pairs[-1][0]

    def to_config(self):
        return {"rule": "list", "rows": {str(i): [[j, r] for j, r in pairs] for i, pairs in self.rows}}


@dataclass(frozen=True)
class GeometricUp(UpRates):
    """Total up rate ``total(i)`` split geometrically over jump sizes:
    ``q_{i,i+k} = total(i) (1 - ratio) ratio**(k-1)``, so
    ``tail(i, k) = total(i) ratio**(k-i-1)``.
    """

    total_rate: RateRule
    ratio: float

    def tail(self, i, k):
        if k <= i:
            raise ValueError("tail needs k > i")
        return float(self.total_rate(i) * self.ratio ** (k - i - 1))

    def targets(self, i, n_max):
        js = np.arange(i + 1, n_max + 1)
        rs = self.total_rate(i) * (1.0 - self.ratio) * self.ratio ** (js - i - 1.0)
        keep = rs != 0
        return js[keep], rs[keep]

    def tail_matrix(self, n):
        T = np.zeros((n + 1, n + 1))
        tot = self.total_rate.values(n)
        i = np.arange(1, n + 1)[:, None]
        l = np.arange(1, n + 1)[None, :]
        with np.errstate(over="ignore", invalid="ignore"):
            vals = tot[:, None] * self.ratio ** np.maximum(l - i - 1, 0)
        T[1:, 1:] = np.where(l > i, vals, 0.0)
        return T

    def sample(self, i, u):
        if self.ratio == 0:
            return i + 1
        return i + 1 + int(math.floor(math.log1p(-u) / math.log(self.ratio)))

    def to_config(self):
        return {"rule": "geometric", "total": self.total_rate.to_config(), "ratio": self.ratio}


@dataclass(frozen=True, eq=False)
class CallableUp(UpRates):
    """Arbitrary ``rate(i, j)``; tails only if ``tail_fn`` is supplied."""

    rate: Callable[[int, int], float]
    tail_fn: Callable[[int, int], float] | None = None

    def tail(self, i, k):
        if self.tail_fn is None:
            raise TailUnavailable("rule-based up rates without a tail accessor")
        return float(self.tail_fn(i, k))

    def targets(self, i, n_max):
        js = np.arange(i + 1, n_max + 1)
        rs = np.array([self.rate(i, int(j)) for j in js], dtype=float)
        keep = rs != 0
        return js[keep], rs[keep]

    def sample(self, i, u):
        target = u * self.total(i)
        acc, j = 0.0, i
        while True:
            j += 1
            acc += self.rate(i, j)
            if target < acc or self.tail(i, j + 1) <= 0:
                return j


def up_from_config(obj) -> UpRates:
    if obj is None:
        return NoUp()
    if not isinstance(obj, dict) or "rule" not in obj:
        raise ConfigError(f"cannot parse up_rates from {obj!r}")
    kind = obj["rule"]
    try:
        if kind == "none":
            return NoUp()
        if kind == "jumps":
            sizes = sorted((int(k), rule_from_config(v)) for k, v in obj["sizes"].items())
            if any(k < 1 for k, _ in sizes):
                raise ConfigError("jump sizes must be >= 1")
            return Jumps(tuple(sizes))
        if kind == "geometric":
            return GeometricUp(rule_from_config(obj["total"]), float(obj["ratio"]))
        if kind == "list":
            rows = []
            for i, pairs in sorted(obj["rows"].items(), key=lambda kv: int(kv[0])):
                rows.append((int(i), tuple((int(j), float(r)) for j, r in pairs)))
            return ExplicitUp(tuple(rows))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameters for up_rates {kind!r}: {exc}") from exc
    raise ConfigError(f"unknown up_rates rule {kind!r}")
