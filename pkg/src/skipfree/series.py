"""Partial sums of infinite series along a truncation schedule, with verdicts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CONVERGED = "Converged"
DIVERGING = "Diverging"
UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class SeriesDiagnostic:
    name: str
    levels: tuple
    partial_sums: tuple
    verdict: str
    tol: float
    tail_estimate: float | None = None
    extras: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def value(self) -> float:
        return self.partial_sums[-1]

    @property
    def converged(self) -> bool:
        return self.verdict == CONVERGED

    def to_dict(self):
        return {
            "name": self.name,
            "levels": list(self.levels),
            "partial_sums": list(self.partial_sums),
            "verdict": self.verdict,
            "tol": self.tol,
            "tail_estimate": self.tail_estimate,
            **({"extras": self.extras} if self.extras else {}),
        }


def series_verdict(partial_sums, tol: float) -> str:
    """Operational convergence test on partial sums taken at increasing levels.

    Converged: the last extension moved the sum by less than ``tol * (1 + |s|)``.
    Diverging: ``|s| > 1/tol``, or the increments never shrink over the last
    half of the schedule (at least two increments are needed).
    """
    s = np.asarray(partial_sums, dtype=float)
    if not np.all(np.isfinite(s)):
        return DIVERGING
    if abs(s[-1]) > 1.0 / tol:
        return DIVERGING
    if s.size < 2:
        return UNDETERMINED
    inc = np.abs(np.diff(s))
    if inc[-1] < tol * (1.0 + abs(s[-1])):
        return CONVERGED
    half = inc[len(inc) // 2:]
    if half.size >= 2 and np.all(half[1:] >= half[:-1] * (1.0 - tol)):
        return DIVERGING
    return UNDETERMINED


def tail_extrapolation(partial_sums) -> float | None:
    """Rough size of the remaining tail from the last two increments."""
    s = np.asarray(partial_sums, dtype=float)
    if s.size < 3:
        return None
    a, b = abs(s[-2] - s[-3]), abs(s[-1] - s[-2])
    if b == 0:
        return 0.0
    r = b / a if a > 0 else 1.0
    return b * r / (1.0 - r) if r < 1 else b


def diagnose(name, terms, levels, tol, extras=None) -> SeriesDiagnostic:
    """Summarize ``sum(terms)`` where ``terms[u-1]`` is the term of index ``u``.

    Partial sums are taken over indices ``1..L`` for each ``L`` in ``levels``.
    """
    terms = np.asarray(terms, dtype=float)
    levels = tuple(int(L) for L in levels if L <= terms.size)
    partial = tuple(math.fsum(terms[:L]) for L in levels)
    verdict = series_verdict(partial, tol)
    tail = tail_extrapolation(partial) if verdict == CONVERGED else None
    return SeriesDiagnostic(name, levels, partial, verdict, tol, tail, dict(extras or {}))
