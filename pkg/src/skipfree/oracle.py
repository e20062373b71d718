"""Dense linear-algebra reference computations on a truncated chain.

Nothing here touches the triangular recursions: every quantity is obtained by
direct elimination, uniformization or inverse iteration on the explicit rate
matrix, so agreement with :mod:`skipfree.potential` and
:mod:`skipfree.exitlaws` is a genuine cross-check.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import IterationDivergence, SingularSystem
from .model import SingleDeathModel
from .rates import as_rule


@dataclass(frozen=True, eq=False)
class TruncatedGenerator:
    """Rates on the states ``0..N`` of the chain killed on leaving ``{0..N}``.

    ``Q[i, j]`` for ``i, j`` in ``0..N``; row 0 is zero (absorbing).  Mass
    sent above ``N`` (``overflow``) and killing are lost, so rows ``1..N`` sum
    to ``-(killing + overflow)``.
    """

    Q: np.ndarray
    level: int
    killing: np.ndarray
    overflow: np.ndarray

    @property
    def interior(self) -> np.ndarray:
        """The restriction to ``1..N`` (absorption at 0 becomes loss)."""
        return self.Q[1:, 1:]


def _up_rows(m: SingleDeathModel, N: int):
    """Dense up rates to ``0..N`` and the total up rate of each state."""
    U = np.zeros((N + 1, N + 1))
    total = np.zeros(N + 1)
    for i in range(1, N + 1):
        js, rs = m.up.targets(i, N)
        U[i, js] = rs
        total[i] = m.up.total(i)
    return U, total


def truncated_generator(m: SingleDeathModel, N: int, with_killing: bool = True) -> TruncatedGenerator:
    U, total = _up_rows(m, N)
    d = np.array([0.0] + [m.down(i) for i in range(1, N + 1)])
    c = np.array([0.0] + [m.killing(i) for i in range(1, N + 1)]) if with_killing else np.zeros(N + 1)
    Q = U.copy()
    for i in range(1, N + 1):
        Q[i, i - 1] = d[i]
        Q[i, i] = -(d[i] + total[i] + c[i])
    overflow = total - U.sum(axis=1)
    return TruncatedGenerator(Q, N, c, np.maximum(overflow, 0.0))


def _solve(A, b):
    try:
        lu = sla.lu_factor(A, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem(str(exc)) from exc
    if np.any(np.diag(lu[0]) == 0):
        raise SingularSystem("zero pivot in dense elimination")
    return sla.lu_solve(lu, b)


def poisson_solve(m: SingleDeathModel, omega, N: int) -> np.ndarray:
    """``F[i, j]`` solving ``(Q^Y - diag(omega)) F(., j) = delta_j`` on rows
    ``1..j`` with ``F(i, j) = 0`` for ``i >= j``; one dense solve per column."""
    if N < 1:
        raise ValueError("N must be >= 1")
    om = np.concatenate([[0.0], as_rule(omega).values(N)])
    gen = truncated_generator(m, N, with_killing=False)
    Q = gen.Q
    F = np.zeros((N + 1, N + 1))
    for j in range(1, N + 1):
        # unknowns g(0..j-1); equations rows 1..j
        A = Q[1: j + 1, 0:j].copy()
        for r in range(1, j):
            A[r - 1, r] -= om[r]
        b = np.zeros(j)
        b[-1] = 1.0
        F[:j, j] = _solve(A, b)
    return F


@dataclass(frozen=True, eq=False)
class ExitTable:
    """Exit functionals on the interior ``a+1..N-1`` (arrays indexed by state).

    ``down[i]``: ``E_i[exp(-int w); T_a first]``; ``up[i]``: the same weight
    on exiting above ``N-1`` or being killed first; ``occupation[i, j]``:
    discounted expected time at ``j`` before exit.
    """

    a: int
    N: int
    down: np.ndarray
    up: np.ndarray
    occupation: np.ndarray


def exit_oracle(m: SingleDeathModel, omega, a: int, N: int, with_killing: bool = True) -> ExitTable:
    if not 0 <= a < N - 1:
        raise ValueError(f"need 0 <= a < N-1, got a={a}, N={N}")
    om = np.concatenate([[0.0], as_rule(omega).values(N)])
    gen = truncated_generator(m, N, with_killing=with_killing)
    Q = gen.Q
    idx = np.arange(a + 1, N)
    M = -Q[np.ix_(idx, idx)] + np.diag(om[idx])
    # rate of leaving to {N, N+1, ...}: in-window targets >= N plus overflow
    up_exit = Q[idx, N] + gen.overflow[idx]
    rhs_down = np.zeros(idx.size)
    rhs_down[0] = Q[a + 1, a]
    rhs_up = up_exit + gen.killing[idx]
    sol = _solve(M, np.column_stack([rhs_down, rhs_up, np.eye(idx.size)]))
    down = np.zeros(N + 1)
    up = np.zeros(N + 1)
    occ = np.zeros((N + 1, N + 1))
    down[idx] = sol[:, 0]
    up[idx] = sol[:, 1]
    occ[np.ix_(idx, idx)] = sol[:, 2:]
    return ExitTable(a, N, down, up, occ)


def resolvent_oracle(m: SingleDeathModel, q: float, N: int) -> np.ndarray:
    """``R[i, j] = E_i int_0^{T_0 ^ T_kill ^ T_{N+}} e^{-qt} 1{X_t = j} dt`` on ``1..N``."""
    A = q * np.eye(N) - truncated_generator(m, N).interior
    R = np.zeros((N + 1, N + 1))
    R[1:, 1:] = _solve(A, np.eye(N))
    return R


def _poisson_weights(x: float, eps: float = 1e-13):
    w = [math.exp(-x)]
    acc = w[0]
    k = 0
    while 1.0 - acc > eps and k < 10_000:
        k += 1
        w.append(w[-1] * x / k)
        acc += w[-1]
    return np.array(w)


def transition_matrix(m: SingleDeathModel, N: int, t: float, with_killing: bool = True) -> np.ndarray:
    """``p_ij(t)`` on ``0..N`` by uniformization (scaling and squaring for large ``Lambda t``).

    Column 0 carries the absorbed-at-0 mass; row deficits are killing and
    overflow above ``N``.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    Q = truncated_generator(m, N, with_killing).Q
    n = Q.shape[0]
    if t == 0:
        return np.eye(n)
    lam = float(np.max(-np.diag(Q)))
    if lam == 0:
        return np.eye(n)
    squarings = max(0, math.ceil(math.log2(lam * t / 8.0))) if lam * t > 8.0 else 0
    tau = t / 2.0**squarings
    P = np.eye(n) + Q / lam
    weights = _poisson_weights(lam * tau)
    out = weights[0] * np.eye(n)
    term = np.eye(n)
    for wk in weights[1:]:
        term = term @ P
        out += wk * term
    for _ in range(squarings):
        out = out @ out
    return out


@dataclass(frozen=True, eq=False)
class Eigenpair:
    rate: float
    vector: np.ndarray  # left vector on states 1..N, sums to 1 (index i-1)
    residual: float
    degenerate: bool
    iterations: int


def principal_eigenpair(m: SingleDeathModel, N: int, with_killing: bool = True, tol: float = 1e-10,
                        max_iter: int = 100) -> Eigenpair:
    """Decay rate ``lam`` and left vector ``u >= 0`` with ``u Q_N = -lam u``.

    Dense eigenvalue routines are unreliable here: the truncated generators
    are far from normal and their computed spectra drift by orders of
    magnitude more than machine precision.  Instead ``lam`` is bracketed by
    the positivity test ``(-Q_N - r)^{-1} 1 > 0`` (true exactly for
    ``r < lam``), and the vector comes from shifted inverse iteration just
    below ``lam``, where the iteration matrix is entrywise non-negative.

    A cluster of eigenvalues at the top of the spectrum (for instance the
    single Jordan block of pure death) is reported as ``degenerate``; only the
    rate is meaningful then and the vector is the null vector of smallest
    singular value.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    A = truncated_generator(m, N, with_killing).interior
    scale = max(1.0, float(np.max(np.abs(A))))
    eye = np.eye(N)
    ones = np.ones(N)

    ev = sla.eigvals(A)
    top = ev[np.argmax(ev.real)]
    if int(np.count_nonzero(np.abs(ev - top) < 1e-6 * scale)) > 1:
        lam = -float(top.real)
        _, _, vh = sla.svd(A.T + lam * eye)
        x = np.abs(vh[-1])
        x = x / x.sum()
        res = float(np.max(np.abs(x @ A + lam * x)))
        return Eigenpair(lam, x, res, True, 0)

    def below(r):
        try:
            with np.errstate(all="ignore"), warnings.catch_warnings():
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                x = sla.lu_solve(sla.lu_factor(-A - r * eye, check_finite=False), ones)
        except (np.linalg.LinAlgError, ValueError):
            return False
        return bool(np.all(np.isfinite(x)) and np.all(x > 0))

    lo, hi = 0.0, float(np.min(-np.diag(A)))
    if below(hi):
        lo = hi
    for _ in range(200):
        if hi - lo <= 4e-16 * max(hi, 1e-300):
            break
        mid = 0.5 * (lo + hi)
        if below(mid):
            lo = mid
        else:
            hi = mid

    try:
        lu = sla.lu_factor(-A.T - lo * eye)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise IterationDivergence(str(exc)) from exc
    x = ones / N
    lam, res, it = lo, math.inf, 0
    for it in range(1, max_iter + 1):
        with np.errstate(all="ignore"):
            y = sla.lu_solve(lu, x)
        if not np.all(np.isfinite(y)) or y.sum() == 0:
            raise IterationDivergence("inverse iteration produced non-finite iterates")
        y = np.abs(y / y.sum())
        y = y / y.sum()
        done = np.max(np.abs(y - x)) <= 1e-15
        x = y
        if done and it >= 2:
            break
    r_vec = x @ A
    lam = -float(r_vec.sum() / x.sum())
    res = float(np.max(np.abs(r_vec + lam * x)))
    if not res <= tol * scale:
        raise IterationDivergence(f"inverse iteration stalled: residual {res:.3e} after {it} steps")
    return Eigenpair(lam, x, res, False, it)
