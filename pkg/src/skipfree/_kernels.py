"""Compiled inner loops for the triangular G/W/Z tables.

Inner products use error-free transformations (Dekker product + Knuth sum,
i.e. the Dot2 scheme) so the result is as accurate as if computed in twice
the working precision and then rounded.
"""

import numpy as np
from numba import njit

_SPLIT = 134217729.0  # 2**27 + 1


@njit(cache=True, inline="always")
def _two_sum(a, b):
    s = a + b
    z = s - a
    return s, (a - (s - z)) + (b - z)


@njit(cache=True, inline="always")
def _two_prod(a, b):
    p = a * b
    t = _SPLIT * a
    ah = t - (t - a)
    al = a - ah
    t = _SPLIT * b
    bh = t - (t - b)
    bl = b - bh
    return p, al * bl - (((p - ah * bh) - al * bh) - ah * bl)


@njit(cache=True)
def g_table(tails, omega, down, N):
    """``G[n, k]`` for ``1 <= n <= k <= N``; zeros elsewhere.

    ``tails[n, l]`` is the up-rate tail ``sum_{j >= l} q_nj`` and the
    coefficient of ``G[l, k]`` in row ``n`` is ``tails[n, l] + omega[n]``.
    """
    G = np.zeros((N + 1, N + 1))
    for k in range(1, N + 1):
        G[k, k] = 1.0
        for n in range(k - 1, 0, -1):
            p = 0.0
            s = 0.0
            on = omega[n]
            for l in range(n + 1, k + 1):
                h, r = _two_prod(tails[n, l] + on, G[l, k])
                p, q = _two_sum(p, h)
                s += q + r
            G[n, k] = (p + s) / down[n]
    return G


@njit(cache=True)
def w_table(G, down, N):
    """``W[i, j] = sum_{k=i+1}^{j} G[k, j] / down[j]`` for ``i < j``."""
    W = np.zeros((N + 1, N + 1))
    for j in range(1, N + 1):
        p = 0.0
        s = 0.0
        for i in range(j - 1, -1, -1):
            p, q = _two_sum(p, G[i + 1, j])
            s += q
            W[i, j] = (p + s) / down[j]
    return W


@njit(cache=True)
def z_table(W, omega, N):
    """``Z[i, j] = 1 + sum_{i<u<j} omega[u] W[i, u]`` for ``i < j``."""
    Z = np.zeros((N + 1, N + 1))
    for i in range(0, N):
        p = 1.0
        s = 0.0
        Z[i, i + 1] = 1.0
        for j in range(i + 2, N + 1):
            u = j - 1
            h, r = _two_prod(omega[u], W[i, u])
            p, q = _two_sum(p, h)
            s += q + r
            Z[i, j] = p + s
    return Z


@njit(cache=True)
def hessenberg_lu(B):
    """In-place LU without pivoting of an upper-Hessenberg matrix.

    Returns ``(U, mult, ok)``: ``U`` upper triangular, ``mult[k]`` the
    multiplier that eliminated ``B[k+1, k]``, and whether every pivot was
    strictly positive (for a Z-matrix: a nonsingular M-matrix).
    """
    n = B.shape[0]
    U = B.copy()
    mult = np.zeros(n)
    ok = True
    for k in range(n - 1):
        p = U[k, k]
        if not p > 0.0:
            ok = False
            return U, mult, ok
        l = U[k + 1, k] / p
        mult[k] = l
        U[k + 1, k] = 0.0
        for j in range(k + 1, n):
            U[k + 1, j] -= l * U[k, j]
    if not U[n - 1, n - 1] > 0.0:
        ok = False
    return U, mult, ok


@njit(cache=True)
def m_matrix_test(B, r):
    """Whether ``B - r I`` (upper Hessenberg Z-matrix) has all pivots > 0."""
    n = B.shape[0]
    A = B.copy()
    for k in range(n):
        A[k, k] -= r
    return hessenberg_lu(A)[2]


@njit(cache=True)
def solve_transposed(U, mult, x):
    """Solve ``(L U)^T y = x`` with ``L`` unit lower bidiagonal (multipliers)."""
    n = U.shape[0]
    z = np.zeros(n)
    for k in range(n):
        s = x[k]
        for i in range(k):
            s -= U[i, k] * z[i]
        z[k] = s / U[k, k]
    y = np.zeros(n)
    y[n - 1] = z[n - 1]
    for k in range(n - 2, -1, -1):
        y[k] = z[k] - mult[k] * y[k + 1]
    return y
