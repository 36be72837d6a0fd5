"""Dense two-phase tableau simplex with Bland's rule, compiled with numba.

Problems here are tiny (a handful of variables, tens of constraints), so a
dense tableau is both the simplest and the fastest option. All scratch state
is allocated per call.
"""

from __future__ import annotations

import numpy as np
from numba import njit

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
ITERATION_LIMIT = 3


@njit(cache=True)
def _pivot(T, basis, r, c):
    T[r, :] /= T[r, c]
    for i in range(T.shape[0]):
        if i != r:
            f = T[i, c]
            if f != 0.0:
                T[i, :] -= f * T[r, :]
    basis[r] = c


@njit(cache=True)
def _iterate(T, basis, m, obj, n_enter, tol, max_iter):
    # Bland: lowest-index improving column enters; ratio ties broken by the
    # lowest basic variable index.
    rhs = T.shape[1] - 1
    for _ in range(max_iter):
        enter = -1
        for j in range(n_enter):
            if T[obj, j] < -tol:
                enter = j
                break
        if enter < 0:
            return OPTIMAL
        leave = -1
        best = np.inf
        for i in range(m):
            a = T[i, enter]
            if a > tol:
                ratio = T[i, rhs] / a
                if leave < 0 or ratio < best - tol:
                    best = ratio
                    leave = i
                elif ratio <= best + tol and basis[i] < basis[leave]:
                    best = min(best, ratio)
                    leave = i
        if leave < 0:
            return UNBOUNDED
        _pivot(T, basis, leave, enter)
    return ITERATION_LIMIT


@njit(cache=True)
def simplex_max(c, A, b, tol):
    """Maximize ``c @ x`` subject to ``A @ x <= b`` and ``x >= 0``.

    Returns ``(status, value, x)``.
    """
    m, n = A.shape
    n_art = 0
    for i in range(m):
        if b[i] < 0.0:
            n_art += 1
    art0 = n + m
    ncol = n + m + n_art + 1
    rhs = ncol - 1
    T = np.zeros((m + 2, ncol))
    basis = np.empty(m, dtype=np.int64)
    k = 0
    for i in range(m):
        sgn = 1.0
        if b[i] < 0.0:
            sgn = -1.0
        for j in range(n):
            T[i, j] = sgn * A[i, j]
        T[i, n + i] = sgn
        T[i, rhs] = sgn * b[i]
        if sgn < 0.0:
            T[i, art0 + k] = 1.0
            basis[i] = art0 + k
            k += 1
        else:
            basis[i] = n + i
    obj2 = m
    obj1 = m + 1
    for j in range(n):
        T[obj2, j] = -c[j]
    max_iter = 50 * (m + n + n_art) + 100
    x = np.zeros(n)
    if n_art > 0:
        for j in range(n_art):
            T[obj1, art0 + j] = 1.0
        for i in range(m):
            if basis[i] >= art0:
                T[obj1, :] -= T[i, :]
        status = _iterate(T, basis, m, obj1, art0, tol, max_iter)
        if status == ITERATION_LIMIT:
            return ITERATION_LIMIT, np.nan, x
        scale = 1.0
        for i in range(m):
            scale = max(scale, abs(b[i]))
        if T[obj1, rhs] < -tol * scale:
            return INFEASIBLE, np.nan, x
        # drive remaining artificials out of the basis
        for i in range(m):
            if basis[i] >= art0:
                for j in range(art0):
                    if abs(T[i, j]) > tol:
                        _pivot(T, basis, i, j)
                        break
    status = _iterate(T, basis, m, obj2, art0, tol, max_iter)
    if status != OPTIMAL:
        return status, np.nan, x
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T[i, rhs]
    value = 0.0
    for j in range(n):
        value += c[j] * x[j]
    return OPTIMAL, value, x


@njit(cache=True)
def lp_free(c, A, b, tol):
    """Maximize ``c @ x`` over ``A @ x <= b`` with ``x`` free."""
    m, d = A.shape
    A2 = np.empty((m, 2 * d))
    c2 = np.empty(2 * d)
    for j in range(d):
        c2[j] = c[j]
        c2[d + j] = -c[j]
        for i in range(m):
            A2[i, j] = A[i, j]
            A2[i, d + j] = -A[i, j]
    status, _, z = simplex_max(c2, A2, b, tol)
    x = z[:d] - z[d:]
    value = 0.0
    for j in range(d):
        value += c[j] * x[j]
    return status, value, x


@njit(cache=True)
def chebyshev(A, b, tol):
    """Largest inscribed ball of ``{x : A x <= b}``.

    Returns ``(status, radius, center)``; status is INFEASIBLE when no point
    satisfies the constraints with non-negative slack.
    """
    m, d = A.shape
    A2 = np.empty((m, 2 * d + 1))
    c2 = np.zeros(2 * d + 1)
    c2[2 * d] = 1.0
    for i in range(m):
        nrm = 0.0
        for j in range(d):
            A2[i, j] = A[i, j]
            A2[i, d + j] = -A[i, j]
            nrm += A[i, j] * A[i, j]
        A2[i, 2 * d] = np.sqrt(nrm)
    status, r, z = simplex_max(c2, A2, b, tol)
    center = z[:d] - z[d:2 * d]
    return status, r, center


@njit(cache=True)
def supports(A, b, dirs, tol):
    """Support values ``h(K, u)`` and ``h(K, -u)`` for each row ``u`` of dirs.

    Returns ``(status, hp, hm)``; status is the first non-optimal status met.
    """
    k = dirs.shape[0]
    hp = np.empty(k)
    hm = np.empty(k)
    for i in range(k):
        s1, v1, _ = lp_free(dirs[i], A, b, tol)
        if s1 != OPTIMAL:
            return s1, hp, hm
        s2, v2, _ = lp_free(-dirs[i], A, b, tol)
        if s2 != OPTIMAL:
            return s2, hp, hm
        hp[i] = v1
        hm[i] = v2
    return OPTIMAL, hp, hm
