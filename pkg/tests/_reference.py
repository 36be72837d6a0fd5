"""Plain-Python reference samplers used as oracles by the tests."""

import math

import numpy as np


def mondrian_reference(low, high, weights, lifetime, g):
    """Straight-line weighted Mondrian with the library's draw order.

    Returns preorder lists (axis, offset, birth, left, right); axis -1 marks a leaf.
    """
    d = len(low)
    out = {"axis": [], "offset": [], "birth": [], "left": [], "right": []}
    stack = [(list(low), list(high), 0.0, -1, False)]
    while stack:
        lo, hi, t, parent, upper = stack.pop()
        k = len(out["axis"])
        for key, v in (("axis", -1), ("offset", np.nan), ("birth", np.nan), ("left", -1), ("right", -1)):
            out[key].append(v)
        if parent >= 0:
            out["right" if upper else "left"][parent] = k
        rates = [weights[i] * (hi[i] - lo[i]) for i in range(d)]
        R = 0.0
        for r in rates:
            R += r
        t = t - math.log1p(-g.random()) / R
        if t >= lifetime:
            continue
        target = g.random() * R
        i, acc = 0, rates[0]
        while acc <= target and i < d - 1:
            i += 1
            acc += rates[i]
        cut = lo[i] + g.random() * (hi[i] - lo[i])
        out["axis"][k], out["offset"][k], out["birth"][k] = i, cut, t
        up_lo, lo_hi = list(lo), list(hi)
        up_lo[i] = cut
        lo_hi[i] = cut
        stack.append((up_lo, hi, t, k, True))
        stack.append((lo, lo_hi, t, k, False))
    return {k: np.array(v) for k, v in out.items()}


# -- bound oracles, evaluated in mpmath from the written formulas -------------------------

def _mp_matrix(M):
    import mpmath

    M = np.asarray(M, dtype=float)
    return mpmath.matrix([[mpmath.mpf(float(x)) for x in row] for row in M])


def c1_oracle(L, beta, sigma2, f_inf, n, lam, A, basis):
    """Risk bound for the oblique forest: bias term plus variance term, at 50 digits."""
    import mpmath

    mpmath.mp.dps = 50
    A_mp, B_mp = _mp_matrix(A), _mp_matrix(basis)
    d, m, s = A_mp.rows, A_mp.cols, B_mp.rows
    PA = B_mp * A_mp  # s x m
    sv = sorted(mpmath.svd_r(PA, compute_uv=False), reverse=True)
    sig = sv[s - 1]
    # columns of (I - B^T B) A
    resid = A_mp - B_mp.T * (B_mp * A_mp)
    perp = mpmath.fsum(mpmath.sqrt(mpmath.fsum(resid[i, j] ** 2 for i in range(d))) for j in range(m))
    L, beta, lam = mpmath.mpf(L), mpmath.mpf(beta), mpmath.mpf(lam)

    def c(k):
        kappa = mpmath.pi ** (mpmath.mpf(k) / 2) / mpmath.gamma(mpmath.mpf(k) / 2 + 1)
        return kappa * mpmath.pi ** (mpmath.mpf(k) / 2) * mpmath.mpf(d) ** (mpmath.mpf(k) / 2) / mpmath.factorial(k)

    bias = 9 * L ** 2 * mpmath.mpf(m) ** (4 * beta) / (mpmath.mpf(d) ** (2 * beta) * lam ** (2 * beta) * sig ** (2 * beta))
    cells = mpmath.fsum(c(k) * lam ** k * perp ** (k - s) for k in range(s + 1, d + 1))
    cells += mpmath.fsum(c(k) * lam ** k for k in range(0, s + 1))
    var = (5 * mpmath.mpf(f_inf) ** 2 + 2 * mpmath.mpf(sigma2)) / n * cells
    return float(bias + var)


def subopt_oracle(a, lam, w, sigma, n, clamp=False):
    """Single-tree lower bound for linear targets, at 50 digits."""
    import mpmath

    mpmath.mp.dps = 50
    lam = mpmath.mpf(lam)
    total = mpmath.mpf(0)
    for ai, wi in zip(a, w):
        lw = lam * mpmath.mpf(wi)
        term = mpmath.mpf(ai) ** 2 / (2 * lw ** 2) * (1 - 2 / lw - 1 / lw ** 2)
        total += max(term, 0) if clamp else term
    d = len(a)
    prod = mpmath.fprod(mpmath.mpf(x) for x in w)
    var = mpmath.mpf(sigma) ** 2 / (mpmath.mpf(n) / (2 ** d * lam ** d * prod) + 1)
    return float(total), float(var)
