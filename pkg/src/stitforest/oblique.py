"""Oblique Mondrian processes built from a feature matrix.

For ``A`` in R^{d x m} with columns a_i, the directional distribution puts
mass ``|a_i| / sum_j |a_j|`` on the pair ``+-a_i/|a_i|``. Its tessellation is
the pullback under ``x -> A^T x`` of a standard Mondrian in R^m with lifetime
``m * lifetime / |A|_{2,1}``, which is how the data partition is computed.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial, gamma, pi
from typing import NamedTuple

import numpy as np
from scipy import special

from .errors import DimensionMismatch, NotNormalized, RankDeficient
from .geomcore import HPolytope
from .mondrian import AxisBox, WeightedMondrianSpec, mondrian_sample
from .rng import as_generator
from .tessellate import DiscreteDirectionalDistribution, TessellationTree, restrict

RANK_TOL = 1e-9


class FeatureMatrix:
    """Split-feature matrix with columns a_i (shape d x m, rank d)."""

    def __init__(self, entries, *, require_full_rank: bool = True):
        A = np.array(entries, dtype=float, ndmin=2)
        norms = np.linalg.norm(A, axis=0)
        if np.any(norms == 0):
            raise ValueError("feature matrix has a zero column")
        if require_full_rank:
            sv = np.linalg.svd(A, compute_uv=False)
            if A.shape[0] > A.shape[1] or sv[-1] <= RANK_TOL * max(1.0, sv[0]):
                raise RankDeficient(f"rank of A is below d={A.shape[0]}")
        A.setflags(write=False)
        self.entries = A
        self.column_norms = norms
        self.norm21 = float(norms.sum())

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    @property
    def m(self) -> int:
        return self.entries.shape[1]

    def normalized(self) -> FeatureMatrix:
        return FeatureMatrix(self.entries / self.norm21)

    @classmethod
    def from_csv(cls, path) -> FeatureMatrix:
        """Rows are coordinates, columns are features; no header."""
        return cls(np.loadtxt(path, delimiter=",", ndmin=2))

    def __repr__(self):
        return f"FeatureMatrix(d={self.d}, m={self.m}, norm21={self.norm21:.6g})"


class SubspaceSpec:
    """Relevant feature subspace S given by an orthonormal s x d basis."""

    def __init__(self, basis):
        B = np.array(basis, dtype=float, ndmin=2)
        if not np.allclose(B @ B.T, np.eye(B.shape[0]), atol=1e-9):
            raise ValueError("basis rows must be orthonormal")
        B.setflags(write=False)
        self.basis = B

    @classmethod
    def span(cls, vectors) -> SubspaceSpec:
        """Orthonormalize the rows of ``vectors``."""
        V = np.array(vectors, dtype=float, ndmin=2)
        q, r = np.linalg.qr(V.T)
        if np.any(np.abs(np.diag(r)) <= RANK_TOL):
            raise RankDeficient("spanning vectors are linearly dependent")
        return cls(q.T)

    @classmethod
    def coordinates(cls, d: int, coords) -> SubspaceSpec:
        return cls(np.eye(d)[list(coords)])

    @property
    def s(self) -> int:
        return self.basis.shape[0]

    @property
    def d(self) -> int:
        return self.basis.shape[1]

    def project(self, x) -> np.ndarray:
        """Orthogonal projection P_S in ambient coordinates."""
        return np.asarray(x, dtype=float) @ self.basis.T @ self.basis


@dataclass(frozen=True)
class BoundInputs:
    L: float
    beta: float
    sigma2: float
    f_inf: float
    n: int
    lifetime: float
    M: int = 1

    def __post_init__(self):
        if not (self.L > 0 and 0 < self.beta <= 1 and self.sigma2 >= 0 and self.n >= 1
                and self.lifetime > 0 and self.M >= 1):
            raise ValueError("invalid bound inputs")


def _as_matrix(A) -> FeatureMatrix:
    return A if isinstance(A, FeatureMatrix) else FeatureMatrix(A)


def dirdist_from_matrix(A) -> DiscreteDirectionalDistribution:
    """Directions ``a_i/|a_i|`` with weights ``|a_i| / |A|_{2,1}``.

    Parallel or antiparallel columns are merged into one representative.
    """
    A = _as_matrix(A)
    U = (A.entries / A.column_norms).T
    w = A.column_norms / A.norm21
    reps: list[np.ndarray] = []
    weights: list[float] = []
    for u, wi in zip(U, w):
        for j, v in enumerate(reps):
            if abs(float(u @ v)) >= 1.0 - 1e-12:
                weights[j] += wi
                break
        else:
            reps.append(u)
            weights.append(float(wi))
    weights_arr = np.asarray(weights)
    weights_arr /= weights_arr.sum()
    return DiscreteDirectionalDistribution(np.array(reps), weights_arr)


def lifted_lifetime(A, lifetime: float) -> float:
    A = _as_matrix(A)
    return A.m * lifetime / A.norm21


def lifted_spec(A, lifetime: float) -> WeightedMondrianSpec:
    """Standard (uniform-weight) Mondrian in R^m used by the lifted route."""
    A = _as_matrix(A)
    return WeightedMondrianSpec.uniform(A.m, lifted_lifetime(A, lifetime))


def lifted_partition(points, A, lifetime: float, rng=None, *, padding: float = 3.0):
    """Partition points by a standard Mondrian run on ``y = A^T x``.

    The Mondrian window is the bounding box of the lifted points, padded on
    each side by ``padding`` times the expected zero-cell side
    ``2 |A|_{2,1} / lifetime``. Returns ``(labels, lifted_tree)``.
    """
    A = _as_matrix(A)
    X = np.array(points, dtype=float, ndmin=2)
    if X.shape[1] != A.d:
        raise DimensionMismatch("points and feature matrix dimensions differ")
    Y = X @ A.entries
    pad = padding * 2.0 * A.norm21 / lifetime
    box = AxisBox(Y.min(axis=0) - pad, Y.max(axis=0) + pad)
    tree = mondrian_sample(box, lifted_spec(A, lifetime), rng)
    return tree.locate_many(Y), tree


def lifted_box(window: HPolytope, A) -> AxisBox:
    """Bounding box of ``A^T W``: coordinate i spans ``[-h(W,-a_i), h(W,a_i)]``."""
    from .geomcore import supports

    A = _as_matrix(A)
    hp, hm = supports(window, A.entries.T)
    return AxisBox(-hm, hp)


def pullback(lifted: TessellationTree, A, window: HPolytope) -> TessellationTree:
    """Map a lifted axis-aligned tree back to R^d and restrict it to ``window``.

    A lifted cut ``y_i = t`` is the plane ``<a_i/|a_i|, x> = t/|a_i|``.
    """
    A = _as_matrix(A)
    internal = lifted.left >= 0
    axis = np.argmax(np.abs(lifted.normals), axis=1)
    normals = np.zeros((lifted.n_nodes, A.d))
    offsets = np.full(lifted.n_nodes, np.nan)
    cols = axis[internal]
    normals[internal] = (A.entries[:, cols] / A.column_norms[cols]).T
    offsets[internal] = lifted.offsets[internal] / A.column_norms[cols]
    raw = TessellationTree(window, lifted.lifetime, normals, offsets, lifted.births, lifted.left, lifted.right)
    return restrict(raw, window)


def oblique_sample(window: HPolytope, A, lifetime: float, rng=None) -> TessellationTree:
    """STIT tessellation of ``window`` with directions from A, via the lifted route.

    The lifted Mondrian runs on the bounding box of ``A^T W``; by spatial
    consistency its restriction to the preimage of ``W`` has the STIT law.
    """
    A = _as_matrix(A)
    lifted = mondrian_sample(lifted_box(window, A), lifted_spec(A, lifetime), rng)
    tree = pullback(lifted, A, window)
    # births are reported in the oblique process's own lifetime units
    return TessellationTree(window, float(lifetime), tree.normals, tree.offsets,
                            tree.births * lifetime / lifted.lifetime, tree.left, tree.right)


def oblique_zero_cell(A, lifetime: float, rng=None) -> HPolytope:
    """Zero cell ``{y : -T_i1 <= <a_i, y> <= T_i2}`` with ``T ~ Exp(lifetime / |A|_{2,1})``."""
    A = _as_matrix(A)
    T1, T2 = oblique_zero_cell_times(A, lifetime, 1, rng)
    return zero_cell_polytope(A, T1[0], T2[0])


def oblique_zero_cell_times(A, lifetime: float, reps: int, rng=None):
    A = _as_matrix(A)
    g = as_generator(rng)
    rate = lifetime / A.norm21
    u = g.random((reps, 2, A.m))
    T = -np.log1p(-u) / rate
    return T[:, 0], T[:, 1]


def zero_cell_polytope(A, t1, t2) -> HPolytope:
    A = _as_matrix(A)
    normals = np.vstack([A.entries.T, -A.entries.T])
    offsets = np.concatenate([t2, t1])
    return HPolytope(normals, offsets, check_bounded=False)


# -- linear algebra ---------------------------------------------------------------


def jacobi_singular_values(M, tol: float = 1e-15, max_sweeps: int = 60) -> np.ndarray:
    """Singular values by one-sided (Hestenes) Jacobi, largest first."""
    G = np.array(M, dtype=float, ndmin=2).T.copy()  # columns are rotated
    n = G.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = G[:, p] @ G[:, p]
                beta = G[:, q] @ G[:, q]
                gamma_ = G[:, p] @ G[:, q]
                if abs(gamma_) <= tol * np.sqrt(alpha * beta) or gamma_ == 0.0:
                    continue
                # rotation angle below 1e-150 is the identity in floating point
                if abs(beta - alpha) > 1e150 * abs(gamma_):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma_)
                t = np.sign(zeta) / (abs(zeta) + np.hypot(1.0, zeta)) if zeta != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                gp = G[:, p].copy()
                G[:, p] = c * gp - s * G[:, q]
                G[:, q] = s * gp + c * G[:, q]
        if not rotated:
            break
    return np.sort(np.linalg.norm(G, axis=0))[::-1]


def sigma_s(A, S: SubspaceSpec) -> float:
    """s-th largest singular value of ``P_S A`` (computed on ``basis @ A``)."""
    A = _as_matrix(A)
    if S.d != A.d:
        raise DimensionMismatch("subspace and feature matrix dimensions differ")
    if S.s > A.d:
        raise DimensionMismatch("subspace dimension exceeds d")
    return float(jacobi_singular_values(S.basis @ A.entries)[S.s - 1])


def perp_norm21(A, S: SubspaceSpec) -> float:
    """``sum_i |(I - P_S) a_i|``."""
    A = _as_matrix(A)
    resid = A.entries - S.basis.T @ (S.basis @ A.entries)
    return float(np.linalg.norm(resid, axis=0).sum())


# -- bound evaluators -------------------------------------------------------------


def unit_ball_volume(k: int) -> float:
    return pi ** (k / 2) / gamma(k / 2 + 1)


def c_dk(d: int, k: int) -> float:
    """``kappa_k pi^{k/2} d^{k/2} / k!``."""
    return unit_ball_volume(k) * pi ** (k / 2) * d ** (k / 2) / factorial(k)


def variance_factor(d: int, s: int, lifetime: float, perp: float) -> float:
    """Cell-count bound ``sum_{k>s} c_{d,k} lam^k perp^{k-s} + sum_{k<=s} c_{d,k} lam^k``."""
    hi = sum(c_dk(d, k) * lifetime ** k * perp ** (k - s) for k in range(s + 1, d + 1))
    lo = sum(c_dk(d, k) * lifetime ** k for k in range(0, s + 1))
    return hi + lo


def c1_bound(inputs: BoundInputs, A, S: SubspaceSpec) -> float:
    """Risk bound for an oblique Mondrian forest of a Hoelder ridge function.

    Requires ``|A|_{2,1} = 1``. Returned as computed, never clamped.
    """
    A = _as_matrix(A)
    if abs(A.norm21 - 1.0) > 1e-9:
        raise NotNormalized(f"|A|_21 = {A.norm21!r}, expected 1")
    d, m, s = A.d, A.m, S.s
    b, lam = inputs.beta, inputs.lifetime
    sig = sigma_s(A, S)
    bias = 9.0 * inputs.L ** 2 * m ** (4 * b) / (d ** (2 * b) * lam ** (2 * b) * sig ** (2 * b))
    var = (5.0 * inputs.f_inf ** 2 + 2.0 * inputs.sigma2) / inputs.n * variance_factor(d, s, lam, perp_norm21(A, S))
    return bias + var


class DeterBound(NamedTuple):
    proof: float
    statement: float
    corrected: float


def deter_bound(A, S: SubspaceSpec, k: float, threshold: float = 0.0) -> DeterBound:
    """Erlang bounds on ``E[D(P_S Z_0)^k 1{D >= r}]`` for the unit-lifetime oblique zero cell.

    ``proof`` is ``m^k Gamma(2m+k) / (d^k sigma_s^k Gamma(2m))`` times the
    Erlang tail factor; ``statement`` carries an extra ``2^{-k}``. Both rest
    on ``|P_S (A^+)^T e_i| <= 1/sigma_s(P_S A)``, which fails when S is not
    spanned by eigenvectors of ``A A^T``, so neither is a valid bound in
    general. ``corrected`` uses ``c = max_i |P_S (A^+)^T e_i|`` and the exact
    zero-cell law: ``D <= c * Erlang(2m, 1)``.
    """
    A = _as_matrix(A)
    if abs(A.norm21 - 1.0) > 1e-9:
        raise NotNormalized(f"|A|_21 = {A.norm21!r}, expected 1")
    d, m = A.d, A.m
    sig = sigma_s(A, S)
    x = threshold * d * sig / m
    proof = (m / (d * sig)) ** k * _erlang_moment(2 * m, k, x)
    c = float(np.linalg.norm(S.basis @ np.linalg.pinv(A.entries).T, axis=0).max())
    corrected = c ** k * _erlang_moment(2 * m, k, threshold / c)
    return DeterBound(proof, proof / 2 ** k, corrected)


def _erlang_moment(shape: int, k: float, x: float) -> float:
    return float(np.exp(special.gammaln(shape + k) - special.gammaln(shape)) * special.gammaincc(shape + k, x))


class Schedule(NamedTuple):
    lifetime: float
    trees: int


def lifetime_schedule(rule: str, n: int, s: int, d: int, beta: float = 1.0, L: float = 1.0,
                      eps_n: float = 0.0, multiplier: float = 1.0) -> Schedule:
    """Lifetime and minimum tree count for sample size n.

    ``c1`` uses exponent ``1/(s + 2 beta)`` when ``eps_n`` is below the
    threshold ``L^{-2/(s+2b)} n^{-1/(s+2b)}`` and the eps-dependent
    ``d``-exponent schedule otherwise. ``c2`` adds 2 to both denominators and
    requires ``M >= lifetime^{2 beta}`` trees.
    """
    if rule not in ("c1", "c2"):
        raise ValueError(f"unknown schedule rule {rule!r}")
    extra = 2.0 if rule == "c2" else 0.0
    ds = s + extra + 2 * beta
    dd = d + extra + 2 * beta
    if eps_n <= L ** (-2 / ds) * n ** (-1 / ds):
        lam = L ** (2 / ds) * n ** (1 / ds)
    else:
        lam = L ** (2 / dd) * n ** (1 / dd) * eps_n ** (-(d - s) / dd)
    lam *= multiplier
    trees = int(np.ceil(lam ** (2 * beta))) if rule == "c2" else 1
    return Schedule(float(lam), trees)
