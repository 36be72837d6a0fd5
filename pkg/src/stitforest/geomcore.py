"""Convex-geometry kernel.

Bounded polytopes are stored in halfspace form ``A x <= b`` with unit-norm
rows. Support functions are linear programs solved by the dense simplex in
:mod:`stitforest._simplex`; every polytope carries a Chebyshev-center witness
that certifies a nonempty interior.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from . import _simplex
from .errors import (
    DegenerateZonotope,
    DimensionMismatch,
    IndexOutOfRange,
    InfeasiblePolytope,
    Unbounded,
)

LP_TOL = 1e-9
# Split sides whose inscribed ball is thinner than this are dropped.
EMPTY_TOL = 1e-9
CONTAINS_TOL = 1e-9
UNIT_TOL = 1e-12


def _raise_for(status: int) -> None:
    if status == _simplex.INFEASIBLE:
        raise InfeasiblePolytope("no feasible point")
    if status == _simplex.UNBOUNDED:
        raise Unbounded("objective unbounded over the polytope")
    if status != _simplex.OPTIMAL:
        raise RuntimeError(f"simplex failed with status {status}")


@dataclass(frozen=True)
class Hyperplane:
    """The set ``{x : <normal, x> = offset}`` with a unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        u = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(u) - 1.0) > UNIT_TOL:
            raise ValueError("hyperplane normal must be a unit vector")
        object.__setattr__(self, "normal", u)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_vector(cls, v, offset: float) -> Hyperplane:
        """Plane ``<v, x> = offset`` rescaled to a unit normal."""
        v = np.asarray(v, dtype=float)
        nrm = np.linalg.norm(v)
        return cls(v / nrm, offset / nrm)

    def side(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.normal - self.offset


class HPolytope:
    """Bounded convex polytope ``{x : A x <= b}``.

    Construction solves a Chebyshev-center LP; an empty (or lower-dimensional)
    region raises :class:`InfeasiblePolytope`. ``check_bounded`` additionally
    verifies finite support in every coordinate direction.
    """

    __slots__ = ("A", "b", "witness", "radius")

    def __init__(self, A, b, *, check_bounded: bool = True, _witness=None, _radius=None):
        A = np.array(A, dtype=float, ndmin=2)
        b = np.array(b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise DimensionMismatch("A and b have different row counts")
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms == 0):
            raise ValueError("zero halfspace normal")
        A = A / norms[:, None]
        b = b / norms
        if _witness is None:
            status, r, center = _simplex.chebyshev(A, b, LP_TOL)
            if status == _simplex.INFEASIBLE or (status == _simplex.OPTIMAL and r <= EMPTY_TOL):
                raise InfeasiblePolytope("polytope has empty interior")
            if status == _simplex.UNBOUNDED:
                raise Unbounded("polytope is unbounded")
            _raise_for(status)
            _witness, _radius = center, r
        A.setflags(write=False)
        b.setflags(write=False)
        self.A = A
        self.b = b
        self.witness = np.asarray(_witness, dtype=float)
        self.radius = float(_radius)
        if check_bounded:
            eye = np.eye(self.dim)
            status, _, _ = _simplex.supports(A, b, eye, LP_TOL)
            if status == _simplex.UNBOUNDED:
                raise Unbounded("polytope is unbounded")
            _raise_for(status)

    @classmethod
    def box(cls, low, high) -> HPolytope:
        low = np.asarray(low, dtype=float)
        high = np.asarray(high, dtype=float)
        d = low.shape[0]
        eye = np.eye(d)
        A = np.vstack([eye, -eye])
        b = np.concatenate([high, -low])
        if np.any(high - low <= 2 * EMPTY_TOL):
            raise InfeasiblePolytope("degenerate box")
        return cls(A, b, check_bounded=False, _witness=(low + high) / 2, _radius=np.min(high - low) / 2)

    @classmethod
    def cube(cls, d: int, low: float = 0.0, high: float = 1.0) -> HPolytope:
        return cls.box(np.full(d, low), np.full(d, high))

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def halfspaces(self) -> list[tuple[np.ndarray, float]]:
        return [(self.A[i].copy(), float(self.b[i])) for i in range(self.A.shape[0])]

    def __repr__(self):
        return f"HPolytope(dim={self.dim}, halfspaces={self.A.shape[0]})"

    def intersect(self, normals, offsets) -> HPolytope | None:
        """Intersection with extra halfspaces, or None if the interior is empty."""
        A = np.vstack([self.A, np.array(normals, dtype=float, ndmin=2)])
        b = np.concatenate([self.b, np.array(offsets, dtype=float).reshape(-1)])
        norms = np.linalg.norm(A, axis=1)
        A = A / norms[:, None]
        b = b / norms
        status, r, center = _simplex.chebyshev(A, b, LP_TOL)
        if status != _simplex.OPTIMAL or r <= EMPTY_TOL:
            return None
        return HPolytope(A, b, check_bounded=False, _witness=center, _radius=r)

    def as_box(self) -> tuple[np.ndarray, np.ndarray] | None:
        """``(low, high)`` if every constraint is axis-aligned, else None."""
        A = self.A
        nz = np.abs(A) > 1e-15
        if not np.all(nz.sum(axis=1) == 1):
            return None
        axis = np.argmax(nz, axis=1)
        sign = A[np.arange(A.shape[0]), axis]
        if not np.allclose(np.abs(sign), 1.0, atol=1e-12):
            return None
        d = self.dim
        low = np.full(d, -np.inf)
        high = np.full(d, np.inf)
        for i, s, bi in zip(axis, sign, self.b):
            if s > 0:
                high[i] = min(high[i], bi)
            else:
                low[i] = max(low[i], -bi)
        if not (np.all(np.isfinite(low)) and np.all(np.isfinite(high))):
            return None
        return low, high

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        box = self.as_box()
        if box is not None:
            return box
        status, hp, hm = _simplex.supports(self.A, self.b, np.eye(self.dim), LP_TOL)
        _raise_for(status)
        return -hm, hp


def lp_maximize(objective, polytope: HPolytope) -> tuple[float, np.ndarray]:
    """Maximize ``<objective, x>`` over the polytope; returns (value, maximizer)."""
    c = np.asarray(objective, dtype=float)
    if c.shape != (polytope.dim,):
        raise DimensionMismatch("objective dimension does not match polytope")
    status, value, x = _simplex.lp_free(c, polytope.A, polytope.b, LP_TOL)
    _raise_for(status)
    return float(value), x


def support(polytope: HPolytope, direction) -> float:
    """Support function ``h(K, u) = max_{x in K} <u, x>``."""
    u = np.asarray(direction, dtype=float)
    if not np.any(u):
        raise ValueError("direction must be nonzero")
    return lp_maximize(u, polytope)[0]


def width(polytope: HPolytope, direction) -> float:
    u = np.asarray(direction, dtype=float)
    return support(polytope, u) + support(polytope, -u)


def supports(polytope: HPolytope, directions) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``(h(K, u_i), h(K, -u_i))`` over the rows of ``directions``."""
    dirs = np.array(directions, dtype=float, ndmin=2)
    status, hp, hm = _simplex.supports(polytope.A, polytope.b, dirs, LP_TOL)
    _raise_for(status)
    return hp, hm


def split(polytope: HPolytope, plane: Hyperplane) -> tuple[HPolytope | None, HPolytope | None]:
    """Cut by a hyperplane into ``(lower, upper)``; empty sides are None."""
    u, t = plane.normal, plane.offset
    lower = polytope.intersect(u, t)
    upper = polytope.intersect(-u, -t)
    return lower, upper


def contains(polytope: HPolytope, x) -> bool:
    x = np.asarray(x, dtype=float)
    if x.shape != (polytope.dim,):
        raise DimensionMismatch("point dimension does not match polytope")
    return bool(np.all(polytope.A @ x - polytope.b <= CONTAINS_TOL))


# -- zonotopes ---------------------------------------------------------------


@dataclass(frozen=True)
class Zonotope:
    """Minkowski sum of centered segments ``[-w v / 2, w v / 2]``.

    With directions and weights of a discrete directional distribution this
    is the normalized associated zonoid of the STIT process.
    """

    directions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        V = np.array(self.directions, dtype=float, ndmin=2)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if V.shape[0] != w.shape[0]:
            raise DimensionMismatch("one weight per direction required")
        if np.any(w <= 0):
            raise ValueError("segment weights must be positive")
        if np.any(np.abs(np.linalg.norm(V, axis=1) - 1.0) > UNIT_TOL):
            raise ValueError("segment directions must be unit vectors")
        object.__setattr__(self, "directions", V)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.directions.shape[1]


def zonotope_support(z: Zonotope, u) -> float:
    u = np.asarray(u, dtype=float)
    return 0.5 * float(np.sum(z.weights * np.abs(z.directions @ u)))


def zonotope_volume(z: Zonotope) -> float:
    """Sum over d-subsets of segments of ``prod(w) * |det(v)|``."""
    V, w, d = z.directions, z.weights, z.dim
    if np.linalg.matrix_rank(V) < d:
        raise DegenerateZonotope("segment directions do not span the space")
    total = 0.0
    for J in combinations(range(V.shape[0]), d):
        J = list(J)
        total += np.prod(w[J]) * abs(np.linalg.det(V[J]))
    return float(total)


def box_intrinsic_volume(sides, j: int) -> float:
    """Intrinsic volume ``V_j`` of a box: elementary symmetric polynomial e_j."""
    s = np.asarray(sides, dtype=float).reshape(-1)
    d = s.shape[0]
    if not 0 <= j <= d:
        raise IndexOutOfRange(f"j={j} outside [0, {d}]")
    e = np.zeros(d + 1)
    e[0] = 1.0
    for x in s:
        e[1:] = e[1:] + x * e[:-1]
    return float(e[j])


# -- projections and diameters ------------------------------------------------


def _basis(subspace_basis, d: int) -> np.ndarray:
    B = np.array(subspace_basis, dtype=float, ndmin=2)
    if B.shape[1] != d:
        raise DimensionMismatch("subspace basis has the wrong ambient dimension")
    if not np.allclose(B @ B.T, np.eye(B.shape[0]), atol=1e-9):
        raise ValueError("subspace basis rows must be orthonormal")
    return B


def projected_width(polytope: HPolytope, subspace_basis, u_in_subspace) -> float:
    """Width of ``P_S K`` in direction u (given in ambient or basis coordinates)."""
    B = _basis(subspace_basis, polytope.dim)
    u = np.asarray(u_in_subspace, dtype=float)
    if u.shape[0] == B.shape[0] and B.shape[0] != polytope.dim:
        u = B.T @ u
    elif np.linalg.norm(u - B.T @ (B @ u)) > 1e-9:
        raise ValueError("direction is not in the subspace")
    return width(polytope, u)


def box_projected_diameter(low, high, subspace_basis=None) -> float:
    """Exact diameter of the projection of an axis box onto a subspace."""
    sides = np.asarray(high, dtype=float) - np.asarray(low, dtype=float)
    if subspace_basis is None:
        return float(np.linalg.norm(sides))
    B = np.array(subspace_basis, dtype=float, ndmin=2)
    coord = np.abs(B)
    if np.all((coord > 1e-15).sum(axis=1) == 1):
        idx = np.argmax(coord, axis=1)
        return float(np.linalg.norm(sides[idx]))
    # general subspace: farthest pair of vertices, over sign patterns
    best = 0.0
    for signs in product((1.0, -1.0), repeat=sides.shape[0] - 1):
        v = sides * np.concatenate([[1.0], signs])
        best = max(best, float(np.linalg.norm(B @ v)))
    return best


def diameter_estimate(polytope: HPolytope, subspace_basis=None, n_dirs: int = 1024, rng=None) -> float:
    """Diameter of ``P_S K``.

    Axis boxes use the exact closed form. Other polytopes take the maximum
    width over ``n_dirs`` random directions in S, which underestimates the
    diameter and converges as ``n_dirs`` grows.
    """
    if n_dirs < 1:
        raise ValueError("n_dirs must be >= 1")
    d = polytope.dim
    B = np.eye(d) if subspace_basis is None else _basis(subspace_basis, d)
    box = polytope.as_box()
    if box is not None and d <= 12:
        return box_projected_diameter(box[0], box[1], B)
    s = B.shape[0]
    if s == 1:
        dirs = B
    else:
        from .rng import as_generator

        g = as_generator(rng).standard_normal((n_dirs, s))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        dirs = g @ B
    hp, hm = supports(polytope, dirs)
    return float(np.max(hp + hm))
