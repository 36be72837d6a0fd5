"""STIT tessellations of a bounded window for discrete directional distributions.

A tessellation is stored as a binary split tree. Internal nodes hold a split
hyperplane ``<normal, x> = offset`` and its birth time; leaves are the cells.
Cells are not stored; :func:`cell` replays the splits on the root-to-leaf path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import geomcore
from .errors import DimensionMismatch, OutOfWindow, RateUnderflow
from .geomcore import HPolytope, Hyperplane, Zonotope
from .rng import as_generator

RATE_FLOOR = 1e-12
TESSELLATION_SCHEMA = "stitforest.tessellation"
TESSELLATION_VERSION = 1


class DiscreteDirectionalDistribution:
    """Even measure ``sum_i w_i/2 (delta_{u_i} + delta_{-u_i})`` on the sphere.

    One representative ``u_i`` is kept per antipodal pair; ``weights`` are the
    paired masses and sum to one.
    """

    def __init__(self, directions, weights):
        U = np.array(directions, dtype=float, ndmin=2)
        w = np.asarray(weights, dtype=float).reshape(-1)
        if U.shape[0] != w.shape[0]:
            raise DimensionMismatch("one weight per direction required")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        if np.any(np.abs(np.linalg.norm(U, axis=1) - 1.0) > geomcore.UNIT_TOL):
            raise ValueError("directions must be unit vectors")
        if np.linalg.matrix_rank(U) < U.shape[1]:
            raise ValueError("directions do not span the space")
        G = np.abs(U @ U.T)
        np.fill_diagonal(G, 0.0)
        if np.any(G >= 1.0 - 1e-12):
            raise ValueError("representatives must be distinct and non-antipodal")
        U.setflags(write=False)
        w.setflags(write=False)
        self.directions = U
        self.weights = w

    @classmethod
    def mondrian(cls, d: int) -> DiscreteDirectionalDistribution:
        return cls(np.eye(d), np.full(d, 1.0 / d))

    @classmethod
    def weighted_mondrian(cls, weights) -> DiscreteDirectionalDistribution:
        w = np.asarray(weights, dtype=float)
        return cls(np.eye(w.shape[0]), w)

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    @property
    def is_axis_aligned(self) -> bool:
        return bool(np.all((np.abs(self.directions) > 1e-15).sum(axis=1) == 1))

    def zonoid(self) -> Zonotope:
        """Normalized associated zonoid: segments ``[-w u/2, w u/2]``."""
        return Zonotope(self.directions, self.weights)

    def to_dict(self) -> dict:
        return {"directions": self.directions.tolist(), "weights": self.weights.tolist()}

    def __repr__(self):
        return f"DiscreteDirectionalDistribution(dim={self.dim}, n={len(self.weights)})"


@dataclass(frozen=True)
class IsotropicDirectionalDistribution:
    """Uniform directions on the sphere. Declared only; samplers reject it."""

    dim: int


@dataclass(frozen=True, eq=False)
class TessellationTree:
    """Binary split tree over a window, nodes in preorder.

    ``left[k] == -1`` marks a leaf. Points with ``<normal, x> >= offset`` go to
    the right (upper) child.
    """

    window: HPolytope
    lifetime: float
    normals: np.ndarray
    offsets: np.ndarray
    births: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        is_leaf = self.left < 0
        leaf_id = np.full(self.left.shape[0], -1, dtype=np.int64)
        leaf_id[is_leaf] = np.arange(int(is_leaf.sum()))
        parent = np.full(self.left.shape[0], -1, dtype=np.int64)
        internal = np.nonzero(~is_leaf)[0]
        parent[self.left[internal]] = internal
        parent[self.right[internal]] = internal
        nz = np.abs(self.normals[internal]) > 1e-15
        axis = None
        if internal.size and np.all(nz.sum(axis=1) == 1):
            ax = np.argmax(nz, axis=1)
            if np.all(self.normals[internal, ax] == 1.0):
                axis = np.zeros(self.left.shape[0], dtype=np.int64)
                axis[internal] = ax
        for name, val in (("leaf_id", leaf_id), ("leaf_nodes", np.nonzero(is_leaf)[0]),
                          ("parent", parent), ("_axis", axis)):
            object.__setattr__(self, name, val)

    @property
    def dim(self) -> int:
        return self.window.dim

    @property
    def n_nodes(self) -> int:
        return int(self.left.shape[0])

    @property
    def n_leaves(self) -> int:
        return int(self.leaf_nodes.shape[0])

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for k in range(1, self.n_nodes):
            depth[k] = depth[self.parent[k]] + 1
        return int(depth.max())

    def locate_many(self, X) -> np.ndarray:
        """Leaf ids for the rows of X (no window check)."""
        X = np.asarray(X, dtype=float)
        n = X.shape[0]
        node = np.zeros(n, dtype=np.int64)
        active = np.full(n, self.left[0] >= 0)
        idx = np.nonzero(active)[0]
        while idx.size:
            nd = node[idx]
            if self._axis is not None:
                proj = X[idx, self._axis[nd]]
            else:
                proj = np.einsum("ij,ij->i", X[idx], self.normals[nd])
            nxt = np.where(proj >= self.offsets[nd], self.right[nd], self.left[nd])
            node[idx] = nxt
            idx = idx[self.left[nxt] >= 0]
        return self.leaf_id[node]

    def path(self, leaf: int) -> list[tuple[int, bool]]:
        """Ancestors of a leaf as ``(node, went_right)`` pairs, root first."""
        k = int(self.leaf_nodes[leaf])
        out = []
        while self.parent[k] >= 0:
            p = self.parent[k]
            out.append((int(p), bool(self.right[p] == k)))
            k = p
        return out[::-1]


def locate(tree: TessellationTree, x) -> int:
    """Leaf id of the cell containing x; ties on a split plane go upward."""
    x = np.asarray(x, dtype=float)
    if x.shape != (tree.dim,):
        raise DimensionMismatch("point dimension does not match tessellation")
    if np.any(tree.window.A @ x - tree.window.b > geomcore.CONTAINS_TOL):
        raise OutOfWindow("point lies outside the window")
    return int(tree.locate_many(x[None, :])[0])


def leaf_count(tree: TessellationTree) -> int:
    return tree.n_leaves


def cell(tree: TessellationTree, leaf: int) -> HPolytope:
    """Reconstruct the cell of a leaf by replaying its split path."""
    normals, offsets = [], []
    for node, up in tree.path(leaf):
        u, t = tree.normals[node], tree.offsets[node]
        if up:
            normals.append(-u)
            offsets.append(-t)
        else:
            normals.append(u)
            offsets.append(t)
    if not normals:
        return tree.window
    P = tree.window.intersect(normals, offsets)
    if P is None:
        raise RuntimeError("leaf cell has empty interior")
    return P


def cells(tree: TessellationTree) -> list[HPolytope]:
    return [cell(tree, i) for i in range(tree.n_leaves)]


def zero_cell(tree: TessellationTree) -> HPolytope:
    """The cell containing the origin."""
    return cell(tree, locate(tree, np.zeros(tree.dim)))


class _TreeBuilder:
    """Accumulates preorder nodes; children are linked as they are created."""

    def __init__(self, d: int):
        self.d = d
        self.normals: list = []
        self.offsets: list = []
        self.births: list = []
        self.left: list = []
        self.right: list = []

    def add(self, parent: int, upper: bool) -> int:
        k = len(self.left)
        self.normals.append(None)
        self.offsets.append(np.nan)
        self.births.append(np.nan)
        self.left.append(-1)
        self.right.append(-1)
        if parent >= 0:
            if upper:
                self.right[parent] = k
            else:
                self.left[parent] = k
        return k

    def set_split(self, k: int, normal, offset: float, birth: float) -> None:
        self.normals[k] = normal
        self.offsets[k] = offset
        self.births[k] = birth

    def build(self, window: HPolytope, lifetime: float) -> TessellationTree:
        zero = np.zeros(self.d)
        normals = np.array([zero if u is None else u for u in self.normals], dtype=float).reshape(-1, self.d)
        arrays = [normals, np.array(self.offsets, dtype=float), np.array(self.births, dtype=float),
                  np.array(self.left, dtype=np.int64), np.array(self.right, dtype=np.int64)]
        for a in arrays:
            a.setflags(write=False)
        return TessellationTree(window, float(lifetime), *arrays)


def stit_sample(window: HPolytope, lifetime: float, phi, rng=None, *, start_time: float = 0.0) -> TessellationTree:
    """Sample a STIT tessellation of ``window`` with lifetime ``lifetime``.

    Each cell W waits an exponential time with rate
    ``R(W) = sum_i w_i * width(W, u_i)``. If the clock rings before the
    lifetime expires, direction i is chosen with probability proportional to
    ``w_i * width(W, u_i)``, the offset is uniform on
    ``[-h(W, -u_i), h(W, u_i)]``, and both halves recurse independently.

    Per cell, uniforms are consumed in the fixed order (clock, direction,
    offset); cells are visited depth-first, lower side first. A split that
    leaves a side thinner than the emptiness tolerance is discarded and the
    clock keeps running.
    """
    if isinstance(phi, IsotropicDirectionalDistribution):
        raise NotImplementedError("isotropic directional distributions are not supported")
    if lifetime <= 0:
        raise ValueError("lifetime must be positive")
    if phi.dim != window.dim:
        raise DimensionMismatch("directional distribution and window dimensions differ")
    g = as_generator(rng)
    U, w = phi.directions, phi.weights
    builder = _TreeBuilder(window.dim)
    stack = [(window, start_time, -1, False)]
    while stack:
        W, t, parent, upper = stack.pop()
        k = builder.add(parent, upper)
        hp, hm = geomcore.supports(W, U)
        rates = w * (hp + hm)
        R = float(rates.sum())
        if R < RATE_FLOOR:
            raise RateUnderflow(f"cell rate {R!r} below floor")
        cum = np.cumsum(rates)
        while True:
            t = t - math.log1p(-g.random()) / R
            if t >= lifetime:
                break
            i = min(int(np.searchsorted(cum, g.random() * R, side="right")), len(w) - 1)
            offset = -hm[i] + g.random() * (hp[i] + hm[i])
            lower, upper_cell = geomcore.split(W, Hyperplane(U[i], offset))
            if lower is None or upper_cell is None:
                continue
            builder.set_split(k, U[i], offset, t)
            stack.append((upper_cell, t, k, True))
            stack.append((lower, t, k, False))
            break
    return builder.build(window, lifetime)


def restrict(tree: TessellationTree, window: HPolytope) -> TessellationTree:
    """Restriction of a tessellation to a sub-window.

    Splits that miss the restricted cell are dropped, so every leaf of the
    result has a nonempty interior. ``tree`` and ``window`` share coordinates.
    """
    builder = _TreeBuilder(window.dim)
    stack = [(0, window, -1, False)]
    while stack:
        node, W, parent, upper = stack.pop()
        while tree.left[node] >= 0:
            lower, up = geomcore.split(W, Hyperplane(tree.normals[node], tree.offsets[node]))
            if lower is None:
                node = tree.right[node]
            elif up is None:
                node = tree.left[node]
            else:
                break
        k = builder.add(parent, upper)
        if tree.left[node] >= 0:
            builder.set_split(k, tree.normals[node], tree.offsets[node], tree.births[node])
            stack.append((tree.right[node], up, k, True))
            stack.append((tree.left[node], lower, k, False))
    return builder.build(window, tree.lifetime)


@dataclass(frozen=True)
class ScalingResult:
    mean_unit: float
    var_unit: float
    mean_scaled: float
    var_scaled: float
    ks_statistic: float
    p_value: float
    critical_1pct: float

    @property
    def passed(self) -> bool:
        return self.ks_statistic < self.critical_1pct


def ks_critical(n: int, m: int, alpha: float = 0.01) -> float:
    """Asymptotic two-sample Kolmogorov-Smirnov critical value."""
    c = np.sqrt(-0.5 * np.log(alpha / 2))
    return float(c * np.sqrt((n + m) / (n * m)))


def scaling_check(phi, lifetime: float, reps: int, seed: int = 0, *, sampler=None) -> ScalingResult:
    """Leaf counts of STIT(lifetime) on the unit cube vs STIT(1) on [0, lifetime]^d."""
    from .rng import GEOMETRY, stream

    if lifetime <= 0:
        raise ValueError("lifetime must be positive")
    sampler = stit_sample if sampler is None else sampler
    d = phi.dim
    unit = HPolytope.cube(d)
    big = HPolytope.cube(d, 0.0, lifetime)
    a = np.array([sampler(unit, lifetime, phi, stream(seed, GEOMETRY, 0, r)).n_leaves for r in range(reps)])
    b = np.array([sampler(big, 1.0, phi, stream(seed, GEOMETRY, 1, r)).n_leaves for r in range(reps)])
    ks = stats.ks_2samp(a, b)
    return ScalingResult(float(a.mean()), float(a.var(ddof=1)), float(b.mean()), float(b.var(ddof=1)),
                         float(ks.statistic), float(ks.pvalue), ks_critical(reps, reps))


# -- serialization --------------------------------------------------------------


def tree_to_dict(tree: TessellationTree) -> dict:
    nodes = []
    for k in range(tree.n_nodes):
        if tree.left[k] < 0:
            nodes.append({"leaf": True})
        else:
            nodes.append({"normal": tree.normals[k].tolist(), "offset": float(tree.offsets[k]),
                          "birth_time": float(tree.births[k])})
    return {
        "schema": TESSELLATION_SCHEMA,
        "version": TESSELLATION_VERSION,
        "dim": tree.dim,
        "lifetime": tree.lifetime,
        "window": {"normals": tree.window.A.tolist(), "offsets": tree.window.b.tolist()},
        "nodes": nodes,
    }


def tree_from_dict(data: dict) -> TessellationTree:
    from .errors import ModelFormatError, SchemaVersionMismatch

    if data.get("schema") != TESSELLATION_SCHEMA or data.get("version") != TESSELLATION_VERSION:
        raise SchemaVersionMismatch(f"unsupported tessellation schema {data.get('schema')!r} v{data.get('version')!r}")
    try:
        d = int(data["dim"])
        window = HPolytope(data["window"]["normals"], data["window"]["offsets"], check_bounded=False)
        builder = _TreeBuilder(d)
        # rebuild child links from preorder: a stack of internal nodes awaiting a right child
        pending: list[int] = []
        for k, node in enumerate(data["nodes"]):
            if k == 0:
                builder.add(-1, False)
            else:
                parent = pending[-1]
                upper = builder.left[parent] >= 0
                if upper:
                    pending.pop()
                builder.add(parent, upper)
            if not node.get("leaf", False):
                builder.set_split(k, np.asarray(node["normal"], dtype=float), float(node["offset"]),
                                  float(node["birth_time"]))
                pending.append(k)
        if pending:
            raise ModelFormatError("truncated node list")
        return builder.build(window, float(data["lifetime"]))
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise ModelFormatError(f"malformed tessellation: {exc}") from exc
