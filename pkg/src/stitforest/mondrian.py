"""Axis-aligned weighted Mondrian processes on boxes.

Same law as :func:`stitforest.tessellate.stit_sample` with the weighted
Mondrian directional distribution, but every cell stays a box, so support
functions are side lengths and no LP is solved.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
from functools import cached_property
from typing import NamedTuple

import numpy as np
from numba import njit
from scipy import special

from .geomcore import HPolytope
from .rng import as_generator
from .tessellate import TessellationTree


@dataclass(frozen=True)
class AxisBox:
    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        low = np.asarray(self.low, dtype=float).reshape(-1)
        high = np.asarray(self.high, dtype=float).reshape(-1)
        if low.shape != high.shape:
            raise ValueError("low and high differ in length")
        if np.any(low > high):
            raise ValueError("box requires low <= high")
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)

    @classmethod
    def unit(cls, d: int) -> AxisBox:
        return cls(np.zeros(d), np.ones(d))

    @property
    def dim(self) -> int:
        return self.low.shape[0]

    @property
    def sides(self) -> np.ndarray:
        return self.high - self.low

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    def to_polytope(self) -> HPolytope:
        return HPolytope.box(self.low, self.high)

    @cached_property
    def polytope(self) -> HPolytope:
        return self.to_polytope()


@dataclass(frozen=True)
class WeightedMondrianSpec:
    weights: np.ndarray
    lifetime: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
        if self.lifetime <= 0:
            raise ValueError("lifetime must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "lifetime", float(self.lifetime))

    @classmethod
    def uniform(cls, d: int, lifetime: float) -> WeightedMondrianSpec:
        return cls(np.full(d, 1.0 / d), lifetime)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]


def mondrian_sample(box: AxisBox, spec: WeightedMondrianSpec, rng=None) -> TessellationTree:
    """Weighted Mondrian tessellation of a box.

    Cell rate is ``sum_i w_i s_i`` for side lengths s; the split axis is drawn
    proportionally to ``w_i s_i`` and the cut is uniform along that side.
    Uniform draws follow the same (clock, axis, offset) order as the general
    sampler, so both produce the same tree from the same stream.
    """
    if box.dim != spec.dim:
        raise ValueError("box and weights differ in dimension")
    if np.any(box.sides <= 0):
        raise ValueError("box is degenerate")
    g = as_generator(rng)
    axis, offsets, births, left, right = _mondrian_core(box.low, box.high, spec.weights, spec.lifetime, g)
    normals = np.zeros((axis.shape[0], spec.dim))
    internal = np.nonzero(axis >= 0)[0]
    normals[internal, axis[internal]] = 1.0
    for a in (normals, offsets, births, left, right):
        a.setflags(write=False)
    return TessellationTree(box.polytope, spec.lifetime, normals, offsets, births, left, right)


@njit(cache=True)
def _mondrian_core(low0, high0, w, lam, g):
    d = low0.shape[0]
    cap = 64
    axis = np.full(cap, -1, np.int64)
    offsets = np.full(cap, np.nan)
    births = np.full(cap, np.nan)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    # pending cells: bounds, birth time, parent, side
    s_low = np.empty((cap, d))
    s_high = np.empty((cap, d))
    s_t = np.empty(cap)
    s_parent = np.empty(cap, np.int64)
    s_upper = np.empty(cap, np.bool_)
    s_low[0] = low0
    s_high[0] = high0
    s_t[0] = 0.0
    s_parent[0] = -1
    s_upper[0] = False
    top = 1
    n = 0
    rates = np.empty(d)
    while top > 0:
        top -= 1
        low = s_low[top].copy()
        high = s_high[top].copy()
        t = s_t[top]
        parent = s_parent[top]
        upper = s_upper[top]
        if n == axis.shape[0]:
            m = 2 * n
            axis = _grow_i(axis, m)
            left = _grow_i(left, m)
            right = _grow_i(right, m)
            offsets = _grow_f(offsets, m)
            births = _grow_f(births, m)
        k = n
        n += 1
        if parent >= 0:
            if upper:
                right[parent] = k
            else:
                left[parent] = k
        R = 0.0
        for i in range(d):
            rates[i] = w[i] * (high[i] - low[i])
            R += rates[i]
        t = t - math.log1p(-g.random()) / R
        if t >= lam:
            continue
        target = g.random() * R
        i = 0
        acc = rates[0]
        while acc <= target and i < d - 1:
            i += 1
            acc += rates[i]
        cut = low[i] + g.random() * (high[i] - low[i])
        axis[k] = i
        offsets[k] = cut
        births[k] = t
        if top + 2 > s_t.shape[0]:
            m = 2 * s_t.shape[0]
            s_low = _grow_2(s_low, m)
            s_high = _grow_2(s_high, m)
            s_t = _grow_f(s_t, m)
            s_parent = _grow_i(s_parent, m)
            s_upper = _grow_b(s_upper, m)
        # upper child first so the lower one is popped next
        s_low[top] = low
        s_low[top, i] = cut
        s_high[top] = high
        s_t[top] = t
        s_parent[top] = k
        s_upper[top] = True
        top += 1
        s_low[top] = low
        s_high[top] = high
        s_high[top, i] = cut
        s_t[top] = t
        s_parent[top] = k
        s_upper[top] = False
        top += 1
    return axis[:n].copy(), offsets[:n].copy(), births[:n].copy(), left[:n].copy(), right[:n].copy()


@njit(cache=True)
def _grow_i(a, m):
    out = np.full(m, -1, np.int64)
    out[:a.shape[0]] = a
    return out


@njit(cache=True)
def _grow_f(a, m):
    out = np.full(m, np.nan)
    out[:a.shape[0]] = a
    return out


@njit(cache=True)
def _grow_b(a, m):
    out = np.zeros(m, np.bool_)
    out[:a.shape[0]] = a
    return out


@njit(cache=True)
def _grow_2(a, m):
    out = np.empty((m, a.shape[1]))
    out[:a.shape[0]] = a
    return out


def leaf_boxes(tree: TessellationTree) -> tuple[np.ndarray, np.ndarray]:
    """``(lows, highs)`` of all leaf cells of an axis-aligned tree, by leaf id."""
    box = tree.window.as_box()
    if box is None:
        raise ValueError("window is not a box")
    n, d = tree.n_nodes, tree.dim
    lows = np.empty((n, d))
    highs = np.empty((n, d))
    lows[0], highs[0] = box
    for k in range(n):
        if tree.left[k] < 0:
            continue
        i = int(np.argmax(np.abs(tree.normals[k])))
        if tree.normals[k, i] != 1.0:
            raise ValueError("tree is not axis-aligned")
        lo, hi = tree.left[k], tree.right[k]
        lows[lo], highs[lo] = lows[k], highs[k].copy()
        highs[lo, i] = tree.offsets[k]
        lows[hi], highs[hi] = lows[k].copy(), highs[k]
        lows[hi, i] = tree.offsets[k]
    leaves = tree.leaf_nodes
    return lows[leaves], highs[leaves]


def zero_cell_sample(spec: WeightedMondrianSpec, rng=None) -> AxisBox:
    """Zero cell of the stationary weighted Mondrian on all of R^d.

    ``prod_i [-T_i1, T_i2]`` with independent ``T ~ Exponential(rate lifetime * w_i)``.
    """
    g = as_generator(rng)
    rate = spec.lifetime * spec.weights
    t1 = -np.log1p(-g.random(spec.dim)) / rate
    t2 = -np.log1p(-g.random(spec.dim)) / rate
    return AxisBox(-t1, t2)


def zero_cell_sides(spec: WeightedMondrianSpec, reps: int, rng=None) -> np.ndarray:
    """Side lengths of ``reps`` independent zero cells, shape (reps, d)."""
    g = as_generator(rng)
    rate = spec.lifetime * spec.weights
    u = g.random((reps, 2, spec.dim))
    return (-np.log1p(-u) / rate).sum(axis=1)


class LeafCount(NamedTuple):
    value: float
    derived: bool


def expected_leaf_count(box: AxisBox, spec: WeightedMondrianSpec | None = None, *, weights=None,
                        lifetime: float | None = None) -> LeafCount:
    """Expected number of cells, ``prod_i (1 + lifetime * w_i * s_i)``.

    Proven for the unit cube; for other boxes the same product is returned
    with ``derived=True``. ``lifetime=0`` is accepted and gives one cell.
    """
    if spec is not None:
        weights, lifetime = spec.weights, spec.lifetime
    w = np.asarray(weights, dtype=float)
    value = float(np.prod(1.0 + lifetime * w * box.sides))
    unit = bool(np.allclose(box.sides, 1.0, rtol=0, atol=1e-15))
    return LeafCount(value, not unit)


def erlang_tail_moment(shape: int, k: float, x: float) -> float:
    """``E[T^k 1{T >= x}]`` for ``T ~ Erlang(shape, 1)``."""
    return float(np.exp(special.gammaln(shape + k) - special.gammaln(shape)) * special.gammaincc(shape + k, x))


def diam_mondrian_bound(k: float, r: float, s: int, omega_s: float) -> float:
    """Erlang upper bound on ``E[D(P_S Z_0)^k 1{D >= r}]``, unit-lifetime weighted Mondrian."""
    return omega_s ** (-k) * erlang_tail_moment(2 * s, k, r * omega_s)


class DiameterStats(NamedTuple):
    estimate: float
    stderr: float
    bound: float

    @property
    def within_bound(self) -> bool:
        return self.estimate <= self.bound + 3 * self.stderr


def projected_zero_cell_diameter_stats(spec: WeightedMondrianSpec, relevant_coords, k: float = 1.0,
                                       threshold: float = 0.0, reps: int = 100_000, rng=None) -> DiameterStats:
    """Monte-Carlo ``E[D(P_S Z_0)^k 1{D >= r}]`` against its Erlang bound.

    ``D`` is the exact box diameter over the relevant coordinates. The bound
    is stated at unit lifetime; other lifetimes use the scaling
    ``Z_0(lifetime) = Z_0(1) / lifetime``.
    """
    coords = np.asarray(sorted(set(int(i) for i in relevant_coords)))
    if coords.size == 0:
        raise ValueError("relevant coordinate set is empty")
    sides = zero_cell_sides(spec, reps, rng)[:, coords]
    D = np.sqrt((sides ** 2).sum(axis=1))
    vals = np.where(D >= threshold, D ** k, 0.0)
    lam = spec.lifetime
    bound = lam ** (-k) * diam_mondrian_bound(k, lam * threshold, coords.size, float(spec.weights[coords].min()))
    return DiameterStats(float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(reps)), bound)
