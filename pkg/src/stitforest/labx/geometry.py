"""Geometry statistics suite and the direct-vs-lifted route equivalence experiment."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple

import numpy as np
from scipy import stats

from .. import rng as rngmod
from ..geomcore import HPolytope
from ..mondrian import (AxisBox, WeightedMondrianSpec, diam_mondrian_bound, expected_leaf_count, leaf_boxes,
                        mondrian_sample, zero_cell_sides)
from ..oblique import (FeatureMatrix, SubspaceSpec, deter_bound, dirdist_from_matrix, lifted_partition,
                       oblique_zero_cell_times)
from ..tessellate import DiscreteDirectionalDistribution, ks_critical, scaling_check, stit_sample
from .parallel import ordered_map


class CheckRow(NamedTuple):
    check_id: str
    estimate: float
    stderr: float
    bound_or_target: float
    passed: bool


def _within(est, se, target, k=3.0) -> bool:
    return abs(est - target) <= k * se


def _mean_se(v) -> tuple[float, float]:
    v = np.asarray(v, dtype=float)
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))


# -- individual checks ---------------------------------------------------------------


def leaf_count_check(reps: int, seed: int, lifetime=3.0, weights=(0.5, 0.5)) -> CheckRow:
    spec = WeightedMondrianSpec(weights, lifetime)
    box = AxisBox.unit(spec.dim)
    counts = [mondrian_sample(box, spec, rngmod.stream(seed, rngmod.GEOMETRY, 1, r)).n_leaves for r in range(reps)]
    m, se = _mean_se(counts)
    target = expected_leaf_count(box, spec).value
    return CheckRow("leaf_count", m, se, target, _within(m, se, target))


def zero_cell_volume_check(reps: int, seed: int, lifetime=2.0, weights=(0.5, 0.5)) -> CheckRow:
    spec = WeightedMondrianSpec(weights, lifetime)
    vol = zero_cell_sides(spec, reps, rngmod.stream(seed, rngmod.GEOMETRY, 2)).prod(axis=1)
    m, se = _mean_se(vol)
    target = 2.0 ** spec.dim / (lifetime ** spec.dim * float(np.prod(spec.weights)))
    return CheckRow("zero_cell_volume", m, se, target, _within(m, se, target))


def zero_cell_side_ks(reps: int, seed: int, lifetime=2.0, weights=(0.5, 0.5), alpha=0.01) -> list[CheckRow]:
    """One-sample KS of each zero-cell side against Gamma(2, rate lifetime * w_i)."""
    spec = WeightedMondrianSpec(weights, lifetime)
    sides = zero_cell_sides(spec, reps, rngmod.stream(seed, rngmod.GEOMETRY, 3))
    crit = float(stats.kstwo.ppf(1 - alpha, reps))
    rows = []
    for i in range(spec.dim):
        res = stats.kstest(sides[:, i], stats.gamma(2, scale=1.0 / (lifetime * spec.weights[i])).cdf)
        rows.append(CheckRow(f"zero_cell_side_ks_{i}", float(res.statistic), 0.0, crit, bool(res.pvalue > alpha)))
    return rows


def campbell_check(reps: int, seed: int, weights=(0.5, 0.5), lifetime=1.0, side=20.0, tag=0) -> CheckRow:
    """Mean typical-cell volume from corner counting in a window.

    Every cell has one lower corner; the cells whose lower corner lies in
    ``W = [0, side)^d`` number ``vol(W) / E[vol Z]`` on average. The Mondrian
    runs on a slightly larger box so no corner in W is an artifact of the
    window boundary. The estimate is ``vol(W) / mean count``.
    """
    spec = WeightedMondrianSpec(weights, lifetime)
    d = spec.dim
    box = AxisBox(np.full(d, -1.0), np.full(d, side + 1.0))
    counts = np.empty(reps)
    for r in range(reps):
        lows, _ = leaf_boxes(mondrian_sample(box, spec, rngmod.stream(seed, rngmod.GEOMETRY, 4, tag, r)))
        counts[r] = np.all((lows >= 0.0) & (lows < side), axis=1).sum()
    vol = side ** d
    mc, sc = _mean_se(counts)
    est = vol / mc
    se = vol * sc / mc ** 2
    target = 1.0 / (lifetime ** d * float(np.prod(spec.weights)))
    wtag = "_".join(f"{w:g}" for w in spec.weights)
    return CheckRow(f"campbell_volume_w{wtag}", est, se, target, abs(est - target) <= 0.1 * target)


def erlang_checks(reps: int, seed: int) -> list[CheckRow]:
    """Projected zero-cell diameter moments against the Erlang bound.

    ``s = 1, w_S = 1`` is the equality case (moments 2 and 6); the weighted
    cases only need the inequality.
    """
    rows = []
    cases = [
        ("erlang_eq", (1.0,), [0], 0.0, True),
        ("erlang_w0.3_0.7_S0", (0.3, 0.7), [0], 0.0, False),
        ("erlang_w0.3_0.7_S01", (0.3, 0.7), [0, 1], 0.0, False),
        ("erlang_w0.3_0.7_S1_r2", (0.3, 0.7), [1], 2.0, False),
    ]
    for c, (name, w, coords, r, equality) in enumerate(cases):
        spec = WeightedMondrianSpec(w, 1.0)
        sides = zero_cell_sides(spec, reps, rngmod.stream(seed, rngmod.GEOMETRY, 5, c))[:, coords]
        D = np.sqrt((sides ** 2).sum(axis=1))
        omega_s = float(np.min(np.asarray(w)[coords]))
        for k in (1, 2):
            vals = np.where(D >= r, D ** k, 0.0)
            m, se = _mean_se(vals)
            bound = diam_mondrian_bound(k, r, len(coords), omega_s)
            ok = _within(m, se, bound) if equality else m <= bound + 3 * se
            rows.append(CheckRow(f"{name}_k{k}", m, se, bound, bool(ok)))
    return rows


def _vertex_solver(normals: np.ndarray):
    """Precompute inverses of all nonsingular d-row subsets of ``normals``."""
    k, d = normals.shape
    subsets, inverses = [], []
    for idx in combinations(range(k), d):
        sub = normals[list(idx)]
        if abs(np.linalg.det(sub)) > 1e-10:
            subsets.append(idx)
            inverses.append(np.linalg.inv(sub))
    return np.array(subsets), np.array(inverses)


def projected_diameters(normals, offsets, basis, tol: float = 1e-9) -> np.ndarray:
    """Exact diameters of ``P_S {y : normals y <= offsets_r}`` for each row r of ``offsets``.

    Vertices come from all d-subsets of constraints; the diameter of a
    projected polytope is attained between projected vertices.
    """
    normals = np.asarray(normals, dtype=float)
    offsets = np.atleast_2d(offsets)
    subsets, inverses = _vertex_solver(normals)
    # V[r, j] = inverses[j] @ offsets[r, subsets[j]]
    V = np.einsum("jab,rjb->rja", inverses, offsets[:, subsets])
    slack = np.einsum("kd,rjd->rjk", normals, V) - offsets[:, None, :]
    feasible = np.all(slack <= tol * (1.0 + np.abs(offsets[:, None, :])), axis=2)
    P = V @ np.asarray(basis, dtype=float).T
    out = np.empty(offsets.shape[0])
    for r in range(offsets.shape[0]):
        pts = P[r, feasible[r]]
        diff = pts[:, None, :] - pts[None, :, :]
        out[r] = np.sqrt((diff ** 2).sum(axis=2).max())
    return out


def deter_configs(seed: int):
    """Three random normalized (A, S) configurations, (d, m, s) = (2,3,1), (3,4,1), (3,4,2),
    plus the fixed pair A = diag(0.9, 0.1), S = span((1, 1)) where the mean
    projected diameter is known in closed form (about 15.71 at unit lifetime).
    """
    g = rngmod.stream(seed, rngmod.GEOMETRY, 6)
    out = []
    for d, m, s in ((2, 3, 1), (3, 4, 1), (3, 4, 2)):
        A = FeatureMatrix(g.standard_normal((d, m))).normalized()
        S = SubspaceSpec.span(g.standard_normal((s, d)))
        out.append((A, S))
    out.append((FeatureMatrix(np.diag([0.9, 0.1])), SubspaceSpec.span([[1.0, 1.0]])))
    return out


def deter_checks(reps: int, seed: int) -> list[CheckRow]:
    rows = []
    for c, (A, S) in enumerate(deter_configs(seed)):
        T1, T2 = oblique_zero_cell_times(A, 1.0, reps, rngmod.stream(seed, rngmod.GEOMETRY, 7, c))
        normals = np.vstack([A.entries.T, -A.entries.T])
        D = projected_diameters(normals, np.hstack([T2, T1]), S.basis)
        tag = f"d{A.d}_m{A.m}_s{S.s}"
        for k in (1, 2):
            m, se = _mean_se(D ** k)
            b = deter_bound(A, S, k)
            rows.append(CheckRow(f"deter_{tag}_k{k}", m, se, b.proof, m <= b.proof + 3 * se))
            rows.append(CheckRow(f"deter_corrected_{tag}_k{k}", m, se, b.corrected, m <= b.corrected + 3 * se))
    return rows


def scaling_phis() -> dict:
    return {
        "axis": DiscreteDirectionalDistribution.mondrian(2),
        "oblique": dirdist_from_matrix(FeatureMatrix([[1.0, 1.0], [0.0, 1.0]])),
    }


def scaling_checks(reps: int, seed: int, lifetime: float = 4.0) -> list[CheckRow]:
    rows = []
    for name, phi in scaling_phis().items():
        res = scaling_check(phi, lifetime, reps, seed=seed)
        rows.append(CheckRow(f"scaling_ks_{name}", res.ks_statistic, 0.0, res.critical_1pct, res.passed))
    return rows


# -- suite -------------------------------------------------------------------------------


@dataclass
class GeometryConfig:
    leaf_trees: int = 20_000
    zero_cell_reps: int = 100_000
    ks_reps: int = 5_000
    campbell_reps: int = 400
    campbell_side: float = 20.0
    erlang_reps: int = 200_000
    deter_reps: int = 20_000
    scaling_reps: int = 5_000
    checks: list = field(default_factory=lambda: list(CHECKS))

    def __post_init__(self):
        unknown = set(self.checks) - set(CHECKS)
        if unknown:
            raise ValueError(f"unknown geometry checks {sorted(unknown)}")


CHECKS = ("leaf_count", "zero_cell", "campbell", "erlang", "deter", "scaling")


def _run_check(args) -> list[CheckRow]:
    name, cfg, seed = args
    if name == "leaf_count":
        return [leaf_count_check(cfg.leaf_trees, seed)]
    if name == "zero_cell":
        return [zero_cell_volume_check(cfg.zero_cell_reps, seed)] + zero_cell_side_ks(cfg.ks_reps, seed)
    if name == "campbell":
        return [campbell_check(cfg.campbell_reps, seed, w, side=cfg.campbell_side, tag=t)
                for t, w in enumerate(((0.5, 0.5), (0.7, 0.3)))]
    if name == "erlang":
        return erlang_checks(cfg.erlang_reps, seed)
    if name == "deter":
        return deter_checks(cfg.deter_reps, seed)
    return scaling_checks(cfg.scaling_reps, seed)


def geometry_suite(cfg: GeometryConfig | None = None, seed: int = 0, threads: int = 1) -> list[CheckRow]:
    cfg = GeometryConfig() if cfg is None else cfg
    chunks = ordered_map(_run_check, [(name, cfg, seed) for name in cfg.checks], threads)
    return [row for chunk in chunks for row in chunk]


# -- route equivalence -----------------------------------------------------------------


class EquivalenceRow(NamedTuple):
    config: str
    pair: int
    p_direct: float
    p_lifted: float
    p_closed_form: float
    pooled_stderr: float
    passed: bool


@dataclass
class EquivalenceConfig:
    reps: int = 10_000
    padding: float = 3.0
    configs: list = field(default_factory=lambda: [dict(c) for c in DEFAULT_EQUIVALENCE])


DEFAULT_EQUIVALENCE = (
    {"name": "d2_e1_diag", "matrix": [[1.0, 1.0], [0.0, 1.0]], "lifetime": 2.0,
     "pairs": [[[0.2, 0.3], [0.5, 0.4]], [[0.1, 0.1], [0.9, 0.8]], [[0.5, 0.5], [0.55, 0.7]]]},
    {"name": "d2_three_dirs", "matrix": [[1.0, 0.0, 1.0], [0.0, 1.0, -1.0]], "lifetime": 3.0,
     "pairs": [[[0.3, 0.3], [0.4, 0.4]], [[0.2, 0.8], [0.6, 0.5]], [[0.7, 0.1], [0.75, 0.3]]]},
    {"name": "d3_four_dirs", "matrix": [[1.0, 0.0, 0.0, 1.0], [0.0, 1.0, 0.0, 1.0], [0.0, 0.0, 1.0, 1.0]],
     "lifetime": 1.5,
     "pairs": [[[0.2, 0.2, 0.2], [0.4, 0.3, 0.5]], [[0.1, 0.9, 0.5], [0.6, 0.4, 0.5]],
               [[0.5, 0.5, 0.5], [0.52, 0.45, 0.6]]]},
)


def closed_form_comembership(phi: DiscreteDirectionalDistribution, lifetime: float, x, y) -> float:
    """``exp(-lifetime * sum_i w_i |<u_i, x - y>|)``: no cut hits the segment [x, y]."""
    delta = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return float(np.exp(-lifetime * np.sum(phi.weights * np.abs(phi.directions @ delta))))


def _equivalence_config(args) -> list[EquivalenceRow]:
    conf, reps, padding, seed, c = args
    A = FeatureMatrix(conf["matrix"])
    lam = float(conf["lifetime"])
    pairs = np.asarray(conf["pairs"], dtype=float)
    phi = dirdist_from_matrix(A)
    d = A.d
    window = HPolytope.cube(d)
    pts = pairs.reshape(-1, d)
    same_direct = np.zeros(len(pairs))
    same_lifted = np.zeros(len(pairs))
    for r in range(reps):
        tree = stit_sample(window, lam, phi, rngmod.stream(seed, rngmod.EQUIVALENCE, c, 0, r))
        lab = tree.locate_many(pts).reshape(-1, 2)
        same_direct += lab[:, 0] == lab[:, 1]
        lab, _ = lifted_partition(pts, A, lam, rngmod.stream(seed, rngmod.EQUIVALENCE, c, 1, r), padding=padding)
        lab = lab.reshape(-1, 2)
        same_lifted += lab[:, 0] == lab[:, 1]
    rows = []
    for i, (x, y) in enumerate(pairs):
        p1, p2 = same_direct[i] / reps, same_lifted[i] / reps
        se = float(np.sqrt((p1 * (1 - p1) + p2 * (1 - p2)) / reps))
        ok = abs(p1 - p2) <= 3 * se
        rows.append(EquivalenceRow(conf["name"], i, p1, p2, closed_form_comembership(phi, lam, x, y), se, bool(ok)))
    return rows


def equivalence_experiment(cfg: EquivalenceConfig | None = None, seed: int = 0, threads: int = 1):
    cfg = EquivalenceConfig() if cfg is None else cfg
    jobs = [(conf, cfg.reps, cfg.padding, seed, c) for c, conf in enumerate(cfg.configs)]
    return [row for chunk in ordered_map(_equivalence_config, jobs, threads) for row in chunk]


__all__ = ["CheckRow", "EquivalenceConfig", "EquivalenceRow", "GeometryConfig", "campbell_check",
           "closed_form_comembership", "deter_checks", "equivalence_experiment", "erlang_checks",
           "geometry_suite", "leaf_count_check", "projected_diameters", "scaling_checks",
           "zero_cell_side_ks", "zero_cell_volume_check"]
