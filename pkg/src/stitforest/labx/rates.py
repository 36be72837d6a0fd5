"""Convergence-rate experiments: risk over an n-grid and a log-log slope fit."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import stats

from ..oblique import FeatureMatrix, SubspaceSpec, lifetime_schedule, perp_norm21
from ..regress import SamplerSpec
from .risk import estimate_risk, mean_stderr, risk_replicates
from .targets import RidgeTarget

FAMILIES = ("oblique", "mondrian")


class GridPoint(NamedTuple):
    n: int
    lifetime: float
    M: int
    risk: float
    stderr: float


class SlopeFit(NamedTuple):
    slope: float
    stderr: float
    intercept: float


@dataclass
class RateFit:
    grid: list
    slope: float
    slope_stderr: float
    multiplier: float
    family: str = ""
    expected: float | None = None

    def within(self, tol: float) -> bool:
        return self.expected is not None and abs(self.slope - self.expected) <= tol


def fit_slope(ns, risks) -> SlopeFit:
    """OLS fit of ``log risk`` on ``log n``."""
    ns, risks = np.asarray(ns, dtype=float), np.asarray(risks, dtype=float)
    if ns.size < 2:
        raise ValueError("need at least two grid points")
    res = stats.linregress(np.log(ns), np.log(risks))
    return SlopeFit(float(res.slope), float(res.stderr), float(res.intercept))


def exact_feature_matrix(target: RidgeTarget, eps: float = 1e-8) -> FeatureMatrix:
    """``normalize([U_S, eps * U_perp])``: S-aligned columns plus eps-scaled orthogonal ones.

    ``eps > 0`` keeps A at rank d; the perpendicular mass is ``(d - s) eps``
    before normalization.
    """
    S = SubspaceSpec.span(target.A_true)
    full = np.linalg.svd(S.basis, full_matrices=True)[2]
    perp = full[S.s:]
    # orthonormal complement, orthogonalized against S for safety
    perp = perp - (perp @ S.basis.T) @ S.basis
    cols = np.vstack([S.basis, eps * perp]).T
    return FeatureMatrix(cols).normalized()


@dataclass
class RateConfig:
    family: str = "oblique"
    ns: list = field(default_factory=lambda: [1000, 3000, 10000, 30000, 100000])
    d: int = 3
    A_true: list | None = None
    link: str = "linear"
    sigma: float = 0.3
    beta: float = 1.0
    L: float = 1.0
    eps: float = 1e-8
    mu: str = "uniform-cube"
    M: int = 1
    replicates: int = 20
    n_test: int = 2000
    multiplier: float | None = None
    multiplier_grid: list = field(default_factory=lambda: [0.25, 0.35, 0.5, 0.7, 1.0, 1.4, 2.0, 2.8, 4.0, 5.6,
                                                           8.0, 11.3, 16.0])
    tune_replicates: int = 20

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown estimator family {self.family!r}")
        ns = sorted(int(n) for n in self.ns)
        if len(ns) < 4 or np.log10(ns[-1] / ns[0]) < 1.5:
            raise ValueError("rate grid needs at least 4 sizes spanning 1.5 decades")
        self.ns = ns
        if self.A_true is None:
            self.A_true = [list(np.ones(self.d) / np.sqrt(self.d))]

    def target(self) -> RidgeTarget:
        return RidgeTarget(np.asarray(self.A_true, dtype=float), self.link, self.sigma)

    def expected_slope(self) -> float:
        s = self.target().s
        dim = s if self.family == "oblique" else self.d
        return -2 * self.beta / (dim + 2 * self.beta)


def _lifetime(cfg: RateConfig, n: int, multiplier: float, matrix: FeatureMatrix | None) -> float:
    target = cfg.target()
    if cfg.family == "oblique":
        eps_n = perp_norm21(matrix, SubspaceSpec.span(target.A_true))
        return lifetime_schedule("c1", n, target.s, cfg.d, cfg.beta, cfg.L, eps_n, multiplier).lifetime
    # axis-aligned: no subspace to exploit, the s = d schedule
    return lifetime_schedule("c1", n, cfg.d, cfg.d, cfg.beta, cfg.L, 0.0, multiplier).lifetime


def _spec(cfg: RateConfig, lam: float, matrix: FeatureMatrix | None) -> SamplerSpec:
    if cfg.family == "oblique":
        return SamplerSpec("oblique", lam, matrix=matrix.entries.tolist())
    return SamplerSpec("mondrian", lam)


def tune_multiplier(cfg: RateConfig, seed: int = 0, threads: int = 1) -> float:
    """Pick the schedule constant minimizing risk at the smallest n (coarse grid)."""
    target = cfg.target()
    matrix = exact_feature_matrix(target, cfg.eps) if cfg.family == "oblique" else None
    n = cfg.ns[0]
    best, best_c = np.inf, None
    for i, c in enumerate(cfg.multiplier_grid):
        lam = _lifetime(cfg, n, c, matrix)
        vals = risk_replicates(_spec(cfg, lam, matrix), cfg.M, target, cfg.mu, n, cfg.n_test,
                               cfg.tune_replicates, seed, prefix=(0, i), threads=threads)
        if vals.mean() < best:
            best, best_c = vals.mean(), float(c)
    return best_c


def rate_experiment(cfg: RateConfig, seed: int = 0, threads: int = 1) -> RateFit:
    target = cfg.target()
    matrix = exact_feature_matrix(target, cfg.eps) if cfg.family == "oblique" else None
    c = cfg.multiplier if cfg.multiplier is not None else tune_multiplier(cfg, seed, threads)
    grid = []
    for g, n in enumerate(cfg.ns):
        lam = _lifetime(cfg, n, c, matrix)
        est = estimate_risk(_spec(cfg, lam, matrix), target, cfg.mu, n, cfg.n_test, cfg.replicates, seed,
                            M=cfg.M, prefix=(1, g), threads=threads)
        grid.append(GridPoint(n, lam, cfg.M, est.mse, est.stderr))
    fit = fit_slope([p.n for p in grid], [p.risk for p in grid])
    return RateFit(grid, fit.slope, fit.stderr, c, cfg.family, cfg.expected_slope())


__all__ = ["GridPoint", "RateConfig", "RateFit", "SlopeFit", "exact_feature_matrix", "fit_slope",
           "mean_stderr", "rate_experiment", "tune_multiplier"]
