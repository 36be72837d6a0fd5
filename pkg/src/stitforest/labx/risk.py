"""Monte-Carlo risk and bias estimation for tree and forest estimators."""

from __future__ import annotations

import dataclasses
from typing import NamedTuple

import numpy as np

from .. import rng as rngmod
from ..regress import SamplerSpec, TreeEstimator, fit_forest, predict_forest, sample_partition
from .parallel import ordered_map
from .targets import RidgeTarget, mu_window, sample_dataset, sample_mu


class RiskEstimate(NamedTuple):
    mse: float
    stderr: float
    n_test: int
    replicates: int


def mean_stderr(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))


def with_window(spec: SamplerSpec, mu: str, d: int) -> SamplerSpec:
    """Pin the sampler window to the support box of mu unless one is set."""
    if spec.window is not None:
        return spec
    box = mu_window(mu, d)
    return dataclasses.replace(spec, window=(box.low.tolist(), box.high.tolist()))


def _risk_replicate(args) -> float:
    spec, M, target, mu, n_train, n_test, seed, ids = args
    data = sample_dataset(target, mu, n_train, rngmod.stream(seed, *ids, rngmod.DATA))
    forest = fit_forest(data, spec, M, seed, streams=[(*ids, rngmod.TREE, j) for j in range(M)])
    Xt = sample_mu(mu, target.d, n_test, rngmod.stream(seed, *ids, rngmod.TEST))
    err = predict_forest(forest, Xt) - target.f(Xt)
    return float(np.mean(err * err))


def risk_replicates(spec: SamplerSpec, M: int, target: RidgeTarget, mu: str, n_train: int, n_test: int,
                    replicates: int, seed: int = 0, prefix=(), threads: int = 1) -> np.ndarray:
    """Per-replicate test MSE against the noise-free target.

    Replicate r uses streams under ``(seed, RISK, *prefix, r)`` for its data,
    trees and test points.
    """
    spec = with_window(spec, mu, target.d)
    jobs = [(spec, M, target, mu, n_train, n_test, seed, (rngmod.RISK, *prefix, r)) for r in range(replicates)]
    return np.asarray(ordered_map(_risk_replicate, jobs, threads))


def estimate_risk(spec: SamplerSpec, target: RidgeTarget, mu: str, n_train: int, n_test: int,
                  replicates: int, seed: int = 0, *, M: int = 1, prefix=(), threads: int = 1) -> RiskEstimate:
    if min(n_train, n_test, replicates, M) < 1:
        raise ValueError("counts must be positive")
    vals = risk_replicates(spec, M, target, mu, n_train, n_test, replicates, seed, prefix, threads)
    mse, se = mean_stderr(vals)
    return RiskEstimate(mse, se, n_test, replicates)


class BiasEstimate(NamedTuple):
    bias: float
    stderr: float
    replicates: int


def _bias_replicate(args) -> float:
    spec, target, mu, n_x, n_mc, seed, ids = args
    box = mu_window(mu, target.d)
    tree, transform = sample_partition(spec, box, rngmod.stream(seed, *ids, rngmod.TREE))
    n_leaves = tree.n_leaves
    est = TreeEstimator(tree, box, np.zeros(n_leaves, dtype=np.int64), np.zeros(n_leaves), transform)
    # cell-conditional means of f from about n_mc draws of mu per cell
    Xmc = sample_mu(mu, target.d, n_mc * n_leaves, rngmod.stream(seed, *ids, rngmod.SAMPLE))
    leaves = est.leaves_of(Xmc)
    est.counts = np.bincount(leaves, minlength=n_leaves).astype(np.int64)
    est.sums = np.bincount(leaves, weights=target.f(Xmc), minlength=n_leaves)
    X = sample_mu(mu, target.d, n_x, rngmod.stream(seed, *ids, rngmod.TEST))
    fx = target.f(X)
    seen = est.counts[est.leaves_of(X)] > 0
    # cells that caught no MC draw have negligible mass and contribute nothing
    dev = np.where(seen, est.predict(X) - fx, 0.0)
    return float(np.mean(dev * dev))


def estimate_bias(target: RidgeTarget, spec: SamplerSpec, mu: str = "uniform-cube", n_x: int = 2000,
                  n_mc: int = 200, replicates: int = 50, seed: int = 0, *, prefix=(),
                  threads: int = 1) -> BiasEstimate:
    """MC estimate of ``E[(f(X) - fbar(X))^2]`` with fbar the cell-conditional mean of f.

    The sampler's lifetime sets the tessellation scale; windows are the
    support box of mu.
    """
    spec = with_window(spec, mu, target.d)
    jobs = [(spec, target, mu, n_x, n_mc, seed, (rngmod.BIAS, *prefix, r)) for r in range(replicates)]
    vals = ordered_map(_bias_replicate, jobs, threads)
    m, se = mean_stderr(vals)
    return BiasEstimate(m, se, replicates)
