"""Lower bound on the risk of a single weighted-Mondrian tree for linear targets."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .. import rng as rngmod
from ..errors import InvalidTarget
from ..regress import SamplerSpec
from .parallel import ordered_map
from .risk import _risk_replicate, mean_stderr
from .targets import RidgeTarget


class SuboptBound(NamedTuple):
    bias: float
    variance: float
    bias_raw: float

    @property
    def total(self) -> float:
        return self.bias + self.variance


def suboptimality_bound(a, lifetime: float, weights, sigma: float, n: int) -> SuboptBound:
    """``sum_i a_i^2/(2 lam^2 w_i^2) (1 - 2/(lam w_i) - 1/(lam w_i)^2) + sigma^2 (n/(2^d lam^d prod w) + 1)^{-1}``.

    A coordinate whose factor is negative (``lam w_i <= 1 + sqrt 2``) contributes 0
    to ``bias``; ``bias_raw`` keeps the unclamped sum.
    """
    a = np.asarray(a, dtype=float)
    w = np.asarray(weights, dtype=float)
    if a.shape != w.shape:
        raise InvalidTarget("a and weights differ in length")
    if np.any(a == 0):
        raise InvalidTarget("every coefficient of a must be non-zero")
    lw = lifetime * w
    terms = a * a / (2.0 * lw * lw) * (1.0 - 2.0 / lw - 1.0 / (lw * lw))
    d = a.shape[0]
    var = sigma ** 2 / (n / (2.0 ** d * lifetime ** d * float(np.prod(w))) + 1.0)
    return SuboptBound(float(np.sum(np.maximum(terms, 0.0))), float(var), float(np.sum(terms)))


class SuboptResult(NamedTuple):
    lifetime: float
    weights: tuple
    empirical: float
    stderr: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.empirical >= self.bound - 3.0 * self.stderr


def suboptimality_check(a, lifetime: float, weights, sigma: float = 0.1, n: int = 10_000,
                        replicates: int = 20, seed: int = 0, *, n_test: int = 2000, prefix=(),
                        threads: int = 1) -> SuboptResult:
    """Empirical single-tree risk on ``Y = <a, X> + sigma N``, X uniform on [0,1]^d, window [0,1]^d."""
    a = np.asarray(a, dtype=float)
    bound = suboptimality_bound(a, lifetime, weights, sigma, n).total
    d = a.shape[0]
    target = RidgeTarget(a[None, :], "linear", sigma)
    spec = SamplerSpec("mondrian", lifetime, weights=tuple(np.asarray(weights, dtype=float)),
                       window=([0.0] * d, [1.0] * d))
    jobs = [(spec, 1, target, "uniform-cube", n, n_test, seed, (rngmod.SUBOPT, *prefix, r))
            for r in range(replicates)]
    m, se = mean_stderr(ordered_map(_risk_replicate, jobs, threads))
    return SuboptResult(float(lifetime), tuple(float(x) for x in weights), m, se, bound)
