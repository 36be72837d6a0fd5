"""Ridge-function regression targets ``f(x) = g(A x)`` and covariate laws."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from ..errors import InvalidTarget
from ..mondrian import AxisBox
from ..regress import Dataset
from ..rng import as_generator


class Link(NamedTuple):
    fn: Callable[[np.ndarray], np.ndarray]
    beta: float
    # Hoelder constant on a ball of the given radius in R^s
    holder: Callable[[float, int], float]
    doc: str


def _sum(z):
    return z.sum(axis=1)


LINKS: dict[str, Link] = {
    "linear": Link(_sum, 1.0, lambda r, s: np.sqrt(s), "g(z) = sum z_i; Lipschitz with L = sqrt(s)"),
    "abs-sum": Link(lambda z: np.abs(z).sum(axis=1), 1.0, lambda r, s: np.sqrt(s),
                    "g(z) = sum |z_i|; Lipschitz with L = sqrt(s)"),
    "sine": Link(lambda z: np.sin(z).sum(axis=1), 1.0, lambda r, s: np.sqrt(s),
                 "g(z) = sum sin(z_i); Lipschitz with L = sqrt(s)"),
    "quadratic": Link(lambda z: (z ** 2).sum(axis=1), 1.0, lambda r, s: 2.0 * r,
                      "g(z) = |z|^2; Lipschitz with L = 2r on the ball of radius r"),
    "constant": Link(lambda z: np.zeros(z.shape[0]), 1.0, lambda r, s: 0.0, "g(z) = 0"),
}

MU_KINDS = ("uniform-cube", "uniform-ball")


@dataclass(frozen=True)
class RidgeTarget:
    """``Y = g(A_true x) + sigma * N(0, 1)`` with A_true of shape s x d."""

    A_true: np.ndarray
    link: str = "linear"
    sigma: float = 0.0

    def __post_init__(self):
        A = np.array(self.A_true, dtype=float, ndmin=2)
        if self.link not in LINKS:
            raise InvalidTarget(f"unknown link {self.link!r}; known: {sorted(LINKS)}")
        if np.linalg.matrix_rank(A, tol=1e-9) < A.shape[0]:
            raise InvalidTarget("rows of A_true must be linearly independent")
        if self.sigma < 0:
            raise InvalidTarget("sigma must be non-negative")
        A.setflags(write=False)
        object.__setattr__(self, "A_true", A)

    @property
    def s(self) -> int:
        return self.A_true.shape[0]

    @property
    def d(self) -> int:
        return self.A_true.shape[1]

    @property
    def beta(self) -> float:
        return LINKS[self.link].beta

    def holder_constant(self, radius: float) -> float:
        """Hoelder constant of f on inputs of norm at most ``radius``."""
        opnorm = float(np.linalg.norm(self.A_true, 2))
        return LINKS[self.link].holder(opnorm * radius, self.s) * opnorm

    def f(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return LINKS[self.link].fn(X @ self.A_true.T)


def mu_window(mu: str, d: int) -> AxisBox:
    if mu == "uniform-cube":
        return AxisBox(np.zeros(d), np.ones(d))
    if mu == "uniform-ball":
        return AxisBox(-np.ones(d), np.ones(d))
    raise ValueError(f"unknown covariate law {mu!r}; known: {MU_KINDS}")


def sample_mu(mu: str, d: int, n: int, rng=None) -> np.ndarray:
    """n draws from the uniform law on [0,1]^d or on the unit ball."""
    g = as_generator(rng)
    if mu == "uniform-cube":
        return g.random((n, d))
    if mu == "uniform-ball":
        z = g.standard_normal((n, d))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        return z * g.random((n, 1)) ** (1.0 / d)
    raise ValueError(f"unknown covariate law {mu!r}; known: {MU_KINDS}")


def sample_dataset(target: RidgeTarget, mu: str, n: int, rng=None) -> Dataset:
    if n < 1:
        raise ValueError("n must be at least 1")
    g = as_generator(rng)
    X = sample_mu(mu, target.d, n, g)
    Y = target.f(X)
    if target.sigma > 0:
        Y = Y + target.sigma * g.standard_normal(n)
    return Dataset(X, Y)
