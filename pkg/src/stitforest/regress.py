"""Tree and forest regression on random tessellations.

Partitions are sampled without looking at the data; each leaf stores the
count and sum of the labels routed to it. Queries in empty leaves predict 0.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng as rngmod
from .errors import DimensionMismatch, ModelFormatError, SchemaVersionMismatch
from .geomcore import HPolytope
from .mondrian import AxisBox, WeightedMondrianSpec, mondrian_sample
from .oblique import FeatureMatrix, lifted_box, lifted_spec
from .tessellate import (DiscreteDirectionalDistribution, TessellationTree, stit_sample,
                         tree_from_dict, tree_to_dict)

MODEL_SCHEMA = "stitforest.model"
MODEL_VERSION = 1
SAMPLER_KINDS = ("mondrian", "stit", "oblique")


class OutOfWindowWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float, ndmin=2)
        Y = np.array(self.Y, dtype=float).reshape(-1)
        if X.shape[0] != Y.shape[0]:
            raise DimensionMismatch("X and Y differ in length")
        if X.shape[0] < 1:
            raise ValueError("dataset is empty")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("dataset has non-finite entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @classmethod
    def from_csv(cls, path) -> Dataset:
        """Header row, then d covariate columns and the label last."""
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, :-1], data[:, -1])

    def to_csv(self, path) -> None:
        header = ",".join([f"x{i}" for i in range(self.d)] + ["y"])
        np.savetxt(path, np.column_stack([self.X, self.Y]), delimiter=",", header=header,
                   comments="", fmt="%.17g")


@dataclass(frozen=True)
class SamplerSpec:
    """Partition sampler configuration.

    ``kind`` is ``mondrian`` (weights, default uniform), ``stit`` (directions
    and weights) or ``oblique`` (feature matrix). ``window`` is an optional
    fixed box ``(low, high)``; otherwise the padded bounding box of the
    training inputs is used.
    """

    kind: str
    lifetime: float
    weights: Optional[tuple] = None
    directions: Optional[tuple] = None
    matrix: Optional[tuple] = None
    window: Optional[tuple] = None
    padding: float = 1e-6

    def __post_init__(self):
        if self.kind not in SAMPLER_KINDS:
            raise ValueError(f"unknown sampler kind {self.kind!r}")
        if not self.lifetime > 0:
            raise ValueError("lifetime must be positive")
        if self.kind == "oblique" and self.matrix is None:
            raise ValueError("oblique sampler needs a feature matrix")
        if self.kind == "stit" and (self.directions is None or self.weights is None):
            raise ValueError("stit sampler needs directions and weights")
        for name in ("weights", "directions", "matrix", "window"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, _freeze(v))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "lifetime": self.lifetime, "padding": self.padding}
        for name in ("weights", "directions", "matrix", "window"):
            v = getattr(self, name)
            if v is not None:
                out[name] = _thaw(v)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> SamplerSpec:
        return cls(**data)

    def feature_matrix(self) -> FeatureMatrix | None:
        return FeatureMatrix(np.array(self.matrix)) if self.matrix is not None else None


def _freeze(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return tuple(_freeze(x) for x in v)
    return float(v)


def _thaw(v):
    if isinstance(v, tuple):
        return [_thaw(x) for x in v]
    return v


def training_window(X, spec: SamplerSpec) -> AxisBox:
    if spec.window is not None:
        low, high = (np.asarray(b, dtype=float) for b in spec.window)
        return AxisBox(low, high)
    low, high = X.min(axis=0), X.max(axis=0)
    margin = spec.padding * np.maximum(high - low, 1.0)
    return AxisBox(low - margin, high + margin)


def sample_partition(spec: SamplerSpec, box: AxisBox, rng) -> tuple[TessellationTree, np.ndarray | None]:
    """Draw a tessellation for ``box``; returns ``(tree, transform)``.

    For the oblique sampler the tree lives in the lifted space and points are
    routed through ``transform`` (``y = x @ A``).
    """
    d = box.dim
    if spec.kind == "mondrian":
        w = np.full(d, 1.0 / d) if spec.weights is None else np.asarray(spec.weights)
        if w.shape[0] != d:
            raise DimensionMismatch("weights and data dimension differ")
        return mondrian_sample(box, WeightedMondrianSpec(w, spec.lifetime), rng), None
    if spec.kind == "stit":
        phi = DiscreteDirectionalDistribution(np.asarray(spec.directions), np.asarray(spec.weights))
        if phi.dim != d:
            raise DimensionMismatch("directions and data dimension differ")
        return stit_sample(box.polytope, spec.lifetime, phi, rng), None
    A = spec.feature_matrix()
    if A.d != d:
        raise DimensionMismatch("feature matrix and data dimension differ")
    lbox = lifted_box(box.polytope, A)
    return mondrian_sample(lbox, lifted_spec(A, spec.lifetime), rng), A.entries


@dataclass
class TreeEstimator:
    tree: TessellationTree
    window: AxisBox
    counts: np.ndarray
    sums: np.ndarray
    transform: Optional[np.ndarray] = None

    def leaves_of(self, X) -> np.ndarray:
        X = np.array(X, dtype=float, ndmin=2)
        if X.shape[1] != self.window.dim:
            raise DimensionMismatch("query dimension differs from the model")
        outside = np.any((X < self.window.low) | (X > self.window.high), axis=1)
        if outside.any():
            warnings.warn(f"{int(outside.sum())} queries outside the window were clamped",
                          OutOfWindowWarning, stacklevel=3)
            X = np.clip(X, self.window.low, self.window.high)
        if self.transform is not None:
            X = X @ self.transform
        return self.tree.locate_many(X)

    def predict(self, X) -> np.ndarray:
        leaves = self.leaves_of(X)
        c = self.counts[leaves]
        s = self.sums[leaves]
        return np.where(c > 0, s / np.maximum(c, 1), 0.0)

    @property
    def n(self) -> int:
        return int(self.counts.sum())


def fit_tree(data: Dataset, spec: SamplerSpec, rng=None, *, box: AxisBox | None = None) -> TreeEstimator:
    box = training_window(data.X, spec) if box is None else box
    if box.dim != data.d:
        raise DimensionMismatch("window and data dimension differ")
    tree, transform = sample_partition(spec, box, rngmod.as_generator(rng))
    est = TreeEstimator(tree, box, np.zeros(tree.n_leaves, dtype=np.int64), np.zeros(tree.n_leaves), transform)
    leaves = est.leaves_of(data.X)
    est.counts = np.bincount(leaves, minlength=tree.n_leaves).astype(np.int64)
    est.sums = np.bincount(leaves, weights=data.Y, minlength=tree.n_leaves)
    return est


@dataclass
class ForestModel:
    trees: list
    spec: SamplerSpec
    seed: int
    streams: list = field(default_factory=list)

    @property
    def M(self) -> int:
        return len(self.trees)

    def predict(self, X) -> np.ndarray:
        return predict_forest(self, X)


def _fit_one(args):
    data, spec, seed, ids, box = args
    return fit_tree(data, spec, rngmod.stream(seed, *ids), box=box)


def fit_forest(data: Dataset, spec: SamplerSpec, M: int, seed: int = 0, *, streams=None,
               threads: int = 1) -> ForestModel:
    """Fit M trees; tree j draws from stream ``(seed, TREE, j)`` unless ``streams`` overrides."""
    if M < 1:
        raise ValueError("M must be at least 1")
    if streams is None:
        streams = [(rngmod.TREE, j) for j in range(M)]
    streams = [tuple(int(i) for i in s) for s in streams]
    if len(streams) != M:
        raise ValueError("need one stream id per tree")
    box = training_window(data.X, spec)
    jobs = [(data, spec, seed, ids, box) for ids in streams]
    if threads > 1 and M > 1:
        from .labx.parallel import ordered_map

        trees = ordered_map(_fit_one, jobs, threads)
    else:
        trees = [_fit_one(j) for j in jobs]
    return ForestModel(trees, spec, int(seed), [list(s) for s in streams])


def predict_tree(model: TreeEstimator, X) -> np.ndarray:
    return model.predict(X)


def predict_forest(model: ForestModel, X) -> np.ndarray:
    total = model.trees[0].predict(X)
    for t in model.trees[1:]:
        total = total + t.predict(X)
    return total / model.M


# -- persistence -------------------------------------------------------------------


def model_to_dict(model: ForestModel) -> dict:
    trees = []
    for t in model.trees:
        trees.append({
            "window": [t.window.low.tolist(), t.window.high.tolist()],
            "transform": None if t.transform is None else t.transform.tolist(),
            "tessellation": tree_to_dict(t.tree),
            "counts": t.counts.tolist(),
            "sums": t.sums.tolist(),
        })
    return {"schema": MODEL_SCHEMA, "version": MODEL_VERSION, "sampler": model.spec.to_dict(),
            "seed": model.seed, "streams": model.streams, "trees": trees}


def model_from_dict(data: dict) -> ForestModel:
    if not isinstance(data, dict) or data.get("schema") != MODEL_SCHEMA:
        raise ModelFormatError("not a stitforest model")
    if data.get("version") != MODEL_VERSION:
        raise SchemaVersionMismatch(f"model version {data.get('version')!r}, expected {MODEL_VERSION}")
    try:
        spec = SamplerSpec.from_dict(data["sampler"])
        trees = []
        for t in data["trees"]:
            tess = tree_from_dict(t["tessellation"])
            counts = np.asarray(t["counts"], dtype=np.int64)
            sums = np.asarray(t["sums"], dtype=float)
            if counts.shape != (tess.n_leaves,) or sums.shape != (tess.n_leaves,):
                raise ModelFormatError("leaf statistics do not match the tessellation")
            transform = None if t["transform"] is None else np.asarray(t["transform"], dtype=float)
            low, high = t["window"]
            trees.append(TreeEstimator(tess, AxisBox(low, high), counts, sums, transform))
        if not trees:
            raise ModelFormatError("model has no trees")
        return ForestModel(trees, spec, int(data["seed"]), data.get("streams", []))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model: {exc}") from exc


def save_model(model: ForestModel, path) -> None:
    atomic_write_text(path, json.dumps(model_to_dict(model)))


def load_model(path) -> ForestModel:
    with open(path) as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"cannot parse model file: {exc}") from exc
    return model_from_dict(data)


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)
