"""STIT, Mondrian and oblique-Mondrian tessellations with tree and forest regression."""

from .errors import StitError
from .geomcore import HPolytope, Hyperplane, Zonotope
from .mondrian import AxisBox, WeightedMondrianSpec, mondrian_sample
from .oblique import FeatureMatrix, SubspaceSpec, dirdist_from_matrix, oblique_sample
from .regress import Dataset, ForestModel, SamplerSpec, fit_forest, fit_tree, predict_forest, predict_tree
from .tessellate import DiscreteDirectionalDistribution, TessellationTree, locate, stit_sample

__version__ = "0.1.0"

__all__ = [
    "AxisBox", "Dataset", "DiscreteDirectionalDistribution", "FeatureMatrix", "ForestModel", "HPolytope",
    "Hyperplane", "SamplerSpec", "StitError", "SubspaceSpec", "TessellationTree", "WeightedMondrianSpec",
    "Zonotope", "dirdist_from_matrix", "fit_forest", "fit_tree", "locate", "mondrian_sample", "oblique_sample",
    "predict_forest", "predict_tree", "stit_sample",
]
