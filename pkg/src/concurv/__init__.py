"""Concentration, isoperimetry and discrete curvature on finite graphs."""

from .errors import ConcurvError
from .metric import FiniteMetricSpace, Graph, build_graph, family, parse_space, product, shortest_path_metric
from .lipschitz import ScalarField, max_variance, subgaussian_constant
from .transport import Distribution, TransportPlan, wasserstein

__all__ = [
    "ConcurvError",
    "Distribution",
    "FiniteMetricSpace",
    "Graph",
    "ScalarField",
    "TransportPlan",
    "build_graph",
    "family",
    "max_variance",
    "parse_space",
    "product",
    "shortest_path_metric",
    "subgaussian_constant",
    "wasserstein",
]

__version__ = "0.1.0"
