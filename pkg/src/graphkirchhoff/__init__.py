"""Ground states and sign-changing ground states of a Kirchhoff problem with
logarithmic nonlinearity on weighted finite graphs."""

from .energy import ModelParams, Problem, energy, gateaux, gradient, residual
from .graph_core import Domain, GraphDomain, IngestError, ValidationError, WeightedGraph
from .nehari import ProjectionError, pair_project, scalar_project
from .solver import ConvergenceError, SolveConfig, SolveReport, solve

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "Domain", "GraphDomain", "IngestError", "ModelParams", "Problem", "ProjectionError",
    "SolveConfig", "SolveReport", "ValidationError", "WeightedGraph", "energy", "gateaux", "gradient",
    "pair_project", "residual", "scalar_project", "solve",
]
