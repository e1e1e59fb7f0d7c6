"""Poisson structures, constrained submanifolds and induced brackets."""
from .errors import PoissonDiracError
from .expr import CoordinateChart, ScalarField, parse
from .poisson import BivectorField, bracket_eval, jacobiator, max_jacobiator
from .submanifold import GraphSubmanifold, SplitConstraint, check_pd_condition
from .reduction import dirac_bracket, induced_bivector_graph, pd_bracket_split
from .eps_series import EpsBivectorSeries, series_reduced_bivector

__version__ = "0.1.0"

__all__ = [
    "PoissonDiracError", "CoordinateChart", "ScalarField", "parse",
    "BivectorField", "bracket_eval", "jacobiator", "max_jacobiator",
    "GraphSubmanifold", "SplitConstraint", "check_pd_condition",
    "dirac_bracket", "induced_bivector_graph", "pd_bracket_split",
    "EpsBivectorSeries", "series_reduced_bivector",
]
