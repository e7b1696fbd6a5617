"""Hierarchical stochastic unit-commitment and dispatch simulation."""

__version__ = "0.1.0"

from .simplex import BACKEND as SOLVER_BACKEND  # noqa: F401
