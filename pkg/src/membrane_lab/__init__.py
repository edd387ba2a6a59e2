"""Finite-difference laboratory for timelike extremal membranes near a hyperplane."""

from .exact_solutions import CausalType, HyperplaneParams
from .grid import Grid, SpaceTimeField

__version__ = "0.1.0"

__all__ = ["Grid", "SpaceTimeField", "HyperplaneParams", "CausalType", "__version__"]
