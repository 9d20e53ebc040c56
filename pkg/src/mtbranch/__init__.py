"""Multitype continuous-time branching processes with immigration.

Monte Carlo simulation, Laplace transforms, long-time limits and the two-type
transient mean, with an acceptance harness comparing them.
"""
from .arrivals import ConstantIntensity, ExponentialIntensity, GppParams, NoArrivals, TableIntensity
from .model import BranchingModel, OffspringLaw
from .spectral import PerronData, build_mean_matrix, perron

__version__ = "0.1.0"

__all__ = [
    "BranchingModel", "OffspringLaw", "PerronData", "build_mean_matrix", "perron",
    "ConstantIntensity", "ExponentialIntensity", "GppParams", "NoArrivals", "TableIntensity",
]
