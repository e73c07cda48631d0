"""Maximal flows through random lattice domains, their flow constants and explicit cutsets."""

__version__ = "0.1.0"

from .capacity import CapacityField, CapacityLaw, cramer_rate, tilt
from .errors import InfeasibleError, PreconditionError
from .flow import FlowProblem, is_cutset, max_flow, min_cut, validate_stream
from .lattice import ContinuousDomain, LatticeDomain, discretize, edges_in

__all__ = [
    "CapacityField", "CapacityLaw", "ContinuousDomain", "FlowProblem", "InfeasibleError", "LatticeDomain",
    "PreconditionError", "cramer_rate", "discretize", "edges_in", "is_cutset", "max_flow", "min_cut", "tilt",
    "validate_stream", "__version__",
]
