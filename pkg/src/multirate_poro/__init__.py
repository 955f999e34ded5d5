"""Multirate finite-element solver for fluid-saturated poroelasticity."""

from .cases import CaseDefinition, get_case, test1_manufactured, test2_barry_mercer, test3_footing, verification_neumann
from .errors import ConfigError, InvalidArgumentError, IterationFailureError, SingularSystemError, StepError
from .fem import build_spaces
from .mesh import build_unit_square_mesh
from .model import PhysicalParams
from .scheme import MultirateSolver, TimeGrid, Trajectory, run

__all__ = [
    "CaseDefinition",
    "ConfigError",
    "InvalidArgumentError",
    "IterationFailureError",
    "MultirateSolver",
    "PhysicalParams",
    "SingularSystemError",
    "StepError",
    "TimeGrid",
    "Trajectory",
    "build_spaces",
    "build_unit_square_mesh",
    "get_case",
    "run",
    "test1_manufactured",
    "test2_barry_mercer",
    "test3_footing",
    "verification_neumann",
]
