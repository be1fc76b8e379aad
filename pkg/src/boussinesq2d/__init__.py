"""2D Boussinesq water-wave systems on triangulated rectangles."""

from .mesh import TriMesh, build_periodic_map, build_rect_mesh, element_geometry
from .model import Coefficients, coefficients, family_preset, validate
from .assembly import BoundarySpec
from .stepper import SimState, run, step
from .adapt import AdaptParams, adapt_mesh, transfer
from .config import RunConfig, parse_config, preset

__all__ = [
    "TriMesh", "build_rect_mesh", "build_periodic_map", "element_geometry",
    "Coefficients", "coefficients", "family_preset", "validate",
    "BoundarySpec", "SimState", "run", "step",
    "AdaptParams", "adapt_mesh", "transfer",
    "RunConfig", "parse_config", "preset",
]
