"""Singular expansion of the magnetostatic potential near a surface fluxon."""
from .errors import *  # noqa: F401,F403
from .expansion import (
    Charge,
    ExpansionParams,
    FieldVector,
    PotentialBreakdown,
    b_field_singular,
    psi0,
    psi1r,
    psi1s,
    psi_singular,
    sphere_singular_potential,
)
from .geometry import LocalFrame, LocalPoint, SurfacePatch, build_local_frame, height_function

__version__ = "0.1.0"
