"""Static magnetic fields of filament assemblies and flux concentrators."""

from .elements import (
    MU0,
    CoreState,
    CurrentArc,
    CurrentSegment,
    FluxConcentratorCoil,
    WoundCoil,
    as_vec3,
    unit,
)
from .fields import (
    Amplification,
    FieldJacobian,
    SingularityError,
    StepTooLargeError,
    amplification_factor,
    compile_assembly,
    field_at,
    field_jacobian,
    field_of_arc,
    field_of_segment,
    shielding_path,
)

__all__ = [
    "MU0", "CoreState", "CurrentArc", "CurrentSegment", "FluxConcentratorCoil",
    "WoundCoil", "as_vec3", "unit", "Amplification", "FieldJacobian",
    "SingularityError", "StepTooLargeError", "amplification_factor",
    "compile_assembly", "field_at", "field_jacobian", "field_of_arc",
    "field_of_segment", "shielding_path",
]
