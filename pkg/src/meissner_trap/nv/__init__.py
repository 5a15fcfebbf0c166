"""NV-centre ODMR forward model, fitting and field inversion."""

from .hamiltonian import (
    D_ZFS,
    GAMMA_NV,
    MAGIC_ANGLE,
    SPIN1,
    DiamondCut100,
    SpinOperators,
    ZeemanModel,
    hamiltonian,
    jacobi_eigh,
    transition_frequencies,
)
from .inversion import (
    FieldEstimate,
    NoSolutionError,
    UnderdeterminedError,
    invert_field_magnitude,
    reconstruct_field_vector,
)
from .odmr import (
    FitNotConvergedError,
    LorentzianDipFitter,
    ODMRLine,
    ODMRSpectrum,
    TooFewDipsError,
    detect_dips,
    fit_lorentzians,
    lorentzian,
    odmr_forward,
)
from .sensing import (
    OdmrSweep,
    axial_resolution,
    gradient_broadened_linewidth,
    odmr_current_sweep,
    rabi_rate,
)

__all__ = [
    "D_ZFS", "GAMMA_NV", "MAGIC_ANGLE", "SPIN1", "DiamondCut100", "SpinOperators",
    "ZeemanModel", "hamiltonian", "jacobi_eigh", "transition_frequencies",
    "FieldEstimate", "NoSolutionError", "UnderdeterminedError", "invert_field_magnitude",
    "reconstruct_field_vector", "FitNotConvergedError", "LorentzianDipFitter", "ODMRLine",
    "ODMRSpectrum", "TooFewDipsError", "detect_dips", "fit_lorentzians", "lorentzian",
    "odmr_forward", "OdmrSweep", "axial_resolution", "gradient_broadened_linewidth",
    "odmr_current_sweep", "rabi_rate",
]
