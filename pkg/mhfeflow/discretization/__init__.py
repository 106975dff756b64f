"""MHFE discretization: elementary matrices, fluxes, wells, residual and Jacobian assembly."""

from mhfeflow.discretization.assembly import (
    BlockJacobian,
    FaceFluxes,
    FlowModel,
    Residual,
    assemble_jacobian,
    assemble_residual,
    face_fluxes,
    initial_state,
    initialize_faces,
)
from mhfeflow.discretization.mhfe import (
    ElemB,
    continuous_flux,
    elementary_B,
    elementary_matrices,
    local_fluxes,
    upwind_mobility,
)
from mhfeflow.discretization.wells import Well, WellModel, build_well_model, peaceman_wi

__all__ = [
    "BlockJacobian",
    "ElemB",
    "FaceFluxes",
    "FlowModel",
    "Residual",
    "Well",
    "WellModel",
    "assemble_jacobian",
    "assemble_residual",
    "build_well_model",
    "continuous_flux",
    "elementary_B",
    "elementary_matrices",
    "face_fluxes",
    "initial_state",
    "initialize_faces",
    "local_fluxes",
    "peaceman_wi",
    "upwind_mobility",
]
