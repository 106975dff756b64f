"""Lowest-order mixed hybrid finite elements on hexahedra.

Every cell carries six face fluxes (outward, m^3/d per unit mobility and pressure) in the
Piola-mapped RT0 space of the reference cube ``[0, 1]^3``. The elementary matrix is

    B_ij = ∫_E η_iᵀ K⁻¹ η_j dΩ,

evaluated with a tensor Gauss rule, and the one-sided phase fluxes of a cell are

    q_α = λ*_α B⁻¹ [(p − γ_α z) 1 − (π − γ_α ζ)].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from mhfeflow.errors import DiscretizationError, GeometryError, InvalidArgumentError
from mhfeflow.grid import HexMesh
from mhfeflow.physics import Phase, mobility

if TYPE_CHECKING:
    from mhfeflow.discretization.assembly import FlowModel
    from mhfeflow.physics import State

# Potentials closer than this (relative) count as equal when picking the upstream cell.
UPWIND_TIE_RTOL = 1e-14


def gauss_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre points and weights on ``[0, 1]^3``."""
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    pts = np.array(np.meshgrid(x, x, x, indexing="ij")).reshape(3, -1).T
    wts = np.einsum("i,j,k->ijk", w, w, w).ravel()
    return pts, wts


def _reference_basis(xi: np.ndarray) -> np.ndarray:
    """``(6, 3)`` RT0 basis at a reference point; unit outward flux through its own face."""
    s, t, u = xi
    return np.array(
        [
            [s - 1.0, 0.0, 0.0],
            [s, 0.0, 0.0],
            [0.0, t - 1.0, 0.0],
            [0.0, t, 0.0],
            [0.0, 0.0, u - 1.0],
            [0.0, 0.0, u],
        ]
    )


def _geometric_jacobian(X: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """``(n, 3, 3)`` Jacobian ``∂x/∂ξ`` of the trilinear map at ``xi``.

    ``X`` holds the corners as ``(n, k, j, i, 3)``. Built from edge differences, so an
    axis-aligned box gets exact zeros off the diagonal.
    """
    s, t, u = xi
    fs = np.array([1.0 - s, s])
    ft = np.array([1.0 - t, t])
    fu = np.array([1.0 - u, u])
    J = np.empty((X.shape[0], 3, 3))
    J[:, :, 0] = np.einsum("nkjc,k,j->nc", X[:, :, :, 1] - X[:, :, :, 0], fu, ft)
    J[:, :, 1] = np.einsum("nkic,k,i->nc", X[:, :, 1, :] - X[:, :, 0, :], fu, fs)
    J[:, :, 2] = np.einsum("njic,j,i->nc", X[:, 1] - X[:, 0], ft, fs)
    return J


def mass_matrices(corners: np.ndarray, perm: np.ndarray, order: int = 2) -> np.ndarray:
    """``(n, 6, 6)`` elementary matrices for cells with ``(n, 8, 3)`` corners.

    Raises
    ------
    GeometryError
        When the geometric Jacobian is not positive at a quadrature point.
    """
    corners = np.asarray(corners, dtype=float)
    X = corners.reshape(-1, 2, 2, 2, 3)
    k_inv = 1.0 / np.asarray(perm, dtype=float)
    B = np.zeros((corners.shape[0], 6, 6))
    pts, wts = gauss_rule(order)
    for xi, w in zip(pts, wts):
        J = _geometric_jacobian(X, xi)
        det = np.linalg.det(J)
        bad = np.flatnonzero(~(det > 0.0))
        if bad.size:
            cell = int(bad[0])
            raise GeometryError(
                f"singular geometric mapping in cell {cell} (det J = {det[cell]:.3g})", cell=cell
            )
        Jw = np.einsum("nid,kd->nki", J, _reference_basis(xi))
        B += (w / det)[:, None, None] * np.einsum("nki,ni,nli->nkl", Jw, k_inv, Jw)
    return 0.5 * (B + np.transpose(B, (0, 2, 1)))


@dataclass(frozen=True, eq=False)
class ElemB:
    """Per-cell ``B``, ``B⁻¹`` (exactly symmetric) and the row sums ``L`` of ``B⁻¹``."""

    B: np.ndarray
    Binv: np.ndarray
    L: np.ndarray

    @property
    def diag(self) -> np.ndarray:
        return np.diagonal(self.Binv, axis1=1, axis2=2)


def elementary_matrices(mesh: HexMesh, perm: np.ndarray, order: int = 2) -> ElemB:
    B = mass_matrices(mesh.nodes[mesh.cells], perm, order=order)
    Binv = np.linalg.inv(B)
    Binv = 0.5 * (Binv + np.transpose(Binv, (0, 2, 1)))
    return ElemB(B=B, Binv=Binv, L=Binv.sum(axis=2))


def elementary_B(mesh: HexMesh, cell: int, K, order: int = 2) -> ElemB:
    """Elementary matrices of a single cell with diagonal permeability ``K = (kx, ky, kz)``."""
    if not 0 <= cell < mesh.n_cells:
        raise InvalidArgumentError(f"cell index {cell} out of range [0, {mesh.n_cells})")
    K = np.broadcast_to(np.asarray(K, dtype=float), (3,))
    if not np.all(K > 0):
        raise InvalidArgumentError(f"permeability must be positive, got {K}")
    B = mass_matrices(mesh.nodes[mesh.cells[cell : cell + 1]], K[None, :], order=order)
    Binv = np.linalg.inv(B)
    Binv = 0.5 * (Binv + np.transpose(Binv, (0, 2, 1)))
    return ElemB(B=B[0], Binv=Binv[0], L=Binv[0].sum(axis=1))


# ---------------------------------------------------------------------------
# Potentials, upwinding and fluxes
# ---------------------------------------------------------------------------


def upwind_cells(face_cells: np.ndarray, potential: np.ndarray) -> np.ndarray:
    """Upstream cell of every face for a cell potential field.

    Boundary faces take their only cell; near-ties go to the lower cell index.
    """
    c0 = face_cells[:, 0]
    c1 = face_cells[:, 1]
    interior = c1 >= 0
    up = c0.copy()
    a = potential[c0[interior]]
    b = potential[c1[interior]]
    tie = np.abs(a - b) <= UPWIND_TIE_RTOL * np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    lower = np.minimum(c0[interior], c1[interior])
    up[interior] = np.where(tie, lower, np.where(a > b, c0[interior], c1[interior]))
    return up


def one_sided_terms(
    elem: ElemB,
    cell_faces: np.ndarray,
    p_elem: np.ndarray,
    p_face: np.ndarray,
    z_cell: np.ndarray,
    z_face: np.ndarray,
    gamma: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per cell and local face: ``(LΦ - B⁻¹u, Λ, u)`` with ``Φ = p - γz`` and ``u = π - γζ``.

    The first array is the one-sided flux per unit mobility; ``Λ`` is the same quantity with
    the face's own multiplier removed, the building block of the continuous flux.
    """
    phi = p_elem - gamma * z_cell
    u = p_face[cell_faces] - gamma * z_face[cell_faces]
    s = np.einsum("nij,nj->ni", elem.Binv, u)
    lphi = elem.L * phi[:, None]
    qhat = lphi - s
    lam = qhat + elem.diag * u
    return qhat, lam, u


def continuous_flux_values(
    elem: ElemB, face_cells: np.ndarray, face_local: np.ndarray, lam_terms: np.ndarray,
    faces: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Strong-continuity flux per unit mobility ``Ψ`` on interior ``faces``, and ``1/(a+a')``."""
    c0, c1 = face_cells[faces, 0], face_cells[faces, 1]
    i0, i1 = face_local[faces, 0], face_local[faces, 1]
    a0 = elem.diag[c0, i0]
    a1 = elem.diag[c1, i1]
    denom = a0 + a1
    bad = np.flatnonzero(~(denom > 0.0))
    if bad.size:
        f = int(faces[bad[0]])
        raise DiscretizationError(f"degenerate cell pair across face {f}")
    c = 1.0 / denom
    psi = c * (a1 * lam_terms[c0, i0] - a0 * lam_terms[c1, i1])
    return psi, c


def local_fluxes(model: "FlowModel", cell: int, state: "State", phase: Phase) -> np.ndarray:
    """Six outward one-sided phase fluxes of ``cell`` (m^3/d) with upwinded mobilities."""
    gamma = model.gamma(phase)
    qhat, _, _ = one_sided_terms(
        model.elem, model.mesh.cell_faces, state.p_elem, state.p_face,
        model.z_cell, model.z_face, gamma,
    )
    lam_face = upwind_mobility(model, state, phase)
    return lam_face[model.mesh.cell_faces[cell]] * qhat[cell]


def upwind_mobility(model: "FlowModel", state: "State", phase: Phase) -> np.ndarray:
    """``λ*_α`` per face, taken from the cell with the higher phase potential."""
    up = upwind_cells(model.mesh.face_cells, state.p_elem - model.gamma(phase) * model.z_cell)
    lam, _ = mobility(model.fluid, state.sw, phase)
    return lam[up]


def continuous_flux(model: "FlowModel", face: int, state: "State", phase: Phase) -> float:
    """Phase flux across an interior face under strong flux continuity, positive from
    ``face_cells[face, 0]`` to ``face_cells[face, 1]``."""
    mesh = model.mesh
    if mesh.face_cells[face, 1] < 0:
        raise InvalidArgumentError(f"face {face} is on the boundary")
    _, lam_terms, _ = one_sided_terms(
        model.elem, mesh.cell_faces, state.p_elem, state.p_face,
        model.z_cell, model.z_face, model.gamma(phase),
    )
    psi, _ = continuous_flux_values(
        model.elem, mesh.face_cells, mesh.face_local, lam_terms, np.array([face])
    )
    return float(upwind_mobility(model, state, phase)[face] * psi[0])
