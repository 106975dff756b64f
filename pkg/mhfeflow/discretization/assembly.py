"""Residual and analytical Jacobian of the fully implicit MHFE-FV system.

Unknowns are ordered ``[π (faces); p (cells); p_bh (wells); Sw (cells)]`` and equations
``[R_π; R_p (cell rows, then well rows); R_s]``. All residual parts are volume rates (m^3/d)
except Dirichlet face rows, which read ``π - p̄``.

Face rows carry the total-flux continuity scaled by ``λ_ref / λ*_t``:

    R_π(f) = -λ_ref Σ_sides [ (B⁻¹(p 1 - π))_i - g_f (B⁻¹(z 1 - ζ))_i ],
    g_f = γ_w + f_o (γ_o - γ_w),   f_o = λ*_o / (λ*_o + λ*_w),

so ``J_ππ`` is the assembled ``λ_ref B⁻¹``: symmetric positive definite and independent of the
state. ``J_πs`` is non-zero only through ``g_f`` when gravity is on.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from mhfeflow.discretization.mhfe import (
    ElemB,
    continuous_flux_values,
    elementary_matrices,
    one_sided_terms,
    upwind_cells,
)
from mhfeflow.discretization.wells import WellModel
from mhfeflow.errors import InvalidArgumentError
from mhfeflow.grid import HexMesh
from mhfeflow.physics import (
    FluidProps,
    Phase,
    RockProps,
    State,
    fractional_flow,
    mobility,
    porosity,
)

logger = logging.getLogger(__name__)

# local index -> the five other local indices of the cell
_OTHERS = np.array([[j for j in range(6) if j != i] for i in range(6)])

BLOCK_NAMES = ("pipi", "pip", "pis", "ppi", "pp", "ps", "spi", "sp", "ss")


@dataclass(frozen=True, eq=False)
class FlowModel:
    """Everything the assembly needs that does not change during a run."""

    mesh: HexMesh
    rock: RockProps
    fluid: FluidProps
    wells: WellModel
    gravity: bool = False
    dirichlet_faces: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    dirichlet_values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    elem: ElemB = field(init=False, repr=False)
    z_cell: np.ndarray = field(init=False, repr=False)
    z_face: np.ndarray = field(init=False, repr=False)
    bz: np.ndarray = field(init=False, repr=False)
    gsum: np.ndarray = field(init=False, repr=False)
    is_dirichlet: np.ndarray = field(init=False, repr=False)
    interior_faces: np.ndarray = field(init=False, repr=False)
    j_pipi: sparse.csr_matrix = field(init=False, repr=False)
    j_pip: sparse.csr_matrix = field(init=False, repr=False)

    def __post_init__(self) -> None:
        mesh = self.mesh
        if self.rock.n_cells != mesh.n_cells:
            raise InvalidArgumentError(
                f"rock has {self.rock.n_cells} cells, mesh has {mesh.n_cells}"
            )
        d_faces = np.asarray(self.dirichlet_faces, dtype=np.int64)
        d_values = np.asarray(self.dirichlet_values, dtype=float)
        if d_faces.shape != d_values.shape:
            raise InvalidArgumentError("dirichlet_faces and dirichlet_values differ in length")
        if d_faces.size and not np.all(mesh.boundary_flag[d_faces]):
            raise InvalidArgumentError("Dirichlet conditions are only allowed on boundary faces")
        is_dirichlet = np.zeros(mesh.n_faces, dtype=bool)
        is_dirichlet[d_faces] = True

        elem = elementary_matrices(mesh, self.rock.perm)
        z_cell = np.array(mesh.cell_depth)
        z_face = np.array(mesh.face_depth)
        cf = mesh.cell_faces
        bz = np.einsum("nij,nj->ni", elem.Binv, z_cell[:, None] - z_face[cf])
        gsum = np.bincount(cf.ravel(), bz.ravel(), minlength=mesh.n_faces)

        lam_ref = self.fluid.reference_mobility
        n_f, n_e = mesh.n_faces, mesh.n_cells
        keep = ~is_dirichlet[cf]  # (n, 6) rows that carry continuity
        rows = np.repeat(cf[:, :, None], 6, axis=2)
        cols = np.repeat(cf[:, None, :], 6, axis=1)
        mask = np.repeat(keep[:, :, None], 6, axis=2)
        j_pipi = _csr(
            np.concatenate([rows[mask], d_faces]),
            np.concatenate([cols[mask], d_faces]),
            np.concatenate([lam_ref * elem.Binv[mask], np.ones(d_faces.size)]),
            (n_f, n_f),
        )
        # exact zeros between face directions of axis-aligned cells
        j_pipi.eliminate_zeros()
        cells = np.repeat(np.arange(n_e)[:, None], 6, axis=1)
        j_pip = _csr(
            cf[keep], cells[keep], -lam_ref * elem.L[keep], (n_f, n_e + self.wells.n_wells)
        )

        for name, value in (
            ("dirichlet_faces", d_faces),
            ("dirichlet_values", d_values),
            ("elem", elem),
            ("z_cell", z_cell),
            ("z_face", z_face),
            ("bz", bz),
            ("gsum", gsum),
            ("is_dirichlet", is_dirichlet),
            ("interior_faces", np.flatnonzero(mesh.face_cells[:, 1] >= 0)),
            ("j_pipi", j_pipi),
            ("j_pip", j_pip),
        ):
            object.__setattr__(self, name, value)

    @property
    def n_f(self) -> int:
        return self.mesh.n_faces

    @property
    def n_e(self) -> int:
        return self.mesh.n_cells

    @property
    def n_w(self) -> int:
        return self.wells.n_wells

    @property
    def n_pressure(self) -> int:
        """Size of the P block: cell pressures plus well pressures."""
        return self.n_e + self.n_w

    @property
    def size(self) -> int:
        return self.n_f + self.n_pressure + self.n_e

    def gamma(self, phase: Phase) -> float:
        """Specific weight used in potentials; zero when gravity is off."""
        return self.fluid.specific_weight(phase) if self.gravity else 0.0


@dataclass
class Residual:
    r_pi: np.ndarray
    r_p: np.ndarray
    r_s: np.ndarray

    def norms(self) -> tuple[float, float, float]:
        return (
            float(np.linalg.norm(self.r_pi)),
            float(np.linalg.norm(self.r_p)),
            float(np.linalg.norm(self.r_s)),
        )

    def vector(self) -> np.ndarray:
        return np.concatenate([self.r_pi, self.r_p, self.r_s])


@dataclass
class BlockJacobian:
    """Nine CSR blocks in the 3×3 layout, with helpers for the 2×2 regrouping."""

    pipi: sparse.csr_matrix
    pip: sparse.csr_matrix
    pis: sparse.csr_matrix
    ppi: sparse.csr_matrix
    pp: sparse.csr_matrix
    ps: sparse.csr_matrix
    spi: sparse.csr_matrix
    sp: sparse.csr_matrix
    ss: sparse.csr_matrix

    @property
    def sizes(self) -> tuple[int, int, int]:
        return self.pipi.shape[0], self.pp.shape[0], self.ss.shape[0]

    @property
    def n(self) -> int:
        return sum(self.sizes)

    def blocks(self) -> Dict[str, sparse.csr_matrix]:
        return {name: getattr(self, name) for name in BLOCK_NAMES}

    def pressure_block(self) -> sparse.csr_matrix:
        """``J_PP`` over ``[π; p; p_bh]``."""
        return sparse.bmat([[self.pipi, self.pip], [self.ppi, self.pp]], format="csr")

    def regroup(self) -> Dict[str, sparse.csr_matrix]:
        return {
            "PP": self.pressure_block(),
            "Ps": sparse.vstack([self.pis, self.ps], format="csr"),
            "sP": sparse.hstack([self.spi, self.sp], format="csr"),
            "ss": self.ss,
        }

    def to_csr(self) -> sparse.csr_matrix:
        return sparse.bmat(
            [
                [self.pipi, self.pip, self.pis],
                [self.ppi, self.pp, self.ps],
                [self.spi, self.sp, self.ss],
            ],
            format="csr",
        )

    def diagonal(self) -> np.ndarray:
        return np.concatenate([self.pipi.diagonal(), self.pp.diagonal(), self.ss.diagonal()])

    def split(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n_f, n_p, _ = self.sizes
        return x[:n_f], x[n_f : n_f + n_p], x[n_f + n_p :]

    @staticmethod
    def join(x_pi: np.ndarray, x_p: np.ndarray, x_s: np.ndarray) -> np.ndarray:
        return np.concatenate([x_pi, x_p, x_s])

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x_pi, x_p, x_s = self.split(x)
        return np.concatenate(
            [
                self.pipi @ x_pi + self.pip @ x_p + self.pis @ x_s,
                self.ppi @ x_pi + self.pp @ x_p + self.ps @ x_s,
                self.spi @ x_pi + self.sp @ x_p + self.ss @ x_s,
            ]
        )


@dataclass
class FaceFluxes:
    """Phase fluxes per face (positive from ``face_cells[:, 0]`` to ``face_cells[:, 1]``, or
    out of the domain) and perforation outflows (negative = injection)."""

    oil: np.ndarray
    water: np.ndarray
    well_oil: np.ndarray
    well_water: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.oil + self.water


# ---------------------------------------------------------------------------
# Shared per-phase evaluation
# ---------------------------------------------------------------------------


@dataclass
class _PhaseTerms:
    up: np.ndarray
    lam_cell: np.ndarray
    dlam_cell: np.ndarray
    qhat: np.ndarray
    lam_terms: np.ndarray
    psi: np.ndarray
    c: np.ndarray

    @property
    def lam_face(self) -> np.ndarray:
        return self.lam_cell[self.up]

    @property
    def dlam_face(self) -> np.ndarray:
        return self.dlam_cell[self.up]


def _evaluate(model: FlowModel, state: State) -> Dict[Phase, _PhaseTerms]:
    mesh = model.mesh
    terms: Dict[Phase, _PhaseTerms] = {}
    for phase in (Phase.OIL, Phase.WATER):
        gamma = model.gamma(phase)
        qhat, lam_terms, _ = one_sided_terms(
            model.elem, mesh.cell_faces, state.p_elem, state.p_face,
            model.z_cell, model.z_face, gamma,
        )
        psi, c = continuous_flux_values(
            model.elem, mesh.face_cells, mesh.face_local, lam_terms, model.interior_faces
        )
        lam, dlam = mobility(model.fluid, state.sw, phase)
        terms[phase] = _PhaseTerms(
            up=upwind_cells(mesh.face_cells, state.p_elem - gamma * model.z_cell),
            lam_cell=lam,
            dlam_cell=dlam,
            qhat=qhat,
            lam_terms=lam_terms,
            psi=psi,
            c=c,
        )
    return terms


def _mixture_weight(
    model: FlowModel, terms: Dict[Phase, _PhaseTerms]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``g_f`` per face and its derivatives w.r.t. the oil- and water-upstream saturations."""
    n_f = model.n_f
    if not model.gravity:
        zero = np.zeros(n_f)
        return zero, zero, zero
    oil, water = terms[Phase.OIL], terms[Phase.WATER]
    lo, lw = oil.lam_face, water.lam_face
    lt = lo + lw
    flowing = lt > 0.0
    safe = np.where(flowing, lt, 1.0)
    # Faces where both upstream mobilities vanish carry no flux; weight the phases equally.
    f_o = np.where(flowing, lo / safe, 0.5)
    dgo = model.fluid.gamma_o - model.fluid.gamma_w
    g = model.fluid.gamma_w + f_o * dgo
    dg_dso = np.where(flowing, dgo * oil.dlam_face * lw / safe**2, 0.0)
    dg_dsw = np.where(flowing, -dgo * lo * water.dlam_face / safe**2, 0.0)
    return g, dg_dso, dg_dsw


def _face_residual(model: FlowModel, state: State, terms: Dict[Phase, _PhaseTerms]) -> np.ndarray:
    mesh = model.mesh
    cf = mesh.cell_faces
    a = model.elem.L * state.p_elem[:, None] - np.einsum(
        "nij,nj->ni", model.elem.Binv, state.p_face[cf]
    )
    g, _, _ = _mixture_weight(model, terms)
    contrib = a - g[cf] * model.bz
    r_pi = -model.fluid.reference_mobility * np.bincount(
        cf.ravel(), contrib.ravel(), minlength=model.n_f
    )
    d = model.dirichlet_faces
    r_pi[d] = state.p_face[d] - model.dirichlet_values
    return r_pi


def _check_sizes(model: FlowModel, state: State) -> None:
    if (
        state.p_face.size != model.n_f
        or state.p_elem.size != model.n_e
        or state.p_bh.size != model.n_w
    ):
        raise InvalidArgumentError(
            f"state sizes ({state.p_face.size}, {state.p_elem.size}, {state.p_bh.size}) do not "
            f"match the model ({model.n_f}, {model.n_e}, {model.n_w})"
        )


# ---------------------------------------------------------------------------
# Residual
# ---------------------------------------------------------------------------


def assemble_residual(model: FlowModel, state: State, state_prev: State, dt: float) -> Residual:
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be > 0, got {dt}")
    _check_sizes(model, state)
    mesh = model.mesh
    n_e = model.n_e
    terms = _evaluate(model, state)

    phi, _ = porosity(model.rock, state.p_elem)
    phi_prev, _ = porosity(model.rock, state_prev.p_elem)
    vol = mesh.cell_volume
    r_p = vol * (phi - phi_prev) / dt
    r_s = vol * (phi * state.sw - phi_prev * state_prev.sw) / dt

    inter = model.interior_faces
    c0, c1 = mesh.face_cells[inter, 0], mesh.face_cells[inter, 1]
    d = model.dirichlet_faces
    cd, idl = mesh.face_cells[d, 0], mesh.face_local[d, 0]
    for phase, t in terms.items():
        flux = t.lam_face[inter] * t.psi
        net = np.bincount(c0, flux, minlength=n_e) - np.bincount(c1, flux, minlength=n_e)
        if d.size:
            net += np.bincount(cd, t.lam_face[d] * t.qhat[cd, idl], minlength=n_e)
        r_p += net
        if phase is Phase.WATER:
            r_s += net

    wells = model.wells
    q_o, q_w = wells.rates(model.fluid, state.p_elem, state.sw, state.p_bh)
    r_p += np.bincount(wells.perf_cell, q_o + q_w, minlength=n_e)
    r_s += np.bincount(wells.perf_cell, q_w, minlength=n_e)
    r_well = _well_rows(wells, state.p_bh, q_o + q_w)

    return Residual(
        r_pi=_face_residual(model, state, terms),
        r_p=np.concatenate([r_p, r_well]),
        r_s=r_s,
    )


def _well_rows(wells: WellModel, p_bh: np.ndarray, q_total: np.ndarray) -> np.ndarray:
    out = np.empty(wells.n_wells)
    per_well = np.bincount(wells.perf_well, q_total, minlength=wells.n_wells)
    for w, well in enumerate(wells.wells):
        if well.control == "bhp":
            out[w] = p_bh[w] - well.target
        else:
            out[w] = well.sign * per_well[w] - well.target
    return out


# ---------------------------------------------------------------------------
# Jacobian
# ---------------------------------------------------------------------------


class _Triplets:
    """COO accumulator for one block."""

    def __init__(self, shape: tuple[int, int]) -> None:
        self.shape = shape
        self.rows: list[np.ndarray] = []
        self.cols: list[np.ndarray] = []
        self.vals: list[np.ndarray] = []

    def add(self, rows, cols, vals) -> None:
        r, c, v = np.broadcast_arrays(np.asarray(rows), np.asarray(cols), np.asarray(vals, float))
        self.rows.append(r.ravel())
        self.cols.append(c.ravel())
        self.vals.append(v.ravel())

    def tocsr(self) -> sparse.csr_matrix:
        if not self.rows:
            return sparse.csr_matrix(self.shape)
        return _csr(
            np.concatenate(self.rows), np.concatenate(self.cols), np.concatenate(self.vals),
            self.shape,
        )


def _csr(rows, cols, vals, shape) -> sparse.csr_matrix:
    A = sparse.csr_matrix((vals, (rows, cols)), shape=shape)
    A.sum_duplicates()
    A.sort_indices()
    return A


def assemble_jacobian(
    model: FlowModel, state: State, state_prev: State, dt: float
) -> BlockJacobian:
    """Analytical ``∂R/∂x``; upwind choices are frozen (derivatives w.r.t. the upstream
    saturation only)."""
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be > 0, got {dt}")
    _check_sizes(model, state)
    mesh = model.mesh
    n_f, n_e, n_w = model.n_f, model.n_e, model.n_w
    n_p = n_e + n_w
    cf = mesh.cell_faces
    Binv, L = model.elem.Binv, model.elem.L
    terms = _evaluate(model, state)

    ppi = _Triplets((n_p, n_f))
    pp = _Triplets((n_p, n_p))
    ps = _Triplets((n_p, n_e))
    spi = _Triplets((n_e, n_f))
    s_p = _Triplets((n_e, n_p))
    ss = _Triplets((n_e, n_e))
    pis = _Triplets((n_f, n_e))

    cells = np.arange(n_e)
    vol = mesh.cell_volume
    phi, dphi = porosity(model.rock, state.p_elem)
    pp.add(cells, cells, vol * dphi / dt)
    s_p.add(cells, cells, vol * dphi * state.sw / dt)
    ss.add(cells, cells, vol * phi / dt)

    inter = model.interior_faces
    c0, c1 = mesh.face_cells[inter, 0], mesh.face_cells[inter, 1]
    i0, i1 = mesh.face_local[inter, 0], mesh.face_local[inter, 1]
    a0 = model.elem.diag[c0, i0]
    a1 = model.elem.diag[c1, i1]
    j0, j1 = _OTHERS[i0], _OTHERS[i1]
    pi_cols0 = cf[c0[:, None], j0]
    pi_cols1 = cf[c1[:, None], j1]
    b0 = Binv[c0[:, None], i0[:, None], j0]
    b1 = Binv[c1[:, None], i1[:, None], j1]

    d = model.dirichlet_faces
    cd, idl = mesh.face_cells[d, 0], mesh.face_local[d, 0]

    for phase, t in terms.items():
        targets = [(ppi, pp, ps)]
        if phase is Phase.WATER:
            targets.append((spi, s_p, ss))
        lam = t.lam_face[inter]
        w0 = lam * a1 * t.c
        w1 = lam * a0 * t.c
        dF_dp0 = w0 * L[c0, i0]
        dF_dp1 = -w1 * L[c1, i1]
        dF_dpi0 = -w0[:, None] * b0
        dF_dpi1 = w1[:, None] * b1
        dF_ds = t.dlam_face[inter] * t.psi
        up = t.up[inter]

        lam_d = t.lam_face[d]
        for blk_pi, blk_p, blk_s in targets:
            for rows, sign in ((c0, 1.0), (c1, -1.0)):
                blk_p.add(rows, c0, sign * dF_dp0)
                blk_p.add(rows, c1, sign * dF_dp1)
                blk_pi.add(rows[:, None], pi_cols0, sign * dF_dpi0)
                blk_pi.add(rows[:, None], pi_cols1, sign * dF_dpi1)
                blk_s.add(rows, up, sign * dF_ds)
            if d.size:
                blk_p.add(cd, cd, lam_d * L[cd, idl])
                blk_pi.add(cd[:, None], cf[cd], -lam_d[:, None] * Binv[cd, idl, :])
                blk_s.add(cd, t.up[d], t.dlam_face[d] * t.qhat[cd, idl])

    _well_derivatives(model, state, pp, ps, s_p, ss)

    if model.gravity:
        _, dg_dso, dg_dsw = _mixture_weight(model, terms)
        lam_ref = model.fluid.reference_mobility
        faces = np.flatnonzero(~model.is_dirichlet)
        pis.add(faces, terms[Phase.OIL].up[faces], lam_ref * model.gsum[faces] * dg_dso[faces])
        pis.add(faces, terms[Phase.WATER].up[faces], lam_ref * model.gsum[faces] * dg_dsw[faces])

    return BlockJacobian(
        pipi=model.j_pipi,
        pip=model.j_pip,
        pis=pis.tocsr(),
        ppi=ppi.tocsr(),
        pp=pp.tocsr(),
        ps=ps.tocsr(),
        spi=spi.tocsr(),
        sp=s_p.tocsr(),
        ss=ss.tocsr(),
    )


def _well_derivatives(
    model: FlowModel,
    state: State,
    pp: _Triplets,
    ps: _Triplets,
    s_p: _Triplets,
    ss: _Triplets,
) -> None:
    wells = model.wells
    if wells.n_wells == 0:
        return
    n_e = model.n_e
    pc, pw, wi = wells.perf_cell, wells.perf_well, wells.perf_wi
    m_o, m_w, dm_o, dm_w = wells.perforation_mobilities(model.fluid, state.sw)
    m_t, dm_t = m_o + m_w, dm_o + dm_w
    dp = state.p_elem[pc] - state.p_bh[pw]
    bh = n_e + pw

    pp.add(pc, pc, m_t * wi)
    pp.add(pc, bh, -m_t * wi)
    ps.add(pc, pc, dm_t * wi * dp)
    s_p.add(pc, pc, m_w * wi)
    s_p.add(pc, bh, -m_w * wi)
    ss.add(pc, pc, dm_w * wi * dp)

    sign = wells.sign
    is_rate = np.array([w.control == "rate" for w in wells.wells])
    bhp_rows = n_e + np.flatnonzero(~is_rate)
    pp.add(bhp_rows, bhp_rows, 1.0)
    rate_perf = is_rate[pw]
    s = sign[pw][rate_perf]
    pp.add(bh[rate_perf], pc[rate_perf], s * (m_t * wi)[rate_perf])
    pp.add(bh[rate_perf], bh[rate_perf], -s * (m_t * wi)[rate_perf])
    ps.add(bh[rate_perf], pc[rate_perf], s * (dm_t * wi * dp)[rate_perf])


# ---------------------------------------------------------------------------
# Initialization and diagnostics
# ---------------------------------------------------------------------------


def initialize_faces(model: FlowModel, state: State) -> State:
    """Face pressures that zero ``R_π`` at fixed cell pressures and saturations."""
    _check_sizes(model, state)
    zero = state.copy()
    zero.p_face = np.zeros(model.n_f)
    r0 = _face_residual(model, zero, _evaluate(model, zero))
    out = state.copy()
    out.p_face = np.asarray(spsolve(model.j_pipi.tocsc(), -r0), dtype=float)
    return out


def initial_state(
    model: FlowModel, p_init: float, sw_init: float, p_bh: Optional[np.ndarray] = None
) -> State:
    """Hydrostatic (gravity on) or uniform cell pressures, faces from :func:`initialize_faces`.

    BHP wells start at their target, rate wells at the mean pressure of their perforations.
    """
    sw = np.full(model.n_e, float(sw_init))
    p = np.full(model.n_e, float(p_init))
    if model.gravity:
        f_o, _ = fractional_flow(model.fluid, sw)
        g = model.fluid.gamma_w + f_o * (model.fluid.gamma_o - model.fluid.gamma_w)
        p = p + g * (model.z_cell - model.z_cell.min())
    if p_bh is None:
        wells = model.wells
        p_bh = np.empty(wells.n_wells)
        for w, well in enumerate(wells.wells):
            if well.control == "bhp":
                p_bh[w] = well.target
            else:
                p_bh[w] = p[wells.perf_cell[wells.perf_well == w]].mean()
    state = State(p_elem=p, p_face=np.zeros(model.n_f), p_bh=np.asarray(p_bh, float), sw=sw)
    state = initialize_faces(model, state)
    logger.info(
        "initial_state",
        extra={"p_init": p_init, "sw_init": sw_init, "gravity": model.gravity},
    )
    return state


def face_fluxes(model: FlowModel, state: State) -> FaceFluxes:
    """Interior strong-continuity fluxes, Dirichlet one-sided fluxes and well outflows."""
    _check_sizes(model, state)
    mesh = model.mesh
    terms = _evaluate(model, state)
    inter = model.interior_faces
    d = model.dirichlet_faces
    cd, idl = mesh.face_cells[d, 0], mesh.face_local[d, 0]
    out = {}
    for phase, t in terms.items():
        q = np.zeros(model.n_f)
        q[inter] = t.lam_face[inter] * t.psi
        q[d] = t.lam_face[d] * t.qhat[cd, idl]
        out[phase] = q
    q_o, q_w = model.wells.rates(model.fluid, state.p_elem, state.sw, state.p_bh)
    return FaceFluxes(oil=out[Phase.OIL], water=out[Phase.WATER], well_oil=q_o, well_water=q_w)
