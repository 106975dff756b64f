"""Tests for mhfeflow.linalg — sparse kernels, Krylov solvers, ILU(0), Jacobi and AMG."""

from __future__ import annotations

import logging

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from mhfeflow.errors import (
    InvalidArgumentError,
    NumericError,
    PreconditionerBuildError,
    SingularMatrixError,
)
from mhfeflow.linalg import (
    amg_setup,
    amg_vcycle,
    as_csr,
    dense_lu_solve,
    extract_diag,
    extract_submatrix,
    gcr,
    gmres,
    ilu0_build,
    jacobi_build,
    rcm_permutation,
    read_matrix_market,
    spmv,
    structural_nnz,
    write_matrix_market,
)
from mhfeflow.models import AMGSettings

from tests.conftest import closed_model


def laplacian_1d(n: int) -> sp.csr_matrix:
    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")


def laplacian_2d(m: int) -> sp.csr_matrix:
    T = laplacian_1d(m)
    eye = sp.identity(m)
    return as_csr(sp.kron(eye, T) + sp.kron(T, eye))


def textbook_ilu0(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """IKJ incomplete LU restricted to the non-zero pattern of ``A``."""
    a = A.copy()
    n = a.shape[0]
    nz = A != 0
    for i in range(1, n):
        for k in range(i):
            if not nz[i, k]:
                continue
            a[i, k] /= a[k, k]
            for j in range(k + 1, n):
                if nz[i, j]:
                    a[i, j] -= a[i, k] * a[k, j]
    return np.tril(a, -1), np.triu(a)


@pytest.fixture()
def random_system(rng):
    A = 10.0 * np.eye(50) + rng.normal(size=(50, 50))
    b = rng.normal(size=50)
    return A, b


class TestSparseKernels:
    def test_as_csr_merges_and_sorts(self) -> None:
        A = sp.coo_matrix(([1.0, 2.0, 3.0], ([0, 0, 1], [1, 1, 0])), shape=(2, 2))
        B = as_csr(A)
        assert B.nnz == 2
        assert B[0, 1] == 3.0
        assert B.has_sorted_indices

    def test_spmv_checks_length(self) -> None:
        A = laplacian_1d(4)
        np.testing.assert_allclose(spmv(A, np.ones(4)), [1.0, 0.0, 0.0, 1.0])
        with pytest.raises(InvalidArgumentError):
            spmv(A, np.ones(3))

    def test_extract_submatrix_order(self) -> None:
        A = as_csr(np.arange(16.0).reshape(4, 4))
        sub = extract_submatrix(A, [2, 0], [3, 1], dense=True)
        np.testing.assert_array_equal(sub, [[11.0, 9.0], [3.0, 1.0]])
        with pytest.raises(InvalidArgumentError):
            extract_submatrix(A, [4], [0])

    def test_structural_nnz_keeps_explicit_zeros(self) -> None:
        A = sp.csr_matrix((np.array([0.0, 1.0]), np.array([0, 1]), np.array([0, 1, 2])))
        assert structural_nnz(A) == 2
        np.testing.assert_array_equal(extract_diag(A), [0.0, 1.0])


class TestDenseLU:
    def test_solves(self, random_system) -> None:
        A, b = random_system
        np.testing.assert_allclose(dense_lu_solve(A, b), np.linalg.solve(A, b), rtol=1e-10)

    def test_singular(self) -> None:
        with pytest.raises(SingularMatrixError):
            dense_lu_solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))

    def test_zero_matrix(self) -> None:
        with pytest.raises(SingularMatrixError):
            dense_lu_solve(np.zeros((3, 3)), np.ones(3))

    def test_non_square(self) -> None:
        with pytest.raises(InvalidArgumentError):
            dense_lu_solve(np.ones((2, 3)), np.ones(2))


class TestGMRES:
    def test_matches_direct_solve(self, random_system) -> None:
        A, b = random_system
        res = gmres(lambda v: A @ v, b, tol=1e-10, maxit=100)
        assert res.converged
        assert res.relative_residual < 1e-10
        np.testing.assert_allclose(res.x, np.linalg.solve(A, b), rtol=1e-7)

    def test_history_is_monotone(self, random_system) -> None:
        A, b = random_system
        res = gmres(lambda v: A @ v, b, tol=1e-10, maxit=100)
        assert res.history[0] == 1.0
        assert len(res.history) == res.iterations + 1
        assert np.all(np.diff(res.history) <= 1e-15)

    def test_restarted(self, random_system) -> None:
        A, b = random_system
        A = A + 10.0 * np.eye(50)
        res = gmres(lambda v: A @ v, b, tol=1e-10, maxit=500, restart=5)
        assert res.converged
        np.testing.assert_allclose(A @ res.x, b, atol=1e-8 * np.linalg.norm(b))

    def test_zero_rhs(self, random_system) -> None:
        A, _ = random_system
        res = gmres(lambda v: A @ v, np.zeros(50))
        assert res.iterations == 0
        assert res.converged
        assert not res.x.any()

    def test_initial_guess(self, random_system) -> None:
        A, b = random_system
        res = gmres(lambda v: A @ v, b, x0=np.ones(50), tol=1e-10, maxit=100)
        assert res.converged
        np.testing.assert_allclose(res.x, np.linalg.solve(A, b), rtol=1e-7)

    def test_iteration_cap(self, random_system) -> None:
        A, b = random_system
        res = gmres(lambda v: A @ v, b, tol=1e-14, maxit=3)
        assert res.iterations == 3
        assert not res.converged
        assert len(res.history) == 4

    def test_exact_preconditioner_converges_at_once(self, random_system) -> None:
        A, b = random_system
        res = gmres(lambda v: A @ v, b, apply_M=lambda v: np.linalg.solve(A, v), tol=1e-10)
        assert res.iterations == 1
        assert res.converged

    def test_non_finite_rhs(self, random_system) -> None:
        A, b = random_system
        b[3] = np.nan
        with pytest.raises(NumericError):
            gmres(lambda v: A @ v, b)

    def test_non_finite_preconditioner(self, random_system) -> None:
        A, b = random_system
        with pytest.raises(NumericError):
            gmres(lambda v: A @ v, b, apply_M=lambda v: v * np.inf)


class TestGCR:
    def test_converges(self, random_system) -> None:
        A, b = random_system
        res = gcr(lambda v: A @ v, b, tol=1e-10, maxit=60)
        assert res.converged
        np.testing.assert_allclose(res.x, np.linalg.solve(A, b), rtol=1e-7)

    def test_returns_last_iterate_on_cap(self, random_system) -> None:
        A, b = random_system
        res = gcr(lambda v: A @ v, b, tol=1e-14, maxit=2)
        assert not res.converged
        assert res.iterations == 2
        assert res.relative_residual < 1.0

    def test_zero_rhs(self, random_system) -> None:
        A, _ = random_system
        res = gcr(lambda v: A @ v, np.zeros(50))
        assert res.iterations == 0
        assert res.converged

    def test_non_finite_rhs(self, random_system) -> None:
        A, b = random_system
        b[0] = np.inf
        with pytest.raises(NumericError) as info:
            gcr(lambda v: A @ v, b)
        assert info.value.stage == "gcr rhs"


class TestOneLevelPreconditioners:
    def test_jacobi(self) -> None:
        A = laplacian_1d(5) * 3.0
        M = jacobi_build(A)
        np.testing.assert_allclose(M(np.ones(5)), np.full(5, 1 / 6))

    def test_jacobi_zero_diagonal(self) -> None:
        A = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 0.0]]))
        with pytest.raises(PreconditionerBuildError) as info:
            jacobi_build(A)
        assert info.value.row == 1

    def test_ilu0_matches_textbook(self) -> None:
        A = laplacian_2d(6)
        L_ref, U_ref = textbook_ilu0(A.toarray())
        M = ilu0_build(A)
        np.testing.assert_allclose(M.L.toarray(), L_ref, atol=1e-14)
        np.testing.assert_allclose(M.U.toarray(), U_ref, atol=1e-14)

    def test_ilu0_keeps_pattern(self) -> None:
        A = laplacian_2d(6)
        M = ilu0_build(A)
        assert M.L.nnz + M.U.nnz == A.nnz

    def test_ilu0_exact_on_permuted_tridiagonal(self, rng) -> None:
        q = rng.permutation(30)
        T = laplacian_1d(30) + sp.identity(30)
        A = as_csr(T[q][:, q])
        b = rng.normal(size=30)
        M = ilu0_build(A, perm=rcm_permutation(A))
        np.testing.assert_allclose(M(b), spsolve(A.tocsc(), b), rtol=1e-10)

    def test_rcm_is_permutation(self) -> None:
        A = laplacian_2d(5)
        perm = rcm_permutation(A)
        np.testing.assert_array_equal(np.sort(perm), np.arange(25))

    def test_ilu0_missing_diagonal(self) -> None:
        A = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 0.0]]))
        A.eliminate_zeros()
        with pytest.raises(PreconditionerBuildError) as info:
            ilu0_build(A)
        assert info.value.row == 1

    def test_ilu0_zero_pivot(self) -> None:
        A = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
        with pytest.raises(PreconditionerBuildError):
            ilu0_build(A)


class TestAMG:
    def test_small_matrix_is_solved_exactly(self, rng) -> None:
        A = laplacian_1d(64)
        H = amg_setup(A)
        assert H.n_levels == 1
        b = rng.normal(size=64)
        np.testing.assert_allclose(A @ amg_vcycle(H, b), b, atol=1e-10)

    def test_multilevel_preconditioned_gcr(self, rng) -> None:
        A = laplacian_1d(64)
        H = amg_setup(A, AMGSettings(max_coarse=4))
        assert H.n_levels > 2
        assert H.sizes[0] == 64
        assert all(a > b for a, b in zip(H.sizes, H.sizes[1:]))
        b = rng.normal(size=64)
        res = gcr(lambda v: A @ v, b, apply_M=H, tol=1e-8, maxit=64)
        assert res.converged

    def test_vcycle_is_symmetric(self, rng) -> None:
        A = laplacian_2d(10)
        H = amg_setup(A, AMGSettings(max_coarse=10))
        assert H.n_levels > 1
        x, y = rng.normal(size=100), rng.normal(size=100)
        assert x @ H(y) == pytest.approx(y @ H(x), rel=1e-12, abs=1e-12)

    @pytest.mark.timeout(60)
    def test_accelerates_face_system(self, rng) -> None:
        from mhfeflow.grid import build_cartesian

        model = closed_model(build_cartesian(10, 10, 2, 6.096, 3.048, 0.6096))
        A = model.j_pipi
        H = amg_setup(A)
        b = rng.normal(size=A.shape[0])
        plain = gmres(lambda v: A @ v, b, tol=1e-6, maxit=A.shape[0])
        pre = gmres(lambda v: A @ v, b, apply_M=H, tol=1e-6, maxit=A.shape[0])
        assert pre.converged
        assert pre.iterations < plain.iterations

    def test_zero_diagonal(self) -> None:
        A = laplacian_1d(64).tolil()
        A[10, 10] = 0.0
        with pytest.raises(PreconditionerBuildError):
            amg_setup(as_csr(A), AMGSettings(max_coarse=4))

    def test_stagnation_falls_back_to_jacobi(self, rng, caplog) -> None:
        d = rng.uniform(1.0, 2.0, 300)
        A = sp.diags(d, format="csr")
        with caplog.at_level(logging.WARNING, logger="mhfeflow.linalg.amg"):
            H = amg_setup(A)
        assert H.stagnated
        assert H.coarse_lu is None
        assert any("amg_stagnated" in r.message for r in caplog.records)
        b = rng.normal(size=300)
        np.testing.assert_allclose(H(b), 0.7 * b / d)


class TestMatrixMarket:
    def test_round_trip_is_exact(self, tmp_path, rng) -> None:
        A = as_csr(sp.random(20, 15, density=0.2, random_state=3) * np.pi)
        path = write_matrix_market(A, tmp_path / "sub" / "a.mtx", comment="test block")
        B = read_matrix_market(path)
        assert B.shape == (20, 15)
        assert (A != B).nnz == 0
