import numpy as np
import pytest
import scipy.sparse as sp

from ptcfem.assembly import assemble_laplacian
from ptcfem.linalg import (SingularMatrixError, add_scaled, direct_solve,
                           matvec, to_triplet_text, transpose_apply,
                           transpose_product, zero_matrix)
from ptcfem.mesh import unit_square_mesh


def dense(a):
    return sp.csr_matrix(np.asarray(a, dtype=float))


def test_add_scaled_copy_and_cancel():
    A = dense([[1.0, 2.0], [0.0, 3.0]])
    out = add_scaled(A, zero_matrix(2), 1.0, 0.0)
    assert np.allclose(out.toarray(), A.toarray())
    cancel = add_scaled(A, A, 1.0, -1.0)
    assert cancel.nnz == A.nnz  # structure retained
    assert np.all(np.abs(cancel.data) <= 1e-15)


def test_add_scaled_hand_case():
    A = dense([[1.0, 2.0], [0.0, 3.0]])
    B = dense([[1.0, 0.0], [1.0, 0.0]])
    out = add_scaled(A, B, 1.0, 2.0)
    assert np.allclose(out.toarray(), [[3.0, 2.0], [2.0, 3.0]])


def test_add_scaled_commutes_and_merges(rng):
    A = sp.random(12, 12, density=0.2, random_state=7, format="csr")
    B = sp.random(12, 12, density=0.2, random_state=8, format="csr")
    ab = add_scaled(A, B, 0.3, -1.7)
    ba = add_scaled(B, A, -1.7, 0.3)
    assert np.allclose(ab.toarray(), ba.toarray())
    union = set(zip(*A.tocoo().coords)) | set(zip(*B.tocoo().coords))
    assert set(zip(*ab.tocoo().coords)) == union


def test_add_scaled_dimension_mismatch():
    with pytest.raises(ValueError):
        add_scaled(zero_matrix(2), zero_matrix(3), 1.0, 1.0)


def test_matvec_cases():
    eye = sp.identity(4, format="csr")
    x = np.arange(4.0)
    assert np.allclose(matvec(eye, x), x)
    assert np.allclose(matvec(zero_matrix(4), x), 0.0)
    A = dense([[1, 0, 2], [0, 3, 0], [4, 0, 5]])
    assert np.allclose(matvec(A, np.array([1.0, 2.0, 3.0])), [7.0, 6.0, 19.0])
    with pytest.raises(ValueError):
        matvec(A, np.ones(4))


def test_transpose_product_rotation_is_identity():
    c, s = np.cos(0.3), np.sin(0.3)
    Q = dense([[c, -s], [s, c]])
    assert np.allclose(transpose_product(Q).toarray(), np.eye(2), atol=1e-15)


def test_transpose_product_zero_column_nullspace():
    A = dense([[0.0, 1.0], [0.0, 2.0]])
    AtA = transpose_product(A)
    assert np.allclose(AtA @ np.array([1.0, 0.0]), 0.0)


def test_transpose_product_matches_dense_oracle(rng):
    A = sp.random(5, 5, density=0.5, random_state=11, format="csr")
    assert np.allclose(transpose_product(A).toarray(), A.toarray().T @ A.toarray())
    v = rng.normal(size=5)
    assert np.allclose(transpose_apply(A, v), A.toarray().T @ v)


def test_direct_solve_identity_and_spd():
    rhs = np.array([1.0, -2.0, 0.5])
    assert np.allclose(direct_solve(sp.identity(3, format="csr"), rhs), rhs)
    mesh = unit_square_mesh(8)
    A = assemble_laplacian(mesh)
    x_true = np.ones(A.shape[0])
    x = direct_solve(A, A @ x_true)
    assert np.linalg.norm(x - x_true) <= 1e-10


def test_direct_solve_singular():
    A = dense([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(SingularMatrixError):
        direct_solve(A, np.ones(2))


def test_direct_solve_near_singular_reports_pivot():
    A = dense([[1.0, 0.0], [0.0, 1e-18]])
    with pytest.raises(SingularMatrixError) as info:
        direct_solve(A, np.ones(2))
    assert info.value.pivot is not None


def test_solve_matvec_roundtrip(rng):
    n = 30
    A = sp.random(n, n, density=0.15, random_state=3, format="csr")
    A = A + sp.diags(np.abs(A).sum(axis=1).A1 + 1.0)  # diagonally dominant
    x = rng.normal(size=n)
    assert np.linalg.norm(direct_solve(A.tocsr(), matvec(A.tocsr(), x)) - x) <= 1e-9


def test_triplet_export_is_one_based():
    A = dense([[0.0, 1.5], [2.0, 0.0]])
    text = to_triplet_text(A)
    assert text.splitlines() == ["1 2 1.5", "2 1 2"]
