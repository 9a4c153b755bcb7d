import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import gram_schmidt, random_matrix, rowspace_projection, same_span
from paramlin.kerproj import householder_qr, ker_basis, proj_ker, proj_ker_perp, row_space_basis, select_row_basis


def test_reflector_sign_convention():
    qr = householder_qr(np.array([[3.0], [4.0]]))
    assert qr.R[0, 0] == pytest.approx(-5.0)
    assert abs(qr.R[1, 0]) < 1e-15


def test_identity_input():
    qr = householder_qr(np.eye(2))
    assert np.allclose(qr.Q @ qr.R, np.eye(2))
    assert np.allclose(np.tril(qr.R, -1), 0)
    assert np.allclose(np.abs(qr.Q[:, 0]), [1, 0])


def test_wide_rejected():
    with pytest.raises(ValueError, match="m >= n"):
        householder_qr(np.ones((2, 3)))


def test_deficient_column_recorded():
    M = np.array([[1.0, 2.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
    qr = householder_qr(M)
    assert 1 in qr.deficient_columns
    assert np.allclose(qr.Q @ qr.R, M)


def test_random_5x3_against_gram_schmidt():
    M = np.random.default_rng(3).normal(size=(5, 3))
    qr = householder_qr(M)
    assert np.abs(qr.Q.T @ qr.Q - np.eye(5)).max() <= 1e-10
    assert np.abs(qr.Q @ qr.R - M).max() <= 1e-10
    assert same_span(qr.Q[:, :3], gram_schmidt(M.T).T)


@pytest.mark.parametrize(
    "A, idx",
    [
        ([[1, 0], [2, 0]], (0,)),
        ([[0, 0], [0, 0]], ()),
        (np.eye(3), (0, 1, 2)),
        ([[0, 0], [1, 1], [2, 2], [0, 1]], (1, 3)),
    ],
)
def test_row_basis_examples(A, idx):
    rb = select_row_basis(np.array(A, dtype=float))
    assert rb.indices == idx
    assert rb.rank == len(idx)


def test_kernel_examples():
    assert np.allclose(np.abs(ker_basis([[1.0, 0.0]]).ravel()), [0, 1])
    N = ker_basis(np.zeros((1, 2)))
    assert N.shape == (2, 2) and np.allclose(N.T @ N, np.eye(2))
    k = ker_basis([[1.0, 1.0]]).ravel()
    assert np.allclose(np.abs(k), [2**-0.5, 2**-0.5]) and k[0] * k[1] < 0


def test_projection_examples():
    assert np.allclose(proj_ker_perp([[1.0, 0.0]], [3.0, 4.0]), [3, 0])
    assert np.allclose(proj_ker([[1.0, 0.0]], [3.0, 4.0]), [0, 4])
    assert np.allclose(proj_ker_perp(np.zeros((2, 3)), [1.0, 2.0, 3.0]), 0)
    assert np.allclose(proj_ker_perp([[1.0, 1.0]], [2.0, 0.0]), [1, 1])
    assert np.allclose(proj_ker([[1.0, 1.0]], [2.0, 0.0]), [1, -1])
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    assert np.allclose(proj_ker(A, [5.0, -7.0]), 0, atol=1e-12)


def test_row_space_basis_orthonormal():
    rng = np.random.default_rng(7)
    for _ in range(50):
        A = random_matrix(rng)
        B = row_space_basis(A)
        assert np.allclose(B.T @ B, np.eye(B.shape[1]), atol=1e-10)
        assert B.shape[1] == np.linalg.matrix_rank(A, tol=1e-8)


matrices = st.integers(1, 8).flatmap(
    lambda m: st.integers(1, m).flatmap(
        lambda n: arrays(np.float64, (m, n), elements=st.floats(-10, 10, allow_subnormal=False))
    )
)


@settings(max_examples=200, deadline=None)
@given(matrices)
def test_qr_invariants(M):
    qr = householder_qr(M)
    scale = 1.0 + np.abs(M).max()
    assert np.abs(qr.Q.T @ qr.Q - np.eye(M.shape[0])).max() <= 1e-10
    assert np.abs(qr.Q @ qr.R - M).max() <= 1e-10 * scale
    assert np.abs(np.tril(qr.R, -1)).max(initial=0.0) <= 1e-10 * scale


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_projection_invariants(seed):
    rng = np.random.default_rng(seed)
    A = random_matrix(rng)
    w = rng.normal(size=A.shape[1]) * 3
    p1, p2 = proj_ker_perp(A, w), proj_ker(A, w)
    assert np.abs(p1 + p2 - w).max() <= 4 * np.finfo(float).eps * np.abs(w).max()
    assert abs(p1 @ p2) <= 1e-9 * (w @ w)
    assert np.allclose(proj_ker_perp(A, p1), p1, atol=1e-9)
    assert np.linalg.norm(A @ p2) <= 1e-8 * np.linalg.norm(A, 2) * np.linalg.norm(w) + 1e-12
    assert np.allclose(p1, rowspace_projection(A, w), atol=1e-8)
    D = np.diag(rng.uniform(0.2, 5.0, size=A.shape[0]))
    assert np.allclose(proj_ker_perp(D @ A, w), p1, atol=1e-8)
