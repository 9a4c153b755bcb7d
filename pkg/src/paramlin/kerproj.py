"""Pointwise linear algebra: Householder QR, row bases and kernel projections.

``householder_qr`` builds each reflector as ``v = z + |z| e1``,
``alpha = |v|^2 / 2``, ``U = I - v v^T / alpha`` so that ``U z = -|z| e1``.
No sign switch is applied; for ``z0 < 0`` the first entry ``z0 + |z|`` is
evaluated as ``|z_tail|^2 / (|z| - z0)``, the same number without
cancellation. A column with ``|z| <= tol_rank * (1 + max|M|)``
is recorded as rank deficient; the reflector is still applied unless ``v``
vanishes to working precision (``z = 0`` or ``z`` already ``-|z| e1``), so
small leftovers below the diagonal are cleared.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TOL_RANK = 1e-9


@dataclass(frozen=True)
class QRFactorization:
    Q: np.ndarray
    R: np.ndarray
    deficient_columns: tuple[int, ...] = field(default=())


@dataclass(frozen=True)
class RowBasis:
    indices: tuple[int, ...]  # 0-based row indices, increasing

    @property
    def rank(self) -> int:
        return len(self.indices)


def householder_qr(M, tol_rank: float = TOL_RANK) -> QRFactorization:
    """Factor an ``m x n`` matrix (``m >= n``) as ``M = Q R``."""
    M = np.array(M, dtype=float, ndmin=2)
    m, n = M.shape
    if m < n:
        raise ValueError(f"householder_qr needs m >= n, got {m}x{n}; factor the transpose")
    R = M.copy()
    Q = np.eye(m)
    scale = tol_rank * (1.0 + (np.abs(M).max() if M.size else 0.0))
    deficient = []
    eps = np.finfo(float).eps
    for j in range(n):
        z = R[j:, j]
        znorm = np.linalg.norm(z)
        if znorm <= scale:
            deficient.append(j)
        v = z.copy()
        if z[0] >= 0:
            v[0] += znorm
        else:
            # same value z0 + |z|, written without cancellation
            tail = z[1:] @ z[1:]
            v[0] = tail / (znorm - z[0])
        vmax = np.abs(v).max()
        if vmax <= eps * np.abs(z).max() or vmax == 0:
            # z is zero or already -|z| e1
            continue
        v /= vmax  # U does not depend on the scale of v; this avoids underflow in v.v
        alpha = (v @ v) / 2.0
        # U = I - v v^T / alpha applied to the trailing block; Q accumulates U^T = U
        R[j:, j:] -= np.outer(v, (v @ R[j:, j:]) / alpha)
        Q[:, j:] -= np.outer(Q[:, j:] @ v, v / alpha)
    return QRFactorization(Q=Q, R=R, deficient_columns=tuple(deficient))


def select_row_basis(A, tol_rank: float = TOL_RANK) -> RowBasis:
    """Greedy, in-order choice of rows spanning the row space of ``A``.

    A row is kept when its residual after projection onto the kept rows
    exceeds ``tol_rank * (1 + max|A|)``.
    """
    A = np.array(A, dtype=float, ndmin=2)
    if A.size == 0:
        return RowBasis(())
    thresh = tol_rank * (1.0 + np.abs(A).max())
    basis = np.zeros((0, A.shape[1]))
    keep = []
    for i, row in enumerate(A):
        res = row.copy()
        for _ in range(2):  # second pass restores orthogonality lost to cancellation
            res -= basis.T @ (basis @ res)
        norm = np.linalg.norm(res)
        if norm > thresh:
            keep.append(i)
            basis = np.vstack([basis, res / norm])
    return RowBasis(tuple(keep))


def _row_space_qr(A, tol_rank):
    A = np.array(A, dtype=float, ndmin=2)
    rb = select_row_basis(A, tol_rank)
    s = A.shape[1]
    if rb.rank == 0:
        return np.eye(s), 0
    qr = householder_qr(A[list(rb.indices)].T, tol_rank)
    return qr.Q, rb.rank


def row_space_basis(A, tol_rank: float = TOL_RANK) -> np.ndarray:
    """Orthonormal ``s x k`` basis of the span of the rows of ``A``."""
    Q, k = _row_space_qr(A, tol_rank)
    return Q[:, :k]


def ker_basis(A, tol_rank: float = TOL_RANK) -> np.ndarray:
    """Orthonormal ``s x (s - k)`` basis of ``Ker A``."""
    Q, k = _row_space_qr(A, tol_rank)
    return Q[:, k:]


def proj_ker_perp(A, w, tol_rank: float = TOL_RANK) -> np.ndarray:
    """Projection of ``w`` onto the orthogonal complement of ``Ker A``."""
    w = np.asarray(w, dtype=float)
    N = ker_basis(A, tol_rank)
    return w - N @ (N.T @ w)


def proj_ker(A, w, tol_rank: float = TOL_RANK) -> np.ndarray:
    """Projection of ``w`` onto ``Ker A``."""
    w = np.asarray(w, dtype=float)
    return w - proj_ker_perp(A, w, tol_rank)
