"""Affine subspaces of R^s: solution fibers, projections and restriction.

A non-empty fiber is stored as a minimal-norm base point plus an
orthonormal direction basis, so the base is orthogonal to the directions.
The empty set and the whole space are ordinary values of the type.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .kerproj import TOL_RANK, householder_qr, ker_basis, select_row_basis

TOL_RES = 1e-8


class EmptyFiberError(ValueError):
    """Raised when an operation needs a point of an empty fiber."""


@dataclass(frozen=True, eq=False)
class AffineFiber:
    s: int
    base: np.ndarray | None = None  # None means empty
    dir: np.ndarray | None = None  # s x k, orthonormal columns

    @classmethod
    def empty(cls, s: int) -> "AffineFiber":
        return cls(s)

    @classmethod
    def full(cls, s: int) -> "AffineFiber":
        return cls(s, np.zeros(s), np.eye(s))

    @classmethod
    def point(cls, p) -> "AffineFiber":
        p = np.asarray(p, dtype=float).ravel()
        return cls(len(p), p, np.zeros((len(p), 0)))

    @classmethod
    def from_base_dir(cls, base, dir) -> "AffineFiber":
        """Normalise an arbitrary point/orthonormal basis pair to minimal-norm form."""
        base = np.asarray(base, dtype=float).ravel()
        dir = np.asarray(dir, dtype=float).reshape(len(base), -1)
        return cls(len(base), base - dir @ (dir.T @ base), dir)

    @property
    def is_empty(self) -> bool:
        return self.base is None

    @property
    def dim(self) -> int:
        """Dimension of the fiber; -1 when empty."""
        return -1 if self.base is None else self.dir.shape[1]

    @cached_property
    def projector(self) -> np.ndarray:
        """Orthogonal projector onto the direction space."""
        if self.is_empty:
            return np.zeros((self.s, self.s))
        return self.dir @ self.dir.T

    @cached_property
    def normal(self) -> np.ndarray:
        """Orthonormal basis of the complement of the direction space (``s x (s-k)``)."""
        if self.is_empty:
            raise EmptyFiberError("empty fiber has no normal space")
        if self.dim == 0:
            return np.eye(self.s)
        return ker_basis(self.dir.T)

    def contains(self, w, tol: float = 1e-8) -> bool:
        return not self.is_empty and dist_affine_point(self, w) <= tol

    def sample(self, rng, size: int, scale: float = 1.0) -> np.ndarray:
        """Random points of the fiber, ``size x s``."""
        if self.is_empty:
            raise EmptyFiberError("cannot sample an empty fiber")
        xi = rng.normal(scale=scale, size=(size, self.dim))
        return self.base + xi @ self.dir.T

    def same_as(self, other: "AffineFiber", tol: float = 1e-8) -> bool:
        if self.dim != other.dim:
            return False
        if self.is_empty:
            return True
        return (
            np.max(np.abs(self.base - other.base), initial=0.0) <= tol
            and np.max(np.abs(self.projector - other.projector), initial=0.0) <= tol
        )

    def to_dict(self) -> dict:
        if self.is_empty:
            return {"tag": "empty", "dim": -1, "base": None, "dir": None}
        return {
            "tag": "nonempty",
            "dim": self.dim,
            "base": self.base.tolist(),
            "dir": self.dir.T.tolist(),  # one list per direction vector
        }


def _min_norm_solve(M, b, tol_rank):
    """Minimal-norm least-squares solution of ``M x = b`` and an orthonormal kernel basis."""
    M = np.array(M, dtype=float, ndmin=2)
    b = np.asarray(b, dtype=float).ravel()
    cols = M.shape[1]
    rb = select_row_basis(M, tol_rank)
    if rb.rank == 0:
        return np.zeros(cols), np.eye(cols)
    Q = householder_qr(M[list(rb.indices)].T, tol_rank).Q
    Q1, N = Q[:, : rb.rank], Q[:, rb.rank :]
    y = np.linalg.lstsq(M @ Q1, b, rcond=None)[0]
    return Q1 @ y, N


def compute_fiber(A, gamma, tol_rank: float = TOL_RANK, tol_res: float = TOL_RES) -> AffineFiber:
    """The solution set ``{lam : A lam = gamma}``, or empty if the residual is too large."""
    A = np.array(A, dtype=float, ndmin=2)
    gamma = np.asarray(gamma, dtype=float).ravel()
    if A.shape[0] != gamma.shape[0]:
        raise ValueError(f"A has {A.shape[0]} rows but gamma has {gamma.shape[0]} entries")
    p, N = _min_norm_solve(A, gamma, tol_rank)
    if np.linalg.norm(A @ p - gamma) > tol_res * (1.0 + np.linalg.norm(gamma)):
        return AffineFiber.empty(A.shape[1])
    return AffineFiber(A.shape[1], p, N)


def project_affine(F: AffineFiber, w) -> np.ndarray:
    """Nearest point of ``F`` to ``w``."""
    if F.is_empty:
        raise EmptyFiberError("cannot project onto an empty fiber")
    w = np.asarray(w, dtype=float)
    return F.base + F.dir @ (F.dir.T @ (w - F.base))


def dist_affine_point(F: AffineFiber, w) -> float:
    return float(np.linalg.norm(np.asarray(w, dtype=float) - project_affine(F, w)))


def restrict_fiber(
    F: AffineFiber, constraints, tol_rank: float = TOL_RANK, angle_tol: float | None = None
) -> AffineFiber:
    """Affine part of ``F`` lying within ``eps`` of every constraint fiber.

    ``constraints`` is an iterable of ``(G, eps)`` with ``G`` non-empty. The
    conditions ``N_G^T (v - p_G) = 0`` are written in the coordinates of
    ``F`` and solved in the least-squares sense with each block weighted by
    ``1 / eps``; the solution ``v`` is the witness point. A direction of
    ``F`` is pinned when some constraint fiber meets it at an angle whose
    sine exceeds ``angle_tol`` (default ``tol_rank``, i.e. exact
    intersection); weaker tilts leave it free and the result is ``v`` plus
    the free directions. If ``v`` is farther than ``eps`` from some ``G``
    the result is empty. The result is always a subset of ``F``; when no dimension is
    lost ``F`` itself is returned.
    """
    if F.is_empty:
        return F
    angle_tol = tol_rank if angle_tol is None else angle_tol
    constraints = [(G, eps) for G, eps in constraints if not G.is_empty]
    rows, rhs, weights, strong = [], [], [], []
    for G, eps in constraints:
        N = G.normal
        if N.shape[1] == 0 or F.dim == 0:
            continue
        Mj = N.T @ F.dir
        rows.append(Mj)
        rhs.append(N.T @ (G.base - F.base))
        weights.append(np.full(N.shape[1], 1.0 / eps))
        _, sj, Vtj = np.linalg.svd(Mj, full_matrices=False)
        strong.append(Vtj[sj > angle_tol])
    v, free = F.base, F.dir
    if rows:
        M = np.vstack(rows)
        w = np.concatenate(weights)
        # sines below tol_rank count as zero, whatever the weights
        U, sw, Vt = np.linalg.svd(M * w[:, None], full_matrices=False)
        keep = sw > tol_rank * w.max()
        xi = Vt[keep].T @ ((U[:, keep].T @ (np.concatenate(rhs) * w)) / sw[keep])
        v = F.base + F.dir @ xi
        if any(len(S) for S in strong):
            _, ss, Vt = np.linalg.svd(np.vstack(strong), full_matrices=True)
            free = F.dir @ Vt[int(np.sum(ss > angle_tol)) :].T
    for G, eps in constraints:
        if dist_affine_point(G, v) > eps:
            return AffineFiber.empty(F.s)
    if free.shape[1] == F.dim:
        return F
    return AffineFiber.from_base_dir(v, free)
