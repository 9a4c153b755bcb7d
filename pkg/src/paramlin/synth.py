"""Gluing local projection fields into one continuous solution.

Each cover atom is a ball ``B(x_i, r_i)`` with a seed ``v_i`` taken from
the stable fiber at ``x_i``. The solution is

    phi(y) = sum_j tau_j(y) proj(v_j onto H_y) / sum_i tau_i(y),
    tau_(x, r)(y) = sqrt(r^2 - |y - x|^2) inside the ball, 0 outside,

where ``H_y`` is the generation-0 fiber, recomputed from the problem at
every query point.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .bundle import Bundle
from .continuity import THETA, TOL_MEMBER, discontinuity_scan, gamma_field
from .fibers import TOL_RES, EmptyFiberError, compute_fiber
from .kerproj import TOL_RANK
from .saexpr import TOL_EVAL, Problem


class CoverError(RuntimeError):
    """Some samples could not be put inside a certified continuity ball."""

    def __init__(self, uncovered, points, atoms):
        self.uncovered = tuple(int(i) for i in uncovered)
        self.points = np.asarray(points)
        self.atoms = list(atoms)
        super().__init__(f"{len(self.uncovered)} sample(s) not covered, first at {self.points[:1].tolist()}")


@dataclass(frozen=True, eq=False)
class CoverAtom:
    center: np.ndarray
    radius: float
    seed: np.ndarray
    index: int | None = None  # sample index of the center

    def to_dict(self) -> dict:
        return {"center": self.center.tolist(), "radius": self.radius, "seed": self.seed.tolist()}


def bump(x, r: float, y) -> np.ndarray | float:
    """``sqrt(r^2 - |y - x|^2)`` inside the open ball, else 0. ``y`` may be a stack of points."""
    if r <= 0:
        raise ValueError("radius must be positive")
    d2 = np.sum((np.asarray(y, dtype=float) - np.asarray(x, dtype=float)) ** 2, axis=-1)
    out = np.sqrt(np.maximum(r * r - d2, 0.0))
    return float(out) if np.ndim(out) == 0 else out


def shrink_radius(
    x,
    v,
    b0: Bundle,
    r_start: float,
    theta: float = THETA,
    stable: Bundle | None = None,
    tol_member: float = TOL_MEMBER,
) -> float | None:
    """Largest ``r_start / 2^k`` whose ball gives a clean scan, or None below two mesh widths."""
    r = float(r_start)
    floor = 2.0 * b0.domain.mesh
    while r >= floor:
        g = gamma_field(b0, v, x, r)
        try:
            rep = discontinuity_scan(g, b0.domain, theta, stable=stable, tol_member=tol_member)
        except ValueError:
            rep = None
        if rep is not None and rep.classification == "none":
            return r
        r /= 2.0
    return None


def default_start_radius(b0: Bundle) -> float:
    dom = b0.domain
    return dom.diameter + 2.0 * dom.cell_radius


def select_cover(
    b_stable: Bundle,
    b0: Bundle,
    theta: float = THETA,
    tol_member: float = TOL_MEMBER,
    r_start: float | None = None,
) -> list[CoverAtom]:
    """Greedy cover of the samples by certified continuity balls.

    Uncovered samples are visited in lexicographic order; each one seeds an
    atom with the base of its stable fiber. A sample whose ball cannot be
    certified is skipped and may still be covered by a later atom. A sample
    counts as covered when its whole mesh cell lies inside the ball.
    Raises :class:`CoverError` if samples remain uncovered.
    """
    dom = b0.domain
    pts = dom.points
    r_start = default_start_radius(b0) if r_start is None else r_start
    order = np.lexsort(pts.T[::-1])
    covered = np.zeros(len(dom), dtype=bool)
    atoms = []
    for i in order:
        if covered[i]:
            continue
        F = b_stable.fibers[i]
        if F.is_empty:
            continue
        r = shrink_radius(pts[i], F.base, b0, r_start, theta, stable=b_stable, tol_member=tol_member)
        if r is None:
            continue
        atoms.append(CoverAtom(pts[i].copy(), r, F.base.copy(), int(i)))
        covered |= np.linalg.norm(pts - pts[i], axis=1) + dom.cell_radius < r
    if not covered.all():
        missing = np.flatnonzero(~covered)
        raise CoverError(missing, pts[missing], atoms)
    return atoms


class SolutionField:
    """Continuous solution assembled from cover atoms; call it like a function."""

    def __init__(
        self,
        atoms,
        b0: Bundle,
        problem: Problem,
        tol_rank: float = TOL_RANK,
        tol_res: float = TOL_RES,
        tol_eval: float = TOL_EVAL,
    ):
        if not atoms:
            raise ValueError("need at least one cover atom")
        self.atoms = list(atoms)
        self.bundle = b0
        self.problem = problem
        self.tol_rank, self.tol_res, self.tol_eval = tol_rank, tol_res, tol_eval
        self._centers = np.array([a.center for a in self.atoms])
        self._radii = np.array([a.radius for a in self.atoms])
        self._seeds = np.array([a.seed for a in self.atoms])
        self._lo = np.array(problem.domain.lo)
        self._hi = np.array(problem.domain.hi)

    def bumps(self, y) -> np.ndarray:
        d2 = np.sum((self._centers - np.asarray(y, dtype=float)) ** 2, axis=1)
        return np.sqrt(np.maximum(self._radii**2 - d2, 0.0))

    def weights(self, y) -> np.ndarray:
        tau = self.bumps(y)
        total = tau.sum()
        if total <= 0:
            raise ValueError(f"no cover atom contains {np.asarray(y).tolist()}")
        return tau / total

    def _check(self, y):
        y = np.asarray(y, dtype=float).ravel()
        if y.shape[0] != self.problem.n:
            raise ValueError(f"query has {y.shape[0]} coordinates, expected {self.problem.n}")
        span = np.maximum(self._hi - self._lo, 1.0)
        if np.any(y < self._lo - 1e-12 * span) or np.any(y > self._hi + 1e-12 * span):
            raise ValueError(f"query {y.tolist()} lies outside the domain box")
        return y

    def fiber(self, y):
        y = self._check(y)
        return compute_fiber(
            self.problem.A_at(y, self.tol_eval), self.problem.gamma_at(y, self.tol_eval), self.tol_rank, self.tol_res
        )

    def evaluate(self, y) -> np.ndarray:
        y = self._check(y)
        w = self.weights(y)
        H = self.fiber(y)
        if H.is_empty:
            raise EmptyFiberError(f"the system has no solution at {y.tolist()}")
        active = w > 0
        proj = H.base + (self._seeds[active] - H.base) @ H.projector
        return w[active] @ proj

    __call__ = evaluate

    def evaluate_many(self, Y) -> np.ndarray:
        Y = np.array(Y, dtype=float, ndmin=2)
        return np.array([self.evaluate(y) for y in Y])

    def residual(self, y) -> float:
        y = self._check(y)
        phi = self.evaluate(y)
        return float(np.linalg.norm(self.problem.A_at(y, self.tol_eval) @ phi - self.problem.gamma_at(y, self.tol_eval)))

    def records(self, points=None):
        """Per-point ``{point, phi, residual}`` records (default: the samples)."""
        points = self.bundle.domain.points if points is None else np.array(points, dtype=float, ndmin=2)
        for y in points:
            phi = self.evaluate(y)
            res = float(np.linalg.norm(self.problem.A_at(y, self.tol_eval) @ phi - self.problem.gamma_at(y, self.tol_eval)))
            yield {"point": y.tolist(), "phi": phi.tolist(), "residual": res}

    def write_csv(self, fh, points=None) -> None:
        n, s = self.problem.n, self.problem.s
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(n)] + [f"phi{j + 1}" for j in range(s)] + ["residual"])
        for rec in self.records(points):
            w.writerow([repr(v) for v in rec["point"] + rec["phi"] + [rec["residual"]]])

    def write_json(self, fh, points=None) -> None:
        json.dump({"atoms": [a.to_dict() for a in self.atoms], "samples": list(self.records(points))}, fh)


def synthesize(
    atoms,
    b0: Bundle,
    problem: Problem,
    tol_rank: float = TOL_RANK,
    tol_res: float = TOL_RES,
    tol_eval: float = TOL_EVAL,
) -> SolutionField:
    """Build the glued solution after checking that every sample has positive total weight."""
    field = SolutionField(atoms, b0, problem, tol_rank, tol_res, tol_eval)
    pts = b0.domain.points
    total = np.zeros(len(pts))
    for a in field.atoms:
        total += bump(a.center, a.radius, pts)
    if np.any(total <= 0):
        bad = pts[total <= 0][0]
        raise ValueError(f"cover atoms leave sample {bad.tolist()} with zero total weight")
    return field


def evaluate_solution(f: SolutionField, y) -> np.ndarray:
    return f.evaluate(y)
