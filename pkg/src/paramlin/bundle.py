"""Sampled domains, bundles of solution fibers and discrete Glaeser refinement."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .fibers import TOL_RES, AffineFiber, compute_fiber, restrict_fiber
from .kerproj import TOL_RANK
from .saexpr import TOL_EVAL, ExprDomainError, Problem

_RANGE_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class SampledDomain:
    """Finite point cloud standing in for the compact set ``Q``."""

    points: np.ndarray  # N x n, lexicographic order for grids

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, ndmin=2)
        if pts.shape[0] < 2:
            raise ValueError("a sampled domain needs at least two points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_balls", {})

    def __len__(self):
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @cached_property
    def tree(self) -> cKDTree:
        return cKDTree(self.points)

    @cached_property
    def mesh(self) -> float:
        """Largest nearest-neighbour gap."""
        d, _ = self.tree.query(self.points, k=2)
        h = float(d[:, 1].max())
        if h <= 0:
            raise ValueError("sampled domain has duplicate points only")
        return h

    @cached_property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.points.max(axis=0) - self.points.min(axis=0)))

    @cached_property
    def cell_radius(self) -> float:
        """Half the diagonal of a mesh cell; every point of ``Q`` is this close to a sample."""
        return 0.5 * self.mesh * np.sqrt(self.n)

    def ball(self, x, rho: float) -> np.ndarray:
        """Indices of samples within distance ``rho`` of ``x`` (closed ball), sorted."""
        idx = self.tree.query_ball_point(np.asarray(x, dtype=float), rho * (1 + _RANGE_SLACK) + 1e-15)
        return np.array(sorted(idx), dtype=int)

    def neighbors(self, i: int, rho: float) -> np.ndarray:
        """Indices of samples within ``rho`` of sample ``i``, excluding ``i``."""
        key = round(rho, 15)
        table = self._balls.get(key)
        if table is None:
            lists = self.tree.query_ball_point(self.points, rho * (1 + _RANGE_SLACK) + 1e-15)
            table = [np.array(sorted(j for j in lst if j != k), dtype=int) for k, lst in enumerate(lists)]
            self._balls[key] = table
        return table[i]

    def index_of(self, x, tol: float = 1e-12) -> int:
        d, i = self.tree.query(np.asarray(x, dtype=float))
        if d > tol * (1 + self.diameter):
            raise ValueError(f"{x} is not a sample point")
        return int(i)


def sample_domain(problem: Problem, resolution, tol_eval: float = TOL_EVAL) -> SampledDomain:
    """Regular grid over the domain box, filtered by the membership predicate."""
    n = problem.n
    res = np.broadcast_to(np.asarray(resolution, dtype=int), (n,))
    if np.any(res < 2):
        raise ValueError("resolution must be at least 2 along every axis")
    axes = [np.linspace(lo, hi, k) for lo, hi, k in zip(problem.domain.lo, problem.domain.hi, res)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    if problem.domain.constraint is not None:
        keep = np.asarray(problem.domain.constraint.evaluate(grid, tol_eval)) >= -tol_eval
        grid = grid[keep]
    if grid.shape[0] == 0:
        raise ValueError("the domain predicate excludes every grid point")
    return SampledDomain(grid)


@dataclass(frozen=True)
class RefinementConfig:
    """Shell schedule ``rho_j = mesh * 2**(n_shells - j)`` with tolerance ``c * rho``."""

    c: float = 10.0
    n_shells: int = 5
    max_iter: int | None = None  # default 2s + 1
    tol_rank: float = TOL_RANK
    tol_stable: float = 1e-8
    angle_tol: float = 0.5  # sine above which a neighbour pins a fiber direction

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("shell constant c must be positive")
        if self.n_shells < 1:
            raise ValueError("need at least one shell")

    def radii(self, domain: SampledDomain) -> list[float]:
        """Shell radii from finest to coarsest, never below the mesh."""
        h = domain.mesh
        top = max(domain.diameter, h)
        out = []
        for k in range(self.n_shells):
            rho = min(h * 2.0**k, top)
            if not out or rho > out[-1]:
                out.append(rho)
        return out

    def cap(self, s: int) -> int:
        return self.max_iter if self.max_iter is not None else 2 * s + 1


@dataclass(frozen=True, eq=False)
class Bundle:
    """One fiber per sample point."""

    domain: SampledDomain
    fibers: tuple[AffineFiber, ...]
    generation: int = 0
    stabilized: bool | None = None  # set by glaeser_stable
    unsettled: tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "fibers", tuple(self.fibers))
        if len(self.fibers) != len(self.domain):
            raise ValueError("one fiber per sample point is required")

    @property
    def s(self) -> int:
        return self.fibers[0].s

    @cached_property
    def dims(self) -> np.ndarray:
        return np.array([f.dim for f in self.fibers], dtype=int)

    @cached_property
    def empty_mask(self) -> np.ndarray:
        return self.dims < 0

    @cached_property
    def bases(self) -> np.ndarray:
        """``N x s`` base points; rows of empty fibers are NaN."""
        out = np.full((len(self.fibers), self.s), np.nan)
        for i, f in enumerate(self.fibers):
            if not f.is_empty:
                out[i] = f.base
        return out

    @cached_property
    def projectors(self) -> np.ndarray:
        """``N x s x s`` projectors onto the direction spaces (zero for empty fibers)."""
        return np.stack([f.projector for f in self.fibers])

    @cached_property
    def kernel_jump_mask(self) -> np.ndarray:
        """Non-empty fibers of higher dimension than some fiber one mesh step away."""
        dom, dims = self.domain, self.dims
        out = np.zeros(len(dom), dtype=bool)
        for i in np.flatnonzero(dims >= 0):
            nb = dom.neighbors(i, dom.mesh)
            nb_dims = dims[nb][dims[nb] >= 0]
            out[i] = nb_dims.size > 0 and dims[i] > nb_dims.min()
        return out

    def project(self, idx, v) -> np.ndarray:
        """Project ``v`` onto the fibers at ``idx`` (rows of empty fibers are NaN)."""
        idx = np.asarray(idx, dtype=int)
        base = self.bases[idx]
        return base + np.einsum("kij,kj->ki", self.projectors[idx], np.asarray(v, dtype=float) - base)

    def histogram(self) -> dict[str, int]:
        keys, counts = np.unique(self.dims, return_counts=True)
        return {("empty" if k < 0 else f"dim{k}"): int(c) for k, c in zip(keys, counts)}

    def records(self):
        for x, f in zip(self.domain.points, self.fibers):
            yield {"point": x.tolist(), **f.to_dict()}

    def dump(self, fh) -> None:
        """Write one JSON record per sample point."""
        for rec in self.records():
            fh.write(json.dumps(rec) + "\n")


def initial_bundle(
    problem: Problem,
    domain: SampledDomain,
    tol_rank: float = TOL_RANK,
    tol_res: float = TOL_RES,
    tol_eval: float = TOL_EVAL,
) -> Bundle:
    """Fibers ``{lam : A(x) lam = gamma(x)}`` at every sample point."""
    pts = domain.points
    try:
        A = problem.A_at(pts, tol_eval)
        g = problem.gamma_at(pts, tol_eval)
    except ExprDomainError:
        for x in pts:  # locate the offending sample
            try:
                problem.A_at(x, tol_eval), problem.gamma_at(x, tol_eval)
            except ExprDomainError as exc:
                raise ExprDomainError(f"at sample {x.tolist()}: {exc}") from exc
        raise
    fibers = [compute_fiber(A[i], g[i], tol_rank, tol_res) for i in range(len(pts))]
    return Bundle(domain, fibers, generation=0)


def _restrict_at(b: Bundle, i: int, rho: float, cfg: RefinementConfig):
    nb = [j for j in b.domain.neighbors(i, rho) if not b.fibers[j].is_empty]
    if not nb:
        return None
    eps = cfg.c * rho
    return restrict_fiber(b.fibers[i], [(b.fibers[j], eps) for j in nb], cfg.tol_rank, cfg.angle_tol)


def glaeser_refine_step(b: Bundle, cfg: RefinementConfig = RefinementConfig()) -> Bundle:
    """One discrete refinement of every fiber against its neighbours.

    The finest shell containing a non-empty neighbour decides the new
    fiber. The next coarser shell is evaluated as well; points where the
    two disagree in dimension are listed in ``unsettled``.
    """
    radii = cfg.radii(b.domain)
    new = []
    unsettled = []
    for i, F in enumerate(b.fibers):
        if F.is_empty:
            new.append(F)
            continue
        chosen = None
        for k, rho in enumerate(radii):
            R = _restrict_at(b, i, rho, cfg)
            if R is None:
                continue
            chosen = R
            if k + 1 < len(radii):
                coarser = _restrict_at(b, i, radii[k + 1], cfg)
                if coarser is not None and coarser.dim != R.dim:
                    unsettled.append(i)
            break
        new.append(F if chosen is None else chosen)
    return Bundle(b.domain, new, generation=b.generation + 1, unsettled=tuple(unsettled))


def bundles_equal(a: Bundle, b: Bundle, tol: float = 1e-8) -> bool:
    return all(f.same_as(g, tol) for f, g in zip(a.fibers, b.fibers))


def glaeser_stable(b: Bundle, cfg: RefinementConfig = RefinementConfig()) -> Bundle:
    """Iterate refinement to a fixed point, at most ``cfg.cap(s)`` steps.

    The returned bundle has ``stabilized=False`` when the cap was reached
    with the last step still changing some fiber.
    """
    cur = b
    for _ in range(cfg.cap(b.s)):
        nxt = glaeser_refine_step(cur, cfg)
        if bundles_equal(cur, nxt, cfg.tol_stable):
            return replace(nxt, fibers=cur.fibers, stabilized=True)
        cur = nxt
    return replace(cur, stabilized=False)


def empty_fiber_scan(b: Bundle) -> np.ndarray:
    """Sample points whose fiber is empty (``m x n``)."""
    return b.domain.points[b.empty_mask]
