"""Projection fields ``y -> proj of v onto H_y`` and grid-level discontinuity checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .bundle import _RANGE_SLACK, Bundle
from .fibers import dist_affine_point

THETA = 20.0
TOL_MEMBER = 1e-6


@dataclass(frozen=True, eq=False)
class GammaField:
    """Samples of the projection field of ``seed`` over ``B(center, radius)``.

    ``values`` has one row per index in ``indices``; rows where the
    generation-0 fiber is empty are NaN and ``defined`` is False there.
    """

    bundle: Bundle
    center: np.ndarray
    seed: np.ndarray
    radius: float
    indices: np.ndarray
    values: np.ndarray

    @property
    def defined(self) -> np.ndarray:
        return ~self.bundle.empty_mask[self.indices]

    @property
    def points(self) -> np.ndarray:
        return self.bundle.domain.points[self.indices]

    def as_dict(self) -> dict:
        return {int(i): v for i, v in zip(self.indices, self.values)}


@dataclass(frozen=True)
class DiscontinuityReport:
    flagged: tuple[int, ...]  # sample indices
    points: tuple[tuple[float, ...], ...]
    magnitudes: tuple[float, ...]
    kinds: tuple[str, ...]  # "jump" or "off-stable"
    classification: str  # "none", "isolated-only" or "clustered"
    threshold: float  # theta * local Lipschitz estimate
    lipschitz: float
    undefined: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "classification": self.classification,
            "flagged": [
                {"index": i, "point": list(p), "magnitude": m, "kind": k}
                for i, p, m, k in zip(self.flagged, self.points, self.magnitudes, self.kinds)
            ],
            "threshold": self.threshold,
            "lipschitz": self.lipschitz,
            "undefined": list(self.undefined),
        }


def gamma_field(b0: Bundle, v, x, r: float) -> GammaField:
    """Project the fixed vector ``v`` onto every generation-0 fiber in ``B(x, r)``."""
    if r <= 0:
        raise ValueError("radius must be positive")
    v = np.asarray(v, dtype=float)
    idx = b0.domain.ball(x, r)
    return GammaField(b0, np.asarray(x, dtype=float), v, float(r), idx, b0.project(idx, v))


def witness_transfer(g: GammaField, v_new, b0: Bundle | None = None) -> GammaField:
    """Field for another seed, rebuilt from ``g`` without projecting onto fibers.

    Uses ``Pi1 g(y) + v' - Pi1 v'`` where ``Pi1 = I - P_y`` projects onto
    ``(Ker A(y))^perp``.
    """
    b0 = g.bundle if b0 is None else b0
    v_new = np.asarray(v_new, dtype=float)
    P = b0.projectors[g.indices]
    pi1_g = g.values - np.einsum("kij,kj->ki", P, g.values)
    pi1_v = v_new - P @ v_new
    values = pi1_g + v_new - pi1_v
    values[~g.defined] = np.nan
    return GammaField(b0, g.center, v_new, g.radius, g.indices, values)


def singular_samples(b0: Bundle) -> np.ndarray:
    """Mask of samples whose generation-0 fiber is larger than a neighbouring one.

    These are the points where the kernel of ``A`` jumps up, i.e. the only
    places a projection field can fail to be continuous without any
    visible jump on the grid.
    """
    return b0.kernel_jump_mask


def discontinuity_scan(
    g: GammaField,
    domain=None,
    theta: float = THETA,
    stable: Bundle | None = None,
    tol_member: float = TOL_MEMBER,
) -> DiscontinuityReport:
    """Flag grid jumps of ``g`` that are large against its median local slope.

    A neighbour pair (samples at most one mesh apart) jumps when
    ``|g(y) - g(y')| > theta * L * |y - y'|`` with ``L`` the median slope
    over all pairs. Each jumping pair flags the endpoint with the larger
    share of jumping pairs. When ``stable`` is given, singular samples whose
    value lies off the stable fiber are flagged too.
    """
    domain = g.bundle.domain if domain is None else domain
    defined = g.defined
    if not defined.any():
        raise ValueError("projection field is undefined at every sample of the ball")
    if defined.sum() < 2 and stable is None:
        raise ValueError("need at least two defined samples")
    idx = g.indices[defined]
    vals = g.values[defined]
    pts = domain.points[idx]
    h = domain.mesh

    pairs = (
        cKDTree(pts).query_pairs(h * (1 + _RANGE_SLACK) + 1e-15, output_type="ndarray")
        if len(idx) > 1
        else np.zeros((0, 2), dtype=int)
    )
    flags: dict[int, tuple[float, str]] = {}
    L = 0.0
    if len(pairs):
        gaps = np.linalg.norm(pts[pairs[:, 0]] - pts[pairs[:, 1]], axis=1)
        jumps = np.linalg.norm(vals[pairs[:, 0]] - vals[pairs[:, 1]], axis=1)
        L = float(np.median(jumps / gaps))
        atol = 1e-9 * (1.0 + np.abs(vals).max())
        bad = jumps > theta * L * gaps + atol
        if bad.any():
            incident = np.bincount(pairs.ravel(), minlength=len(idx))
            bad_incident = np.bincount(pairs[bad].ravel(), minlength=len(idx))
            share = bad_incident / np.maximum(incident, 1)
            for (a, b), jump in zip(pairs[bad], jumps[bad]):
                pick = b if share[b] > share[a] else a
                k = int(idx[pick])
                flags[k] = (max(float(jump), flags.get(k, (0.0, ""))[0]), "jump")

    if stable is not None:
        singular = g.bundle.kernel_jump_mask
        for k, val in zip(idx, vals):
            if not singular[k]:
                continue
            F = stable.fibers[k]
            d = np.inf if F.is_empty else dist_affine_point(F, val)
            if d > tol_member * (1.0 + np.linalg.norm(val)):
                flags[int(k)] = (float(d), "off-stable")

    flagged = tuple(sorted(flags))
    fpts = domain.points[list(flagged)] if flagged else np.zeros((0, domain.n))
    if not flagged:
        cls = "none"
    elif len(flagged) == 1:
        cls = "isolated-only"
    else:
        cls = "isolated-only" if pdist(fpts).min() > 2 * h else "clustered"
    return DiscontinuityReport(
        flagged=flagged,
        points=tuple(tuple(map(float, p)) for p in fpts),
        magnitudes=tuple(flags[k][0] for k in flagged),
        kinds=tuple(flags[k][1] for k in flagged),
        classification=cls,
        threshold=theta * L,
        lipschitz=L,
        undefined=tuple(int(k) for k in g.indices[~defined]),
    )
