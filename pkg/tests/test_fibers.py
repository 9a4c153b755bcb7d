import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_matrix
from paramlin.fibers import (
    AffineFiber,
    EmptyFiberError,
    compute_fiber,
    dist_affine_point,
    project_affine,
    restrict_fiber,
)
from paramlin.kerproj import proj_ker_perp

LINE = compute_fiber([[1.0, 1.0]], [2.0])  # {l1 + l2 = 2}


def test_compute_fiber_examples():
    assert np.allclose(LINE.base, [1, 1])
    assert LINE.dim == 1 and np.allclose(np.abs(LINE.dir.ravel()), [2**-0.5] * 2)
    assert compute_fiber([[1.0], [1.0]], [1.0, 2.0]).is_empty
    F = compute_fiber(np.zeros((1, 2)), [0.0])
    assert F.dim == 2 and np.allclose(F.base, 0)


def test_projection_and_distance_examples():
    assert np.allclose(project_affine(LINE, [0.0, 0.0]), [1, 1])
    assert dist_affine_point(LINE, [0.0, 0.0]) == pytest.approx(2**0.5)
    assert np.allclose(project_affine(LINE, [2.0, 0.0]), [2, 0])
    assert dist_affine_point(LINE, [3.0, -1.0]) == pytest.approx(0, abs=1e-14)
    w = np.array([0.3, -7.0])
    assert np.allclose(project_affine(AffineFiber.full(2), w), w)
    P = AffineFiber.point([1.0, 2.0])
    assert dist_affine_point(P, [4.0, 6.0]) == pytest.approx(5)


def test_empty_contract():
    E = AffineFiber.empty(2)
    assert E.dim == -1 and E.is_empty
    with pytest.raises(EmptyFiberError):
        project_affine(E, [0.0, 0.0])
    with pytest.raises(EmptyFiberError):
        dist_affine_point(E, [0.0, 0.0])
    assert not E.contains([0.0, 0.0])


def test_restrict_examples():
    R = restrict_fiber(AffineFiber.full(2), [(LINE, 1e-12)])
    assert R.same_as(LINE, 1e-12)
    G = compute_fiber([[1.0, -1.0]], [0.0])
    R = restrict_fiber(LINE, [(G, 1e-12)])
    assert R.dim == 0 and np.allclose(R.base, [1, 1])
    parallel = compute_fiber([[1.0, 1.0]], [3.0])
    assert restrict_fiber(LINE, [(parallel, 0.1)]).is_empty
    assert restrict_fiber(LINE, [(parallel, 1.0)]).same_as(LINE)


def test_restrict_keeps_slightly_tilted_directions():
    """A small tilt below the angle tolerance leaves the direction free."""
    tilted = compute_fiber([[1.0, 1.02]], [2.0])
    assert restrict_fiber(LINE, [(tilted, 0.5)], angle_tol=0.1).same_as(LINE)
    assert restrict_fiber(LINE, [(tilted, 0.5)]).dim == 0


def test_restrict_ignores_empty_constraints():
    assert restrict_fiber(LINE, [(AffineFiber.empty(2), 0.1)]) is LINE
    assert restrict_fiber(AffineFiber.empty(2), [(LINE, 0.1)]).is_empty


def test_to_dict():
    d = LINE.to_dict()
    assert d["tag"] == "nonempty" and d["dim"] == 1 and len(d["dir"]) == 1
    assert AffineFiber.empty(3).to_dict() == {"tag": "empty", "dim": -1, "base": None, "dir": None}


def consistent_system(seed):
    rng = np.random.default_rng(seed)
    A = random_matrix(rng)
    phi = rng.normal(size=A.shape[1]) * 2
    return rng, A, A @ phi, phi


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fiber_invariants(seed):
    rng, A, g, phi = consistent_system(seed)
    F = compute_fiber(A, g)
    assert not F.is_empty
    assert np.abs(F.dir.T @ F.dir - np.eye(F.dim)).max(initial=0.0) <= 1e-10
    assert np.abs(F.dir.T @ F.base).max(initial=0.0) <= 1e-9 * (1 + np.linalg.norm(F.base))
    assert F.contains(phi, 1e-8 * (1 + np.linalg.norm(phi)))
    # base is the minimal-norm solution and equals Pi1 of any solution
    for other in F.sample(rng, 20, scale=3.0):
        assert np.linalg.norm(F.base) <= np.linalg.norm(other) + 1e-12
    assert np.allclose(F.base, proj_ker_perp(A, phi), atol=1e-8 * (1 + np.linalg.norm(phi)))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_projection_lipschitz_idempotent(seed):
    rng, A, g, _ = consistent_system(seed)
    F = compute_fiber(A, g)
    u, w = rng.normal(size=(2, A.shape[1])) * 4
    pu, pw = project_affine(F, u), project_affine(F, w)
    assert np.linalg.norm(pu - pw) <= np.linalg.norm(u - w) + 1e-9
    assert np.allclose(project_affine(F, pu), pu, atol=1e-9)
    assert dist_affine_point(F, pu) <= 1e-9 * (1 + np.linalg.norm(pu))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([None, 0.05, 0.3]))
def test_restrict_monotone(seed, angle):
    rng, A, g, _ = consistent_system(seed)
    F = compute_fiber(A, g)
    constraints = []
    for _ in range(rng.integers(1, 4)):
        B = A + 0.1 * rng.normal(size=A.shape)
        constraints.append((compute_fiber(B, B @ F.sample(rng, 1)[0]), float(rng.uniform(0.05, 2.0))))
    R = restrict_fiber(F, constraints, angle_tol=angle)
    assert R.dim <= F.dim
    if not R.is_empty:
        for v in R.sample(rng, 20):
            assert dist_affine_point(F, v) <= 1e-8 * (1 + np.linalg.norm(v))
        assert restrict_fiber(R, constraints, angle_tol=angle).dim <= R.dim
