import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _instances import fiber_subset, grid_resolution, random_polynomial_problem
from paramlin.bundle import (
    RefinementConfig,
    SampledDomain,
    bundles_equal,
    empty_fiber_scan,
    glaeser_refine_step,
    glaeser_stable,
    initial_bundle,
    sample_domain,
)
from paramlin.instances import abs_instance, free_instance, inconsistent_instance, square_instance
from paramlin.saexpr import ExprDomainError, eval_vector, parse_problem


def box_problem(n, lo, hi, constraint=None):
    dom = {"lo": lo, "hi": hi}
    if constraint:
        dom["constraint"] = constraint
    return parse_problem({"n": n, "A": [["1"]], "gamma": ["0"], "domain": dom})


def test_sample_domain_examples():
    d = sample_domain(box_problem(1, [-1], [1]), 5)
    assert np.allclose(d.points.ravel(), [-1, -0.5, 0, 0.5, 1]) and d.mesh == pytest.approx(0.5)
    d = sample_domain(box_problem(2, [0, 0], [1, 1]), 3)
    assert len(d) == 9 and d.mesh == pytest.approx(0.5)
    d = sample_domain(box_problem(1, [-1], [1], "x1"), 5)
    assert np.allclose(d.points.ravel(), [0, 0.5, 1])


def test_sample_domain_errors():
    with pytest.raises(ValueError, match="excludes every"):
        sample_domain(box_problem(1, [-1], [1], "-1"), 5)
    with pytest.raises(ValueError, match="at least 2"):
        sample_domain(box_problem(1, [-1], [1]), 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.01, 1.5))
def test_range_query_exact(seed, rho):
    pts = np.random.default_rng(seed).uniform(-1, 1, size=(60, 2))
    d = SampledDomain(pts)
    x = pts[0]
    brute = np.flatnonzero(np.linalg.norm(pts - x, axis=1) <= rho)
    assert np.array_equal(d.ball(x, rho), brute)
    assert np.array_equal(d.neighbors(0, rho), brute[brute != 0])


def test_initial_bundle_examples():
    p = square_instance()
    d = sample_domain(p, 5)
    b = initial_bundle(p, d)
    assert b.fibers[3].dim == 0 and b.fibers[3].base == pytest.approx([0.5])
    assert b.fibers[2].dim == 1
    b = initial_bundle(abs_instance(), d)
    assert b.fibers[1].base == pytest.approx([-1]) and b.fibers[3].base == pytest.approx([1])
    b = initial_bundle(inconsistent_instance(), d)
    assert b.empty_mask.all()


def test_initial_bundle_reports_sample():
    p = parse_problem({"n": 1, "A": [["1"]], "gamma": ["sqrt(x1)"], "domain": {"lo": [-1], "hi": [1]}})
    with pytest.raises(ExprDomainError, match=r"sample \[-1.0\]"):
        initial_bundle(p, sample_domain(p, 5))


def test_refine_square_and_abs():
    for p, expect_empty in ((square_instance(), False), (abs_instance(), True)):
        d = sample_domain(p, 201)
        b1 = glaeser_refine_step(initial_bundle(p, d))
        mid = d.index_of([0.0])
        if expect_empty:
            assert b1.fibers[mid].is_empty
            assert np.array_equal(empty_fiber_scan(b1), [[0.0]])
        else:
            assert b1.fibers[mid].dim == 0 and abs(b1.fibers[mid].base[0]) < 1e-12


def test_invertible_constant_system_fixed():
    p = parse_problem({"n": 1, "A": [["2", "1"], ["1", "3"]], "gamma": ["1", "x1"], "domain": {"lo": [0], "hi": [1]}})
    b0 = initial_bundle(p, sample_domain(p, 11))
    assert bundles_equal(glaeser_refine_step(b0), b0)
    bs = glaeser_stable(b0)
    assert bs.stabilized and bs.generation == 1


def test_free_system_untouched():
    p = free_instance(3, 2)
    b0 = initial_bundle(p, sample_domain(p, 5))
    bs = glaeser_stable(b0)
    assert bs.stabilized and all(f.dim == 3 for f in bs.fibers)


def test_cap_flag():
    p = square_instance()
    b0 = initial_bundle(p, sample_domain(p, 21))
    bs = glaeser_stable(b0, RefinementConfig(max_iter=1))
    assert bs.stabilized is False and bs.generation == 1


def test_radii_schedule():
    d = sample_domain(square_instance(), 201)
    radii = RefinementConfig().radii(d)
    assert radii == pytest.approx([0.01, 0.02, 0.04, 0.08, 0.16])
    small = sample_domain(square_instance(), 3)
    assert RefinementConfig().radii(small) == pytest.approx([1.0, 2.0])
    with pytest.raises(ValueError):
        RefinementConfig(c=0)


def test_dump_format():
    p = abs_instance()
    b = glaeser_stable(initial_bundle(p, sample_domain(p, 41)))
    buf = io.StringIO()
    b.dump(buf)
    recs = [json.loads(line) for line in buf.getvalue().splitlines()]
    assert len(recs) == 41
    assert set(recs[0]) == {"point", "tag", "dim", "base", "dir"}
    assert recs[20] == {"point": [0.0], "tag": "empty", "dim": -1, "base": None, "dir": None}
    assert recs[0]["base"] == pytest.approx([-1.0]) and recs[0]["dir"] == []


def test_histogram():
    p = abs_instance()
    b = glaeser_stable(initial_bundle(p, sample_domain(p, 41)))
    assert b.histogram() == {"empty": 1, "dim0": 40}


def test_coarse_grid_cannot_see_jump():
    """With eps = c * h >= 1 the unit jump of abs at 0 is within tolerance."""
    p = abs_instance()
    b = glaeser_stable(initial_bundle(p, sample_domain(p, 21)))
    assert not b.empty_mask.any()


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_monotone_and_idempotent(seed):
    rng = np.random.default_rng(seed)
    p = random_polynomial_problem(rng)
    b = initial_bundle(p, sample_domain(p, grid_resolution(p)))
    cfg = RefinementConfig()
    for _ in range(cfg.cap(p.s)):
        nxt = glaeser_refine_step(b, cfg)
        assert np.all(nxt.dims <= b.dims)
        assert all(fiber_subset(f, g, rng) for f, g in zip(nxt.fibers, b.fibers))
        if bundles_equal(b, nxt):
            break
        b = nxt
    bs = glaeser_stable(initial_bundle(p, b.domain), cfg)
    if bs.stabilized:
        assert bundles_equal(glaeser_refine_step(bs, cfg), bs)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_refinement_keeps_true_solutions(seed):
    """A known continuous solution stays within eps of the refined fibers.

    One step always keeps it. Later steps keep it whenever refinement
    stabilizes before the cap; a non-stabilizing run is a collapse front
    whose errors add up ring by ring, and is flagged as such.
    """
    rng = np.random.default_rng(seed)
    p, phi = random_polynomial_problem(rng, consistent=True, return_solution=True)
    d = sample_domain(p, grid_resolution(p))
    vals = eval_vector(phi, d.points)
    cfg = RefinementConfig()
    eps = cfg.c * d.mesh
    stabilized = glaeser_stable(initial_bundle(p, d), cfg).stabilized
    b = initial_bundle(p, d)
    for step in range(cfg.cap(p.s) if stabilized else 1):
        b = glaeser_refine_step(b, cfg)
        assert not b.empty_mask.any(), step
        for f, v in zip(b.fibers, vals):
            assert np.linalg.norm(v - (f.base + f.projector @ (v - f.base))) <= eps


def test_resolution_robustness():
    for res in (101, 201, 401):
        sq = glaeser_stable(initial_bundle(square_instance(), sample_domain(square_instance(), res)))
        ab = glaeser_stable(initial_bundle(abs_instance(), sample_domain(abs_instance(), res)))
        assert sq.histogram() == {"dim0": res}
        assert ab.histogram() == {"empty": 1, "dim0": res - 1}
        assert np.array_equal(empty_fiber_scan(ab), [[0.0]])
