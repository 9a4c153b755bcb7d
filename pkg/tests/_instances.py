"""Random problem generators shared by the test modules."""

from fractions import Fraction

import numpy as np

from paramlin.saexpr import Const, Coord, Domain, MatrixFunction, Problem, VectorFunction


def random_poly(rng, n, degree=2, density=0.6):
    """Sparse polynomial in ``x1..xn`` with small integer coefficients."""
    terms = []
    for _ in range(rng.integers(1, 4)):
        if rng.random() > density:
            continue
        coef = int(rng.integers(-3, 4))
        if coef == 0:
            continue
        t = Const(Fraction(coef))
        for _ in range(rng.integers(0, degree + 1)):
            t = t * Coord(int(rng.integers(1, n + 1)))
        terms.append(t)
    if not terms:
        return Const(Fraction(0))
    out = terms[0]
    for t in terms[1:]:
        out = out + t
    return out


def random_polynomial_problem(rng, n=None, r=None, s=None, consistent=None, return_solution=False):
    """Random instance with ``n <= 2`` and ``r, s <= 3``.

    When ``consistent`` is true, ``gamma = A phi0`` for a random polynomial
    ``phi0``, so a continuous solution exists; ``return_solution`` also
    returns ``phi0`` as a VectorFunction (None when inconsistent).
    """
    n = int(rng.integers(1, 3)) if n is None else n
    r = int(rng.integers(1, 4)) if r is None else r
    s = int(rng.integers(1, 4)) if s is None else s
    A = tuple(tuple(random_poly(rng, n) for _ in range(s)) for _ in range(r))
    if consistent is None:
        consistent = rng.random() < 0.5
    if consistent:
        phi0 = [random_poly(rng, n, degree=1) for _ in range(s)]
        gamma = []
        for row in A:
            acc = Const(Fraction(0))
            for a, p in zip(row, phi0):
                acc = acc + a * p
            gamma.append(acc)
    else:
        phi0 = None
        gamma = [random_poly(rng, n) for _ in range(r)]
    dom = Domain((-1.0,) * n, (1.0,) * n)
    problem = Problem(MatrixFunction(A), VectorFunction(tuple(gamma)), dom)
    if return_solution:
        return problem, (None if phi0 is None else VectorFunction(tuple(phi0)))
    return problem


def fiber_subset(new, old, rng, tol=1e-8):
    """``new`` is contained in ``old`` (checked on random points of ``new``)."""
    from paramlin.fibers import dist_affine_point

    if new.is_empty:
        return True
    if old.is_empty or new.dim > old.dim:
        return False
    return all(dist_affine_point(old, v) <= tol * (1 + np.linalg.norm(v)) for v in new.sample(rng, 20))


def grid_resolution(problem):
    return 41 if problem.n == 1 else 9
