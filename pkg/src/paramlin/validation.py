"""Input checks shared by the estimator and the CLI."""

from __future__ import annotations

import os
from numbers import Integral, Real

import numpy as np
from sklearn.utils import check_array

from .saexpr import Problem, load_problem, parse_problem


def check_problem(problem) -> Problem:
    """Accept a Problem, a decoded mapping, a JSON string or a path to a JSON file."""
    if isinstance(problem, Problem):
        return problem
    if isinstance(problem, dict):
        return parse_problem(problem)
    if isinstance(problem, os.PathLike):
        return load_problem(problem)
    if isinstance(problem, str):
        return parse_problem(problem) if problem.lstrip().startswith("{") else load_problem(problem)
    raise TypeError(f"cannot build a Problem from {type(problem).__name__}")


def check_points(X, problem: Problem, in_domain: bool = True, name: str = "X") -> np.ndarray:
    """2-D finite float array with ``problem.n`` columns, optionally inside the domain."""
    X = check_array(X, dtype=np.float64, ensure_2d=False, input_name=name)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if problem.n == 1 else X.reshape(1, -1)
    if X.shape[1] != problem.n:
        raise ValueError(f"{name} has {X.shape[1]} columns, expected {problem.n}")
    if in_domain:
        inside = problem.domain.contains(X)
        if not np.all(inside):
            bad = X[~inside][0]
            raise ValueError(f"{name} contains {bad.tolist()}, which lies outside the domain")
    return X


def check_positive(value, name: str, integer: bool = False, allow_none: bool = False):
    if value is None and allow_none:
        return value
    kind = Integral if integer else Real
    if isinstance(value, bool) or not isinstance(value, kind) or not np.isfinite(value) or value <= 0:
        what = "positive integer" if integer else "positive finite number"
        raise ValueError(f"{name} must be a {what}, got {value!r}")
    return value


def check_resolution(resolution, n: int):
    if resolution is None:
        return None
    if isinstance(resolution, Integral) and not isinstance(resolution, bool):
        res = (int(resolution),) * n
    else:
        res = tuple(int(v) for v in resolution)
        if len(res) != n:
            raise ValueError(f"resolution needs {n} entries, got {len(res)}")
    if min(res) < 2:
        raise ValueError("resolution must be at least 2 along every axis")
    return res[0] if len(set(res)) == 1 else res
