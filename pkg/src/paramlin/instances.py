"""Small worked problems used by the tests, the docs and the CLI."""

from __future__ import annotations

from .saexpr import Problem, parse_problem


def square_instance() -> Problem:
    """``x1 * phi = x1^2`` on ``[-1, 1]``; the continuous solution is ``phi(t) = t``."""
    return parse_problem({"n": 1, "A": [["x1"]], "gamma": ["x1^2"], "domain": {"lo": [-1], "hi": [1]}})


def abs_instance() -> Problem:
    """``x1 * phi = |x1|`` on ``[-1, 1]``; forces ``phi = sign`` away from 0, so no continuous solution."""
    return parse_problem({"n": 1, "A": [["x1"]], "gamma": ["abs(x1)"], "domain": {"lo": [-1], "hi": [1]}})


def inconsistent_instance() -> Problem:
    """Two contradicting constant equations ``phi = 1`` and ``phi = 2``."""
    return parse_problem(
        {"n": 1, "A": [["1"], ["1"]], "gamma": ["1", "2"], "domain": {"lo": [-1], "hi": [1]}}
    )


def free_instance(s: int = 2, n: int = 1) -> Problem:
    """``0 * phi = 0``: every fiber is all of ``R^s``."""
    return parse_problem(
        {
            "n": n,
            "A": [["0"] * s],
            "gamma": ["0"],
            "domain": {"lo": [-1] * n, "hi": [1] * n},
        }
    )
