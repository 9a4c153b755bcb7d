"""scikit-learn style front end to the diagnosis pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .continuity import THETA, TOL_MEMBER
from .fibers import TOL_RES
from .kerproj import TOL_RANK
from .pipeline import CONSTRUCTED, RESIDUAL_TOL, DiagnoseConfig, diagnose
from .saexpr import TOL_EVAL
from .validation import check_points, check_positive, check_problem, check_resolution


class NoSolutionError(RuntimeError):
    """The fitted problem has no certified continuous solution to predict with."""


class GlaeserSolver(BaseEstimator):
    """Decide whether ``A(x) phi(x) = gamma(x)`` has a continuous solution and build one.

    ``fit`` samples the domain (or uses the rows of ``X``), refines the
    solution fibers to a fixed point and tries to glue a solution.
    ``predict`` evaluates that solution at new points.

    Parameters
    ----------
    problem : Problem, dict, JSON string or path
    resolution : int or tuple, optional
        Grid points per axis; ignored when ``fit`` gets a point cloud.
    tol_rank, tol_res, tol_eval : float
        Rank, residual and expression-evaluation tolerances.
    shell_c : float
        Refinement tolerance per unit radius.
    n_shells : int
        Number of neighbourhood radii tried during refinement.
    max_iter : int, optional
        Refinement cap; default ``2 s + 1``.
    theta : float
        Jump factor for the continuity scan.
    tol_member : float
        Distance allowed between a projected value and the stable fiber.
    residual_tol : float
        Relative residual accepted by the final check.

    Attributes
    ----------
    verdict_ : str
    report_ : DiagnosisReport
    domain_ : SampledDomain
    bundle0_, stable_bundle_ : Bundle
    empty_points_ : ndarray of shape (m, n)
    atoms_ : list of CoverAtom
    solution_ : SolutionField or None
    """

    def __init__(
        self,
        problem=None,
        resolution=None,
        tol_rank=TOL_RANK,
        tol_res=TOL_RES,
        tol_eval=TOL_EVAL,
        shell_c=10.0,
        n_shells=5,
        max_iter=None,
        theta=THETA,
        tol_member=TOL_MEMBER,
        residual_tol=RESIDUAL_TOL,
    ):
        self.problem = problem
        self.resolution = resolution
        self.tol_rank = tol_rank
        self.tol_res = tol_res
        self.tol_eval = tol_eval
        self.shell_c = shell_c
        self.n_shells = n_shells
        self.max_iter = max_iter
        self.theta = theta
        self.tol_member = tol_member
        self.residual_tol = residual_tol

    def _config(self, n: int) -> DiagnoseConfig:
        for name in ("tol_rank", "tol_res", "tol_eval", "shell_c", "theta", "tol_member", "residual_tol"):
            check_positive(getattr(self, name), name)
        check_positive(self.n_shells, "n_shells", integer=True)
        check_positive(self.max_iter, "max_iter", integer=True, allow_none=True)
        return DiagnoseConfig(
            resolution=check_resolution(self.resolution, n),
            tol_rank=self.tol_rank,
            tol_res=self.tol_res,
            tol_eval=self.tol_eval,
            shell_c=self.shell_c,
            n_shells=self.n_shells,
            max_iter=self.max_iter,
            theta=self.theta,
            tol_member=self.tol_member,
            residual_tol=self.residual_tol,
        )

    def fit(self, X=None, y=None):
        """Run the diagnosis. ``X`` optionally replaces the grid sample; ``y`` is ignored."""
        if self.problem is None:
            raise ValueError("no problem given")
        problem = check_problem(self.problem)
        cfg = self._config(problem.n)
        points = None if X is None else check_points(X, problem)
        d = diagnose(problem, cfg, points)
        self.problem_ = problem
        self.config_ = cfg
        self.report_ = d.report
        self.verdict_ = d.report.verdict
        self.domain_ = d.domain
        self.bundle0_ = d.initial
        self.stable_bundle_ = d.stable
        self.empty_points_ = d.domain.points[d.stable.empty_mask]
        self.atoms_ = d.atoms
        self.solution_ = d.solution
        self.n_features_in_ = problem.n
        return self

    @property
    def solvable_(self) -> bool:
        check_is_fitted(self, "verdict_")
        return self.verdict_ == CONSTRUCTED

    def _solution(self):
        check_is_fitted(self, "verdict_")
        if self.solution_ is None:
            raise NoSolutionError(f"no solution to evaluate: verdict is {self.verdict_!r}")
        return self.solution_

    def predict(self, X) -> np.ndarray:
        """Values of the glued solution, shape ``(m, s)``."""
        sol = self._solution()
        X = check_points(X, self.problem_)
        return sol.evaluate_many(X)

    def residuals(self, X) -> np.ndarray:
        """``|A(x) phi(x) - gamma(x)|`` at each row of ``X``."""
        sol = self._solution()
        X = check_points(X, self.problem_)
        return np.array([sol.residual(x) for x in X])

    def score(self, X, y=None) -> float:
        """Negative worst relative residual on ``X`` (0 is perfect)."""
        sol = self._solution()
        X = check_points(X, self.problem_)
        worst = 0.0
        for x in X:
            g = self.problem_.gamma_at(x, self.tol_eval)
            worst = max(worst, sol.residual(x) / (1.0 + np.linalg.norm(g)))
        return -worst
