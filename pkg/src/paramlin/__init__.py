"""Continuous solutions of linear systems whose coefficients depend on parameters."""

from .bundle import Bundle, RefinementConfig, SampledDomain, empty_fiber_scan, glaeser_refine_step, glaeser_stable, initial_bundle, sample_domain
from .continuity import DiscontinuityReport, GammaField, discontinuity_scan, gamma_field, witness_transfer
from .estimator import GlaeserSolver, NoSolutionError
from .fibers import AffineFiber, EmptyFiberError, compute_fiber, dist_affine_point, project_affine, restrict_fiber
from .kerproj import householder_qr, ker_basis, proj_ker, proj_ker_perp, row_space_basis, select_row_basis
from .pipeline import CONSTRUCTED, NOT_CERTIFIED, REFUTED, DiagnoseConfig, DiagnosisReport, StageError, check_equivalences, diagnose
from .saexpr import Domain, ExprDomainError, Problem, ProblemFormatError, load_problem, parse_expr, parse_problem
from .synth import CoverAtom, CoverError, SolutionField, bump, select_cover, shrink_radius, synthesize

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
