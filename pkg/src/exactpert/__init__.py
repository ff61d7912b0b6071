"""Borel-resummed perturbation theory for implicit equations and matrix families."""

from .borel import (
    CoefficientFunction,
    RationalTerm,
    RayFunction,
    RayGrid,
    convolve,
    growth_estimate,
    picard_solve,
    successive_terms,
    taylor_match,
)
from .errors import ConvergenceError, DomainError, ExactPertError
from .estimators import BlockDiagonalizer, EigenResummer, ImplicitResummer, SeriesResummer
from .formal import (
    FormalSolution,
    ProblemSpec,
    StandardFormProblem,
    formal_ift,
    formal_residual,
    g_recursion,
    majorant_check,
    majorant_constants,
    majorant_growth_fit,
    majorant_sequence,
    solve_leading,
    to_standard_form,
)
from .laplace import (
    ResummationResult,
    ResumParams,
    SectorSpec,
    laplace,
    pade_continue,
    resum_implicit_solution,
    resum_series,
)
from .matrix import (
    BlockDecomposition,
    BlockPartition,
    MatrixFamily,
    assemble_P_Lambda,
    eigen_resum,
    leading_split,
    recursive_block_diagonalize,
    solve_ST_formal,
)
from .oracle import eig_direct, newton_direct, reference_laplace
from .problem_io import ProblemFile, dump_problem, parse_problem
from .series import (
    BorelSeries,
    GrowthBound,
    MultiIndex,
    TruncatedSeries,
    formal_borel,
    gevrey_fit,
    multiindex_enumerate,
    ts_add,
    ts_mul,
    ts_pow_multi,
    ts_scale,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
