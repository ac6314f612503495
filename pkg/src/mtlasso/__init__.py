"""l1/l2 block-regularized multi-task Lasso.

Solves K coupled linear regressions with a row-wise l2 penalty, computes
the theory quantities that govern support-union recovery, and runs
seeded Monte-Carlo phase-transition sweeps.
"""

from .backend import NUMBA_ENABLED, backend_name
from .datagen import (
    CoefficientModel,
    CovarianceModel,
    CovarianceSet,
    build_covariance,
    build_truth,
    lambda_rule,
    sample_problem,
)
from .harness import (
    ExperimentConfig,
    SweepResult,
    crossing_point,
    derive_seed,
    rescale_axis,
    run_sweep,
)
from .model import (
    CoefficientMatrix,
    GroundTruth,
    MvmrProblem,
    NoiseSpec,
    block_norm,
    kkt_residual,
    objective,
    recovery_check,
    support_of,
)
from .solver import (
    SolveReport,
    SolverConfig,
    block_soft_threshold,
    dual_witness,
    solve,
    solve_restricted,
)
from .theory import (
    ConditionReport,
    condition_report,
    conditional_covariance,
    irrepresentability,
    psi,
    psi_bounds_check,
    psi_single,
    rho_bounds,
    rho_p2,
    thresholds,
)

__version__ = "0.1.0"
