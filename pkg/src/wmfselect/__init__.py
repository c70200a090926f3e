"""Prediction-weighted maximum-frequency variable selection.

Adaptive LASSO / Elastic-Net solution paths, bootstrap frequency tables,
K-fold weighted selection, comparison criteria, a logistic variant with
sure independence screening, and a simulation harness.
"""

__version__ = "0.1.0"

from .core import (
    CoefficientVector,
    Dataset,
    PenaltySpec,
    adaptive_weights,
    ols_fit,
    pilot_estimate,
    ridge_fit,
    ridge_tune_bic,
)
from .errors import InputError, NumericalError, WMFError
from .glm import (
    GlmDataset,
    ScreenResult,
    classify,
    glm_criterion_select,
    glm_mcv,
    glm_wmf_select,
    logistic_adaptive_lasso_path,
    logistic_mle,
    sis_screen,
)
from .paths import (
    SolutionPath,
    TransitionPoint,
    cd_solve,
    fit_path,
    lars_lasso_path,
    larsen_path,
    soft_threshold_orthogonal,
)
from .resampling import BootstrapScheme, derive_seed, paired_bootstrap, residual_bootstrap
from .selection import (
    CvConfig,
    DimensionTable,
    SelectionResult,
    criterion_select,
    mcv_error,
    mf_select,
    mf_table,
    wmf_select,
)
from .simulation import (
    SCENARIOS,
    MetricsSummary,
    ScenarioSpec,
    compute_metrics,
    generate_scenario,
    run_replications,
    scenario_dims,
)
