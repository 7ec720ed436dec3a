"""Exact and sampled Shapley values for cooperative games and regression models."""

from .attribution import (
    AttributionResult,
    ShapleyExplainer,
    coalition_table,
    coalition_value,
    mean_abs_attribution,
    select_background,
    shap_exact,
    shap_sampled,
)
from .data import Dataset, read_csv, write_csv
from .exceptions import (
    CoalitionAttribError,
    InsufficientDataError,
    NumericError,
    RankDeficiencyError,
    SchemaError,
    SizeLimitError,
    ValidationError,
)
from .forest import ForestConfig, RandomForest, RegressionTree, fit_forest, fit_tree, predict_forest
from .game import (
    CoalitionGame,
    ShapleyAllocation,
    load_game,
    marginal_contribution,
    shapley_by_permutations,
    shapley_by_subsets,
)
from .linear import LinearModel, OLSRegression, fit_ols, predict_linear
from .report import ComparisonReport, RunConfig, emit_report, load_report, run_experiment
from .simulation import (
    ExperimentSpec,
    RngState,
    generate,
    generate_linear3,
    generate_nonlinear3,
    generate_twofactor,
)

__version__ = "0.1.0"
