"""Error bounds for equally weighted Gibbs ensemble classifiers."""

from ._validation import DomainError
from .bounds import (
    BoundContext,
    BoundKind,
    BoundResult,
    EnsembleSpec,
    Schedule,
    closed_form_schedule,
    ensemble_nearly_uniform_epsilon,
    ensemble_nearly_uniform_epsilon_observed,
    ensemble_uniform_epsilon,
    epsilon_hat,
    epsilon_star,
    epsilon_star_analytic_bound,
    extend_full_classifier_bound,
    hoeffding_epsilon,
    nearly_uniform_epsilon,
    relaxed_telescoping_epsilon,
    telescoping_epsilon,
    uniform_epsilon,
)
from .knn import (
    HoldoutGibbsKNN,
    LabeledDataset,
    brute_force_average_holdout_error,
    gibbs_average_holdout_error,
    nearest_neighbor_disagreement_bound,
    per_example_misclassification_probability,
)
from .simulate import BoundSpec, CoverageReport, SyntheticWorld, run_coverage_experiment
from .telescope import OptimizerGrid, brute_force_optimize, optimize_schedule

__version__ = "0.1.0"
