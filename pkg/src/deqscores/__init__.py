"""Dequantized review scores: merge quantized scores and partial rankings
into per-review real values by solving a small constrained QP."""

from .baselines import (
    GroupsInconsistent,
    NotTotalRanking,
    QuantizationBin,
    RankedGroup,
    UnequalReviewCounts,
    bre_adjusted_scores,
    partial_rankings_adjusted_scores,
    quantized_baseline,
    ranked_groups,
    score_only_closed_form,
)
from .dequantize import (
    AUTO,
    DequantizerConfig,
    assemble,
    consistency_report,
    dequantize,
    thurstone_joint_loglikelihood,
)
from .experiment import ExperimentReport, ExperimentSpec, FileSource, run_experiment
from .metrics import (
    AllTiedError,
    ScoreVectorPair,
    kendall_tau_error,
    l2_error,
    percentiles,
    project_to_original_scale,
    tie_fraction,
    trial_statistics,
)
from .model import (
    Assignment,
    DequantizedScores,
    PartialRanking,
    ReviewDataset,
    ScoreScale,
    ValidationError,
    Violation,
    derive_rankings_from_raw_scores,
    validate,
)
from .qp import (
    ConstraintCycle,
    InfeasibleProblem,
    MaxIterationsExceeded,
    QPProblem,
    Solution,
    SolverSettings,
    brute_force_minimize,
    check_feasibility,
    solve,
)
from .qv import DegenerateValidation, QVConfig, QVReport, coarsen, select_lambda
from .synth import SynthConfig, SynthInstance, generate, random_regular_assignment, trial_seed

__version__ = "0.1.0"
