"""Graph-agnostic total-treatment-effect estimation under staggered rollouts.

Simulation toolkit: interference-network generation, polynomial
potential-outcomes models, Bernoulli/completely-randomized rollout
designs, interpolation and baseline estimators, exact verification
oracles, and a reproducible Monte-Carlo harness.
"""

from .design import (
    TreatmentSchedule,
    bracket,
    brd_schedule,
    brd_target_ladder,
    crd_schedule,
    crd_target_ladder,
    load_schedule,
    save_schedule,
)
from .errors import CapacityError, ConfigError, DegenerateGroupError, ParseError
from .estimators import (
    Estimate,
    InterpolationWeights,
    dm,
    dm_threshold,
    lagrange_weights,
    ls_estimate,
    tte_pi,
    two_point_linear,
)
from .graph import Graph, generate_configuration_model, load_edge_list, save_edge_list
from .harness import (
    ExperimentConfig,
    ExperimentRecord,
    aggregate,
    run_experiment,
    write_records_csv,
    write_summary_csv,
)
from .oracle import (
    EnumerationReport,
    WeightSolution,
    bracket_ratio_check,
    exact_moments_brd,
    exact_moments_crd,
    inverse_binomial_moment,
    linear_variance_bound,
    optimal_weights,
)
from .outcomes import (
    CoefficientModel,
    ObservationSet,
    ParametricModel,
    expand_to_coefficients,
    load_model,
    observe,
    sample_parametric_model,
    save_model,
    true_tte,
)
from .verification import run_verification

__all__ = [name for name in dir() if not name.startswith("_")]
