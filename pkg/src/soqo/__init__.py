"""Smoothed online quadratic optimization: schedules, policies, bounds and experiments."""

from .bounds import (
    BoundReport,
    bound_report,
    cr_bounds,
    fi_regret_lower,
    framework_cr,
    ftm_regret_lower,
    interpolation_expected_cost,
    lai_expected_cost,
    lai_gamma_regret_upper,
    robd_regret_lower,
    static_optimal_expected_cost,
    w_function,
)
from .environments import (
    IncrementSpec,
    MinimizerTrace,
    TraceSpec,
    adversary_rule,
    correlate,
    generate_trace,
    sample_increments,
)
from .errors import *  # noqa: F401,F403
from .experiments import ExperimentConfig, ResultRow, load_config, preset, run_experiment
from .montecarlo import MonteCarloEstimate, monte_carlo, scenario_tree_optimum
from .plotting import emit_plot
from .policies import (
    PolicySpec,
    PolicyState,
    offline_optimal,
    run_policy,
    static_optimal_action,
    step_general_optimal,
    step_interpolation,
)
from .schedules import CoefficientSchedule, fi_schedule, lai_gamma_schedule, lai_schedule, robd_matrix
from .spectral import SpectralMatrix, apply_scalar_fn, decompose, fixed_point_matrix

__version__ = "0.1.0"
