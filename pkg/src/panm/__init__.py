"""Peer-to-peer clustered federated learning with two-stage neighbor matching."""
from .engine import (
    METHODS,
    NeighborGraph,
    RoundMetrics,
    RunConfig,
    Simulation,
    SimulationResult,
    aggregate,
    comm_cost_analytic,
    joint_objective,
    neighbor_precision_recall,
    perfect_score_hook,
    run_simulation,
    write_outputs,
)
from .learner import DivergenceError
from .matching import em_fit, naem_update, nsmc_select, pens_stage2_threshold
from .theory import (
    BallSelectionSetting,
    ConfigurationError,
    ErrorBoundParams,
    monte_carlo_selection_oracle,
    nsmc_prob_series,
    one_round_error_bound,
    pens_prob_series,
    prob_at_least_white,
    prob_exact_white,
    stage_one_error_bound,
)

__version__ = "0.1.0"

__all__ = [
    "BallSelectionSetting",
    "ConfigurationError",
    "DivergenceError",
    "ErrorBoundParams",
    "METHODS",
    "NeighborGraph",
    "RoundMetrics",
    "RunConfig",
    "Simulation",
    "SimulationResult",
    "aggregate",
    "comm_cost_analytic",
    "em_fit",
    "joint_objective",
    "monte_carlo_selection_oracle",
    "naem_update",
    "neighbor_precision_recall",
    "nsmc_prob_series",
    "nsmc_select",
    "one_round_error_bound",
    "pens_prob_series",
    "pens_stage2_threshold",
    "perfect_score_hook",
    "prob_at_least_white",
    "prob_exact_white",
    "run_simulation",
    "stage_one_error_bound",
    "write_outputs",
]
