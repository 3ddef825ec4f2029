"""Desk-scale simulator of buffer-aware user association and energy-optimal
task offloading in multi-access edge computing.

Pipeline: a :class:`~mecsim.scenario.Scenario` fixes topology, tasks and
channels; the association phase assigns users to buffer-limited servers with
admission priorities driven by each server's buffer-ruin probability; the
offloading phase then splits every admitted task between device and server to
minimize user-side energy under per-task deadlines. The harness replays this
over replications and emits CSV metrics.
"""

from .scenario import (
    BITS_PER_KB,
    BITS_PER_MB,
    ChannelParams,
    ConfigValidationError,
    Scenario,
    ServerSpec,
    SimConfig,
    UserSpec,
    generate_scenario,
    merge_config,
    validate_config,
)
from .ruin import (
    RuinEstimate,
    SurplusParams,
    priority_factor,
    ruin_probability_analytic,
    ruin_probability_mc,
    simulate_surplus_path,
)
from .association import (
    Association,
    admission_metrics,
    baseline_association_greedy,
    baseline_association_uncapped,
    build_user_preferences,
    ruin_association,
)
from .offload import (
    OffloadContext,
    OffloadDecision,
    baseline_offload,
    offload_bounds,
    optimal_offload,
    oracle_offload_grid,
    total_energy,
)
from .harness import (
    ExperimentPreset,
    ExperimentResult,
    emit_csv,
    load_preset,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "BITS_PER_KB",
    "BITS_PER_MB",
    "ChannelParams",
    "ConfigValidationError",
    "Scenario",
    "ServerSpec",
    "SimConfig",
    "UserSpec",
    "generate_scenario",
    "merge_config",
    "validate_config",
    "RuinEstimate",
    "SurplusParams",
    "priority_factor",
    "ruin_probability_analytic",
    "ruin_probability_mc",
    "simulate_surplus_path",
    "Association",
    "admission_metrics",
    "baseline_association_greedy",
    "baseline_association_uncapped",
    "build_user_preferences",
    "ruin_association",
    "OffloadContext",
    "OffloadDecision",
    "baseline_offload",
    "offload_bounds",
    "optimal_offload",
    "oracle_offload_grid",
    "total_energy",
    "ExperimentPreset",
    "ExperimentResult",
    "emit_csv",
    "load_preset",
    "run_experiment",
    "__version__",
]
