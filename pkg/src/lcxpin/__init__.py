"""Simulation and optimization toolkit for leaky-coaxial-cable antenna arrays.

Covers the two-stage channel model (guided propagation, directional
radiation, single-bounce scattering), coalitional assignment of users to
cables and radiating slots, successive convex power allocation under
per-user rate targets, closed-form coverage and directivity conditions,
and a Monte-Carlo experiment harness with a CLI.
"""

from .analysis import (
    GeometrySummary,
    central_antenna_rate,
    coverage_advantage_condition,
    directional_advantage_condition,
    local_gain,
    mean_central_rate_disc,
    rate_gap_lower_bound,
    single_slot_rate,
    worst_cell_rate,
)
from .channel import (
    ChannelSet,
    cable_channel,
    compose_channels,
    dump_channels,
    effective_channel,
    effective_channels,
    radiated_los,
    scattered_channel,
)
from .config import ConfigError, SimConfig, dbm_to_mw, load_config, mw_to_dbm, write_config
from .experiments import (
    BENCHMARKS,
    ImpactCurve,
    SweepResult,
    SweepSpec,
    TrialResult,
    channel_impact_experiment,
    fixed_antenna_benchmark,
    run_sweep,
    run_trial,
)
from .game import (
    CoalitionStructure,
    GameLimits,
    GameTrace,
    init_structure,
    nearest_cable,
    nearest_slot,
    run_coalition_game,
    try_slot_toggle,
    try_user_switch,
    utility,
    verify_nash_stable,
)
from .power import (
    DcModel,
    InfeasibleQoSError,
    ScaIterate,
    ScaTrace,
    build_dc_model,
    kkt_residual,
    linearize,
    run_sca,
    solve_subproblem,
)
from .rate import (
    AssignmentState,
    PowerAllocation,
    RateReport,
    active_counts,
    all_rates,
    rate_report,
    sum_rate,
    user_rate,
)
from .scenario import PhysConstants, Scenario, build_scenario, elevation_angle, trial_seed

__version__ = "0.1.0"

__all__ = [
    "AssignmentState",
    "BENCHMARKS",
    "ChannelSet",
    "CoalitionStructure",
    "ConfigError",
    "DcModel",
    "GameLimits",
    "GameTrace",
    "GeometrySummary",
    "ImpactCurve",
    "InfeasibleQoSError",
    "PhysConstants",
    "PowerAllocation",
    "RateReport",
    "ScaIterate",
    "ScaTrace",
    "Scenario",
    "SimConfig",
    "SweepResult",
    "SweepSpec",
    "TrialResult",
    "active_counts",
    "all_rates",
    "build_dc_model",
    "build_scenario",
    "cable_channel",
    "central_antenna_rate",
    "channel_impact_experiment",
    "compose_channels",
    "coverage_advantage_condition",
    "dbm_to_mw",
    "directional_advantage_condition",
    "dump_channels",
    "effective_channel",
    "effective_channels",
    "elevation_angle",
    "fixed_antenna_benchmark",
    "init_structure",
    "kkt_residual",
    "linearize",
    "local_gain",
    "load_config",
    "mean_central_rate_disc",
    "mw_to_dbm",
    "nearest_cable",
    "nearest_slot",
    "radiated_los",
    "rate_gap_lower_bound",
    "rate_report",
    "run_coalition_game",
    "run_sca",
    "run_sweep",
    "run_trial",
    "scattered_channel",
    "single_slot_rate",
    "solve_subproblem",
    "sum_rate",
    "trial_seed",
    "try_slot_toggle",
    "try_user_switch",
    "user_rate",
    "utility",
    "verify_nash_stable",
    "worst_cell_rate",
    "write_config",
]
