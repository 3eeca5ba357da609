"""Exponential-weights learning dynamics in finite normal-form games."""
from .engine import (
    DEFAULT_EPS,
    DEFAULT_HORIZON,
    EWConfig,
    EWState,
    RunOutcome,
    StoppingRule,
    StopReason,
    Trajectory,
    apply_actions,
    closed_form_profile,
    mixed_profile,
    run,
    simulate,
    step,
)
from .game import (
    Game,
    GameFormatError,
    MixedProfile,
    NeepComponent,
    enumerate_neep_2p,
    expected_payoff,
    fixture,
    is_maximal_support_neep,
    is_nash,
    is_neep,
    is_strong_coordination,
    load_game,
    save_game,
    strict_nash_equilibria,
)
from .harness import (
    BasinGrid,
    ExperimentResult,
    ExperimentSpec,
    absorption_time_stats,
    run_grid,
    solve_basin_fixed_point,
)

__version__ = "0.1.0"
