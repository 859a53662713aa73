"""Experiments: the three-car example and the two-car racing studies."""
from .oned import OneDGame, OneDSolution, build_1d_game, closed_form, solve_1d
from .racing_runs import (
    McReport,
    McRun,
    RaceOutcome,
    RaceScenario,
    SamplingError,
    SweepEntry,
    SweepResult,
    alpha_sweep,
    racing_sweep,
    run_monte_carlo,
    run_race,
    sample_initial_conditions,
)

__all__ = [
    "OneDGame",
    "OneDSolution",
    "build_1d_game",
    "closed_form",
    "solve_1d",
    "McReport",
    "McRun",
    "RaceOutcome",
    "RaceScenario",
    "SamplingError",
    "SweepEntry",
    "SweepResult",
    "alpha_sweep",
    "racing_sweep",
    "run_monte_carlo",
    "run_race",
    "sample_initial_conditions",
]
