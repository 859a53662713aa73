"""Normalized and non-normalized generalized Nash equilibria via scaled shared multipliers."""
from .gnep_core import (
    EquilibriumReport,
    GameSpec,
    GameSpecError,
    MultiplierSet,
    ScalingFactors,
    StrategyProfile,
    actual_multipliers,
    check_equilibrium,
    finite_diff_check,
    lagrangian_gradient,
)
from .kkt_mcp import KktResidual, McpProblem, build_mcp, kkt_residual
from .mcp_solver import SolverConfig, SolverResult, fb_residual, fischer_burmeister, solve_mcp

__version__ = "0.1.0"

__all__ = [
    "EquilibriumReport",
    "GameSpec",
    "GameSpecError",
    "KktResidual",
    "McpProblem",
    "MultiplierSet",
    "ScalingFactors",
    "SolverConfig",
    "SolverResult",
    "StrategyProfile",
    "actual_multipliers",
    "build_mcp",
    "check_equilibrium",
    "fb_residual",
    "finite_diff_check",
    "fischer_burmeister",
    "kkt_residual",
    "lagrangian_gradient",
    "solve_mcp",
]
