"""Three cars on two lanes, one step, velocities as strategies.

Car 1 drives alone in lane one. Cars 2 and 3 share lane two and car 2 may
not pass car 3 (``x2 <= x3``). Costs::

    J1 = -x1 + x2 + v1^2 / 2
    J2 = -x2 + x1 + v2^2 / 2
    J3 = -x1 + x2 + v3^2 / 2

with ``x_i = x_i(0) + v_i * dt``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..gnep_core import GameSpec, GameSpecError, ScalingFactors
from ..kkt_mcp import KktLayout, build_mcp
from ..mcp_solver import SolverConfig, solve_mcp

START = np.array([0.0, 0.5, 0.75])
DT = 1.0


@dataclass(frozen=True)
class OneDGame:
    spec: GameSpec
    factors: ScalingFactors
    eliminate_positions: bool

    def positions(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.eliminate_positions:
            return START + x * DT
        return x[0::2].copy()

    def velocities(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x.copy() if self.eliminate_positions else x[1::2].copy()

    def profile_from_positions(self, positions) -> np.ndarray:
        """Strategy vector reaching ``positions`` (velocities implied)."""
        p = np.asarray(positions, dtype=float)
        v = (p - START) / DT
        if self.eliminate_positions:
            return v
        return np.column_stack([p, v]).ravel()


def closed_form(a2: float, a3: float) -> dict[str, float]:
    """Active-constraint KKT reduction (x1 is decoupled, x2 = x3)."""
    sigma = 0.75 / (a2 + a3)
    x23 = 1.5 - 0.75 * a2 / (a2 + a3)
    return {"x1": 1.0, "x2": x23, "x3": x23, "sigma": sigma}


def _velocity_game(weights: tuple[float, float, float], analytic: bool) -> GameSpec:
    def pos(x):
        return START + x * DT

    costs = (
        lambda x: -pos(x)[0] + pos(x)[1] + 0.5 * x[0] ** 2,
        lambda x: -pos(x)[1] + pos(x)[0] + 0.5 * x[1] ** 2,
        lambda x: -pos(x)[0] + pos(x)[1] + 0.5 * x[2] ** 2,
    )
    derivs = {}
    if analytic:
        eye = np.eye(3)
        derivs = dict(
            cost_grads=(
                lambda x: np.array([-DT + x[0], DT, 0.0]),
                lambda x: np.array([DT, -DT + x[1], 0.0]),
                lambda x: np.array([-DT, DT, x[2]]),
            ),
            shared_jac=lambda x: np.array([[0.0, DT, -DT]]),
            lagrangian_hessians=tuple(
                (lambda x, mu, lam, sig, i=i: eye[i:i + 1].copy()) for i in range(3)),
        )
    return GameSpec(
        dims=(1, 1, 1),
        costs=costs,
        num_shared=1,
        shared_constraints=lambda x: np.array([pos(x)[1] - pos(x)[2]]),
        name="three-car-1d",
        **derivs,
    )


def _position_game(analytic: bool) -> GameSpec:
    # x = [p1, v1, p2, v2, p3, v3]
    costs = (
        lambda x: -x[0] + x[2] + 0.5 * x[1] ** 2,
        lambda x: -x[2] + x[0] + 0.5 * x[3] ** 2,
        lambda x: -x[0] + x[2] + 0.5 * x[5] ** 2,
    )
    eqs = tuple((lambda xi, i=i: np.array([xi[0] - START[i] - xi[1] * DT])) for i in range(3))
    derivs = {}
    if analytic:
        def hess(i):
            def h(x, mu, lam, sig):
                out = np.zeros((2, 6))
                out[1, 2 * i + 1] = 1.0
                return out
            return h

        derivs = dict(
            cost_grads=(
                lambda x: np.array([-1.0, x[1], 1.0, 0.0, 0.0, 0.0]),
                lambda x: np.array([1.0, 0.0, -1.0, x[3], 0.0, 0.0]),
                lambda x: np.array([-1.0, 0.0, 1.0, 0.0, 0.0, x[5]]),
            ),
            eq_jacs=tuple((lambda xi: np.array([[1.0, -DT]])) for _ in range(3)),
            shared_jac=lambda x: np.array([[0.0, 0.0, 1.0, 0.0, -1.0, 0.0]]),
            lagrangian_hessians=tuple(hess(i) for i in range(3)),
        )
    return GameSpec(
        dims=(2, 2, 2),
        costs=costs,
        eq_dims=(1, 1, 1),
        eq_constraints=eqs,
        num_shared=1,
        shared_constraints=lambda x: np.array([x[2] - x[4]]),
        name="three-car-1d-positions",
        **derivs,
    )


def build_1d_game(a2: float = 1.0, a3: float = 1.0, eliminate_positions: bool = True,
                  analytic: bool = True) -> OneDGame:
    """The three-car game with shared-multiplier weights ``(1, a2, a3)``.

    Car 1 never touches the shared constraint, so its weight is fixed at 1.
    With ``eliminate_positions=False`` positions stay decision variables tied
    to velocities by one equality per car.
    """
    if not (a2 > 0 and a3 > 0):
        raise GameSpecError(f"scaling factors must be positive, got a2={a2}, a3={a3}")
    factors = ScalingFactors.from_scalars((1.0, a2, a3), 1)
    spec = _velocity_game((1.0, a2, a3), analytic) if eliminate_positions else _position_game(analytic)
    return OneDGame(spec, factors, eliminate_positions)


ONED_TOL = 1e-10


@dataclass(frozen=True)
class OneDSolution:
    positions: np.ndarray
    velocities: np.ndarray
    sigma: float
    costs: tuple[float, float, float]
    x: np.ndarray
    status: str
    residual: float

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def solve_1d(a2: float = 1.0, a3: float = 1.0, eliminate_positions: bool = True,
             config=None) -> OneDSolution:
    """Solve the scaled-multiplier KKT system from a zero start."""
    game = build_1d_game(a2, a3, eliminate_positions)
    result = solve_mcp(build_mcp(game.spec, game.factors), config or SolverConfig(tol=ONED_TOL))
    layout = KktLayout.for_game(game.spec)
    x = result.z[layout.x]
    costs = tuple(float(game.spec.cost(i, x)) for i in range(3))
    return OneDSolution(game.positions(x), game.velocities(x), float(result.z[layout.sigma][0]),
                        costs, x, result.status, result.residual)
