"""Racing experiments: parameter sweeps, closed-loop races and Monte Carlo studies.

Player 1 is the leading car (the "opponent" in races) and player 2 the
trailing car ("ego"). ``alpha`` scales player 2's shared multipliers, so
``alpha < 1`` makes the trailing car the more aggressive one.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from ..kkt_mcp import KktLayout, build_mcp
from ..mcp_solver import SemismoothNewton, SolverConfig, SolverResult
from ..racing import (
    NU,
    NX,
    S,
    T,
    RacingConfig,
    RacingGame,
    Track,
    VehicleInput,
    VehicleState,
    _step_arrays,
    bicycle_step,
    build_racing_game,
    rollout_initial_guess,
)

logger = logging.getLogger(__name__)

SEED_MODES = ("follow_center", "shift_left", "shift_right")
JUMP_THRESHOLD = 0.1
COLLISION_TOL = 1e-4
CONTINUATION_STEPS = 6


def solve_game(game, seeds: Sequence[np.ndarray], config: SolverConfig | None = None):
    """Try each start in order; return ``(result, seed_index)`` of the first
    converged solve, or of the last attempt if none converged."""
    problem = build_mcp(game.spec, game.factors)
    solver = SemismoothNewton(config)
    result = None
    for idx, z0 in enumerate(seeds):
        result = solver.solve(problem, z0)
        if result.converged:
            return result, idx
    return result, len(seeds) - 1


def structured_seeds(game: RacingGame, modes: Iterable[str] = SEED_MODES) -> list[np.ndarray]:
    return [rollout_initial_guess(game, m) for m in modes]


# ---------------------------------------------------------------------------
# sweeps

@dataclass(frozen=True)
class SweepEntry:
    alpha: float
    x: np.ndarray
    costs: tuple[float, ...]
    converged: bool
    z: np.ndarray
    signature: np.ndarray

    @property
    def J1(self) -> float:
        return self.costs[0]

    @property
    def J2(self) -> float:
        return self.costs[1]


@dataclass(frozen=True)
class SweepResult:
    entries: tuple[SweepEntry, ...]
    jumps: tuple[int, ...]
    threshold: float

    @property
    def alphas(self) -> np.ndarray:
        return np.array([e.alpha for e in self.entries])

    def jump_flags(self) -> list[bool]:
        """Flag on entry j when the step from j-1 to j is a jump."""
        return [j in self.jumps for j in range(len(self.entries))]

    def jump_intervals(self) -> list[tuple[float, float]]:
        return [(self.entries[j - 1].alpha, self.entries[j].alpha) for j in self.jumps]


def final_positions(game: RacingGame, x: np.ndarray) -> np.ndarray:
    """Final-knot (s, t) of both cars; the quantity jumps are measured on."""
    return np.concatenate([game.states(x, p)[-1, [S, T]] for p in range(2)])


def alpha_sweep(game_builder: Callable[[float], object], alphas: Sequence[float],
                warm_start: bool = True, seeds: Optional[Callable[[object], list]] = None,
                signature: Optional[Callable[[object, np.ndarray], np.ndarray]] = None,
                config: SolverConfig | None = None,
                threshold: float = JUMP_THRESHOLD) -> SweepResult:
    """Solve the game for each alpha in order.

    ``game_builder(alpha)`` returns an object with ``spec`` and ``factors``.
    With ``warm_start`` each solve starts from the previous converged point,
    falling back to ``seeds(game)`` on failure; without it only the seeds are
    used. Consecutive entries whose ``signature`` differs by more than
    ``threshold`` (infinity norm) are flagged as jumps.
    """
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise ValueError("need at least one alpha")
    if any(a <= 0 for a in alphas):
        raise ValueError("alphas must be positive")
    diffs = np.diff(alphas)
    if not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValueError("alphas must be strictly monotone")
    entries = []
    previous = None
    for alpha in alphas:
        game = game_builder(alpha)
        layout = KktLayout.for_game(game.spec)
        starts = list(seeds(game)) if seeds is not None else [np.zeros(layout.size)]
        if warm_start and previous is not None:
            starts.insert(0, previous)
        result, _ = solve_game(game, starts, config)
        if result.converged:
            previous = result.z
        else:
            logger.warning("alpha=%g: solver status %s", alpha, result.status)
        x = result.z[layout.x]
        costs = tuple(game.spec.cost(i, x) for i in range(game.spec.num_players))
        sig = signature(game, x) if signature is not None else x.copy()
        entries.append(SweepEntry(alpha, x, costs, result.converged, result.z, np.asarray(sig)))
    jumps = tuple(j for j in range(1, len(entries))
                  if entries[j].converged and entries[j - 1].converged
                  and np.max(np.abs(entries[j].signature - entries[j - 1].signature)) > threshold)
    return SweepResult(tuple(entries), jumps, threshold)


def racing_sweep(track: Track, cfg: RacingConfig, x1_0, x2_0, alphas, warm_start: bool = True,
                 config: SolverConfig | None = None) -> tuple[SweepResult, Callable]:
    """Alpha sweep of the two-car game; returns the result and the builder."""
    def builder(alpha):
        return build_racing_game(track, cfg.with_alpha(alpha), x1_0, x2_0)

    return alpha_sweep(builder, alphas, warm_start=warm_start, seeds=structured_seeds,
                       signature=final_positions, config=config), builder


def cost_jump(sweep: SweepResult, j: int) -> float:
    """Cost change across step j relative to the largest change elsewhere."""
    steps = [max(abs(a - b) for a, b in zip(sweep.entries[k].costs[:2], sweep.entries[k - 1].costs[:2]))
             for k in range(1, len(sweep.entries))]
    here = steps[j - 1]
    others = [s for k, s in enumerate(steps, start=1) if k not in sweep.jumps]
    return here / max(max(others, default=0.0), 1e-12)


# ---------------------------------------------------------------------------
# closed-loop races

@dataclass(frozen=True)
class RaceScenario:
    track: Track
    cfg: RacingConfig
    opponent: VehicleState
    ego: VehicleState
    ego_alpha: float = 1.0
    opponent_alpha: float = 1.0
    duration: float = 2.0

    @property
    def steps(self) -> int:
        return int(math.ceil(self.duration / self.cfg.dt - 1e-9))


@dataclass
class RaceOutcome:
    opponent_states: np.ndarray
    ego_states: np.ndarray
    opponent_inputs: np.ndarray
    ego_inputs: np.ndarray
    winner: str
    collision: bool
    failure: bool
    min_distance: float
    solver_iterations: int = 0

    @property
    def steps(self) -> int:
        return self.ego_inputs.shape[0]

    @property
    def ego_won(self) -> bool:
        return self.winner == "ego" and not self.collision and not self.failure


def shift_plan(game: RacingGame, z: np.ndarray) -> np.ndarray:
    """Previous MCP point advanced one knot; the last knot repeats the final input."""
    layout = KktLayout.for_game(game.spec)
    N = game.horizon
    out = z.copy()
    for p in range(2):
        blk = game.spec.block(p)
        xi = z[blk]
        st = xi[:NX * N].reshape(N, NX)
        u = xi[NX * N:].reshape(N, NU)
        last = _step_arrays(game.track, game.cfg, st[-1:], u[-1:])[0][0]
        new_st = np.vstack([st[1:], last])
        new_u = np.vstack([u[1:], u[-1:]])
        out[blk] = np.concatenate([new_st.ravel(), new_u.ravel()])
        mu = z[layout.mu[p]].reshape(N, NX)
        out[layout.mu[p]] = np.vstack([mu[1:], mu[-1:]]).ravel()
        lam = z[layout.lam[p]]
        nst = 4 * N
        ls = lam[:nst].reshape(N, 4)
        lu = lam[nst:].reshape(N, 4)
        out[layout.lam[p]] = np.concatenate([np.vstack([ls[1:], ls[-1:]]).ravel(),
                                             np.vstack([lu[1:], lu[-1:]]).ravel()])
    sig = z[layout.sigma]
    out[layout.sigma] = np.concatenate([sig[1:], sig[-1:]])
    return out


def _winner(opp_s: float, ego_s: float) -> str:
    if abs(ego_s - opp_s) <= 1e-9:
        return "tie"
    return "ego" if ego_s > opp_s else "opponent"


def continue_in_alpha(builder: Callable[[float], object], alpha: float, z1: np.ndarray,
                      config: SolverConfig | None = None, steps: int = CONTINUATION_STEPS):
    """Walk the weight from 1 to ``alpha`` on a geometric grid, starting from a
    converged point ``z1`` of the ``alpha = 1`` game. Returns the last result."""
    z = z1
    result = None
    for a in np.geomspace(1.0, alpha, steps + 1)[1:]:
        result, _ = solve_game(builder(float(a)), [z], config)
        if not result.converged:
            return result
        z = result.z
    return result


def run_race(scenario: RaceScenario, config: SolverConfig | None = None) -> RaceOutcome:
    """Receding-horizon race; each car re-solves its own game every step.

    The ego plans with weights ``(1, ego_alpha)``, the opponent with
    ``(1, opponent_alpha)``; both see the true current states and apply the
    first input of their own plan. Each solve starts from the agent's shifted
    previous plan, then from the structured seeds. The ego's game may also
    start from the opponent's solution and, as a last resort, is reached by
    continuation in the weight from it.

    A collision (distance below ``d_safe`` at an executed step) is flagged and
    the race goes on; the race stops early only when a solve fails.
    """
    track, cfg = scenario.track, scenario.cfg
    opp, ego = scenario.opponent, scenario.ego
    opp_traj, ego_traj = [opp.as_array()], [ego.as_array()]
    opp_u, ego_u = [], []
    plans: dict[str, Optional[np.ndarray]] = {"ego": None, "opp": None}
    failure = False
    iters = 0
    min_dist = math.hypot(opp.X - ego.X, opp.Y - ego.Y)
    collision = min_dist < cfg.d_safe - COLLISION_TOL
    same_weights = scenario.ego_alpha == scenario.opponent_alpha
    for _ in range(scenario.steps):
        def builder(alpha, opp=opp, ego=ego):
            return build_racing_game(track, cfg.with_alpha(alpha), opp, ego, False)

        games = {"opp": builder(scenario.opponent_alpha), "ego": builder(scenario.ego_alpha)}
        solved: dict[str, SolverResult] = {}
        for who in ("opp", "ego"):
            game = games[who]
            if who == "ego" and same_weights and _same_starts(plans):
                # identical problem and starts give the identical solve
                solved[who] = solved["opp"]
                continue
            starts = []
            if plans[who] is not None:
                starts.append(shift_plan(game, plans[who]))
            if who == "ego":
                starts.append(solved["opp"].z)
            starts.extend(structured_seeds(game))
            result, _ = solve_game(game, starts, config)
            iters += result.iterations
            if not result.converged and who == "ego" and scenario.opponent_alpha == 1.0:
                result = continue_in_alpha(builder, scenario.ego_alpha, solved["opp"].z, config)
                iters += result.iterations
            solved[who] = result
            if not result.converged:
                failure = True
                break
        if failure:
            break
        inputs = {}
        for who, player in (("opp", 0), ("ego", 1)):
            plans[who] = solved[who].z
            inputs[who] = games[who].inputs(solved[who].z[:games[who].spec.n], player)[0]
        ego = bicycle_step(ego, VehicleInput(*inputs["ego"]), track, cfg)
        opp = bicycle_step(opp, VehicleInput(*inputs["opp"]), track, cfg)
        ego_u.append(inputs["ego"])
        opp_u.append(inputs["opp"])
        ego_traj.append(ego.as_array())
        opp_traj.append(opp.as_array())
        dist = math.hypot(opp.X - ego.X, opp.Y - ego.Y)
        min_dist = min(min_dist, dist)
        if dist < cfg.d_safe - COLLISION_TOL:
            collision = True
    return RaceOutcome(
        opponent_states=np.array(opp_traj),
        ego_states=np.array(ego_traj),
        opponent_inputs=np.array(opp_u).reshape(-1, NU),
        ego_inputs=np.array(ego_u).reshape(-1, NU),
        winner=_winner(opp.s, ego.s),
        collision=collision,
        failure=failure,
        min_distance=min_dist,
        solver_iterations=iters,
    )


def _same_starts(plans) -> bool:
    a, b = plans["ego"], plans["opp"]
    if a is None or b is None:
        return a is None and b is None
    return np.array_equal(a, b)


# ---------------------------------------------------------------------------
# Monte Carlo

MAX_REJECTIONS = 100


class SamplingError(RuntimeError):
    pass


def sample_initial_conditions(seed, track: Track, cfg: RacingConfig | None = None,
                              ego_alpha: float = 1.0, duration: float = 2.0) -> RaceScenario:
    """Random start: ego 1.5 to 1.75 m behind the opponent and 0.25 to 0.75 m/s faster.

    ``seed`` may be an int, a ``SeedSequence`` or a ``Generator``. Draws that
    start inside the safety distance are redrawn; after ``MAX_REJECTIONS``
    consecutive rejections a ``SamplingError`` is raised.
    """
    cfg = cfg or RacingConfig()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    H = track.half_width
    for _ in range(MAX_REJECTIONS):
        s_opp = rng.uniform(0.0, track.length)
        s_ego = s_opp + rng.uniform(-1.75, -1.5)
        v_opp = rng.uniform(1.0, 2.0)
        v_ego = v_opp + rng.uniform(0.25, 0.75)
        t_ego = rng.uniform(-H / 3, H / 3)
        t_opp = t_ego + rng.uniform(-H / 8, H / 8)
        opp = VehicleState.on_track(track, v_opp, s_opp, t_opp)
        ego = VehicleState.on_track(track, v_ego, s_ego, t_ego)
        if math.hypot(opp.X - ego.X, opp.Y - ego.Y) >= cfg.d_safe:
            return RaceScenario(track, cfg, opp, ego, float(ego_alpha), 1.0, duration)
    raise SamplingError(f"no collision-free start after {MAX_REJECTIONS} draws")


@dataclass(frozen=True)
class McRun:
    index: int
    opponent0: tuple[float, ...]
    ego0: tuple[float, ...]
    winner: str
    collision: bool
    failure: bool
    steps: int
    min_distance: float
    final_gap: float

    @property
    def outcome(self) -> str:
        """Exactly one of failure, collision, win, loss (a tie is a loss)."""
        if self.failure:
            return "failure"
        if self.collision:
            return "collision"
        return "win" if self.winner == "ego" else "loss"

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["opponent0"] = list(self.opponent0)
        out["ego0"] = list(self.ego0)
        out["outcome"] = self.outcome
        return out


@dataclass
class McReport:
    ego_alpha: float
    seed: int
    runs: list[McRun] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.runs)

    @property
    def wins(self) -> int:
        return sum(r.outcome == "win" for r in self.runs)

    @property
    def losses(self) -> int:
        return sum(r.outcome == "loss" for r in self.runs)

    @property
    def collisions(self) -> int:
        return sum(r.outcome == "collision" for r in self.runs)

    @property
    def failures(self) -> int:
        return sum(r.outcome == "failure" for r in self.runs)

    @property
    def win_rate(self) -> float:
        return self.wins / self.n if self.n else 0.0

    def summary(self) -> dict:
        return {"ego_alpha": self.ego_alpha, "seed": self.seed, "n": self.n,
                "wins": self.wins, "losses": self.losses, "collisions": self.collisions,
                "failures": self.failures, "win_percent": 100.0 * self.win_rate}

    def to_json(self) -> dict:
        return {**self.summary(), "runs": [r.as_dict() for r in self.runs]}


def _mc_run(args):
    index, child, track, cfg, ego_alpha, duration, config = args
    sc = sample_initial_conditions(child, track, cfg, ego_alpha, duration)
    out = run_race(sc, config)
    return McRun(index, tuple(sc.opponent.as_array().tolist()), tuple(sc.ego.as_array().tolist()),
                 out.winner, out.collision, out.failure, out.steps, float(out.min_distance),
                 float(out.ego_states[-1, S] - out.opponent_states[-1, S]))


def run_monte_carlo(track: Track, cfg: RacingConfig, n: int, seed: int, ego_alpha: float = 1.0,
                    duration: float = 2.0, jobs: int = 1,
                    config: SolverConfig | None = None) -> McReport:
    """``n`` independent races; run ``i`` draws its start from the i-th child of ``seed``,
    so equal seeds give the same starts for any ``ego_alpha`` or ``jobs``."""
    if n < 1:
        raise ValueError("n must be positive")
    if jobs < 1:
        raise ValueError("jobs must be positive")
    children = np.random.SeedSequence(seed).spawn(n)
    tasks = [(i, c, track, cfg, float(ego_alpha), duration, config) for i, c in enumerate(children)]
    if jobs == 1:
        runs = [_mc_run(t) for t in tasks]
    else:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_mc_run, tasks))
    return McReport(float(ego_alpha), int(seed), sorted(runs, key=lambda r: r.index))
