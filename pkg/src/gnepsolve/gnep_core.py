"""Generalized Nash games with shared constraints.

A game is described by per-player evaluators over the flat strategy vector
``x = [x^1, ..., x^M]``. Each player i owns a block of ``dims[i]`` entries,
private equality constraints ``h_i(x^i) = 0``, private inequalities
``g_i(x^i) <= 0`` and all players share ``s(x) <= 0``.

The shared multipliers are generated from a single nonnegative vector
``sigma`` by per-player positive weights: ``sigma_i = a_i * sigma``.
Equal weights give the normalized equilibrium; unequal weights select
non-normalized ones.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import lsq_linear, minimize

FD_STEP = 1e-6
FEAS_TOL = 1e-6

Evaluator = Callable[[np.ndarray], np.ndarray]


class GameSpecError(ValueError):
    """Inconsistent dimensions or evaluator outputs."""


class EvaluatorError(RuntimeError):
    """An evaluator raised; the message names the player."""


class InfeasiblePointError(ValueError):
    """A profile passed to an oracle violates a constraint."""


def fd_jacobian(fun: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                step: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobian of a vector (or scalar) function."""
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(np.asarray(fun(x), dtype=float))
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[j] += step
        xm[j] -= step
        jac[:, j] = (np.atleast_1d(fun(xp)) - np.atleast_1d(fun(xm))) / (2.0 * step)
    return jac


def _empty(_: np.ndarray) -> np.ndarray:
    return np.zeros(0)


@dataclass(frozen=True)
class StrategyProfile:
    """Flat strategy vector together with the per-player layout."""

    x: np.ndarray
    offsets: tuple[int, ...]

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        if self.offsets[-1] != x.size:
            raise GameSpecError(f"profile length {x.size} != layout size {self.offsets[-1]}")

    @classmethod
    def pack(cls, blocks: Sequence[np.ndarray]) -> "StrategyProfile":
        blocks = [np.atleast_1d(np.asarray(b, dtype=float)) for b in blocks]
        offsets = tuple(np.concatenate([[0], np.cumsum([b.size for b in blocks])]).astype(int))
        return cls(np.concatenate(blocks), offsets)

    def unpack(self) -> list[np.ndarray]:
        return [self.x[a:b].copy() for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def block(self, i: int) -> np.ndarray:
        return self.x[self.offsets[i]:self.offsets[i + 1]]


@dataclass(frozen=True)
class GameSpec:
    """M-player game with private and shared constraints.

    ``costs[i](x)`` takes the full profile. ``eq_constraints[i]`` and
    ``ineq_constraints[i]`` take only the player's own block.
    ``shared_constraints(x)`` takes the full profile (``<= 0`` feasible).

    Optional derivatives:

    * ``cost_grads[i](x)`` -> gradient of J_i w.r.t. the full x, shape (n,)
    * ``eq_jacs[i](xi)`` -> (k_i, n_i), ``ineq_jacs[i](xi)`` -> (m_i, n_i)
    * ``shared_jac(x)`` -> (m0, n)
    * ``lagrangian_hessians[i](x, mu_i, lam_i, sig_i)`` -> (n_i, n), the
      derivative of the player's Lagrangian gradient (own block) w.r.t. x.

    Missing derivatives fall back to central finite differences.
    """

    dims: tuple[int, ...]
    costs: tuple[Callable[[np.ndarray], float], ...]
    eq_dims: tuple[int, ...] = ()
    ineq_dims: tuple[int, ...] = ()
    num_shared: int = 0
    eq_constraints: tuple[Optional[Evaluator], ...] = ()
    ineq_constraints: tuple[Optional[Evaluator], ...] = ()
    shared_constraints: Optional[Evaluator] = None
    cost_grads: Optional[tuple[Evaluator, ...]] = None
    eq_jacs: Optional[tuple[Evaluator, ...]] = None
    ineq_jacs: Optional[tuple[Evaluator, ...]] = None
    shared_jac: Optional[Evaluator] = None
    lagrangian_hessians: Optional[tuple[Callable, ...]] = None
    name: str = "game"
    offsets: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        m = len(self.dims)
        if m < 1:
            raise GameSpecError("a game needs at least one player")
        if any(int(d) <= 0 for d in self.dims):
            raise GameSpecError(f"player dimensions must be positive, got {self.dims}")
        if len(self.costs) != m:
            raise GameSpecError(f"{len(self.costs)} costs for {m} players")
        fill = {"eq_dims": (0,) * m, "ineq_dims": (0,) * m,
                "eq_constraints": (None,) * m, "ineq_constraints": (None,) * m}
        for key, default in fill.items():
            value = getattr(self, key)
            if len(value) == 0:
                object.__setattr__(self, key, default)
            elif len(value) != m:
                raise GameSpecError(f"{key} has {len(value)} entries for {m} players")
            else:
                object.__setattr__(self, key, tuple(value))
        for key in ("cost_grads", "eq_jacs", "ineq_jacs", "lagrangian_hessians"):
            value = getattr(self, key)
            if value is not None and len(value) != m:
                raise GameSpecError(f"{key} has {len(value)} entries for {m} players")
        if any(k < 0 for k in self.eq_dims) or any(k < 0 for k in self.ineq_dims) or self.num_shared < 0:
            raise GameSpecError("constraint counts must be nonnegative")
        for i in range(m):
            if self.eq_dims[i] > 0 and self.eq_constraints[i] is None:
                raise GameSpecError(f"player {i}: eq_dims={self.eq_dims[i]} but no evaluator")
            if self.ineq_dims[i] > 0 and self.ineq_constraints[i] is None:
                raise GameSpecError(f"player {i}: ineq_dims={self.ineq_dims[i]} but no evaluator")
        if self.num_shared > 0 and self.shared_constraints is None:
            raise GameSpecError("num_shared > 0 but no shared evaluator")
        offsets = tuple(int(v) for v in np.concatenate([[0], np.cumsum(self.dims)]))
        object.__setattr__(self, "offsets", offsets)

    # layout -----------------------------------------------------------
    @property
    def num_players(self) -> int:
        return len(self.dims)

    @property
    def n(self) -> int:
        return self.offsets[-1]

    def block(self, i: int) -> slice:
        return slice(self.offsets[i], self.offsets[i + 1])

    def profile(self, x) -> StrategyProfile:
        return StrategyProfile(np.asarray(x, dtype=float), self.offsets)

    def replace_block(self, x: np.ndarray, i: int, xi: np.ndarray) -> np.ndarray:
        out = np.array(x, dtype=float)
        out[self.block(i)] = xi
        return out

    # evaluation -------------------------------------------------------
    def _call(self, i, label, fun, arg, expected):
        try:
            out = np.atleast_1d(np.asarray(fun(arg), dtype=float))
        except Exception as exc:  # noqa: BLE001 - re-raised with context
            raise EvaluatorError(f"player {i}: {label} evaluator failed: {exc}") from exc
        if expected is not None and out.shape[0] != expected:
            raise GameSpecError(f"player {i}: {label} returned {out.shape[0]} values, expected {expected}")
        return out

    def cost(self, i: int, x: np.ndarray) -> float:
        return float(self._call(i, "cost", self.costs[i], np.asarray(x, dtype=float), 1)[0])

    def eq(self, i: int, xi: np.ndarray) -> np.ndarray:
        if self.eq_dims[i] == 0:
            return np.zeros(0)
        return self._call(i, "eq", self.eq_constraints[i], xi, self.eq_dims[i])

    def ineq(self, i: int, xi: np.ndarray) -> np.ndarray:
        if self.ineq_dims[i] == 0:
            return np.zeros(0)
        return self._call(i, "ineq", self.ineq_constraints[i], xi, self.ineq_dims[i])

    def shared(self, x: np.ndarray) -> np.ndarray:
        if self.num_shared == 0:
            return np.zeros(0)
        return self._call(-1, "shared", self.shared_constraints, x, self.num_shared)

    def cost_grad(self, i: int, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.cost_grads is not None:
            return self._call(i, "cost gradient", self.cost_grads[i], x, self.n)
        return fd_jacobian(lambda y: self.cost(i, y), x)[0]

    def eq_jac(self, i: int, xi: np.ndarray) -> np.ndarray:
        if self.eq_dims[i] == 0:
            return np.zeros((0, self.dims[i]))
        if self.eq_jacs is not None:
            return np.asarray(self.eq_jacs[i](xi), dtype=float).reshape(self.eq_dims[i], self.dims[i])
        return fd_jacobian(lambda y: self.eq(i, y), xi)

    def ineq_jac(self, i: int, xi: np.ndarray) -> np.ndarray:
        if self.ineq_dims[i] == 0:
            return np.zeros((0, self.dims[i]))
        if self.ineq_jacs is not None:
            return np.asarray(self.ineq_jacs[i](xi), dtype=float).reshape(self.ineq_dims[i], self.dims[i])
        return fd_jacobian(lambda y: self.ineq(i, y), xi)

    def shared_jacobian(self, x: np.ndarray) -> np.ndarray:
        if self.num_shared == 0:
            return np.zeros((0, self.n))
        if self.shared_jac is not None:
            return np.asarray(self.shared_jac(x), dtype=float).reshape(self.num_shared, self.n)
        return fd_jacobian(self.shared, np.asarray(x, dtype=float))

    def violations(self, x: np.ndarray) -> dict[str, float]:
        """Largest violation of every constraint group (0 when satisfied)."""
        x = np.asarray(x, dtype=float)
        out = {}
        for i in range(self.num_players):
            xi = x[self.block(i)]
            if self.eq_dims[i]:
                out[f"eq[{i}]"] = float(np.max(np.abs(self.eq(i, xi))))
            if self.ineq_dims[i]:
                out[f"ineq[{i}]"] = float(max(0.0, np.max(self.ineq(i, xi))))
        if self.num_shared:
            out["shared"] = float(max(0.0, np.max(self.shared(x))))
        return out


@dataclass(frozen=True)
class ScalingFactors:
    """Positive per-player weights on the shared multipliers (diagonal of A_i)."""

    weights: tuple[np.ndarray, ...]

    def __post_init__(self):
        ws = tuple(np.array(np.atleast_1d(w), dtype=float) for w in self.weights)
        if not ws:
            raise GameSpecError("need at least one player's weights")
        m0 = ws[0].size
        for i, w in enumerate(ws):
            if w.size != m0:
                raise GameSpecError(f"player {i}: {w.size} weights, expected {m0}")
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise GameSpecError(f"player {i}: weights must be strictly positive, got {w}")
            w.setflags(write=False)
        object.__setattr__(self, "weights", ws)

    @classmethod
    def uniform(cls, num_players: int, num_shared: int) -> "ScalingFactors":
        return cls(tuple(np.ones(num_shared) for _ in range(num_players)))

    @classmethod
    def from_scalars(cls, scalars: Sequence[float], num_shared: int) -> "ScalingFactors":
        return cls(tuple(float(a) * np.ones(num_shared) for a in scalars))

    @property
    def num_players(self) -> int:
        return len(self.weights)

    @property
    def num_shared(self) -> int:
        return self.weights[0].size

    def rescaled(self, gamma: float) -> "ScalingFactors":
        """Divide every weight by ``gamma``; pair with ``gamma * sigma``."""
        return ScalingFactors(tuple(w / gamma for w in self.weights))

    def is_normalized(self) -> bool:
        return all(np.array_equal(w, self.weights[0]) for w in self.weights)


@dataclass(frozen=True)
class MultiplierSet:
    """Equality multipliers mu_i, private inequality multipliers lam_i and the
    single shared vector sigma."""

    mu: tuple[np.ndarray, ...]
    lam: tuple[np.ndarray, ...]
    sigma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", tuple(np.atleast_1d(np.asarray(m, dtype=float)) for m in self.mu))
        object.__setattr__(self, "lam", tuple(np.atleast_1d(np.asarray(m, dtype=float)) for m in self.lam))
        object.__setattr__(self, "sigma", np.atleast_1d(np.asarray(self.sigma, dtype=float)))
        if any(np.any(l < 0) for l in self.lam) or np.any(self.sigma < 0):
            raise ValueError("inequality multipliers must be nonnegative")

    @classmethod
    def zeros(cls, spec: GameSpec) -> "MultiplierSet":
        return cls(tuple(np.zeros(k) for k in spec.eq_dims),
                   tuple(np.zeros(m) for m in spec.ineq_dims),
                   np.zeros(spec.num_shared))


@dataclass(frozen=True)
class EquilibriumReport:
    improvements: tuple[float, ...]
    deviations: tuple[np.ndarray, ...]
    verdict: str
    eps: float
    methods: tuple[str, ...]

    @property
    def max_improvement(self) -> float:
        return max(self.improvements)

    @property
    def certified(self) -> bool:
        return self.verdict == "certified"


def actual_multipliers(factors: ScalingFactors, sigma) -> list[np.ndarray]:
    """Per-player shared multipliers ``a_i * sigma``."""
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    if sigma.size != factors.num_shared:
        raise GameSpecError(f"sigma has length {sigma.size}, factors expect {factors.num_shared}")
    if np.any(sigma < 0):
        raise ValueError("sigma must be nonnegative")
    return [w * sigma for w in factors.weights]


def _check_factors(spec: GameSpec, factors: ScalingFactors):
    if factors.num_players != spec.num_players or factors.num_shared != spec.num_shared:
        raise GameSpecError(
            f"factors are {factors.num_players}x{factors.num_shared}, "
            f"game needs {spec.num_players}x{spec.num_shared}")


def player_lagrangian_gradient(spec: GameSpec, i: int, x: np.ndarray, mu_i, lam_i, sig_i,
                               shared_jac: Optional[np.ndarray] = None) -> np.ndarray:
    """Gradient of player i's Lagrangian w.r.t. its own block."""
    blk = spec.block(i)
    xi = x[blk]
    grad = spec.cost_grad(i, x)[blk].copy()
    if spec.eq_dims[i]:
        grad += spec.eq_jac(i, xi).T @ mu_i
    if spec.ineq_dims[i]:
        grad += spec.ineq_jac(i, xi).T @ lam_i
    if spec.num_shared:
        js = spec.shared_jacobian(x) if shared_jac is None else shared_jac
        grad += js[:, blk].T @ sig_i
    return grad


def lagrangian_gradient(spec: GameSpec, factors: ScalingFactors, x, mult: MultiplierSet) -> np.ndarray:
    """Stacked own-block Lagrangian gradients with shared multipliers ``a_i * sigma``."""
    _check_factors(spec, factors)
    x = np.asarray(x.x if isinstance(x, StrategyProfile) else x, dtype=float)
    if x.size != spec.n:
        raise GameSpecError(f"profile length {x.size}, game has n={spec.n}")
    sig = actual_multipliers(factors, mult.sigma)
    js = spec.shared_jacobian(x) if spec.num_shared else None
    return np.concatenate([
        player_lagrangian_gradient(spec, i, x, mult.mu[i], mult.lam[i], sig[i], js)
        for i in range(spec.num_players)
    ])


def finite_diff_check(spec: GameSpec, x, step: float = FD_STEP) -> dict[str, float]:
    """Compare supplied derivatives against central differences.

    Returns ``max |analytic - fd| / max(1, |fd|)`` per evaluator name.
    """
    x = np.asarray(x.x if isinstance(x, StrategyProfile) else x, dtype=float)
    report: dict[str, float] = {}

    def dev(analytic, fd):
        analytic = np.asarray(analytic, dtype=float).reshape(fd.shape)
        if fd.size == 0:
            return 0.0
        return float(np.max(np.abs(analytic - fd) / np.maximum(1.0, np.abs(fd))))

    for i in range(spec.num_players):
        xi = x[spec.block(i)]
        if spec.cost_grads is not None:
            fd = fd_jacobian(lambda y, i=i: spec.cost(i, y), x, step)[0]
            report[f"cost_grad[{i}]"] = dev(spec.cost_grads[i](x), fd)
        if spec.eq_jacs is not None and spec.eq_dims[i]:
            fd = fd_jacobian(lambda y, i=i: spec.eq(i, y), xi, step)
            report[f"eq_jac[{i}]"] = dev(spec.eq_jacs[i](xi), fd)
        if spec.ineq_jacs is not None and spec.ineq_dims[i]:
            fd = fd_jacobian(lambda y, i=i: spec.ineq(i, y), xi, step)
            report[f"ineq_jac[{i}]"] = dev(spec.ineq_jacs[i](xi), fd)
    if spec.shared_jac is not None and spec.num_shared:
        fd = fd_jacobian(spec.shared, x, step)
        report["shared_jac"] = dev(spec.shared_jac(x), fd)
    return report


# ---------------------------------------------------------------------------
# equilibrium certification (never looks at multipliers)

def _feasible_for(spec: GameSpec, i: int, x: np.ndarray, tol: float) -> bool:
    xi = x[spec.block(i)]
    if spec.eq_dims[i] and np.max(np.abs(spec.eq(i, xi))) > tol:
        return False
    if spec.ineq_dims[i] and np.max(spec.ineq(i, xi)) > tol:
        return False
    if spec.num_shared and np.max(spec.shared(x)) > tol:
        return False
    return True


def _grid_best_response(spec, i, x, lo, hi, grid_per_dim, tol):
    """Grid scan of player i's feasible set, then one x10 refinement."""
    best_cost = spec.cost(i, x)
    best = x[spec.block(i)].copy()

    def scan(lo_, hi_):
        nonlocal best_cost, best
        axes = [np.linspace(a, b, grid_per_dim) for a, b in zip(lo_, hi_)]
        for point in itertools.product(*axes):
            y = spec.replace_block(x, i, np.array(point))
            if not _feasible_for(spec, i, y, tol):
                continue
            c = spec.cost(i, y)
            if c < best_cost:
                best_cost, best = c, np.array(point)

    scan(lo, hi)
    step = (hi - lo) / (grid_per_dim - 1)
    scan(np.maximum(lo, best - step), np.minimum(hi, best + step))
    return best_cost, best


def _local_best_response(spec, i, x, tol, n_starts, perturb, seed):
    """SLSQP on player i's problem from the current block and a few jittered starts."""
    blk = spec.block(i)
    x_i0 = x[blk].copy()

    def full(y):
        return spec.replace_block(x, i, y)

    cons = []
    if spec.eq_dims[i]:
        cons.append({"type": "eq", "fun": lambda y: spec.eq(i, y), "jac": lambda y: spec.eq_jac(i, y)})
    if spec.ineq_dims[i]:
        cons.append({"type": "ineq", "fun": lambda y: -spec.ineq(i, y),
                     "jac": lambda y: -spec.ineq_jac(i, y)})
    if spec.num_shared:
        cons.append({"type": "ineq", "fun": lambda y: -spec.shared(full(y)),
                     "jac": lambda y: -spec.shared_jacobian(full(y))[:, blk]})

    rng = np.random.default_rng(seed)
    starts = [x_i0] + [x_i0 + perturb * rng.standard_normal(x_i0.size) for _ in range(n_starts)]
    best_cost, best = spec.cost(i, x), x_i0
    for y0 in starts:
        res = minimize(lambda y: spec.cost(i, full(y)), y0,
                       jac=lambda y: spec.cost_grad(i, full(y))[blk],
                       constraints=cons, method="SLSQP",
                       options={"maxiter": 500, "ftol": 1e-12})
        y = res.x
        if not np.all(np.isfinite(y)) or not _feasible_for(spec, i, full(y), tol):
            continue
        c = spec.cost(i, full(y))
        if c < best_cost:
            best_cost, best = c, y
    return best_cost, best


def check_equilibrium(spec: GameSpec, x, grid_per_dim: int = 41, eps: float = 1e-4,
                      box=None, method: str = "auto", feas_tol: float = FEAS_TOL,
                      n_starts: int = 2, perturb: float = 1e-2, seed: int = 0) -> EquilibriumReport:
    """Search each player's unilateral deviations for a cost improvement.

    ``method="grid"`` scans ``grid_per_dim`` points per dimension over ``box``
    (a ``(lo, hi)`` pair or one pair per player) and refines once around the
    incumbent; players with more than 4 variables or with equality
    constraints are reported inconclusive. ``method="local"`` solves each
    player's best-response problem with SLSQP from the current strategy and
    ``n_starts`` jittered copies, which certifies a local equilibrium.
    ``"auto"`` uses the grid where it applies and the local search otherwise.
    """
    x = np.asarray(x.x if isinstance(x, StrategyProfile) else x, dtype=float)
    if x.size != spec.n:
        raise GameSpecError(f"profile length {x.size}, game has n={spec.n}")
    for name, v in spec.violations(x).items():
        if v > feas_tol:
            raise InfeasiblePointError(f"profile violates {name} by {v:.3e}")
    if method not in ("auto", "grid", "local"):
        raise ValueError(f"unknown method {method!r}")

    improvements, deviations, methods = [], [], []
    inconclusive = False
    for i in range(spec.num_players):
        base = spec.cost(i, x)
        grid_ok = box is not None and spec.dims[i] <= 4 and spec.eq_dims[i] == 0
        use = "grid" if (method == "grid" or (method == "auto" and grid_ok)) else "local"
        if use == "grid":
            if not grid_ok:
                inconclusive = True
                improvements.append(0.0)
                deviations.append(x[spec.block(i)].copy())
                methods.append("none")
                continue
            lo, hi = _player_box(box, i, spec.dims[i])
            cost, dev = _grid_best_response(spec, i, x, lo, hi, grid_per_dim, feas_tol)
        else:
            cost, dev = _local_best_response(spec, i, x, feas_tol, n_starts, perturb, seed + i)
        improvements.append(max(0.0, base - cost))
        deviations.append(np.asarray(dev, dtype=float))
        methods.append(use)

    if max(improvements) > eps:
        verdict = "refuted"
    elif inconclusive:
        verdict = "inconclusive"
    else:
        verdict = "certified"
    return EquilibriumReport(tuple(improvements), tuple(deviations), verdict, eps, tuple(methods))


def _player_box(box, i, dim):
    if isinstance(box, tuple) and len(box) == 2 and np.ndim(box[0]) == 0:
        lo, hi = box
    else:
        lo, hi = box[i]
    return np.broadcast_to(np.asarray(lo, dtype=float), (dim,)), np.broadcast_to(np.asarray(hi, dtype=float), (dim,))


def fit_multipliers(spec: GameSpec, x, active_tol: float = 1e-6):
    """Least-squares multipliers on the active set for each player separately.

    Returns ``(per_player, residual)`` where ``per_player[i]`` is a dict with
    keys ``mu``, ``lam``, ``sigma`` and ``residual`` is the largest
    stationarity norm left over. Shared multipliers are fitted per player, so
    no relation between players is imposed.
    """
    x = np.asarray(x.x if isinstance(x, StrategyProfile) else x, dtype=float)
    js = spec.shared_jacobian(x)
    s = spec.shared(x)
    per_player, worst = [], 0.0
    for i in range(spec.num_players):
        blk = spec.block(i)
        xi = x[blk]
        grad = spec.cost_grad(i, x)[blk]
        g = spec.ineq(i, xi)
        act_g = np.flatnonzero(g >= -active_tol) if g.size else np.zeros(0, dtype=int)
        act_s = np.flatnonzero(s >= -active_tol) if s.size else np.zeros(0, dtype=int)
        cols = [spec.eq_jac(i, xi).T, spec.ineq_jac(i, xi)[act_g].T, js[act_s][:, blk].T]
        a = np.hstack(cols) if sum(c.shape[1] for c in cols) else np.zeros((spec.dims[i], 0))
        k = spec.eq_dims[i]
        lam = np.zeros(spec.ineq_dims[i])
        sig = np.zeros(spec.num_shared)
        mu = np.zeros(k)
        if a.shape[1]:
            lb = np.concatenate([np.full(k, -np.inf), np.zeros(a.shape[1] - k)])
            sol = lsq_linear(a, -grad, bounds=(lb, np.full(a.shape[1], np.inf)))
            coef = sol.x
            mu = coef[:k]
            lam[act_g] = coef[k:k + act_g.size]
            sig[act_s] = coef[k + act_g.size:]
            resid = float(np.linalg.norm(grad + a @ coef))
        else:
            resid = float(np.linalg.norm(grad))
        per_player.append({"mu": mu, "lam": lam, "sigma": sig})
        worst = max(worst, resid)
    return per_player, worst
