"""Modified KKT system of a shared-constraint game as a mixed complementarity problem.

Variable vector ``z = [x, mu_1..mu_M, lam_1..lam_M, sigma]`` with pairing

    grad_{x^i} L_i  <->  x      (free)
    h_i(x^i)        <->  mu_i   (free)
    -g_i(x^i)       <->  lam_i  (>= 0)
    -s(x)           <->  sigma  (>= 0, one block for all players)

where player i's Lagrangian carries ``(a_i * sigma)^T s``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .gnep_core import (
    GameSpec,
    GameSpecError,
    MultiplierSet,
    ScalingFactors,
    _check_factors,
    fd_jacobian,
    player_lagrangian_gradient,
)


@dataclass(frozen=True)
class KktLayout:
    n: int
    x: slice
    mu: tuple[slice, ...]
    lam: tuple[slice, ...]
    sigma: slice
    size: int

    @classmethod
    def for_game(cls, spec: GameSpec) -> "KktLayout":
        pos = spec.n
        mu, lam = [], []
        for k in spec.eq_dims:
            mu.append(slice(pos, pos + k))
            pos += k
        for m in spec.ineq_dims:
            lam.append(slice(pos, pos + m))
            pos += m
        sigma = slice(pos, pos + spec.num_shared)
        pos += spec.num_shared
        return cls(spec.n, slice(0, spec.n), tuple(mu), tuple(lam), sigma, pos)

    def unpack(self, z: np.ndarray) -> tuple[np.ndarray, MultiplierSet]:
        z = np.asarray(z, dtype=float)
        if z.size != self.size:
            raise GameSpecError(f"z has length {z.size}, layout expects {self.size}")
        return z[self.x], MultiplierSet(tuple(z[s] for s in self.mu),
                                        tuple(np.maximum(z[s], 0.0) for s in self.lam),
                                        np.maximum(z[self.sigma], 0.0))

    def pack(self, x, mult: MultiplierSet) -> np.ndarray:
        z = np.zeros(self.size)
        z[self.x] = x
        for s, v in zip(self.mu, mult.mu):
            z[s] = v
        for s, v in zip(self.lam, mult.lam):
            z[s] = v
        z[self.sigma] = mult.sigma
        return z


@dataclass(frozen=True)
class McpProblem:
    """Find z with l <= z <= u complementary to F(z)."""

    lower: np.ndarray
    upper: np.ndarray
    fun: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray]
    layout: KktLayout | None = None
    spec: GameSpec | None = None
    factors: ScalingFactors | None = None

    def __post_init__(self):
        lower = np.array(self.lower, dtype=float)
        upper = np.array(self.upper, dtype=float)
        if lower.shape != upper.shape or np.any(lower > upper):
            raise GameSpecError("bounds must satisfy lower <= upper")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def size(self) -> int:
        return self.lower.size


@dataclass(frozen=True)
class KktResidual:
    stationarity: float
    primal: float
    complementarity: float

    def is_kkt(self, tol: float) -> bool:
        return max(self.stationarity, self.primal, self.complementarity) <= tol

    @property
    def worst(self) -> float:
        return max(self.stationarity, self.primal, self.complementarity)


def _kkt_parts(spec: GameSpec, factors: ScalingFactors, layout: KktLayout, z: np.ndarray):
    x = z[layout.x]
    js = spec.shared_jacobian(x) if spec.num_shared else None
    sigma = z[layout.sigma]
    stat, h, g = [], [], []
    for i in range(spec.num_players):
        xi = x[spec.block(i)]
        stat.append(player_lagrangian_gradient(
            spec, i, x, z[layout.mu[i]], z[layout.lam[i]], factors.weights[i] * sigma, js))
        h.append(spec.eq(i, xi))
        g.append(spec.ineq(i, xi))
    s = spec.shared(x)
    return stat, h, g, s


def build_mcp(spec: GameSpec, factors: ScalingFactors) -> McpProblem:
    """Assemble residual and dense Jacobian of the scaled-multiplier KKT system."""
    _check_factors(spec, factors)
    layout = KktLayout.for_game(spec)
    lower = np.full(layout.size, -np.inf)
    for s in layout.lam:
        lower[s] = 0.0
    lower[layout.sigma] = 0.0
    upper = np.full(layout.size, np.inf)
    weights = factors.weights

    def fun(z):
        z = np.asarray(z, dtype=float)
        stat, h, g, s = _kkt_parts(spec, factors, layout, z)
        return np.concatenate(stat + h + [-gi for gi in g] + [-s])

    def jac(z):
        z = np.asarray(z, dtype=float)
        x = z[layout.x]
        sigma = z[layout.sigma]
        out = np.zeros((layout.size, layout.size))
        js = spec.shared_jacobian(x) if spec.num_shared else np.zeros((0, spec.n))
        for i in range(spec.num_players):
            blk = spec.block(i)
            xi = x[blk]
            mu_i, lam_i = z[layout.mu[i]], z[layout.lam[i]]
            sig_i = weights[i] * sigma
            if spec.lagrangian_hessians is not None:
                hess = spec.lagrangian_hessians[i](x, mu_i, lam_i, sig_i)
            else:
                hess = fd_jacobian(
                    lambda y: player_lagrangian_gradient(spec, i, y, mu_i, lam_i, sig_i), x)
            out[blk, layout.x] = hess
            jh = spec.eq_jac(i, xi)
            jg = spec.ineq_jac(i, xi)
            out[blk, layout.mu[i]] = jh.T
            out[blk, layout.lam[i]] = jg.T
            if spec.num_shared:
                out[blk, layout.sigma] = js[:, blk].T * weights[i][None, :]
            out[layout.mu[i], blk] = jh
            out[layout.lam[i], blk] = -jg
        if spec.num_shared:
            out[layout.sigma, layout.x] = -js
        return out

    return McpProblem(lower, upper, fun, jac, layout, spec, factors)


def kkt_residual(spec: GameSpec, factors: ScalingFactors, z) -> KktResidual:
    """Infinity norms of stationarity, primal feasibility and complementarity."""
    _check_factors(spec, factors)
    layout = KktLayout.for_game(spec)
    z = np.asarray(z, dtype=float)
    if z.size != layout.size:
        raise GameSpecError(f"z has length {z.size}, layout expects {layout.size}")
    stat, h, g, s = _kkt_parts(spec, factors, layout, z)

    def inf(parts):
        parts = [np.atleast_1d(p) for p in parts if np.size(p)]
        return float(max((np.max(np.abs(p)) for p in parts), default=0.0))

    primal = inf(h + [np.maximum(gi, 0.0) for gi in g] + [np.maximum(s, 0.0)])
    comp = [np.minimum(z[layout.lam[i]], -g[i]) for i in range(spec.num_players)]
    comp.append(np.minimum(z[layout.sigma], -s))
    return KktResidual(inf(stat), primal, inf(comp))
