"""Damped semismooth Newton method for mixed complementarity problems.

Bounded rows are reformulated with the (smoothed) Fischer-Burmeister
function, free rows keep F(z). The merit ``0.5 * ||Phi||^2`` is decreased by
Armijo backtracking; singular Newton systems get a Levenberg-Marquardt shift.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kkt_mcp import McpProblem

logger = logging.getLogger(__name__)

FB_SMOOTHING = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-6
    max_iter: int = 200
    armijo: float = 1e-4
    backtrack: float = 0.5
    min_step: float = 1e-12
    levenberg: float = 1e-8
    levenberg_growth: float = 10.0
    levenberg_max: float = 1e6
    smoothing: float = FB_SMOOTHING
    # give up when the merit has not dropped by stall_ratio over stall_window iterations
    stall_window: int = 10
    stall_ratio: float = 0.5

    def __post_init__(self):
        for name in ("tol", "armijo", "min_step", "levenberg", "levenberg_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if not 0.0 < self.backtrack < 1.0:
            raise ValueError("backtrack must lie in (0, 1)")
        if self.smoothing < 0:
            raise ValueError("smoothing must be nonnegative")
        if self.stall_window < 1 or not 0.0 < self.stall_ratio <= 1.0:
            raise ValueError("stall_window must be positive and stall_ratio in (0, 1]")


@dataclass
class SolverResult:
    z: np.ndarray
    status: str
    residual: float
    iterations: int
    trace: list[tuple[int, float, float]] = field(default_factory=list)
    merits: list[float] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def write_trace(self, path) -> None:
        """CSV with columns iteration, residual, step."""
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "residual", "step"])
            for row in self.trace:
                w.writerow([row[0], repr(row[1]), repr(row[2])])


def fischer_burmeister(a, b, smoothing: float = FB_SMOOTHING):
    """``a + b - sqrt(a^2 + b^2 + smoothing)``; vanishes on complementary pairs."""
    return a + b - np.sqrt(a * a + b * b + smoothing)


def _bounded_rows(problem: McpProblem) -> np.ndarray:
    return np.isfinite(problem.lower)


def fb_residual(problem: McpProblem, z, smoothing: float = FB_SMOOTHING, f=None) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    f = problem.fun(z) if f is None else f
    out = np.array(f, dtype=float)
    mask = _bounded_rows(problem)
    out[mask] = fischer_burmeister(z[mask] - problem.lower[mask], f[mask], smoothing)
    return out


def _fb_jacobian(problem, z, f, jf, smoothing):
    mask = _bounded_rows(problem)
    jphi = np.array(jf, dtype=float)
    a = z[mask] - problem.lower[mask]
    b = f[mask]
    r = np.sqrt(a * a + b * b + smoothing)
    if smoothing == 0.0:
        # generalized derivative at the kink: any element of the B-subdifferential
        r = np.where(r == 0.0, 1.0, r)
    da = 1.0 - a / r
    db = 1.0 - b / r
    idx = np.flatnonzero(mask)
    jphi[idx] *= db[:, None]
    jphi[idx, idx] += da
    return jphi


class SemismoothNewton:
    """Holds its own workspace; use one instance per thread."""

    def __init__(self, config: SolverConfig | None = None):
        self.config = config or SolverConfig()

    def _merit(self, problem, z):
        with np.errstate(all="ignore"):
            try:
                f = problem.fun(z)
            except (ValueError, FloatingPointError, ZeroDivisionError, OverflowError):
                return math.inf, None, None
            phi = fb_residual(problem, z, self.config.smoothing, f)
        if not np.all(np.isfinite(phi)):
            return math.inf, None, None
        return 0.5 * float(phi @ phi), phi, f

    def _direction(self, jphi, phi, reg):
        """Newton step; falls back to a Levenberg-Marquardt step with shift ``reg``."""
        if reg == 0.0:
            try:
                d = np.linalg.solve(jphi, -phi)
                if np.all(np.isfinite(d)):
                    return d
            except np.linalg.LinAlgError:
                pass
            return None
        jtj = jphi.T @ jphi
        jtj[np.diag_indices_from(jtj)] += reg
        try:
            d = np.linalg.solve(jtj, -(jphi.T @ phi))
        except np.linalg.LinAlgError:
            return None
        return d if np.all(np.isfinite(d)) else None

    def _line_search(self, problem, z, d, merit, slope):
        cfg = self.config
        t = 1.0
        while t >= cfg.min_step:
            trial = z + t * d
            m, phi, f = self._merit(problem, trial)
            if m <= merit + cfg.armijo * t * slope:
                return t, trial, m, phi, f
            t *= cfg.backtrack
        return None

    def solve(self, problem: McpProblem, z0) -> SolverResult:
        cfg = self.config
        z = np.array(z0, dtype=float)
        if z.shape != (problem.size,):
            raise ValueError(f"z0 has shape {z.shape}, problem has {problem.size} variables")
        z = np.clip(z, problem.lower, problem.upper)
        merit, phi, f = self._merit(problem, z)
        if phi is None:
            return SolverResult(z, "line_search_failure", math.inf, 0, [])
        res = float(np.max(np.abs(phi))) if phi.size else 0.0
        trace = [(0, res, 0.0)]
        merits = [merit]
        it = 0
        status = "max_iter"
        while True:
            if res <= cfg.tol:
                status = "converged"
                break
            if it >= cfg.max_iter:
                break
            it += 1
            jphi = _fb_jacobian(problem, z, f, problem.jac(z), cfg.smoothing)
            grad = jphi.T @ phi
            step = None
            reg = 0.0
            while step is None:
                d = self._direction(jphi, phi, reg)
                if d is not None:
                    slope = float(grad @ d)
                    if slope < 0.0:
                        step = self._line_search(problem, z, d, merit, slope)
                reg = cfg.levenberg if reg == 0.0 else reg * cfg.levenberg_growth
                if reg > cfg.levenberg_max:
                    break
            if step is None:
                status = "singular" if d is None else "line_search_failure"
                break
            t, z, merit, phi, f = step
            res = float(np.max(np.abs(phi)))
            trace.append((it, res, t))
            merits.append(merit)
            w = cfg.stall_window
            if res > cfg.tol and len(merits) > w and merit > cfg.stall_ratio * merits[-1 - w]:
                status = "line_search_failure"
                break
        logger.debug("semismooth newton: %s after %d iterations, residual %.3e", status, it, res)
        return SolverResult(z, status, res, it, trace, merits)


def solve_mcp(problem: McpProblem, config: SolverConfig | None = None, z0=None) -> SolverResult:
    if z0 is None:
        z0 = np.zeros(problem.size)
    return SemismoothNewton(config).solve(problem, z0)
