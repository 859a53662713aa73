"""Two-car racing game on a Frenet track with a kinematic bicycle model.

Each player's decision vector is ``[x_1 .. x_N, u_0 .. u_{N-1}]`` with states
``x = (v, psi, s, t, X, Y)`` and inputs ``u = (accel, steer)``. The dynamics
defects are private equalities, state/input boxes private inequalities,
and pairwise collision avoidance at knots ``1..N-1`` is the shared block
(``d_safe^2 - dist^2 <= 0``). Player 1 carries shared weight 1 and player 2
carries ``alpha``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .gnep_core import GameSpec, GameSpecError, ScalingFactors

NX = 6
NU = 2
V, PSI, S, T, X, Y = range(6)
ACC, STEER = 6, 7  # positions inside the per-knot variable vector (x, u)

STATE_NAMES = ("v", "psi", "s", "t", "X", "Y")
CURVATURE_BLEND = 0.5  # m, width of the curvature ramp at segment joints


class FrenetSingularityError(ValueError):
    """The lateral offset passed the local center of curvature."""


# ---------------------------------------------------------------------------
# track geometry

@dataclass(frozen=True)
class Segment:
    kind: str
    length: float
    curvature: float
    start_s: float
    x0: float
    y0: float
    heading0: float


@dataclass(frozen=True)
class Track:
    """Chain of lines and circular arcs, G1-continuous by construction."""

    segments: tuple[Segment, ...]
    half_width: float
    loop: bool = False
    name: str = "track"
    blend: float = CURVATURE_BLEND
    _starts: np.ndarray = field(init=False, repr=False, compare=False)
    _table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.segments:
            raise GameSpecError("a track needs at least one segment")
        if self.half_width <= 0:
            raise GameSpecError("half_width must be positive")
        if self.blend < 0:
            raise GameSpecError("blend must be nonnegative")
        starts = np.array([seg.start_s for seg in self.segments])
        table = np.array([[seg.curvature, seg.x0, seg.y0, seg.heading0] for seg in self.segments])
        object.__setattr__(self, "_starts", starts)
        object.__setattr__(self, "_table", table)

    @classmethod
    def from_pieces(cls, pieces: Sequence[dict], half_width: float, start=(0.0, 0.0, 0.0),
                    loop: bool = False, name: str = "track",
                    blend: float = CURVATURE_BLEND) -> "Track":
        """Chain pieces ``{"kind": "line", "length": L}`` and
        ``{"kind": "arc", "radius": R, "angle_deg": a}`` (a > 0 turns left)."""
        x, y, th = (float(v) for v in start)
        s0 = 0.0
        segs = []
        for piece in pieces:
            kind = piece["kind"]
            if kind == "line":
                length, kappa = float(piece["length"]), 0.0
            elif kind == "arc":
                radius = float(piece["radius"])
                angle = math.radians(float(piece["angle_deg"]))
                if radius <= 0 or angle == 0:
                    raise GameSpecError("arcs need a positive radius and nonzero angle")
                length = radius * abs(angle)
                kappa = math.copysign(1.0 / radius, angle)
            else:
                raise GameSpecError(f"unknown segment kind {kind!r}")
            if length <= 0:
                raise GameSpecError("segment lengths must be positive")
            seg = Segment(kind, length, kappa, s0, x, y, th)
            segs.append(seg)
            (x, y), th = _seg_point(seg, length), th + kappa * length
            s0 += length
        return cls(tuple(segs), float(half_width), loop, name, float(blend))

    @property
    def length(self) -> float:
        last = self.segments[-1]
        return last.start_s + last.length

    def _locate(self, s):
        s = np.asarray(s, dtype=float)
        if self.loop:
            s = np.mod(s, self.length)
        idx = np.clip(np.searchsorted(self._starts, s, side="right") - 1, 0, len(self.segments) - 1)
        return s, idx

    def geometry(self, s):
        """Centerline point, heading and curvature at arc length ``s`` (vectorized).

        Outside ``[0, L]`` on open tracks the first/last segment is extended.
        """
        s, idx = self._locate(s)
        row = self._table[idx]
        kappa, x0, y0, th0 = row[..., 0], row[..., 1], row[..., 2], row[..., 3]
        ds = s - self._starts[idx]
        th = th0 + kappa * ds
        small = np.abs(kappa) < 1e-12
        safe = np.where(small, 1.0, kappa)
        cx = np.where(small, x0 + ds * np.cos(th0), x0 + (np.sin(th) - np.sin(th0)) / safe)
        cy = np.where(small, y0 + ds * np.sin(th0), y0 - (np.cos(th) - np.cos(th0)) / safe)
        return cx, cy, th, kappa

    def curvature(self, s):
        """Curvature seen by the vehicle dynamics and its first two derivatives in ``s``.

        Each jump at a segment joint is spread as ``0.5 * (1 + tanh(d / blend))``
        so the dynamics stay smooth; ``blend == 0`` gives the exact piecewise value.
        """
        s = np.asarray(s, dtype=float)
        if self.blend == 0.0:
            k = self.geometry(s)[3]
            return k, np.zeros_like(k), np.zeros_like(k)
        kap = self._table[:, 0]
        if self.loop:
            s = np.mod(s, self.length)
            jumps = np.diff(np.append(kap, kap[0]))
            joints = np.append(self._starts[1:], self.length)
            jumps = np.concatenate([jumps, jumps, jumps])
            joints = np.concatenate([joints - self.length, joints, joints + self.length])
            base = kap[0] - jumps[: len(kap)].sum()
        else:
            jumps = np.diff(kap)
            joints = self._starts[1:]
            base = kap[0]
        w = self.blend
        th = np.tanh((s[..., None] - joints) / w)
        sech2 = 1.0 - th * th
        k = base + 0.5 * np.sum(jumps * (1.0 + th), axis=-1)
        dk = 0.5 / w * np.sum(jumps * sech2, axis=-1)
        ddk = -1.0 / (w * w) * np.sum(jumps * sech2 * th, axis=-1)
        return k, dk, ddk


def _seg_point(seg: Segment, ds: float):
    th = seg.heading0 + seg.curvature * ds
    if seg.curvature == 0.0:
        return seg.x0 + ds * math.cos(seg.heading0), seg.y0 + ds * math.sin(seg.heading0)
    k = seg.curvature
    return (seg.x0 + (math.sin(th) - math.sin(seg.heading0)) / k,
            seg.y0 - (math.cos(th) - math.cos(seg.heading0)) / k)


def curvature_at(track: Track, s):
    """Curvature of the segment containing ``s``."""
    out = track.geometry(s)[3]
    return float(out) if np.ndim(out) == 0 else out


def frenet_to_inertial(track: Track, s, t):
    """Centerline point at ``s`` shifted by ``t`` along the left normal."""
    cx, cy, th, _ = track.geometry(s)
    X_ = cx - np.asarray(t) * np.sin(th)
    Y_ = cy + np.asarray(t) * np.cos(th)
    if np.ndim(X_) == 0:
        return float(X_), float(Y_)
    return X_, Y_


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class RacingConfig:
    horizon: int = 10
    dt: float = 0.1
    beta: float = 0.1
    d_safe: float = 0.4
    v_max: tuple[float, float] = (2.85, 3.0)
    v_min: float = 0.0
    wheelbase: float = 0.3
    a_max: float = 3.0
    steer_max: float = 0.4
    lateral_margin: float = 0.1
    alpha: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "v_max", tuple(float(v) for v in self.v_max))
        if self.horizon < 2:
            raise GameSpecError("horizon must be at least 2")
        if len(self.v_max) != 2:
            raise GameSpecError("v_max needs one value per car")
        for name in ("dt", "beta", "d_safe", "wheelbase", "a_max", "steer_max", "alpha"):
            if not getattr(self, name) > 0:
                raise GameSpecError(f"{name} must be positive")
        if min(self.v_max) <= self.v_min:
            raise GameSpecError("v_max must exceed v_min")

    def lateral_limit(self, track: Track) -> float:
        lim = track.half_width - self.lateral_margin
        if lim <= 0:
            raise GameSpecError("lateral margin leaves no drivable band")
        return lim

    def with_alpha(self, alpha: float) -> "RacingConfig":
        return replace(self, alpha=float(alpha))


def load_config(path) -> tuple[Track, RacingConfig, dict]:
    """Read a JSON config with ``track``, ``racing`` and optional ``scenario`` keys.

    Returns ``(track, cfg, extra)`` where ``extra`` holds every other key.
    """
    with open(path) as fh:
        data = json.load(fh)
    return config_from_dict(data)


def config_from_dict(data: dict) -> tuple[Track, RacingConfig, dict]:
    tr = data["track"]
    track = Track.from_pieces(tr["segments"], tr["half_width"], tuple(tr.get("start", (0, 0, 0))),
                              bool(tr.get("loop", False)), tr.get("name", "track"),
                              float(tr.get("curvature_blend", CURVATURE_BLEND)))
    racing = dict(data.get("racing", {}))
    if "v_max" in racing:
        racing["v_max"] = tuple(racing["v_max"])
    cfg = RacingConfig(**racing)
    extra = {k: v for k, v in data.items() if k not in ("track", "racing")}
    return track, cfg, extra


# ---------------------------------------------------------------------------
# dynamics

@dataclass(frozen=True)
class VehicleState:
    v: float
    psi: float
    s: float
    t: float
    X: float
    Y: float

    @classmethod
    def on_track(cls, track: Track, v: float, s: float, t: float, psi: float = 0.0) -> "VehicleState":
        X_, Y_ = frenet_to_inertial(track, s, t)
        return cls(float(v), float(psi), float(s), float(t), X_, Y_)

    @classmethod
    def from_array(cls, arr) -> "VehicleState":
        return cls(*(float(a) for a in arr))

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.psi, self.s, self.t, self.X, self.Y])


@dataclass(frozen=True)
class VehicleInput:
    accel: float
    steer: float

    def as_array(self) -> np.ndarray:
        return np.array([self.accel, self.steer])


def _step_arrays(track, cfg, xk, uk):
    """Vectorized explicit-Euler step; rows of ``xk`` (K, 6) and ``uk`` (K, 2)."""
    v, psi, s, t = xk[:, V], xk[:, PSI], xk[:, S], xk[:, T]
    a, d = uk[:, 0], uk[:, 1]
    kappa = track.curvature(s)[0]
    den = 1.0 - kappa * t
    sdot = v * np.cos(psi) / den
    dt = cfg.dt
    out = np.empty((xk.shape[0], NX))
    out[:, V] = v + a * dt
    out[:, PSI] = psi + (v / cfg.wheelbase * np.tan(d) - kappa * sdot) * dt
    out[:, S] = s + sdot * dt
    out[:, T] = t + v * np.sin(psi) * dt
    out[:, X], out[:, Y] = frenet_to_inertial(track, out[:, S], out[:, T])
    return out, den


def bicycle_step(state: VehicleState, inp: VehicleInput, track: Track, cfg: RacingConfig) -> VehicleState:
    xk = state.as_array()[None, :]
    uk = inp.as_array()[None, :]
    kappa = float(track.curvature(state.s)[0])
    if 1.0 - kappa * state.t <= 0.0:
        raise FrenetSingularityError(f"Frenet singularity at {state} (kappa={kappa})")
    out, _ = _step_arrays(track, cfg, xk, uk)
    return VehicleState.from_array(out[0])


def _step_derivatives(track, cfg, xk, uk, weights=None):
    """Step values, Jacobians (K, 6, 8) and optionally the weighted Hessian
    ``sum_j weights[:, j] * d2 f_j`` (K, 8, 8) over the variables (x, u)."""
    K = xk.shape[0]
    v, psi, s, t = xk[:, V], xk[:, PSI], xk[:, S], xk[:, T]
    a, d = uk[:, 0], uk[:, 1]
    dt, ell = cfg.dt, cfg.wheelbase
    kappa, dk, ddk = track.curvature(s)
    den = 1.0 - kappa * t
    c, sn = np.cos(psi), np.sin(psi)
    sdot = v * c / den
    tan_d = np.tan(d)
    sec2 = 1.0 + tan_d ** 2

    # sdot = v cos(psi) / (1 - kappa(s) t)
    g_sd = np.zeros((K, 8))
    g_sd[:, V] = c / den
    g_sd[:, PSI] = -v * sn / den
    g_sd[:, T] = v * c * kappa / den ** 2
    g_sd[:, S] = v * c * dk * t / den ** 2
    h_sd = np.zeros((K, 8, 8))
    h_sd[:, V, PSI] = h_sd[:, PSI, V] = -sn / den
    h_sd[:, V, T] = h_sd[:, T, V] = c * kappa / den ** 2
    h_sd[:, PSI, PSI] = -v * c / den
    h_sd[:, PSI, T] = h_sd[:, T, PSI] = -v * sn * kappa / den ** 2
    h_sd[:, T, T] = 2.0 * v * c * kappa ** 2 / den ** 3
    h_sd[:, S, V] = h_sd[:, V, S] = c * dk * t / den ** 2
    h_sd[:, S, PSI] = h_sd[:, PSI, S] = -v * sn * dk * t / den ** 2
    h_sd[:, S, T] = h_sd[:, T, S] = v * c * (dk / den ** 2 + 2.0 * kappa * dk * t / den ** 3)
    h_sd[:, S, S] = v * c * t * (ddk / den ** 2 + 2.0 * dk ** 2 * t / den ** 3)

    vals = np.empty((K, NX))
    jac = np.zeros((K, NX, 8))
    vals[:, V] = v + a * dt
    jac[:, V, V] = 1.0
    jac[:, V, ACC] = dt

    vals[:, PSI] = psi + (v / ell * tan_d - kappa * sdot) * dt
    jac[:, PSI] = -kappa[:, None] * dt * g_sd
    jac[:, PSI, S] -= dk * sdot * dt
    jac[:, PSI, PSI] += 1.0
    jac[:, PSI, V] += tan_d / ell * dt
    jac[:, PSI, STEER] += v * sec2 / ell * dt

    S1 = s + sdot * dt
    gS = dt * g_sd
    gS[:, S] += 1.0
    T1 = t + v * sn * dt
    gT = np.zeros((K, 8))
    gT[:, T] = 1.0
    gT[:, V] = sn * dt
    gT[:, PSI] = v * c * dt
    vals[:, S], vals[:, T] = S1, T1
    jac[:, S], jac[:, T] = gS, gT

    cx, cy, th, k1 = track.geometry(S1)
    tx, ty = np.cos(th), np.sin(th)
    nx_, ny_ = -ty, tx
    d1 = 1.0 - k1 * T1
    vals[:, X] = cx + T1 * nx_
    vals[:, Y] = cy + T1 * ny_
    jac[:, X] = (d1 * tx)[:, None] * gS + nx_[:, None] * gT
    jac[:, Y] = (d1 * ty)[:, None] * gS + ny_[:, None] * gT
    if weights is None:
        return vals, jac, None

    hS = dt * h_sd
    hT = np.zeros((K, 8, 8))
    hT[:, V, PSI] = hT[:, PSI, V] = c * dt
    hT[:, PSI, PSI] = -v * sn * dt
    h_psi = -(kappa * dt)[:, None, None] * h_sd
    h_psi[:, S, :] -= (dk * dt)[:, None] * g_sd
    h_psi[:, :, S] -= (dk * dt)[:, None] * g_sd
    h_psi[:, S, S] -= ddk * sdot * dt
    h_psi[:, V, STEER] += sec2 / ell * dt
    h_psi[:, STEER, V] += sec2 / ell * dt
    h_psi[:, STEER, STEER] += 2.0 * v * sec2 * tan_d / ell * dt

    ss = np.einsum("ki,kj->kij", gS, gS)
    st = np.einsum("ki,kj->kij", gS, gT)
    st = st + st.transpose(0, 2, 1)
    wX, wY = weights[:, X], weights[:, Y]
    # P_ss = k1 * d1 * n, P_st = -k1 * T, P_tt = 0
    c_ss = k1 * d1 * (wX * nx_ + wY * ny_)
    c_st = -k1 * (wX * tx + wY * ty)
    c_s = d1 * (wX * tx + wY * ty)
    c_t = wX * nx_ + wY * ny_
    hess = (c_ss[:, None, None] * ss + c_st[:, None, None] * st
            + (c_s + weights[:, S])[:, None, None] * hS
            + (c_t + weights[:, T])[:, None, None] * hT
            + weights[:, PSI][:, None, None] * h_psi)
    return vals, jac, hess


# ---------------------------------------------------------------------------
# the game

@dataclass(frozen=True)
class RacingGame:
    spec: GameSpec
    factors: ScalingFactors
    track: Track
    cfg: RacingConfig
    initial: tuple[np.ndarray, np.ndarray]

    @property
    def horizon(self) -> int:
        return self.cfg.horizon

    def states(self, x: np.ndarray, player: int) -> np.ndarray:
        """Knots 0..N of ``player`` as an (N+1, 6) array (knot 0 is the initial state)."""
        blk = np.asarray(x)[self.spec.block(player)]
        N = self.cfg.horizon
        return np.vstack([self.initial[player], blk[:NX * N].reshape(N, NX)])

    def inputs(self, x: np.ndarray, player: int) -> np.ndarray:
        blk = np.asarray(x)[self.spec.block(player)]
        N = self.cfg.horizon
        return blk[NX * N:].reshape(N, NU)

    def pack(self, states: Sequence[np.ndarray], inputs: Sequence[np.ndarray]) -> np.ndarray:
        """Inverse of ``states``/``inputs``; ``states[i]`` may include knot 0."""
        N = self.cfg.horizon
        out = []
        for st, u in zip(states, inputs):
            st = np.asarray(st, dtype=float)
            st = st[-N:]
            out.append(np.concatenate([st.ravel(), np.asarray(u, dtype=float).ravel()]))
        return np.concatenate(out)

    def costs(self, x: np.ndarray) -> tuple[float, float]:
        return self.spec.cost(0, x), self.spec.cost(1, x)

    def distances(self, x: np.ndarray) -> np.ndarray:
        a, b = self.states(x, 0), self.states(x, 1)
        return np.hypot(a[:, X] - b[:, X], a[:, Y] - b[:, Y])

    def dynamics_defect(self, x: np.ndarray) -> float:
        return max(float(np.max(np.abs(self.spec.eq(i, np.asarray(x)[self.spec.block(i)]))))
                   for i in range(2))


def _player_eval(track, cfg, x0):
    """Closures for one player's private constraints."""
    N = cfg.horizon
    nvar = (NX + NU) * N

    def split(xi):
        st = xi[:NX * N].reshape(N, NX)
        u = xi[NX * N:].reshape(N, NU)
        prev = np.vstack([x0[None, :], st[:-1]])
        return st, u, prev

    def eq(xi):
        st, u, prev = split(xi)
        f, _ = _step_arrays(track, cfg, prev, u)
        with np.errstate(all="ignore"):
            return (st - f).ravel()

    def eq_jac(xi):
        st, u, prev = split(xi)
        _, jf, _ = _step_derivatives(track, cfg, prev, u)
        out = np.zeros((NX * N, nvar))
        for k in range(N):
            rows = slice(NX * k, NX * (k + 1))
            out[rows, NX * k:NX * (k + 1)] = np.eye(NX)
            if k > 0:
                out[rows, NX * (k - 1):NX * k] = -jf[k, :, :NX]
            out[rows, NX * N + NU * k:NX * N + NU * (k + 1)] = -jf[k, :, NX:]
        return out

    def eq_hess(xi, mu):
        """Hessian of mu . h over this player's variables."""
        st, u, prev = split(xi)
        _, _, hf = _step_derivatives(track, cfg, prev, u, weights=mu.reshape(N, NX))
        out = np.zeros((nvar, nvar))
        for k in range(N):
            idx = np.r_[np.arange(NX * (k - 1), NX * k) if k > 0 else np.zeros(0, dtype=int),
                        np.arange(NX * N + NU * k, NX * N + NU * (k + 1))]
            loc = np.r_[np.arange(NX) if k > 0 else np.zeros(0, dtype=int), np.arange(NX, NX + NU)]
            out[np.ix_(idx, idx)] -= hf[k][np.ix_(loc, loc)]
        return out

    return eq, eq_jac, eq_hess, split


def _ineq_matrix(cfg: RacingConfig, t_lim: float, v_max: float):
    """Private constraints are linear: g(xi) = G @ xi - b."""
    N = cfg.horizon
    nvar = (NX + NU) * N
    rows, b = [], []

    def add(col, sign, bound):
        r = np.zeros(nvar)
        r[col] = sign
        rows.append(r)
        b.append(bound)

    for k in range(N):
        base = NX * k
        add(base + V, 1.0, v_max)
        add(base + V, -1.0, -cfg.v_min)
        add(base + T, 1.0, t_lim)
        add(base + T, -1.0, t_lim)
    for k in range(N):
        base = NX * N + NU * k
        add(base, 1.0, cfg.a_max)
        add(base, -1.0, cfg.a_max)
        add(base + 1, 1.0, cfg.steer_max)
        add(base + 1, -1.0, cfg.steer_max)
    return np.array(rows), np.array(b)


def build_racing_game(track: Track, cfg: RacingConfig, x1_0, x2_0,
                      check_initial: bool = True) -> RacingGame:
    """Two-player game with shared weights ``(1, cfg.alpha)``.

    The initial states must be at least ``d_safe`` apart unless
    ``check_initial`` is off (closed-loop play after a collision).
    """
    x1_0 = x1_0.as_array() if isinstance(x1_0, VehicleState) else np.asarray(x1_0, dtype=float)
    x2_0 = x2_0.as_array() if isinstance(x2_0, VehicleState) else np.asarray(x2_0, dtype=float)
    if x1_0.shape != (NX,) or x2_0.shape != (NX,):
        raise GameSpecError("initial states must have 6 entries")
    d0 = math.hypot(x1_0[X] - x2_0[X], x1_0[Y] - x2_0[Y])
    if check_initial and d0 < cfg.d_safe:
        raise GameSpecError(f"initial states collide: distance {d0:.3f} < d_safe {cfg.d_safe}")
    N = cfg.horizon
    nvar = (NX + NU) * N
    n = 2 * nvar
    t_lim = cfg.lateral_limit(track)
    x0s = (x1_0, x2_0)
    s_N = [NX * (N - 1) + S, nvar + NX * (N - 1) + S]
    u_idx = [np.arange(NX * N, nvar), nvar + np.arange(NX * N, nvar)]
    # X/Y columns of knots 1..N-1 for both players
    xy = [[(p * nvar + NX * (k - 1) + X, p * nvar + NX * (k - 1) + Y) for k in range(1, N)]
          for p in range(2)]
    xy_idx = np.array(xy)  # (2, N-1, 2)
    m0 = N - 1
    d2 = cfg.d_safe ** 2

    evals = [_player_eval(track, cfg, x0s[p]) for p in range(2)]
    ineqs = [_ineq_matrix(cfg, t_lim, cfg.v_max[p]) for p in range(2)]

    def cost(i):
        def f(x):
            u = x[u_idx[i]]
            return -x[s_N[i]] + x[s_N[1 - i]] + 0.5 * cfg.beta * float(u @ u)
        return f

    def cost_grad(i):
        def f(x):
            g = np.zeros(n)
            g[s_N[i]] = -1.0
            g[s_N[1 - i]] = 1.0
            g[u_idx[i]] = cfg.beta * x[u_idx[i]]
            return g
        return f

    def shared(x):
        dx = x[xy_idx[0, :, 0]] - x[xy_idx[1, :, 0]]
        dy = x[xy_idx[0, :, 1]] - x[xy_idx[1, :, 1]]
        return d2 - (dx * dx + dy * dy)

    def shared_jac(x):
        dx = x[xy_idx[0, :, 0]] - x[xy_idx[1, :, 0]]
        dy = x[xy_idx[0, :, 1]] - x[xy_idx[1, :, 1]]
        out = np.zeros((m0, n))
        r = np.arange(m0)
        out[r, xy_idx[0, :, 0]] = -2 * dx
        out[r, xy_idx[0, :, 1]] = -2 * dy
        out[r, xy_idx[1, :, 0]] = 2 * dx
        out[r, xy_idx[1, :, 1]] = 2 * dy
        return out

    def lag_hess(i):
        lo = i * nvar

        def f(x, mu, lam, sig):
            out = np.zeros((nvar, n))
            xi = x[lo:lo + nvar]
            out[:, lo:lo + nvar] = evals[i][2](xi, mu)
            loc_u = u_idx[i] - lo
            out[loc_u, u_idx[i]] += cfg.beta
            r = np.arange(m0)
            for c in range(2):
                own = xy_idx[i, :, c] - lo
                out[own, xy_idx[i, :, c]] += -2.0 * sig[r]
                out[own, xy_idx[1 - i, :, c]] += 2.0 * sig[r]
            return out
        return f

    spec = GameSpec(
        dims=(nvar, nvar),
        costs=(cost(0), cost(1)),
        eq_dims=(NX * N, NX * N),
        ineq_dims=(ineqs[0][0].shape[0], ineqs[1][0].shape[0]),
        num_shared=m0,
        eq_constraints=(evals[0][0], evals[1][0]),
        ineq_constraints=tuple((lambda xi, G=G, b=b: G @ xi - b) for G, b in ineqs),
        shared_constraints=shared,
        cost_grads=(cost_grad(0), cost_grad(1)),
        eq_jacs=(evals[0][1], evals[1][1]),
        ineq_jacs=tuple((lambda xi, G=G: G) for G, _ in ineqs),
        shared_jac=shared_jac,
        lagrangian_hessians=(lag_hess(0), lag_hess(1)),
        name=f"racing-{track.name}",
    )
    factors = ScalingFactors((np.ones(m0), cfg.alpha * np.ones(m0)))
    return RacingGame(spec, factors, track, cfg, (x1_0.copy(), x2_0.copy()))


# ---------------------------------------------------------------------------
# initial guesses

LATERAL_BIAS = {"follow_center": (0.0, 0.0), "shift_left": (-1.0, 1.0), "shift_right": (1.0, -1.0)}


def rollout(track: Track, cfg: RacingConfig, x0, v_target: float, t_target: float, steps: int):
    """Closed-form controller rollout through the exact dynamics.

    Holds speed toward ``v_target`` and steers toward lateral offset
    ``t_target``; returns states (steps+1, 6) and inputs (steps, 2).
    """
    t_lim = cfg.lateral_limit(track)
    t_target = float(np.clip(t_target, -t_lim, t_lim))
    st = np.zeros((steps + 1, NX))
    st[0] = x0
    u = np.zeros((steps, NU))
    for k in range(steps):
        v, psi, s, t = st[k, :4]
        acc = float(np.clip((v_target - v) / cfg.dt, -cfg.a_max, cfg.a_max))
        steer = 0.0
        if v > 1e-9:
            kappa = float(track.curvature(s)[0])
            sdot = v * math.cos(psi) / (1.0 - kappa * t)
            psi_ref = float(np.clip(2.0 * (t_target - t), -0.3, 0.3))
            tan_d = cfg.wheelbase * (kappa * sdot + (psi_ref - psi) / cfg.dt) / v
            steer = float(np.clip(math.atan(tan_d), -cfg.steer_max, cfg.steer_max))
        u[k] = (acc, steer)
        st[k + 1] = _step_arrays(track, cfg, st[k:k + 1], u[k:k + 1])[0][0]
    return st, u


def rollout_initial_guess(game: RacingGame, mode: str = "follow_center",
                          bias: float = 0.75) -> np.ndarray:
    """MCP start from constant-speed rollouts; all multipliers zero.

    ``shift_left`` pushes player 2 toward the left edge and player 1 toward
    the right edge, ``shift_right`` the opposite; ``follow_center`` keeps
    each car's current offset.
    """
    from .kkt_mcp import KktLayout

    if mode not in LATERAL_BIAS:
        raise ValueError(f"mode must be one of {sorted(LATERAL_BIAS)}")
    t_lim = game.cfg.lateral_limit(game.track)
    states, inputs = [], []
    for p in range(2):
        x0 = game.initial[p]
        shift = LATERAL_BIAS[mode][p]
        t_target = x0[T] if shift == 0.0 else shift * bias * t_lim
        st, u = rollout(game.track, game.cfg, x0, min(x0[V], game.cfg.v_max[p]), t_target, game.horizon)
        states.append(st)
        inputs.append(u)
    layout = KktLayout.for_game(game.spec)
    z0 = np.zeros(layout.size)
    z0[layout.x] = game.pack(states, inputs)
    return z0


# ---------------------------------------------------------------------------
# export

TRAJECTORY_COLUMNS = ("player", "k", "v", "psi", "s", "t", "X", "Y", "u_a", "u_delta")


def trajectory_rows(game: RacingGame, x: np.ndarray):
    rows = []
    for p in range(2):
        st = game.states(x, p)
        u = game.inputs(x, p)
        for k in range(st.shape[0]):
            uk = u[k] if k < u.shape[0] else (float("nan"), float("nan"))
            rows.append((p + 1, k, *(float(v) for v in st[k]), float(uk[0]), float(uk[1])))
    return rows


def write_trajectory_csv(path, rows) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for row in rows:
            w.writerow([row[0], row[1]] + [f"{v:.10g}" for v in row[2:]])
