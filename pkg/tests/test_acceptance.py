"""Acceptance criteria 1-11, one or more tests each.

Every test carries ``@pytest.mark.criterion(n)``; the terminal summary prints
one PASS/FAIL line per criterion with the measured values.
"""
import filecmp
import json
import time
from pathlib import Path

import numpy as np
import pytest

from gnepsolve.cli import run as cli_run
from gnepsolve.gnep_core import (
    ScalingFactors,
    actual_multipliers,
    check_equilibrium,
    fd_jacobian,
)
from gnepsolve.kkt_mcp import KktLayout, McpProblem, build_mcp
from gnepsolve.mcp_solver import SolverConfig, solve_mcp
from gnepsolve.racing import build_racing_game, rollout_initial_guess
from gnepsolve.scenarios import build_1d_game, closed_form, run_monte_carlo, solve_1d
from gnepsolve.scenarios.presets import load_preset, sweep_alphas, sweep_starts
from gnepsolve.scenarios.racing_runs import cost_jump, racing_sweep, solve_game, structured_seeds

GRID = (0.25, 0.5, 1.0, 2.0, 4.0)
BOX_1D = (-2.0, 3.0)
CERT_EPS = 1e-3
GAMMAS = (0.1, 7.0, 100.0)
COST_JUMP_RATIO = 5.0  # cost step across a jump vs the largest step elsewhere


def crit(*n):
    return pytest.mark.criterion(*n)


def _timed_sweep(name):
    track, cfg, extra = load_preset(name)
    alphas, warm = sweep_alphas(extra)
    t0 = time.perf_counter()
    sweep, builder = racing_sweep(track, cfg, *sweep_starts(track, extra), alphas, warm_start=warm)
    return sweep, builder, time.perf_counter() - t0


@pytest.fixture(scope="module")
def straight_sweep():
    return _timed_sweep("straight")


@pytest.fixture(scope="module")
def curved_sweep():
    return _timed_sweep("curved")


@pytest.fixture(scope="module")
def grid_solutions():
    return {(a2, a3): solve_1d(a2, a3) for a2 in GRID for a3 in GRID}


def _lcp(M, q):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    return McpProblem(np.zeros(q.size), np.full(q.size, np.inf), lambda z: M @ z + q, lambda z: M)


# --- 1 ---------------------------------------------------------------------

@crit(1)
def test_normalized_1d(tmp_path, note):
    t0 = time.perf_counter()
    sol = solve_1d(1.0, 1.0)
    elapsed = time.perf_counter() - t0
    err = np.max(np.abs(sol.positions - [1.0, 1.125, 1.125]))
    note(1, f"x = {sol.positions.round(10).tolist()}, max error {err:.1e}, {elapsed * 1e3:.1f} ms")
    assert sol.converged and err <= 1e-6
    assert elapsed < 1.0


@crit(1)
def test_normalized_1d_cli(tmp_path, note):
    t0 = time.perf_counter()
    rc = cli_run(["solve-1d", "--a2", "1", "--a3", "1", "--out", str(tmp_path)])
    elapsed = time.perf_counter() - t0
    x = json.loads((tmp_path / "solution.json").read_text())["x"]
    note(1, f"CLI solve-1d: exit {rc}, {elapsed * 1e3:.1f} ms")
    assert rc == 0
    np.testing.assert_allclose(x, [1.0, 1.125, 1.125], atol=1e-6)
    assert elapsed < 1.0


# --- 2 ---------------------------------------------------------------------

@crit(2)
def test_non_normalized_family(grid_solutions, note):
    worst_x = worst_s = 0.0
    for (a2, a3), sol in grid_solutions.items():
        assert sol.converged, (a2, a3)
        cf = closed_form(a2, a3)
        worst_x = max(worst_x, abs(sol.positions[1] - cf["x2"]), abs(sol.positions[2] - cf["x3"]))
        worst_s = max(worst_s, abs(sol.sigma - cf["sigma"]))
    note(2, f"25 grid points: max |x - closed form| {worst_x:.1e}, max |sigma - closed form| {worst_s:.1e}")
    assert worst_x <= 1e-6 and worst_s <= 1e-6


# --- 3 ---------------------------------------------------------------------

@crit(3)
def test_certify_1d_solutions(grid_solutions, note):
    game = build_1d_game()
    worst = 0.0
    for sol in grid_solutions.values():
        rep = check_equilibrium(game.spec, sol.x, eps=CERT_EPS, box=BOX_1D)
        assert rep.certified, rep
        worst = max(worst, rep.max_improvement)
    note(3, f"{len(grid_solutions)} one-dimensional solutions certified, max improvement {worst:.1e}")


@crit(3)
@pytest.mark.parametrize("which", ["straight", "curved"])
def test_certify_sweep_solutions(which, straight_sweep, curved_sweep, note):
    sweep, builder, _ = straight_sweep if which == "straight" else curved_sweep
    worst, count = 0.0, 0
    for e in sweep.entries:
        if not e.converged:
            continue
        rep = check_equilibrium(builder(e.alpha).spec, e.x, eps=CERT_EPS, method="local")
        assert rep.certified, (e.alpha, rep.improvements)
        worst = max(worst, rep.max_improvement)
        count += 1
    note(3, f"{which} sweep: {count} converged solutions certified, max improvement {worst:.1e}")


@crit(3)
def test_refute_point_below_interval(note):
    game = build_1d_game()
    x = game.profile_from_positions([1.0, 0.6, 0.6])
    rep = check_equilibrium(game.spec, x, eps=CERT_EPS, box=BOX_1D)
    note(3, f"x2 = x3 = 0.6: {rep.verdict}, player 3 improves by {rep.improvements[2]:.5f}")
    assert rep.verdict == "refuted"
    assert rep.improvements[2] >= 0.011


# --- 4 ---------------------------------------------------------------------

@crit(4)
def test_equal_factors_equal_multipliers(racing_game, note):
    for sigma in ([0.375], [0.0, 2.5, 1e-3]):
        out = actual_multipliers(ScalingFactors.uniform(3, len(sigma)), sigma)
        assert all(np.array_equal(o, out[0]) for o in out)
    sol = solve_1d(1.0, 1.0)
    out = actual_multipliers(build_1d_game(1.0, 1.0).factors, [sol.sigma])
    assert out[0][0] == out[1][0] == out[2][0]
    res, _ = solve_game(racing_game, structured_seeds(racing_game))
    assert res.converged
    lay = KktLayout.for_game(racing_game.spec)
    out = actual_multipliers(racing_game.factors, res.z[lay.sigma])
    assert np.array_equal(out[0], out[1])
    note(4, f"racing alpha = 1 solution: sigma_1 == sigma_2 exactly (max sigma {out[0].max():.3f})")


# --- 5 ---------------------------------------------------------------------

def _stationarity_rows(spec, factors, z):
    prob = build_mcp(spec, factors)
    return prob.fun(z)[prob.layout.x]


@crit(5)
def test_scaling_equivalence_stationarity(straight_sweep, note):
    sweep, builder, _ = straight_sweep
    cases = [(build_1d_game(a2, a3), solve_1d(a2, a3)) for a2, a3 in [(1, 1), (0.5, 4)]]
    worst = 0.0
    for game, sol in cases:
        lay = KktLayout.for_game(game.spec)
        z = np.concatenate([sol.x, [sol.sigma]])
        base = _stationarity_rows(game.spec, game.factors, z)
        for g in GAMMAS:
            zg = z.copy()
            zg[lay.sigma] *= g
            worst = max(worst, np.max(np.abs(_stationarity_rows(game.spec, game.factors.rescaled(g), zg) - base)))
    e = sweep.entries[3]
    game = builder(e.alpha)
    lay = KktLayout.for_game(game.spec)
    base = _stationarity_rows(game.spec, game.factors, e.z)
    for g in GAMMAS:
        zg = e.z.copy()
        zg[lay.sigma] *= g
        worst = max(worst, np.max(np.abs(_stationarity_rows(game.spec, game.factors.rescaled(g), zg) - base)))
    note(5, f"max stationarity change over gamma in {GAMMAS}: {worst:.1e}")
    assert worst <= 1e-12


@crit(5)
def test_scaling_equivalence_complementarity():
    # position encoding: x2 = x3 holds exactly, so s = 0 exactly
    game = build_1d_game(1.0, 3.0, eliminate_positions=False)
    x = game.profile_from_positions([1.0, 1.3125, 1.3125])
    assert game.spec.shared(x)[0] == 0.0
    for sigma in (0.0, 0.1875):
        for g in GAMMAS:
            scaled = actual_multipliers(game.factors.rescaled(g), [g * sigma])
            for s in scaled:
                assert s[0] >= 0
                assert min(s[0], -game.spec.shared(x)[0]) == 0.0
                assert (s[0] == 0.0) == (sigma == 0.0)
            assert min(g * sigma, -game.spec.shared(x)[0]) == 0.0


# --- 6 ---------------------------------------------------------------------

@crit(6)
def test_solver_unit_suite(note):
    cfg = SolverConfig(tol=1e-10)
    cases = [
        (_lcp([[1.0]], [-1.0]), [5.0], [1.0]),
        (_lcp([[1.0]], [1.0]), [5.0], [0.0]),
        (_lcp([[2, 1], [1, 2]], [-1, -1]), [1.0, 1.0], [1 / 3, 1 / 3]),
    ]
    worst = 0.0
    for prob, z0, want in cases:
        res = solve_mcp(prob, cfg, np.array(z0))
        assert res.converged
        worst = max(worst, np.max(np.abs(res.z - want)))
        assert all(b <= a for a, b in zip(res.merits, res.merits[1:]))
    note(6, f"three LCPs: max error {worst:.1e}")
    assert worst <= 1e-10


@crit(6)
def test_merit_monotone_on_game_traces(straight_sweep, curved_sweep, note):
    traces = 0
    for a2, a3 in [(1, 1), (0.25, 4), (4, 0.25)]:
        g = build_1d_game(a2, a3)
        res = solve_mcp(build_mcp(g.spec, g.factors), SolverConfig(tol=1e-10))
        assert all(b <= a for a, b in zip(res.merits, res.merits[1:]))
        traces += 1
    for sweep, builder, _ in (straight_sweep, curved_sweep):
        for e in sweep.entries[::6]:
            game = builder(e.alpha)
            prob = build_mcp(game.spec, game.factors)
            for z0 in structured_seeds(game):
                res = solve_mcp(prob, None, z0)
                assert all(b <= a for a, b in zip(res.merits, res.merits[1:]))
                traces += 1
    note(6, f"merit nonincreasing on {traces} solver traces")


# --- 7 ---------------------------------------------------------------------

def _max_rel_dev(prob, z):
    fd = fd_jacobian(prob.fun, z)
    return float(np.max(np.abs(prob.jac(z) - fd) / np.maximum(1.0, np.abs(fd))))


@crit(7)
def test_jacobian_1d(note):
    rng = np.random.default_rng(7)
    worst = 0.0
    for eliminate in (True, False):
        g = build_1d_game(0.5, 2.0, eliminate_positions=eliminate)
        prob = build_mcp(g.spec, g.factors)
        for _ in range(10):
            worst = max(worst, _max_rel_dev(prob, rng.standard_normal(prob.size)))
    note(7, f"1D game, 2 x 10 random points: max relative deviation {worst:.1e}")
    assert worst <= 1e-4


@crit(7)
def test_jacobian_racing(note):
    track, cfg, extra = load_preset("curved")
    game = build_racing_game(track, cfg.with_alpha(0.3), *sweep_starts(track, extra))
    prob = build_mcp(game.spec, game.factors)
    lay = prob.layout
    rng = np.random.default_rng(8)
    base = rollout_initial_guess(game)
    worst = 0.0
    for _ in range(10):
        z = base + 0.05 * rng.standard_normal(prob.size)
        z[lay.sigma] = rng.uniform(0.0, 2.0, lay.sigma.stop - lay.sigma.start)
        for s in lay.mu:
            z[s] = rng.standard_normal(s.stop - s.start)
        worst = max(worst, _max_rel_dev(prob, z))
    note(7, f"curved-track racing game (N_z = {prob.size}), 10 random points: "
            f"max relative deviation {worst:.1e}")
    assert worst <= 1e-4


# --- 8 ---------------------------------------------------------------------

@crit(8)
def test_straight_sweep(straight_sweep, note):
    sweep, _, elapsed = straight_sweep
    alphas = sweep.alphas
    assert len(alphas) == 15
    assert alphas[0] == pytest.approx(0.05) and alphas[-1] == pytest.approx(20.0)
    assert np.allclose(np.diff(np.log(alphas)), np.log(400) / 14)
    j_low = sweep.entries[0].J2
    one = [e for e in sweep.entries if abs(e.alpha - 1.0) < 1e-12]
    if one:
        j_one = one[0].J2
    else:
        track, cfg, extra = load_preset("straight")
        ref, _ = racing_sweep(track, cfg, *sweep_starts(track, extra), [1.0])
        assert ref.entries[0].converged
        j_one = ref.entries[0].J2
    n_ok = sum(e.converged for e in sweep.entries)
    note(8, f"{n_ok}/15 converged, {len(sweep.jumps)} jumps, J2(0.05) = {j_low:.4f} vs "
            f"J2(1) = {j_one:.4f}, {elapsed:.1f} s")
    assert n_ok == 15
    assert sweep.jumps == ()
    assert j_low < j_one
    assert elapsed < 120.0


# --- 9 ---------------------------------------------------------------------

@crit(9)
def test_curved_sweep(curved_sweep, note):
    sweep, builder, elapsed = curved_sweep
    assert len(sweep.entries) == 25
    assert sweep.alphas[0] == pytest.approx(1e-2) and sweep.alphas[-1] == pytest.approx(1e2)
    assert sweep.jumps, "no jump flagged"
    found = []
    for j in sweep.jumps:
        ratio = cost_jump(sweep, j)
        a, b = sweep.entries[j - 1], sweep.entries[j]
        # signature is (s1, t1, s2, t2) at the final knot
        lateral = float(np.max(np.abs(a.signature[[1, 3]] - b.signature[[1, 3]])))
        found.append((j, ratio, lateral))
        note(9, f"jump between alpha {a.alpha:.3g} and {b.alpha:.3g}: cost step ratio {ratio:.1f}, "
                f"final lateral change {lateral:.3f} m ({elapsed:.1f} s)")
    assert any(r > COST_JUMP_RATIO and lat > 0.1 for _, r, lat in found)


# --- 10 --------------------------------------------------------------------

def _paired_mc(n):
    track, cfg, extra = load_preset("ltrack")
    mc = extra["mc"]
    t0 = time.perf_counter()
    normal = run_monte_carlo(track, cfg, n, mc["seed"], 1.0, mc["duration"])
    aggressive = run_monte_carlo(track, cfg, n, mc["seed"], 0.05, mc["duration"])
    return normal, aggressive, time.perf_counter() - t0


def _describe(rep):
    s = rep.summary()
    return (f"alpha {s['ego_alpha']:g}: win {s['win_percent']:.0f}% "
            f"({s['wins']} W / {s['losses']} L / {s['collisions']} C / {s['failures']} F)")


@crit(10)
@pytest.mark.slow
def test_monte_carlo_smoke(note):
    normal, aggressive, elapsed = _paired_mc(20)
    note(10, f"smoke n = 20: {_describe(normal)}; {_describe(aggressive)}; {elapsed:.0f} s")
    for rep in (normal, aggressive):
        assert rep.n == 20
        assert rep.wins + rep.losses + rep.collisions + rep.failures == 20
    assert elapsed < 180.0


@crit(10)
@pytest.mark.slow
def test_monte_carlo_paired(note):
    normal, aggressive, elapsed = _paired_mc(100)
    note(10, f"n = 100: {_describe(normal)}; {_describe(aggressive)}; {elapsed:.0f} s")
    assert [r.ego0 for r in normal.runs] == [r.ego0 for r in aggressive.runs]
    assert elapsed < 900.0
    assert aggressive.win_rate > normal.win_rate
    for rep in (normal, aggressive):
        assert 0.20 <= rep.win_rate <= 0.80


# --- 11 --------------------------------------------------------------------

def _tree(root: Path):
    return sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file())


def _same_outputs(a: Path, b: Path):
    files = _tree(a)
    assert files == _tree(b)
    for rel in files:
        if rel.name == "manifest.json":
            ma, mb = json.loads((a / rel).read_text()), json.loads((b / rel).read_text())
            ma.pop("duration"), mb.pop("duration")
            ma.pop("out"), mb.pop("out")
            assert ma == mb
        else:
            assert filecmp.cmp(a / rel, b / rel, shallow=False), rel
    return len(files)


@crit(11)
@pytest.mark.parametrize("args", [
    ["solve-1d", "--a2", "0.5", "--a3", "2"],
    ["sweep", "curved"],
    ["race", "ltrack", "--ego-alpha", "0.05"],
    ["mc", "ltrack", "--n", "4", "--seed", "7", "--ego-alpha", "0.05"],
])
def test_cli_outputs_reproduce(args, tmp_path, note):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli_run(args + ["--out", str(a)]) == 0
    assert cli_run(args + ["--out", str(b)]) == 0
    n = _same_outputs(a, b)
    note(11, f"{args[0]}: {n} files identical across two runs")


@crit(11)
def test_solver_traces_reproduce():
    track, cfg, extra = load_preset("curved")
    game = build_racing_game(track, cfg.with_alpha(0.5), *sweep_starts(track, extra))
    prob = build_mcp(game.spec, game.factors)
    z0 = rollout_initial_guess(game, "shift_left")
    a, b = solve_mcp(prob, None, z0), solve_mcp(prob, None, z0)
    assert a.trace == b.trace and a.status == b.status
    assert np.array_equal(a.z, b.z)


@crit(11)
def test_monte_carlo_reproduces_in_parallel():
    track, cfg, _ = load_preset("ltrack")
    serial = run_monte_carlo(track, cfg, 3, 5, 0.05, duration=0.5, jobs=1)
    parallel = run_monte_carlo(track, cfg, 3, 5, 0.05, duration=0.5, jobs=2)
    assert json.dumps(serial.to_json(), sort_keys=True) == json.dumps(parallel.to_json(), sort_keys=True)
