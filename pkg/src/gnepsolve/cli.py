"""Command line front end: ``gnepsolve solve-1d | sweep | race | mc``.

Every run writes its results plus ``manifest.json`` into ``--out``.
Exit codes: 0 success, 1 usage or config error, 2 numerical failure.
"""
from __future__ import annotations

import csv
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import click
import numpy as np

from . import __version__
from .racing import TRAJECTORY_COLUMNS, trajectory_rows, write_trajectory_csv
from .scenarios.oned import closed_form, solve_1d
from .scenarios.presets import config_path, load_preset, race_scenario, sweep_alphas, sweep_starts
from .scenarios.racing_runs import racing_sweep, run_monte_carlo, run_race

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2

SWEEP_COLUMNS = ("alpha", "J1", "J2", "converged", "jump_flag")
MC_COLUMNS = ("index", "outcome", "winner", "collision", "failure", "steps", "min_distance",
              "final_gap", "opp_v", "opp_s", "opp_t", "ego_v", "ego_s", "ego_t")
RACE_COLUMNS = ("step", "car") + TRAJECTORY_COLUMNS[2:]


@dataclass
class RunManifest:
    subcommand: str
    config: str | None
    seed: int | None
    out: str
    version: str
    duration: float = 0.0
    args: dict = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)

    def write(self) -> None:
        _dump_json(Path(self.out) / "manifest.json", asdict(self))


def _dump_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


class _Run:
    """Creates the output directory and writes the manifest on exit."""

    def __init__(self, name: str, out: str, config=None, seed=None, **args):
        self.dir = Path(out)
        self.manifest = RunManifest(name, None if config is None else str(config), seed,
                                    str(self.dir), __version__, args=args)

    def __enter__(self):
        self.dir.mkdir(parents=True, exist_ok=True)
        self.t0 = time.perf_counter()
        return self

    def path(self, rel: str) -> Path:
        p = self.dir / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        self.manifest.outputs.append(rel)
        return p

    def __exit__(self, *exc):
        self.manifest.duration = time.perf_counter() - self.t0
        self.manifest.write()
        return False


def _positive(ctx, param, value):
    if value is not None and not value > 0:
        raise click.BadParameter("must be positive")
    return value


def _parse_alphas(text: str) -> np.ndarray:
    """``"lo:hi:count"`` (log spaced) or a comma separated list."""
    try:
        if ":" in text:
            lo, hi, count = text.split(":")
            vals = np.geomspace(float(lo), float(hi), int(count))
        else:
            vals = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        raise click.BadParameter(f"cannot parse {text!r}: {exc}") from exc
    if vals.size == 0:
        raise click.BadParameter("empty alpha list")
    if np.any(vals <= 0):
        raise click.BadParameter("alphas must be positive")
    return vals


def _load(config):
    try:
        return load_preset(config)
    except (OSError, ValueError) as exc:
        raise click.BadParameter(str(exc), param_hint="CONFIG") from exc


common = [
    click.option("--out", default="gnep_out", show_default=True, type=click.Path(file_okay=False),
                 help="Output directory."),
    click.option("--seed", default=None, type=int,
                 help="Random seed (mc falls back to the config, then 0)."),
    click.option("--jobs", default=1, show_default=True, type=click.IntRange(min=1),
                 help="Worker processes."),
]


def with_common(fn):
    for opt in reversed(common):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(__version__)
@click.option("-v", "--verbose", count=True, help="More logging.")
def cli(verbose):
    """Normalized and non-normalized equilibria of shared-constraint games."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")


@cli.command("solve-1d")
@click.option("--a2", default=1.0, show_default=True, type=float, callback=_positive,
              help="Shared-multiplier weight of car 2.")
@click.option("--a3", default=1.0, show_default=True, type=float, callback=_positive,
              help="Shared-multiplier weight of car 3.")
@with_common
def solve_1d_cmd(a2, a3, out, seed, jobs):
    """Three cars on two lanes with weights (1, a2, a3)."""
    with _Run("solve-1d", out, seed=seed, a2=a2, a3=a3, jobs=jobs) as run:
        sol = solve_1d(a2, a3)
        click.echo(f"status  {sol.status} (residual {sol.residual:.2e})")
        click.echo("x       " + " ".join(f"{v:.10g}" for v in sol.positions))
        click.echo("v       " + " ".join(f"{v:.10g}" for v in sol.velocities))
        click.echo(f"sigma   {sol.sigma:.10g}")
        click.echo("costs   " + " ".join(f"{v:.10g}" for v in sol.costs))
        _dump_json(run.path("solution.json"), {
            "a2": a2, "a3": a3, "status": sol.status, "residual": sol.residual,
            "x": sol.positions.tolist(), "v": sol.velocities.tolist(), "sigma": sol.sigma,
            "costs": list(sol.costs), "closed_form": closed_form(a2, a3),
        })
    return EXIT_OK if sol.converged else EXIT_NUMERIC


@cli.command()
@click.argument("config")
@click.option("--alphas", default=None, help='"lo:hi:count" (log spaced) or "a,b,c"; '
              "defaults to the config's sweep section.")
@click.option("--warm/--cold", default=None, help="Warm start from the previous alpha.")
@with_common
def sweep(config, alphas, warm, out, seed, jobs):
    """Solve the two-car game over a range of aggressiveness weights."""
    track, cfg, extra = _load(config)
    default_alphas, default_warm = sweep_alphas(extra)
    values = default_alphas if alphas is None else _parse_alphas(alphas)
    warm = default_warm if warm is None else warm
    try:
        x1, x2 = sweep_starts(track, extra)
    except KeyError as exc:
        raise click.BadParameter(f"config has no scenario entry {exc}", param_hint="CONFIG") from exc
    with _Run("sweep", out, config=config_path(config), seed=seed, alphas=alphas,
              warm=warm, jobs=jobs) as run:
        result, builder = racing_sweep(track, cfg, x1, x2, values, warm_start=warm)
        flags = result.jump_flags()
        _write_csv(run.path("sweep.csv"), SWEEP_COLUMNS,
                   [(e.alpha, e.J1, e.J2, e.converged, f) for e, f in zip(result.entries, flags)])
        for j, e in enumerate(result.entries):
            write_trajectory_csv(run.path(f"trajectories/alpha_{j:03d}.csv"),
                                 trajectory_rows(builder(e.alpha), e.x))
        for lo, hi in result.jump_intervals():
            click.echo(f"jump between alpha {lo:.4g} and {hi:.4g}")
        n_ok = sum(e.converged for e in result.entries)
        click.echo(f"{n_ok}/{len(result.entries)} converged, {len(result.jumps)} jump(s)")
    return EXIT_OK if n_ok == len(result.entries) else EXIT_NUMERIC


@cli.command()
@click.argument("config")
@click.option("--ego-alpha", default=None, type=float, callback=_positive,
              help="Ego weight; defaults to the config's race section.")
@with_common
def race(config, ego_alpha, out, seed, jobs):
    """One closed-loop race from the config's start states."""
    track, cfg, extra = _load(config)
    try:
        scenario = race_scenario(track, cfg, extra, ego_alpha)
    except KeyError as exc:
        raise click.BadParameter(f"config has no race entry {exc}", param_hint="CONFIG") from exc
    with _Run("race", out, config=config_path(config), seed=seed, ego_alpha=ego_alpha,
              jobs=jobs) as run:
        outcome = run_race(scenario)
        rows = []
        for k in range(outcome.ego_states.shape[0]):
            for car, states, inputs in (("opponent", outcome.opponent_states, outcome.opponent_inputs),
                                        ("ego", outcome.ego_states, outcome.ego_inputs)):
                u = inputs[k] if k < inputs.shape[0] else (float("nan"), float("nan"))
                rows.append((k, car, *states[k], *u))
        _write_csv(run.path("race.csv"), RACE_COLUMNS, rows)
        summary = {"winner": outcome.winner, "collision": outcome.collision,
                   "failure": outcome.failure, "steps": outcome.steps,
                   "min_distance": outcome.min_distance, "ego_alpha": scenario.ego_alpha}
        _dump_json(run.path("outcome.json"), summary)
        click.echo(f"winner {outcome.winner}, collision {outcome.collision}, "
                   f"failure {outcome.failure}, steps {outcome.steps}")
    return EXIT_NUMERIC if outcome.failure else EXIT_OK


@cli.command()
@click.argument("config")
@click.option("--n", "n", default=None, type=int, help="Number of races.")
@click.option("--ego-alpha", default=1.0, show_default=True, type=float, callback=_positive)
@with_common
def mc(config, n, ego_alpha, out, seed, jobs):
    """Monte Carlo study of randomized races."""
    track, cfg, extra = _load(config)
    settings = extra.get("mc", {})
    n = settings.get("n", 100) if n is None else n
    seed = int(settings.get("seed", 0)) if seed is None else seed
    if n < 1:
        raise click.BadParameter("must be at least 1", param_hint="--n")
    with _Run("mc", out, config=config_path(config), seed=seed, n=n, ego_alpha=ego_alpha,
              jobs=jobs) as run:
        report = run_monte_carlo(track, cfg, n, seed, ego_alpha,
                                 duration=float(settings.get("duration", 2.0)), jobs=jobs)
        payload = report.to_json()
        payload["config"] = {"track": track.name, "racing": asdict(cfg)}
        _dump_json(run.path("report.json"), payload)
        _write_csv(run.path("runs.csv"), MC_COLUMNS, [
            (r.index, r.outcome, r.winner, r.collision, r.failure, r.steps, r.min_distance,
             r.final_gap, r.opponent0[0], r.opponent0[2], r.opponent0[3],
             r.ego0[0], r.ego0[2], r.ego0[3]) for r in report.runs])
        s = report.summary()
        click.echo(f"win {s['win_percent']:.1f}% ({s['wins']}/{s['n']}), losses {s['losses']}, "
                   f"collisions {s['collisions']}, failures {s['failures']}")
    return EXIT_OK


def run(argv=None) -> int:
    """Invoke the CLI and return its exit code instead of exiting."""
    try:
        rc = cli.main(args=argv, prog_name="gnepsolve", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    return rc if isinstance(rc, int) else EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
