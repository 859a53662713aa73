"""Bundled JSON configs and the helpers that turn their sections into scenarios.

A config file holds ``track`` and ``racing`` (see ``racing.config_from_dict``)
plus any of:

* ``scenario``: ``car1`` / ``car2`` start states ``{"v", "s", "t", "psi"}`` for sweeps
* ``sweep``: ``alpha_min``, ``alpha_max``, ``count``, ``warm_start``
* ``race``: ``opponent`` / ``ego`` start states, ``ego_alpha``, ``duration``
* ``mc``: ``n``, ``seed``, ``duration``
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from ..racing import RacingConfig, Track, VehicleState, config_from_dict
from .racing_runs import RaceScenario

BUILTIN = ("straight", "curved", "ltrack")


def config_path(name_or_path) -> Path:
    """A bundled config by name (``"curved"``) or any JSON file path."""
    text = str(name_or_path)
    if text in BUILTIN:
        return Path(str(resources.files("gnepsolve") / "configs" / f"{text}.json"))
    path = Path(text)
    if not path.is_file():
        raise FileNotFoundError(f"no config file {text!r} (built-ins: {', '.join(BUILTIN)})")
    return path


def load_preset(name_or_path) -> tuple[Track, RacingConfig, dict]:
    with open(config_path(name_or_path)) as fh:
        data = json.load(fh)
    try:
        return config_from_dict(data)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed config: {exc}") from exc


def _state(track: Track, spec: dict) -> VehicleState:
    return VehicleState.on_track(track, spec["v"], spec["s"], spec["t"], spec.get("psi", 0.0))


def sweep_starts(track: Track, extra: dict) -> tuple[VehicleState, VehicleState]:
    sc = extra["scenario"]
    return _state(track, sc["car1"]), _state(track, sc["car2"])


def sweep_alphas(extra: dict) -> tuple[np.ndarray, bool]:
    sw = extra.get("sweep", {})
    alphas = np.geomspace(sw.get("alpha_min", 0.05), sw.get("alpha_max", 20.0), sw.get("count", 15))
    return alphas, bool(sw.get("warm_start", True))


def race_scenario(track: Track, cfg: RacingConfig, extra: dict,
                  ego_alpha: float | None = None) -> RaceScenario:
    race = extra["race"]
    alpha = race.get("ego_alpha", 1.0) if ego_alpha is None else ego_alpha
    return RaceScenario(track, cfg, _state(track, race["opponent"]), _state(track, race["ego"]),
                        float(alpha), 1.0, float(race.get("duration", 2.0)))
