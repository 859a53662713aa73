import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gnepsolve.racing import RacingConfig, Track, VehicleState, build_racing_game
from gnepsolve.scenarios import build_1d_game

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CRITERIA = {
    1: "1D normalized solution",
    2: "1D non-normalized family",
    3: "equilibrium certification",
    4: "normalized-reduction property",
    5: "scaling equivalence",
    6: "MCP solver unit suite",
    7: "Jacobian correctness",
    8: "racing sweep, straight track",
    9: "racing sweep, curved track",
    10: "Monte Carlo directional reproduction",
    11: "determinism",
}
_outcomes: dict[int, list[bool]] = {}
_details: dict[int, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        for n in marker.args:
            _outcomes.setdefault(n, []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, label in CRITERIA.items():
        runs = _outcomes.get(n)
        if runs is None:
            status = "NOT RUN"
        else:
            status = "PASS" if all(runs) else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}: {status:7s} {label}")
        for line in _details.get(n, []):
            terminalreporter.write_line(f"               {line}")


@pytest.fixture
def note():
    """``note(n, text)`` attaches a measured value to criterion n's summary line."""
    def add(n: int, text: str) -> None:
        _details.setdefault(n, []).append(text)
    return add


@pytest.fixture(scope="session")
def straight_track():
    return Track.from_pieces([{"kind": "line", "length": 20.0}], 0.5, start=(-5.0, 0.0, 0.0))


@pytest.fixture(scope="session")
def circle_track():
    return Track.from_pieces([{"kind": "arc", "radius": 2.0, "angle_deg": 360.0}], 0.5, loop=True,
                             blend=0.0)


@pytest.fixture(scope="session")
def oned():
    return build_1d_game(1.0, 1.0)


@pytest.fixture(scope="session")
def racing_game(straight_track):
    cfg = RacingConfig(v_max=(2.0, 3.0))
    a = VehicleState.on_track(straight_track, 2.0, 0.5, 0.05)
    b = VehicleState.on_track(straight_track, 2.8, 0.0, -0.05)
    return build_racing_game(straight_track, cfg, a, b)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
