import numpy as np
import pytest

from racelab.corpus import annulus_track, circle_points, corpus_track
from racelab.scenario import load_scenario
from racelab.track import make_track, rasterize


@pytest.fixture(scope="session")
def oval():
    return load_scenario("oval")


@pytest.fixture(scope="session")
def annulus():
    return annulus_track(20.0, 2.0, 0.25)


@pytest.fixture(scope="session")
def annulus_grid(annulus):
    return rasterize(annulus, 0.05)


@pytest.fixture(scope="session")
def corpus():
    return {name: corpus_track(name) for name in ("oval", "training", "chicane", "hairpin")}


def straight_path(n=200, spacing=0.25):
    """Open straight waypoint set along +x starting at the origin."""
    x = np.arange(n) * spacing
    return np.column_stack((x, np.zeros(n)))


def square_track(side=20.0, spacing=0.5, half_width=1.0):
    """Rounded-corner square used for small geometry checks."""
    pts = circle_points(side / 2, spacing)
    return make_track(pts, half_width, half_width, "round")


_ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def acceptance():
    """Records ``{criterion: (passed, detail)}`` for the terminal summary."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
