from __future__ import annotations

from functools import lru_cache

import pytest

from leaky_gap.bs_operator import discrete_spectrum
from leaky_gap.geometry import CurveSpec, build_curve, geometry_summary

SAMPLES = 2048

SPECS = {
    "circle0.5": CurveSpec.circle(0.5),
    "circle1": CurveSpec.circle(1.0),
    "circle2": CurveSpec.circle(2.0),
    "ellipse": CurveSpec.ellipse(2.0, 1.0),
    "seg2": CurveSpec.segment((0.0, 0.0), (2.0, 0.0)),
    "seg4": CurveSpec.segment((0.0, 0.0), (4.0, 0.0)),
}


@lru_cache(maxsize=None)
def curve(name: str, samples: int = SAMPLES):
    return build_curve(SPECS[name], samples)


@lru_cache(maxsize=None)
def summary(name: str):
    return geometry_summary(curve(name))


@lru_cache(maxsize=None)
def spectrum(name: str, alpha: float, n: int = 256, max_states: int | None = 2):
    return discrete_spectrum(curve(name), alpha, n, max_states=max_states)


@pytest.fixture(scope="session")
def unit_circle():
    return curve("circle1")


@pytest.fixture(scope="session")
def segment2():
    return curve("seg2")


@pytest.fixture(scope="session")
def ellipse():
    return curve("ellipse")


@pytest.fixture(scope="session")
def circle10():
    return spectrum("circle1", 10.0)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
