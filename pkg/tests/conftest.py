import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from beamsteer.config import ScenarioConfig, SourceSpec
from beamsteer.geometry import default_geometry
from beamsteer.scenesim import synthesize_scene

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FS = 16000


def circle_point(angle_deg, radius=2.0):
    a = math.radians(angle_deg)
    return (radius * math.sin(a), radius * math.cos(a))


def static_speech_config(angle_deg=30.0, seed=0, duration_s=10.0, ego_snr_db=10.0, **kw):
    """Static head and base at the origin, speech on a 2 m circle."""
    return ScenarioConfig(geometry=default_geometry(), p1=(0.0, 0.0), p3=(0.0, 0.0),
                          speech=SourceSpec(circle_point(angle_deg)),
                          ego_noise_snr_db=ego_snr_db, duration_s=duration_s, seed=seed, **kw)


@pytest.fixture(scope="session")
def static30_scene():
    return synthesize_scene(static_speech_config(30.0, seed=0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# Acceptance results are collected here and echoed in the terminal summary so
# that one pass/fail line per criterion is visible even with output capture.
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
