import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from beamsteer.geometry import (
    ArrayGeometry,
    GeometryError,
    aoi_from_pose,
    bearing_deg,
    default_geometry,
    delays_from_aoi,
    wrap_deg,
)

angles = st.floats(-90, 90, allow_nan=False)
offsets = st.lists(st.floats(-0.5, 0.5, allow_nan=False).filter(lambda v: abs(v) > 1e-4),
                   min_size=1, max_size=6)


def geom_from(rest, c=343.0, fs=16000):
    return ArrayGeometry((0.0, *rest), 0, c, fs)


def test_zero_angle_gives_zero_delays():
    for g in (default_geometry(), geom_from([0.1, -0.2]), geom_from([0.05], c=340, fs=48000)):
        d = delays_from_aoi(g, 0.0)
        assert np.all(d.seconds == 0) and np.all(d.samples == 0)


def test_thirty_degrees_ten_cm():
    d = delays_from_aoi(geom_from([0.1]), 30.0)
    assert d.seconds[1] == pytest.approx(1.4577e-4, abs=1e-8)
    assert d.samples[1] == pytest.approx(2.3324, abs=1e-4)


def test_endfire_343mm():
    d = delays_from_aoi(geom_from([0.343]), 90.0)
    assert d.seconds[1] == pytest.approx(1.0e-3, rel=1e-12)
    assert d.samples[1] == pytest.approx(16.0, rel=1e-12)


@pytest.mark.parametrize("bad", [-90.0001, 90.5, 180.0, float("nan")])
def test_out_of_range_angle(bad):
    with pytest.raises(GeometryError):
        delays_from_aoi(default_geometry(), bad)


def test_reference_delay_is_exactly_zero():
    g = ArrayGeometry.from_positions([-0.1, 0.0, 0.07], reference_index=1)
    for a in (-73.0, 12.5, 90.0):
        assert delays_from_aoi(g, a).seconds[1] == 0.0


@pytest.mark.parametrize("kwargs, field", [
    ({"mic_offsets": (0.0,)}, "mic_offsets"),
    ({"mic_offsets": (0.0, 0.0)}, "length"),
    ({"mic_offsets": (0.1, 0.2)}, "reference"),
    ({"mic_offsets": (0.0, float("inf"))}, "finite"),
    ({"mic_offsets": (0.0, 0.1), "sound_speed": 0}, "sound_speed"),
    ({"mic_offsets": (0.0, 0.1), "sample_rate": -1}, "sample_rate"),
    ({"mic_offsets": (0.0, 0.1), "reference_index": 2}, "reference_index"),
])
def test_geometry_validation(kwargs, field):
    with pytest.raises(GeometryError, match=field):
        ArrayGeometry(**kwargs)


def test_default_geometry_offsets():
    g = default_geometry()
    assert g.n_mics == 4 and g.reference_index == 0
    np.testing.assert_allclose(g.offsets, [0.0, 0.149, 0.189, 0.226], atol=1e-12)


def test_aoi_examples():
    assert aoi_from_pose(0.0, (0, 0), (0, 3)) == pytest.approx(0.0)
    assert aoi_from_pose(0.0, (0, 0), (2, 2)) == pytest.approx(45.0)
    assert aoi_from_pose(0.0, (0, 0), (0, -1)) == pytest.approx(180.0)
    assert aoi_from_pose(45.0, (1, 1), (3, 3)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(GeometryError):
        aoi_from_pose(0.0, (1, 1), (1, 1))


def test_wrap_range():
    assert wrap_deg(180.0) == 180.0
    assert wrap_deg(-180.0) == 180.0
    assert wrap_deg(540.0) == 180.0
    assert wrap_deg(-190.0) == pytest.approx(170.0)


@given(offsets, angles)
def test_antisymmetry(rest, a):
    g = geom_from(rest)
    np.testing.assert_array_equal(delays_from_aoi(g, -a).seconds, -delays_from_aoi(g, a).seconds)


@given(offsets, angles, angles)
def test_monotone_in_angle(rest, a, b):
    if a == b:
        return
    lo, hi = sorted((a, b))
    g = geom_from(rest)
    d_lo, d_hi = delays_from_aoi(g, lo).seconds, delays_from_aoi(g, hi).seconds
    pos = g.offsets > 0
    # strictness holds analytically; allow for ties only when sin() rounds equal
    if math.sin(math.radians(lo)) < math.sin(math.radians(hi)):
        assert np.all(d_lo[pos] < d_hi[pos])


@given(offsets, angles)
def test_scale_consistency_and_bound(rest, a):
    g = geom_from(rest)
    g2 = geom_from([2 * v for v in rest])
    d, d2 = delays_from_aoi(g, a).seconds, delays_from_aoi(g2, a).seconds
    np.testing.assert_allclose(d2, 2 * d, rtol=1e-12, atol=1e-300)
    assert np.all(np.abs(d) <= np.abs(g.offsets) / g.sound_speed + 1e-18)


@given(st.floats(-720, 720), st.floats(-720, 720),
       st.tuples(st.floats(-5, 5), st.floats(-5, 5)),
       st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_rotating_pose_shifts_aoi(yaw, phi, head, src):
    if math.dist(head, src) < 1e-3:
        return
    base = aoi_from_pose(yaw, head, src)
    rotated = aoi_from_pose(yaw + phi, head, src)
    diff = (rotated - (base - phi)) % 360.0
    assert min(diff, 360.0 - diff) < 1e-9
    assert -180.0 < rotated <= 180.0


def test_aoi_matches_vector_oracle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        head, src = rng.uniform(-3, 3, 2), rng.uniform(-3, 3, 2)
        yaw = rng.uniform(-180, 180)
        mra = np.array([math.sin(math.radians(yaw)), math.cos(math.radians(yaw))])
        v = (src - head) / np.linalg.norm(src - head)
        angle = math.degrees(math.acos(np.clip(mra @ v, -1, 1)))
        # clockwise (towards +x when facing +y) is positive: cross product z < 0
        sign = -1.0 if mra[0] * v[1] - mra[1] * v[0] > 0 else 1.0
        assert aoi_from_pose(yaw, head, src) == pytest.approx(sign * angle, abs=1e-6)
