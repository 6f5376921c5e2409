import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from beamsteer.config import ScenarioConfig, SourceSpec, preset_config
from beamsteer.geometry import default_geometry, delays_from_aoi
from beamsteer.scenesim import (
    AoiTrack,
    MultichannelSignal,
    SceneError,
    base_period,
    base_pose_at,
    base_positions,
    fractional_delay,
    mix_at_snr,
    snr_scale,
    synthesize_scene,
)

from conftest import FS, circle_point


def kin_cfg(**kw):
    return ScenarioConfig(geometry=default_geometry(), p1=(-1.0, 0.0), p3=(1.0, 0.0),
                          v_max=0.45, accel=0.9, duration_s=30.0, **kw)


# --- kinematics -----------------------------------------------------------

def test_pose_starts_at_p1():
    assert base_pose_at(kin_cfg(), 0.0) == pytest.approx((-1.0, 0.0))


def test_pose_end_of_acceleration():
    x, y = base_pose_at(kin_cfg(), 0.5)
    assert x == pytest.approx(-0.8875, abs=1e-12) and y == 0.0


def test_pose_periodic():
    cfg = kin_cfg()
    period = base_period(cfg)
    # oracle: 2 m leg = 2 x 0.1125 m of ramps + 1.775 m cruise at 0.45 m/s
    assert period == pytest.approx(2 * (2 * 0.5 + 1.775 / 0.45))
    for t in (0.0, 1.3, 4.0):
        assert base_pose_at(cfg, t + period) == pytest.approx(base_pose_at(cfg, t))
    assert base_pose_at(cfg, period / 2) == pytest.approx((1.0, 0.0))


def test_pose_out_of_range():
    with pytest.raises(SceneError):
        base_pose_at(kin_cfg(), -0.01)
    with pytest.raises(SceneError):
        base_pose_at(kin_cfg(), 30.01)


def test_speed_never_exceeds_vmax():
    cfg = kin_cfg()
    t = np.arange(0, 20, 0.001)
    v = np.linalg.norm(np.diff(base_positions(cfg, t), axis=0), axis=1) / 0.001
    assert v.max() <= 0.45 + 1e-9


def test_triangle_profile_when_leg_is_short():
    cfg = ScenarioConfig(geometry=default_geometry(), p1=(0.0, 0.0), p3=(0.1, 0.0),
                         v_max=0.45, accel=0.9)
    # peak speed sqrt(a d) = 0.3 < v_max; half the leg reached at t = sqrt(d / a)
    t_half = math.sqrt(0.1 / 0.9)
    assert base_pose_at(cfg, t_half)[0] == pytest.approx(0.05, abs=1e-12)


# --- fractional delay -----------------------------------------------------

def test_zero_delay_is_identity(rng):
    x = rng.standard_normal(4000)
    # band-limit to stay inside the interpolator passband
    from scipy.signal import butter, sosfiltfilt
    x = sosfiltfilt(butter(8, 0.8, output="sos"), x)
    y = fractional_delay(x, 0.0)
    assert np.sqrt(np.mean((y - x) ** 2)) <= 1e-3


def test_integer_delay_moves_impulse():
    x = np.zeros(64)
    x[20] = 1.0
    y = fractional_delay(x, 3.0)
    assert np.argmax(y) == 23 and y[23] >= 0.999


def test_fractional_delay_of_tone():
    n = 16000
    t = np.arange(n) / FS
    x = np.sin(2 * np.pi * 1000 * t)
    y = fractional_delay(x, 2.5)
    # brute-force cross-correlation on the interior, then parabolic refinement
    core = slice(200, n - 200)
    lags = np.arange(-8, 9)
    cc = np.array([np.dot(y[core], np.roll(x, k)[core]) for k in lags])
    i = int(np.argmax(cc))
    a, b, c = cc[i - 1], cc[i], cc[i + 1]
    est = lags[i] + 0.5 * (a - c) / (a - 2 * b + c)
    assert est == pytest.approx(2.5, abs=0.02)


def test_energy_preserved_for_bandlimited_input(rng):
    from scipy.signal import butter, sosfiltfilt
    x = sosfiltfilt(butter(8, 0.6, output="sos"), rng.standard_normal(8000))
    for tau in (0.3, 1.5, -2.25, 7.75):
        y = fractional_delay(x, tau)[50:-50]
        ratio = 10 * np.log10(np.sum(y ** 2) / np.sum(x[50:-50] ** 2))
        assert abs(ratio) <= 0.1


def test_fractional_delay_precondition():
    with pytest.raises(SceneError):
        fractional_delay(np.ones(10), 10.0)


# --- mixing ---------------------------------------------------------------

def test_snr_scale_examples(rng):
    c = rng.standard_normal(1000)
    n = rng.standard_normal(1000)
    n *= np.sqrt(np.mean(c ** 2) / np.mean(n ** 2))
    assert snr_scale(c, n, 0.0) == pytest.approx(1.0)
    assert snr_scale(c, n, 5.0) == pytest.approx(0.5623, abs=1e-4)


@given(st.floats(-20, 40))
def test_mix_hits_requested_snr(snr):
    rng = np.random.default_rng(0)
    c, n = rng.standard_normal(500), 3.0 * rng.standard_normal(500)
    mix = mix_at_snr(c, n, snr)
    resid = mix - c
    got = 20 * np.log10(np.sqrt(np.mean(c ** 2)) / np.sqrt(np.mean(resid ** 2)))
    assert got == pytest.approx(snr, abs=1e-9)


def test_mix_rejects_silence():
    with pytest.raises(SceneError):
        mix_at_snr(np.zeros(10), np.ones(10), 5.0)
    with pytest.raises(SceneError):
        mix_at_snr(np.ones(10), np.zeros(10), 5.0)


def test_container_validation():
    with pytest.raises(SceneError):
        MultichannelSignal(0, np.zeros((2, 3)))
    with pytest.raises(SceneError):
        AoiTrack([0.0, 0.0], [1.0, 2.0])
    with pytest.raises(SceneError):
        AoiTrack([0.0, 1.0], [1.0, np.nan])


# --- scene synthesis ------------------------------------------------------

def static_cfg(angle, **kw):
    kw.setdefault("duration_s", 2.0)
    return ScenarioConfig(geometry=default_geometry(), p1=(0.0, 0.0), p3=(0.0, 0.0),
                          speech=SourceSpec(circle_point(angle), kw.pop("audio", "synthetic:speech")),
                          **kw)


def test_on_axis_source_gives_identical_channels():
    sc = synthesize_scene(static_cfg(0.0))
    d = sc.mixture.data
    for ch in d[1:]:
        assert np.sqrt(np.mean((ch - d[0]) ** 2)) <= 1e-3
    assert np.all(sc.aoi.aoi_deg == 0.0)


def _upsampled_lag(a, b, up=64):
    # lag of b relative to a (positive = b later), via zero-padded cross-spectrum
    n = 1 << int(np.ceil(np.log2(2 * len(a))))
    cross = np.fft.rfft(b, n) * np.conj(np.fft.rfft(a, n))
    cc = np.fft.irfft(cross, n * up)
    cc = np.concatenate([cc[-40 * up:], cc[:40 * up + 1]])
    return (np.argmax(cc) - 40 * up) / up


def test_static_source_tdoas_match_closed_form():
    sc = synthesize_scene(static_cfg(30.0, audio="synthetic:white"))
    expected = delays_from_aoi(default_geometry(), 30.0).samples
    d = sc.mixture.data[:, 1000:-1000]
    for ch in range(1, 4):
        assert _upsampled_lag(d[0], d[ch]) == pytest.approx(expected[ch], abs=0.1)


def test_aoi_track_matches_independent_pose_oracle():
    cfg = preset_config("NST-1", duration_s=6.0)
    sc = synthesize_scene(cfg)
    sx, sy = cfg.speech.position
    for t, a in zip(sc.aoi.times[::37], sc.aoi.aoi_deg[::37]):
        hx, _ = base_pose_at(cfg, t)
        # static head facing +y: AOI is the angle of (dx, dy) from +y
        expected = math.degrees(math.atan((sx - hx) / (sy - 0.0)))
        assert a == pytest.approx(expected, abs=1e-9)
    assert np.allclose(np.diff(sc.aoi.times), 0.01)


def test_scene_shape_and_limits():
    cfg = preset_config("NST-2", duration_s=3.0, ego_noise_snr_db=15.0)
    sc = synthesize_scene(cfg)
    assert sc.mixture.data.shape == (4, 48000)
    assert sc.mixture.sample_rate == cfg.geometry.sample_rate
    assert np.all(np.isfinite(sc.mixture.data))
    assert np.max(np.abs(sc.mixture.data)) <= 1.0
    np.testing.assert_allclose(sc.mixture.data, sc.speech_image + sc.noise_image, atol=1e-12)


def test_noise_snr_at_reference_mic():
    cfg = ScenarioConfig(geometry=default_geometry(), duration_s=4.0,
                         noise=(SourceSpec(circle_point(45), "synthetic:pink", 5.0),))
    sc = synthesize_scene(cfg)
    s, n = sc.speech_image[0], sc.noise_image[0]
    assert 20 * np.log10(np.sqrt(np.mean(s ** 2)) / np.sqrt(np.mean(n ** 2))) == pytest.approx(5.0, abs=1e-6)


def test_seeded_scenes_are_bit_identical():
    cfg = preset_config("VbST-2", duration_s=2.0)
    a, b = synthesize_scene(cfg), synthesize_scene(cfg)
    assert a.mixture.data.tobytes() == b.mixture.data.tobytes()
    assert a.aoi.aoi_deg.tobytes() == b.aoi.aoi_deg.tobytes()
    c = synthesize_scene(preset_config("VbST-2", duration_s=2.0, seed=1))
    assert not np.array_equal(a.mixture.data, c.mixture.data)


def test_doubling_distances_keeps_aoi():
    near = preset_config("NST-1", duration_s=2.0)
    far = preset_config("NST-1", duration_s=2.0, speech=SourceSpec((0.0, 4.0)),
                        p1=(-2.1, 0.0), p3=(2.1, 0.0), v_max=0.9, accel=1.8)
    np.testing.assert_allclose(synthesize_scene(far).aoi.aoi_deg,
                               synthesize_scene(near).aoi.aoi_deg, atol=1e-9)


def test_behind_array_source_warns():
    cfg = ScenarioConfig(geometry=default_geometry(), p1=(0.0, 0.0), p3=(0.0, 0.0),
                         speech=SourceSpec((0.5, -2.0)), duration_s=1.0)
    sc = synthesize_scene(cfg)
    assert sc.metadata["warnings"] and "speech" in sc.metadata["warnings"][0]
    assert np.all(np.isfinite(sc.mixture.data))


def test_reverb_and_ego_noise_options():
    cfg = static_cfg(20.0, rt60_s=0.3, ego_noise_snr_db=20.0)
    sc = synthesize_scene(cfg)
    assert np.all(np.isfinite(sc.mixture.data))
    assert np.any(sc.noise_image)
