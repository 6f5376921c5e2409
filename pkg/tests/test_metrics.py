import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from beamsteer.geometry import ArrayGeometry, default_geometry, delays_from_aoi
from beamsteer.metrics import (
    DB_CAP,
    EvalReport,
    EvalRow,
    MetricError,
    align_to_reference,
    beam_pattern,
    best_channel,
    evaluate,
    si_sdr,
    snr_gain,
)

nonzero = st.floats(-1e3, 1e3).filter(lambda c: abs(c) > 1e-3)


def test_si_sdr_identity_and_scale(rng):
    s = rng.standard_normal(1000)
    assert si_sdr(s, s) == DB_CAP
    assert si_sdr(2 * s, s) == DB_CAP


def test_si_sdr_orthogonal_noise_twenty_db(rng):
    s = rng.standard_normal(4000)
    e = rng.standard_normal(4000)
    e -= (e @ s) / (s @ s) * s
    e *= np.sqrt((s @ s) / 100 / (e @ e))
    assert si_sdr(s + e, s) == pytest.approx(20.0, abs=1e-9)


def test_si_sdr_errors(rng):
    with pytest.raises(MetricError):
        si_sdr(rng.standard_normal(10), np.zeros(10))
    with pytest.raises(MetricError):
        si_sdr(np.ones(10), np.ones(11))


@given(nonzero, st.integers(0, 2 ** 16))
def test_si_sdr_scale_invariance(c, seed):
    rng = np.random.default_rng(seed)
    s = rng.standard_normal(256)
    assert si_sdr(c * s, s) == DB_CAP
    x = s + 0.3 * rng.standard_normal(256)
    assert si_sdr(c * x, s) == pytest.approx(si_sdr(x, s), abs=1e-9)


def test_snr_gain_examples(rng):
    s = rng.standard_normal(2000)
    noisy = s + 0.5 * rng.standard_normal(2000)
    assert snr_gain(s, noisy, noisy) == 0.0
    floor = si_sdr(noisy, s)
    assert snr_gain(s, noisy, s) == pytest.approx(DB_CAP - floor)


@given(nonzero, st.integers(0, 2 ** 16))
def test_snr_gain_invariant_to_output_gain(c, seed):
    rng = np.random.default_rng(seed)
    s = rng.standard_normal(512)
    noisy = s + rng.standard_normal(512)
    enh = s + 0.4 * rng.standard_normal(512)
    assert snr_gain(s, noisy, c * enh) == pytest.approx(snr_gain(s, noisy, enh), abs=1e-9)


def test_array_gain_analytic(rng):
    n, m = 160000, 4
    s = rng.standard_normal(n)
    chans = s + rng.standard_normal((m, n))
    gain = snr_gain(s, chans[0], chans.mean(axis=0))
    assert gain == pytest.approx(10 * np.log10(m), abs=0.5)


def test_align_to_reference(rng):
    x = rng.standard_normal(3000)
    late = np.concatenate([np.zeros(12), x[:-12]])
    shifted, lag = align_to_reference(late, x, 50)
    assert lag == 12
    np.testing.assert_allclose(shifted[:-12], x[:-12])
    early = np.concatenate([x[5:], np.zeros(5)])
    assert align_to_reference(early, x, 50)[1] == -5


def test_best_channel(rng):
    s = rng.standard_normal(1000)
    chans = np.stack([s + 0.9 * rng.standard_normal(1000), s + 0.1 * rng.standard_normal(1000),
                      s + 0.5 * rng.standard_normal(1000)])
    assert best_channel(chans, s) == 1


def _pattern(geom, steer_deg, grid, freq=1000.0, weights=None):
    w = np.ones(geom.n_mics) if weights is None else weights
    return beam_pattern(geom, delays_from_aoi(geom, steer_deg), w, freq, grid)


def test_pattern_self_normalized():
    g = default_geometry()
    assert _pattern(g, 0.0, [0.0])[0] == pytest.approx(0.0, abs=1e-12)
    assert _pattern(g, 25.0, [25.0])[0] == pytest.approx(0.0, abs=1e-12)


def test_pattern_broadside_any_geometry():
    for g in (default_geometry(), ArrayGeometry((0.0, 0.3, -0.7)), ArrayGeometry((0.0, 0.01))):
        assert _pattern(g, 0.0, [0.0], weights=np.arange(1, g.n_mics + 1.0))[0] == pytest.approx(0.0)


def test_pattern_default_geometry_ordering():
    g10, g30 = _pattern(default_geometry(), 0.0, [10.0, 30.0])
    assert g30 < g10 < 0.0


def test_pattern_matches_direct_sum():
    g = default_geometry()
    grid = np.linspace(-90, 90, 37)
    w = np.array([0.1, 0.4, 0.2, 0.3])
    got = _pattern(g, 15.0, grid, 2000.0, w)
    tau = delays_from_aoi(g, 15.0).seconds
    for phi, val in zip(grid, got):
        resp = 0
        for n in range(4):
            arrive = g.mic_offsets[n] * np.sin(np.radians(phi)) / 343.0
            resp += w[n] * np.exp(2j * np.pi * 2000.0 * (arrive - tau[n]))
        assert val == pytest.approx(20 * np.log10(abs(resp) / w.sum()), abs=1e-9)


@given(st.floats(-60, 60), st.floats(200, 1400))
def test_pattern_peak_at_steering(steer, freq):
    g = default_geometry()
    grid = np.linspace(-90, 90, 721)
    resp = _pattern(g, steer, grid, freq)
    assert abs(grid[np.argmax(resp)] - steer) <= 0.25 + 1e-9


def test_pattern_rejects_bad_frequency():
    with pytest.raises(MetricError):
        _pattern(default_geometry(), 0.0, [0.0], freq=8000.0)


def test_report_rows_and_files(tmp_path):
    r = EvalReport(config={"x": 1}, seed=3)
    r.add(EvalRow("VbST-1", "wds", 1.0, 2.0, 0.5))
    r.add(EvalRow("VbST-1", "ds-aoi", 3.0, 4.0, 0.5, mean_abs_aoi_deg=2.0))
    r.add(EvalRow("VbST-1", "wds", 1.5, 2.5, 0.5))
    assert [(x.mode, x.snr_gain_db) for x in r.rows] == [("ds-aoi", 3.0), ("wds", 1.5)]
    csv_path = r.write(tmp_path / "rep.json")
    back = EvalReport.from_dict(json.loads((tmp_path / "rep.json").read_text()))
    assert back.to_dict() == r.to_dict()
    lines = csv_path.read_text().splitlines()
    assert lines[0].startswith("preset,mode,snr_gain_db") and len(lines) == 3
    with pytest.raises(MetricError):
        r.add(EvalRow("NST-1", "wds", float("nan"), 0.0, 0.0))


def test_evaluate_compensates_global_lag(rng):
    s = rng.standard_normal(8000)
    noisy = s + 0.5 * rng.standard_normal((2, 8000))
    enhanced = np.concatenate([np.zeros(30), (s + 0.1 * rng.standard_normal(8000))[:-30]])
    row = evaluate(s, noisy, enhanced, 100, preset="p", mode="m")
    assert row.alignment_lag == 30
    assert row.si_sdr_db > row.si_sdr_input_db + 10
    assert row.snr_gain_db == pytest.approx(row.si_sdr_db - row.si_sdr_input_db)
