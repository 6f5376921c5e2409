"""Anechoic planar-wave simulation of the moving-robot testbed.

The robot base shuttles between P1 and P3 with a trapezoidal velocity
profile.  Every source is rendered onto the array per 10 ms hop: the hop's
AOI gives per-channel fractional delays, each hop is delayed with a 31-tap
Hann-windowed sinc and the hops are joined with a 50% raised-cosine
cross-fade (periodic Hann windows, which sum to one).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from beamsteer.config import ScenarioConfig
from beamsteer.geometry import ArrayGeometry, aoi_from_pose, delays_from_aoi
from beamsteer.sources import load_source, pink_noise

HOP_S = 0.01
SINC_HALF_TAPS = 15  # 31 taps
PEAK_LIMIT = 0.9


class SceneError(ValueError):
    pass


@dataclass
class MultichannelSignal:
    """``data`` is a ``(channels, samples)`` array at ``sample_rate``."""

    sample_rate: float
    data: np.ndarray

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=float))
        if self.data.ndim != 2:
            raise SceneError("MultichannelSignal: data must be (channels, samples)")
        if self.sample_rate <= 0:
            raise SceneError("MultichannelSignal: sample_rate must be > 0")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


@dataclass
class AoiTrack:
    times: np.ndarray
    aoi_deg: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).ravel()
        self.aoi_deg = np.asarray(self.aoi_deg, dtype=float).ravel()
        if self.times.shape != self.aoi_deg.shape:
            raise SceneError("AoiTrack: times and angles differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise SceneError("AoiTrack: times must be strictly increasing")
        if not (np.all(np.isfinite(self.times)) and np.all(np.isfinite(self.aoi_deg))):
            raise SceneError("AoiTrack: non-finite values")

    def __len__(self):
        return len(self.times)


@dataclass
class Scene:
    mixture: MultichannelSignal
    aoi: AoiTrack
    speech_image: np.ndarray
    noise_image: np.ndarray
    head_yaw: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def clean(self) -> np.ndarray:
        """Speech as received at the geometry's reference microphone."""
        return self.speech_image[self.metadata.get("reference_index", 0)]


# ---------------------------------------------------------------------------
# Base kinematics

def _leg(cfg: ScenarioConfig):
    dist = math.dist(cfg.p1, cfg.p3)
    ramp = cfg.v_max ** 2 / (2 * cfg.accel)
    if 2 * ramp >= dist:
        peak = math.sqrt(cfg.accel * dist)
        t_acc, t_cruise = peak / cfg.accel, 0.0
    else:
        peak = cfg.v_max
        t_acc, t_cruise = peak / cfg.accel, (dist - 2 * ramp) / peak
    return dist, peak, t_acc, t_cruise, 2 * t_acc + t_cruise


def base_period(cfg: ScenarioConfig) -> float:
    """Time for one P1 -> P3 -> P1 round trip."""
    return 2 * _leg(cfg)[4]


def base_positions(cfg: ScenarioConfig, times) -> np.ndarray:
    """Vectorized base positions, ``(len(times), 2)``; no range check."""
    times = np.asarray(times, dtype=float)
    dist, peak, t_acc, t_cruise, leg = _leg(cfg)
    if dist == 0:
        return np.tile(np.asarray(cfg.p1), (times.size, 1))
    tt = np.mod(times, 2 * leg)
    back = tt >= leg
    tt = np.where(back, tt - leg, tt)
    a = cfg.accel
    s = np.where(
        tt < t_acc, 0.5 * a * tt ** 2,
        np.where(tt < t_acc + t_cruise, 0.5 * a * t_acc ** 2 + peak * (tt - t_acc),
                 dist - 0.5 * a * (leg - tt) ** 2))
    s = np.where(back, dist - s, s)
    frac = s / dist
    p1, p3 = np.asarray(cfg.p1), np.asarray(cfg.p3)
    return p1 + frac[:, None] * (p3 - p1)


def base_pose_at(cfg: ScenarioConfig, t: float) -> tuple[float, float]:
    """Base position at time ``t`` (0 <= t <= duration)."""
    if not 0 <= t <= cfg.duration_s:
        raise SceneError(f"t={t} outside [0, {cfg.duration_s}]")
    x, y = base_positions(cfg, [t])[0]
    return float(x), float(y)


# ---------------------------------------------------------------------------
# Fractional delay

def _sinc_taps(frac: np.ndarray) -> np.ndarray:
    """Kernel rows for fractional parts ``frac`` in [-0.5, 0.5]: shape (..., 31)."""
    t = np.arange(-SINC_HALF_TAPS, SINC_HALF_TAPS + 1)
    u = t - np.asarray(frac, dtype=float)[..., None]
    window = 0.5 * (1 + np.cos(np.pi * u / (SINC_HALF_TAPS + 1)))
    return np.sinc(u) * window


def fractional_delay(x, tau_samples: float) -> np.ndarray:
    """Delay ``x`` by ``tau_samples`` (may be fractional); zeros shift in."""
    x = np.asarray(x, dtype=float)
    if not abs(tau_samples) < len(x):
        raise SceneError("fractional_delay: |tau| must be below the signal length")
    whole = int(np.floor(tau_samples + 0.5))
    taps = _sinc_taps(tau_samples - whole)
    y = np.convolve(x, taps)[SINC_HALF_TAPS:SINC_HALF_TAPS + len(x)]
    out = np.zeros_like(x)
    if whole >= 0:
        out[whole:] = y[:len(x) - whole]
    else:
        out[:whole] = y[-whole:]
    return out


def _render_moving(x: np.ndarray, delays: np.ndarray, hop: int) -> np.ndarray:
    """Render ``x`` with per-hop delays ``(n_hops, channels)`` in samples."""
    n = len(x)
    n_hops, n_ch = delays.shape
    whole = np.floor(delays + 0.5).astype(int)
    frac = delays - whole
    pad = int(np.max(np.abs(whole))) + SINC_HALF_TAPS + 2 * hop
    xp = np.concatenate([np.zeros(pad), x, np.zeros(pad + n_hops * hop)])
    window = 0.5 - 0.5 * np.cos(np.pi * np.arange(2 * hop) / hop)
    seg_len = 2 * hop + 2 * SINC_HALF_TAPS
    starts = np.arange(n_hops) * hop - hop
    out = np.zeros((n_ch, n))
    for ch in range(n_ch):
        first = pad + starts - whole[:, ch] - SINC_HALF_TAPS
        segs = xp[first[:, None] + np.arange(seg_len)]
        taps = _sinc_taps(frac[:, ch])
        y = np.zeros((n_hops, 2 * hop))
        for k in range(2 * SINC_HALF_TAPS + 1):
            lag = 2 * SINC_HALF_TAPS - k
            y += taps[:, k:k + 1] * segs[:, lag:lag + 2 * hop]
        y *= window
        blocks = np.zeros((n_hops + 1, hop))
        blocks[:-1] += y[:, :hop]
        blocks[1:] += y[:, hop:]
        out[ch] = blocks.ravel()[hop:hop + n]
    return out


# ---------------------------------------------------------------------------
# Mixing

def snr_scale(clean, noise, snr_db: float) -> float:
    """Gain g such that RMS(clean) / RMS(g * noise) equals ``snr_db``."""
    rms_c = float(np.sqrt(np.mean(np.square(clean))))
    rms_n = float(np.sqrt(np.mean(np.square(noise))))
    if rms_c == 0 or rms_n == 0:
        raise SceneError("mix_at_snr: clean and noise must be non-silent")
    return rms_c / (rms_n * 10 ** (snr_db / 20))


def mix_at_snr(clean, noise, snr_db: float) -> np.ndarray:
    clean = np.asarray(clean, dtype=float)
    noise = np.asarray(noise, dtype=float)
    return clean + snr_scale(clean, noise, snr_db) * noise


def _reverb_tail(n_ch, fs, rt60, rng) -> np.ndarray:
    # Direct path plus an exponentially decaying noise tail carrying a
    # quarter of the direct-path energy (DRR about 6 dB).
    n = int(rt60 * fs)
    onset = int(0.005 * fs)
    t = np.arange(n) / fs
    tail = rng.standard_normal((n_ch, n)) * np.exp(-6.9 * t / rt60)
    tail[:, :onset] = 0.0
    tail *= np.sqrt(0.25 / np.sum(tail ** 2, axis=1, keepdims=True))
    tail[:, 0] = 1.0
    return tail


# ---------------------------------------------------------------------------
# Scene

def _head_yaw(cfg: ScenarioConfig, times: np.ndarray) -> np.ndarray:
    if cfg.head_mode == "static_0deg":
        return np.zeros_like(times)
    from beamsteer.servo import simulate_servo

    run = simulate_servo(cfg, cfg.servo)
    return np.interp(times, run.times, run.head_yaw)


def _source_aois(cfg, source_pos, heads, yaws):
    return np.array([aoi_from_pose(yaw, head, source_pos) for head, yaw in zip(heads, yaws)])


def _delays_for(geom: ArrayGeometry, aois: np.ndarray, warnings: list, label: str):
    clamped = np.clip(aois, -90.0, 90.0)
    n_bad = int(np.sum(clamped != aois))
    if n_bad:
        warnings.append(f"{label}: AOI outside [-90, 90] deg in {n_bad} hops; "
                        "end-fire delay used")
    return np.array([delays_from_aoi(geom, a).samples for a in clamped])


def synthesize_scene(cfg: ScenarioConfig, head_yaw=None) -> Scene:
    """Render the speech and noise sources for ``cfg``.

    ``head_yaw`` optionally gives the head yaw (deg) at every 10 ms hop; by
    default it is 0 for a static head and the servo simulation otherwise.
    The whole scene is scaled down if its peak would exceed 0.9, so every
    component (mixture, speech and noise images) shares one linear gain.
    """
    geom = cfg.geometry
    fs = geom.sample_rate
    n = int(round(cfg.duration_s * fs))
    hop = int(round(HOP_S * fs))
    n_hops = int(np.ceil((n - 1) / hop)) + 1
    times = np.arange(n_hops) * hop / fs
    heads = base_positions(cfg, times)
    yaws = np.zeros(n_hops) if cfg.head_mode == "static_0deg" and head_yaw is None else (
        np.asarray(head_yaw, dtype=float) if head_yaw is not None else _head_yaw(cfg, times))
    if yaws.shape != times.shape:
        raise SceneError("head_yaw must give one value per 10 ms hop")

    seeds = np.random.SeedSequence(cfg.seed).spawn(len(cfg.noise) + 3)
    warnings: list[str] = []

    speech = load_source(cfg.speech.audio, n, fs, np.random.default_rng(seeds[0]),
                         cfg.utterance_gap_s)
    speech_aoi = _source_aois(cfg, cfg.speech.position, heads, yaws)
    speech_img = _render_moving(speech, _delays_for(geom, speech_aoi, warnings, "speech"), hop)

    noise_img = np.zeros_like(speech_img)
    ref = geom.reference_index
    for i, src in enumerate(cfg.noise):
        raw = load_source(src.audio, n, fs, np.random.default_rng(seeds[i + 1]), 0.0)
        aoi = _source_aois(cfg, src.position, heads, yaws)
        img = _render_moving(raw, _delays_for(geom, aoi, warnings, f"noise[{i}]"), hop)
        noise_img += snr_scale(speech_img[ref], img[ref], src.snr_db) * img

    if cfg.rt60_s > 0:
        from scipy.signal import fftconvolve

        rng = np.random.default_rng(seeds[-2])
        h_s = _reverb_tail(geom.n_mics, fs, cfg.rt60_s, rng)
        h_n = _reverb_tail(geom.n_mics, fs, cfg.rt60_s, rng)
        speech_img = fftconvolve(speech_img, h_s, axes=1)[:, :n]
        noise_img = fftconvolve(noise_img, h_n, axes=1)[:, :n]

    if cfg.ego_noise_snr_db is not None:
        rng = np.random.default_rng(seeds[-1])
        ego = np.stack([pink_noise(n, rng) for _ in range(geom.n_mics)])
        noise_img += snr_scale(speech_img[ref], ego[ref], cfg.ego_noise_snr_db) * ego

    mixture = speech_img + noise_img
    peak = float(np.max(np.abs(mixture)))
    gain = PEAK_LIMIT / peak if peak > PEAK_LIMIT else 1.0
    mixture *= gain
    speech_img *= gain
    noise_img *= gain

    metadata = {
        "preset": cfg.preset,
        "seed": cfg.seed,
        "head_mode": cfg.head_mode,
        "sample_rate": fs,
        "n_channels": geom.n_mics,
        "reference_index": ref,
        "limiter_gain": gain,
        "warnings": warnings,
    }
    return Scene(MultichannelSignal(fs, mixture), AoiTrack(times, speech_aoi),
                 speech_img, noise_img, yaws, metadata)
