"""Weighted delay-and-sum pipeline and its AOI-steered variants.

Modes:

``wds``
    Wiener prefilter, reference selection, GCC-PHAT N-best candidates,
    noise thresholding + Viterbi, adaptive channel weights, summation.
``wds-aoi``
    As ``wds`` but the delays come from an AOI track.
``ds-aoi``
    Classical delay-and-sum: uniform weights, channel 0 as reference,
    AOI delays, short windows, no prefilter.

All stages share one frame grid: frame ``f`` is centred on sample
``f * hop`` and spans one analysis window (``2 * hop`` samples).  Frames are
joined by 50% overlap-add with triangular windows, which is a linear
interpolation between neighbouring frames' beamformers.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field

import numpy as np

from beamsteer.geometry import ArrayGeometry, default_geometry, delays_from_aoi
from beamsteer.scenesim import AoiTrack, MultichannelSignal
from beamsteer.wdsbf.tdoa import TdoaCandidateSet, candidate_set, frame_stack, reference_channel
from beamsteer.wdsbf.viterbi import DelayTrack, viterbi_delay_selection
from beamsteer.wdsbf.wiener import wiener_prefilter

MODES = ("wds", "wds-aoi", "ds-aoi")
DEFAULT_WINDOW_S = {"wds": 0.5, "wds-aoi": 0.5, "ds-aoi": 0.05}
OUTPUT_PEAK_DBFS = -3.0


class UsageError(ValueError):
    """Inconsistent mode / input combination."""


@dataclass(frozen=True)
class BeamformerConfig:
    """Pipeline settings.  ``None`` means the mode-dependent default."""

    mode: str = "wds"
    window_s: float | None = None
    n_candidates: int = 4
    noise_threshold_factor: float = 0.3
    viterbi_transition_weight: float = 1.0
    weight_adapt_rate: float = 0.05
    channel_elim_threshold: float | None = None
    wiener_enabled: bool | None = None
    max_lag_slack: int = 2
    use_viterbi: bool = True
    normalize_output: bool | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise UsageError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.window_s is not None and not self.window_s > 0:
            raise ValueError("window_s must be > 0")
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be >= 1")
        if not 0 < self.weight_adapt_rate <= 1:
            raise ValueError("weight_adapt_rate must be in (0, 1]")
        if self.viterbi_transition_weight < 0:
            raise ValueError("viterbi_transition_weight must be >= 0")

    @property
    def window(self) -> float:
        return DEFAULT_WINDOW_S[self.mode] if self.window_s is None else self.window_s

    @property
    def hop_s(self) -> float:
        return self.window / 2

    @property
    def wiener(self) -> bool:
        return self.mode != "ds-aoi" if self.wiener_enabled is None else self.wiener_enabled

    @property
    def normalize(self) -> bool:
        return self.mode != "ds-aoi" if self.normalize_output is None else self.normalize_output

    def elim_threshold(self, n_channels: int) -> float:
        if self.channel_elim_threshold is not None:
            return self.channel_elim_threshold
        return 1.0 / (3 * n_channels)


@dataclass
class Diagnostics:
    mode: str
    reference: int
    delay_track: DelayTrack
    weights: np.ndarray
    eliminated: list
    timing: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self, include_timing: bool = True) -> dict:
        out = {
            "mode": self.mode,
            "reference": self.reference,
            "frame_times": [round(float(t), 6) for t in self.delay_track.times],
            "delays": self.delay_track.delays.tolist(),
            "weights": np.round(self.weights, 8).tolist(),
            "eliminated": self.eliminated,
            "flags": self.delay_track.flags,
            "config": self.config,
        }
        if include_timing:
            out["timing"] = self.timing
        return out


def frame_grid(n_samples: int, fs: float, window_s: float) -> tuple[np.ndarray, int]:
    """Frame centres (samples) and hop for an analysis window of ``window_s``."""
    hop = max(1, int(round(window_s * fs / 2)))
    n_frames = int(math.ceil(max(n_samples - 1, 0) / hop)) + 1
    return np.arange(n_frames) * hop, hop


# ---------------------------------------------------------------------------
# Delays from an AOI track

def aoi_to_delay_track(track: AoiTrack, geom: ArrayGeometry, frame_times,
                       reference: int | None = None) -> DelayTrack:
    """Sample-and-hold the latest AOI at each frame time, map it to delays.

    Delays are taken relative to ``reference`` (default: the geometry's
    reference mic) and rounded half-up to whole samples.  Frame times before
    the first track sample use the first sample.
    """
    if len(track) == 0:
        raise ValueError("aoi_to_delay_track: empty AOI track")
    frame_times = np.asarray(frame_times, dtype=float)
    ref = geom.reference_index if reference is None else reference
    idx = np.searchsorted(track.times, frame_times + 1e-9, side="right") - 1
    idx = np.clip(idx, 0, len(track) - 1)
    angles = np.clip(track.aoi_deg[idx], -90.0, 90.0)
    cache: dict[float, np.ndarray] = {}
    delays = np.zeros((len(frame_times), geom.n_mics), dtype=int)
    for f, a in enumerate(angles):
        if a not in cache:
            tau = delays_from_aoi(geom, a).samples
            cache[a] = np.floor(tau - tau[ref] + 0.5).astype(int)
        delays[f] = cache[a]
    return DelayTrack(frame_times, delays, ref)


# ---------------------------------------------------------------------------
# Channel weights

def adapt_channel_weights(prev, frame_xcorr, rate: float, elim_threshold: float) -> tuple[np.ndarray, list[int]]:
    """One weight update; returns ``(weights, eliminated_channels)``.

    ``prev=None`` marks the first frame, which gets uniform weights.
    """
    xcorr = np.asarray(frame_xcorr, dtype=float)
    n = xcorr.size
    if prev is None:
        return np.full(n, 1.0 / n), []
    w = (1 - rate) * np.asarray(prev, dtype=float) + rate * np.maximum(xcorr, 0.0)
    dead = xcorr < elim_threshold
    w[dead] = 0.0
    total = w.sum()
    if dead.all() or total <= 0:
        return np.full(n, 1.0 / n), [int(i) for i in np.flatnonzero(dead)]
    return w / total, [int(i) for i in np.flatnonzero(dead)]


def _aligned_frames(data: np.ndarray, center: int, half: int, delays: np.ndarray) -> np.ndarray:
    n_ch, n = data.shape
    idx = np.arange(center - half, center + half)
    out = np.zeros((n_ch, 2 * half))
    for ch in range(n_ch):
        src = idx + delays[ch]
        ok = (src >= 0) & (src < n)
        out[ch, ok] = data[ch, src[ok]]
    return out


def frame_xcorr(aligned: np.ndarray) -> np.ndarray:
    """Mean zero-lag normalized correlation of each channel with the others."""
    norms = np.sqrt(np.sum(aligned ** 2, axis=1))
    safe = np.where(norms > 0, norms, 1.0)
    unit = aligned / safe[:, None]
    corr = unit @ unit.T
    corr[norms == 0, :] = 0.0
    corr[:, norms == 0] = 0.0
    n = aligned.shape[0]
    return (corr.sum(axis=1) - np.diag(corr)) / (n - 1)


# ---------------------------------------------------------------------------
# Summation

def beamform_sum(data, delays: np.ndarray, weights: np.ndarray, hop: int) -> np.ndarray:
    """``y(k) = sum_n w_n x_n(k + d_n)`` per frame, joined by triangular OLA.

    ``data`` is ``(channels, samples)``; ``delays`` (int) and ``weights`` are
    ``(frames, channels)`` on the grid with frame ``f`` centred at ``f * hop``.
    Samples shifted in from outside the signal are zero.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    delays = np.asarray(delays, dtype=int)
    weights = np.asarray(weights, dtype=float)
    n_ch, n = data.shape
    n_frames = delays.shape[0]
    if delays.shape != (n_frames, n_ch) or weights.shape != (n_frames, n_ch):
        raise ValueError("delays/weights must be (frames, channels)")
    if (n_frames - 1) * hop < n - 1:
        raise ValueError("frame grid does not cover the signal")
    tri = 1.0 - np.abs(np.arange(2 * hop) - hop) / hop
    base = np.arange(n_frames)[:, None] * hop - hop + np.arange(2 * hop)[None, :]
    acc = np.zeros((n_frames, 2 * hop))
    pad = int(np.max(np.abs(delays))) + 2 * hop if delays.size else 2 * hop
    for ch in range(n_ch):
        xp = np.concatenate([np.zeros(pad), data[ch], np.zeros(pad + n_frames * hop)])
        acc += weights[:, ch:ch + 1] * xp[pad + base + delays[:, ch:ch + 1]]
    acc *= tri
    blocks = np.zeros((n_frames + 1, hop))
    blocks[:-1] += acc[:, :hop]
    blocks[1:] += acc[:, hop:]
    return blocks.ravel()[hop:hop + n]


# ---------------------------------------------------------------------------
# Pipeline

def max_lag_for(geom: ArrayGeometry, reference: int, slack: int) -> int:
    return int(math.ceil(geom.max_delay_samples(reference))) + slack


def select_reference(mc: MultichannelSignal, cfg: BeamformerConfig,
                     geometry: ArrayGeometry | None = None) -> int:
    geom = geometry or default_geometry(mc.sample_rate)
    window = max(2, int(round(cfg.window * mc.sample_rate)))
    max_lag = int(math.ceil(geom.length / geom.sound_speed * geom.sample_rate)) + cfg.max_lag_slack
    return reference_channel(mc.data, window, max_lag)


def steering_candidates(data: np.ndarray, centers: np.ndarray, hop: int, fs: float,
                        reference: int, cfg: BeamformerConfig,
                        geometry: ArrayGeometry) -> TdoaCandidateSet:
    """GCC-PHAT N-best candidates on Hann-tapered frames of the frame grid."""
    max_lag = max_lag_for(geometry, reference, cfg.max_lag_slack)
    frames = np.stack([frame_stack(ch, centers, hop, taper=True) for ch in data])
    return candidate_set(frames, centers / fs, reference, cfg.n_candidates, max_lag)


def run_pipeline(mc: MultichannelSignal, cfg: BeamformerConfig, aoi: AoiTrack | None = None,
                 geometry: ArrayGeometry | None = None) -> tuple[np.ndarray, Diagnostics]:
    """Beamform ``mc`` to a mono signal; returns ``(output, diagnostics)``."""
    if cfg.mode == "wds" and aoi is not None:
        raise UsageError("mode wds estimates delays itself; do not pass an AOI track")
    if cfg.mode != "wds" and aoi is None:
        raise UsageError(f"mode {cfg.mode} requires an AOI track")
    geom = geometry or default_geometry(mc.sample_rate)
    if geom.n_mics != mc.n_channels:
        raise ValueError(f"geometry has {geom.n_mics} mics but signal has {mc.n_channels} channels")
    if geom.sample_rate != mc.sample_rate:
        raise ValueError(f"geometry rate {geom.sample_rate} != signal rate {mc.sample_rate}")

    timing: dict[str, float] = {}
    clock = time.perf_counter()

    def lap(name):
        nonlocal clock
        now = time.perf_counter()
        timing[name] = round(now - clock, 6)
        clock = now

    fs = mc.sample_rate
    n_ch, n = mc.data.shape
    centers, hop = frame_grid(n, fs, cfg.window)
    times = centers / fs

    data = mc.data
    if cfg.wiener:
        data = np.stack([wiener_prefilter(ch, fs) for ch in data])
        lap("wiener")

    if cfg.mode == "ds-aoi":
        reference = 0
    else:
        reference = select_reference(MultichannelSignal(fs, data), cfg, geom)
        lap("reference")

    if cfg.mode == "wds":
        cands = steering_candidates(data, centers, hop, fs, reference, cfg, geom)
        lap("gcc_phat")
        track = viterbi_delay_selection(cands, cfg.viterbi_transition_weight,
                                        cfg.noise_threshold_factor, cfg.use_viterbi)
        lap("viterbi")
    else:
        track = aoi_to_delay_track(aoi, geom, times, reference)
        lap("aoi_delays")

    eliminated: list[list[int]] = []
    if cfg.mode == "ds-aoi":
        weights = np.full((len(centers), n_ch), 1.0 / n_ch)
        eliminated = [[] for _ in centers]
    else:
        weights = np.empty((len(centers), n_ch))
        prev = None
        thr = cfg.elim_threshold(n_ch)
        for f, c in enumerate(centers):
            xc = frame_xcorr(_aligned_frames(data, int(c), hop, track.delays[f]))
            prev, dead = adapt_channel_weights(prev, xc, cfg.weight_adapt_rate, thr)
            weights[f] = prev
            eliminated.append(dead)
        lap("weights")

    out = beamform_sum(data, track.delays, weights, hop)
    if cfg.normalize:
        peak = np.max(np.abs(out))
        if peak > 0:
            out = out * (10 ** (OUTPUT_PEAK_DBFS / 20) / peak)
    lap("sum")

    echo = dataclasses.asdict(cfg)
    echo.update(window_s=cfg.window, hop_s=cfg.hop_s, wiener_enabled=cfg.wiener,
                normalize_output=cfg.normalize,
                channel_elim_threshold=cfg.elim_threshold(n_ch))
    diag = Diagnostics(cfg.mode, reference, track, weights, eliminated, timing, echo)
    return out, diag
