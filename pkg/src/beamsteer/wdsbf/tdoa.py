"""Reference-channel selection and N-best GCC-PHAT TDOA candidates.

Lag convention: a positive lag means the channel lags the reference, i.e.
``x_n(k) ~ x_ref(k - lag)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PHAT_FLOOR = 1e-12


@dataclass
class TdoaCandidateSet:
    """N-best candidates per channel and frame.

    ``candidates[channel][frame]`` is a list of ``(lag, score)`` sorted by
    descending score; the reference channel's lists are empty.
    """

    times: np.ndarray
    reference: int
    max_lag: int
    candidates: list


def _nfft(n: int) -> int:
    return 1 << int(np.ceil(np.log2(max(2 * n, 2))))


def gcc_phat(frame_ref, frame_n, max_lag: int) -> np.ndarray:
    """PHAT-weighted cross-correlation for lags ``-max_lag..max_lag``.

    Works on the last axis, so stacks of frames are accepted.
    """
    frame_ref = np.asarray(frame_ref, dtype=float)
    frame_n = np.asarray(frame_n, dtype=float)
    nfft = _nfft(frame_ref.shape[-1])
    cross = np.fft.rfft(frame_n, nfft) * np.conj(np.fft.rfft(frame_ref, nfft))
    cross /= np.maximum(np.abs(cross), PHAT_FLOOR)
    cc = np.fft.irfft(cross, nfft)
    return cc[..., np.arange(-max_lag, max_lag + 1) % nfft]


def _local_peaks(values: np.ndarray, lags: np.ndarray, n: int) -> list[tuple[int, float]]:
    padded = np.concatenate([[-np.inf], values, [-np.inf]])
    mid = padded[1:-1]
    is_peak = (mid > padded[:-2]) & (mid >= padded[2:])
    idx = np.flatnonzero(is_peak)
    order = idx[np.argsort(-values[idx], kind="stable")][:n]
    return [(int(lags[i]), float(values[i])) for i in order]


def gcc_phat_candidates(frame_ref, frame_n, n_candidates: int, max_lag: int) -> list[tuple[int, float]]:
    """The ``n_candidates`` highest local maxima of GCC-PHAT within +-max_lag.

    Returns fewer candidates when there are fewer local maxima, and none
    when either frame has zero energy.
    """
    if n_candidates < 1:
        raise ValueError("n_candidates must be >= 1")
    frame_ref = np.asarray(frame_ref, dtype=float)
    frame_n = np.asarray(frame_n, dtype=float)
    if frame_ref.shape != frame_n.shape:
        raise ValueError("frames must have equal length")
    if not (np.any(frame_ref) and np.any(frame_n)):
        return []
    cc = gcc_phat(frame_ref, frame_n, max_lag)
    return _local_peaks(cc, np.arange(-max_lag, max_lag + 1), n_candidates)


def frame_stack(x: np.ndarray, centers: np.ndarray, half: int, taper: bool = False) -> np.ndarray:
    """Frames ``x[c - half : c + half]`` for every center, zero-padded at the edges.

    ``taper`` applies a Hann window; without it the frame edges act as a
    zero-lag feature shared by all channels, which PHAT weighting amplifies
    wherever the signal itself is weak.
    """
    xp = np.concatenate([np.zeros(half), np.asarray(x, dtype=float), np.zeros(half)])
    frames = xp[centers[:, None] + np.arange(2 * half)]
    if taper:
        frames *= np.hanning(2 * half + 2)[1:-1]
    return frames


def candidate_set(frames: np.ndarray, times, reference: int, n_candidates: int,
                  max_lag: int) -> TdoaCandidateSet:
    """Candidates for every non-reference channel of ``frames`` (channels, F, W)."""
    n_ch, n_frames, _ = frames.shape
    ref = frames[reference]
    ref_live = np.any(ref, axis=1)
    lags = np.arange(-max_lag, max_lag + 1)
    cands = []
    for ch in range(n_ch):
        if ch == reference:
            cands.append([[] for _ in range(n_frames)])
            continue
        cc = gcc_phat(ref, frames[ch], max_lag)
        live = ref_live & np.any(frames[ch], axis=1)
        cands.append([_local_peaks(cc[f], lags, n_candidates) if live[f] else []
                      for f in range(n_frames)])
    return TdoaCandidateSet(np.asarray(times, dtype=float), reference, max_lag, cands)


def _max_norm_xcorr(a: np.ndarray, b: np.ndarray, max_lag: int) -> float:
    nfft = _nfft(len(a))
    cc = np.fft.irfft(np.fft.rfft(b, nfft) * np.conj(np.fft.rfft(a, nfft)), nfft)
    cc = cc[np.arange(-max_lag, max_lag + 1) % nfft]
    return float(np.max(cc) / np.sqrt(np.dot(a, a) * np.dot(b, b)))


def reference_channel(data: np.ndarray, window: int, max_lag: int, max_windows: int = 200) -> int:
    """Channel with the highest mean peak normalized cross-correlation to the others.

    ``data`` is ``(channels, samples)``.  Up to ``max_windows`` evenly spaced
    windows of ``window`` samples are used; windows where any channel is
    silent are skipped.  Ties go to the lowest index.
    """
    data = np.asarray(data, dtype=float)
    n_ch, n = data.shape
    if n_ch < 2:
        raise ValueError("reference selection needs at least 2 channels")
    window = min(window, n)
    n_win = n // window
    starts = np.arange(n_win) * window
    if n_win > max_windows:
        starts = starts[np.linspace(0, n_win - 1, max_windows).round().astype(int)]
    totals = np.zeros(n_ch)
    used = 0
    for s in starts:
        seg = data[:, s:s + window]
        if not np.all(np.any(seg, axis=1)):
            continue
        used += 1
        for i in range(n_ch):
            for j in range(i + 1, n_ch):
                v = _max_norm_xcorr(seg[i], seg[j], max_lag)
                totals[i] += v
                totals[j] += v
    if used == 0:
        return 0
    score = totals / (used * (n_ch - 1))
    best = np.max(score)
    return int(np.flatnonzero(score >= best - 1e-9 * max(1.0, abs(best)))[0])
