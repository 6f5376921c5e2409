"""Noise thresholding and Viterbi selection of per-channel delay paths."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from beamsteer.wdsbf.tdoa import TdoaCandidateSet


@dataclass
class DelayTrack:
    """Integer delay (samples) per frame and channel; a positive value
    means the channel lags the reference and is advanced when summed."""

    times: np.ndarray
    delays: np.ndarray
    reference: int
    flags: dict = field(default_factory=dict)

    @property
    def n_frames(self) -> int:
        return self.delays.shape[0]


def hold_mask(frame_cands: list, threshold_factor: float) -> np.ndarray:
    """True where a frame is empty or its best score falls below
    ``threshold_factor`` times the running median of best scores so far."""
    hold = np.ones(len(frame_cands), dtype=bool)
    seen: list[float] = []
    for t, cands in enumerate(frame_cands):
        if not cands:
            continue
        best = cands[0][1]
        bisect.insort(seen, best)
        m = len(seen)
        median = seen[m // 2] if m % 2 else 0.5 * (seen[m // 2 - 1] + seen[m // 2])
        hold[t] = best < threshold_factor * median
    return hold


def best_path(frame_cands: list, alpha: float, max_lag: int) -> tuple[list[int], float]:
    """Max-score path through consecutive candidate lists (no holds).

    Node score is the candidate score; moving from lag ``a`` to lag ``b``
    costs ``alpha * |a - b| / max_lag``.  Returns the lags and total score.
    """
    scale = alpha / max(max_lag, 1)
    lags = np.array([c[0] for c in frame_cands[0]], dtype=float)
    score = np.array([c[1] for c in frame_cands[0]], dtype=float)
    back = []
    for cands in frame_cands[1:]:
        new_lags = np.array([c[0] for c in cands], dtype=float)
        node = np.array([c[1] for c in cands], dtype=float)
        total = score[None, :] - scale * np.abs(new_lags[:, None] - lags[None, :])
        arg = np.argmax(total, axis=1)
        score = total[np.arange(len(cands)), arg] + node
        back.append(arg)
        lags = new_lags
    idx = int(np.argmax(score))
    best = float(score[idx])
    path = [idx]
    for arg in reversed(back):
        idx = int(arg[idx])
        path.append(idx)
    path.reverse()
    return [frame_cands[t][i][0] for t, i in enumerate(path)], best


def select_channel_delays(frame_cands: list, alpha: float, max_lag: int,
                          threshold_factor: float, use_viterbi: bool = True) -> tuple[np.ndarray, bool]:
    """Delay per frame for one channel; returns ``(delays, all_held)``.

    Held frames repeat the previous decided delay; leading held frames take
    the first decided delay.  With ``use_viterbi=False`` every decided frame
    keeps its top candidate.
    """
    n = len(frame_cands)
    hold = hold_mask(frame_cands, threshold_factor)
    decided = np.flatnonzero(~hold)
    out = np.zeros(n, dtype=int)
    if decided.size == 0:
        return out, True
    kept = [frame_cands[t] for t in decided]
    if use_viterbi:
        lags, _ = best_path(kept, alpha, max_lag)
    else:
        lags = [c[0][0] for c in kept]
    current = lags[0]
    j = 0
    for t in range(n):
        if j < decided.size and decided[j] == t:
            current = lags[j]
            j += 1
        out[t] = current
    return out, False


def viterbi_delay_selection(cands: TdoaCandidateSet, alpha: float = 1.0,
                            threshold_factor: float = 0.3, use_viterbi: bool = True) -> DelayTrack:
    n_ch = len(cands.candidates)
    n_frames = len(cands.times)
    delays = np.zeros((n_frames, n_ch), dtype=int)
    empty_channels = []
    for ch in range(n_ch):
        if ch == cands.reference:
            continue
        delays[:, ch], all_held = select_channel_delays(
            cands.candidates[ch], alpha, cands.max_lag, threshold_factor, use_viterbi)
        if all_held:
            empty_channels.append(ch)
    flags = {"no_candidates": empty_channels} if empty_channels else {}
    return DelayTrack(cands.times, delays, cands.reference, flags)
