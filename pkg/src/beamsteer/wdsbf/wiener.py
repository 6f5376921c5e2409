"""Single-channel STFT Wiener prefilter."""

from __future__ import annotations

import numpy as np
from scipy import signal


def _nperseg(fs: float) -> int:
    return int(2 ** round(np.log2(0.032 * fs)))


def wiener_prefilter(x, fs: float, smoothing: float = 0.98, gain_floor: float = 0.1,
                     noise_quantile: float = 0.1) -> np.ndarray:
    """Decision-directed Wiener filtering of one channel.

    The noise PSD is the mean periodogram of the lowest-energy
    ``noise_quantile`` of STFT frames.  Gain is ``xi / (1 + xi)`` floored at
    ``gain_floor``.  All-zero input comes back unchanged.
    """
    x = np.asarray(x, dtype=float)
    if not np.any(x):
        return x.copy()
    nper = min(_nperseg(fs), len(x))
    _, _, spec = signal.stft(x, fs=fs, window="hann", nperseg=nper, noverlap=nper // 2)
    power = np.abs(spec) ** 2  # (bins, frames)
    energy = power.sum(axis=0)
    n_noise = max(1, int(np.floor(noise_quantile * power.shape[1])))
    quiet = np.argsort(energy, kind="stable")[:n_noise]
    noise_psd = power[:, quiet].mean(axis=1)
    noise_psd = np.maximum(noise_psd, 1e-12 * max(power.mean(), 1e-30))

    gamma = power / noise_psd[:, None]
    gains = np.empty_like(gamma)
    prev_clean = None
    for t in range(gamma.shape[1]):
        ml = np.maximum(gamma[:, t] - 1.0, 0.0)
        if prev_clean is None:
            xi = ml
        else:
            xi = smoothing * prev_clean / noise_psd + (1 - smoothing) * ml
        g = np.maximum(xi / (1.0 + xi), gain_floor)
        gains[:, t] = g
        prev_clean = g ** 2 * power[:, t]
    _, y = signal.istft(spec * gains, fs=fs, window="hann", nperseg=nper, noverlap=nper // 2)
    out = np.zeros_like(x)
    m = min(len(x), len(y))
    out[:m] = y[:m]
    return out
