"""Source audio for scene synthesis.

No speech corpus ships with the package, so the default speech source is a
crude articulatory stand-in: syllables of formant-filtered glottal pulses or
fricative noise, grouped into utterances separated by silence.  It is
broadband, non-stationary and has pauses, which is what the beamformer and
the Wiener prefilter need to be exercised.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy import signal

from beamsteer import fileio

SYNTHETIC_KINDS = ("speech", "babble", "pink", "white")


def _resonator(freq, bw, fs):
    r = math.exp(-math.pi * bw / fs)
    theta = 2 * math.pi * freq / fs
    a = [1.0, -2 * r * math.cos(theta), r * r]
    b = [1.0 - r]
    return b, a


def _syllable(n, fs, rng):
    t = np.arange(n) / fs
    if rng.random() < 0.8:
        f0 = rng.uniform(95, 220) * (1 + 0.08 * np.sin(2 * np.pi * rng.uniform(1, 4) * t))
        phase = np.cumsum(f0 / fs)
        pulses = np.diff(np.floor(phase), prepend=0.0)
        excitation = signal.lfilter([1.0], [1.0, -0.9], pulses)
        excitation += 0.02 * rng.standard_normal(n)
        out = np.zeros(n)
        formants = (rng.uniform(300, 850), rng.uniform(900, 2300), rng.uniform(2400, 3200))
        for k, f in enumerate(formants):
            b, a = _resonator(f, 60 + 40 * k, fs)
            out += signal.lfilter(b, a, excitation) * (1.0, 0.6, 0.3)[k]
        out = np.diff(out, prepend=0.0)  # lip radiation
    else:
        lo = rng.uniform(1800, 3500)
        hi = min(lo + rng.uniform(1500, 3500), 0.45 * fs)
        sos = signal.butter(4, [lo, hi], btype="bandpass", fs=fs, output="sos")
        out = signal.sosfilt(sos, rng.standard_normal(n)) * 0.4
    ramp = min(n // 4, int(0.03 * fs))
    env = np.ones(n)
    if ramp > 0:
        fade = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        env[:ramp] = fade
        env[n - ramp:] = fade[::-1]
    return out * env


def synth_speech(n_samples: int, fs: float, rng: np.random.Generator,
                 utterance_gap_s: float = 1.0, lead_s: float = 0.3) -> np.ndarray:
    """Speech-like signal of ``n_samples``, peak-normalized to 0.5."""
    out = np.zeros(n_samples)
    pos = int(lead_s * fs)
    while pos < n_samples:
        utt_end = pos + int(rng.uniform(1.5, 3.5) * fs)
        while pos < min(utt_end, n_samples):
            n = int(rng.uniform(0.12, 0.25) * fs)
            seg = _syllable(n, fs, rng) * rng.uniform(0.4, 1.0)
            stop = min(pos + n, n_samples)
            out[pos:stop] += seg[:stop - pos]
            pos += n + int(rng.uniform(0.02, 0.08) * fs)
        pos = max(pos, utt_end) + int(utterance_gap_s * fs)
    peak = np.max(np.abs(out))
    return out * (0.5 / peak) if peak > 0 else out


def pink_noise(n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-RMS noise with a 1/f power spectrum."""
    spec = np.fft.rfft(rng.standard_normal(n_samples))
    f = np.arange(len(spec), dtype=float)
    f[0] = 1.0
    x = np.fft.irfft(spec / np.sqrt(f), n_samples)
    return x / np.sqrt(np.mean(x ** 2))


def synth_babble(n_samples: int, fs: float, rng: np.random.Generator,
                 talkers: int = 6) -> np.ndarray:
    """Restaurant-like noise: overlapping talkers on a pink floor, peak 0.5."""
    out = 0.05 * pink_noise(n_samples, rng)
    for _ in range(talkers):
        out += synth_speech(n_samples, fs, rng, utterance_gap_s=rng.uniform(0.1, 0.6),
                            lead_s=rng.uniform(0.0, 1.0))
    return out * (0.5 / np.max(np.abs(out)))


def load_source(ref: str, n_samples: int, fs: float, rng: np.random.Generator,
                utterance_gap_s: float = 1.0) -> np.ndarray:
    """Resolve an audio reference to exactly ``n_samples`` samples at ``fs``.

    WAV files are looped with ``utterance_gap_s`` of silence between
    repetitions.  Sample-rate mismatches raise ``ValueError``.
    """
    if ref.startswith("synthetic:"):
        kind = ref.split(":", 1)[1]
        if kind == "speech":
            return synth_speech(n_samples, fs, rng, utterance_gap_s)
        if kind == "babble":
            return synth_babble(n_samples, fs, rng)
        if kind == "pink":
            return 0.1 * pink_noise(n_samples, rng)
        if kind == "white":
            return 0.1 * rng.standard_normal(n_samples)
        raise ValueError(f"unknown synthetic source {kind!r}; choose from {SYNTHETIC_KINDS}")
    rate, data = fileio.read_wav(Path(ref))
    if rate != fs:
        raise ValueError(f"{ref}: sample rate {rate} does not match geometry rate {fs}")
    mono = data[0] if data.shape[0] == 1 else data.mean(axis=0)
    if not np.any(mono):
        raise ValueError(f"{ref}: silent source audio")
    period = np.concatenate([mono, np.zeros(int(utterance_gap_s * fs))])
    reps = int(np.ceil(n_samples / len(period)))
    return np.tile(period, reps)[:n_samples]
