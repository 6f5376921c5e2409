"""Signal-level evaluation: SNR gain, SI-SDR, alignment and beam patterns."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from beamsteer.geometry import ArrayGeometry, DelayVector

DB_CAP = 100.0


class MetricError(ValueError):
    pass


def _capped_db(num: float, den: float) -> float:
    if den <= 0:
        return DB_CAP
    if num <= 0:
        return -DB_CAP
    return float(min(10 * np.log10(num / den), DB_CAP))


def si_sdr(estimate, reference) -> float:
    """Scale-invariant SDR in dB, capped at +100."""
    est = np.asarray(estimate, dtype=float)
    ref = np.asarray(reference, dtype=float)
    if est.shape != ref.shape:
        raise MetricError("si_sdr: estimate and reference differ in length")
    energy = float(np.dot(ref, ref))
    if energy == 0:
        raise MetricError("si_sdr: silent reference")
    target = (np.dot(est, ref) / energy) * ref
    residual = est - target
    return _capped_db(float(np.dot(target, target)), float(np.dot(residual, residual)))


def snr_db(signal, clean) -> float:
    """SNR of ``signal`` with the least-squares-scaled clean part as signal."""
    return si_sdr(signal, clean)


def snr_gain(clean_ref, noisy_in_best_channel, enhanced_out) -> float:
    """SNR(enhanced) - SNR(best input channel), both against ``clean_ref``."""
    return snr_db(enhanced_out, clean_ref) - snr_db(noisy_in_best_channel, clean_ref)


def align_to_reference(x, reference, max_lag: int) -> tuple[np.ndarray, int]:
    """Shift ``x`` by the integer lag (|lag| <= max_lag) maximizing its
    cross-correlation with ``reference``; returns ``(shifted, lag)`` where a
    positive lag means ``x`` was late and has been advanced."""
    x = np.asarray(x, dtype=float)
    ref = np.asarray(reference, dtype=float)
    n = len(x)
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    cc = np.fft.irfft(np.fft.rfft(x, nfft) * np.conj(np.fft.rfft(ref, nfft)), nfft)
    lags = np.arange(-max_lag, max_lag + 1)
    lag = int(lags[np.argmax(cc[lags % nfft])])
    out = np.zeros_like(x)
    if lag >= 0:
        out[:n - lag] = x[lag:]
    else:
        out[-lag:] = x[:n + lag]
    return out, lag


def best_channel(channels, clean) -> int:
    """Index of the input channel with the highest SNR against ``clean``."""
    return int(np.argmax([snr_db(ch, clean) for ch in np.atleast_2d(channels)]))


def beam_pattern(geom: ArrayGeometry, steering: DelayVector, weights, freq_hz: float,
                 angle_grid_deg) -> np.ndarray:
    """Array response in dB, relative to the coherent (steered) response.

    The response for a plane wave from angle ``phi`` is
    ``|sum_n w_n exp(j 2 pi f (delta_n sin(phi) / c - tau_n))|``.
    """
    if not 0 < freq_hz < geom.sample_rate / 2:
        raise MetricError("beam_pattern: frequency must be in (0, fs/2)")
    w = np.asarray(weights, dtype=float)
    phi = np.radians(np.asarray(angle_grid_deg, dtype=float))
    arrival = geom.offsets[None, :] * np.sin(phi)[:, None] / geom.sound_speed
    phase = 2j * np.pi * freq_hz * (arrival - np.asarray(steering.seconds)[None, :])
    resp = np.abs(np.exp(phase) @ w) / np.abs(np.sum(w))
    return 20 * np.log10(np.maximum(resp, 1e-12))


@dataclass
class EvalRow:
    preset: str | None
    mode: str | None
    snr_gain_db: float
    si_sdr_db: float
    si_sdr_input_db: float
    mean_abs_aoi_deg: float | None = None
    alignment_lag: int = 0
    wer: float | None = None


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    seed: int | None = None

    def add(self, row: EvalRow) -> None:
        """Insert ``row``, replacing any row with the same (preset, mode)."""
        for v in (row.snr_gain_db, row.si_sdr_db, row.si_sdr_input_db):
            if not np.isfinite(v):
                raise MetricError("EvalReport: non-finite metric")
        self.rows = [r for r in self.rows if (r.preset, r.mode) != (row.preset, row.mode)]
        self.rows.append(row)

    def to_dict(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows], "config": self.config, "seed": self.seed}

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        return cls([EvalRow(**r) for r in data.get("rows", [])], data.get("config", {}),
                   data.get("seed"))

    def write(self, json_path) -> Path:
        """Write JSON to ``json_path`` and a flat CSV next to it; returns the CSV path."""
        json_path = Path(json_path)
        json_path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        csv_path = json_path.with_suffix(".csv")
        names = list(EvalRow.__dataclass_fields__)
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(names)
            for r in self.rows:
                writer.writerow(["" if getattr(r, k) is None else getattr(r, k) for k in names])
        return csv_path


def evaluate(clean, inputs, enhanced, max_lag: int, preset=None, mode=None,
             mean_abs_aoi=None) -> EvalRow:
    """Align, pick the best input channel and compute the report metrics."""
    clean = np.asarray(clean, dtype=float)
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    enhanced = np.asarray(enhanced, dtype=float)
    if not np.any(clean):
        raise MetricError("evaluate: silent clean reference")
    n = min(len(clean), inputs.shape[1], len(enhanced))
    clean, inputs, enhanced = clean[:n], inputs[:, :n], enhanced[:n]
    aligned_in = np.stack([align_to_reference(ch, clean, max_lag)[0] for ch in inputs])
    aligned_out, lag = align_to_reference(enhanced, clean, max_lag)
    best = best_channel(aligned_in, clean)
    return EvalRow(
        preset=preset,
        mode=mode,
        snr_gain_db=snr_gain(clean, aligned_in[best], aligned_out),
        si_sdr_db=si_sdr(aligned_out, clean),
        si_sdr_input_db=si_sdr(aligned_in[best], clean),
        mean_abs_aoi_deg=mean_abs_aoi,
        alignment_lag=lag,
    )
