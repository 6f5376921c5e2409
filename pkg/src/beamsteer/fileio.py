"""WAV, AOI-track CSV and JSON helpers.

WAV data is handled as ``(channels, samples)`` float64 arrays.  float32 is
the written format; PCM16/PCM32 and float inputs are accepted on read.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from scipy.io import wavfile


def read_wav(path) -> tuple[int, np.ndarray]:
    rate, data = wavfile.read(str(path))
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        data = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        data = (data.astype(np.float64) - 128.0) / 128.0
    else:
        data = data.astype(np.float64)
    data = data[None, :] if data.ndim == 1 else data.T
    return int(rate), np.ascontiguousarray(data)


def write_wav(path, rate, data) -> None:
    data = np.asarray(data, dtype=np.float32)
    data = data if data.ndim == 1 else data.T
    wavfile.write(str(path), int(rate), np.ascontiguousarray(data))


def write_aoi_csv(path, times, angles) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("time_s,aoi_deg\n")
        for t, a in zip(times, angles):
            fh.write(f"{t:.6f},{a:.6f}\n")


def read_aoi_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["time_s", "aoi_deg"]:
            raise ValueError(f"{path}: expected header 'time_s,aoi_deg'")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    if not rows:
        return np.zeros(0), np.zeros(0)
    arr = np.asarray(rows)
    return arr[:, 0], arr[:, 1]


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
