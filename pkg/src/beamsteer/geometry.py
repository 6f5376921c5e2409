"""Linear array geometry and the angle-of-incidence to delay mapping.

Angle conventions
-----------------
Angles are degrees at every public interface and radians internally.
Bearings and head yaw use the compass convention in the x/y plane: 0 deg
points along +y and angles grow clockwise (towards +x).  The angle of
incidence (AOI) is the signed angle from the main response axis (MRA) to
the direction of the source, with the same clockwise-positive sign, so a
head yawed by ``phi`` sees every AOI shifted by ``-phi``.

The array axis points 90 deg counter-clockwise from the MRA.  Microphones
with a positive offset therefore sit on the far side from a source with
positive AOI and receive the wavefront later, which is what makes
``tau_n = delta_n * sin(aoi) / c`` a positive delay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_SOUND_SPEED = 343.0
DEFAULT_SAMPLE_RATE = 16000

# Stand-in for the Kinect v1 microphone x-coordinates (m); the reference
# mic is the leftmost one.
DEFAULT_MIC_POSITIONS = (-0.113, 0.036, 0.076, 0.113)


class GeometryError(ValueError):
    """Raised for invalid geometry or out-of-domain angles."""


@dataclass(frozen=True)
class ArrayGeometry:
    """Linear microphone array.

    Attributes:
        mic_offsets: signed distance of each microphone from the reference
            microphone along the array axis, in meters.
        reference_index: index of the microphone with offset exactly 0.
        sound_speed: propagation speed c in m/s.
        sample_rate: sampling rate fs in Hz.
    """

    mic_offsets: tuple[float, ...]
    reference_index: int = 0
    sound_speed: float = DEFAULT_SOUND_SPEED
    sample_rate: float = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        offsets = tuple(float(v) for v in self.mic_offsets)
        object.__setattr__(self, "mic_offsets", offsets)
        object.__setattr__(self, "sound_speed", float(self.sound_speed))
        object.__setattr__(self, "sample_rate", float(self.sample_rate))
        if len(offsets) < 2:
            raise GeometryError("mic_offsets: at least 2 microphones are required")
        if not all(math.isfinite(v) for v in offsets):
            raise GeometryError("mic_offsets: all offsets must be finite")
        if not 0 <= self.reference_index < len(offsets):
            raise GeometryError("reference_index: out of range")
        if offsets[self.reference_index] != 0.0:
            raise GeometryError("mic_offsets: reference microphone offset must be 0")
        if not (math.isfinite(self.sound_speed) and self.sound_speed > 0):
            raise GeometryError("sound_speed: must be > 0")
        if not (math.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise GeometryError("sample_rate: must be > 0")
        if max(offsets) - min(offsets) <= 0:
            raise GeometryError("mic_offsets: array length must be > 0")

    @classmethod
    def from_positions(cls, positions: Sequence[float], reference_index: int = 0,
                       sound_speed: float = DEFAULT_SOUND_SPEED,
                       sample_rate: float = DEFAULT_SAMPLE_RATE) -> "ArrayGeometry":
        """Build a geometry from absolute positions along the array axis."""
        positions = [float(p) for p in positions]
        if not positions:
            raise GeometryError("mic_positions: at least 2 microphones are required")
        if not 0 <= reference_index < len(positions):
            raise GeometryError("reference_index: out of range")
        ref = positions[reference_index]
        return cls(tuple(p - ref for p in positions), reference_index,
                   sound_speed, sample_rate)

    @property
    def n_mics(self) -> int:
        return len(self.mic_offsets)

    @property
    def offsets(self) -> np.ndarray:
        return np.asarray(self.mic_offsets, dtype=float)

    @property
    def length(self) -> float:
        return max(self.mic_offsets) - min(self.mic_offsets)

    def max_delay_samples(self, reference: int | None = None) -> float:
        """Largest physical |delay| of any channel relative to ``reference``."""
        ref = self.reference_index if reference is None else reference
        rel = self.offsets - self.offsets[ref]
        return float(np.max(np.abs(rel)) / self.sound_speed * self.sample_rate)


def default_geometry(sample_rate: float = DEFAULT_SAMPLE_RATE,
                     sound_speed: float = DEFAULT_SOUND_SPEED) -> ArrayGeometry:
    return ArrayGeometry.from_positions(DEFAULT_MIC_POSITIONS, 0, sound_speed, sample_rate)


@dataclass(frozen=True)
class DelayVector:
    """Per-channel delays relative to the reference microphone."""

    seconds: np.ndarray
    samples: np.ndarray


def delays_from_aoi(geom: ArrayGeometry, aoi_deg: float) -> DelayVector:
    """Planar-wavefront delays ``delta_n * sin(aoi) / c`` for every channel.

    Raises:
        GeometryError: if ``aoi_deg`` is outside [-90, 90].
    """
    aoi_deg = float(aoi_deg)
    if not -90.0 <= aoi_deg <= 90.0:
        raise GeometryError(f"aoi_deg={aoi_deg} outside [-90, 90]")
    tau = geom.offsets * math.sin(math.radians(aoi_deg)) / geom.sound_speed
    tau[geom.reference_index] = 0.0
    return DelayVector(seconds=tau, samples=tau * geom.sample_rate)


def wrap_deg(angle: float) -> float:
    """Wrap an angle into (-180, 180]."""
    wrapped = math.fmod(angle, 360.0)
    if wrapped <= -180.0:
        wrapped += 360.0
    elif wrapped > 180.0:
        wrapped -= 360.0
    return wrapped


def bearing_deg(origin, target) -> float:
    """Compass bearing from ``origin`` to ``target`` (0 = +y, clockwise)."""
    dx = float(target[0]) - float(origin[0])
    dy = float(target[1]) - float(origin[1])
    if dx == 0.0 and dy == 0.0:
        raise GeometryError("source coincides with head position")
    return math.degrees(math.atan2(dx, dy))


def aoi_from_pose(head_yaw_deg: float, head_position, source_position) -> float:
    """Signed angle from the MRA (at ``head_yaw_deg``) to the source, in (-180, 180]."""
    return wrap_deg(bearing_deg(head_position, source_position) - float(head_yaw_deg))
