"""Closed-loop head servoing towards the speech source.

The camera + object detector is replaced by a geometric oracle: it reports
the true angular offset of the source from the head's MRA, corrupted by
Gaussian noise, delivered after a fixed latency and occasionally dropped.
The head is driven by a proportional controller with a deadband, a rate
limit and yaw limits, integrated on a fixed 100 Hz control tick.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from beamsteer.config import ScenarioConfig, ServoConfig
from beamsteer.geometry import aoi_from_pose
from beamsteer.scenesim import AoiTrack, base_positions

CONTROL_DT = 0.01


@dataclass(frozen=True)
class Measurement:
    offset_deg: float
    available_at: float


@dataclass
class ServoState:
    head_yaw_deg: float = 0.0
    pending: deque = field(default_factory=deque)
    last_command: float | None = None


@dataclass
class ServoRun:
    times: np.ndarray
    head_yaw: np.ndarray
    aoi: np.ndarray
    n_measurements: int
    n_dropouts: int

    def aoi_track(self) -> AoiTrack:
        return AoiTrack(self.times, self.aoi)


def measure_offset(head_pose, source_position, cfg: ServoConfig,
                   rng: np.random.Generator, t: float = 0.0) -> Measurement | None:
    """One detector frame captured at time ``t``.

    ``head_pose`` is ``(position, yaw_deg)``.  Returns None on dropout.
    """
    position, yaw = head_pose
    dropped = rng.random() < cfg.detector_dropout_prob
    noise = rng.normal(0.0, cfg.detector_noise_std_deg) if cfg.detector_noise_std_deg > 0 else 0.0
    if dropped:
        return None
    offset = aoi_from_pose(yaw, position, source_position) + noise
    return Measurement(offset, t + cfg.detector_latency_s)


def servo_step(state: ServoState, measurement: float | None, dt: float,
               cfg: ServoConfig) -> ServoState:
    """Advance the head by ``dt`` seconds.

    A measurement outside the deadband sets a new yaw target at
    ``yaw + gain * measurement`` (clamped to the yaw limits); the head then
    moves towards the current target by at most ``rate_limit * dt``.
    """
    if not dt > 0:
        raise ValueError("servo_step: dt must be > 0")
    lo, hi = cfg.head_yaw_limits_deg
    command = state.last_command
    if measurement is not None and abs(measurement) > cfg.deadband_deg:
        command = min(max(state.head_yaw_deg + cfg.proportional_gain * measurement, lo), hi)
    yaw = state.head_yaw_deg
    if command is not None:
        max_step = cfg.head_rate_limit_deg_s * dt
        yaw = yaw + min(max(command - yaw, -max_step), max_step)
        yaw = min(max(yaw, lo), hi)
    return replace(state, head_yaw_deg=yaw, last_command=command)


def simulate_servo(scenario: ScenarioConfig, servo: ServoConfig | None = None) -> ServoRun:
    """Run the control loop over the whole scenario at 100 Hz."""
    servo = scenario.servo if servo is None else servo
    # detector stream keyed on both the run seed and the servo's own seed
    rng = np.random.default_rng([scenario.seed, servo.seed])
    n_ticks = int(np.floor(scenario.duration_s / CONTROL_DT + 1e-9)) + 1
    times = np.arange(n_ticks) * CONTROL_DT
    heads = base_positions(scenario, times)
    source = scenario.speech.position

    state = ServoState(head_yaw_deg=0.0)
    yaws = np.empty(n_ticks)
    aois = np.empty(n_ticks)
    next_capture = 0.0
    n_meas = n_drop = 0
    for i, t in enumerate(times):
        if i > 0:
            delivered = None
            while state.pending and state.pending[0].available_at <= t + 1e-9:
                delivered = state.pending.popleft().offset_deg
            state = servo_step(state, delivered, CONTROL_DT, servo)
        pose = (heads[i], state.head_yaw_deg)
        if t + 1e-9 >= next_capture:
            meas = measure_offset(pose, source, servo, rng, t)
            n_meas += 1
            if meas is None:
                n_drop += 1
            else:
                state.pending.append(meas)
            next_capture += servo.detector_period_s
        yaws[i] = state.head_yaw_deg
        aois[i] = aoi_from_pose(state.head_yaw_deg, heads[i], source)
    return ServoRun(times, yaws, aois, n_meas, n_drop)


def run_servo_sim(scenario: ScenarioConfig, servo: ServoConfig | None = None) -> AoiTrack:
    """Realized speech-source AOI under servo control, sampled at 100 Hz."""
    if scenario.head_mode != "servo":
        raise ValueError("run_servo_sim: scenario head_mode must be 'servo'")
    return simulate_servo(scenario, servo).aoi_track()


def static_aoi_track(scenario: ScenarioConfig, yaw_deg: float = 0.0) -> AoiTrack:
    """AOI of the speech source for a head held at ``yaw_deg``, at 100 Hz."""
    n_ticks = int(np.floor(scenario.duration_s / CONTROL_DT + 1e-9)) + 1
    times = np.arange(n_ticks) * CONTROL_DT
    heads = base_positions(scenario, times)
    aois = [aoi_from_pose(yaw_deg, h, scenario.speech.position) for h in heads]
    return AoiTrack(times, aois)


def aoi_stats(track: AoiTrack) -> dict:
    """Time-weighted |AOI| statistics (trapezoidal weighting between samples)."""
    if len(track) == 0:
        raise ValueError("aoi_stats: empty track")
    a = np.abs(track.aoi_deg)
    if len(track) == 1:
        return {"mean_abs_deg": float(a[0]), "max_abs_deg": float(a[0]), "rms_deg": float(a[0])}
    span = track.times[-1] - track.times[0]
    mean_abs = np.trapezoid(a, track.times) / span
    rms = np.sqrt(np.trapezoid(a ** 2, track.times) / span)
    return {"mean_abs_deg": float(mean_abs), "max_abs_deg": float(a.max()), "rms_deg": float(rms)}
