"""Scenario and servo configuration, testbed presets, and the TOML file format.

A scenario file is TOML.  Every key is optional when ``preset`` names one of
the built-in testbed conditions; otherwise a ``[geometry]`` section is
required.  Unknown keys are rejected.

Example::

    preset = "VbST-1"
    seed = 7
    duration_s = 12.0

    [geometry]
    mic_positions = [-0.113, 0.036, 0.076, 0.113]
    reference_index = 0
    sound_speed = 343.0
    sample_rate = 16000

    [base]
    p1 = [-1.05, 0.0]
    p3 = [1.05, 0.0]
    v_max = 0.45
    accel = 0.9

    [head]
    mode = "servo"            # or "static_0deg"

    [speech]
    position = [0.0, 2.0]
    audio = "synthetic:speech"   # or a path to a mono WAV
    utterance_gap_s = 1.0

    [[noise]]
    position = [1.414214, 1.414214]
    audio = "synthetic:babble"
    snr_db = 5.0

    [scene]
    rt60_s = 0.0
    ego_noise_snr_db = "off"

    [servo]
    detector_period_s = 0.1
    ...

A ``[[noise]]`` list in the file replaces the preset's noise list as a whole.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python < 3.11
    import tomli
import tomli_w

from beamsteer.geometry import DEFAULT_MIC_POSITIONS, ArrayGeometry, GeometryError

HEAD_MODES = ("static_0deg", "servo")


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


@dataclass(frozen=True)
class SourceSpec:
    """A point source: 2-D position in meters and an audio reference.

    ``audio`` is either a WAV path or ``synthetic:<kind>`` with kind one of
    speech, babble, pink, white.  ``snr_db`` is only used for noise sources.
    """

    position: tuple[float, float]
    audio: str = "synthetic:speech"
    snr_db: float | None = None


@dataclass(frozen=True)
class ServoConfig:
    """Visual-servoing loop parameters.  Defaults are placeholders.

    ``seed`` selects the detector noise/dropout stream together with the
    scenario seed, so overriding the run seed also reseeds the detector.
    """

    detector_period_s: float = 0.1
    detector_latency_s: float = 0.15
    detector_noise_std_deg: float = 1.0
    detector_dropout_prob: float = 0.05
    deadband_deg: float = 1.0
    proportional_gain: float = 0.7
    head_rate_limit_deg_s: float = 120.0
    head_yaw_limits_deg: tuple[float, float] = (-150.0, 150.0)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "head_yaw_limits_deg",
                           tuple(float(v) for v in self.head_yaw_limits_deg))
        if not self.detector_period_s > 0:
            raise ConfigError("servo.detector_period_s: must be > 0")
        if not self.detector_latency_s >= 0:
            raise ConfigError("servo.detector_latency_s: must be >= 0")
        if not 0 <= self.detector_dropout_prob < 1:
            raise ConfigError("servo.detector_dropout_prob: must be in [0, 1)")
        if not self.detector_noise_std_deg >= 0:
            raise ConfigError("servo.detector_noise_std_deg: must be >= 0")
        if not 0 < self.proportional_gain <= 1:
            raise ConfigError("servo.proportional_gain: must be in (0, 1]")
        if not self.head_rate_limit_deg_s > 0:
            raise ConfigError("servo.head_rate_limit_deg_s: must be > 0")
        if not self.deadband_deg >= 0:
            raise ConfigError("servo.deadband_deg: must be >= 0")
        lo, hi = self.head_yaw_limits_deg
        if not lo < hi:
            raise ConfigError("servo.head_yaw_limits_deg: lower limit must be below upper")


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of a simulated testbed run."""

    geometry: ArrayGeometry
    p1: tuple[float, float] = (-1.05, 0.0)
    p3: tuple[float, float] = (1.05, 0.0)
    v_max: float = 0.45
    accel: float = 0.9
    head_mode: str = "static_0deg"
    speech: SourceSpec = SourceSpec((0.0, 2.0))
    noise: tuple[SourceSpec, ...] = ()
    duration_s: float = 20.0
    seed: int = 0
    utterance_gap_s: float = 1.0
    rt60_s: float = 0.0
    ego_noise_snr_db: float | None = None
    servo: ServoConfig = field(default_factory=ServoConfig)
    preset: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "p1", _point(self.p1, "base.p1"))
        object.__setattr__(self, "p3", _point(self.p3, "base.p3"))
        object.__setattr__(self, "noise", tuple(self.noise))
        if not self.v_max > 0:
            raise ConfigError("base.v_max: must be > 0")
        if not self.accel > 0:
            raise ConfigError("base.accel: must be > 0")
        if not self.duration_s > 0:
            raise ConfigError("duration_s: must be > 0")
        if self.head_mode not in HEAD_MODES:
            raise ConfigError(f"head.mode: must be one of {HEAD_MODES}")
        if len(self.noise) > 2:
            raise ConfigError("noise: at most 2 noise sources")
        for src in self.noise:
            if src.snr_db is None:
                raise ConfigError("noise.snr_db: required for every noise source")
        if self.utterance_gap_s < 0:
            raise ConfigError("speech.utterance_gap_s: must be >= 0")
        if self.rt60_s < 0:
            raise ConfigError("scene.rt60_s: must be >= 0")

    @property
    def p2(self) -> tuple[float, float]:
        return ((self.p1[0] + self.p3[0]) / 2, (self.p1[1] + self.p3[1]) / 2)


def _point(value, name) -> tuple[float, float]:
    try:
        x, y = (float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected a pair of numbers") from None
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ConfigError(f"{name}: must be finite")
    return (x, y)


# Noise source placeholders on a 2 m circle around P2: +45 deg and -60 deg.
NOISE1 = SourceSpec((round(2 * math.sin(math.radians(45)), 6),
                     round(2 * math.cos(math.radians(45)), 6)),
                    "synthetic:babble", 5.0)
NOISE2 = SourceSpec((round(2 * math.sin(math.radians(-60)), 6),
                     round(2 * math.cos(math.radians(-60)), 6)),
                    "synthetic:babble", 5.0)

PRESETS: dict[str, dict[str, Any]] = {
    "NST-1": {"head_mode": "static_0deg", "noise": (NOISE1,)},
    "NST-2": {"head_mode": "static_0deg", "noise": (NOISE1, NOISE2)},
    "VbST-1": {"head_mode": "servo", "noise": (NOISE1,)},
    "VbST-2": {"head_mode": "servo", "noise": (NOISE1, NOISE2)},
}

PRESET_DESCRIPTIONS = {
    "NST-1": "head fixed at 0 deg, noise source 1",
    "NST-2": "head fixed at 0 deg, noise sources 1 and 2",
    "VbST-1": "head following speech source, noise source 1",
    "VbST-2": "head following speech source, noise sources 1 and 2",
}


def preset_config(name: str, **overrides) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(f"preset: unknown preset {name!r}; choose from {sorted(PRESETS)}")
    kwargs: dict[str, Any] = {"geometry": ArrayGeometry.from_positions(DEFAULT_MIC_POSITIONS)}
    kwargs.update(PRESETS[name])
    kwargs.update(overrides)
    return ScenarioConfig(preset=name, **kwargs)


# ---------------------------------------------------------------------------
# TOML parsing / emission

_TOP_KEYS = {"preset", "seed", "duration_s", "geometry", "base", "head", "speech",
             "noise", "scene", "servo"}
_SECTION_KEYS = {
    "geometry": {"mic_positions", "mic_offsets", "reference_index", "sound_speed", "sample_rate"},
    "base": {"p1", "p3", "v_max", "accel"},
    "head": {"mode"},
    "speech": {"position", "audio", "utterance_gap_s"},
    "noise": {"position", "audio", "snr_db"},
    "scene": {"rt60_s", "ego_noise_snr_db"},
    "servo": {f.name for f in dataclasses.fields(ServoConfig)},
}


def _check_keys(table: dict, allowed: set, where: str):
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")


def _number(table: dict, key: str, where: str, kind=float):
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {value!r}")
    if kind is int:
        if float(value) != int(value):
            raise ConfigError(f"{where}.{key}: expected an integer")
        return int(value)
    return float(value)


def _resolve_audio(ref: str, base_dir: Path | None) -> str:
    if not isinstance(ref, str):
        raise ConfigError(f"audio: expected a string, got {ref!r}")
    if ref.startswith("synthetic:") or base_dir is None:
        return ref
    path = Path(ref)
    return str(path if path.is_absolute() else (base_dir / path))


def scenario_from_dict(data: dict, base_dir: Path | None = None) -> ScenarioConfig:
    """Validate a parsed TOML mapping and apply preset defaults."""
    _check_keys(data, _TOP_KEYS, "config")
    for name, allowed in _SECTION_KEYS.items():
        if name == "noise":
            continue
        if name in data:
            if not isinstance(data[name], dict):
                raise ConfigError(f"{name}: expected a section")
            _check_keys(data[name], allowed, name)

    preset = data.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        base = preset_config(preset)
    elif "geometry" not in data:
        raise ConfigError("geometry: missing [geometry] section (or give a preset)")
    else:
        base = None

    kw: dict[str, Any] = {}
    if base is not None:
        kw = {f.name: getattr(base, f.name) for f in dataclasses.fields(base)}
    kw["preset"] = preset

    if "geometry" in data:
        g = data["geometry"]
        old = base.geometry if base is not None else None
        ref = _number(g, "reference_index", "geometry", int) if "reference_index" in g else (
            old.reference_index if old else 0)
        c = _number(g, "sound_speed", "geometry") if "sound_speed" in g else (
            old.sound_speed if old else 343.0)
        fs = _number(g, "sample_rate", "geometry") if "sample_rate" in g else (
            old.sample_rate if old else 16000.0)
        if "mic_positions" in g and "mic_offsets" in g:
            raise ConfigError("geometry: give either mic_positions or mic_offsets, not both")
        try:
            if "mic_positions" in g or "mic_offsets" in g:
                key = "mic_positions" if "mic_positions" in g else "mic_offsets"
                vals = g[key]
                if not isinstance(vals, list) or not all(
                        isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
                    raise ConfigError(f"geometry.{key}: expected a list of numbers")
                if len(vals) == 0:
                    raise ConfigError(f"geometry.{key}: zero microphones; at least 2 required")
                if key == "mic_positions":
                    geom = ArrayGeometry.from_positions(vals, ref, c, fs)
                else:
                    geom = ArrayGeometry(tuple(vals), ref, c, fs)
            elif old is not None:
                geom = ArrayGeometry(old.mic_offsets, ref, c, fs)
            else:
                raise ConfigError("geometry.mic_positions: missing")
        except GeometryError as exc:
            raise ConfigError(f"geometry.{exc}") from None
        kw["geometry"] = geom

    if "seed" in data:
        kw["seed"] = _number(data, "seed", "config", int)
    if "duration_s" in data:
        kw["duration_s"] = _number(data, "duration_s", "config")

    b = data.get("base", {})
    for key in ("p1", "p3"):
        if key in b:
            kw[key] = _point(b[key], f"base.{key}")
    for key in ("v_max", "accel"):
        if key in b:
            kw[key] = _number(b, key, "base")

    if "mode" in data.get("head", {}):
        kw["head_mode"] = data["head"]["mode"]

    s = data.get("speech", {})
    if s:
        old = kw.get("speech", SourceSpec((0.0, 2.0)))
        kw["speech"] = SourceSpec(
            _point(s["position"], "speech.position") if "position" in s else old.position,
            _resolve_audio(s["audio"], base_dir) if "audio" in s else old.audio)
        if "utterance_gap_s" in s:
            kw["utterance_gap_s"] = _number(s, "utterance_gap_s", "speech")

    if "noise" in data:
        entries = data["noise"]
        if not isinstance(entries, list):
            raise ConfigError("noise: expected an array of tables ([[noise]])")
        noise = []
        for i, n in enumerate(entries):
            where = f"noise[{i}]"
            if not isinstance(n, dict):
                raise ConfigError(f"{where}: expected a table")
            _check_keys(n, _SECTION_KEYS["noise"], where)
            for req in ("position", "snr_db"):
                if req not in n:
                    raise ConfigError(f"{where}.{req}: missing")
            noise.append(SourceSpec(_point(n["position"], f"{where}.position"),
                                    _resolve_audio(n.get("audio", "synthetic:babble"), base_dir),
                                    _number(n, "snr_db", where)))
        kw["noise"] = tuple(noise)

    sc = data.get("scene", {})
    if "rt60_s" in sc:
        kw["rt60_s"] = _number(sc, "rt60_s", "scene")
    if "ego_noise_snr_db" in sc:
        kw["ego_noise_snr_db"] = (None if sc["ego_noise_snr_db"] == "off"
                                  else _number(sc, "ego_noise_snr_db", "scene"))

    sv = data.get("servo", {})
    servo_kw = dataclasses.asdict(kw.get("servo", ServoConfig()))
    for key in sv:
        if key == "head_yaw_limits_deg":
            servo_kw[key] = _point(sv[key], "servo.head_yaw_limits_deg")
        elif key == "seed":
            servo_kw[key] = _number(sv, key, "servo", int)
        else:
            servo_kw[key] = _number(sv, key, "servo")
    kw["servo"] = ServoConfig(**servo_kw)

    return ScenarioConfig(**kw)


def parse_scenario_config(path) -> ScenarioConfig:
    """Read and validate a TOML scenario file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return scenario_from_dict(data, path.parent)


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    """Fully resolved mapping; ``scenario_from_dict`` of it reproduces ``cfg``."""
    g = cfg.geometry
    out: dict[str, Any] = {}
    if cfg.preset is not None:
        out["preset"] = cfg.preset
    out["seed"] = cfg.seed
    out["duration_s"] = cfg.duration_s
    out["geometry"] = {"mic_offsets": list(g.mic_offsets), "reference_index": g.reference_index,
                       "sound_speed": g.sound_speed, "sample_rate": g.sample_rate}
    out["base"] = {"p1": list(cfg.p1), "p3": list(cfg.p3), "v_max": cfg.v_max, "accel": cfg.accel}
    out["head"] = {"mode": cfg.head_mode}
    out["speech"] = {"position": list(cfg.speech.position), "audio": cfg.speech.audio,
                     "utterance_gap_s": cfg.utterance_gap_s}
    out["noise"] = [{"position": list(n.position), "audio": n.audio, "snr_db": n.snr_db}
                    for n in cfg.noise]
    out["scene"] = {"rt60_s": cfg.rt60_s,
                    "ego_noise_snr_db": "off" if cfg.ego_noise_snr_db is None
                    else cfg.ego_noise_snr_db}
    servo = dataclasses.asdict(cfg.servo)
    servo["head_yaw_limits_deg"] = list(servo["head_yaw_limits_deg"])
    out["servo"] = servo
    return out


def dump_scenario_config(cfg: ScenarioConfig) -> str:
    return tomli_w.dumps(scenario_to_dict(cfg))
