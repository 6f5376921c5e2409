"""Command-line front-end: simulate -> servo -> beamform -> eval.

Exit status is 0 on success, 1 for usage errors (bad flags, a mode that
needs an AOI track without one) and 2 for data or validation errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from beamsteer import __version__, fileio
from beamsteer.config import (
    PRESET_DESCRIPTIONS,
    PRESETS,
    ConfigError,
    ScenarioConfig,
    dump_scenario_config,
    parse_scenario_config,
    scenario_to_dict,
)
from beamsteer.geometry import default_geometry
from beamsteer.metrics import EvalReport, evaluate
from beamsteer.scenesim import AoiTrack, MultichannelSignal, synthesize_scene
from beamsteer.servo import aoi_stats, simulate_servo, static_aoi_track
from beamsteer.wdsbf import MODES, BeamformerConfig, UsageError, run_pipeline

__all__ = ["RunManifest", "dispatch", "main", "parse_scenario_config"]

SEED_ENV = "BEAMSTEER_SEED"
EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


@dataclasses.dataclass
class RunManifest:
    subcommand: str
    config: dict
    inputs: dict
    outputs: dict
    seed: int | None
    version: str = __version__
    timestamp: str = ""
    extra: dict = dataclasses.field(default_factory=dict)

    def write(self, path) -> None:
        if not self.timestamp:
            self.timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        fileio.write_json(path, dataclasses.asdict(self))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _resolve_seed(flag: int | None) -> int | None:
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env is None or env.strip() == "":
        return None
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _manifest_seed(flag: int | None) -> int:
    # beamform and eval draw no random numbers; the seed is recorded anyway
    seed = _resolve_seed(flag)
    return 0 if seed is None else seed


def _load_scenario(path, seed_flag) -> ScenarioConfig:
    cfg = parse_scenario_config(path)
    seed = _resolve_seed(seed_flag)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    return cfg


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_track(path) -> AoiTrack:
    times, angles = fileio.read_aoi_csv(path)
    if len(times) == 0:
        raise ValueError(f"{path}: empty AOI track")
    return AoiTrack(times, angles)


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(args) -> int:
    cfg = _load_scenario(args.config, args.seed)
    out = _out_dir(args.out)
    scene = synthesize_scene(cfg)
    fs = cfg.geometry.sample_rate
    files = {
        "mixture": out / "mix.wav",
        "clean": out / "clean.wav",
        "aoi": out / "aoi.csv",
        "metadata": out / "metadata.json",
        "scenario": out / "scenario.toml",
    }
    fileio.write_wav(files["mixture"], fs, scene.mixture.data)
    fileio.write_wav(files["clean"], fs, scene.clean)
    fileio.write_aoi_csv(files["aoi"], scene.aoi.times, scene.aoi.aoi_deg)
    meta = dict(scene.metadata)
    meta["aoi"] = aoi_stats(scene.aoi)
    fileio.write_json(files["metadata"], meta)
    files["scenario"].write_text(dump_scenario_config(cfg))
    for w in scene.metadata["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    RunManifest("simulate", scenario_to_dict(cfg), {"config": str(args.config)},
                {k: str(v) for k, v in files.items()}, cfg.seed).write(out / "manifest.json")
    print(f"wrote {scene.mixture.n_channels}-channel scene to {out}")
    return EXIT_OK


def cmd_servo(args) -> int:
    cfg = _load_scenario(args.config, args.seed)
    out = _out_dir(args.out)
    run = simulate_servo(cfg)
    servo = aoi_stats(run.aoi_track())
    static = aoi_stats(static_aoi_track(cfg))
    stats = {
        "servo": servo,
        "static": static,
        "reduction": 1.0 - servo["mean_abs_deg"] / static["mean_abs_deg"]
        if static["mean_abs_deg"] > 0 else None,
        "n_measurements": run.n_measurements,
        "n_dropouts": run.n_dropouts,
        "head_mode": cfg.head_mode,
    }
    files = {"aoi": out / "servo_aoi.csv", "stats": out / "servo_stats.json"}
    fileio.write_aoi_csv(files["aoi"], run.times, run.aoi)
    fileio.write_json(files["stats"], stats)
    RunManifest("servo", scenario_to_dict(cfg), {"config": str(args.config)},
                {k: str(v) for k, v in files.items()}, cfg.seed).write(out / "manifest.json")
    print(f"mean |AOI|: servo {servo['mean_abs_deg']:.2f} deg, "
          f"static {static['mean_abs_deg']:.2f} deg")
    return EXIT_OK


def cmd_beamform(args) -> int:
    if args.mode != "wds" and args.aoi is None:
        raise UsageError(f"beamform: mode {args.mode} requires --aoi")
    if args.mode == "wds" and args.aoi is not None:
        raise UsageError("beamform: mode wds does not take --aoi")
    rate, data = fileio.read_wav(args.inp)
    geom = parse_scenario_config(args.config).geometry if args.config else default_geometry(rate)
    if geom.sample_rate != rate:
        raise ValueError(f"{args.inp}: sample rate {rate} does not match geometry rate "
                         f"{geom.sample_rate}")
    cfg = BeamformerConfig(args.mode, window_s=args.window,
                           wiener_enabled=False if args.no_wiener else None)
    aoi = _read_track(args.aoi) if args.aoi else None
    out, diag = run_pipeline(MultichannelSignal(rate, data), cfg, aoi=aoi, geometry=geom)

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    diag_path = out_path.with_suffix(".json")
    fileio.write_wav(out_path, rate, out)
    fileio.write_json(diag_path, diag.to_dict(include_timing=False))
    inputs = {"wav": str(args.inp)}
    if args.aoi:
        inputs["aoi"] = str(args.aoi)
    if args.config:
        inputs["config"] = str(args.config)
    RunManifest("beamform", diag.config, inputs,
                {"wav": str(out_path), "diagnostics": str(diag_path)}, _manifest_seed(args.seed),
                extra={"timing": diag.timing, "reference": diag.reference}
                ).write(out_path.with_suffix(".manifest.json"))
    print(f"{args.mode}: reference channel {diag.reference}, {len(diag.delay_track.times)} frames")
    return EXIT_OK


def cmd_eval(args) -> int:
    rc, clean = fileio.read_wav(args.clean)
    ri, noisy = fileio.read_wav(args.inp)
    ro, enhanced = fileio.read_wav(args.out)
    if not rc == ri == ro:
        raise ValueError(f"eval: sample rates differ (clean {rc}, input {ri}, output {ro})")
    mean_aoi = aoi_stats(_read_track(args.aoi))["mean_abs_deg"] if args.aoi else None
    max_lag = int(round(args.align_window * rc))
    row = evaluate(clean[0], noisy, enhanced[0], max_lag, preset=args.preset, mode=args.mode,
                   mean_abs_aoi=mean_aoi)

    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    if report_path.exists():
        report = EvalReport.from_dict(json.loads(report_path.read_text()))
    else:
        report = EvalReport()
    report.add(row)
    report.config = {"align_window_s": args.align_window, "sample_rate": rc}
    report.seed = _manifest_seed(args.seed)
    csv_path = report.write(report_path)
    inputs = {"clean": str(args.clean), "input": str(args.inp), "output": str(args.out)}
    if args.aoi:
        inputs["aoi"] = str(args.aoi)
    RunManifest("eval", report.config, inputs, {"report": str(report_path), "csv": str(csv_path)},
                report.seed).write(report_path.with_suffix(".manifest.json"))
    print(f"SNR gain {row.snr_gain_db:+.2f} dB, SI-SDR {row.si_sdr_db:.2f} dB "
          f"(input {row.si_sdr_input_db:.2f} dB)")
    return EXIT_OK


def cmd_presets(args) -> int:
    for name in PRESETS:
        print(f"{name}\t{PRESET_DESCRIPTIONS[name]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="beamsteer", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="render a scenario to a multichannel WAV")
    s.add_argument("--config", required=True, help="scenario TOML file")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int, help=f"seed override (beats ${SEED_ENV})")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("servo", help="run the head servo loop and compare with a static head")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_servo)

    s = sub.add_parser("beamform", help="beamform a multichannel WAV to mono")
    s.add_argument("--in", dest="inp", required=True, help="multichannel input WAV")
    s.add_argument("--mode", required=True, choices=MODES)
    s.add_argument("--aoi", help="AOI CSV (time_s,aoi_deg); required for wds-aoi and ds-aoi")
    s.add_argument("--window", type=float, help="analysis window in seconds")
    s.add_argument("--config", help="scenario TOML supplying the array geometry")
    s.add_argument("--no-wiener", action="store_true", help="skip the Wiener prefilter")
    s.add_argument("--out", required=True, help="output mono WAV")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_beamform)

    s = sub.add_parser("eval", help="score an enhanced signal against the clean reference")
    s.add_argument("--clean", required=True)
    s.add_argument("--in", dest="inp", required=True, help="noisy multichannel input WAV")
    s.add_argument("--out", required=True, help="enhanced mono WAV")
    s.add_argument("--report", required=True, help="report JSON (rows are merged if it exists)")
    s.add_argument("--mode", help="mode label for the report row")
    s.add_argument("--preset", help="preset label for the report row")
    s.add_argument("--aoi", help="AOI CSV for the mean |AOI| column")
    s.add_argument("--align-window", type=float, default=0.5,
                   help="maximum alignment lag in seconds (default 0.5)")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("presets", help="list the built-in scenario presets")
    s.set_defaults(func=cmd_presets)
    return p


def dispatch(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
