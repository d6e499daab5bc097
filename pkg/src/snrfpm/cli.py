"""Command-line runner: ``snrfpm {simulate,acquire,reconstruct,report}``.

All stages read and write one output directory (``--out``); raw frames may
live elsewhere (``--frames``). Exit codes: 0 success, 1 configuration error,
2 missing input, 3 empty acquisition, 4 data mismatch.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import pgm
from .acquisition import DirectorySource, EmptyAcquisitionError
from .config import ConfigError, ExperimentConfig, load_config
from .forward import RawFrame, falloff_factor, simulate_frame
from .noise import _fmt
from .optics import ComplexField, LedGrid, illumination_na
from .pipeline import (
    DataMismatchError,
    MissingInputError,
    ProfileSpec,
    Truth,
    acquire,
    calibration_frames,
    load_truth,
    make_scorer,
    profile_contrasts,
    reconstruct,
)
from .recon import amplitude_error, coverage_map

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_EMPTY, EXIT_MISMATCH = 0, 1, 2, 3, 4

MANIFEST = "manifest.json"
KEPT = "kept.json"


def _dump_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_json(path: Path):
    if not path.exists():
        raise MissingInputError(f"{path} not found; run the previous stage first")
    return json.loads(path.read_text())


def _grid_record(grid: LedGrid) -> dict:
    return {"rows": grid.rows, "cols": grid.cols, "pitch": grid.pitch, "height": grid.height,
            "center_offset": list(grid.center_offset), "stride": grid.stride}


def _read_kv(path: Path) -> dict[str, str]:
    if not path.exists():
        return {}
    return dict(line.split("=", 1) for line in path.read_text().splitlines() if "=" in line)


def _calibration_names(kind: str, count: int) -> list[str]:
    return [f"{kind}_{k}.pgm" for k in range(count)]


def cmd_simulate(cfg: ExperimentConfig) -> int:
    truth = load_truth(cfg)
    out = cfg.frames_dir()
    out.mkdir(parents=True, exist_ok=True)
    depth = cfg.noise.bit_depth
    frames = []
    for led in cfg.leds.all_leds():
        frame = simulate_frame(truth.field, led, cfg.leds, cfg.optics, cfg.noise, cfg.seed)
        pgm.write_pgm(out / pgm.frame_name(led), frame.pixels, depth)
        frames.append({"row": led[0], "col": led[1], "file": pgm.frame_name(led),
                       "illum_na": illumination_na(led, cfg.leds),
                       "falloff": falloff_factor(led, cfg.leds)})
    dark, flat = calibration_frames(cfg)
    for name, f in zip(_calibration_names("dark", len(dark)), dark):
        pgm.write_pgm(out / name, f.pixels, depth)
    for name, f in zip(_calibration_names("flat", len(flat)), flat):
        pgm.write_pgm(out / name, f.pixels, depth)
    pitch = cfg.optics.hr_pitch
    pgm.write_float_image(out / "truth_amplitude.f32", truth.field.amplitude, pitch)
    pgm.write_float_image(out / "truth_phase.f32", truth.field.phase, pitch)
    _dump_json(out / MANIFEST, {
        "seed": cfg.seed,
        "noise": cfg.noise.kind.value,
        "bit_depth": depth,
        "grid": _grid_record(cfg.leds),
        "frames": frames,
        "dark_frames": _calibration_names("dark", len(dark)),
        "flat_frames": _calibration_names("flat", len(flat)),
        "profiles": [{"kind": p.kind, "segment": [list(p.segment[0]), list(p.segment[1])],
                      "linewidth": p.linewidth} for p in truth.profiles],
    })
    print(f"wrote {len(frames)} frames to {out}")
    return EXIT_OK


def _read_calibration(frames_dir: Path, names: list[str]) -> list[RawFrame]:
    out = []
    for name in names:
        path = frames_dir / name
        if not path.exists():
            raise MissingInputError(f"calibration frame not found: {path}")
        out.append(RawFrame(pgm.read_pgm(path).astype(float), (0, 0), exposure_id=name))
    return out


def _scorer_from_dir(cfg: ExperimentConfig, frames_dir: Path):
    cal = cfg.calibration
    dark = _read_calibration(frames_dir, _calibration_names("dark", cal.dark_frames))
    flat = _read_calibration(frames_dir, _calibration_names("flat", cal.flat_frames))
    return make_scorer(cfg, dark, flat)


def cmd_acquire(cfg: ExperimentConfig) -> int:
    frames_dir = cfg.frames_dir()
    if not frames_dir.is_dir():
        raise MissingInputError(f"frame directory not found: {frames_dir}")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    scorer = _scorer_from_dir(cfg, frames_dir)
    source = DirectorySource(frames_dir)
    n = cfg.optics.lr_size
    if source.capture((0, 0)).shape != (n, n):
        raise DataMismatchError(f"frames in {frames_dir} are not {n}x{n} as configured")
    grid, plan, kept, summary = acquire(source, cfg, scorer)
    plan.write_csv(out / "plan.csv")
    plan.snr_report().write_csv(out / "snr.csv", {led: d.value for led, d in plan.decisions.items()})
    (out / "summary.txt").write_text(summary.as_text())
    _dump_json(out / KEPT, {
        "frames_dir": os.path.relpath(frames_dir, out),
        "grid": _grid_record(grid),
        "lit": [list(led) for led in sorted(grid.lit)],
        "dark": scorer.dark,
        "threshold_db": plan.threshold_db,
        "kept": [{"row": r, "col": c, "file": pgm.frame_name((r, c))} for r, c in plan.kept],
    })
    print(summary.as_text(), end="")
    return EXIT_OK


def _check_grid(record: dict, cfg: ExperimentConfig) -> LedGrid:
    base = cfg.leds
    same = (record["rows"], record["cols"], record["pitch"], record["height"],
            tuple(record["center_offset"])) == (base.rows, base.cols, base.pitch, base.height,
                                                tuple(base.center_offset))
    if not same:
        raise DataMismatchError("kept manifest was made with a different LED grid than the config")
    return base


def cmd_reconstruct(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out)
    manifest = _load_json(out / KEPT)
    base = _check_grid(manifest["grid"], cfg)
    grid = base.with_lit([tuple(led) for led in manifest["lit"]], stride=manifest["grid"]["stride"])
    frames_dir = Path(cfg.frames) if cfg.frames else out / manifest["frames_dir"]
    n = cfg.optics.lr_size
    kept = []
    for entry in manifest["kept"]:
        led = (entry["row"], entry["col"])
        path = frames_dir / entry["file"]
        if not path.exists():
            raise DataMismatchError(f"kept manifest lists {entry['file']} but {path} does not exist")
        pixels = pgm.read_pgm(path).astype(float)
        if pixels.shape != (n, n):
            raise DataMismatchError(f"{path}: shape {pixels.shape}, expected {(n, n)}")
        if not grid.contains(led):
            raise DataMismatchError(f"kept LED {led} is outside the grid")
        kept.append(RawFrame(pixels, led, exposure_id=entry["file"]))
    if not kept:
        raise DataMismatchError("kept manifest lists no frames")
    if len(kept) < 2:
        print("warning: coverage below synthesis threshold (fewer than two frames)", file=sys.stderr)
    result = reconstruct(kept, grid, cfg, float(manifest["dark"]))
    obj = result.object
    pitch = obj.pitch
    pgm.write_float_image(out / "amplitude.f32", obj.amplitude, pitch)
    pgm.write_float_image(out / "phase.f32", obj.phase, pitch)
    pgm.write_pgm(out / "amplitude.pgm", pgm.amplitude_preview(obj.amplitude))
    pgm.write_pgm(out / "phase.pgm", pgm.phase_preview(obj.phase))
    cover = coverage_map([f.led for f in kept], grid, cfg.optics)
    pgm.write_pgm(out / "coverage.pgm", np.minimum(cover, 65535))
    with open(out / "error.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("iteration", "error"))
        for k, e in enumerate(result.per_iteration_error, start=1):
            writer.writerow((k, _fmt(e)))
    truth = _truth_from_dir(frames_dir)
    if truth is not None:
        err = amplitude_error(obj.data, truth.data)
        print(f"normalized amplitude RMSE vs ground truth: {err:.6g}")
    print(f"reconstructed {len(kept)} frames, final error {result.per_iteration_error[-1]:.6g}")
    return EXIT_OK


def _truth_from_dir(frames_dir: Path) -> ComplexField | None:
    amp_path, ph_path = frames_dir / "truth_amplitude.f32", frames_dir / "truth_phase.f32"
    if not (amp_path.exists() and ph_path.exists()):
        return None
    amp, pitch = pgm.read_float_image(amp_path)
    phase, _ = pgm.read_float_image(ph_path)
    return ComplexField(amp * np.exp(1j * phase), pitch)


def _profiles_from_manifest(frames_dir: Path) -> list[ProfileSpec]:
    path = frames_dir / MANIFEST
    if not path.exists():
        return []
    return [ProfileSpec(p["kind"], (tuple(p["segment"][0]), tuple(p["segment"][1])), p["linewidth"])
            for p in json.loads(path.read_text()).get("profiles", [])]


def cmd_report(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out)
    summary = _read_kv(out / "summary.txt")
    kept = json.loads((out / KEPT).read_text()) if (out / KEPT).exists() else None
    frames_dir = Path(cfg.frames) if cfg.frames else out / (kept["frames_dir"] if kept else ".")
    rows: dict[str, object] = {}
    for key in ("frames_total", "frames_captured", "reduction_ratio", "threshold_db", "synthetic_na"):
        rows[key] = summary.get(key, "absent")
    if "reduction_ratio" in summary:
        rows["reduction_percent"] = f"{100 * float(summary['reduction_ratio']):.1f}"
    else:
        rows["reduction_percent"] = "absent"
    errors = out / "error.csv"
    if errors.exists():
        lines = errors.read_text().splitlines()[1:]
        rows["iterations"] = len(lines)
        rows["final_error"] = lines[-1].split(",")[1] if lines else "absent"
    else:
        rows["iterations"] = rows["final_error"] = "absent"
    amp_path, ph_path = out / "amplitude.f32", out / "phase.f32"
    if amp_path.exists() and ph_path.exists():
        amp, pitch = pgm.read_float_image(amp_path)
        phase, _ = pgm.read_float_image(ph_path)
        recon = ComplexField(amp * np.exp(1j * phase), pitch)
        truth_field = _truth_from_dir(frames_dir)
        if truth_field is not None:
            rows["amplitude_rmse"] = amplitude_error(recon.data, truth_field.data)
        profiles = ([ProfileSpec("both", seg) for seg in cfg.segments] if cfg.segments
                    else _profiles_from_manifest(frames_dir))
        truth = Truth(truth_field, ()) if truth_field is not None else None
        rows.update(profile_contrasts(recon, truth, profiles))
    else:
        rows["reconstruction"] = "absent"
    text = "".join(f"{k}={_fmt(v)}\n" for k, v in rows.items())
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "acquire": cmd_acquire,
    "reconstruct": cmd_reconstruct,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snrfpm", description="Virtual FPM with SNR-driven acquisition.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__name__.replace("cmd_", ""))
        p.add_argument("--config", type=Path, help="INI configuration file (defaults if omitted)")
        p.add_argument("--seed", type=int, help="override [run] seed")
        p.add_argument("--frames", help="raw frame directory (default: the output directory)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threshold-db", type=float, help="fixed PSNR threshold instead of the automatic one")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        cfg = cfg.with_overrides(args.seed, args.frames, args.out, args.threshold_db)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EmptyAcquisitionError as exc:
        print(f"empty acquisition: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except DataMismatchError as exc:
        print(f"data mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
