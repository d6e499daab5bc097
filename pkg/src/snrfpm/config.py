"""Experiment configuration: an INI file with one section per subsystem.

Every key has a default; unknown sections or keys raise :class:`ConfigError`
so that typos fail loudly. :data:`SCHEMA` is the single source of truth and
:func:`default_config_text` renders it as an annotated example file.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .forward import NoiseKind, NoiseModel
from .optics import LedGrid, OpticalConfig
from .recon import Init, ReconConfig

Segment = tuple[tuple[float, float], tuple[float, float]]


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _auto_float(text: str) -> float | None:
    return None if text.strip().lower() == "auto" else float(text)


def _segments(text: str) -> tuple[Segment, ...]:
    """``r0 c0 r1 c1; r0 c0 r1 c1; ...``"""
    out = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        vals = [float(v) for v in chunk.replace(",", " ").split()]
        if len(vals) != 4:
            raise ValueError(f"segment needs 4 numbers, got {chunk.strip()!r}")
        out.append(((vals[0], vals[1]), (vals[2], vals[3])))
    return tuple(out)


def _str(text: str) -> str:
    return text.strip()


# section -> key -> (parser, default text, description)
SCHEMA: dict[str, dict[str, tuple]] = {
    "optics": {
        "wavelength": (float, "0.63113", "illumination wavelength, um"),
        "objective_na": (float, "0.1", "objective numerical aperture"),
        "magnification": (float, "4", "objective magnification"),
        "camera_pixel": (float, "6.5", "sensor pixel pitch, um"),
        "upsample_factor": (int, "4", "HR / LR sampling ratio"),
        "hr_size": (int, "256", "side of the HR object grid, px"),
    },
    "leds": {
        "rows": (int, "19", "LED rows (odd)"),
        "cols": (int, "19", "LED columns (odd)"),
        "pitch": (float, "4.0", "LED spacing, mm"),
        "height": (float, "67.5", "LED plane to sample distance, mm"),
        "offset_x": (float, "0", "lateral offset of the centre LED along x, mm"),
        "offset_y": (float, "0", "lateral offset of the centre LED along y, mm"),
    },
    "noise": {
        "kind": (_str, "poisson16", "poisson16 | gaussian8 | noiseless"),
        "dark_mean": (_auto_float, "auto", "dark offset in counts; auto = 101 (poisson16) or 0.2 (gaussian8) or 0"),
        "dark_shot": (_bool, "true", "dark offset carries its own shot noise (poisson16)"),
        "gaussian_sigma": (float, "2.0", "read-noise sigma in counts (gaussian8)"),
        "photon_scale": (_auto_float, "auto", "counts per unit intensity; auto = 80% of full scale"),
        "stray_level": (float, "0", "additive stray light in counts, illuminated frames only"),
        "stray_corner": (float, "0", "confine stray light to a top-left patch of this side fraction; 0 = whole frame"),
        "dark_frames": (int, "4", "number of dark calibration frames"),
        "flat_frames": (int, "4", "number of object-free bright calibration frames"),
        "flat_level": (float, "1.0", "intensity of the calibration flat field"),
    },
    "scorer": {
        "roi_fraction": (float, "0.5", "central ROI size as a fraction of each frame side"),
        "box_fraction": (float, "0.125", "corner background box side as a fraction of the frame side"),
        "box_inset": (int, "2", "corner box inset from the frame border, px"),
    },
    "acquisition": {
        "threshold_db": (_auto_float, "auto", "PSNR threshold in dB; auto = best edge-ring score"),
        "trend_stop": (_bool, "false", "stop after a fully skipped ring"),
        "sparse": (_bool, "true", "decimate the LED grid before acquiring"),
        "min_overlap": (float, "0.3181", "minimum adjacent pupil overlap for decimation"),
    },
    "recon": {
        "max_iterations": (int, "30", "EPRY sweeps"),
        "object_step": (float, "1.0", "object update step, (0, 2]"),
        "pupil_step": (float, "1.0", "pupil update step, [0, 2]; 0 freezes the pupil"),
        "init": (_str, "upsampled_center", "upsampled_center | flat"),
        "pupil_cap": (float, "1.0", "modulus cap applied to the recovered pupil"),
    },
    "object": {
        "target": (_str, "negative_bars", "built-in target used when no amplitude image is given"),
        "amplitude": (_str, "", "PGM amplitude image scaled to [0, 1]; empty = built-in target"),
        "phase": (_str, "", "optional PGM phase image scaled to [-pi, pi]"),
    },
    "report": {
        "segments": (_segments, "", "profile segments 'r0 c0 r1 c1; ...'; empty = target bars"),
    },
    "run": {
        "seed": (int, "0", "master seed for all noise"),
        "frames": (_str, "", "raw frame directory; empty = the output directory"),
        "out": (_str, "run", "output directory"),
    },
}


@dataclass(frozen=True)
class CalibrationOptions:
    dark_frames: int = 4
    flat_frames: int = 4
    flat_level: float = 1.0


@dataclass(frozen=True)
class ScorerOptions:
    roi_fraction: float = 0.5
    box_fraction: float = 0.125
    box_inset: int = 2


@dataclass(frozen=True)
class AcquisitionOptions:
    threshold_db: float | None = None
    trend_stop: bool = False
    sparse: bool = True
    min_overlap: float = 0.3181


@dataclass(frozen=True)
class ObjectOptions:
    target: str = "negative_bars"
    amplitude: str = ""
    phase: str = ""


@dataclass(frozen=True)
class ExperimentConfig:
    optics: OpticalConfig = field(default_factory=OpticalConfig)
    leds: LedGrid = field(default_factory=LedGrid)
    noise: NoiseModel = field(default_factory=lambda: NoiseModel.poisson16(dark_shot=True))
    calibration: CalibrationOptions = field(default_factory=CalibrationOptions)
    scorer: ScorerOptions = field(default_factory=ScorerOptions)
    acquisition: AcquisitionOptions = field(default_factory=AcquisitionOptions)
    recon: ReconConfig = field(default_factory=ReconConfig)
    object: ObjectOptions = field(default_factory=ObjectOptions)
    segments: tuple[Segment, ...] = ()
    seed: int = 0
    frames: str = ""
    out: str = "run"

    def frames_dir(self) -> Path:
        return Path(self.frames or self.out)

    def with_overrides(self, seed=None, frames=None, out=None, threshold_db=None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if frames is not None:
            cfg = replace(cfg, frames=frames)
        if out is not None:
            cfg = replace(cfg, out=out)
        if threshold_db is not None:
            cfg = replace(cfg, acquisition=replace(cfg.acquisition, threshold_db=threshold_db))
        return cfg


def _parse_values(parser: configparser.ConfigParser) -> dict[str, dict]:
    values = {sec: {k: spec[0](spec[1]) for k, spec in keys.items()} for sec, keys in SCHEMA.items()}
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, text in parser.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key '{key}' in [{sec}]")
            try:
                values[sec][key] = SCHEMA[sec][key][0](text)
            except ValueError as exc:
                raise ConfigError(f"[{sec}] {key}: {exc}") from None
    return values


def _build(v: dict[str, dict]) -> ExperimentConfig:
    n = v["noise"]
    kind = NoiseKind(n["kind"])
    default_dark = {NoiseKind.POISSON16: 101.0, NoiseKind.GAUSSIAN8: 0.2, NoiseKind.NOISELESS: 0.0}[kind]
    noise = NoiseModel(
        kind=kind,
        bit_depth=8 if kind is NoiseKind.GAUSSIAN8 else 16,
        dark_mean=default_dark if n["dark_mean"] is None else n["dark_mean"],
        gaussian_sigma=n["gaussian_sigma"],
        photon_scale=n["photon_scale"],
        stray_level=n["stray_level"],
        stray_corner=n["stray_corner"],
        dark_shot=n["dark_shot"] and kind is NoiseKind.POISSON16,
    )
    calibration = CalibrationOptions(n["dark_frames"], n["flat_frames"], n["flat_level"])
    if calibration.dark_frames < 1 or calibration.flat_frames < 1:
        raise ValueError("dark_frames and flat_frames must be >= 1")
    led = v["leds"]
    leds = LedGrid(led["rows"], led["cols"], led["pitch"], led["height"],
                   center_offset=(led["offset_x"], led["offset_y"]))
    obj = ObjectOptions(**v["object"])
    if not obj.amplitude:
        from .targets import TARGETS

        if obj.target not in TARGETS:
            raise ValueError(f"unknown target {obj.target!r}; choose from {sorted(TARGETS)}")
    return ExperimentConfig(
        optics=OpticalConfig(**v["optics"]),
        leds=leds,
        noise=noise,
        calibration=calibration,
        scorer=ScorerOptions(**v["scorer"]),
        acquisition=AcquisitionOptions(**v["acquisition"]),
        recon=ReconConfig(**{**v["recon"], "init": Init(v["recon"]["init"])}),
        object=obj,
        segments=v["report"]["segments"],
        **v["run"],
    )


def parse_config(text: str) -> ExperimentConfig:
    """Parse INI text into an :class:`ExperimentConfig`.

    Raises
    ------
    ConfigError
        On syntax errors, unknown sections or keys, unparsable values, or
        values rejected by the underlying dataclasses.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    # keep key case as written so typos in case are reported too
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0]) from None
    values = _parse_values(parser)
    try:
        return _build(values)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def default_config_text() -> str:
    """Every section and key with its default and a one-line description."""
    lines = []
    for sec, keys in SCHEMA.items():
        lines.append(f"[{sec}]")
        for key, (_, default, doc) in keys.items():
            lines.append(f"# {doc}")
            lines.append(f"{key} = {default}")
        lines.append("")
    return "\n".join(lines)
