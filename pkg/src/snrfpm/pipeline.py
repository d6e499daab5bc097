"""End-to-end experiment stages shared by the command line and in-process runs.

Each stage is a plain function of an :class:`ExperimentConfig` and the
previous stage's data, so running the four CLI subcommands in sequence gives
the same numbers as :func:`run_experiment`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import pgm
from .acquisition import (
    AcquisitionPlan,
    AcquisitionSummary,
    FrameSource,
    SimulatedSource,
    adaptive_acquire,
    auto_threshold,
    design_sparse_grid,
    report,
)
from .config import ExperimentConfig, Segment
from .forward import NoiseKind, RawFrame, capture_dark_frames, capture_flat_frames
from .noise import SnrScorer, preprocess
from .optics import ComplexField, LedGrid
from .recon import (
    ReconResult,
    amplitude_error,
    epry_reconstruct,
    line_profile_contrast,
    phase_profile_contrast,
    remove_global_phase,
)
from .targets import TARGETS


class MissingInputError(FileNotFoundError):
    """A required input file or directory does not exist."""


class DataMismatchError(ValueError):
    """Inputs exist but disagree with each other or with the configuration."""


@dataclass(frozen=True)
class ProfileSpec:
    """A line profile to measure on the reconstruction."""

    kind: str  # "amplitude", "phase" or "both"
    segment: Segment
    linewidth: int = 1


@dataclass(frozen=True)
class Truth:
    field: ComplexField
    profiles: tuple[ProfileSpec, ...]


def _read_scaled(path: Path, lo: float, hi: float, size: int) -> np.ndarray:
    if not path.exists():
        raise MissingInputError(f"object image not found: {path}")
    img = pgm.read_pgm(path).astype(float)
    if img.shape != (size, size):
        raise DataMismatchError(f"{path}: shape {img.shape}, expected {(size, size)}")
    return lo + (hi - lo) * img / pgm.read_pgm_maxval(path)


def _bar_profiles(scene) -> list[ProfileSpec]:
    out = []
    for kind, elements in (("amplitude", scene.elements), ("phase", scene.phase_elements)):
        for el in elements:
            out.append(ProfileSpec(kind, el.profile_segment(), int(2 * el.period) | 1))
    return out


def load_truth(cfg: ExperimentConfig) -> Truth:
    """Object transmission from image files, or the configured built-in target."""
    size = cfg.optics.hr_size
    if cfg.object.amplitude:
        amp = _read_scaled(Path(cfg.object.amplitude), 0.0, 1.0, size)
        phase = _read_scaled(Path(cfg.object.phase), -math.pi, math.pi, size) if cfg.object.phase else 0.0
        field = ComplexField(amp * np.exp(1j * phase), cfg.optics.hr_pitch)
        profiles = []
    else:
        scene = TARGETS[cfg.object.target](cfg.optics)
        field = scene.field
        profiles = _bar_profiles(scene)
    if cfg.segments:
        profiles = [ProfileSpec("both", seg) for seg in cfg.segments]
    return Truth(field, tuple(profiles))


def frame_shape(cfg: ExperimentConfig) -> tuple[int, int]:
    return (cfg.optics.lr_size, cfg.optics.lr_size)


def calibration_frames(cfg: ExperimentConfig) -> tuple[list[RawFrame], list[RawFrame]]:
    """Dark frames and object-free flat frames for the configured sensor."""
    shape = frame_shape(cfg)
    cal = cfg.calibration
    dark = capture_dark_frames(cfg.noise, cal.dark_frames, cfg.seed, shape)
    flat = capture_flat_frames(cfg.noise, cal.flat_frames, cfg.seed, shape, cal.flat_level)
    return dark, flat


def make_scorer(cfg: ExperimentConfig, dark_frames, flat_frames) -> SnrScorer:
    s = cfg.scorer
    bright = flat_frames if cfg.noise.kind is NoiseKind.GAUSSIAN8 else None
    return SnrScorer.calibrate(cfg.noise.kind, dark_frames, bright, roi_fraction=s.roi_fraction,
                               box_fraction=s.box_fraction, box_inset=s.box_inset)


def acquisition_grid(cfg: ExperimentConfig) -> LedGrid:
    if cfg.acquisition.sparse:
        return design_sparse_grid(cfg.leds, cfg.optics, cfg.acquisition.min_overlap)
    return cfg.leds


def acquire(source: FrameSource, cfg: ExperimentConfig, scorer: SnrScorer
            ) -> tuple[LedGrid, AcquisitionPlan, list[RawFrame], AcquisitionSummary]:
    """Grid design, threshold (configured or automatic) and adaptive acquisition."""
    grid = acquisition_grid(cfg)
    threshold = cfg.acquisition.threshold_db
    if threshold is None:
        threshold = auto_threshold(source, grid, scorer)
    plan, kept = adaptive_acquire(source, grid, scorer, threshold, cfg.acquisition.trend_stop,
                                  frames_total=len(cfg.leds.lit))
    return grid, plan, kept, report(plan, grid, cfg.optics)


def reconstruct(kept: list[RawFrame], grid: LedGrid, cfg: ExperimentConfig, dark: float) -> ReconResult:
    frames = [preprocess(f, grid, dark) for f in kept]
    return epry_reconstruct(frames, grid, cfg.optics, cfg.recon)


def profile_contrasts(recon: ComplexField, truth: Truth | None, profiles) -> dict[str, float]:
    """Contrast of each configured profile on the reconstructed amplitude and/or phase.

    Phase is aligned to the ground truth's global offset when one is given.
    """
    amp = recon.amplitude
    phase = recon.phase
    if truth is not None:
        ref = truth.field.amplitude
        phase = remove_global_phase(phase, truth.field.phase, ref >= 0.5 * ref.max())
    out = {}
    for k, prof in enumerate(profiles):
        if prof.kind in ("amplitude", "both"):
            out[f"contrast_amplitude_{k}"] = line_profile_contrast(amp, prof.segment, prof.linewidth)
        if prof.kind in ("phase", "both"):
            out[f"contrast_phase_{k}"] = phase_profile_contrast(phase, prof.segment, prof.linewidth)
    return out


@dataclass
class ExperimentResult:
    truth: Truth
    grid: LedGrid
    plan: AcquisitionPlan
    summary: AcquisitionSummary
    recon: ReconResult
    amplitude_rmse: float
    contrasts: dict[str, float]


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Simulate, acquire, reconstruct and evaluate in one process."""
    truth = load_truth(cfg)
    dark_frames, flat_frames = calibration_frames(cfg)
    scorer = make_scorer(cfg, dark_frames, flat_frames)
    source = SimulatedSource(truth.field, cfg.leds, cfg.optics, cfg.noise, cfg.seed)
    grid, plan, kept, summary = acquire(source, cfg, scorer)
    result = reconstruct(kept, grid, cfg, scorer.dark)
    err = amplitude_error(result.object.data, truth.field.data)
    return ExperimentResult(truth, grid, plan, summary, result, err,
                            profile_contrasts(result.object, truth, truth.profiles))
