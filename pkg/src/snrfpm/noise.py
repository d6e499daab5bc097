"""Noise estimators, per-frame PSNR scoring and frame preprocessing.

Frames are scored after cos⁴θ compensation. The noise level ``I_n`` is the
larger of a model-based estimate (Poisson or Gaussian, each plus the dark
offset) and the mean of a few local background boxes, so stray light that
breaks the noise model still raises the estimate.
"""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from .forward import NoiseKind, RawFrame, falloff_factor
from .optics import Led, LedGrid, illumination_na

Rect = tuple[int, int, int, int]  # row0, col0, row1, col1 (half-open)


class SingleFrameWarning(UserWarning):
    """Gaussian σ estimated from a single calibration frame."""


class Method(str, enum.Enum):
    MLE = "MLE"
    BACKGROUND = "Background"


@dataclass(frozen=True)
class NoiseEstimate:
    dark_mean: float
    poisson_sigma: float | None
    gaussian_sigma: float | None
    background_level: float
    chosen: float
    method: Method
    no_signal: bool = False

    @property
    def mle_level(self) -> float:
        sigma = self.poisson_sigma if self.poisson_sigma is not None else self.gaussian_sigma
        return (sigma or 0.0) + self.dark_mean


def _pixels(frame) -> np.ndarray:
    return np.asarray(frame.pixels if isinstance(frame, RawFrame) else frame, dtype=float)


def estimate_dark(frames: Sequence) -> float:
    """Mean gray value over all pixels of all dark frames."""
    if len(frames) == 0:
        raise ValueError("estimate_dark needs at least one dark frame")
    total = sum(float(_pixels(f).sum()) for f in frames)
    count = sum(_pixels(f).size for f in frames)
    return total / count


def compensate_illumination(frame: RawFrame, grid: LedGrid) -> RawFrame:
    """Divide a raw frame by its cos⁴θ illumination falloff."""
    if frame.preprocessed:
        raise ValueError(f"frame {frame.led} is already compensated")
    factor = falloff_factor(frame.led, grid)
    return frame.with_pixels(frame.pixels / factor, preprocessed=True, compensation=factor)


def subtract_dark(frame: RawFrame, dark: float) -> RawFrame:
    """Remove the dark offset and floor at zero.

    On a compensated frame the offset was divided along with the signal,
    so ``dark / compensation`` is subtracted.
    """
    if frame.dark_subtracted:
        raise ValueError(f"dark already subtracted from frame {frame.led}")
    level = dark / frame.compensation
    return frame.with_pixels(np.maximum(frame.pixels - level, 0.0), dark_subtracted=True)


def preprocess(frame: RawFrame, grid: LedGrid, dark: float) -> RawFrame:
    """Compensation followed by dark subtraction, as consumed by reconstruction."""
    if not frame.preprocessed:
        frame = compensate_illumination(frame, grid)
    return subtract_dark(frame, dark)


def poisson_sigma(frame, dark: float) -> float:
    """Half of the largest per-pixel Poisson deviation ``sqrt(I - I_D)``.

    Returns 0 when no pixel exceeds the dark level.
    """
    excess = _pixels(frame).max() - dark
    if excess <= 0:
        return 0.0
    return 0.5 * math.sqrt(excess)


def gaussian_sigma(bright_frames: Sequence, dark: float = 0.0) -> float:
    """Spatial standard deviation of the averaged object-free bright frame.

    The dark offset only shifts the mean, so it drops out.
    """
    if len(bright_frames) == 0:
        raise ValueError("gaussian_sigma needs calibration frames")
    if len(bright_frames) == 1:
        warnings.warn("gaussian sigma from a single frame is noisy", SingleFrameWarning, stacklevel=2)
    mean_frame = np.mean([_pixels(f) for f in bright_frames], axis=0)
    return float(np.std(mean_frame - dark))


def default_roi(shape: tuple[int, int], fraction: float = 0.5) -> Rect:
    """Centred rectangle spanning ``fraction`` of each dimension."""
    rows, cols = shape
    h = max(1, int(round(rows * fraction)))
    w = max(1, int(round(cols * fraction)))
    r0, c0 = (rows - h) // 2, (cols - w) // 2
    return (r0, c0, r0 + h, c0 + w)


def default_boxes(shape: tuple[int, int], fraction: float = 1 / 8, inset: int = 2) -> list[Rect]:
    """Four corner boxes of side ``fraction`` of the frame, inset from the border."""
    rows, cols = shape
    h = max(1, int(round(rows * fraction)))
    w = max(1, int(round(cols * fraction)))
    return [
        (inset, inset, inset + h, inset + w),
        (inset, cols - inset - w, inset + h, cols - inset),
        (rows - inset - h, inset, rows - inset, inset + w),
        (rows - inset - h, cols - inset - w, rows - inset, cols - inset),
    ]


def _check_rect(rect: Rect, shape):
    r0, c0, r1, c1 = rect
    if not (0 <= r0 < r1 <= shape[0] and 0 <= c0 < c1 <= shape[1]):
        raise ValueError(f"rectangle {rect} does not fit a frame of shape {shape}")


def rects_overlap(a: Rect, b: Rect) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def background_noise(frame, boxes: Sequence[Rect]) -> float:
    """Mean pixel value over the union of the background boxes."""
    if not boxes:
        raise ValueError("background_noise needs at least one box")
    px = _pixels(frame)
    mask = np.zeros(px.shape, dtype=bool)
    for box in boxes:
        _check_rect(box, px.shape)
        r0, c0, r1, c1 = box
        mask[r0:r1, c0:c1] = True
    return float(px[mask].mean())


def combined_noise(
    frame,
    model_kind: NoiseKind | str,
    dark: float,
    boxes: Sequence[Rect],
    bright_frames: Sequence | None = None,
    sigma_g: float | None = None,
) -> NoiseEstimate:
    """Noise level ``I_n``: the larger of the MLE-path and background estimates.

    For the Gaussian path either pass the calibration ``bright_frames`` or a
    precomputed ``sigma_g``. The noiseless kind uses the Poisson path.
    """
    kind = NoiseKind(model_kind)
    background = background_noise(frame, boxes)
    p_sigma = g_sigma = None
    no_signal = False
    if kind is NoiseKind.GAUSSIAN8:
        if sigma_g is None:
            if bright_frames is None:
                raise ValueError("gaussian path needs bright_frames or sigma_g")
            sigma_g = gaussian_sigma(bright_frames, dark)
        g_sigma = float(sigma_g)
        mle = g_sigma + dark
    else:
        p_sigma = poisson_sigma(frame, dark)
        no_signal = p_sigma == 0.0
        mle = p_sigma + dark
    if mle >= background:
        chosen, method = mle, Method.MLE
    else:
        chosen, method = background, Method.BACKGROUND
    return NoiseEstimate(dark, p_sigma, g_sigma, background, chosen, method, no_signal)


def roi_max(frame, roi: Rect) -> float:
    px = _pixels(frame)
    _check_rect(roi, px.shape)
    r0, c0, r1, c1 = roi
    return float(px[r0:r1, c0:c1].max())


def psnr_from_levels(i_max: float, i_n: float) -> float:
    """``20 log10((I_max - I_n) / I_n)`` with ±inf sentinels.

    ``+inf`` when the noise level is zero, ``-inf`` when the peak does not
    rise above the noise.
    """
    if i_n <= 0:
        return math.inf
    # compensated frames carry float round-off; equal levels mean no signal
    if i_max - i_n <= 1e-9 * i_n:
        return -math.inf
    return 20.0 * math.log10((i_max - i_n) / i_n)


def psnr(frame, roi: Rect, noise: NoiseEstimate) -> float:
    return psnr_from_levels(roi_max(frame, roi), noise.chosen)


def poisson_nll(measured, predicted, exact: bool = False) -> float:
    """Poisson negative log-likelihood of ``measured`` given ``predicted``.

    By default returns the Gaussian surrogate ``sum((I - Ī)² / (2 Ī))``
    (Poisson variance equals the mean); ``exact=True`` gives
    ``sum(-I log Ī + Ī + log I!)``.
    """
    meas = np.asarray(measured, dtype=float)
    pred = np.asarray(predicted, dtype=float)
    if meas.shape != pred.shape:
        raise ValueError(f"shape mismatch {meas.shape} vs {pred.shape}")
    if np.any(pred <= 0):
        raise ValueError("predicted intensities must be positive")
    if exact:
        return float(np.sum(-meas * np.log(pred) + pred + gammaln(meas + 1.0)))
    return float(np.sum((meas - pred) ** 2 / (2.0 * pred)))


def gaussian_sse(measured, predicted) -> float:
    meas = np.asarray(measured, dtype=float)
    pred = np.asarray(predicted, dtype=float)
    if meas.shape != pred.shape:
        raise ValueError(f"shape mismatch {meas.shape} vs {pred.shape}")
    return float(np.sum((meas - pred) ** 2))


class Flag(str, enum.Enum):
    OK = "ok"
    NO_NOISE = "no_noise"  # I_n == 0, PSNR is +inf
    PURE_NOISE = "pure_noise"  # I_max <= I_n, PSNR is -inf


@dataclass(frozen=True)
class SnrRecord:
    led: Led
    psnr_db: float
    noise: NoiseEstimate
    i_max: float
    roi: Rect
    illum_na: float = 0.0

    @property
    def flag(self) -> Flag:
        if self.psnr_db == math.inf:
            return Flag.NO_NOISE
        if self.psnr_db == -math.inf:
            return Flag.PURE_NOISE
        return Flag.OK


SNR_CSV_COLUMNS = (
    "row", "col", "illum_na", "psnr_db", "i_max", "i_n",
    "sigma_p", "sigma_g", "background", "method", "decision",
)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.6g}"
    return str(value)


@dataclass
class SnrReport:
    records: list[SnrRecord] = field(default_factory=list)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def by_led(self) -> dict[Led, SnrRecord]:
        return {r.led: r for r in self.records}

    def write_csv(self, path, decisions: dict[Led, str] | None = None):
        decisions = decisions or {}
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(SNR_CSV_COLUMNS)
            for rec in self.records:
                n = rec.noise
                writer.writerow([
                    rec.led[0], rec.led[1], _fmt(rec.illum_na), _fmt(rec.psnr_db),
                    _fmt(rec.i_max), _fmt(n.chosen), _fmt(n.poisson_sigma), _fmt(n.gaussian_sigma),
                    _fmt(n.background_level), n.method.value, decisions.get(rec.led, ""),
                ])


@dataclass(frozen=True)
class SnrScorer:
    """Scores raw frames: compensation, noise estimation and PSNR in one call.

    ``roi`` and ``boxes`` default to :func:`default_roi` and
    :func:`default_boxes` for the frame shape.
    """

    model_kind: NoiseKind = NoiseKind.POISSON16
    dark: float = 0.0
    sigma_g: float | None = None
    roi: Rect | None = None
    boxes: tuple[Rect, ...] | None = None
    roi_fraction: float = 0.5
    box_fraction: float = 1 / 8
    box_inset: int = 2

    def __post_init__(self):
        object.__setattr__(self, "model_kind", NoiseKind(self.model_kind))
        if self.model_kind is NoiseKind.GAUSSIAN8 and self.sigma_g is None:
            raise ValueError("a gaussian8 scorer needs sigma_g from calibration frames")

    @classmethod
    def calibrate(cls, model_kind, dark_frames, bright_frames=None, **kw) -> "SnrScorer":
        """Build a scorer from dark frames (and bright calibration frames for Gaussian)."""
        dark = estimate_dark(dark_frames)
        sigma_g = None
        if NoiseKind(model_kind) is NoiseKind.GAUSSIAN8:
            if not bright_frames:
                raise ValueError("gaussian calibration needs bright frames")
            sigma_g = gaussian_sigma(bright_frames, dark)
        return cls(model_kind, dark, sigma_g, **kw)

    def regions(self, shape) -> tuple[Rect, list[Rect]]:
        roi = self.roi or default_roi(shape, self.roi_fraction)
        boxes = list(self.boxes) if self.boxes else default_boxes(shape, self.box_fraction, self.box_inset)
        for box in boxes:
            if rects_overlap(box, roi):
                raise ValueError(f"background box {box} overlaps the ROI {roi}")
        return roi, boxes

    def score(self, frame: RawFrame, grid: LedGrid) -> SnrRecord:
        if not frame.preprocessed:
            frame = compensate_illumination(frame, grid)
        roi, boxes = self.regions(frame.shape)
        noise = combined_noise(frame, self.model_kind, self.dark, boxes, sigma_g=self.sigma_g)
        i_max = roi_max(frame, roi)
        return SnrRecord(frame.led, psnr_from_levels(i_max, noise.chosen), noise, i_max, roi,
                         illumination_na(frame.led, grid))

    def score_all(self, frames: Iterable[RawFrame], grid: LedGrid) -> SnrReport:
        return SnrReport([self.score(f, grid) for f in frames])
