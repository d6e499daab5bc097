"""Synthesis of raw low-resolution frames under single-LED illumination."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np
from numpy.fft import fft2, fftshift, ifft2, ifftshift

from .optics import (
    ComplexField,
    Led,
    LedGrid,
    OpticalConfig,
    Pupil,
    cos_theta,
    make_pupil,
    spectral_shift,
    spectrum_window,
)

# substream tags for the per-frame RNG
STREAM_DATA = 0
STREAM_DARK = 1
STREAM_FLAT = 2
_INDEX_OFFSET = 1 << 20


class NoiseKind(str, enum.Enum):
    POISSON16 = "poisson16"
    GAUSSIAN8 = "gaussian8"
    NOISELESS = "noiseless"


@dataclass(frozen=True)
class NoiseModel:
    """Sensor model.

    ``photon_scale`` maps unit intensity to expected counts for every kind;
    for Poisson16 it also sets the shot-noise level. When left as ``None``
    it defaults to 80 % of full scale, so a unit-intensity bright-field
    frame lands near 80 % of the sensor range.

    ``dark_shot`` makes the dark offset a Poisson variable of mean
    ``dark_mean`` (Poisson16 only) instead of an exact constant.

    ``stray_level`` is an additive constant present only in illuminated
    frames. With ``stray_corner > 0`` it is confined to a square patch of
    that fraction of the frame side in the top-left corner.
    """

    kind: NoiseKind = NoiseKind.POISSON16
    bit_depth: int = 16
    dark_mean: float = 101.0
    gaussian_sigma: float = 2.0
    photon_scale: float | None = None
    stray_level: float = 0.0
    stray_corner: float = 0.0
    dark_shot: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if self.bit_depth not in (8, 16):
            raise ValueError("bit_depth must be 8 or 16")
        if self.dark_mean < 0:
            raise ValueError("dark_mean must be non-negative")
        if self.kind is NoiseKind.GAUSSIAN8 and self.gaussian_sigma <= 0:
            raise ValueError("gaussian_sigma must be positive for gaussian8")
        if self.photon_scale is not None and self.photon_scale <= 0:
            raise ValueError("photon_scale must be positive")
        if self.stray_level < 0 or not 0 <= self.stray_corner <= 1:
            raise ValueError("invalid stray light settings")

    @property
    def full_scale(self) -> int:
        return (1 << self.bit_depth) - 1

    @property
    def scale(self) -> float:
        if self.photon_scale is None:
            return 0.8 * self.full_scale
        return self.photon_scale

    @classmethod
    def poisson16(cls, **kw) -> "NoiseModel":
        kw.setdefault("dark_mean", 101.0)
        return cls(kind=NoiseKind.POISSON16, bit_depth=16, **kw)

    @classmethod
    def gaussian8(cls, **kw) -> "NoiseModel":
        kw.setdefault("dark_mean", 0.2)
        return cls(kind=NoiseKind.GAUSSIAN8, bit_depth=8, **kw)

    @classmethod
    def noiseless(cls, bit_depth: int = 16, **kw) -> "NoiseModel":
        kw.setdefault("dark_mean", 0.0)
        return cls(kind=NoiseKind.NOISELESS, bit_depth=bit_depth, **kw)


@dataclass(frozen=True)
class RawFrame:
    """One intensity image tagged with its LED.

    ``compensation`` is the factor the pixels have been divided by (the
    cos⁴θ falloff once compensated); ``dark_subtracted`` records whether the
    dark offset has been removed.
    """

    pixels: np.ndarray
    led: Led
    preprocessed: bool = False
    exposure_id: str = ""
    compensation: float = 1.0
    dark_subtracted: bool = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def with_pixels(self, pixels: np.ndarray, **changes) -> "RawFrame":
        return replace(self, pixels=pixels, **changes)


def frame_rng(seed: int, led: Led, stream: int = STREAM_DATA, index: int = 0) -> np.random.Generator:
    """Independent generator per (seed, LED, stream, index).

    Keeps noise realisations independent of the order frames are captured in.
    """
    key = (stream, led[0] + _INDEX_OFFSET, led[1] + _INDEX_OFFSET, index)
    return np.random.default_rng(np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=key))


def lowres_field(spectrum: np.ndarray, shift, pupil: Pupil, config: OpticalConfig) -> np.ndarray:
    """LR complex field from the centred HR spectrum at a given integer shift."""
    win = spectrum_window(shift, config)
    u2 = config.upsample_factor**2
    return ifft2(ifftshift(spectrum[win] * pupil.data)) / u2


def object_spectrum(obj: ComplexField) -> np.ndarray:
    return fftshift(fft2(obj.data))


def simulate_noiseless(
    obj: ComplexField,
    led: Led,
    grid: LedGrid,
    config: OpticalConfig,
    pupil: Pupil | None = None,
) -> RawFrame:
    """Noise-free LR intensity for one LED (intensity units, no falloff)."""
    if obj.size != config.hr_size:
        raise ValueError(f"object size {obj.size} != hr_size {config.hr_size}")
    if pupil is None:
        pupil = make_pupil(config)
    shift, _ = spectral_shift(led, grid, config)
    field = lowres_field(object_spectrum(obj), shift, pupil, config)
    return RawFrame(np.abs(field) ** 2, led, exposure_id=f"r{led[0]}_c{led[1]}")


def falloff_factor(led: Led, grid: LedGrid) -> float:
    """LED irradiance falloff cos⁴θ relative to the on-axis LED."""
    return cos_theta(led, grid) ** 4


def apply_falloff(frame: RawFrame, grid: LedGrid) -> RawFrame:
    return frame.with_pixels(frame.pixels * falloff_factor(frame.led, grid))


def quantize(values: np.ndarray, bit_depth: int) -> np.ndarray:
    """Round half away from zero, then clip to the sensor range."""
    rounded = np.sign(values) * np.floor(np.abs(values) + 0.5)
    return np.clip(rounded, 0, (1 << bit_depth) - 1)


def _stray(shape, model: NoiseModel) -> np.ndarray | float:
    if model.stray_level == 0:
        return 0.0
    if model.stray_corner == 0:
        return model.stray_level
    patch = np.zeros(shape)
    m = max(1, int(round(model.stray_corner * shape[0])))
    patch[:m, :m] = model.stray_level
    return patch


def add_noise(
    frame: RawFrame,
    model: NoiseModel,
    seed: int,
    stream: int = STREAM_DATA,
    index: int = 0,
    illuminated: bool = True,
) -> RawFrame:
    """Sensor noise, dark offset and quantization.

    Input pixels are in intensity units; they are scaled by
    ``model.scale`` to counts before noise is drawn.
    """
    if np.any(frame.pixels < 0):
        raise ValueError("add_noise expects a non-negative frame")
    rng = frame_rng(seed, frame.led, stream, index)
    expected = frame.pixels * model.scale
    if model.kind is NoiseKind.POISSON16 and model.dark_shot:
        counts = rng.poisson(expected + model.dark_mean).astype(float)
    elif model.kind is NoiseKind.POISSON16:
        counts = rng.poisson(expected).astype(float) + model.dark_mean
    elif model.kind is NoiseKind.GAUSSIAN8:
        counts = expected + rng.normal(0.0, model.gaussian_sigma, size=expected.shape) + model.dark_mean
    else:
        counts = expected + model.dark_mean
    if illuminated:
        counts = counts + _stray(counts.shape, model)
    return frame.with_pixels(quantize(counts, model.bit_depth))


def capture_dark_frames(model: NoiseModel, count: int, seed: int, shape: tuple[int, int]) -> list[RawFrame]:
    """Frames with no object and no illumination: dark offset plus sensor noise."""
    if count < 1:
        raise ValueError("count must be >= 1")
    zero = np.zeros(shape)
    return [
        add_noise(RawFrame(zero, (0, 0), exposure_id=f"dark{k}"), model, seed, STREAM_DARK, k, illuminated=False)
        for k in range(count)
    ]


def capture_flat_frames(
    model: NoiseModel, count: int, seed: int, shape: tuple[int, int], level: float = 1.0
) -> list[RawFrame]:
    """Bright-field calibration frames with no object loaded (uniform intensity ``level``)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    flat = np.full(shape, float(level))
    return [
        add_noise(RawFrame(flat, (0, 0), exposure_id=f"flat{k}"), model, seed, STREAM_FLAT, k)
        for k in range(count)
    ]


def simulate_frame(
    obj: ComplexField,
    led: Led,
    grid: LedGrid,
    config: OpticalConfig,
    model: NoiseModel,
    seed: int,
    pupil: Pupil | None = None,
) -> RawFrame:
    """Full capture chain: forward model, cos⁴θ falloff, then sensor noise."""
    frame = simulate_noiseless(obj, led, grid, config, pupil)
    return add_noise(apply_falloff(frame, grid), model, seed)
