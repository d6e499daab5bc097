"""Geometry and wave-optics primitives shared by simulation and reconstruction.

Units: wavelengths and pixel pitches in micrometres, LED pitch and height in
millimetres. LED indices are centred, so ``(0, 0)`` sits on the optical axis.
The first index runs along x (array axis 0), the second along y (axis 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

Led = tuple[int, int]


@dataclass(frozen=True)
class OpticalConfig:
    """Imaging optics and sampling of the virtual microscope.

    Attributes
    ----------
    wavelength : float
        Illumination wavelength in µm.
    objective_na : float
        Numerical aperture of the objective, in (0, 1).
    magnification : float
        Objective magnification.
    camera_pixel : float
        Physical sensor pixel pitch in µm.
    upsample_factor : int
        Ratio between the high-resolution and low-resolution grids.
    hr_size : int
        Side length of the square high-resolution object grid.
    """

    wavelength: float = 0.63113
    objective_na: float = 0.1
    magnification: float = 4.0
    camera_pixel: float = 6.5
    upsample_factor: int = 4
    hr_size: int = 256

    def __post_init__(self):
        if not 0.0 < self.objective_na < 1.0:
            raise ValueError(f"objective_na must lie in (0, 1), got {self.objective_na}")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        if self.magnification <= 0 or self.camera_pixel <= 0:
            raise ValueError("magnification and camera_pixel must be positive")
        if self.upsample_factor < 2:
            raise ValueError("upsample_factor must be at least 2")
        if self.hr_size % self.upsample_factor:
            raise ValueError(
                f"hr_size {self.hr_size} is not divisible by upsample_factor {self.upsample_factor}"
            )

    @property
    def lr_size(self) -> int:
        return self.hr_size // self.upsample_factor

    @property
    def lr_pitch(self) -> float:
        """Low-resolution pixel pitch referred to the object plane (µm)."""
        return self.camera_pixel / self.magnification

    @property
    def hr_pitch(self) -> float:
        return self.lr_pitch / self.upsample_factor

    @property
    def fov(self) -> float:
        """Field of view side length in µm."""
        return self.lr_size * self.lr_pitch

    @property
    def freq_pitch(self) -> float:
        """Spectral sample spacing (1/µm), identical on the LR and HR grids."""
        return 1.0 / self.fov

    def na_to_pixels(self, na: float) -> float:
        """Convert a numerical aperture into a radius in spectral pixels."""
        return na / self.wavelength * self.fov


@dataclass(frozen=True)
class LedGrid:
    """Planar LED matrix with centred indices.

    ``stride`` is the decimation step of the lit subset; it is 1 for a dense
    grid and ``d`` for grids produced by :func:`snrfpm.acquisition.design_sparse_grid`.
    ``lit=None`` means every LED of the matrix is lit.
    """

    rows: int = 19
    cols: int = 19
    pitch: float = 4.0
    height: float = 67.5
    center_offset: tuple[float, float] = (0.0, 0.0)
    lit: frozenset[Led] | None = None
    stride: int = 1

    def __post_init__(self):
        for n, name in ((self.rows, "rows"), (self.cols, "cols")):
            if n < 1 or n % 2 == 0:
                raise ValueError(f"{name} must be a positive odd integer, got {n}")
        if self.pitch <= 0 or self.height <= 0:
            raise ValueError("pitch and height must be positive")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.lit is None:
            object.__setattr__(self, "lit", frozenset(self.all_leds()))
        else:
            lit = frozenset((int(r), int(c)) for r, c in self.lit)
            bad = [led for led in lit if not self.contains(led)]
            if bad:
                raise ValueError(f"lit LEDs outside the grid: {sorted(bad)[:5]}")
            object.__setattr__(self, "lit", lit)

    @property
    def half_rows(self) -> int:
        return self.rows // 2

    @property
    def half_cols(self) -> int:
        return self.cols // 2

    @property
    def effective_pitch(self) -> float:
        return self.pitch * self.stride

    def all_leds(self) -> list[Led]:
        return [
            (r, c)
            for r in range(-self.half_rows, self.half_rows + 1)
            for c in range(-self.half_cols, self.half_cols + 1)
        ]

    def contains(self, led: Led) -> bool:
        r, c = led
        return abs(r) <= self.half_rows and abs(c) <= self.half_cols

    def position(self, led: Led) -> tuple[float, float]:
        """Lateral LED position in mm relative to the optical axis."""
        r, c = led
        return (r * self.pitch + self.center_offset[0], c * self.pitch + self.center_offset[1])

    def with_lit(self, lit: Iterable[Led], stride: int | None = None) -> "LedGrid":
        return LedGrid(
            self.rows,
            self.cols,
            self.pitch,
            self.height,
            self.center_offset,
            frozenset(lit),
            self.stride if stride is None else stride,
        )


@dataclass(frozen=True)
class ComplexField:
    """Square complex array with its sample pitch (µm, or 1/µm in frequency space)."""

    data: np.ndarray
    pitch: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError(f"ComplexField must be square 2D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("ComplexField contains non-finite entries")
        object.__setattr__(self, "data", data)

    @property
    def size(self) -> int:
        return self.data.shape[0]

    @property
    def amplitude(self) -> np.ndarray:
        return np.abs(self.data)

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.data)


@dataclass(frozen=True)
class Pupil:
    """Pupil function sampled on the centred (fftshifted) LR spectral grid."""

    field: ComplexField
    radius_px: float
    support: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.support is None:
            object.__setattr__(self, "support", np.abs(self.field.data) > 0)

    @property
    def data(self) -> np.ndarray:
        return self.field.data


def _check_led(led: Led, grid: LedGrid):
    if not grid.contains(led):
        raise ValueError(f"LED {led} is outside the {grid.rows}x{grid.cols} grid")


def illumination_wavevector(led: Led, grid: LedGrid) -> tuple[float, float]:
    """Direction sines (sinθx, sinθy) of the plane wave from one LED.

    Uses the exact geometry rather than the small-angle tangent, since the
    outer dark-field LEDs sit well beyond the paraxial regime.
    """
    _check_led(led, grid)
    x, y = grid.position(led)
    dist = math.sqrt(x * x + y * y + grid.height**2)
    return x / dist, y / dist


def illumination_na(led: Led, grid: LedGrid) -> float:
    sx, sy = illumination_wavevector(led, grid)
    return math.hypot(sx, sy)


def cos_theta(led: Led, grid: LedGrid) -> float:
    """Cosine of the polar illumination angle."""
    x, y = grid.position(led)
    return grid.height / math.sqrt(x * x + y * y + grid.height**2)


def synthetic_na(leds: Iterable[Led], grid: LedGrid, config: OpticalConfig) -> float:
    leds = list(leds)
    if not leds:
        raise ValueError("no illumination")
    return config.objective_na + max(illumination_na(led, grid) for led in leds)


def overlap_rate(na_step: float, objective_na: float) -> float:
    """Fractional area overlap of two pupil disks whose centres are ``na_step`` apart.

    Both disks have radius ``objective_na``; the lens area is divided by the
    area of one disk.
    """
    if na_step < 0:
        raise ValueError(f"na_step must be non-negative, got {na_step}")
    if objective_na <= 0:
        raise ValueError("objective_na must be positive")
    s = na_step / (2.0 * objective_na)
    if s >= 1.0:
        return 0.0
    return (2.0 / math.pi) * (math.acos(s) - s * math.sqrt(1.0 - s * s))


def spectral_shift(led: Led, grid: LedGrid, config: OpticalConfig) -> tuple[tuple[int, int], tuple[float, float]]:
    """Integer spectral shift (pixels) for an LED and the rounding residue.

    Returns ``((kx, ky), (rx, ry))`` with ``rx = exact_x - kx``.
    """
    sx, sy = illumination_wavevector(led, grid)
    ex, ey = config.na_to_pixels(sx), config.na_to_pixels(sy)
    kx, ky = int(round(ex)), int(round(ey))
    return (kx, ky), (ex - kx, ey - ky)


def check_in_band(shift: tuple[int, int], config: OpticalConfig):
    """Raise if the LR window centred at ``shift`` leaves the HR spectrum."""
    n, big = config.lr_size, config.hr_size
    lo = big // 2 - n // 2
    for k in shift:
        if lo + k < 0 or lo + k + n > big:
            raise ValueError("illumination NA exceeds model band")


def spectrum_window(shift: tuple[int, int], config: OpticalConfig) -> tuple[slice, slice]:
    """Slices selecting the LR spectral window from the centred HR spectrum."""
    check_in_band(shift, config)
    n, big = config.lr_size, config.hr_size
    lo = big // 2 - n // 2
    return (slice(lo + shift[0], lo + shift[0] + n), slice(lo + shift[1], lo + shift[1] + n))


def make_pupil(config: OpticalConfig) -> Pupil:
    """Ideal circular pupil on the centred LR spectral grid."""
    radius = config.na_to_pixels(config.objective_na)
    if radius < 2.0:
        raise ValueError(f"pupil under-resolved: radius {radius:.2f} px < 2 px")
    n = config.lr_size
    k = np.arange(n) - n // 2
    kx, ky = np.meshgrid(k, k, indexing="ij")
    mask = (kx**2 + ky**2) <= radius**2
    return Pupil(ComplexField(mask.astype(complex), config.freq_pitch), radius, mask)

