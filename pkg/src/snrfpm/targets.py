"""Synthetic resolution targets standing in for a USAF chart.

Each element is a triplet of bars, drawn once horizontally and once
vertically. Targets come out band-limited so that a finite LED set can in
principle recover them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.fft import fft2, fftshift, ifft2, ifftshift

from .optics import ComplexField, OpticalConfig


@dataclass(frozen=True)
class BarElement:
    """One three-bar element: top-left corner (HR px), bar period (HR px), orientation."""

    row: int
    col: int
    period: float
    vertical: bool

    @property
    def extent(self) -> tuple[int, int]:
        long_side = int(round(2.5 * self.period))
        short_side = int(round(2.5 * self.period))
        return (long_side, short_side) if self.vertical else (short_side, long_side)

    def profile_segment(self) -> tuple[tuple[float, float], tuple[float, float]]:
        """Segment crossing all three bars through the element centre."""
        h, w = self.extent
        rc, cc = self.row + h / 2, self.col + w / 2
        pad = 0.5 * self.period
        if self.vertical:
            return (rc, self.col - pad), (rc, self.col + w - 1 + pad)
        return (self.row - pad, cc), (self.row + h - 1 + pad, cc)


def draw_bars(size: int, elements, supersample: int = 4) -> np.ndarray:
    """Binary-ish bar mask in [0, 1] with area-weighted edges."""
    s = supersample
    fine = np.zeros((size * s, size * s))
    for el in elements:
        h, w = el.extent
        bar_w = el.period / 2
        for k in range(3):
            start = k * el.period
            if el.vertical:
                r0, r1 = el.row, el.row + h
                c0, c1 = el.col + start, el.col + start + bar_w
            else:
                r0, r1 = el.row + start, el.row + start + bar_w
                c0, c1 = el.col, el.col + w
            fine[int(round(r0 * s)):int(round(r1 * s)), int(round(c0 * s)):int(round(c1 * s))] = 1.0
    return fine.reshape(size, s, size, s).mean(axis=(1, 3))


def default_elements(size: int, periods, rng: np.random.Generator | None = None, jitter: int = 0):
    """Horizontal/vertical element pairs laid out on a row grid around the centre."""
    elements = []
    rows = []
    row = size // 4
    for p in periods:
        span = int(round(2.5 * p))
        rows.append((row, p, span))
        row += span + int(round(1.5 * p)) + 2
    total = row - size // 4
    widest = max(periods, default=0)
    if total > size or size // 2 + int(round(widest)) + int(round(2.5 * widest)) > size:
        raise ValueError(f"bar periods {tuple(periods)} do not fit a {size} px grid")
    shift = (size - total) // 2 - size // 4
    for r, p, span in rows:
        dr = dc = 0
        if rng is not None and jitter:
            dr, dc = (int(v) for v in rng.integers(-jitter, jitter + 1, size=2))
        left = size // 2 - span - int(round(p))
        right = size // 2 + int(round(p))
        elements.append(BarElement(r + shift + dr, left + dc, p, True))
        elements.append(BarElement(r + shift + dr, right + dc, p, False))
    return elements


def band_limit(field: np.ndarray, config: OpticalConfig, na_cut: float, rolloff: float = 0.0) -> np.ndarray:
    """Low-pass a complex HR field to spatial frequencies below ``na_cut / λ``.

    ``rolloff`` (in NA units) replaces the hard edge by a raised-cosine taper
    extending that far beyond ``na_cut``.
    """
    big = field.shape[0]
    k = np.arange(big) - big // 2
    kx, ky = np.meshgrid(k, k, indexing="ij")
    radius = np.hypot(kx, ky)
    cut = config.na_to_pixels(na_cut)
    if rolloff > 0:
        width = config.na_to_pixels(rolloff)
        t = np.clip((radius - cut) / width, 0.0, 1.0)
        filt = 0.5 * (1 + np.cos(np.pi * t))
    else:
        filt = (radius <= cut).astype(float)
    return ifft2(ifftshift(fftshift(fft2(field)) * filt))


def smooth_phase(size: int, rng: np.random.Generator, strength: float, correlation: float) -> np.ndarray:
    """Random smooth phase screen with Gaussian spectral envelope."""
    k = np.fft.fftfreq(size)
    kx, ky = np.meshgrid(k, k, indexing="ij")
    env = np.exp(-(kx**2 + ky**2) * (correlation**2) * 2 * np.pi**2)
    noise = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
    screen = np.real(ifft2(fft2(noise) * env))
    peak = np.max(np.abs(screen))
    return strength * screen / peak if peak > 0 else screen


@dataclass(frozen=True)
class BarScene:
    """Ground truth for a simulated experiment."""

    field: ComplexField
    elements: tuple[BarElement, ...]
    phase_elements: tuple[BarElement, ...]

    @property
    def amplitude(self) -> np.ndarray:
        return self.field.amplitude

    @property
    def phase(self) -> np.ndarray:
        return self.field.phase


def three_bar_scene(
    config: OpticalConfig,
    periods=(16.0, 12.0, 9.0, 7.0),
    phase_periods=(),
    background: float = 1.0,
    bar_amplitude: float = 0.4,
    bar_phase: float = 0.0,
    phase_bar: float = 1.0,
    phase_noise: float = 0.0,
    band_na: float | None = None,
    rolloff: float = 0.0,
    window: tuple[int, int, int, int] | None = None,
    window_amplitude: float = 1.0,
    seed: int | None = None,
    jitter: int = 0,
) -> BarScene:
    """Bar target as a complex transmission function on the HR grid.

    Amplitude bars (``periods``) modulate the transmission from
    ``background`` to ``bar_amplitude``. Optional pure-phase bars
    (``phase_periods``) add ``phase_bar`` radians inside ``window`` (a
    rectangle of transmission ``window_amplitude`` cut into the background).
    ``band_na`` band-limits the result.
    """
    size = config.hr_size
    rng = np.random.default_rng(seed) if seed is not None else None
    elements = default_elements(size, periods, rng, jitter)
    amp_bars = draw_bars(size, elements)
    amplitude = background + (bar_amplitude - background) * amp_bars
    phase = bar_phase * amp_bars
    ph_elements = []
    if phase_periods:
        ph_elements = default_elements(size, phase_periods, rng, jitter)
        r0, c0, r1, c1 = window if window is not None else (0, 0, size, size)
        amplitude[r0:r1, c0:c1] = window_amplitude
        phase[r0:r1, c0:c1] = 0.0
        phase = phase + phase_bar * draw_bars(size, ph_elements)
    if phase_noise and rng is not None:
        phase = phase + smooth_phase(size, rng, phase_noise, size / 16)
    field = amplitude * np.exp(1j * phase)
    if band_na is not None:
        field = band_limit(field, config, band_na, rolloff)
    return BarScene(ComplexField(field, config.hr_pitch), tuple(elements), tuple(ph_elements))


def phase_window(size: int) -> tuple[int, int, int, int]:
    """Central square (r0, c0, r1, c1) holding the phase bars of :func:`phase_bar_target`."""
    lo, hi = size * 5 // 16, size * 11 // 16
    return (lo, lo, hi, hi)


def _scaled(periods, size: int) -> tuple[float, ...]:
    """Bar periods laid out for a 256 px grid, rescaled to ``size``."""
    return tuple(p * size / 256 for p in periods)


def negative_bar_target(config: OpticalConfig, seed: int | None = None) -> BarScene:
    """Bright amplitude bars on a dim background with a soft band edge.

    Most of the energy sits along the two bar orientations, so dark-field
    frames carry signal near the axes and little in the grid corners.
    """
    return three_bar_scene(config, periods=_scaled((16.0, 12.0, 9.0, 7.0), config.hr_size),
                           background=0.1, bar_amplitude=1.0, band_na=0.2, rolloff=0.2, seed=seed)


def phase_bar_target(config: OpticalConfig, seed: int | None = None) -> BarScene:
    """Pure-phase bars (1 rad, periods 6 and 4 HR px at 256 px) in a clear window on a dim background."""
    return three_bar_scene(
        config,
        periods=(),
        phase_periods=_scaled((6.0, 4.0), config.hr_size),
        background=0.1,
        phase_bar=1.0,
        band_na=0.45,
        rolloff=0.1,
        window=phase_window(config.hr_size),
        seed=seed,
    )


TARGETS = {"negative_bars": negative_bar_target, "phase_bars": phase_bar_target}
