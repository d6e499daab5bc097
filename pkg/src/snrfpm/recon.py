"""EPRY-FPM reconstruction and image-quality metrics."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.fft import fft2, fftshift, ifft2, ifftshift
from skimage.measure import profile_line

from .acquisition import order_center_to_edge
from .forward import RawFrame
from .optics import (
    ComplexField,
    Led,
    LedGrid,
    OpticalConfig,
    Pupil,
    make_pupil,
    spectral_shift,
    spectrum_window,
    synthetic_na,
)


class Init(str, enum.Enum):
    UPSAMPLED_CENTER = "upsampled_center"
    FLAT = "flat"


@dataclass(frozen=True)
class ReconConfig:
    max_iterations: int = 30
    object_step: float = 1.0
    pupil_step: float = 1.0
    init: Init = Init.UPSAMPLED_CENTER
    pupil_cap: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "init", Init(self.init))
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.object_step <= 2:
            raise ValueError("object_step must lie in (0, 2]")
        # pupil_step = 0 freezes the pupil
        if not 0 <= self.pupil_step <= 2:
            raise ValueError("pupil_step must lie in [0, 2]")
        if self.pupil_cap <= 0:
            raise ValueError("pupil_cap must be positive")


@dataclass
class ReconResult:
    object: ComplexField
    pupil: Pupil
    iterations_run: int
    per_iteration_error: list[float]
    synthetic_na_used: float
    shift_residues: dict[Led, tuple[float, float]] = field(default_factory=dict)
    spectrum: np.ndarray | None = field(default=None, repr=False)


def project_modulus(field_lr: np.ndarray, amplitude: np.ndarray) -> np.ndarray:
    """Replace the modulus of ``field_lr`` by ``amplitude``, keeping the phase.

    Where the field vanishes the phase is taken as zero.
    """
    return amplitude * np.exp(1j * np.angle(field_lr))


def _initial_spectrum(frames: list[RawFrame], config: OpticalConfig, init: Init) -> np.ndarray:
    n, big, u = config.lr_size, config.hr_size, config.upsample_factor
    amp = np.sqrt(np.maximum(frames[0].pixels, 0.0))
    spectrum = np.zeros((big, big), dtype=complex)
    if init is Init.FLAT:
        spectrum[big // 2, big // 2] = amp.mean() * big * big
        return spectrum
    lo = big // 2 - n // 2
    spectrum[lo:lo + n, lo:lo + n] = fftshift(fft2(amp)) * u * u
    return spectrum


def epry_reconstruct(
    frames: Sequence[RawFrame],
    grid: LedGrid,
    config: OpticalConfig,
    rcfg: ReconConfig = ReconConfig(),
    pupil: Pupil | None = None,
    order: Sequence[Led] | None = None,
) -> ReconResult:
    """Jointly recover the HR object spectrum and the pupil from LED-tagged frames.

    Frames must be preprocessed intensities (compensated, dark-subtracted,
    non-negative). They are visited centre-to-edge in every sweep unless
    ``order`` (a permutation of the frame LEDs) says otherwise. The error
    trace holds, per sweep, the summed squared modulus mismatch measured
    before each update, divided by the summed measured intensity.
    """
    frames = list(frames)
    if not frames:
        raise ValueError("epry_reconstruct needs at least one frame")
    n = config.lr_size
    by_led: dict[Led, RawFrame] = {}
    for f in frames:
        if f.shape != (n, n):
            raise ValueError(f"frame {f.led} has shape {f.shape}, expected {(n, n)}")
        if not grid.contains(f.led):
            raise ValueError(f"frame LED {f.led} is outside the grid")
        if f.led in by_led:
            raise ValueError(f"duplicate frame for LED {f.led}")
        if np.any(f.pixels < 0):
            raise ValueError(f"frame {f.led} has negative pixels; subtract dark with flooring first")
        by_led[f.led] = f
    if order is None:
        order = order_center_to_edge(grid.with_lit(by_led))
    elif sorted(order) != sorted(by_led):
        raise ValueError("order must be a permutation of the frame LEDs")
    frames = [by_led[tuple(led)] for led in order]

    if pupil is None:
        pupil = make_pupil(config)
    support = pupil.support
    P = pupil.data.copy()
    u2 = config.upsample_factor**2

    windows, residues = [], {}
    for f in frames:
        shift, residue = spectral_shift(f.led, grid, config)
        windows.append(spectrum_window(shift, config))
        residues[f.led] = residue
    amps = [np.sqrt(f.pixels) for f in frames]
    energy = sum(float(f.pixels.sum()) for f in frames) or 1.0

    spectrum = _initial_spectrum(frames, config, rcfg.init)
    alpha, beta = rcfg.object_step, rcfg.pupil_step
    errors = []
    for _ in range(rcfg.max_iterations):
        err = 0.0
        for win, amp in zip(windows, amps):
            sub = spectrum[win].copy()
            psi = sub * P
            lr = ifft2(ifftshift(psi)) / u2
            err += float(np.sum((np.abs(lr) - amp) ** 2))
            delta = fftshift(fft2(project_modulus(lr, amp))) * u2 - psi
            p_max = np.max(np.abs(P) ** 2)
            if p_max > 0:
                spectrum[win] = sub + alpha * np.conj(P) / p_max * delta
            if beta > 0:
                o_max = np.max(np.abs(sub) ** 2)
                if o_max > 0:
                    P = P + beta * np.conj(sub) / o_max * delta
                    P = np.where(support, P, 0)
                    mag = np.abs(P)
                    over = mag > rcfg.pupil_cap
                    P[over] *= rcfg.pupil_cap / mag[over]
        errors.append(err / energy)

    obj = ComplexField(ifft2(ifftshift(spectrum)), config.hr_pitch)
    rec_pupil = Pupil(ComplexField(P, config.freq_pitch), pupil.radius_px, support)
    return ReconResult(obj, rec_pupil, rcfg.max_iterations, errors,
                       synthetic_na(by_led, grid, config), residues, spectrum)


def coverage_map(leds, grid: LedGrid, config: OpticalConfig, pupil: Pupil | None = None) -> np.ndarray:
    """Number of pupil disks covering each sample of the centred HR spectrum."""
    if pupil is None:
        pupil = make_pupil(config)
    big = config.hr_size
    cover = np.zeros((big, big), dtype=np.int32)
    for led in leds:
        shift, _ = spectral_shift(led, grid, config)
        cover[spectrum_window(shift, config)] += pupil.support
    return cover


def line_profile_contrast(image: np.ndarray, segment, linewidth: int = 1) -> float:
    """Michelson contrast ``(max - min) / (max + min)`` along a pixel segment.

    ``segment`` is ``((r0, c0), (r1, c1))``. With ``linewidth > 1`` the
    profile is averaged across that many parallel lines. Returns 0 when
    ``max + min`` is zero.
    """
    img = np.asarray(image, dtype=float)
    (r0, c0), (r1, c1) = segment
    for r, c in ((r0, c0), (r1, c1)):
        if not (0 <= r <= img.shape[0] - 1 and 0 <= c <= img.shape[1] - 1):
            raise ValueError(f"segment endpoint {(r, c)} lies outside the image")
    prof = profile_line(img, (r0, c0), (r1, c1), linewidth=linewidth, order=1,
                        mode="nearest", reduce_func=np.mean)
    hi, lo = float(prof.max()), float(prof.min())
    if hi + lo == 0:
        return 0.0
    return (hi - lo) / (hi + lo)


def rmse(a: np.ndarray, b: np.ndarray, normalize: bool = False) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    err = math.sqrt(float(np.mean((a - b) ** 2)))
    if normalize:
        ref = math.sqrt(float(np.mean(b**2)))
        return err / ref if ref > 0 else math.inf
    return err


def fit_gain(estimate: np.ndarray, reference: np.ndarray) -> float:
    """Least-squares scalar ``g`` minimising ``|g * estimate - reference|``."""
    est = np.asarray(estimate, dtype=float)
    den = float(np.sum(est * est))
    return float(np.sum(est * reference)) / den if den > 0 else 0.0


def amplitude_error(recon: np.ndarray, truth: np.ndarray, window=None) -> float:
    """Normalized amplitude RMSE after fitting the unknown intensity gain.

    Reconstructions are in sensor units (square-root counts), so the gain
    between them and a unit-normalized ground truth is fitted first.
    """
    r, t = np.abs(recon), np.abs(truth)
    if window is not None:
        r, t = r[window], t[window]
    return rmse(fit_gain(r, t) * r, t, normalize=True)


def remove_global_phase(phase: np.ndarray, reference: np.ndarray, window=None) -> np.ndarray:
    """Shift ``phase`` by the constant that best aligns it with ``reference``.

    The offset is the circular mean of the difference over ``window``; the
    result is wrapped to [-pi, pi).
    """
    diff = np.asarray(phase) - np.asarray(reference)
    sel = diff if window is None else diff[window]
    offset = float(np.angle(np.mean(np.exp(1j * sel))))
    return np.angle(np.exp(1j * (np.asarray(phase) - offset)))


def phase_profile_contrast(phase: np.ndarray, segment, linewidth: int = 1) -> float:
    """Michelson contrast of a phase image as displayed, i.e. mapped from [-pi, pi] to [0, 2 pi]."""
    return line_profile_contrast(np.asarray(phase, dtype=float) + math.pi, segment, linewidth)
