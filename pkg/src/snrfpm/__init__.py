"""Virtual Fourier ptychographic microscope with SNR-driven adaptive acquisition.

Submodules
----------
optics       illumination geometry, pupil, spectral shifts, overlap rate
forward      frame synthesis: forward model, falloff, sensor noise
noise        dark/Poisson/Gaussian/background noise estimates and PSNR scoring
acquisition  LED ordering, automatic threshold, keep/skip decisions, sparse grids
recon        EPRY reconstruction and image-quality metrics
targets      synthetic bar targets
pgm          PGM and float32 image files
config       INI experiment configuration
pipeline     end-to-end stages shared by the CLI and in-process runs
cli          ``snrfpm`` command line
"""

from .acquisition import (
    AcquisitionPlan,
    Decision,
    EmptyAcquisitionError,
    adaptive_acquire,
    auto_threshold,
    design_sparse_grid,
    order_center_to_edge,
    report,
)
from .forward import NoiseKind, NoiseModel, RawFrame, add_noise, apply_falloff, simulate_noiseless
from .noise import SnrScorer, combined_noise, psnr
from .optics import (
    ComplexField,
    LedGrid,
    OpticalConfig,
    illumination_na,
    illumination_wavevector,
    make_pupil,
    overlap_rate,
    synthetic_na,
)
from .recon import ReconConfig, ReconResult, epry_reconstruct, line_profile_contrast, rmse

__all__ = [
    "AcquisitionPlan", "ComplexField", "Decision", "EmptyAcquisitionError", "LedGrid", "NoiseKind",
    "NoiseModel", "OpticalConfig", "RawFrame", "ReconConfig", "ReconResult", "SnrScorer",
    "adaptive_acquire", "add_noise", "apply_falloff", "auto_threshold", "combined_noise",
    "design_sparse_grid", "epry_reconstruct", "illumination_na", "illumination_wavevector",
    "line_profile_contrast", "make_pupil", "order_center_to_edge", "overlap_rate", "psnr",
    "report", "rmse", "simulate_noiseless", "synthetic_na",
]
