import numpy as np
import pytest

from snrfpm.optics import ComplexField, LedGrid, OpticalConfig


@pytest.fixture
def default_grid():
    return LedGrid(19, 19, 4.0, 67.5)


@pytest.fixture
def small_config():
    # 32x32 LR frames, pupil radius ~8 px
    return OpticalConfig(hr_size=128)


def smooth_object(size: int, pitch: float, seed: int = 0, amp_depth: float = 0.3, phase_depth: float = 0.5):
    """Random complex object with a few low/mid spatial frequencies."""
    rng = np.random.default_rng(seed)
    x = np.arange(size) / size
    X, Y = np.meshgrid(x, x, indexing="ij")
    amp = np.ones((size, size))
    phase = np.zeros((size, size))
    for _ in range(6):
        fx, fy = rng.integers(-12, 13, size=2)
        amp += amp_depth / 6 * np.cos(2 * np.pi * (fx * X + fy * Y) + rng.uniform(0, 2 * np.pi))
        phase += phase_depth / 6 * np.cos(2 * np.pi * (fy * X - fx * Y) + rng.uniform(0, 2 * np.pi))
    return ComplexField(amp * np.exp(1j * phase), pitch)
