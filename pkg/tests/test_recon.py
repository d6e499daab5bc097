import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.fft import fft2, fftshift, ifft2, ifftshift

from conftest import smooth_object
from snrfpm.forward import RawFrame, simulate_noiseless
from snrfpm.optics import ComplexField, LedGrid, OpticalConfig, make_pupil, synthetic_na
from snrfpm.acquisition import design_sparse_grid
from snrfpm.recon import (
    Init,
    ReconConfig,
    amplitude_error,
    coverage_map,
    epry_reconstruct,
    fit_gain,
    line_profile_contrast,
    phase_profile_contrast,
    project_modulus,
    remove_global_phase,
    rmse,
)
from snrfpm.targets import three_bar_scene


def _frames(obj, grid, cfg):
    return [simulate_noiseless(obj, led, grid, cfg) for led in grid.all_leds()]


def _bandlimited_positive(cfg, seed=0):
    """Real positive object whose spectrum lies inside the on-axis pupil."""
    rng = np.random.default_rng(seed)
    big = cfg.hr_size
    k = np.arange(big) - big // 2
    kx, ky = np.meshgrid(k, k, indexing="ij")
    keep = np.hypot(kx, ky) <= 0.5 * make_pupil(cfg).radius_px
    spec = (rng.standard_normal((big, big)) + 1j * rng.standard_normal((big, big))) * keep
    pert = np.real(ifft2(ifftshift(spec)))
    pert *= 0.3 / np.abs(pert).max()
    data = ifft2(ifftshift(fftshift(fft2(1.0 + pert)) * keep))
    return ComplexField(np.real(data).astype(complex), cfg.hr_pitch)


def test_single_center_frame_fixpoint(small_config):
    cfg = small_config
    obj = _bandlimited_positive(cfg, seed=3)
    grid = LedGrid(1, 1)
    frame = simulate_noiseless(obj, (0, 0), grid, cfg)
    res = epry_reconstruct([frame], grid, cfg, ReconConfig(max_iterations=20, pupil_step=0, init=Init.FLAT))
    assert res.per_iteration_error[-1] < 1e-10
    u = cfg.upsample_factor
    np.testing.assert_allclose(res.object.amplitude[::u, ::u], np.sqrt(frame.pixels), rtol=1e-6, atol=1e-9)
    assert res.synthetic_na_used == pytest.approx(cfg.objective_na)


def test_pupil_unchanged_without_pupil_step(small_config):
    obj = smooth_object(128, small_config.hr_pitch, seed=1)
    grid = LedGrid(3, 3)
    res = epry_reconstruct(_frames(obj, grid, small_config), grid, small_config,
                           ReconConfig(max_iterations=3, pupil_step=0))
    np.testing.assert_array_equal(res.pupil.data, make_pupil(small_config).data)


def test_noiseless_dense_roundtrip(small_config):
    cfg = small_config
    grid = LedGrid(9, 9, 4.0, 67.5)
    scene = three_bar_scene(cfg, periods=(12, 9), bar_phase=0.5, phase_noise=0.5, band_na=0.3, seed=0)
    res = epry_reconstruct(_frames(scene.field, grid, cfg), grid, cfg, ReconConfig(max_iterations=30))
    assert amplitude_error(res.object.data, scene.field.data) < 1e-2
    assert res.per_iteration_error[-1] < res.per_iteration_error[0]
    assert res.object.data.shape == (128, 128)
    assert len(res.per_iteration_error) == res.iterations_run == 30


def test_center_to_edge_beats_random_order(small_config):
    cfg = small_config
    grid = LedGrid(7, 7, 4.0, 67.5)
    wins = 0
    for seed in range(5):
        obj = smooth_object(128, cfg.hr_pitch, seed=seed, amp_depth=0.5, phase_depth=1.0)
        frames = _frames(obj, grid, cfg)
        rc = ReconConfig(max_iterations=8)
        a = epry_reconstruct(frames, grid, cfg, rc).per_iteration_error[-1]
        order = [grid.all_leds()[i] for i in np.random.default_rng(seed).permutation(49)]
        b = epry_reconstruct(frames, grid, cfg, rc, order=order).per_iteration_error[-1]
        wins += a <= b
    assert wins >= 4


def test_modulus_projection_exact():
    rng = np.random.default_rng(0)
    field = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    amp = rng.uniform(0, 3, (16, 16))
    out = project_modulus(field, amp)
    np.testing.assert_allclose(np.abs(out), amp, rtol=1e-12)
    np.testing.assert_allclose(np.angle(out[amp > 0]), np.angle(field[amp > 0]), atol=1e-12)


def test_global_phase_gauge(small_config):
    obj = smooth_object(128, small_config.hr_pitch, seed=5)
    rotated = ComplexField(obj.data * np.exp(1j * 0.7), obj.pitch)
    grid = LedGrid(3, 3)
    for led in grid.all_leds():
        np.testing.assert_allclose(simulate_noiseless(obj, led, grid, small_config).pixels,
                                   simulate_noiseless(rotated, led, grid, small_config).pixels, atol=1e-12)
    aligned = remove_global_phase(rotated.phase, obj.phase)
    np.testing.assert_allclose(np.exp(1j * aligned), np.exp(1j * obj.phase), atol=1e-9)


def test_reconstruct_input_errors(small_config):
    grid = LedGrid(3, 3)
    good = RawFrame(np.ones((32, 32)), (0, 0))
    with pytest.raises(ValueError):
        epry_reconstruct([], grid, small_config)
    with pytest.raises(ValueError):
        epry_reconstruct([RawFrame(np.ones((16, 16)), (0, 0))], grid, small_config)
    with pytest.raises(ValueError):
        epry_reconstruct([RawFrame(np.ones((32, 32)), (5, 0))], grid, small_config)
    with pytest.raises(ValueError):
        epry_reconstruct([good, good], grid, small_config)
    with pytest.raises(ValueError):
        epry_reconstruct([RawFrame(-np.ones((32, 32)), (0, 0))], grid, small_config)
    with pytest.raises(ValueError):
        epry_reconstruct([good], grid, small_config, order=[(1, 0)])
    with pytest.raises(ValueError, match="illumination NA exceeds model band"):
        epry_reconstruct([RawFrame(np.ones((32, 32)), (9, 0))], LedGrid(19, 19, 4.0, 20.0), small_config)


def test_recon_config_validation():
    with pytest.raises(ValueError):
        ReconConfig(max_iterations=0)
    with pytest.raises(ValueError):
        ReconConfig(object_step=0)
    with pytest.raises(ValueError):
        ReconConfig(pupil_step=2.5)
    assert ReconConfig(init="flat").init is Init.FLAT


def test_coverage_center_only():
    cfg = OpticalConfig()
    pupil = make_pupil(cfg)
    cover = coverage_map([(0, 0)], LedGrid(1, 1), cfg)
    assert cover.sum() == pupil.support.sum()
    assert cover[128, 128] == 1 and cover.max() == 1


@pytest.mark.parametrize("leds", [[(0, 0)], [(0, 0), (1, 0), (2, 3)], "all"])
def test_coverage_mass(default_grid, leds):
    cfg = OpticalConfig()
    leds = default_grid.all_leds() if leds == "all" else leds
    assert coverage_map(leds, default_grid, cfg).sum() == len(leds) * make_pupil(cfg).support.sum()


def _annulus_filled(cover, cfg, na):
    big = cfg.hr_size
    k = np.arange(big) - big // 2
    kx, ky = np.meshgrid(k, k, indexing="ij")
    radius_px = na / cfg.wavelength * cfg.fov
    return np.all(cover[np.hypot(kx, ky) <= radius_px] >= 1)


def test_dense_and_sparse_coverage_have_no_holes(default_grid):
    cfg = OpticalConfig()
    full = coverage_map(default_grid.all_leds(), default_grid, cfg)
    # the 19x19 square fills the disc out to the axial LED NA plus the objective NA
    axial = synthetic_na([(9, 0)], default_grid, cfg)
    assert _annulus_filled(full, cfg, axial - 0.01)
    sparse = design_sparse_grid(default_grid, cfg, 0.3181)
    cover = coverage_map(sparse.lit, sparse, cfg)
    axial_sparse = synthetic_na([(8, 0)], sparse, cfg)
    assert _annulus_filled(cover, cfg, axial_sparse - 0.01)


def test_line_profile_contrast_examples():
    assert line_profile_contrast(np.full((8, 8), 3.0), ((4, 0), (4, 7))) == 0
    bars = np.tile([0.0, 0.0, 1.0, 1.0], (8, 4))
    assert line_profile_contrast(bars, ((4, 0), (4, 15))) == pytest.approx(1.0)
    assert line_profile_contrast(np.zeros((8, 8)), ((0, 0), (7, 7))) == 0
    with pytest.raises(ValueError):
        line_profile_contrast(bars, ((0, 0), (9, 0)))


def test_phase_contrast_uses_display_mapping():
    phase = np.zeros((8, 8))
    phase[:, ::2] = 1.0
    c = phase_profile_contrast(phase, ((4, 0), (4, 7)))
    assert c == pytest.approx(1.0 / (1.0 + 2 * math.pi))


def test_contrast_drops_when_na_below_bar_frequency():
    cfg = OpticalConfig(hr_size=128)
    grid = LedGrid(7, 7, 4.0, 67.5)
    scene = three_bar_scene(cfg, periods=(4.0,), band_na=None)
    el = scene.elements[0]
    seg = el.profile_segment()
    contrast = {}
    for name, leds in (("center", [(0, 0)]), ("all", grid.all_leds())):
        frames = [simulate_noiseless(scene.field, led, grid, cfg) for led in leds]
        res = epry_reconstruct(frames, grid, cfg, ReconConfig(max_iterations=15, pupil_step=0))
        contrast[name] = line_profile_contrast(res.object.amplitude, seg, linewidth=7)
    assert contrast["all"] > contrast["center"]


def test_rmse_examples():
    a = np.random.default_rng(0).standard_normal((8, 8))
    assert rmse(a, a) == 0
    assert rmse(a + 2.5, a) == pytest.approx(2.5)
    assert rmse(2 * a, a, normalize=True) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        rmse(a, a[:4])


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_rmse_matches_loop_oracle(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((8, 8)), rng.standard_normal((8, 8))
    total = 0.0
    for i in range(8):
        for j in range(8):
            total += (a[i, j] - b[i, j]) ** 2
    assert rmse(a, b) == pytest.approx(math.sqrt(total / 64), rel=1e-12)


def test_amplitude_error_ignores_gain():
    truth = np.random.default_rng(1).uniform(0.2, 1.0, (16, 16))
    assert amplitude_error(37.0 * truth, truth) < 1e-12
    assert fit_gain(np.zeros((2, 2)), truth[:2, :2]) == 0
