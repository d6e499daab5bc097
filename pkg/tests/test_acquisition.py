import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from snrfpm.acquisition import (
    AcquisitionPlan,
    Decision,
    DirectorySource,
    EmptyAcquisitionError,
    SimulatedSource,
    adaptive_acquire,
    auto_threshold,
    axis_overlap,
    decide,
    design_sparse_grid,
    edge_ring,
    order_center_to_edge,
    report,
    ring_index,
)
from snrfpm.forward import NoiseKind, NoiseModel, RawFrame
from snrfpm.noise import Method, NoiseEstimate, SnrRecord, SnrScorer
from snrfpm.optics import LedGrid, OpticalConfig, illumination_na, overlap_rate, illumination_wavevector
from snrfpm import pgm


def _record(led, db):
    est = NoiseEstimate(0.0, 0.0, None, 0.0, 1.0, Method.MLE)
    return SnrRecord(led, db, est, 1.0, (0, 0, 1, 1))


class TableSource:
    """Caching source of blank frames; records first captures."""

    def __init__(self):
        self.captured = []
        self._cache = {}

    def capture(self, led):
        if led not in self._cache:
            self._cache[led] = RawFrame(np.zeros((4, 4)), led)
            self.captured.append(led)
        return self._cache[led]


class TableScorer:
    """Scorer returning a fixed PSNR per LED."""

    def __init__(self, table, default=0.0):
        self.table = table
        self.default = default

    def score(self, frame, grid):
        return _record(frame.led, self.table.get(frame.led, self.default))


def test_order_trivial_grids():
    assert order_center_to_edge(LedGrid(1, 1)) == [(0, 0)]
    order = order_center_to_edge(LedGrid(3, 3))
    assert order[0] == (0, 0)
    assert set(order[1:5]) == {(1, 0), (-1, 0), (0, 1), (0, -1)}
    assert set(order[5:]) == {(1, 1), (1, -1), (-1, 1), (-1, -1)}


def test_order_full_grid(default_grid):
    order = order_center_to_edge(default_grid)
    assert sorted(order) == sorted(default_grid.all_leds())
    assert abs(order[-1][0]) == 9 and abs(order[-1][1]) == 9
    nas = [illumination_na(led, default_grid) for led in order]
    assert all(a <= b + 1e-12 for a, b in zip(nas, nas[1:]))
    assert order == order_center_to_edge(default_grid)


def test_order_empty_rejected():
    with pytest.raises(ValueError):
        order_center_to_edge(LedGrid(3, 3, lit=[]))


def test_edge_ring():
    ring = edge_ring(LedGrid(5, 5))
    assert len(ring) == 16
    assert all(max(abs(r), abs(c)) == 2 for r, c in ring)
    assert edge_ring(LedGrid(1, 1)) == [(0, 0)]
    sparse = LedGrid(19, 19).with_lit([(r, c) for r in range(-8, 9, 2) for c in range(-8, 9, 2)], stride=2)
    assert len(edge_ring(sparse)) == 32
    assert ring_index((8, 0), sparse) == 4


def test_auto_threshold_takes_edge_max():
    grid = LedGrid(3, 3)
    ring = edge_ring(grid)
    table = dict(zip(ring, [10.8, 19.0, 15.2] + [1.0] * (len(ring) - 3)))
    table[(0, 0)] = 99.0
    source = TableSource()
    assert auto_threshold(source, grid, TableScorer(table)) == 19.0
    assert (0, 0) not in source.captured
    assert sorted(source.captured) == ring


def test_auto_threshold_single_led():
    assert auto_threshold(TableSource(), LedGrid(1, 1), TableScorer({(0, 0): 7.5})) == 7.5


def test_auto_threshold_pure_noise_edge():
    with pytest.raises(EmptyAcquisitionError, match="edge ring is pure noise"):
        auto_threshold(TableSource(), LedGrid(3, 3), TableScorer({}, default=-math.inf))


def test_decision_examples():
    grid = LedGrid(3, 3)
    table = {led: 10.8 for led in grid.all_leds()}
    table[(0, 0)] = 19.6
    plan, frames = adaptive_acquire(TableSource(), grid, TableScorer(table), 19.0)
    assert plan.kept == [(0, 0)] and len(frames) == 1
    assert plan.decisions[(1, 0)] is Decision.SKIPPED_LOW_SNR
    table[(0, 0)] = 19.0
    plan, _ = adaptive_acquire(TableSource(), grid, TableScorer(table), 19.0)
    assert plan.kept == [(0, 0)]


def test_zero_kept_raises():
    with pytest.raises(EmptyAcquisitionError, match="threshold excludes all data"):
        adaptive_acquire(TableSource(), LedGrid(3, 3), TableScorer({}, default=1.0), 50.0)
    with pytest.raises(ValueError):
        adaptive_acquire(TableSource(), LedGrid(3, 3), TableScorer({}), math.nan)


def test_noiseless_low_threshold_keeps_all(small_config):
    from conftest import smooth_object

    grid = LedGrid(5, 5)
    obj = smooth_object(128, small_config.hr_pitch, seed=2)
    model = NoiseModel.noiseless(photon_scale=1000.0)
    src = SimulatedSource(obj, grid, small_config, model, seed=0)
    scorer = SnrScorer(NoiseKind.NOISELESS, dark=0.0)
    plan, frames = adaptive_acquire(src, grid, scorer, -1e9)
    assert plan.frames_captured == 25 and plan.reduction_ratio == 0
    summary = report(plan, grid, small_config)
    assert summary.reduction_ratio == 0 and summary.frames_total == 25


def test_trend_stop_skips_outer_rings_without_capture():
    grid = LedGrid(7, 7)
    table = {led: (30.0 if ring_index(led, grid) <= 1 else 5.0) for led in grid.all_leds()}
    source = TableSource()
    plan, _ = adaptive_acquire(source, grid, TableScorer(table), 20.0, trend_stop=True)
    trend = [led for led, d in plan.decisions.items() if d is Decision.SKIPPED_BY_TREND]
    assert trend and all(ring_index(led, grid) >= 3 for led in trend)
    assert not set(trend) & set(source.captured)
    assert all(ring_index(led, grid) == 2 for led, d in plan.decisions.items()
               if d is Decision.SKIPPED_LOW_SNR)


def test_edge_captures_are_reused():
    grid = LedGrid(3, 3)
    source = TableSource()
    scorer = TableScorer({}, default=25.0)
    th = auto_threshold(source, grid, scorer)
    assert len(source.captured) == 8
    plan, frames = adaptive_acquire(source, grid, scorer, th)
    assert plan.frames_captured == 9
    assert len(source.captured) == 9
    assert frames[-1] is source.capture(plan.kept[-1])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-20, 60), min_size=49, max_size=49), st.floats(-20, 60), st.floats(-20, 60))
def test_decision_invariants(values, t1, t2):
    grid = LedGrid(7, 7)
    order = order_center_to_edge(grid)
    records = {led: _record(led, v) for led, v in zip(order, values)}
    lo, hi = sorted((t1, t2))
    d_lo = decide(records, order, lo, grid)
    d_hi = decide(records, order, hi, grid)
    assert set(d_lo) == set(order) == set(grid.all_leds())
    kept_lo = {led for led, d in d_lo.items() if d is Decision.KEPT}
    kept_hi = {led for led, d in d_hi.items() if d is Decision.KEPT}
    assert kept_hi <= kept_lo
    assert kept_lo == {led for led in order if records[led].psnr_db >= lo}
    trend = decide(records, order, lo, grid, trend_stop=True)
    rings = {}
    for led in order:
        rings.setdefault(ring_index(led, grid), []).append(led)
    full_skip = any(k >= 1 and all(led not in kept_lo for led in leds) for k, leds in rings.items())
    if not full_skip:
        assert trend == d_lo
    kept_trend = {led for led, d in trend.items() if d is Decision.KEPT}
    assert kept_trend <= kept_lo


def test_plan_csv(tmp_path):
    grid = LedGrid(3, 3)
    table = {led: 10.0 for led in grid.all_leds()}
    table[(0, 0)] = 30.0
    plan, _ = adaptive_acquire(TableSource(), grid, TableScorer(table), 20.0)
    plan.write_csv(tmp_path / "plan.csv")
    rows = list(csv.reader(open(tmp_path / "plan.csv")))
    assert rows[0] == ["row", "col", "order", "psnr_db", "decision"]
    assert rows[1] == ["0", "0", "0", "30", "Kept"]
    assert len(rows) == 10 and {r[4] for r in rows[2:]} == {"SkippedLowSnr"}


def test_report_examples(default_grid):
    cfg = OpticalConfig()
    order = order_center_to_edge(default_grid)
    decisions = {led: Decision.KEPT if k < 25 else Decision.SKIPPED_LOW_SNR for k, led in enumerate(order)}
    s = report(AcquisitionPlan(order, 19.0, decisions), default_grid, cfg)
    assert s.frames_total == 361 and s.frames_captured == 25
    assert s.reduction_ratio == pytest.approx(0.931, abs=5e-4)
    assert s.synthetic_na == pytest.approx(cfg.objective_na + illumination_na(order[24], default_grid))
    grid15 = LedGrid(15, 15)
    order15 = order_center_to_edge(grid15)
    dec15 = {led: Decision.KEPT if k < 21 else Decision.SKIPPED_LOW_SNR for k, led in enumerate(order15)}
    assert report(AcquisitionPlan(order15, 19.0, dec15), grid15, cfg).reduction_ratio == pytest.approx(0.907, abs=5e-4)
    assert "reduction_ratio=" in s.as_text()


def test_sparse_grid_design_default(default_grid):
    cfg = OpticalConfig()
    sparse = design_sparse_grid(default_grid, cfg, 0.3181)
    assert sparse.stride == 2
    assert len(sparse.lit) == 81
    assert axis_overlap(default_grid, 2, cfg) >= 0.3181 > axis_overlap(default_grid, 3, cfg)
    assert axis_overlap(default_grid, 1, cfg) == pytest.approx(0.671, abs=1e-3)


def test_sparse_grid_strict_overlap():
    with pytest.raises(ValueError, match="objective NA too small"):
        design_sparse_grid(LedGrid(19, 19, 4.0, 67.5), OpticalConfig(), 0.9)
    assert design_sparse_grid(LedGrid(19, 19, 4.0, 67.5), OpticalConfig(objective_na=0.4), 0.9).stride == 1


def test_sparse_grid_tiny_overlap_bounded_by_tangency(default_grid):
    cfg = OpticalConfig()
    d = design_sparse_grid(default_grid, cfg, 1e-6).stride
    # outer steps shrink in sin(theta); the tightest pair must still overlap
    idx = range(-(9 // d) * d, (9 // d) * d + 1, d)
    sx = [illumination_wavevector((i, 0), default_grid)[0] for i in idx]
    assert min(np.diff(sx)) < 2 * cfg.objective_na
    assert axis_overlap(default_grid, d + 1, cfg) < 1e-6
    with pytest.raises(ValueError):
        design_sparse_grid(default_grid, cfg, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.6), st.floats(0.06, 0.3), st.floats(2.0, 8.0))
def test_sparse_grid_satisfies_constraint(min_overlap, na, pitch):
    grid = LedGrid(15, 15, pitch, 70.0)
    cfg = OpticalConfig(objective_na=na)
    try:
        sparse = design_sparse_grid(grid, cfg, min_overlap)
    except ValueError:
        assert axis_overlap(grid, 1, cfg) < min_overlap
        return
    d = sparse.stride
    assert axis_overlap(grid, d, cfg) >= min_overlap
    steps = [illumination_wavevector((i + d, 0), grid)[0] - illumination_wavevector((i, 0), grid)[0]
             for i in range(-(7 // d) * d, (7 // d) * d, d)]
    rates = [overlap_rate(s, na) for s in steps] * 2
    assert np.mean(rates) >= min_overlap
    assert all(r % d == 0 and c % d == 0 for r, c in sparse.lit)


def test_directory_source(tmp_path):
    img = np.arange(16, dtype=np.uint16).reshape(4, 4)
    pgm.write_pgm(tmp_path / pgm.frame_name((1, -2)), img)
    src = DirectorySource(tmp_path)
    a = src.capture((1, -2))
    assert a is src.capture((1, -2))
    np.testing.assert_array_equal(a.pixels, img)
    with pytest.raises(FileNotFoundError):
        src.capture((0, 0))
