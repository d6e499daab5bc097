"""Adaptive acquisition: LED ordering, automatic threshold, keep/skip decisions
and sparse-grid design."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .forward import NoiseModel, RawFrame, simulate_frame
from .noise import SnrRecord, SnrReport, SnrScorer, _fmt
from .optics import (
    ComplexField,
    Led,
    LedGrid,
    OpticalConfig,
    Pupil,
    illumination_na,
    illumination_wavevector,
    make_pupil,
    overlap_rate,
    synthetic_na,
)
from . import pgm


class Decision(str, enum.Enum):
    KEPT = "Kept"
    SKIPPED_LOW_SNR = "SkippedLowSnr"
    SKIPPED_BY_TREND = "SkippedByTrend"


class EmptyAcquisitionError(ValueError):
    """No frame can be kept: the threshold excludes everything, or the edge ring is pure noise."""


class FrameSource(Protocol):
    def capture(self, led: Led) -> RawFrame: ...


class SimulatedSource:
    """Frame source backed by the forward model.

    Captures are cached, so asking for the same LED twice returns the same
    exposure; ``captured`` lists LEDs in first-capture order.
    """

    def __init__(self, obj: ComplexField, grid: LedGrid, config: OpticalConfig,
                 model: NoiseModel, seed: int, pupil: Pupil | None = None):
        self.obj = obj
        self.grid = grid
        self.config = config
        self.model = model
        self.seed = seed
        self.pupil = pupil if pupil is not None else make_pupil(config)
        self._cache: dict[Led, RawFrame] = {}
        self.captured: list[Led] = []

    def capture(self, led: Led) -> RawFrame:
        if led not in self._cache:
            self._cache[led] = simulate_frame(self.obj, led, self.grid, self.config,
                                              self.model, self.seed, self.pupil)
            self.captured.append(led)
        return self._cache[led]


class DirectorySource:
    """Frame source reading ``frame_r{row}_c{col}.pgm`` files from a directory."""

    def __init__(self, path):
        self.path = Path(path)
        self.captured: list[Led] = []
        self._cache: dict[Led, RawFrame] = {}

    def capture(self, led: Led) -> RawFrame:
        if led not in self._cache:
            fname = self.path / pgm.frame_name(led)
            if not fname.exists():
                raise FileNotFoundError(f"missing frame for LED {led}: {fname}")
            self._cache[led] = RawFrame(pgm.read_pgm(fname).astype(float), led,
                                        exposure_id=fname.name)
            self.captured.append(led)
        return self._cache[led]


def _polar_angle(led: Led, grid: LedGrid) -> float:
    sx, sy = illumination_wavevector(led, grid)
    return math.atan2(sy, sx) % (2 * math.pi)


def order_center_to_edge(grid: LedGrid) -> list[Led]:
    """Lit LEDs by ascending illumination NA, then polar angle, then row-major index."""
    if not grid.lit:
        raise ValueError("empty lit set")

    def key(led):
        return (round(illumination_na(led, grid), 12), round(_polar_angle(led, grid), 12), led)

    return sorted(grid.lit, key=key)


def ring_index(led: Led, grid: LedGrid) -> int:
    """Concentric ring number in units of the lit-set stride."""
    return int(round(math.hypot(*led) / grid.stride))


def edge_ring(grid: LedGrid) -> list[Led]:
    """LEDs on the boundary of the lit set (a 4-neighbour at ``stride`` is missing)."""
    s = grid.stride
    lit = grid.lit
    edge = [
        (r, c) for r, c in lit
        if any(n not in lit for n in ((r + s, c), (r - s, c), (r, c + s), (r, c - s)))
    ]
    if not edge and lit:
        edge = list(lit)  # single LED
    return sorted(edge)


def auto_threshold(source: FrameSource, grid: LedGrid, scorer: SnrScorer) -> float:
    """Threshold = best PSNR among the edge-ring frames."""
    scores = [scorer.score(source.capture(led), grid).psnr_db for led in edge_ring(grid)]
    finite_or_pos = [s for s in scores if s != -math.inf]
    if not finite_or_pos:
        raise EmptyAcquisitionError("edge ring is pure noise; shrink grid")
    return max(finite_or_pos)


@dataclass
class AcquisitionPlan:
    ordering: list[Led]
    threshold_db: float
    decisions: dict[Led, Decision]
    records: dict[Led, SnrRecord] = field(default_factory=dict)
    frames_total: int | None = None

    def __post_init__(self):
        if self.frames_total is None:
            self.frames_total = len(self.ordering)

    @property
    def kept(self) -> list[Led]:
        return [led for led in self.ordering if self.decisions[led] is Decision.KEPT]

    @property
    def frames_captured(self) -> int:
        return len(self.kept)

    @property
    def reduction_ratio(self) -> float:
        return 1.0 - self.frames_captured / self.frames_total

    def snr_report(self) -> SnrReport:
        return SnrReport([self.records[led] for led in self.ordering if led in self.records])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("row", "col", "order", "psnr_db", "decision"))
            for k, led in enumerate(self.ordering):
                rec = self.records.get(led)
                writer.writerow([led[0], led[1], k, _fmt(rec.psnr_db) if rec else "",
                                 self.decisions[led].value])


class _LazyScores:
    """Mapping LED -> SnrRecord that captures and scores on first access."""

    def __init__(self, source: FrameSource, grid: LedGrid, scorer: SnrScorer):
        self.source, self.grid, self.scorer = source, grid, scorer
        self.records: dict[Led, SnrRecord] = {}

    def __getitem__(self, led: Led) -> SnrRecord:
        if led not in self.records:
            self.records[led] = self.scorer.score(self.source.capture(led), self.grid)
        return self.records[led]


def decide(records, ordering: list[Led], threshold_db: float, grid: LedGrid,
           trend_stop: bool = False) -> dict[Led, Decision]:
    """Keep/skip decisions in acquisition order.

    ``records`` maps LED -> SnrRecord and is only indexed for LEDs that are
    actually reached. With ``trend_stop``, once every LED of a ring (ring
    index >= 1) has been skipped, all LEDs of strictly outer rings are marked
    SkippedByTrend without being scored.
    """
    rings = {led: ring_index(led, grid) for led in ordering}
    pending: dict[int, int] = {}
    for k in rings.values():
        pending[k] = pending.get(k, 0) + 1
    kept_in_ring = dict.fromkeys(pending, 0)
    stop_ring = None
    decisions = {}
    for led in ordering:
        k = rings[led]
        if stop_ring is not None and k > stop_ring:
            decisions[led] = Decision.SKIPPED_BY_TREND
            continue
        keep = records[led].psnr_db >= threshold_db
        decisions[led] = Decision.KEPT if keep else Decision.SKIPPED_LOW_SNR
        kept_in_ring[k] += keep
        pending[k] -= 1
        if trend_stop and stop_ring is None and k >= 1 and pending[k] == 0 and kept_in_ring[k] == 0:
            stop_ring = k
    return decisions


def adaptive_acquire(source: FrameSource, grid: LedGrid, scorer: SnrScorer, threshold_db: float,
                     trend_stop: bool = False, frames_total: int | None = None
                     ) -> tuple[AcquisitionPlan, list[RawFrame]]:
    """Capture, score and keep frames centre-to-edge.

    Frames skipped by the trend rule are never captured. Returned frames are
    the raw (unpreprocessed) kept frames in acquisition order.
    """
    if not math.isfinite(threshold_db):
        raise ValueError(f"threshold must be finite, got {threshold_db}")
    ordering = order_center_to_edge(grid)
    scores = _LazyScores(source, grid, scorer)
    decisions = decide(scores, ordering, threshold_db, grid, trend_stop)
    plan = AcquisitionPlan(ordering, threshold_db, decisions, scores.records, frames_total)
    if plan.frames_captured == 0:
        raise EmptyAcquisitionError("threshold excludes all data")
    return plan, [source.capture(led) for led in plan.kept]


def axis_overlap(grid: LedGrid, stride: int, config: OpticalConfig) -> float:
    """Mean pupil overlap of adjacent LEDs along the two central axes at ``stride``."""
    rates = []
    for half in (grid.half_rows, grid.half_cols):
        idx = np.arange(-(half // stride), half // stride + 1) * stride
        if idx.size < 2:
            continue
        if half == grid.half_rows:
            na = [illumination_wavevector((int(i), 0), grid)[0] for i in idx]
        else:
            na = [illumination_wavevector((0, int(i)), grid)[1] for i in idx]
        rates += [overlap_rate(abs(b - a), config.objective_na) for a, b in zip(na[:-1], na[1:])]
    if not rates:
        return 1.0
    return float(np.mean(rates))


def design_sparse_grid(grid: LedGrid, config: OpticalConfig, min_overlap: float) -> LedGrid:
    """Largest decimation of the LED grid whose axis overlap stays above ``min_overlap``.

    The returned grid keeps the original geometry and index space; its lit
    set holds the LEDs whose indices are multiples of the decimation factor,
    and ``stride`` records the factor.
    """
    if not 0.0 < min_overlap < 1.0:
        raise ValueError("min_overlap must lie in (0, 1)")
    max_stride = max(1, max(grid.half_rows, grid.half_cols))
    feasible = [d for d in range(1, max_stride + 1) if axis_overlap(grid, d, config) >= min_overlap]
    if 1 not in feasible:
        raise ValueError("objective NA too small for this grid")
    d = max(feasible)
    lit = [(r, c) for r, c in grid.lit if r % d == 0 and c % d == 0]
    return grid.with_lit(lit, stride=d)


@dataclass(frozen=True)
class AcquisitionSummary:
    frames_captured: int
    frames_total: int
    reduction_ratio: float
    synthetic_na: float
    threshold_db: float

    def as_text(self) -> str:
        return "".join(f"{k}={_fmt(v)}\n" for k, v in self.__dict__.items())


def report(plan: AcquisitionPlan, grid: LedGrid, config: OpticalConfig) -> AcquisitionSummary:
    kept = plan.kept
    na = synthetic_na(kept, grid, config) if kept else float("nan")
    return AcquisitionSummary(plan.frames_captured, plan.frames_total, plan.reduction_ratio,
                              na, plan.threshold_db)
