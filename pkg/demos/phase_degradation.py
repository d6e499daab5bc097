"""What happens to phase when low-SNR outer rings are forced into the synthesis.

A pure-phase bar target is imaged with the dense 19x19 grid. One
reconstruction uses the frames above the automatic threshold, the other
uses all 361. The outer dark-field frames are mostly noise at this
photon budget; with pupil recovery enabled they corrupt the recovered
pupil and, through it, the object phase.

Writes 16-bit PGM previews of both phase maps next to the ground truth.

Run:  python demos/phase_degradation.py [outdir]
"""

import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from snrfpm import pgm
from snrfpm.acquisition import SimulatedSource
from snrfpm.config import AcquisitionOptions, ExperimentConfig, ObjectOptions
from snrfpm.pipeline import acquire, calibration_frames, load_truth, make_scorer, profile_contrasts, reconstruct
from snrfpm.recon import remove_global_phase, rmse
from snrfpm.targets import phase_window

out = Path(sys.argv[1] if len(sys.argv) > 1 else "phase_demo")
out.mkdir(parents=True, exist_ok=True)

cfg = ExperimentConfig(object=ObjectOptions(target="phase_bars"), acquisition=AcquisitionOptions(sparse=False))
cfg = replace(cfg, seed=0)
truth = load_truth(cfg)
dark, flat = calibration_frames(cfg)
scorer = make_scorer(cfg, dark, flat)
source = SimulatedSource(truth.field, cfg.leds, cfg.optics, cfg.noise, cfg.seed)

grid, plan, kept, summary = acquire(source, cfg, scorer)
print(f"threshold {plan.threshold_db:.1f} dB keeps {plan.frames_captured} of 361 frames, "
      f"synthetic NA {summary.synthetic_na:.3f}")

r0, c0, r1, c1 = phase_window(cfg.optics.hr_size)
inner = (slice(r0 + 8, r1 - 8), slice(c0 + 8, c1 - 8))
runs = {
    "stop": reconstruct(kept, grid, cfg, scorer.dark),
    "all": reconstruct([source.capture(led) for led in cfg.leds.all_leds()], cfg.leds, cfg, scorer.dark),
}
pgm.write_pgm(out / "phase_truth.pgm", pgm.phase_preview(truth.field.phase))
for name, res in runs.items():
    phase = remove_global_phase(res.object.phase, truth.field.phase, inner)
    contrasts = profile_contrasts(res.object, truth, truth.profiles)
    finest = [v for k, v in contrasts.items() if k.startswith("contrast_phase")][-2:]
    pupil_rms = float(np.std(np.angle(res.pupil.data[res.pupil.support])))
    print(f"{name:>4}: phase RMSE {rmse(phase[inner], truth.field.phase[inner]):.3f} rad, "
          f"finest-bar contrast {np.mean(finest):.3f}, pupil phase rms {pupil_rms:.2f} rad")
    pgm.write_pgm(out / f"phase_{name}.pgm", pgm.phase_preview(phase))
print(f"previews in {out}/")
