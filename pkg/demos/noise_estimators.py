"""The three noise estimates behind each frame's PSNR.

For a handful of LEDs from centre to corner this prints the Poisson
half-max estimate, the corner-box background level, which of the two the
scorer kept and the resulting PSNR. A Gaussian 8-bit sensor is shown as
well, where sigma comes from averaged flat calibration frames.

Run:  python demos/noise_estimators.py
"""

from snrfpm.acquisition import SimulatedSource
from snrfpm.forward import NoiseModel, capture_dark_frames, capture_flat_frames
from snrfpm.noise import SnrScorer
from snrfpm.optics import LedGrid, OpticalConfig
from snrfpm.targets import negative_bar_target

cfg = OpticalConfig()
grid = LedGrid(19, 19, 4.0, 67.5)
scene = negative_bar_target(cfg)
shape = (cfg.lr_size, cfg.lr_size)
leds = [(0, 0), (2, 0), (4, 0), (6, 3), (9, 0), (9, 9)]

for model in (NoiseModel.poisson16(dark_shot=True), NoiseModel.gaussian8()):
    dark = capture_dark_frames(model, 4, seed=0, shape=shape)
    flats = capture_flat_frames(model, 8, seed=0, shape=shape)
    scorer = SnrScorer.calibrate(model.kind, dark, flats)
    source = SimulatedSource(scene.field, grid, cfg, model, seed=0)
    sigma_g = "-" if scorer.sigma_g is None else f"{scorer.sigma_g:.3f}"
    print(f"\n{model.kind.value}: dark {scorer.dark:.2f}, sigma_g {sigma_g}")
    print("  led        sigma_p    sigma_g   background     I_max     I_n  method      PSNR")
    for led in leds:
        rec = scorer.score(source.capture(led), grid)
        n = rec.noise
        sp = f"{n.poisson_sigma:9.2f}" if n.poisson_sigma is not None else "        -"
        sg = f"{n.gaussian_sigma:9.3f}" if n.gaussian_sigma is not None else "        -"
        print(f"  {str(led):9} {sp}  {sg}  {n.background_level:10.2f}  {rec.i_max:8.1f} {n.chosen:7.1f}"
              f"  {n.method.value:10}  {rec.psnr_db:6.1f} dB")
