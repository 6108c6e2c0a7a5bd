"""Narrative tour of the library at a reduced truncation (runs in well under a minute).

Builds the geometry part of the model once, then evaluates the observer
concentration at three dispersion factors and sets each curve against the
two reference solutions.

    python demos/walkthrough.py
"""
import math

from cyltfm import (
    ChannelModel,
    CuboidObserver,
    CylinderGeometry,
    FlowField,
    ReleaseProfile,
    SimulationConfig,
    baseline_series,
    classify,
    fwhm,
    normalized_rmse,
    peak,
)
from cyltfm.regimes import diffusion_for_alpha

TAU = 100.0  # seconds per normalized time unit

geometry = CylinderGeometry(1.0, 10.0)
v0 = 50.0
release = ReleaseProfile.uniform()
rx = CuboidObserver((0.0, math.pi / 2, 2.0), name="rx")
config = SimulationConfig(T=2e-4, steps=900)

# Eigensystem and feedback matrices depend on the geometry only, so one build
# serves every diffusion coefficient below.
model = ChannelModel.build(geometry, (0, 10, 100))
print(f"modes: Q = {model.table.size}, build {model.timings['build']:.2f} s\n")

print(f"{'alpha':>7} {'regime':>14} {'peak [s]':>9} {'peak':>10} {'FWHM [s]':>9} {'vs flow':>8} {'vs T-A':>8}")
for alpha in (1e-3, 0.1, 2.0):
    D = diffusion_for_alpha(alpha, 1.0, v0, geometry.R0)
    tfm = model.run(release, [rx], D, v0, config)
    flow = baseline_series("flow-dominant", release, FlowField(v0), geometry, [rx], tfm.times)
    disp = baseline_series("dispersive", release, FlowField(v0), geometry, [rx], tfm.times, D=D)
    tp, vp = peak(tfm.times, tfm.values[0])
    width = fwhm(tfm.times, tfm.values[0])
    print(
        f"{alpha:7.0e} {classify(alpha):>14} {tp * TAU:9.3f} {vp:10.3e} {width * TAU:9.3f}"
        f" {normalized_rmse(tfm, flow):8.3f} {normalized_rmse(tfm, disp):8.3f}"
    )

# The last two columns are normalized RMSE against each reference curve:
# the advection solution fits at small alpha, Taylor-Aris at large alpha,
# and neither fits well in between.
