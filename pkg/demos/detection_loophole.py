"""Buying the singlet with lost detections.

Each particle carries a bit and a spin axis; the particle whose bit is
set stays silent unless its station's analyzer happens to point along
the axis. Conditioning on coincidences then reproduces the singlet law
perfectly, at the price of throwing pairs away:

  symmetric instruction set (two settings per side, eight axes): 25%
  one side always fires (four axes):                              50%
  analyzers anywhere on an N-cell grid of the sphere:             2/N
"""

import math

from lhvlab.protocols import run_detection_loophole

N = 500_000

for label, kwargs in (
    ("symmetric, 8 axes", dict(mode="symmetric")),
    ("asymmetric, 4 axes", dict(mode="asymmetric")),
    ("sphere grid, 40 cells", dict(mode="sphere", delta_omega=0.05 * 2 * math.pi)),
    ("sphere grid, 20 cells", dict(mode="sphere", delta_omega=0.1 * 2 * math.pi)),
):
    rep = run_detection_loophole(N, seed=7, **kwargs)
    print(f"{label:<24} efficiency {rep.efficiency:.4f} "
          f"(expected {rep.expected_efficiency:.4f}), "
          f"conditional law off the singlet by {rep.singlet_deviation:.4f}")

print("\nconclusion: verifying the detectors fire more than half the time "
      "closes this particular escape route")
