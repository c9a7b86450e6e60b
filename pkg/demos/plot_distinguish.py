"""
Do two shapes ever share a far field?
=====================================

Draw random wavenumbers and directions for a disk and a nearby ellipse and
record the relative far-field distance. Zero would mean the pair cannot be
told apart at that probe.
"""

from farscatter import (DirectionGrid, ExperimentConfig, Obstacle, circle,
                        distinguish_experiment, ellipse, stability_profile)

disk = Obstacle(circle(1.0))
oval = Obstacle(ellipse(1.0, 0.9))

cfg = ExperimentConfig(k_min=0.5, k_max=3.0, trials=40, seed=0, grid=DirectionGrid(64))
report = distinguish_experiment(disk, oval, cfg)

best = report.min_record
print("smallest delta %.3e at k = %.3f" % (best.delta, best.k))
for eps, p in stability_profile(report)["profile"]:
    print("P(delta < %.0e) = %.2f" % (eps, p))

###############################################################################
# Dirichlet eigen-wavenumbers of the disk in the sampled band.
for note in report.annotations:
    print("j_{%d,%d} = %.6f" % (note["n"], note["m"], note["k"]))
