"""
Recovering shape and pose from one measurement
==============================================

Precompute far-field matrices for a small catalog, simulate a single noisy
measurement of a rotated and shifted kite, and identify it.
"""

import numpy as np

from farscatter import (IdentifyConfig, IncidentPlaneWave, Obstacle, RigidMotion, add_noise,
                        far_field, identify, kite, precompute, result_to_text,
                        separability_check, shipped_catalog, solve)

# catalog: disk, ellipse and kite, all sound-hard, at k = 2
catalog = precompute(shipped_catalog(), 2.0)
print(separability_check(catalog).to_json())

###############################################################################
# The unknown: the kite turned by 1.2 rad and moved to (0.4, -0.3).
truth = Obstacle(kite(), RigidMotion(1.2, (0.4, -0.3)), catalog.entries[2].bc)
measured = far_field(solve(truth, IncidentPlaneWave(2.0, 0.7)))
measured = add_noise(measured, 0.01, seed=1)

###############################################################################
# Location unknown: search translations over a box, then refine.
result = identify(measured, catalog, IdentifyConfig(location="search", box=((-1, 1), (-1, 1))))
print(result_to_text(result))
print("theta error %.2e" % abs(np.angle(np.exp(1j * (result.pose.theta - 1.2)))))
