"""
Forward scattering and the disk series
======================================

Solve a sound-soft disk with the method of fundamental solutions and compare
the far field with the separation-of-variables series. Then move to the kite,
where no series exists, and look at the certified boundary residual.
"""

from farscatter import (BoundaryCondition, IncidentPlaneWave, Obstacle, circle, kite,
                        disk_far_field_series, far_field, relative_distance, solve)

###############################################################################
# A unit disk hit from the left at k = 2.
wave = IncidentPlaneWave(k=2.0, angle=0.0)
disk = Obstacle(circle(1.0), bc=BoundaryCondition.dirichlet())
sol = solve(disk, wave)
print("disk: %d sources, residual %.1e" % (len(sol.sources), sol.residual))

pattern = far_field(sol)
series = disk_far_field_series(1.0, disk.bc, wave)
print("relative L2 gap to the series: %.1e" % relative_distance(pattern, series))

###############################################################################
# Backscatter sits at angle pi, i.e. sample M/2 of the default 128-point grid.
m = pattern.grid.M
print("forward |u_inf| = %.4f, backward |u_inf| = %.4f"
      % (abs(pattern.samples[0]), abs(pattern.samples[m // 2])))

###############################################################################
# The kite is harder for the source layer: the solver climbs its ladder of
# source counts until the residual certificate holds.
hard_kite = Obstacle(kite(), bc=BoundaryCondition.neumann())
sol = solve(hard_kite, wave)
print("kite: %d sources, residual %.1e" % (len(sol.sources), sol.residual))
print("kite far-field norm %.4f" % far_field(sol).norm())
