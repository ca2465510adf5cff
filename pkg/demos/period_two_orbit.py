# coding: utf-8

# # A first look at the hexagonal billiard
#
# One disk of radius 1 per cell of a triangular lattice with spacing 2.2.
# Neighbouring disks are 0.2 apart, so the shortest free flight is 0.2.

import numpy as np

from sinai_billiards import PhasePoint, Symbol, billiard_map, find_periodic_orbit, hexagonal
from sinai_billiards.dynamics import finite_horizon_check, free_flight_bounds, sample_phase_points

table = hexagonal(2.2)
print(table.basis)
print(free_flight_bounds(table))
print(finite_horizon_check(table))


# ## Bouncing along the center line
#
# Leaving a disk along its normal towards the right neighbour and coming
# straight back gives a period-2 orbit of length 0.4.

orbit = find_periodic_orbit(table, [Symbol(0, (1, 0)), Symbol(0, (-1, 0))])
print(orbit.length, orbit.grazing_margin)
for p in orbit.points:
    print(p)


# ## Following a random point
#
# The map acts on (scatterer, arclength, angle). Most points wander away
# from the center line within a few collisions.

s, r, phi = sample_phase_points(table, 1, seed=1)
x = PhasePoint(int(s[0]), float(r[0]), float(phi[0]))
for k in range(6):
    step = billiard_map(table, x)
    print(k, step.symbol, round(step.tau, 4), round(step.image.phi, 4))
    x = step.image

print(np.rad2deg(x.phi))
