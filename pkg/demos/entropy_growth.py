# coding: utf-8

# # Counting cells and periodic orbits
#
# Both counts grow exponentially with n. Their rates give two rough
# estimates of the topological entropy of the collision map.

import numpy as np

from sinai_billiards import count_cells, enumerate_fixed_points, hexagonal
from sinai_billiards.thermo import entropy_from_cells, entropy_from_orbits

table = hexagonal(2.2)

cells = [count_cells(table, n, budget=20_000) for n in range(1, 6)]
print([c.count for c in cells])
print(entropy_from_cells([(c.n, c.count) for c in cells]))


# Fixed points of T^n come from solving one Newton problem per admissible
# itinerary. n = 7 takes a few seconds.

censuses = [enumerate_fixed_points(table, n) for n in range(2, 8)]
print([c.count for c in censuses])

growth = entropy_from_orbits(censuses)
print(np.round(growth.sequence, 4), growth.plateau)


# The orbit count never exceeds the cell count: each fixed point sits in
# its own cell.

for c, cen in zip(cells[1:], censuses):
    print(cen.period, cen.count, c.count)
