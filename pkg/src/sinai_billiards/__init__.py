"""Numerical toolkit for dispersing (Sinai) billiards on the two-torus.

Modules: ``geometry`` (tables), ``dynamics`` (collision map), ``singularity``
(itineraries, cells, singularity curves), ``orbits`` (periodic orbits),
``thermo`` (entropy and pressure estimators) and ``cli``.
"""

__version__ = "0.1.0"

from .geometry import BilliardTable, build_table, hexagonal, load_table, square, validate_domain
from .dynamics import (
    PhasePoint,
    Symbol,
    billiard_map,
    billiard_map_inverse,
    finite_horizon_check,
    free_flight_bounds,
)
from .measures import EmpiricalMeasure, Potential
from .singularity import Itinerary, complexity, count_cells, itinerary, singularity_set
from .orbits import enumerate_fixed_points, find_periodic_orbit, grazing_orbit_scan
from .thermo import (
    s0_estimate,
    sparse_recurrence_check,
    srb_entropy_lower_bound,
    tail_entropy_bound,
    usc_defect_bound,
)

__all__ = [
    "BilliardTable", "build_table", "hexagonal", "square", "load_table", "validate_domain",
    "PhasePoint", "Symbol", "billiard_map", "billiard_map_inverse", "finite_horizon_check",
    "free_flight_bounds", "EmpiricalMeasure", "Potential", "Itinerary", "itinerary",
    "count_cells", "singularity_set", "complexity", "find_periodic_orbit",
    "enumerate_fixed_points", "grazing_orbit_scan", "srb_entropy_lower_bound", "s0_estimate",
    "sparse_recurrence_check", "tail_entropy_bound", "usc_defect_bound",
]
