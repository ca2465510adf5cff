"""Billiard tables on the two-torus: a lattice plus disjoint circular scatterers.

Arclength convention: on every circle ``r = 0`` is the point of maximal
x-coordinate and ``r`` increases counter-clockwise, so ``r = radius * theta``
with ``theta`` the polar angle about the center.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateLattice,
    IndexOutOfRange,
    InvalidInput,
    OverlappingScatterers,
    UnsupportedFamily,
)

__all__ = [
    "Scatterer",
    "BilliardTable",
    "DomainVerdict",
    "BoundaryFrame",
    "hexagonal",
    "square",
    "custom",
    "build_table",
    "load_table",
    "table_to_spec",
    "validate_domain",
    "min_curvature",
    "min_gap",
    "boundary_frame",
]

SQRT2 = math.sqrt(2.0)
HEX_HORIZON_LIMIT = 4.0 / math.sqrt(3.0)


@dataclass(frozen=True)
class Scatterer:
    center: tuple[float, float]
    radius: float

    @property
    def circumference(self) -> float:
        return 2.0 * math.pi * self.radius


@dataclass(frozen=True)
class BilliardTable:
    """Immutable table. ``lattice`` rows are the two basis vectors of the torus."""

    lattice: tuple[tuple[float, float], tuple[float, float]]
    scatterers: tuple[Scatterer, ...]
    family: str = "custom"
    params: tuple[tuple[str, float], ...] = field(default=())

    @cached_property
    def basis(self) -> np.ndarray:
        return np.array(self.lattice, dtype=float)

    @cached_property
    def centers(self) -> np.ndarray:
        return np.array([s.center for s in self.scatterers], dtype=float)

    @cached_property
    def radii(self) -> np.ndarray:
        return np.array([s.radius for s in self.scatterers], dtype=float)

    @property
    def n_scatterers(self) -> int:
        return len(self.scatterers)

    @cached_property
    def circumferences(self) -> np.ndarray:
        return 2.0 * np.pi * self.radii

    @property
    def area(self) -> float:
        return abs(float(np.linalg.det(self.basis)))

    @cached_property
    def cell_diameter(self) -> float:
        e1, e2 = self.basis
        return float(max(np.linalg.norm(e1 + e2), np.linalg.norm(e1 - e2)))

    @property
    def default_flight_bound(self) -> float:
        return 3.0 * self.cell_diameter

    def param(self, name: str) -> float:
        return dict(self.params)[name]

    def translate(self, k) -> np.ndarray:
        """Plane vector of the integer lattice translate ``k``."""
        k = np.asarray(k, dtype=float)
        return k @ self.basis

    def to_lattice_coords(self, x) -> np.ndarray:
        return np.linalg.solve(self.basis.T, np.asarray(x, dtype=float))


@dataclass(frozen=True)
class DomainVerdict:
    accepted: bool
    violated_constraints: tuple[str, ...]
    margin: float


@dataclass(frozen=True)
class BoundaryFrame:
    position: np.ndarray
    outward_normal: np.ndarray
    tangent: np.ndarray
    curvature: float


def _translate_range(basis: np.ndarray, reach: float) -> int:
    # Number of cells per direction needed to see every translate within ``reach``.
    area = abs(np.linalg.det(basis))
    heights = [area / np.linalg.norm(basis[1]), area / np.linalg.norm(basis[0])]
    return max(2, int(math.ceil(reach / min(heights))) + 1)


def min_gap(table: BilliardTable) -> float:
    """Smallest distance between two distinct scatterer translates."""
    reach = 2.0 * float(table.radii.max()) + table.cell_diameter
    m = _translate_range(table.basis, reach)
    best = math.inf
    for i, si in enumerate(table.scatterers):
        for j, sj in enumerate(table.scatterers):
            for a, b in product(range(-m, m + 1), repeat=2):
                if i == j and a == 0 and b == 0:
                    continue
                c = np.asarray(sj.center) + table.translate((a, b)) - np.asarray(si.center)
                best = min(best, float(np.hypot(c[0], c[1])) - si.radius - sj.radius)
    return best


def _make_table(lattice, scatterers, family="custom", params=()) -> BilliardTable:
    basis = np.asarray(lattice, dtype=float)
    if basis.shape != (2, 2) or not np.all(np.isfinite(basis)):
        raise DegenerateLattice("lattice must be two finite 2-vectors")
    if abs(np.linalg.det(basis)) <= 1e-12 * max(1.0, float(np.abs(basis).max()) ** 2):
        raise DegenerateLattice("lattice basis is degenerate")
    scs = []
    for s in scatterers:
        if isinstance(s, Scatterer):
            center, radius = s.center, s.radius
        else:
            center, radius = s["center"], s["radius"]
        radius = float(radius)
        if not radius > 0:
            raise InvalidInput(f"scatterer radius must be positive, got {radius}")
        scs.append(Scatterer((float(center[0]), float(center[1])), radius))
    if not scs:
        raise InvalidInput("a table needs at least one scatterer")
    table = BilliardTable(
        lattice=(tuple(map(float, basis[0])), tuple(map(float, basis[1]))),
        scatterers=tuple(scs),
        family=family,
        params=tuple((k, float(v)) for k, v in params),
    )
    gap = min_gap(table)
    if not gap > 0:
        raise OverlappingScatterers(f"scatterers overlap or touch (minimum gap {gap:.3g})")
    return table


def hexagonal(d: float) -> BilliardTable:
    """Radius-1 scatterers on a hexagonal lattice with nearest-center distance ``d``."""
    d = float(d)
    lattice = ((d, 0.0), (d / 2.0, d * math.sqrt(3.0) / 2.0))
    return _make_table(lattice, [Scatterer((0.0, 0.0), 1.0)], "hexagonal", (("d", d),))


def square(R: float, Rprime: float) -> BilliardTable:
    """Unit square cell, radius ``Rprime`` disk at the corner and radius ``R`` disk at the center.

    Scatterer 0 is the corner disk, scatterer 1 the central one.
    """
    R, Rprime = float(R), float(Rprime)
    lattice = ((1.0, 0.0), (0.0, 1.0))
    scs = [Scatterer((0.0, 0.0), Rprime), Scatterer((0.5, 0.5), R)]
    return _make_table(lattice, scs, "square", (("R", R), ("Rprime", Rprime)))


def custom(lattice: Sequence[Sequence[float]], scatterers: Sequence) -> BilliardTable:
    return _make_table(lattice, scatterers, "custom", ())


def build_table(spec: Mapping | BilliardTable) -> BilliardTable:
    """Build a table from its JSON-compatible specification.

    >>> build_table({"family": "hexagonal", "d": 2.2}).param("d")
    2.2
    """
    if isinstance(spec, BilliardTable):
        return spec
    family = spec.get("family")
    try:
        if family == "hexagonal":
            return hexagonal(spec["d"])
        if family == "square":
            return square(spec["R"], spec["Rprime"])
        if family == "custom":
            return custom(spec["lattice"], spec["scatterers"])
    except KeyError as exc:
        raise InvalidInput(f"table spec is missing field {exc}") from None
    raise UnsupportedFamily(f"unknown table family {family!r}")


def load_table(path) -> BilliardTable:
    with open(path) as fh:
        return build_table(json.load(fh))


def table_to_spec(table: BilliardTable) -> dict:
    if table.family == "hexagonal":
        return {"family": "hexagonal", "d": table.param("d")}
    if table.family == "square":
        return {"family": "square", "R": table.param("R"), "Rprime": table.param("Rprime")}
    return {
        "family": "custom",
        "lattice": [list(v) for v in table.lattice],
        "scatterers": [{"center": list(s.center), "radius": s.radius} for s in table.scatterers],
    }


def _verdict(constraints) -> DomainVerdict:
    # each constraint is (name, slack); satisfied iff slack > 0
    violated = tuple(name for name, slack in constraints if not slack > 0)
    slacks = [slack for _, slack in constraints if slack > 0]
    margin = min(slacks) if slacks else 0.0
    return DomainVerdict(not violated, violated, float(margin))


def validate_domain(spec: Mapping | BilliardTable) -> DomainVerdict:
    """Check the hexagonal / square parameters against their admissible domains."""
    if isinstance(spec, BilliardTable):
        family = spec.family
        params = dict(spec.params)
    else:
        family = spec.get("family")
        params = {k: v for k, v in spec.items() if k != "family"}
    if family == "hexagonal":
        d = float(params["d"])
        return _verdict([("d > 2", d - 2.0), ("d < 4/sqrt(3)", HEX_HORIZON_LIMIT - d)])
    if family == "square":
        R, Rp = float(params["R"]), float(params["Rprime"])
        return _verdict([
            ("R > 0", R),
            ("R < R'", Rp - R),
            ("R' < 1/2", 0.5 - Rp),
            ("R + R' > 1/2", R + Rp - 0.5),
            ("R + R' < sqrt(2)/2", SQRT2 / 2 - (R + Rp)),
            ("R' > sqrt(2)/4", Rp - SQRT2 / 4),
        ])
    raise UnsupportedFamily(f"domain membership is undefined for family {family!r}")


def min_curvature(table: BilliardTable) -> float:
    return 1.0 / float(table.radii.max())


def boundary_frame(table: BilliardTable, scatterer_index: int, r: float) -> BoundaryFrame:
    if not 0 <= scatterer_index < table.n_scatterers:
        raise IndexOutOfRange(f"scatterer index {scatterer_index} out of range")
    sc = table.scatterers[scatterer_index]
    theta = math.fmod(r, sc.circumference) / sc.radius
    c, s = math.cos(theta), math.sin(theta)
    normal = np.array([c, s])
    return BoundaryFrame(
        position=np.asarray(sc.center) + sc.radius * normal,
        outward_normal=normal,
        tangent=np.array([-s, c]),
        curvature=1.0 / sc.radius,
    )
