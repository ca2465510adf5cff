"""Symbolic itineraries, cell counting, singularity curves and complexity.

Cells of the dynamical partition are identified with the itinerary
``(start scatterer, symbol_1, ..., symbol_n)`` of their points, where symbol
``i`` names the scatterer translate hit at step ``i``. Distinct itineraries
found by sampling give a lower bound for the number of cells.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from ._parallel import chunked_map
from .dynamics import (
    GRAZING_CUTOFF,
    HALF_PI,
    OrbitBatch,
    PhasePoint,
    Symbol,
    billiard_map,
    orbit_batch,
)
from .errors import GrazingInput, NoCollisionWithinBound, SingularOrbit
from .geometry import BilliardTable

__all__ = [
    "Symbol",
    "Itinerary",
    "itinerary",
    "CellCount",
    "count_cells",
    "grid_itineraries",
    "Curve",
    "SingularityCurveSet",
    "singularity_set",
    "ComplexityEstimate",
    "complexity",
    "curve_complexity",
    "SEED_OFFSET",
]

# S_0 itself is not in the domain of T; its iterates are seeded this far inside.
SEED_OFFSET = 1e-7


@dataclass(frozen=True)
class Itinerary:
    start: int
    symbols: tuple[Symbol, ...]

    def __len__(self):
        return len(self.symbols)

    def label(self) -> tuple[int, ...]:
        out = [self.start]
        for s in self.symbols:
            out.extend((s.scatterer, s.translate[0], s.translate[1]))
        return tuple(out)

    @classmethod
    def from_label(cls, row) -> "Itinerary":
        row = [int(x) for x in row]
        syms = tuple(Symbol(row[i], (row[i + 1], row[i + 2])) for i in range(1, len(row), 3))
        return cls(row[0], syms)

    def __str__(self):
        return f"{self.start}|" + " ".join(str(s) for s in self.symbols)

    @classmethod
    def parse(cls, text: str) -> "Itinerary":
        head, _, tail = text.partition("|")
        syms = []
        for tok in tail.split():
            j, _, rest = tok.partition("(")
            a, b = rest.rstrip(")").split(",")
            syms.append(Symbol(int(j), (int(a), int(b))))
        return cls(int(head), tuple(syms))


def itinerary(table: BilliardTable, x: PhasePoint, n: int, *, bound=None,
              cutoff=GRAZING_CUTOFF) -> Itinerary:
    """The ``n`` symbols of x, Tx, ..., T^(n-1)x."""
    start = x.scatterer
    syms = []
    for i in range(n):
        try:
            step = billiard_map(table, x, bound=bound, cutoff=cutoff)
        except (GrazingInput, NoCollisionWithinBound) as exc:
            raise SingularOrbit(i, f"orbit singular at step {i}: {exc}") from exc
        syms.append(step.symbol)
        x = step.image
    return Itinerary(start, tuple(syms))


def _orbits(table, s, r, phi, n, bound, workers, inverse=False) -> OrbitBatch:
    parts = chunked_map(
        lambda lo, hi: orbit_batch(table, s[lo:hi], r[lo:hi], phi[lo:hi], n,
                                   bound=bound, inverse=inverse),
        len(s), workers)
    if not parts:
        return orbit_batch(table, s, r, phi, n, bound=bound, inverse=inverse)
    return OrbitBatch(*(np.concatenate(f) for f in zip(*parts)))


@dataclass
class CellCount:
    """Result of :func:`count_cells`.

    ``labels[k]`` is the itinerary row of cell ``k``; ``point_cell`` maps each
    regular sample (``scatterer, r, phi``) to its cell index.
    """

    n: int
    count: int
    samples_used: int
    labels: np.ndarray
    scatterer: np.ndarray
    r: np.ndarray
    phi: np.ndarray
    point_cell: np.ndarray
    levels: int

    def itineraries(self) -> list[Itinerary]:
        return [Itinerary.from_label(row) for row in self.labels]


def _sample(table, S, I, J, level, jitter):
    size = 2.0 ** level
    u = (I + jitter[:, 0]) / size
    v = -1.0 + 2.0 * (J + jitter[:, 1]) / size
    return table.circumferences[S] * u, np.arcsin(np.clip(v, -1.0, 1.0))


def count_cells(table: BilliardTable, n: int, budget: int = 100_000, *, base_level: int = 6,
                max_level: int = 20, seed: int = 0, workers: int = 1, bound=None) -> CellCount:
    """Count distinct length-``n`` itineraries by nested dyadic sampling.

    Phase space of each scatterer is mapped to the unit square
    ``(r / circumference, (sin(phi) + 1) / 2)``. All cells of the base level
    are sampled at a jittered point; a sampled dyadic cell whose itinerary
    differs from a sampled neighbour (or from its parent) is split into four
    children at the next level. The sample sequence is a fixed function of
    ``(table, n, seed)``, and ``budget`` truncates it, so the count is
    nondecreasing in the budget.
    """
    D = table.n_scatterers
    if n == 0:
        return CellCount(0, D, 0, np.arange(D).reshape(D, 1), np.zeros(0, np.int64),
                         np.zeros(0), np.zeros(0), np.zeros(0, np.int64), 0)
    size = 2 ** base_level
    S, I, J = np.meshgrid(np.arange(D), np.arange(size), np.arange(size), indexing="ij")
    S, I, J = S.ravel(), I.ravel(), J.ravel()
    parent = np.full(len(S), -2, dtype=np.int64)
    label_ids: dict[bytes, int] = {}
    rows: list[np.ndarray] = []
    keep_s, keep_r, keep_phi, keep_c = [], [], [], []
    used = 0
    level = base_level
    while len(S) and used < budget and level <= max_level:
        rng = np.random.default_rng([seed, level])
        jitter = rng.random((len(S), 2))
        take = min(len(S), budget - used)
        S, I, J, parent, jitter = S[:take], I[:take], J[:take], parent[:take], jitter[:take]
        r, phi = _sample(table, S, I, J, level, jitter)
        ob = _orbits(table, S, r, phi, n, bound, workers)
        lab = ob.labels()
        ids = np.full(take, -1, dtype=np.int64)
        for k in np.nonzero(ob.valid)[0]:
            key = lab[k].tobytes()
            cid = label_ids.get(key)
            if cid is None:
                cid = label_ids[key] = len(rows)
                rows.append(lab[k])
            ids[k] = cid
        good = ob.valid
        keep_s.append(S[good])
        keep_r.append(r[good])
        keep_phi.append(phi[good])
        keep_c.append(ids[good])
        used += take
        if used >= budget:
            break
        # flag cells whose itinerary differs from a sampled neighbour or the parent
        side = 2 ** level
        key = (S * side + I) * side + J
        order = np.argsort(key)
        skey, sid = key[order], ids[order]
        flagged = (parent != ids) & (parent != -2)
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni = np.mod(I + di, side)
            nj = J + dj
            inside = (nj >= 0) & (nj < side)
            nkey = (S * side + ni) * side + np.clip(nj, 0, side - 1)
            pos = np.clip(np.searchsorted(skey, nkey), 0, len(skey) - 1)
            found = inside & (skey[pos] == nkey)
            flagged |= found & (sid[pos] != ids)
        fs, fi, fj, fid = S[flagged], I[flagged], J[flagged], ids[flagged]
        kids = []
        for a in (0, 1):
            for b in (0, 1):
                kids.append((fs, 2 * fi + a, 2 * fj + b, fid))
        S = np.concatenate([k[0] for k in kids])
        I = np.concatenate([k[1] for k in kids])
        J = np.concatenate([k[2] for k in kids])
        parent = np.concatenate([k[3] for k in kids])
        order = np.lexsort((J, I, S))
        S, I, J, parent = S[order], I[order], J[order], parent[order]
        level += 1
    labels = np.array(rows, dtype=np.int64).reshape(len(rows), 1 + 3 * n)
    return CellCount(
        n=n, count=len(rows), samples_used=used, labels=labels,
        scatterer=np.concatenate(keep_s), r=np.concatenate(keep_r),
        phi=np.concatenate(keep_phi), point_cell=np.concatenate(keep_c),
        levels=level - base_level + 1,
    )


def grid_itineraries(table: BilliardTable, n: int, m: int, *, bound=None, workers: int = 1) -> set:
    """Itinerary labels of an ``m x m`` midpoint grid per scatterer (exhaustive oracle)."""
    D = table.n_scatterers
    found = set()
    for s in range(D):
        for lo in range(0, m, max(1, 65536 // m)):
            hi = min(m, lo + max(1, 65536 // m))
            I, J = np.meshgrid(np.arange(lo, hi), np.arange(m), indexing="ij")
            u = (I.ravel() + 0.5) / m
            v = -1.0 + 2.0 * (J.ravel() + 0.5) / m
            S = np.full(len(u), s)
            ob = _orbits(table, S, table.circumferences[s] * u, np.arcsin(v), n, bound, workers)
            lab = ob.labels()[ob.valid]
            found.update(map(tuple, np.unique(lab, axis=0).tolist()))
    return found


@dataclass(frozen=True)
class Curve:
    """A polyline of one singularity curve on one scatterer component.

    ``order`` is the signed iterate: ``k > 0`` for pieces of ``T^-k S_0``
    (singularities of forward iterates) and ``k < 0`` for ``T^|k| S_0``.
    ``branch`` is the itinerary label of the seeding path, which fixes the
    continuity branch the curve belongs to.
    """

    scatterer: int
    order: int
    seed_scatterer: int
    seed_sign: int
    branch: tuple
    r: np.ndarray
    phi: np.ndarray

    @property
    def key(self):
        return (self.order, self.seed_scatterer, self.seed_sign, self.branch)


@dataclass(frozen=True)
class SingularityCurveSet:
    order: int
    resolution: float
    curves: tuple[Curve, ...]

    def vertex_count(self) -> int:
        return sum(len(c.r) for c in self.curves)

    def to_csv(self, fh=None) -> str:
        buf = fh or io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scatterer", "r", "phi", "branch_id"])
        ids = {}
        for c in self.curves:
            bid = ids.setdefault(c.key, len(ids))
            for r, p in zip(c.r, c.phi):
                w.writerow([c.scatterer, repr(float(r)), repr(float(p)), bid])
        return buf.getvalue() if fh is None else ""


def _images(table, s, sign, u, k, inverse, offset, bound):
    circ = table.circumferences[s]
    S = np.full(len(u), s)
    phi = np.full(len(u), sign * (HALF_PI - offset))
    ob = orbit_batch(table, S, np.mod(u, 1.0) * circ, phi, k, bound=bound, inverse=inverse)
    return ob.scatterer[:, -1], ob.r[:, -1], ob.phi[:, -1], ob.labels()[:, 1:], ob.valid


def _wrapped_dr(table, s, r0, r1):
    circ = table.circumferences[s]
    return np.mod(r1 - r0 + 0.5 * circ, circ) - 0.5 * circ


def singularity_set(table: BilliardTable, n: int, resolution: float = 0.02, *,
                    offset: float = SEED_OFFSET, initial: int | None = None,
                    max_points: int = 20000, min_step: float = 1e-10,
                    bound=None) -> SingularityCurveSet:
    """Polyline approximation of ``S_n`` (``n > 0``) or ``S_-|n|`` (``n < 0``).

    For each ``k <= |n|`` the grazing lines, offset inward by ``offset``, are
    pushed ``k`` times by T^-1 (for ``n > 0``) or T. Seeds are bisected until
    neighbouring images on one branch lie within ``resolution`` of each other,
    and polylines are cut where the branch changes.
    """
    curves = []
    for s in range(table.n_scatterers):
        circ = float(table.circumferences[s])
        for sign in (1, -1):
            r = np.linspace(0.0, circ, max(2, int(math.ceil(circ / resolution)) + 1))
            curves.append(Curve(s, 0, s, sign, (), r, np.full(len(r), sign * HALF_PI)))
    inverse = n > 0
    for k in range(1, abs(n) + 1):
        order = k if n > 0 else -k
        for s in range(table.n_scatterers):
            circ = float(table.circumferences[s])
            m0 = initial or max(16, int(math.ceil(circ / resolution)))
            for sign in (1, -1):
                u = np.linspace(0.0, 1.0, m0 + 1)
                while True:
                    ts, tr, tp, lab, ok = _images(table, s, sign, u, k, inverse, offset, bound)
                    same = ok[:-1] & ok[1:] & (ts[:-1] == ts[1:]) & np.all(lab[:-1] == lab[1:], axis=1)
                    dr = _wrapped_dr(table, ts[:-1], tr[:-1], tr[1:])
                    dist = np.hypot(dr, tp[1:] - tp[:-1])
                    du = np.diff(u)
                    split = (~same | (dist > resolution)) & (du > min_step)
                    # no point refining between two singular seeds
                    split &= ok[:-1] | ok[1:]
                    if not split.any() or len(u) >= max_points:
                        break
                    mids = 0.5 * (u[:-1] + u[1:])[split]
                    u = np.sort(np.concatenate([u, mids[: max_points - len(u)]]))
                piece = [0] if ok[0] else []
                for i in range(len(u) - 1):
                    joined = same[i] and dist[i] <= resolution
                    if not joined:
                        if len(piece) >= 2:
                            curves.append(_curve(table, ts, tr, tp, lab, piece, order, s, sign))
                        piece = []
                    if ok[i + 1]:
                        piece.append(i + 1)
                if len(piece) >= 2:
                    curves.append(_curve(table, ts, tr, tp, lab, piece, order, s, sign))
    return SingularityCurveSet(n, resolution, tuple(curves))


def _curve(table, ts, tr, tp, lab, piece, order, s, sign):
    idx = np.array(piece)
    return Curve(int(ts[idx[0]]), order, s, sign, tuple(int(x) for x in lab[idx[0]]),
                 tr[idx].copy(), tp[idx].copy())


@dataclass(frozen=True)
class ComplexityEstimate:
    n: int
    K_n: int
    location: PhasePoint | None
    K: float | None
    resolution: float
    caveat: str = "resolution-dependent: multiplicity counted within one hash cell"


def _segment_samples(r, phi, spacing):
    pr, pp = [r[:1]], [phi[:1]]
    for i in range(len(r) - 1):
        L = math.hypot(r[i + 1] - r[i], phi[i + 1] - phi[i])
        m = max(1, int(math.ceil(L / spacing)))
        t = np.arange(1, m + 1) / m
        pr.append(r[i] + t * (r[i + 1] - r[i]))
        pp.append(phi[i] + t * (phi[i + 1] - phi[i]))
    return np.concatenate(pr), np.concatenate(pp)


def curve_complexity(curves: SingularityCurveSet, resolution: float | None = None) -> ComplexityEstimate:
    """Largest number of distinct curves meeting one ``resolution``-sized hash cell.

    Polylines sharing a :attr:`Curve.key` are pieces of one curve and count once.
    """
    res = float(resolution or curves.resolution)
    ids: dict = {}
    cell_sets: dict = {}
    for c in curves.curves:
        cid = ids.setdefault((c.scatterer,) + c.key, len(ids))
        r, p = _segment_samples(np.asarray(c.r), np.asarray(c.phi), 0.5 * res)
        cells = set(zip(np.floor(r / res).astype(np.int64).tolist(),
                        np.floor(p / res).astype(np.int64).tolist()))
        for cell in cells:
            cell_sets.setdefault((c.scatterer,) + cell, set()).add(cid)
    if not cell_sets:
        return ComplexityEstimate(abs(curves.order), 0, None, None, res)
    best_cell, members = max(cell_sets.items(), key=lambda kv: (len(kv[1]), kv[0]))
    k = len(members)
    s, i, j = best_cell
    where = PhasePoint(int(s), (i + 0.5) * res, (j + 0.5) * res)
    n = abs(curves.order)
    return ComplexityEstimate(n, k, where, k / n if n else None, res)


def complexity(table: BilliardTable, n: int, resolution: float = 0.02, **kw) -> ComplexityEstimate:
    """Estimate ``K_n`` for ``S_n`` of ``table``; extra keywords go to :func:`singularity_set`."""
    return curve_complexity(singularity_set(table, n, resolution, **kw), resolution)
