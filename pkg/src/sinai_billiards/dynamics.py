"""Collision map, its inverse, free flights and horizon diagnostics.

Phase points are ``(scatterer, r, phi)`` with ``phi`` the angle from the
outward normal to the outgoing velocity; positive ``phi`` tilts the velocity
toward the counter-clockwise tangent. Collisions are found in the universal
cover: every scatterer translate whose center is close enough to the ray
origin is intersected exactly.

All heavy lifting is done by :func:`map_batch`, which advances arrays of
phase points at once; the scalar functions are thin wrappers around it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from math import gcd
from typing import NamedTuple

import numpy as np

from .errors import GrazingInput, NoCollisionWithinBound
from .geometry import BilliardTable, _translate_range, min_gap

__all__ = [
    "GRAZING_CUTOFF",
    "Symbol",
    "PhasePoint",
    "CollisionStep",
    "FlowState",
    "StepBatch",
    "OrbitBatch",
    "map_batch",
    "orbit_batch",
    "billiard_map",
    "billiard_map_inverse",
    "reverse",
    "next_collision",
    "phase_to_flow",
    "FlightBounds",
    "free_flight_bounds",
    "HorizonVerdict",
    "finite_horizon_check",
    "sample_phase_points",
]

GRAZING_CUTOFF = 1e-12
HALF_PI = 0.5 * math.pi

OK, GRAZING, NO_HIT = 0, 1, 2
# rows per vectorised block; bounds memory at CHUNK x candidates
CHUNK = 4096


class Symbol(NamedTuple):
    """Target scatterer and its lattice translate relative to the source's cell."""

    scatterer: int
    translate: tuple[int, int]

    def __str__(self):
        return f"{self.scatterer}({self.translate[0]},{self.translate[1]})"


@dataclass(frozen=True)
class PhasePoint:
    scatterer: int
    r: float
    phi: float

    @property
    def grazing_margin(self) -> float:
        return HALF_PI - abs(self.phi)


@dataclass(frozen=True)
class CollisionStep:
    image: PhasePoint
    tau: float
    symbol: Symbol
    grazing_margin: float


@dataclass(frozen=True)
class FlowState:
    position: np.ndarray
    direction: np.ndarray


class _Candidates(NamedTuple):
    target: np.ndarray  # (C,) scatterer index
    translate: np.ndarray  # (C, 2) int
    center: np.ndarray  # (C, 2)
    radius: np.ndarray  # (C,)


@lru_cache(maxsize=256)
def _candidates(table: BilliardTable, source: int, bound: float) -> _Candidates:
    # Translates that a ray of length <= bound leaving scatterer `source` can reach.
    c0 = table.centers[source]
    r0 = table.radii[source]
    reach = bound + r0 + float(table.radii.max())
    m = _translate_range(table.basis, reach + table.cell_diameter)
    tg, tr, ce, ra = [], [], [], []
    for j in range(table.n_scatterers):
        for a, b in product(range(-m, m + 1), repeat=2):
            if j == source and a == 0 and b == 0:
                continue
            c = table.centers[j] + table.translate((a, b))
            if np.hypot(*(c - c0)) <= bound + r0 + table.radii[j]:
                tg.append(j)
                tr.append((a, b))
                ce.append(c)
                ra.append(table.radii[j])
    return _Candidates(
        np.array(tg, dtype=np.int64),
        np.array(tr, dtype=np.int64).reshape(-1, 2),
        np.array(ce, dtype=float).reshape(-1, 2),
        np.array(ra, dtype=float),
    )


class StepBatch(NamedTuple):
    scatterer: np.ndarray
    r: np.ndarray
    phi: np.ndarray
    tau: np.ndarray
    target: np.ndarray
    translate: np.ndarray  # (N, 2)
    status: np.ndarray  # 0 ok, 1 grazing input or tie, 2 no collision within bound


def _cast(p, v, cand: _Candidates):
    """Earliest exact intersection of rays ``p + t v`` with the candidate circles."""
    if not len(cand.radius):
        z = np.zeros(len(p))
        return np.zeros(len(p), dtype=np.int64), np.full(len(p), np.inf), z, z, z.astype(bool)
    wx = p[:, 0:1] - cand.center[None, :, 0]
    wy = p[:, 1:2] - cand.center[None, :, 1]
    b = wx * v[:, 0:1] + wy * v[:, 1:2]
    cc = wx * wx + wy * wy - cand.radius[None, :] ** 2
    disc = b * b - cc
    hit = (disc >= 0.0) & (b < 0.0)
    sq = np.sqrt(np.where(hit, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(hit, cc / (sq - b), np.inf)
    k = np.argmin(t, axis=1)
    rows = np.arange(len(p))
    tmin = t[rows, k]
    # ties between an earliest tangency and another hit are ambiguous
    near = t <= tmin[:, None] * (1.0 + 1e-14) + 1e-300
    tangent = near & (disc <= 1e-24 * np.maximum(1.0, b * b))
    tie = (near.sum(axis=1) > 1) & tangent.any(axis=1)
    return k, tmin, wx[rows, k], wy[rows, k], tie


def map_batch(table: BilliardTable, scatterer, r, phi, *, bound=None, inverse=False,
              cutoff=GRAZING_CUTOFF) -> StepBatch:
    """Apply T (or T^-1 with ``inverse=True``) to arrays of phase points."""
    s = np.asarray(scatterer, dtype=np.int64).ravel()
    r = np.asarray(r, dtype=float).ravel()
    phi = np.asarray(phi, dtype=float).ravel()
    n = len(s)
    bound = float(table.default_flight_bound if bound is None else bound)
    out_s = np.zeros(n, dtype=np.int64)
    out_r = np.zeros(n)
    out_phi = np.zeros(n)
    out_tau = np.full(n, np.nan)
    out_tg = np.full(n, -1, dtype=np.int64)
    out_tr = np.zeros((n, 2), dtype=np.int64)
    status = np.full(n, GRAZING, dtype=np.int8)
    # Backward flight is the forward flight of the reversed point (r, -phi).
    sign = -1.0 if inverse else 1.0
    for src in np.unique(s):
        todo = np.nonzero((s == src) & (np.abs(phi) <= HALF_PI - cutoff))[0]
        cand = _candidates(table, int(src), bound)
        if not len(cand.radius):
            status[todo] = NO_HIT
            continue
        for lo in range(0, len(todo), CHUNK):
            idx = todo[lo:lo + CHUNK]
            _advance(table, int(src), cand, idx, r, phi, sign, bound,
                     out_s, out_r, out_phi, out_tau, out_tg, out_tr, status)
    return StepBatch(out_s, out_r, out_phi, out_tau, out_tg, out_tr, status)


def _advance(table, src, cand, idx, r, phi, sign, bound,
             out_s, out_r, out_phi, out_tau, out_tg, out_tr, status):
    a = table.radii[src]
    theta = r[idx] / a
    nx, ny = np.cos(theta), np.sin(theta)
    ph = sign * phi[idx]
    cp, sp = np.cos(ph), np.sin(ph)
    p = np.column_stack([table.centers[src, 0] + a * nx, table.centers[src, 1] + a * ny])
    v = np.column_stack([cp * nx - sp * ny, cp * ny + sp * nx])
    k, t, wx, wy, tie = _cast(p, v, cand)
    ok = np.isfinite(t) & (t <= bound)
    st = np.where(ok, np.where(tie, GRAZING, OK), NO_HIT).astype(np.int8)
    t = np.where(ok, t, 0.0)
    ra = cand.radius[k]
    mx = wx + t * v[:, 0]
    my = wy + t * v[:, 1]
    norm = np.hypot(mx, my)
    mx, my = mx / norm, my / norm
    vn = v[:, 0] * mx + v[:, 1] * my
    vt = -v[:, 0] * my + v[:, 1] * mx
    new_phi = np.arctan2(vt, -vn)
    ang = np.mod(np.arctan2(my, mx), 2.0 * np.pi)
    new_r = ra * ang
    new_r = np.where(new_r >= 2.0 * np.pi * ra, 0.0, new_r)
    out_s[idx] = cand.target[k]
    out_r[idx] = new_r
    out_phi[idx] = sign * np.clip(new_phi, -HALF_PI, HALF_PI)
    out_tau[idx] = np.where(ok, t, np.nan)
    out_tg[idx] = cand.target[k]
    out_tr[idx] = cand.translate[k]
    status[idx] = st


class OrbitBatch(NamedTuple):
    scatterer: np.ndarray  # (N, n+1)
    r: np.ndarray
    phi: np.ndarray
    tau: np.ndarray  # (N, n)
    target: np.ndarray  # (N, n)
    translate: np.ndarray  # (N, n, 2)
    failed_at: np.ndarray  # (N,) first failing step, -1 if the orbit is regular

    @property
    def valid(self) -> np.ndarray:
        return self.failed_at < 0

    def labels(self) -> np.ndarray:
        """Integer rows ``[start, (target, k1, k2) * n]`` naming each itinerary."""
        n = self.tau.shape[1]
        cols = [self.scatterer[:, :1]]
        if n:
            sym = np.concatenate([self.target[:, :, None], self.translate], axis=2)
            cols.append(sym.reshape(len(sym), 3 * n))
        return np.concatenate(cols, axis=1)


def orbit_batch(table: BilliardTable, scatterer, r, phi, n: int, *, bound=None,
                inverse=False, cutoff=GRAZING_CUTOFF) -> OrbitBatch:
    """Iterate ``n`` steps from every input point; failed orbits are frozen in place."""
    s = np.asarray(scatterer, dtype=np.int64).ravel().copy()
    r = np.asarray(r, dtype=float).ravel().copy()
    phi = np.asarray(phi, dtype=float).ravel().copy()
    N = len(s)
    S = np.zeros((N, n + 1), dtype=np.int64)
    Rr = np.zeros((N, n + 1))
    P = np.zeros((N, n + 1))
    tau = np.full((N, n), np.nan)
    tg = np.full((N, n), -1, dtype=np.int64)
    tr = np.zeros((N, n, 2), dtype=np.int64)
    failed = np.full(N, -1, dtype=np.int64)
    S[:, 0], Rr[:, 0], P[:, 0] = s, r, phi
    alive = np.arange(N)
    for i in range(n):
        if not len(alive):
            break
        st = map_batch(table, s[alive], r[alive], phi[alive], bound=bound,
                       inverse=inverse, cutoff=cutoff)
        good = st.status == OK
        bad = alive[~good]
        failed[bad] = i
        alive_good = alive[good]
        s[alive_good], r[alive_good], phi[alive_good] = st.scatterer[good], st.r[good], st.phi[good]
        tau[alive_good, i] = st.tau[good]
        tg[alive_good, i] = st.target[good]
        tr[alive_good, i] = st.translate[good]
        alive = alive_good
        S[:, i + 1], Rr[:, i + 1], P[:, i + 1] = s, r, phi
    return OrbitBatch(S, Rr, P, tau, tg, tr, failed)


def _single(table, x: PhasePoint, inverse, bound, cutoff) -> CollisionStep:
    if abs(x.phi) > HALF_PI - cutoff:
        raise GrazingInput(f"|phi| = {abs(x.phi)!r} is within {cutoff} of pi/2")
    st = map_batch(table, [x.scatterer], [x.r], [x.phi], bound=bound, inverse=inverse,
                   cutoff=cutoff)
    if st.status[0] == NO_HIT:
        raise NoCollisionWithinBound("no scatterer within the flight bound")
    if st.status[0] == GRAZING:
        raise GrazingInput("simultaneous tangency at the next collision")
    image = PhasePoint(int(st.scatterer[0]), float(st.r[0]), float(st.phi[0]))
    sym = Symbol(int(st.target[0]), (int(st.translate[0, 0]), int(st.translate[0, 1])))
    return CollisionStep(image, float(st.tau[0]), sym, image.grazing_margin)


def billiard_map(table: BilliardTable, x: PhasePoint, *, bound=None,
                 cutoff=GRAZING_CUTOFF) -> CollisionStep:
    return _single(table, x, False, bound, cutoff)


def billiard_map_inverse(table: BilliardTable, x: PhasePoint, *, bound=None,
                         cutoff=GRAZING_CUTOFF) -> CollisionStep:
    """Previous collision. The symbol names the scatterer translate hit by the backward flight."""
    return _single(table, x, True, bound, cutoff)


def reverse(x: PhasePoint) -> PhasePoint:
    """Time-reversal involution (r, phi) -> (r, -phi)."""
    return PhasePoint(x.scatterer, x.r, -x.phi)


def phase_to_flow(table: BilliardTable, x: PhasePoint) -> FlowState:
    sc = table.scatterers[x.scatterer]
    theta = x.r / sc.radius
    n = np.array([math.cos(theta), math.sin(theta)])
    t = np.array([-n[1], n[0]])
    pos = np.asarray(sc.center) + sc.radius * n
    return FlowState(pos, math.cos(x.phi) * n + math.sin(x.phi) * t)


def next_collision(table: BilliardTable, state: FlowState, *, bound=None):
    """First scatterer hit by the straight ray from ``state``.

    Returns ``(hit, time, symbol)`` where ``hit`` is a :class:`FlowState` on
    the boundary carrying the incoming direction, and the symbol's translate
    is relative to the lattice cell containing the start position.
    """
    bound = float(table.default_flight_bound if bound is None else bound)
    pos = np.asarray(state.position, dtype=float)
    d = np.asarray(state.direction, dtype=float)
    d = d / np.hypot(*d)
    cell = np.floor(table.to_lattice_coords(pos)).astype(np.int64)
    origin = table.translate(cell)
    reach = bound + float(table.radii.max()) + table.cell_diameter
    m = _translate_range(table.basis, reach)
    tg, tr, ce, ra = [], [], [], []
    for j in range(table.n_scatterers):
        for a, b in product(range(-m, m + 1), repeat=2):
            c = origin + table.centers[j] + table.translate((a, b))
            if np.hypot(*(c - pos)) <= bound + table.radii[j]:
                tg.append(j)
                tr.append((a, b))
                ce.append(c)
                ra.append(table.radii[j])
    cand = _Candidates(np.array(tg), np.array(tr).reshape(-1, 2),
                       np.array(ce, dtype=float).reshape(-1, 2), np.array(ra, dtype=float))
    # a start point on a boundary must not re-hit its own scatterer at t ~ 0
    wx = pos[0] - cand.center[:, 0]
    wy = pos[1] - cand.center[:, 1]
    on = np.abs(np.hypot(wx, wy) - cand.radius) <= 1e-12 * np.maximum(1.0, cand.radius)
    keep = ~on
    cand = _Candidates(*(arr[keep] for arr in cand))
    k, t, wx, wy, tie = _cast(pos[None, :], d[None, :], cand)
    if not (np.isfinite(t[0]) and t[0] <= bound):
        raise NoCollisionWithinBound("no scatterer within the flight bound")
    if tie[0]:
        raise GrazingInput("simultaneous tangency")
    k = int(k[0])
    hit = FlowState(pos + t[0] * d, d)
    sym = Symbol(int(cand.target[k]), (int(cand.translate[k, 0]), int(cand.translate[k, 1])))
    return hit, float(t[0]), sym


def sample_phase_points(table: BilliardTable, n: int, seed: int = 0, *, margin: float = 0.0):
    """``n`` points drawn from the invariant measure cos(phi) dr dphi (normalised).

    Scatterers are picked proportionally to circumference; ``sin(phi)`` is
    uniform on ``(-1, 1)``. Points with grazing margin below ``margin`` are redrawn.
    """
    rng = np.random.default_rng(seed)
    circ = table.circumferences
    prob = circ / circ.sum()
    s = rng.choice(table.n_scatterers, size=n, p=prob)
    r = rng.random(n) * circ[s]
    phi = np.arcsin(rng.uniform(-1.0, 1.0, n))
    bad = HALF_PI - np.abs(phi) < margin
    while bad.any():
        phi[bad] = np.arcsin(rng.uniform(-1.0, 1.0, int(bad.sum())))
        bad = HALF_PI - np.abs(phi) < margin
    return s, r, phi


@dataclass(frozen=True)
class FlightBounds:
    tau_min: float
    tau_max: float
    provenance: dict


def free_flight_bounds(table: BilliardTable, budget: int = 20000, seed: int = 0, *,
                       bound=None, refine: int = 32) -> FlightBounds:
    """Exact minimal free flight and a sampled-plus-optimised maximal one.

    The minimal flight equals the smallest gap between scatterer translates:
    the segment realising that gap cannot be blocked, otherwise the blocker
    would be closer. The maximum is approached by sampling followed by a
    shrinking random local search from the longest flights found.
    """
    tau_min = min_gap(table)
    s, r, phi = sample_phase_points(table, budget, seed)
    st = map_batch(table, s, r, phi, bound=bound)
    ok = st.status == OK
    tau = np.where(ok, st.tau, -np.inf)
    best = np.argsort(tau)[::-1][:refine]
    bs, br, bp, bt = s[best], r[best].copy(), phi[best].copy(), tau[best].copy()
    rng = np.random.default_rng([seed, 1])
    circ = table.circumferences[bs]
    for scale in np.geomspace(1e-2, 1e-12, 41):
        for _ in range(4):
            tr = np.mod(br + scale * circ * rng.standard_normal(len(bs)), circ)
            tp = np.clip(bp + scale * rng.standard_normal(len(bs)),
                         -HALF_PI + 1e-11, HALF_PI - 1e-11)
            st2 = map_batch(table, bs, tr, tp, bound=bound)
            t2 = np.where(st2.status == OK, st2.tau, -np.inf)
            up = t2 > bt
            br[up], bp[up], bt[up] = tr[up], tp[up], t2[up]
    sampled = float(max(bt.max(), tau[ok].max()))
    tangent = _bitangent_longest_flight(table, 2.0 * sampled)
    tau_max = max(sampled, tangent)
    return FlightBounds(float(tau_min), tau_max, {
        "tau_min": "exact",
        "tau_max": "estimate",
        "samples": int(budget),
        "tau_max_sampled": sampled,
        "tau_max_bitangent": tangent,
    })


def _bitangent_longest_flight(table: BilliardTable, length_guess: float) -> float:
    """Longest free segment lying on a line tangent to two scatterer translates.

    Segments are translated so their midpoint lies in the fundamental cell;
    every disk that can block such a segment is within ``reach`` of the origin.
    """
    rho_max = float(table.radii.max())
    reach = table.cell_diameter + 0.5 * length_guess + 2.0 * rho_max
    m = _translate_range(table.basis, reach + table.cell_diameter)
    C, rho = [], []
    for j in range(table.n_scatterers):
        for a, b in product(range(-m, m + 1), repeat=2):
            c = table.centers[j] + table.translate((a, b))
            if np.hypot(*c) <= reach + table.radii[j]:
                C.append(c)
                rho.append(table.radii[j])
    C = np.array(C)
    rho = np.array(rho)
    i, j = np.triu_indices(len(C), 1)
    D = C[i] - C[j]
    L = np.hypot(D[:, 0], D[:, 1])
    alpha = np.arctan2(D[:, 1], D[:, 0])
    normals, offsets = [], []
    for si, sj in product((1.0, -1.0), repeat=2):
        delta = si * rho[i] - sj * rho[j]
        ok = np.abs(delta) <= L
        acos = np.arccos(np.clip(delta[ok] / L[ok], -1.0, 1.0))
        for sgn in (1.0, -1.0):
            beta = alpha[ok] + sgn * acos
            n = np.column_stack([np.cos(beta), np.sin(beta)])
            normals.append(n)
            offsets.append(np.einsum("ij,ij->i", n, C[i][ok]) - si * rho[i][ok])
    n = np.concatenate(normals)
    c = np.concatenate(offsets)
    u = np.column_stack([-n[:, 1], n[:, 0]])
    best = 0.0
    for lo in range(0, len(n), 2048):
        nn, cc, uu = n[lo:lo + 2048], c[lo:lo + 2048], u[lo:lo + 2048]
        h = nn @ C.T - cc[:, None]
        cross = np.abs(h) < rho[None, :] * (1.0 - 1e-12)
        w = np.sqrt(np.where(cross, rho[None, :] ** 2 - h * h, 0.0))
        tc = uu @ C.T
        start = np.where(cross, tc - w, np.inf)
        end = np.where(cross, tc + w, np.inf)
        order = np.argsort(start, axis=1)
        start = np.take_along_axis(start, order, axis=1)
        end = np.take_along_axis(end, order, axis=1)
        reach_end = np.maximum.accumulate(end, axis=1)
        with np.errstate(invalid="ignore"):
            gap = start[:, 1:] - reach_end[:, :-1]
            valid = np.isfinite(gap) & (gap > 0)
            # midpoint of the free segment must sit within a cell diameter of the origin
            mid_t = np.where(valid, 0.5 * (start[:, 1:] + reach_end[:, :-1]), 0.0)
        mid = cc[:, None, None] * nn[:, None, :] + mid_t[:, :, None] * uu[:, None, :]
        near = np.hypot(mid[..., 0], mid[..., 1]) <= table.cell_diameter
        g = np.where(valid & near, gap, 0.0)
        if g.size:
            best = max(best, float(g.max()))
    return best


@dataclass(frozen=True)
class HorizonVerdict:
    finite: bool
    d_max: int
    witness: dict | None


def finite_horizon_check(table: BilliardTable, d_max: int = 10, tol: float = 1e-12) -> HorizonVerdict:
    """Search rational lattice directions for a corridor free of scatterers.

    Lines parallel to the lattice vector ``p e1 + q e2`` form a circle of
    transversal offsets of length ``area / |v|``; each scatterer shadows an
    arc of length ``2 radius``. A corridor is an uncovered arc. Zero-width
    corridors (tangential trajectories) count as infinite horizon.
    """
    basis = table.basis
    dirs = []
    for p in range(0, d_max + 1):
        for q in range(-d_max, d_max + 1):
            if (p, q) == (0, 0) or gcd(p, abs(q)) != 1 or (p == 0 and q < 0):
                continue
            dirs.append((max(abs(p), abs(q)), p, q))
    for _, p, q in sorted(dirs):
        v = p * basis[0] + q * basis[1]
        length = float(np.hypot(*v))
        width = table.area / length
        nrm = np.array([-v[1], v[0]]) / length
        offs = np.mod(table.centers @ nrm, width)
        rad = table.radii
        if np.any(2 * rad >= width + tol):
            continue
        order = np.argsort(offs)
        lo = offs[order] - rad[order]
        hi = offs[order] + rad[order]
        # sweep the circle starting at the first arc
        best_gap, best_at = -math.inf, 0.0
        reach = hi[0]
        for i in range(1, len(lo)):
            gap = lo[i] - reach
            if gap > best_gap:
                best_gap, best_at = gap, reach + 0.5 * gap
            reach = max(reach, hi[i])
        gap = lo[0] + width - reach
        if gap > best_gap:
            best_gap, best_at = gap, reach + 0.5 * gap
        if best_gap >= -tol:
            point = best_at * nrm
            return HorizonVerdict(False, d_max, {
                "direction": (p, q),
                "vector": tuple(float(x) for x in v),
                "corridor_width": float(max(best_gap, 0.0)),
                "point_on_axis": tuple(float(x) for x in point),
            })
    return HorizonVerdict(True, d_max, None)
