"""Periodic orbits from cyclic itineraries.

A cyclic itinerary fixes the chain of scatterer translates visited in the
universal cover. Periodic orbits are the critical points of the total chord
length as a function of the polar angles of the reflection points; the
stationarity system is solved by damped Newton iteration, batched over many
itineraries, and every candidate is confirmed by re-simulation.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import GRAZING_CUTOFF, HALF_PI, PhasePoint, Symbol, orbit_batch
from .errors import BudgetExceeded, InvalidInput, NonConvergence
from .geometry import BilliardTable
from .measures import Potential
from .singularity import Itinerary, count_cells

__all__ = [
    "PeriodicOrbit",
    "OrbitCensus",
    "find_periodic_orbit",
    "solve_itineraries",
    "enumerate_fixed_points",
    "grazing_orbit_scan",
    "canonical_rotation",
    "census_to_csv",
    "census_from_csv",
]

SOLVER_TOL = 1e-10
DEDUP_TOL = 1e-6
CLOSURE_TOL = 1e-8


@dataclass(frozen=True)
class PeriodicOrbit:
    """A periodic orbit of primitive period ``period``."""

    period: int
    itinerary: Itinerary
    points: tuple[PhasePoint, ...]
    taus: tuple[float, ...]
    length: float
    grazing_margin: float
    reflection_residual: float
    closure_error: float

    @property
    def birkhoff_tau(self) -> float:
        return self.length

    def arrays(self):
        s = np.array([p.scatterer for p in self.points], dtype=np.int64)
        r = np.array([p.r for p in self.points])
        phi = np.array([p.phi for p in self.points])
        return s, r, phi


@dataclass
class OrbitCensus:
    """Periodic points of T^n found by :func:`enumerate_fixed_points`.

    ``count`` is the number of points of Fix T^n: an orbit of primitive period
    ``p`` (a divisor of ``n``) contributes ``p`` points, each with
    ``S_n g = (n / p) S_p g``.
    """

    period: int
    orbits: list
    weighted_sum: float
    count: int
    tried: int
    potential: dict = field(default_factory=lambda: {"kind": "zero"})
    unconverged: int = 0
    partial: bool = False
    birkhoff_g: list = field(default_factory=list)

    def fixed_points(self):
        """Arrays ``(scatterer, r, phi, S_n g)`` over all points of Fix T^n."""
        s, r, phi, w = [], [], [], []
        for orb, sg in zip(self.orbits, self.birkhoff_g):
            a, b, c = orb.arrays()
            s.append(a)
            r.append(b)
            phi.append(c)
            w.append(np.full(len(a), (self.period // orb.period) * sg))
        if not s:
            return (np.zeros(0, np.int64), np.zeros(0), np.zeros(0), np.zeros(0))
        return tuple(np.concatenate(x) for x in (s, r, phi, w))


# ---------------------------------------------------------------- unfolding


def _words_array(words) -> np.ndarray:
    """Cyclic words -> int array (M, n, 4) of (source, target, k1, k2)."""
    out = []
    for w in words:
        row = []
        prev = w[-1][0]
        for sym in w:
            j, (a, b) = sym
            row.append((prev, j, a, b))
            prev = j
        out.append(row)
    return np.array(out, dtype=np.int64).reshape(len(out), -1, 4)


def _unfold(table: BilliardTable, W: np.ndarray):
    """Unfolded centers C[:, i] of the i-th reflection, radii and total drift.

    Reflection ``i`` happens on the target of symbol ``i - 1`` (cyclically),
    so reflection 0 is on the start scatterer.
    """
    M, n, _ = W.shape
    cen = table.centers
    step = cen[W[:, :, 1]] + W[:, :, 2:4] @ table.basis - cen[W[:, :, 0]]
    C = np.zeros((M, n + 1, 2))
    C[:, 0] = cen[W[:, 0, 0]]
    C[:, 1:] = C[:, :1] + np.cumsum(step, axis=1)
    rho = table.radii[W[:, :, 0]]
    drift = C[:, n] - C[:, 0]
    return C[:, :n], rho, drift


def _geometry(theta, C, rho, drift):
    e = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    q = C + rho[..., None] * e
    q_next = np.roll(q, -1, axis=1)
    q_next[:, -1] += drift
    chord = q_next - q
    ell = np.linalg.norm(chord, axis=-1)
    u = chord / ell[..., None]
    return e, q, chord, ell, u


def _grad_hess(theta, C, rho, drift):
    M, n = theta.shape
    e, q, chord, ell, u = _geometry(theta, C, rho, drift)
    d1 = rho[..., None] * np.stack([-e[..., 1], e[..., 0]], axis=-1)  # dq/dtheta
    d2 = -rho[..., None] * e
    u_prev = np.roll(u, 1, axis=1)
    ell_prev = np.roll(ell, 1, axis=1)
    grad = np.einsum("mik,mik->mi", d1, u_prev - u)

    def proj(uu, v):
        # (I - u u^T) v
        return v - np.einsum("mik,mik->mi", uu, v)[..., None] * uu

    H = np.zeros((M, n, n))
    idx = np.arange(n)
    diag = (np.einsum("mik,mik->mi", d1, proj(u_prev, d1)) / ell_prev
            + np.einsum("mik,mik->mi", d1, proj(u, d1)) / ell
            + np.einsum("mik,mik->mi", d2, u_prev - u))
    H[:, idx, idx] += diag
    d1_next = np.roll(d1, -1, axis=1)
    off = -np.einsum("mik,mik->mi", d1, proj(u, d1_next)) / ell
    nxt = (idx + 1) % n
    np.add.at(H, (slice(None), idx, nxt), off)
    np.add.at(H, (slice(None), nxt, idx), off)
    return grad, H, ell


def _seed(C, rho, drift):
    prev = np.roll(C, 1, axis=1)
    prev[:, 0] -= drift
    nxt = np.roll(C, -1, axis=1)
    nxt[:, -1] += drift
    aim = 0.5 * (prev + nxt) - C
    return np.arctan2(aim[..., 1], aim[..., 0])


def _newton(theta, C, rho, drift, max_iter=60, tol=SOLVER_TOL):
    theta = theta.copy()
    M = len(theta)
    g, H, ell = _grad_hess(theta, C, rho, drift)
    gn = np.abs(g).max(axis=1)
    done = gn < tol
    lam = np.zeros(M)
    eye = np.eye(theta.shape[1])
    for _ in range(max_iter):
        act = np.nonzero(~done)[0]
        if not len(act):
            break
        Ha = H[act] + lam[act, None, None] * eye
        try:
            step = np.linalg.solve(Ha, -g[act][..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.stack([np.linalg.lstsq(h, -gg, rcond=None)[0] for h, gg in zip(Ha, g[act])])
        big = np.abs(step).max(axis=1)
        step *= np.minimum(1.0, 0.5 / np.maximum(big, 1e-300))[:, None]
        alpha = np.ones(len(act))
        pending = np.ones(len(act), dtype=bool)
        new_theta = theta[act].copy()
        new_g, new_H, new_gn = g[act].copy(), H[act].copy(), gn[act].copy()
        for _ls in range(30):
            if not pending.any():
                break
            p = np.nonzero(pending)[0]
            trial = theta[act[p]] + alpha[p, None] * step[p]
            tg, tH, _ = _grad_hess(trial, C[act[p]], rho[act[p]], drift[act[p]])
            tgn = np.abs(tg).max(axis=1)
            better = np.isfinite(tgn) & (tgn < gn[act[p]] * (1.0 - 1e-4 * alpha[p]) + 1e-15)
            acc = p[better]
            new_theta[acc], new_g[acc], new_H[acc], new_gn[acc] = (
                trial[better], tg[better], tH[better], tgn[better])
            pending[acc] = False
            alpha[p[~better]] *= 0.5
        stuck = act[pending]
        moved = act[~pending]
        theta[moved], g[moved], H[moved], gn[moved] = (
            new_theta[~pending], new_g[~pending], new_H[~pending], new_gn[~pending])
        # Levenberg fallback for rows where no step along the Newton direction helped
        scale = np.abs(H[stuck]).max(axis=(1, 2)) if len(stuck) else np.zeros(0)
        lam[stuck] = np.maximum(4.0 * lam[stuck], 1e-3 * np.maximum(scale, 1e-12))
        lam[moved] *= 0.25
        done = gn < tol
    return theta, done, gn


def _phase(table, W, theta, C, rho, drift):
    e, q, chord, ell, u = _geometry(theta, C, rho, drift)
    t = np.stack([-e[..., 1], e[..., 0]], axis=-1)
    u_in = np.roll(u, 1, axis=1)
    phi = np.arctan2(np.einsum("mik,mik->mi", u, t), np.einsum("mik,mik->mi", u, e))
    circ = 2.0 * np.pi * rho
    r = np.mod(rho * theta, circ)
    r = np.where(r >= circ, 0.0, r)
    refl = u_in - 2.0 * np.einsum("mik,mik->mi", u_in, e)[..., None] * e
    resid = np.linalg.norm(refl - u, axis=-1).max(axis=1)
    outward = (np.einsum("mik,mik->mi", u, e) > 0) & (np.einsum("mik,mik->mi", u_in, e) < 0)
    return r, phi, ell, resid, outward.all(axis=1)


def solve_itineraries(table: BilliardTable, words, *, bound=None, seeds=None,
                      max_iter: int = 60):
    """Solve many cyclic itineraries of a common length at once.

    ``words`` is a list of tuples of :class:`Symbol`; the start scatterer of a
    word is the target of its last symbol. Returns a list with a
    :class:`PeriodicOrbit`, ``None`` (no valid orbit) or the string
    ``"unconverged"`` per word.
    """
    if not words:
        return []
    W = _words_array(words)
    M, n, _ = W.shape
    C, rho, drift = _unfold(table, W)
    theta0 = _seed(C, rho, drift) if seeds is None else np.asarray(seeds, dtype=float).reshape(M, n)
    theta, ok, gn = _newton(theta0, C, rho, drift, max_iter=max_iter)
    r, phi, ell, resid, outward = _phase(table, W, theta, C, rho, drift)
    margin = HALF_PI - np.abs(phi)
    good = ok & outward & (margin.min(axis=1) > GRAZING_CUTOFF)
    # re-simulation from the first point must reproduce the word and close up
    out = [None] * M
    idx = np.nonzero(good)[0]
    if len(idx):
        ob = orbit_batch(table, W[idx, 0, 0], r[idx, 0], phi[idx, 0], n, bound=bound)
        want = W[idx][:, :, 1:].reshape(len(idx), -1)
        lab = ob.labels()[:, 1:]
        circ = 2.0 * np.pi * rho[idx, 0]
        dr = np.abs(np.mod(ob.r[:, -1] - r[idx, 0] + 0.5 * circ, circ) - 0.5 * circ)
        close = np.maximum(dr, np.abs(ob.phi[:, -1] - phi[idx, 0]))
        match = ob.valid & np.all(lab == want, axis=1) & (ob.scatterer[:, -1] == W[idx, 0, 0])
        for k, m in enumerate(idx):
            if not (match[k] and close[k] < CLOSURE_TOL):
                continue
            w = tuple(words[m])
            p = _primitive_period(w)
            start = int(W[m, 0, 0])
            pts = tuple(PhasePoint(int(W[m, i, 0]), float(r[m, i]), float(phi[m, i]))
                        for i in range(p))
            taus = tuple(float(x) for x in ell[m, :p])
            out[m] = PeriodicOrbit(
                period=p,
                itinerary=Itinerary(start, w[:p]),
                points=pts,
                taus=taus,
                length=float(sum(taus)),
                grazing_margin=float(margin[m, :p].min()),
                reflection_residual=float(resid[m]),
                closure_error=float(close[k]),
            )
    for m in np.nonzero(~ok)[0]:
        out[m] = "unconverged"
    return out


def _as_word(it) -> tuple:
    if isinstance(it, Itinerary):
        syms = it.symbols
        if syms and syms[-1].scatterer != it.start:
            raise InvalidInput("a cyclic itinerary must end on its start scatterer")
    else:
        syms = it
    return tuple(Symbol(int(s[0]), (int(s[1][0]), int(s[1][1]))) for s in syms)


def find_periodic_orbit(table: BilliardTable, itin, *, bound=None, seed_theta=None,
                        max_iter: int = 60) -> PeriodicOrbit | None:
    """Periodic orbit with the given cyclic itinerary, or None if none validates.

    ``itin`` is an :class:`Itinerary` whose last symbol returns to the start
    scatterer, or a plain sequence of symbols.
    """
    word = _as_word(itin)
    if len(word) < 2:
        raise InvalidInput("cyclic itineraries need length >= 2")
    res = solve_itineraries(table, [word], bound=bound,
                            seeds=None if seed_theta is None else [seed_theta],
                            max_iter=max_iter)[0]
    if res == "unconverged":
        raise NonConvergence(f"Newton iteration did not converge for {word}")
    return res


# ------------------------------------------------------------- enumeration


def _primitive_period(word) -> int:
    n = len(word)
    for p in range(1, n + 1):
        if n % p == 0 and word[:p] * (n // p) == tuple(word):
            return p
    return n


def canonical_rotation(word) -> tuple:
    word = tuple(word)
    return min(word[i:] + word[:i] for i in range(len(word)))


def _alphabet_from_blocks(table, m, budget, seed, bound, workers):
    """Symbols (source, target, k1, k2) and allowed m-blocks from sampled itineraries."""
    cc = count_cells(table, m, budget, seed=seed, bound=bound, workers=workers)
    blocks = set()
    for row in cc.labels:
        src = int(row[0])
        blk = []
        for i in range(m):
            j, a, b = (int(x) for x in row[1 + 3 * i: 4 + 3 * i])
            blk.append((src, j, a, b))
            src = j
        blocks.add(tuple(blk))
    return blocks


def _cyclic_words(symbols, n, blocks, m, cap):
    """Canonical cyclic words of length n whose cyclic m-windows are all allowed blocks.

    Symbols carry their source so consecutive symbols must chain. Yields
    tuples of indices into ``symbols``.
    """
    order = sorted(symbols)
    index = {s: i for i, s in enumerate(order)}
    succ = {i: [] for i in range(len(order))}
    for s in order:
        for t in order:
            if s[1] == t[0]:
                succ[index[s]].append(index[t])
    block_idx = {tuple(index[s] for s in b) for b in blocks} if blocks is not None else None
    count = 0
    word = []

    def ok_prefix():
        if block_idx is None or len(word) < m:
            return True
        return tuple(word[-m:]) in block_idx

    def ok_cycle():
        if word[-1] not in succ or word[0] not in succ[word[-1]]:
            return False
        if block_idx is not None:
            ext = word + word[: m - 1]
            for i in range(len(word) - m + 1, len(word)):
                if tuple(ext[i:i + m]) not in block_idx:
                    return False
        return tuple(word) == canonical_rotation(word)

    def rec():
        nonlocal count
        if len(word) == n:
            if ok_cycle():
                count += 1
                if count > cap:
                    raise BudgetExceeded("itinerary budget exceeded")
                yield tuple(word)
            return
        for j in succ[word[-1]]:
            if j < word[0]:
                continue
            word.append(j)
            if ok_prefix():
                yield from rec()
            word.pop()

    for a in range(len(order)):
        word.append(a)
        yield from rec()
        word.pop()
    return order


def _dedup(orbits):
    seen = {}
    kept = []
    for orb in orbits:
        s, r, phi = orb.arrays()
        k = np.lexsort((phi, r, s))[0]
        key = (int(s[k]), round(float(r[k]) / DEDUP_TOL), round(float(phi[k]) / DEDUP_TOL))
        dup = False
        for dr in (-1, 0, 1):
            for dp in (-1, 0, 1):
                for other in seen.get((key[0], key[1] + dr, key[2] + dp), ()):
                    if other.period == orb.period and _same_points(other, orb):
                        dup = True
        if not dup:
            seen.setdefault(key, []).append(orb)
            kept.append(orb)
    return kept


def _same_points(a, b):
    sa, ra, pa = a.arrays()
    sb, rb, pb = b.arrays()
    ia, ib = np.lexsort((pa, ra, sa)), np.lexsort((pb, rb, sb))
    return (np.array_equal(sa[ia], sb[ib]) and np.abs(ra[ia] - rb[ib]).max() < DEDUP_TOL
            and np.abs(pa[ia] - pb[ib]).max() < DEDUP_TOL)


def _birkhoff(table, orb, potential: Potential) -> float:
    s, r, phi = orb.arrays()
    return float(np.sum(potential(table, s, r, phi, tau=np.array(orb.taus))))


def enumerate_fixed_points(table: BilliardTable, n: int, potential: Potential | None = None, *,
                           block: int = 3, block_budget: int = 100_000, max_itineraries: int = 2_000_000,
                           seed: int = 0, bound=None, workers: int = 1,
                           batch: int = 4096) -> OrbitCensus:
    """Census of Fix T^n.

    Cyclic words are built from the symbols seen in sampled itineraries;
    every cyclic window of length ``block`` must be a sampled block (use
    ``block=1`` for plain symbol-graph enumeration). Each canonical word,
    primitive or not, is solved once.
    """
    if n < 2:
        raise InvalidInput("n must be at least 2")
    potential = potential or Potential.zero()
    m = max(1, min(block, n))
    blocks = _alphabet_from_blocks(table, m, block_budget, seed, bound, workers)
    symbols = sorted({s for b in blocks for s in b})
    order = sorted(symbols)
    found, tried, unconverged = [], 0, 0
    partial = False
    pending = []

    def flush():
        nonlocal unconverged
        words = [tuple(Symbol(order[i][1], (order[i][2], order[i][3])) for i in w) for w in pending]
        for res in solve_itineraries(table, words, bound=bound):
            if res == "unconverged":
                unconverged += 1
            elif res is not None:
                found.append(res)
        pending.clear()

    gen = _cyclic_words(symbols, n, blocks if m > 1 else None, m, max_itineraries)
    try:
        for w in gen:
            tried += 1
            pending.append(w)
            if len(pending) >= batch:
                flush()
    except BudgetExceeded:
        partial = True
    if pending:
        flush()
    census = _make_census(table, n, found, potential, tried, unconverged, partial)
    if partial:
        raise BudgetExceeded(f"more than {max_itineraries} itineraries of length {n}", census)
    return census


def _make_census(table, n, orbits, potential, tried, unconverged=0, partial=False):
    orbits = _dedup(orbits)
    orbits.sort(key=lambda o: (o.period, str(o.itinerary)))
    sg = [_birkhoff(table, o, potential) for o in orbits]
    count = sum(o.period for o in orbits)
    total = math.fsum(o.period * math.exp((n // o.period) * g) for o, g in zip(orbits, sg))
    return OrbitCensus(n, orbits, total, count, tried, potential.describe(), unconverged,
                       partial, sg)


def grazing_orbit_scan(table: BilliardTable, n_max: int, threshold: float, *,
                       censuses=None, **kw):
    """Orbits of period <= n_max with grazing margin below ``threshold``.

    An empty result says only that no such orbit was found.
    """
    seen = set()
    hits = []
    for n in range(2, n_max + 1):
        census = (censuses or {}).get(n) or enumerate_fixed_points(table, n, **kw)
        for orb in census.orbits:
            key = canonical_rotation(orb.itinerary.symbols)
            if key in seen:
                continue
            seen.add(key)
            if orb.grazing_margin < threshold:
                hits.append((orb, orb.grazing_margin))
    return hits


CENSUS_COLUMNS = ["n", "itinerary", "period", "length", "grazing_margin", "S_n_g"]


def census_to_csv(census: OrbitCensus, fh=None) -> str:
    buf = fh or io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CENSUS_COLUMNS)
    for orb, g in zip(census.orbits, census.birkhoff_g):
        w.writerow([census.period, str(orb.itinerary), orb.period, repr(orb.length),
                    repr(orb.grazing_margin), repr((census.period // orb.period) * g)])
    return buf.getvalue() if fh is None else ""


def census_from_csv(text: str) -> list[dict]:
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        rows.append({
            "n": int(row["n"]),
            "itinerary": Itinerary.parse(row["itinerary"]),
            "period": int(row["period"]),
            "length": float(row["length"]),
            "grazing_margin": float(row["grazing_margin"]),
            "S_n_g": float(row["S_n_g"]),
        })
    return rows
