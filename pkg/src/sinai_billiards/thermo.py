"""Entropy and pressure estimators, closed-form bounds, and periodic-orbit measures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import HALF_PI, orbit_batch, sample_phase_points, free_flight_bounds
from .errors import EmptyCensus, InsufficientData, InvalidInput, UnsupportedPotential
from .geometry import BilliardTable, min_curvature, min_gap
from .measures import EmpiricalMeasure, Potential
from .singularity import count_cells

__all__ = [
    "BoundReport",
    "S0Estimate",
    "S0Grid",
    "GrowthRate",
    "OrbitGrowth",
    "srb_entropy_lower_bound",
    "srb_quadrature",
    "s0_estimate",
    "s0_grid",
    "sparse_recurrence_check",
    "entropy_from_cells",
    "entropy_from_orbits",
    "tail_entropy_bound",
    "usc_defect_bound",
    "atomic_pressure",
    "periodic_orbit_measure",
    "equilibrium_approximation",
    "weak_star_distance",
    "test_functions",
]

LOG2 = math.log(2.0)


@dataclass
class BoundReport:
    name: str
    value: float
    inputs: dict
    caveats: list = field(default_factory=list)
    verdict: str | None = None

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise InvalidInput(f"{self.name}: bound is not finite")

    def to_dict(self) -> dict:
        out = {"name": self.name, "value": self.value, "inputs": self.inputs,
               "caveats": list(self.caveats)}
        if self.verdict is not None:
            out["verdict"] = self.verdict
        return out


# ------------------------------------------------------------- SRB bound

_GL = {k: np.polynomial.legendre.leggauss(k) for k in (10, 20)}


def _srb_integrand(phi, a):
    c = np.cos(phi)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = c * np.log1p(a / c)
    return np.where(c > 0, v, 0.0)


def _gl(f, lo, hi, k):
    x, w = _GL[k]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return half * float(np.dot(w, f(mid + half * x)))


def srb_quadrature(tau_min: float, kappa_min: float, tol: float = 1e-12):
    """Return ``(value, error_estimate, intervals)`` of the SRB entropy bound.

    The integrand is even in phi, so half the integral over ``[-pi/2, pi/2]``
    equals the integral over ``[0, pi/2]``. Intervals are bisected until the
    10- and 20-point Gauss-Legendre rules agree.
    """
    tau_min, kappa_min = float(tau_min), float(kappa_min)
    if not tau_min >= 0:
        raise InvalidInput("tau_min must be nonnegative")
    if not kappa_min > 0:
        raise InvalidInput("kappa_min must be positive")
    a = 2.0 * tau_min * kappa_min
    if a == 0:
        return 0.0, 0.0, 1

    def f(x):
        return _srb_integrand(x, a)

    total, err, used = 0.0, 0.0, 0
    stack = [(0.0, HALF_PI, tol)]
    while stack:
        lo, hi, t = stack.pop()
        coarse = _gl(f, lo, hi, 10)
        fine = _gl(f, lo, hi, 20)
        if abs(fine - coarse) <= t or hi - lo < 1e-12:
            total += fine
            err += abs(fine - coarse)
            used += 1
        else:
            mid = 0.5 * (lo + hi)
            stack.append((mid, hi, 0.5 * t))
            stack.append((lo, mid, 0.5 * t))
    return total, err, used


def srb_entropy_lower_bound(tau_min: float, kappa_min: float, tol: float = 1e-12) -> float:
    """Lower bound for the entropy of the smooth invariant measure.

    >>> round(srb_entropy_lower_bound(0.15, 1.0), 6)
    0.36163
    """
    return srb_quadrature(tau_min, kappa_min, tol)[0]


# ------------------------------------------------------------------ s0


@dataclass(frozen=True)
class S0Estimate:
    n0: int
    phi0: float
    value: float
    witness: object  # PhasePoint or None


@dataclass
class S0Grid:
    n0s: tuple
    phi0s: tuple
    values: np.ndarray  # (len(n0s), len(phi0s))
    candidates: int

    def min(self) -> float:
        return float(self.values.min())

    def rows(self):
        for i, n0 in enumerate(self.n0s):
            for j, p in enumerate(self.phi0s):
                yield n0, p, float(self.values[i, j])


def _abs_phi_orbits(table, s, r, phi, length, bound):
    ob = orbit_batch(table, s, r, phi, length - 1, bound=bound)
    a = np.abs(ob.phi)
    # positions at or after a failed step are unusable
    steps = np.arange(length)[None, :]
    bad = (ob.failed_at[:, None] >= 0) & (steps > ob.failed_at[:, None])
    return np.where(bad, np.nan, a)


def _window_max(absphi, n0, phi0):
    """Max over rows and windows of the fraction of |phi| > phi0, with argmax."""
    N, L = absphi.shape
    if n0 > L:
        raise InvalidInput("window longer than the candidate orbits")
    ind = (absphi > phi0).astype(float)
    nan = np.isnan(absphi).astype(float)
    cs = np.concatenate([np.zeros((N, 1)), np.cumsum(ind, axis=1)], axis=1)
    cn = np.concatenate([np.zeros((N, 1)), np.cumsum(nan, axis=1)], axis=1)
    win = cs[:, n0:] - cs[:, :-n0]
    badwin = (cn[:, n0:] - cn[:, :-n0]) > 0
    win = np.where(badwin, -1.0, win)
    k = int(np.argmax(win))
    row, col = divmod(k, win.shape[1])
    return max(float(win[row, col]), 0.0) / n0, row, col


def _climb(table, s, r, phi, n0, phi0, rounds, seed, bound):
    """Random local search maximising grazing frequency over an n0-window."""
    rng = np.random.default_rng(seed)
    circ = table.circumferences[s]

    def score(rr, pp):
        a = _abs_phi_orbits(table, s, rr, pp, n0, bound)
        cnt = np.nansum(a > phi0, axis=1)
        # tie-break pushes the sub-threshold angles toward phi0
        soft = np.nanmean(np.minimum(np.nan_to_num(a, nan=0.0), phi0) / max(phi0, 1e-12), axis=1)
        return np.where(np.isnan(a).any(axis=1), -1.0, cnt + 0.5 * soft)

    best = score(r, phi)
    r, phi = r.copy(), phi.copy()
    for scale in np.geomspace(0.1, 1e-6, rounds):
        tr = np.mod(r + scale * circ * rng.standard_normal(len(s)), circ)
        tp = np.clip(phi + scale * rng.standard_normal(len(s)), -HALF_PI + 1e-9, HALF_PI - 1e-9)
        sc = score(tr, tp)
        up = sc > best
        r[up], phi[up], best[up] = tr[up], tp[up], sc[up]
    return r, phi


def s0_grid(table: BilliardTable, n0s=(5, 10, 20), phi0s=(1.0, 1.2, 1.4, 1.5), *,
            budget: int = 20000, seed: int = 0, climb: int = 16, rounds: int = 40,
            bound=None) -> S0Grid:
    """s0 estimates over a grid of windows and thresholds on one candidate set.

    Candidates are sampled orbit segments of length ``max(n0s)`` plus the
    segments started from hill-climbed points for every grid cell; all grid
    values are then read off the same candidate set, so they are
    nonincreasing in ``phi0`` and in ``n0`` along multiples.
    """
    n0s = tuple(int(n) for n in n0s)
    phi0s = tuple(float(p) for p in phi0s)
    L = max(n0s)
    s, r, phi = sample_phase_points(table, budget, seed, margin=1e-9)
    base = _abs_phi_orbits(table, s, r, phi, L, bound)
    extra_s, extra_r, extra_p = [], [], []
    for i, n0 in enumerate(n0s):
        for j, p0 in enumerate(phi0s):
            ind = np.nan_to_num(base[:, :n0] > p0).sum(axis=1)
            top = np.argsort(-ind, kind="stable")[:climb]
            cr, cp = _climb(table, s[top], r[top], phi[top], n0, p0, rounds,
                            [seed, i, j], bound)
            extra_s.append(s[top])
            extra_r.append(cr)
            extra_p.append(cp)
    es = np.concatenate(extra_s)
    er, ep = np.concatenate(extra_r), np.concatenate(extra_p)
    cand = np.concatenate([base, _abs_phi_orbits(table, es, er, ep, L, bound)])
    vals = np.zeros((len(n0s), len(phi0s)))
    for i, n0 in enumerate(n0s):
        for j, p0 in enumerate(phi0s):
            vals[i, j] = _window_max(cand, n0, p0)[0]
    return S0Grid(n0s, phi0s, vals, len(cand))


def s0_estimate(table: BilliardTable, n0: int, phi0: float, *, budget: int = 20000,
                seed: int = 0, climb: int = 16, rounds: int = 40, bound=None) -> S0Estimate:
    """Max observed frequency of collisions with |phi| > phi0 among n0 consecutive ones.

    A lower bound for the supremum over phase space.
    """
    if not 0 <= phi0 < HALF_PI:
        raise InvalidInput("phi0 must lie in [0, pi/2)")
    if n0 < 1:
        raise InvalidInput("n0 must be positive")
    from .dynamics import PhasePoint

    s, r, phi = sample_phase_points(table, budget, seed, margin=1e-9)
    base = _abs_phi_orbits(table, s, r, phi, n0, bound)
    ind = np.nan_to_num(base > phi0).sum(axis=1)
    top = np.argsort(-ind, kind="stable")[:climb]
    cr, cp = _climb(table, s[top], r[top], phi[top], n0, phi0, rounds, [seed, n0], bound)
    S = np.concatenate([s, s[top]])
    R = np.concatenate([r, cr])
    P = np.concatenate([phi, cp])
    cand = np.concatenate([base, _abs_phi_orbits(table, s[top], cr, cp, n0, bound)])
    value, row, _ = _window_max(cand, n0, phi0)
    return S0Estimate(n0, phi0, value, PhasePoint(int(S[row]), float(R[row]), float(P[row])))


# ------------------------------------------------- sparse recurrence


def sparse_recurrence_check(table: BilliardTable, potential: Potential | None = None, *,
                            mode: str = "paper", pressure_lb: float | None = None,
                            grid: S0Grid | None = None, s0: float | None = None,
                            flight=None, **grid_kw) -> BoundReport:
    """Margin ``(P_lb - sup g) - s0 log 2``; positive means sparse recurrence holds.

    ``mode="paper"`` takes s0 = 1/2; ``mode="estimated"`` uses the minimum of
    an s0 grid (a lower bound, so a positive margin is only indicative).
    """
    potential = potential or Potential.zero()
    tau_min = min_gap(table)
    kappa = min_curvature(table)
    caveats = []
    if pressure_lb is None:
        if potential.kind != "zero":
            raise UnsupportedPotential("a pressure lower bound is required for nonzero potentials")
        pressure_lb = srb_entropy_lower_bound(tau_min, kappa)
        source = "srb_entropy_lower_bound"
    else:
        source = "user"
    if potential.kind == "scaled_tau":
        flight = flight or free_flight_bounds(table)
        sup_g = potential.sup(flight.tau_min, flight.tau_max)
        caveats.append("sup g uses the estimated maximal free flight")
    else:
        sup_g = potential.sup()
    inputs = {"pressure_lb": pressure_lb, "pressure_source": source, "sup_g": sup_g,
              "tau_min": tau_min, "kappa_min": kappa, "mode": mode,
              "potential": potential.describe()}
    if s0 is not None:
        inputs["s0_source"] = "user"
    elif mode == "paper":
        s0 = 0.5
        inputs["s0_source"] = "assumed 1/2"
    elif mode == "estimated":
        grid = grid or s0_grid(table, **grid_kw)
        s0 = grid.min()
        inputs["s0_source"] = "grid minimum"
        inputs["s0_grid"] = [[n0, p, v] for n0, p, v in grid.rows()]
        caveats.append("s0 estimates are lower bounds of a supremum; a positive margin is not a proof")
    else:
        raise InvalidInput(f"unknown mode {mode!r}")
    inputs["s0"] = float(s0)
    margin = (pressure_lb - sup_g) - s0 * LOG2
    if 0 < margin < 1e-3:
        caveats.append(f"margin {margin:.2e} is small relative to the bound's inputs")
    verdict = "sparse recurrence holds" if margin > 0 else "sparse recurrence not certified"
    return BoundReport("sparse_recurrence", float(margin), inputs, caveats, verdict)


# --------------------------------------------------------- growth rates


@dataclass(frozen=True)
class GrowthRate:
    rate: float
    intercept: float
    ns: tuple
    increments: tuple  # log c_n - log c_{n-1}
    rates: tuple  # (1/n) log c_n


def entropy_from_cells(counts) -> GrowthRate:
    """Least-squares slope of log(count) against n.

    >>> round(entropy_from_cells([(n, 2 ** n) for n in range(1, 6)]).rate, 12)
    0.693147180560
    """
    pairs = sorted((int(n), float(c)) for n, c in counts)
    if len(pairs) < 3:
        raise InsufficientData("need at least three values of n")
    n = np.array([p[0] for p in pairs], dtype=float)
    c = np.array([p[1] for p in pairs])
    if np.any(c <= 0):
        raise InsufficientData("cell counts must be positive")
    y = np.log(c)
    slope, icpt = np.polyfit(n, y, 1)
    inc = tuple(float(x) for x in np.diff(y) / np.diff(n))
    rates = tuple(float(v / k) if k else float("nan") for v, k in zip(y, n))
    return GrowthRate(float(slope), float(icpt), tuple(int(k) for k in n), inc, rates)


@dataclass(frozen=True)
class OrbitGrowth:
    ns: tuple
    sequence: tuple  # (1/n) log sum exp(S_n g)
    plateau: float
    k: int


def entropy_from_orbits(censuses, potential: Potential | None = None, *, table=None,
                        k: int = 3) -> OrbitGrowth:
    """``(1/n) log sum_{Fix T^n} exp(S_n g)`` per census and the mean of the last ``k`` terms."""
    censuses = sorted(censuses, key=lambda c: c.period)
    if not censuses:
        raise EmptyCensus("no censuses given")
    ns, seq = [], []
    for c in censuses:
        total = c.weighted_sum if potential is None else _reweight(c, potential, table)
        if not c.orbits or not total > 0:
            raise EmptyCensus(f"census for n={c.period} is empty")
        ns.append(c.period)
        seq.append(math.log(total) / c.period)
    k = max(1, min(k, len(seq)))
    return OrbitGrowth(tuple(ns), tuple(seq), float(np.mean(seq[-k:])), k)


def _reweight(census, potential, table):
    if table is None and potential.kind != "zero":
        raise InvalidInput("a table is needed to evaluate the potential")
    total = 0.0
    n = census.period
    for orb in census.orbits:
        s, r, phi = orb.arrays()
        sg = float(np.sum(potential(table, s, r, phi, tau=np.array(orb.taus))))
        total += orb.period * math.exp((n // orb.period) * sg)
    return total


# ----------------------------------------------------- closed-form bounds


def tail_entropy_bound(s0: float, K: float, tau_min: float, tau_max: float) -> BoundReport:
    """``(3 + 2 floor(tau_max / tau_min)) s0 log(2K)``."""
    s0, K, tau_min, tau_max = float(s0), float(K), float(tau_min), float(tau_max)
    if not 0 <= s0 <= 1:
        raise InvalidInput("s0 must lie in [0, 1]")
    if not K >= 1:
        raise InvalidInput("K must be at least 1")
    if not (tau_min > 0 and tau_max >= tau_min and math.isfinite(tau_max)):
        raise InvalidInput("need 0 < tau_min <= tau_max < inf")
    factor = 3 + 2 * math.floor(tau_max / tau_min)
    value = factor * s0 * math.log(2.0 * K)
    return BoundReport("tail_entropy_bound", value,
                       {"s0": s0, "K": K, "tau_min": tau_min, "tau_max": tau_max, "factor": factor},
                       ["s0 and K are estimates when computed numerically"])


def usc_defect_bound(P_mu: float, mu_S_mass: float, P_top: float, P_muS: float = 0.0) -> BoundReport:
    """``P_mu + m (P_top - P_muS)`` for a limit measure with singular mass ``m``."""
    P_mu, m, P_top, P_muS = float(P_mu), float(mu_S_mass), float(P_top), float(P_muS)
    if not 0 <= m <= 1:
        raise InvalidInput("singular mass must lie in [0, 1]")
    if not all(math.isfinite(x) for x in (P_mu, P_top, P_muS)):
        raise InvalidInput("pressures must be finite")
    value = P_mu + m * (P_top - P_muS)
    return BoundReport("usc_defect_bound", value,
                       {"P_mu": P_mu, "mu_S_mass": m, "P_top": P_top, "P_muS": P_muS},
                       ["P_top is a surrogate when computed numerically"])


def atomic_pressure(mu_S: EmpiricalMeasure, potential: Potential, table: BilliardTable) -> float:
    """Pressure of an atomic measure: zero entropy, so just the integral of g."""
    mu = mu_S.normalized()
    return mu.integrate(lambda s, r, phi: potential(table, s, r, phi))


# ---------------------------------------------------------------- measures


def periodic_orbit_measure(census, potential: Potential | None = None, *,
                           table=None) -> EmpiricalMeasure:
    """Atoms on Fix T^n weighted by ``exp(S_n g)``, normalised."""
    if not census.orbits:
        raise EmptyCensus(f"census for n={census.period} is empty")
    s, r, phi, sg = census.fixed_points()
    if potential is not None:
        if table is None and potential.kind != "zero":
            raise InvalidInput("a table is needed to evaluate the potential")
        sg = []
        for orb in census.orbits:
            a, b, c = orb.arrays()
            val = float(np.sum(potential(table, a, b, c, tau=np.array(orb.taus))))
            sg.append(np.full(orb.period, (census.period // orb.period) * val))
        sg = np.concatenate(sg)
    w = np.exp(sg - sg.max())
    return EmpiricalMeasure(s, r, phi, w / w.sum())


def equilibrium_approximation(table: BilliardTable, n: int, potential: Potential | None = None, *,
                              cells=None, budget: int = 100_000, seed: int = 0, chi: float = 0.99,
                              workers: int = 1, bound=None) -> EmpiricalMeasure:
    """Averaged measure built from one representative per discovered n-cell.

    In each cell the first sample whose ``exp(S_n g)`` is within a factor
    ``chi`` of the cell's best sample is taken. The weighted atomic measure
    on representatives is then averaged along its first ``n`` iterates.
    """
    potential = potential or Potential.zero()
    if n < 1:
        raise InvalidInput("n must be positive")
    cells = cells if cells is not None else count_cells(table, n, budget, seed=seed,
                                                          workers=workers, bound=bound)
    if cells.n != n:
        raise InvalidInput("cell census has the wrong n")
    ob = orbit_batch(table, cells.scatterer, cells.r, cells.phi, n, bound=bound)
    if potential.kind == "zero":
        sg = np.zeros(len(cells.r))
    else:
        vals = potential(table, ob.scatterer[:, :n], ob.r[:, :n], ob.phi[:, :n], tau=ob.tau)
        sg = np.nansum(vals, axis=1)
    ok = ob.valid
    dropped = int((~ok).sum())
    cid = np.where(ok, cells.point_cell, -1)
    reps = []
    best = {}
    for k in np.nonzero(ok)[0]:
        c = int(cid[k])
        best[c] = max(best.get(c, -np.inf), sg[k])
    chosen = set()
    for k in np.nonzero(ok)[0]:
        c = int(cid[k])
        if c not in chosen and sg[k] >= best[c] + math.log(chi):
            chosen.add(c)
            reps.append(k)
    reps = np.array(reps, dtype=np.int64)
    if not len(reps):
        raise EmptyCensus("no regular cell representatives")
    g = sg[reps]
    w = np.exp(g - g.max())
    w /= w.sum()
    parts = []
    for i in range(n):
        parts.append(EmpiricalMeasure(ob.scatterer[reps, i], ob.r[reps, i], ob.phi[reps, i], w / n))
    mu = EmpiricalMeasure.concatenate(parts).normalized()
    mu.dropped = dropped
    return mu


# --------------------------------------------------------- weak-* distance


def test_functions(table: BilliardTable, m: int = 32):
    """Fixed dictionary of ``m`` smooth functions ``f(scatterer, r, phi)``.

    Each is a scatterer indicator times ``a(u) b(w)``, with ``u = r / circumference``,
    ``w = phi / (pi/2)`` and ``a, b`` trigonometric of order <= 2, taken in
    order of total order and interleaved over scatterers.
    """
    one = ("1", 0, lambda x: np.ones_like(x))
    ufun = [one,
            ("cos 2pi u", 1, lambda x: np.cos(2 * np.pi * x)), ("sin 2pi u", 1, lambda x: np.sin(2 * np.pi * x)),
            ("cos 4pi u", 2, lambda x: np.cos(4 * np.pi * x)), ("sin 4pi u", 2, lambda x: np.sin(4 * np.pi * x))]
    wfun = [one,
            ("sin pi w/2", 1, lambda x: np.sin(0.5 * np.pi * x)), ("cos pi w", 1, lambda x: np.cos(np.pi * x)),
            ("sin pi w", 2, lambda x: np.sin(np.pi * x)), ("cos 2pi w", 2, lambda x: np.cos(2 * np.pi * x))]
    pairs = sorted(((a[1] + b[1], i, j) for i, a in enumerate(ufun) for j, b in enumerate(wfun)))
    circ = table.circumferences
    out = []
    for _, i, j in pairs:
        for sc in range(table.n_scatterers):
            fa, fb = ufun[i][2], wfun[j][2]

            def f(s, r, phi, sc=sc, fa=fa, fb=fb):
                s = np.asarray(s)
                u = np.asarray(r) / circ[s]
                return np.where(s == sc, fa(u) * fb(np.asarray(phi) / HALF_PI), 0.0)

            f.label = f"[{sc}] {ufun[i][0]} * {wfun[j][0]}"
            out.append(f)
    return out[:m]


def weak_star_distance(mu: EmpiricalMeasure, nu: EmpiricalMeasure, m: int = 32, *,
                       table: BilliardTable) -> float:
    funcs = test_functions(table, m)
    return max(abs(mu.integrate(f) - nu.integrate(f)) for f in funcs)
