"""Independent reference computations used only by the tests.

None of these share code with the package beyond reading table attributes.
"""

import math
from itertools import product

import numpy as np


def translates(table, reach, origin=(0.0, 0.0)):
    """All scatterer translates (j, k, center, radius) with center within ``reach`` of origin."""
    B = np.array(table.lattice, dtype=float)
    m = int(math.ceil(reach / min(np.linalg.norm(B[0]), np.linalg.norm(B[1])) * 2)) + 2
    out = []
    for j, sc in enumerate(table.scatterers):
        for a, b in product(range(-m, m + 1), repeat=2):
            c = np.array(sc.center) + a * B[0] + b * B[1]
            if math.dist(c, origin) <= reach + sc.radius:
                out.append((j, (a, b), c, sc.radius))
    return out


def march(table, p, v, *, exclude=None, bound=20.0, eps=1e-13, max_iter=200000):
    """Sphere tracing along p + t v; returns (t, j, k, center, radius) of the first hit.

    Each step advances by the distance to the nearest circle, so the ray never
    jumps over a scatterer; the final hit is polished by bisection on the
    signed distance of the nearest circle.
    """
    p = np.asarray(p, float)
    v = np.asarray(v, float) / np.linalg.norm(v)
    cand = [c for c in translates(table, bound + 2.0, p) if (c[0], c[1]) != exclude]
    C = np.array([c[2] for c in cand])
    R = np.array([c[3] for c in cand])
    t = 0.0
    for _ in range(max_iter):
        d = np.hypot(*(p + t * v - C).T) - R
        i = int(np.argmin(d))
        if d[i] < eps:
            break
        t += d[i]
        if t > bound:
            return None
    # bisection on the chosen circle between t - step and t
    lo, hi = max(t - 1e-6, 0.0), t
    f = lambda s: math.hypot(*(p + s * v - C[i])) - R[i]
    if f(lo) > 0 and f(hi) <= 0:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if f(mid) > 0:
                lo = mid
            else:
                hi = mid
        t = 0.5 * (lo + hi)
    j, k, c, rad = cand[i]
    return t, j, k, c, rad


def point_and_velocity(table, s, r, phi):
    sc = table.scatterers[s]
    th = r / sc.radius
    n = np.array([math.cos(th), math.sin(th)])
    tg = np.array([-n[1], n[0]])
    return np.array(sc.center) + sc.radius * n, math.cos(phi) * n + math.sin(phi) * tg


def oracle_map(table, s, r, phi, bound=20.0):
    """Collision map by ray marching: (s', r', phi', tau, (j, k))."""
    p, v = point_and_velocity(table, s, r, phi)
    hit = march(table, p, v, exclude=(s, (0, 0)), bound=bound)
    if hit is None:
        return None
    t, j, k, c, rad = hit
    q = p + t * v
    n = (q - c) / np.linalg.norm(q - c)
    w = v - 2 * np.dot(v, n) * n
    tg = np.array([-n[1], n[0]])
    ang = math.atan2(n[1], n[0]) % (2 * math.pi)
    return j, rad * ang, math.atan2(np.dot(w, tg), np.dot(w, n)), t, (j, k)


def segment_hits_disk(a, b, c, rad):
    """True if the closed segment ab meets the open disk of radius rad at c."""
    a, b, c = (np.asarray(x, float) for x in (a, b, c))
    d = b - a
    s = np.clip(np.dot(c - a, d) / np.dot(d, d), 0.0, 1.0)
    return np.linalg.norm(a + s * d - c) < rad


def wrapped(dr, circ):
    return abs((dr + 0.5 * circ) % circ - 0.5 * circ)
