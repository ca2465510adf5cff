import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sinai_billiards.errors import (
    DegenerateLattice,
    IndexOutOfRange,
    InvalidInput,
    OverlappingScatterers,
    UnsupportedFamily,
)
from sinai_billiards.geometry import (
    boundary_frame,
    build_table,
    custom,
    hexagonal,
    load_table,
    min_curvature,
    min_gap,
    square,
    table_to_spec,
    validate_domain,
)

from oracles import translates


def brute_gap(table, cells=3):
    best = math.inf
    for i, si in enumerate(table.scatterers):
        for j, c, _k, rad in [(t[0], t[2], t[1], t[3]) for t in translates(table, cells * 3.0, si.center)]:
            if j == i and np.allclose(c, si.center):
                continue
            best = min(best, math.dist(c, si.center) - si.radius - rad)
    return best


def test_hexagonal_22_one_unit_scatterer_gap_02():
    t = hexagonal(2.2)
    assert t.n_scatterers == 1
    assert t.scatterers[0].radius == 1.0
    assert brute_gap(t) == pytest.approx(0.2, abs=1e-12)
    assert min_gap(t) == pytest.approx(0.2, abs=1e-12)


def test_hexagonal_tangent_rejected():
    with pytest.raises(OverlappingScatterers):
        hexagonal(2.0)


def test_square_radii():
    t = square(0.25, 0.4)
    assert sorted(t.radii.tolist()) == [0.25, 0.4]
    assert t.scatterers[0].radius == 0.4 and t.scatterers[0].center == (0.0, 0.0)
    assert t.scatterers[1].center == (0.5, 0.5)
    assert t.area == pytest.approx(1.0)


def test_square_min_gap_matches_brute_force():
    t = square(0.25, 0.4)
    assert min_gap(t) == pytest.approx(brute_gap(t), abs=1e-12)
    assert min_gap(t) == pytest.approx(math.sqrt(2) / 2 - 0.65, abs=1e-12)


def test_degenerate_lattice():
    with pytest.raises(DegenerateLattice):
        custom([[1, 0], [2, 0]], [{"center": [0, 0], "radius": 0.1}])


def test_nonpositive_radius():
    with pytest.raises(InvalidInput):
        custom([[1, 0], [0, 1]], [{"center": [0, 0], "radius": 0.0}])


def test_validate_hexagonal_215():
    v = validate_domain({"family": "hexagonal", "d": 2.15})
    assert v.accepted and not v.violated_constraints
    assert v.margin == pytest.approx(min(0.15, 4 / math.sqrt(3) - 2.15))


def test_validate_hexagonal_20_rejected():
    v = validate_domain({"family": "hexagonal", "d": 2.0})
    assert not v.accepted
    assert "d > 2" in v.violated_constraints


def test_validate_square_accepted():
    v = validate_domain({"family": "square", "R": 0.3, "Rprime": 0.4})
    assert v.accepted


def test_validate_square_reports_each_violation():
    v = validate_domain({"family": "square", "R": 0.45, "Rprime": 0.3})
    assert not v.accepted
    assert set(v.violated_constraints) == {"R < R'", "R + R' < sqrt(2)/2", "R' > sqrt(2)/4"}


def test_validate_custom_unsupported():
    t = custom([[1, 0], [0, 1]], [{"center": [0.5, 0.5], "radius": 0.3}])
    with pytest.raises(UnsupportedFamily):
        validate_domain(t)


def test_unknown_family():
    with pytest.raises(UnsupportedFamily):
        build_table({"family": "triangle"})


@pytest.mark.parametrize("table,kappa", [
    (hexagonal(2.2), 1.0), (hexagonal(2.3), 1.0), (square(0.25, 0.4), 2.5),
    (custom([[5, 0], [0, 5]], [{"center": [0, 0], "radius": 2.0}]), 0.5),
])
def test_min_curvature(table, kappa):
    assert min_curvature(table) == pytest.approx(kappa)


def test_boundary_frame_conventions():
    t = custom([[5, 0], [0, 5]], [{"center": [0, 0], "radius": 1.0}])
    f = boundary_frame(t, 0, 0.0)
    assert np.allclose(f.position, [1, 0]) and np.allclose(f.outward_normal, [1, 0])
    assert np.allclose(f.tangent, [0, 1]) and f.curvature == 1.0
    g = boundary_frame(t, 0, math.pi / 2)
    assert np.allclose(g.position, [0, 1]) and np.allclose(g.outward_normal, [0, 1])


def test_boundary_frame_wraps():
    t = square(0.25, 0.4)
    a = boundary_frame(t, 0, 2 * math.pi * 0.4)
    b = boundary_frame(t, 0, 0.0)
    assert np.allclose(a.position, b.position, atol=1e-15)


def test_boundary_frame_index_error():
    with pytest.raises(IndexOutOfRange):
        boundary_frame(hexagonal(2.2), 3, 0.0)


def test_spec_round_trip(tmp_path):
    for t in (hexagonal(2.2), square(0.25, 0.4),
              custom([[1, 0], [0.3, 1]], [{"center": [0.1, 0.2], "radius": 0.2}])):
        p = tmp_path / "t.json"
        p.write_text(json.dumps(table_to_spec(t)))
        assert load_table(p) == t


def test_missing_field():
    with pytest.raises(InvalidInput):
        build_table({"family": "square", "R": 0.2})


@settings(max_examples=30, deadline=None)
@given(st.floats(2.001, 4 / math.sqrt(3) - 1e-3))
def test_accepted_hexagonal_tables_have_positive_gaps(d):
    t = hexagonal(d)
    assert validate_domain(t).accepted
    assert brute_gap(t) > 0


@settings(max_examples=30, deadline=None)
@given(st.floats(0.36, 0.49), st.floats(0.0, 1.0))
def test_accepted_square_tables(rp, frac):
    lo = max(0.5 - rp, 0.0) + 1e-6
    hi = min(rp, math.sqrt(2) / 2 - rp) - 1e-6
    if hi <= lo:
        return
    R = lo + frac * (hi - lo)
    t = square(R, rp)
    assert validate_domain(t).accepted
    assert brute_gap(t) > 0
    assert abs(min_curvature(t) * rp - 1.0) <= 2.3e-16


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 2 * math.pi * 0.4), st.integers(0, 1))
def test_frame_periodic_and_orthonormal(r, i):
    t = square(0.25, 0.4)
    f = boundary_frame(t, i, r)
    g = boundary_frame(t, i, r + t.circumferences[i])
    assert np.allclose(f.position, g.position, atol=1e-12)
    assert abs(np.dot(f.outward_normal, f.tangent)) < 1e-15
    assert np.linalg.norm(f.outward_normal) == pytest.approx(1.0)
    assert np.linalg.norm(f.tangent) == pytest.approx(1.0)
    assert f.curvature == pytest.approx(1 / t.radii[i])
