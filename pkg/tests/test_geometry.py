from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robintorsion.geometry import (
    ConvexPolygon,
    GeometricSummary,
    GeometryError,
    ParallelProfile,
    area_at,
    coarea_area,
    convex_hull,
    inequality_checks,
    inner_parallel_body,
    inradius,
    level_profiles,
    outer_parallel_body,
    perimeter_at,
    rectangle,
    regular_polygon,
    steiner_outer_check,
    summarize,
    unit_square,
)


def hexagon(side=1.0):
    return regular_polygon(6, circumradius=side)


@st.composite
def random_polygons(draw):
    seed = draw(st.integers(0, 10_000))
    n = draw(st.integers(3, 30))
    rng = np.random.default_rng(seed)
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    rad = rng.uniform(0.5, 1.5, n)
    pts = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    try:
        return convex_hull(pts)
    except GeometryError:
        return regular_polygon(n)


class TestValidation:
    def test_square_accepted(self):
        assert len(unit_square()) == 4

    def test_clockwise_rejected_with_vertex(self):
        with pytest.raises(GeometryError) as info:
            ConvexPolygon(unit_square().vertices[::-1])
        assert info.value.vertex is not None

    def test_reflex_vertex_named(self):
        dart = [[0, 0], [2, 0], [1, 0.3], [1, 2]]
        with pytest.raises(GeometryError, match="vertex 2"):
            ConvexPolygon(dart)

    def test_collinear_vertex_rejected(self):
        with pytest.raises(GeometryError, match="collinear"):
            ConvexPolygon([[0, 0], [1, 0], [2, 0], [2, 2], [0, 2]])

    def test_repeated_point_rejected(self):
        with pytest.raises(GeometryError, match="repeated"):
            ConvexPolygon([[0, 0], [1, 0], [1, 0], [1, 1], [0, 1]])

    @pytest.mark.parametrize("verts", [[[0, 0], [1, 1]], [[0, 0], [1, 0], [np.nan, 1]]])
    def test_malformed_rejected(self, verts):
        with pytest.raises(GeometryError):
            ConvexPolygon(verts)

    def test_vertices_are_read_only(self):
        poly = unit_square()
        with pytest.raises(ValueError):
            poly.vertices[0, 0] = 5.0


class TestSummary:
    def test_unit_square(self):
        s = summarize(unit_square())
        assert s.area == 1.0
        assert s.perimeter == 4.0
        assert s.inradius == pytest.approx(0.5, abs=1e-12)
        assert s.quermass == (1.0, 2.0, math.pi)

    def test_hexagon_inradius(self):
        assert inradius(hexagon()) == pytest.approx(math.sqrt(3) / 2, abs=1e-12)

    def test_256gon_perimeter(self):
        p = summarize(regular_polygon(256)).perimeter
        assert abs(p - 2 * math.pi) < 5e-4
        assert p == pytest.approx(512 * math.sin(math.pi / 256), rel=1e-14)

    def test_rectangle_inradius(self):
        assert inradius(rectangle(3.0, 1.0)) == pytest.approx(0.5, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(random_polygons())
    def test_summary_invariants(self, poly):
        s = summarize(poly)
        assert s.perimeter**2 >= 4 * math.pi * s.area
        assert 0 < s.inradius <= s.perimeter / (2 * math.pi)


class TestInnerBodies:
    def test_zero_is_identity(self):
        poly = hexagon()
        assert np.allclose(inner_parallel_body(poly, 0.0).vertices, poly.vertices, atol=1e-12)

    def test_square_quarter(self):
        body = inner_parallel_body(unit_square(), 0.25)
        assert body.perimeter == pytest.approx(2.0, abs=1e-14)
        assert body.area == pytest.approx(0.25, abs=1e-14)

    @pytest.mark.parametrize("poly", [unit_square(), hexagon(), rectangle(2, 0.5)])
    def test_beyond_inradius_is_empty(self, poly):
        assert inner_parallel_body(poly, 1.01 * inradius(poly)) is None

    def test_negative_distance_rejected(self):
        with pytest.raises(ValueError):
            inner_parallel_body(unit_square(), -0.1)

    @settings(max_examples=30, deadline=None)
    @given(random_polygons(), st.floats(0.0, 0.95), st.floats(0.0, 1.0))
    def test_monotone_and_nested(self, poly, a, b):
        r = inradius(poly)
        s, t = sorted((a * r, a * r + b * (0.95 - a) * r))
        if t - s < 1e-9 * r:
            return
        outer, inner = inner_parallel_body(poly, s), inner_parallel_body(poly, t)
        assert inner.perimeter < outer.perimeter
        assert inner.area < outer.area
        slack = outer.offsets[None, :] - inner.vertices @ outer.normals.T
        assert np.all(slack >= -1e-12 * poly.diameter)


class TestProfiles:
    def test_disk_rate_near_two_pi(self):
        poly = regular_polygon(256)
        r = inradius(poly)
        prof = level_profiles(poly, np.linspace(0, 0.999 * r, 200))
        assert np.all(np.abs(prof.perimeter_rate - 2 * math.pi) < 1e-3)

    def test_square_rate_is_eight(self):
        prof = level_profiles(unit_square(), np.linspace(0, 0.499, 50))
        assert np.allclose(prof.perimeter_rate, 8.0, rtol=1e-13)
        assert prof.min_rate >= 2 * math.pi

    def test_grid_outside_range_rejected(self):
        with pytest.raises(ValueError):
            level_profiles(unit_square(), [0.0, 0.6])
        with pytest.raises(ValueError):
            level_profiles(unit_square(), [-0.1, 0.2])

    def test_profile_matches_clipping(self):
        poly = rectangle(3.0, 1.0).translated([0.2, -0.4])
        prof = ParallelProfile(poly)
        for t in np.linspace(0, 0.49, 23):
            assert prof.perimeter(t) == pytest.approx(perimeter_at(poly, t), rel=1e-12)
            assert prof.area(t) == pytest.approx(area_at(poly, t), rel=1e-11, abs=1e-15)

    def test_rectangle_has_no_events_until_collapse(self):
        prof = ParallelProfile(rectangle(3.0, 1.0))
        assert prof.inradius == pytest.approx(0.5, abs=1e-12)
        assert prof.events == []

    def test_with_polygons(self):
        prof = level_profiles(hexagon(), [0.0, 0.3], with_polygons=True)
        assert prof.polygons[1].perimeter == pytest.approx(prof.perimeter[1], rel=1e-12)

    def test_distance_of_area_inverts(self):
        prof = ParallelProfile(hexagon())
        t = prof.distance_of_area(1.0)
        assert prof.area(t) == pytest.approx(1.0, rel=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(random_polygons())
    def test_monotone_convex_profile(self, poly):
        prof = ParallelProfile(poly)
        t = np.linspace(0, prof.inradius, 400)
        p = prof.perimeter(t)
        assert np.all(np.diff(p) <= 1e-12 * poly.perimeter)
        assert np.all(np.diff(prof.area(t)) <= 1e-12 * poly.area)
        # rates only grow at events since vertices drop out
        rates = [s.rate for s in prof.segments]
        assert np.all(np.diff(rates) >= -1e-9)
        assert min(rates) >= 2 * math.pi - 1e-12

    @settings(max_examples=30, deadline=None)
    @given(random_polygons())
    def test_event_inradius_matches_bisection(self, poly):
        assert ParallelProfile(poly).inradius == pytest.approx(inradius(poly), abs=1e-11 * poly.diameter)

    @settings(max_examples=25, deadline=None)
    @given(random_polygons())
    def test_coarea_closure(self, poly):
        assert coarea_area(poly, rtol=1e-11) == pytest.approx(poly.area, rel=1e-9)

    def test_coarea_square(self):
        assert coarea_area(unit_square()) == pytest.approx(1.0, rel=1e-12)


class TestSteiner:
    def test_rho_zero(self):
        assert steiner_outer_check(hexagon(), 0.0) == pytest.approx(hexagon().area, rel=1e-14)

    def test_square_rho_one(self):
        assert steiner_outer_check(unit_square(), 1.0) == pytest.approx(5 + math.pi, rel=1e-12)
        assert 5 + math.pi == pytest.approx(8.14159, abs=1e-5)

    def test_perimeter_derivative_is_two_pi(self):
        poly = regular_polygon(7, 1.3)
        for rho in (1e-1, 1e-3, 1e-5):
            _, p = outer_parallel_body(poly, rho)
            assert (p - poly.perimeter) / rho == pytest.approx(2 * math.pi, rel=1e-9)

    @settings(max_examples=30, deadline=None)
    @given(random_polygons(), st.floats(0.0, 5.0))
    def test_two_ways_agree(self, poly, rho):
        steiner_outer_check(poly, rho)

    def test_negative_rho_rejected(self):
        with pytest.raises(ValueError):
            outer_parallel_body(unit_square(), -1.0)


class TestInequalities:
    def test_disk_deficit_small(self):
        n = 256
        report = inequality_checks(summarize(regular_polygon(n)))
        assert 0 <= 1 - report["isoperimetric_ratio"] < 1e-3
        # raw deficit of the inscribed n-gon is 4 pi^4 / (3 n^2) to leading order
        assert report["isoperimetric_deficit"] == pytest.approx(4 * math.pi**4 / (3 * n * n), rel=1e-3)

    def test_square_deficit(self):
        report = inequality_checks(summarize(unit_square()))
        assert report["isoperimetric_deficit"] == pytest.approx(16 - 4 * math.pi, rel=1e-14)

    def test_third_quermass_is_pi(self):
        for poly in (unit_square(), hexagon(), regular_polygon(5, 3.0)):
            assert summarize(poly).quermass[2] == math.pi
            assert inequality_checks(summarize(poly))["af_w1_w2_deficit"] == 0.0

    def test_corrupted_summary_flagged(self):
        bad = GeometricSummary(area=10.0, perimeter=4.0, inradius=0.5, quermass=(10.0, 2.0, math.pi))
        with pytest.raises(GeometryError):
            inequality_checks(bad)


class TestTransforms:
    def test_scaling(self):
        poly = hexagon()
        big = poly.scaled(3.0)
        assert big.area == pytest.approx(9 * poly.area, rel=1e-14)
        assert inradius(big) == pytest.approx(3 * inradius(poly), rel=1e-11)

    def test_translation_invariance(self):
        poly = regular_polygon(9)
        moved = poly.translated([5.0, -2.0])
        assert coarea_area(moved) == pytest.approx(coarea_area(poly), rel=1e-11)

    def test_interior_angles_sum(self):
        assert hexagon().interior_angles().sum() == pytest.approx(4 * math.pi, rel=1e-14)
