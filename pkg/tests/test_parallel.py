from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad
from hypothesis import given, settings
from hypothesis import strategies as st

from robintorsion.geometry import (
    GeometricSummary,
    GeometryError,
    convex_hull,
    rectangle,
    regular_polygon,
    summarize,
    unit_square,
)
from robintorsion.parallel import (
    dirichlet_lower_bound,
    energy_comparison,
    matched_shell,
    measure_profiles,
    shell_integrals,
    trial_profile,
)
from robintorsion.radial import ShellGeometry, dn_torsion_shell, plateau_value

from conftest import SQUARE_TAU_D


def disk_summary(R):
    return GeometricSummary(math.pi * R * R, 2 * math.pi * R, R, (math.pi * R * R, math.pi * R, math.pi))


class TestMatchedShell:
    def test_disk_data(self):
        ms = matched_shell(disk_summary(1.7))
        assert ms.shell.R1 == 0.0
        assert ms.shell.R2 == pytest.approx(1.7, rel=1e-15)

    def test_unit_square(self):
        ms = matched_shell(summarize(unit_square()))
        assert ms.shell.R2 == pytest.approx(2 / math.pi, rel=1e-15)
        assert ms.shell.R2 == pytest.approx(0.636620, abs=1e-6)
        assert ms.shell.R1 == pytest.approx(math.sqrt(16 - 4 * math.pi) / (2 * math.pi), rel=1e-14)
        assert ms.shell.R1 == pytest.approx(0.294915, abs=1e-6)

    def test_matches_area_and_perimeter(self):
        s = summarize(regular_polygon(5, 2.0))
        shell = matched_shell(s).shell
        assert shell.volume == pytest.approx(s.area, rel=1e-12)
        assert 2 * math.pi * shell.R2 == pytest.approx(s.perimeter, rel=1e-12)

    def test_scaling(self):
        poly = regular_polygon(7)
        a = matched_shell(summarize(poly)).shell
        b = matched_shell(summarize(poly.scaled(2.5))).shell
        assert b.R1 == pytest.approx(2.5 * a.R1, rel=1e-12)
        assert b.R2 == pytest.approx(2.5 * a.R2, rel=1e-12)

    def test_negative_deficit_rejected(self):
        bad = GeometricSummary(10.0, 4.0, 0.5, (10.0, 2.0, math.pi))
        with pytest.raises(GeometryError):
            matched_shell(bad)


class TestTrialProfile:
    @pytest.fixture
    def profile(self):
        return trial_profile(matched_shell(summarize(unit_square())))

    def test_dirichlet_end(self, profile):
        assert profile.phi(profile.R2) == 0.0
        assert profile.f(0.0) == 0.0

    def test_neumann_end(self, profile):
        h = 1e-7
        fd = (profile.phi(profile.R1 + h) - profile.phi(profile.R1 - h)) / (2 * h)
        assert abs(fd) < 1e-6 * profile.u_max
        assert profile.dphi(profile.R1) == pytest.approx(0.0, abs=1e-16)

    def test_plateau(self, profile):
        assert profile.u_max == pytest.approx(plateau_value(profile.shell), rel=1e-14)
        assert profile.f(2 * profile.cap) == profile.u_max
        assert profile.df(2 * profile.cap) == 0.0

    def test_strictly_decreasing(self, profile):
        r = np.linspace(profile.R1, profile.R2, 1001)
        assert np.all(np.diff(profile.phi(r)) < 0)

    def test_integral_matches_closed_form(self, profile):
        mass, _ = shell_integrals(profile)
        assert mass == pytest.approx(dn_torsion_shell(profile.shell), rel=1e-10)

    def test_energy_equals_mass(self, profile):
        # the shell solution satisfies int |grad u|^2 = int u
        mass, energy = shell_integrals(profile)
        assert energy == pytest.approx(mass, rel=1e-10)

    def test_level_inversion(self, profile):
        s = np.linspace(0, profile.cap, 17)
        back = profile.distance_of_level(profile.f(s))
        assert np.allclose(back, s, atol=1e-12 * profile.cap * 10)

    def test_empty_hole(self):
        p = trial_profile(ShellGeometry(2, 0.0, 1.0))
        assert p.u_max == pytest.approx(0.25, rel=1e-15)

    def test_planar_only(self):
        with pytest.raises(ValueError):
            trial_profile(ShellGeometry(3, 0.2, 1.0))


class TestLowerBound:
    def test_disk_limit(self):
        report = dirichlet_lower_bound(regular_polygon(256))
        assert report.bound == pytest.approx(math.pi / 8, rel=1e-2)

    def test_square_sandwich(self):
        report = dirichlet_lower_bound(unit_square())
        assert report.tau_dn == pytest.approx(0.027188, abs=2e-6)
        assert report.bound >= report.tau_dn
        assert report.bound <= SQUARE_TAU_D
        assert report.margin > 0

    def test_square_plateau(self):
        # the square's inradius exceeds the cap R2 - R1, so psi reaches u_M
        report = dirichlet_lower_bound(unit_square())
        assert report.inradius > report.shell.R2 - report.shell.R1
        assert report.psi_max == pytest.approx(report.u_max, rel=1e-15)

    def test_thin_rectangle_below_plateau_is_impossible(self):
        for aspect in (2.0, 5.0, 20.0):
            report = dirichlet_lower_bound(rectangle(aspect, 1.0))
            assert report.psi_max <= report.u_max * (1 + 1e-14)
            assert report.bound >= report.tau_dn

    @pytest.mark.parametrize("s", [0.3, 2.0, 7.5])
    def test_scaling(self, s):
        poly = regular_polygon(9, phase=0.1)
        a = dirichlet_lower_bound(poly).bound
        b = dirichlet_lower_bound(poly.scaled(s)).bound
        assert b == pytest.approx(s**4 * a, rel=1e-10)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.integers(3, 25))
    def test_above_shell_for_random_polygons(self, seed, n):
        rng = np.random.default_rng(seed)
        ang = np.sort(rng.uniform(0, 2 * np.pi, n))
        pts = np.column_stack([np.cos(ang), rng.uniform(0.2, 1.0) * np.sin(ang)])
        try:
            poly = convex_hull(pts)
        except GeometryError:
            return
        report = dirichlet_lower_bound(poly)
        assert report.bound >= report.tau_dn * (1 - 1e-8)
        # a perimeter rate of at least 2 pi forces the inradius past the cap
        assert report.inradius >= (report.shell.R2 - report.shell.R1) * (1 - 1e-12)
        assert report.psi_max == pytest.approx(report.u_max, rel=1e-13)


class TestMeasures:
    def test_zero_level(self):
        poly = regular_polygon(6)
        m = measure_profiles(poly, [0.0])
        assert m.mu[0] == pytest.approx(poly.area, rel=1e-14)
        assert m.eta[0] == pytest.approx(poly.area, rel=1e-12)

    def test_square_dominated(self):
        report = dirichlet_lower_bound(unit_square())
        grid = np.linspace(0, report.psi_max, 200, endpoint=False)
        m = measure_profiles(unit_square(), grid)
        assert m.dominated
        assert np.all(m.mu >= m.eta)

    def test_disk_equality(self):
        poly = regular_polygon(256)
        report = dirichlet_lower_bound(poly)
        grid = np.linspace(0, report.psi_max, 100, endpoint=False)
        m = measure_profiles(poly, grid)
        assert np.max(np.abs(m.mu - m.eta)) < 1e-3

    @pytest.mark.parametrize("poly", [unit_square(), regular_polygon(5)], ids=["square", "pentagon"])
    def test_layer_cake(self, poly):
        # integrating the distribution function recovers the coarea integral
        report = dirichlet_lower_bound(poly)
        value, _ = quad(lambda s: float(measure_profiles(poly, [s]).mu[0]), 0.0, report.psi_max,
                        limit=200, epsabs=0, epsrel=1e-11)
        assert value == pytest.approx(report.integral, rel=1e-10)

    def test_levels_beyond_maximum_rejected(self):
        report = dirichlet_lower_bound(unit_square())
        with pytest.raises(ValueError):
            measure_profiles(unit_square(), [report.psi_max])
        with pytest.raises(ValueError):
            measure_profiles(unit_square(), [-1e-3])


class TestEnergyComparison:
    def test_square_strict(self):
        c = energy_comparison(unit_square())
        assert c.energy_margin > 0
        assert c.integral_margin > 0
        assert c.perimeters_ordered

    def test_disk_equalities(self):
        c = energy_comparison(regular_polygon(256))
        assert c.energy_trial == pytest.approx(c.energy_shell, rel=1e-3)
        assert c.integral_trial == pytest.approx(c.integral_shell, rel=1e-3)

    @pytest.mark.parametrize("poly", [rectangle(3.0, 1.0), regular_polygon(3), regular_polygon(11)])
    def test_ordering_holds(self, poly):
        c = energy_comparison(poly)
        assert c.energy_margin >= -1e-12
        assert c.integral_margin >= -1e-12
        assert c.perimeters_ordered
