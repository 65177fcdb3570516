"""Corner fits, contour integrals, far-field fits, censuses."""

from dataclasses import dataclass

import numpy as np
import pytest

from cornerflow.analysis import (circulation, corner_census, farfield_fit,
                                 fit_corner, mass_flux, sign_attainment,
                                 sign_component_census)
from cornerflow.errors import FitQualityError, FluidDomainError
from cornerflow.geometry import (CircleContour, Corner, FlatPlate, Polygon,
                                 PolylineContour)
from cornerflow.incompressible import (CircleFlow, FarField, PlateFlow,
                                       kutta_solve, panel_solve)

TWO_PI = 2 * np.pi
TRIANGLE = Polygon([(1.0, 0.0), (-0.5, np.sqrt(3) / 2), (-0.5, -np.sqrt(3) / 2)])
SQUARE = Polygon([(0.5, -0.5), (0.5, 0.5), (-0.5, 0.5), (-0.5, -0.5)])


def wedge_corner(beta, wall_angle=0.0):
    d0 = complex(np.exp(1j * wall_angle))
    d1 = complex(np.exp(1j * (wall_angle + beta)))
    if abs(beta - TWO_PI) < 1e-12:
        d1 = d0
    return Corner(vertex=0j, exterior_angle_beta=beta, protruding=beta > np.pi,
                  side_directions=(d0, d1), corner_id=0)


@dataclass
class SyntheticWedgeFlow:
    """psi = Im sum_k a_k z**(k pi / beta); walls along theta = 0, beta.

    Powers use the branch with arg z in [0, 2 pi) measured from the wall,
    so the field is single-valued across the whole wedge.
    """

    beta: float
    coeffs: tuple
    far: FarField = FarField(1.0, 0.0)
    body = None

    def _power(self, z, p):
        z = np.asarray(z, dtype=complex)
        r = np.abs(z)
        th = np.mod(np.angle(z), TWO_PI)
        return r**p * np.exp(1j * p * th)

    def stream(self, z):
        return np.imag(sum(a * self._power(z, k * np.pi / self.beta)
                           for k, a in enumerate(self.coeffs, start=1)))

    def velocity(self, z):
        return sum((k * np.pi / self.beta) * a
                   * self._power(z, k * np.pi / self.beta - 1.0)
                   for k, a in enumerate(self.coeffs, start=1))


class TestFitCorner:
    def test_single_mode_recovery(self):
        beta = 1.5 * np.pi
        flow = SyntheticWedgeFlow(beta, (1.0,))
        rep = fit_corner(flow, wedge_corner(beta), radii=np.geomspace(0.01, 0.1, 6))
        assert rep.a1_estimate == pytest.approx(1.0, rel=1e-10)
        assert rep.fitted_exponent == pytest.approx(np.pi / beta - 1.0, abs=1e-6)
        assert rep.singular

    @pytest.mark.parametrize("beta", [1.25 * np.pi, 1.5 * np.pi,
                                      1.75 * np.pi, 2.0 * np.pi])
    def test_exponent_recovery_two_modes(self, beta):
        flow = SyntheticWedgeFlow(beta, (0.7, -0.4))
        rep = fit_corner(flow, wedge_corner(beta),
                         radii=np.geomspace(0.01, 0.1, 6))
        assert rep.a1_estimate == pytest.approx(0.7, rel=1e-6)
        assert rep.fitted_exponent == pytest.approx(np.pi / beta - 1.0, abs=5e-3)

    def test_regular_corner_not_singular(self):
        beta = 1.5 * np.pi
        flow = SyntheticWedgeFlow(beta, (0.0, 1.0))
        rep = fit_corner(flow, wedge_corner(beta),
                         radii=np.geomspace(0.01, 0.1, 6))
        assert abs(rep.a1_estimate) < 1e-12
        assert not rep.singular
        assert rep.sign_attainment == "both"

    def test_requires_decade_of_radii(self):
        flow = SyntheticWedgeFlow(1.5 * np.pi, (1.0,))
        with pytest.raises(FitQualityError):
            fit_corner(flow, wedge_corner(1.5 * np.pi),
                       radii=[0.05, 0.07, 0.1])

    def test_plate_alpha_zero_both_corners_regular(self):
        flow = PlateFlow(4.0, 0.0, FarField(1.0, 0.0))
        for corner in flow.body.corners:
            rep = fit_corner(flow, corner)
            assert abs(rep.a1_estimate) < 1e-10
            assert not rep.singular

    def test_kutta_plate_trailing_regular_leading_singular(self):
        alpha = np.pi / 6
        gstar = PlateFlow(4.0, alpha, FarField(1.0, 0.0)).kutta_circulation(0)
        flow = PlateFlow(4.0, alpha, FarField(1.0, gstar))
        trailing = fit_corner(flow, flow.body.corners[0])
        leading = fit_corner(flow, flow.body.corners[1])
        assert not trailing.singular
        assert leading.singular
        assert leading.fitted_exponent == pytest.approx(-0.5, abs=0.05)


class TestSignAttainment:
    def test_leading_mode_is_one_signed(self):
        # k = 1 mode: sin(pi theta / beta) keeps one sign over the wedge
        beta = 1.5 * np.pi
        flow = SyntheticWedgeFlow(beta, (1.0,))
        assert sign_attainment(flow, wedge_corner(beta), 0.1) == "positive_only"
        flow_neg = SyntheticWedgeFlow(beta, (-1.0,))
        assert sign_attainment(flow_neg, wedge_corner(beta), 0.1) == "negative_only"

    def test_second_mode_attains_both(self):
        beta = 1.5 * np.pi
        flow = SyntheticWedgeFlow(beta, (0.0, 1.0))
        assert sign_attainment(flow, wedge_corner(beta), 0.1) == "both"

    def test_kutta_regularized_trailing_edge_both(self):
        alpha = np.pi / 6
        gstar = PlateFlow(4.0, alpha, FarField(1.0, 0.0)).kutta_circulation(0)
        flow = PlateFlow(4.0, alpha, FarField(1.0, gstar))
        assert sign_attainment(flow, flow.body.corners[0], 0.05) == "both"

    def test_uniform_flow_past_horizontal_plate_both(self):
        flow = PlateFlow(4.0, 0.0, FarField(1.0, 0.0))
        for corner in flow.body.corners:
            assert sign_attainment(flow, corner, 0.1) == "both"


class TestContourIntegrals:
    def test_circle_circulation_residue(self):
        flow = CircleFlow(1.0, FarField(1.0, TWO_PI))
        got = circulation(flow, CircleContour(0j, 2.0, 1024))
        assert got == pytest.approx(TWO_PI, abs=1e-10)

    def test_zero_circulation(self):
        flow = CircleFlow(1.0, FarField(1.0, 0.0))
        assert abs(circulation(flow, CircleContour(0j, 3.0, 1024))) < 1e-12

    def test_panel_contour_independence(self):
        sol = panel_solve(SQUARE, FarField(1.0, 1.0), 128)
        g2 = circulation(sol.flow, CircleContour(0j, 2.0, 2048))
        g20 = circulation(sol.flow, CircleContour(0j, 20.0, 2048))
        assert abs(g2 - g20) < 1e-6

    def test_polyline_contour_agrees(self):
        flow = CircleFlow(1.0, FarField(1.0, 1.7))
        poly = PolylineContour([(2, -2), (2, 2), (-2, 2), (-2, -2)])
        assert circulation(flow, poly) == pytest.approx(1.7, abs=1e-9)

    def test_mass_flux_zero(self):
        flow = CircleFlow(1.0, FarField(1.0, TWO_PI))
        assert abs(mass_flux(flow, CircleContour(0j, 3.0, 1024))) < 1e-10

    def test_uniform_flow_zero_flux(self):
        flow = PlateFlow(4.0, 0.0, FarField(1.0, 0.0))  # exactly uniform
        assert abs(mass_flux(flow, CircleContour(0j, 8.0, 1024))) < 1e-10

    def test_panel_triangle_flux_small(self):
        sol = panel_solve(TRIANGLE, FarField(1.0, 1.0), 128)
        contour = CircleContour(0j, 5.0, 2048)
        flux = mass_flux(sol.flow, contour)
        assert abs(flux) < 1e-6 * 1.0 * (TWO_PI * 5.0)

    def test_contour_through_body_rejected(self):
        flow = CircleFlow(1.0, FarField(1.0, 0.0))
        with pytest.raises(FluidDomainError):
            circulation(flow, CircleContour(0j, 0.5, 256))


class TestFarFieldFit:
    def test_circle_with_circulation(self):
        flow = CircleFlow(1.0, FarField(1.0, TWO_PI))
        fit = farfield_fit(flow)
        assert fit.c0 == pytest.approx(1.0 + 0j, abs=1e-10)
        assert fit.c1 == pytest.approx(-1j, abs=1e-10)
        assert fit.gamma_estimate == pytest.approx(TWO_PI, rel=1e-9)
        assert abs(fit.re_c1) < 1e-10

    def test_uniform_flow(self):
        flow = PlateFlow(4.0, 0.0, FarField(1.0, 0.0))
        fit = farfield_fit(flow)
        assert fit.c0 == pytest.approx(1.0 + 0j, abs=1e-12)
        assert abs(fit.c1) < 1e-12

    def test_panel_square_gamma(self):
        sol = panel_solve(SQUARE, FarField(1.0, 1.0), 128)
        fit = farfield_fit(sol.flow)
        assert fit.gamma_estimate == pytest.approx(1.0, abs=1e-4)
        assert abs(fit.re_c1) < 1e-6

    def test_radii_too_small_rejected(self):
        flow = CircleFlow(1.0, FarField(1.0, 0.0))
        with pytest.raises(FluidDomainError):
            farfield_fit(flow, r_list=[2.0, 3.0])


class TestAffinity:
    def test_a1_affine_in_gamma(self):
        corner = TRIANGLE.corners[1]
        a1 = {}
        for gam in (0.0, 0.5, 1.0):
            flow = panel_solve(TRIANGLE, FarField(1.0, gam), 192).flow
            a1[gam] = fit_corner(flow, corner).a1_estimate
        midpoint_dev = abs(a1[0.5] - 0.5 * (a1[0.0] + a1[1.0]))
        assert midpoint_dev < 0.01 * abs(a1[1.0] - a1[0.0])


class TestCornerCensus:
    def test_triangle_census(self):
        census = corner_census(TRIANGLE, 1.0, n_panels=192)
        roots = [e.root for e in census.corners]
        assert len(set(np.round(roots, 3))) == 3  # pairwise distinct
        assert census.min_singular_count >= 2     # >= n-1 of 3 at any gamma
        assert not census.regularizes_all_somewhere
        assert census.coincident_pairs == ()

    def test_square_census(self):
        census = corner_census(SQUARE, 1.0, n_panels=160)
        assert census.min_singular_count >= 2     # >= n-2 of 4
        assert not census.regularizes_all_somewhere

    def test_census_consistency_at_roots(self):
        census = corner_census(TRIANGLE, 1.0, n_panels=192)
        delta = 0.1 * 1.0 * TRIANGLE.circumradius
        for e in census.corners:
            scale = 1e-3 * 1.0 * TRIANGLE.circumradius ** (
                1 - np.pi / (5 * np.pi / 3))
            at_root = abs(e.a1_at_zero + e.slope * e.root)
            off_root = min(abs(e.a1_at_zero + e.slope * (e.root + delta)),
                           abs(e.a1_at_zero + e.slope * (e.root - delta)))
            assert at_root < scale
            assert off_root > scale

    def test_roots_match_kutta_solve(self):
        census = corner_census(TRIANGLE, 1.0, n_panels=192)
        for e in census.corners:
            res = kutta_solve(TRIANGLE, 1.0, e.corner_id, n_panels=192)
            assert res.gamma_star == pytest.approx(e.root, abs=1e-6)

    def test_plate_census_min_one_singular(self):
        # two distinct edge roots: regularizing one edge leaves the other
        census = corner_census(FlatPlate(4.0, np.pi / 6), 1.0, n_panels=256)
        roots = sorted(e.root for e in census.corners)
        assert roots[1] - roots[0] > 1.0
        assert census.min_singular_count >= 1
        assert not census.regularizes_all_somewhere


class TestSignComponentCensus:
    def test_uniform_flow(self):
        flow = PlateFlow(4.0, 0.0, FarField(1.0, 0.0))
        census = sign_component_census(flow, ((-8, 8), (-8, 8)), resolution=200)
        assert census.bounded_positive == 0
        assert census.bounded_negative == 0

    def test_circle_no_bounded_components(self):
        flow = CircleFlow(1.0, FarField(1.0, 0.0))
        census = sign_component_census(flow, ((-4, 4), (-4, 4)), resolution=200)
        assert census.bounded_positive == 0
        assert census.bounded_negative == 0

    def test_panel_triangle_at_kutta_root(self):
        root = kutta_solve(TRIANGLE, 1.0, 0, n_panels=192).gamma_star
        flow = panel_solve(TRIANGLE, FarField(1.0, root), 192).flow
        census = sign_component_census(flow, ((-4, 4), (-4, 4)), resolution=200)
        assert census.bounded_positive == 0
        assert census.bounded_negative == 0
        # regularized corner sees both signs close by
        assert sign_attainment(flow, TRIANGLE.corners[0], 0.05) == "both"
