import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from core.exceptions import (
    DegenerateEigenvalueError,
    DomainError,
    HyperbolicityError,
    InvalidInputError,
    NoConnectionError,
    NumericFailureError,
)
from manifolds.models import ManifoldChart
from spectral.services import classify_spectrum

from .models import FluxSystem
from .services import (
    admissible_dimension,
    boundary_layer_connect,
    build_tw_center_chart,
    build_tw_system,
    generalized_eigenvalue,
    normalize_profile,
    pde_residual,
    reduced_direction,
    scaled_solution,
    solve_traveling_wave,
)


def burgers():
    return FluxSystem(1, lambda u: 0.5 * u ** 2, lambda u: np.array([[u[0]]]), name='burgers')


def linear_flux(diagonal):
    L = np.diag(diagonal)
    return FluxSystem(len(diagonal), lambda u: L @ u, lambda u: L, name='linear', is_linear=True)


def p_system(k=4.0):
    M = np.array([[0.0, 1.0], [k, 0.0]])
    return FluxSystem(2, lambda u: M @ u, lambda u: M, name='p-system', is_linear=True)


def burgers_wave(a, b):
    """sigma and U(y) of the Burgers shock from a down to b, normalised at the midpoint"""
    sigma = 0.5 * (a + b)
    c = 0.5 * (a - b)
    return sigma, lambda y: sigma - c * np.tanh(c * y / 2.0)


class FluxSystemTests(SimpleTestCase):

    def test_eigen_data_sorted_and_unit(self):
        data = p_system().eigen_data([0.3, -0.2])
        np.testing.assert_allclose(data.values, [-2.0, 2.0], atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(data.right, axis=0), [1.0, 1.0])
        np.testing.assert_allclose(data.left @ data.right, np.eye(2), atol=1e-12)

    def test_complex_eigenvalues_rejected(self):
        rotation = FluxSystem(2, lambda u: np.array([u[1], -u[0]]))
        with self.assertRaises(HyperbolicityError):
            rotation.eigen_data([0.0, 0.0])

    def test_repeated_eigenvalues_rejected(self):
        with self.assertRaises(HyperbolicityError):
            build_tw_system(linear_flux([1.0, 1.0]), [0.0, 0.0], 1)

    def test_finite_difference_jacobian(self):
        flux = FluxSystem(1, lambda u: 0.5 * u ** 2)
        np.testing.assert_allclose(flux.jacobian([0.7]), [[0.7]], atol=1e-8)


class TravelingWaveSystemTests(SimpleTestCase):

    def test_burgers_augmented_system(self):
        tw = build_tw_system(burgers(), [0.0], 1)
        self.assertEqual(tw.dimension, 3)
        J = tw.field.linearization()
        np.testing.assert_allclose(J, tw.expected_jacobian(), atol=1e-10)
        np.testing.assert_allclose(J @ J, np.zeros((3, 3)), atol=1e-12)
        self.assertEqual(classify_spectrum(J).dims[2], 3)

    def test_linear_flux_center_dimension(self):
        tw = build_tw_system(linear_flux([1.0, 2.0]), [0.4, -0.1], 1)
        split = classify_spectrum(tw.field.linearization())
        self.assertEqual(split.dims[2], tw.N + 2)
        # center space is {(u, a e1, sigma)}
        P = split.proj_c
        np.testing.assert_allclose(P @ np.array([1.0, -2.0, 3.0, 0.0, 0.5]), [1.0, -2.0, 3.0, 0.0, 0.5], atol=1e-10)

    def test_equilibrium_is_zero_of_field(self):
        tw = build_tw_system(p_system(), [0.1, 0.2], 2)
        self.assertLess(np.linalg.norm(tw.field(tw.equilibrium)), 1e-14)
        np.testing.assert_allclose(tw.field.linearization(), tw.expected_jacobian(), atol=1e-10)

    def test_bad_family_index(self):
        with self.assertRaises(InvalidInputError):
            build_tw_system(burgers(), [0.0], 2)


class ReducedDirectionTests(SimpleTestCase):

    def test_burgers_chart_points_are_equilibria(self):
        tw = build_tw_system(burgers(), [0.0], 1)
        chart = build_tw_center_chart(tw)
        for U, sigma in [(0.04, 0.0), (-0.03, 0.02), (0.0, -0.05)]:
            V = chart.evaluate(chart.project(np.array([U, 0.0, sigma])))
            self.assertLess(np.linalg.norm(tw.field(V)), 1e-14)

    def test_scalar_direction_and_eigenvalue(self):
        tw = build_tw_system(burgers(), [0.0], 1)
        r = reduced_direction(tw, build_tw_center_chart(tw))
        for U in (-0.04, 0.0, 0.03):
            np.testing.assert_array_equal(r([U], 0.0, 0.0), [1.0])
            self.assertAlmostEqual(generalized_eigenvalue(tw, r, [U], 0.0, 0.0), U, places=14)

    def test_out_of_domain(self):
        tw = build_tw_system(burgers(), [0.0], 1)
        r = reduced_direction(tw, build_tw_center_chart(tw))
        with self.assertRaises(DomainError):
            generalized_eigenvalue(tw, r, [5.0], 0.0, 0.0)

    def test_linear_flux_constant_eigenvalue(self):
        tw = build_tw_system(linear_flux([1.0, 2.0]), [0.0, 0.0], 2)
        r = reduced_direction(tw, build_tw_center_chart(tw))
        for U, v, sigma in [([0.01, 0.0], 0.02, 2.0), ([0.0, -0.02], -0.01, 2.01)]:
            self.assertAlmostEqual(generalized_eigenvalue(tw, r, U, v, sigma), 2.0, places=12)

    def test_p_system_chart_matches_eigenvector(self):
        tw = build_tw_system(p_system(), [0.0, 0.0], 1)
        chart = build_tw_center_chart(tw)
        r = reduced_direction(tw, chart, method='chart')
        np.testing.assert_allclose(r(tw.u_bar, 0.0, tw.sigma_bar), tw.r_i, atol=1e-6)
        # p stays parallel to r_1 on the center manifold, so there is no O(v) correction
        np.testing.assert_allclose(r([0.005, 0.0], 0.01, tw.sigma_bar + 0.005), tw.r_i, atol=1e-4)
        self.assertAlmostEqual(generalized_eigenvalue(tw, r, tw.u_bar, 0.0, tw.sigma_bar), -2.0, places=6)

    def test_wrong_chart_kind(self):
        tw = build_tw_system(burgers(), [0.0], 1)
        chart = ManifoldChart('stable', tw.equilibrium, np.eye(3)[:, :1], np.eye(3)[:1], 0.1)
        with self.assertRaises(InvalidInputError):
            reduced_direction(tw, chart)


class TravelingWaveTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.flux = burgers()
        cls.shock = solve_traveling_wave(cls.flux, [1.0], [-1.0], 0.0)

    def test_burgers_tanh_profile(self):
        profile = self.shock
        exact = -np.tanh(profile.y / 2.0)
        self.assertLessEqual(np.max(np.abs(profile.U[:, 0] - exact)), 1e-6)
        self.assertAlmostEqual(profile.evaluate(0.0)[0], 0.0, places=10)
        self.assertLess(abs(profile.U[0, 0] - 1.0), 2e-8)
        self.assertLess(abs(profile.U[-1, 0] + 1.0), 2e-8)
        self.assertAlmostEqual(profile.rates['plus'], 1.0, delta=1e-2)
        self.assertLessEqual(profile.residual, 1e-6)

    def test_moving_shock(self):
        profile = solve_traveling_wave(self.flux, [2.0], [0.0], 1.0)
        _, exact = burgers_wave(2.0, 0.0)
        self.assertLessEqual(np.max(np.abs(profile.U[:, 0] - exact(profile.y))), 1e-6)

    def test_constant_profile(self):
        profile = solve_traveling_wave(self.flux, [0.3], [0.3], 5.0)
        self.assertTrue(np.all(profile.U == 0.3))
        self.assertTrue(np.all(profile.p == 0.0))

    def test_wrong_way_has_no_connection(self):
        with self.assertRaises(NoConnectionError) as ctx:
            solve_traveling_wave(self.flux, [-1.0], [1.0], 0.0)
        self.assertGreater(ctx.exception.details['miss'], 0.5)

    def test_rankine_hugoniot_violation(self):
        with self.assertRaises(NoConnectionError) as ctx:
            solve_traveling_wave(self.flux, [1.0], [-1.0], 0.5)
        self.assertAlmostEqual(ctx.exception.details['rh_residual'], 1.0, places=12)

    def test_non_hyperbolic_endpoint(self):
        # u+ = u- + r with sigma = lambda makes both ends degenerate for a linear flux
        with self.assertRaises(HyperbolicityError):
            solve_traveling_wave(linear_flux([1.0, 2.0]), [0.0, 0.0], [1.0, 0.0], 1.0)

    def test_normalisation_is_idempotent(self):
        again = normalize_profile(self.shock)
        np.testing.assert_allclose(again.y, self.shock.y, atol=1e-10)
        moved = normalize_profile(self.shock.shifted(3.0))
        np.testing.assert_allclose(moved.y, self.shock.y, atol=1e-9)

    def test_shifted_profile_keeps_zero_residual(self):
        shifted = self.shock.shifted(-2.5)
        points = np.column_stack([np.zeros(20), np.linspace(-8.0, 8.0, 20)])
        self.assertLessEqual(np.max(pde_residual(self.flux, shifted, 1.0, points)), 1e-6)

    def test_residual_is_not_rescaled_by_eps(self):
        y = np.array([1.0, 2.0, 3.0])
        coarse = {eps: pde_residual(self.flux, self.shock, eps, np.column_stack([np.zeros(3), eps * y]), step=0.5)
                  for eps in (1.0, 0.01)}
        # same profile-unit stencil, so the x-unit residual carries a factor 1/eps
        np.testing.assert_allclose(coarse[0.01], 100.0 * coarse[1.0], rtol=1e-3)

    def test_residual_rejects_profile_of_another_flux(self):
        steeper = FluxSystem(1, lambda u: u ** 2, lambda u: np.array([[2.0 * u[0]]]), name='steeper')
        with self.assertRaises(NumericFailureError):
            pde_residual(steeper, self.shock, 0.1, [[0.0, 0.0]])

    def test_scaling_identity(self):
        rng = np.random.default_rng(11)
        waves = [self.shock,
                 solve_traveling_wave(self.flux, [2.0], [0.0], 1.0),
                 solve_traveling_wave(self.flux, [0.5], [-1.5], -0.5)]
        for profile in waves:
            for eps in (1.0, 0.1, 0.01):
                t = rng.uniform(0.0, 1.0, 100)
                x = profile.sigma * t + eps * rng.uniform(-8.0, 8.0, 100)
                residual = pde_residual(self.flux, profile, eps, np.column_stack([t, x]))
                self.assertLessEqual(np.max(residual), 1e-6, msg=f'sigma={profile.sigma}, eps={eps}')

    def test_scaled_solution_at_origin(self):
        u = scaled_solution(self.shock, 0.1)
        self.assertAlmostEqual(u(0.0, 0.0)[0], 0.0, places=10)
        self.assertAlmostEqual(u(0.0, 0.1)[0], -math.tanh(0.5), places=6)

    def test_frame_and_metadata(self):
        frame = self.shock.to_frame()
        self.assertEqual(list(frame.columns), ['y', 'U1', 'p1'])
        self.assertEqual(len(frame), self.shock.y.size)
        meta = self.shock.to_dict()
        self.assertEqual(meta['endpoints'], {'u_minus': [1.0], 'u_plus': [-1.0]})
        self.assertEqual(meta['sigma'], 0.0)

    @settings(max_examples=8, derandomize=True, deadline=None)
    @given(st.floats(-1.0, 1.0), st.floats(1.0, 3.0))
    def test_burgers_shocks_match_closed_form(self, b, gap):
        a = b + gap
        sigma, exact = burgers_wave(a, b)
        profile = solve_traveling_wave(self.flux, [a], [b], sigma)
        self.assertLessEqual(np.max(np.abs(profile.U[:, 0] - exact(profile.y))), 1e-6)


class BoundaryLayerTests(SimpleTestCase):

    def test_scalar_linear_closed_form(self):
        for a, u0, u_b in [(-1.0, 0.0, 1.0), (-2.0, 0.5, 2.0)]:
            flux = FluxSystem(1, lambda u, a=a: a * u, lambda u, a=a: np.array([[a]]), is_linear=True)
            profile = boundary_layer_connect(flux, [u0], [u_b])
            x = np.linspace(0.0, 10.0, 101)
            numeric = np.array([profile.evaluate(xk)[0] for xk in x])
            np.testing.assert_allclose(numeric, (u_b - u0) * np.exp(a * x) + u0, atol=1e-8, rtol=0)
            self.assertAlmostEqual(profile.rates['plus'], -a, delta=1e-3)

    def test_constant_layer(self):
        profile = boundary_layer_connect(burgers(), [-1.0], [-1.0])
        self.assertTrue(np.all(profile.U == -1.0))

    def test_burgers_layer(self):
        profile = boundary_layer_connect(burgers(), [-1.0], [0.5])
        x0 = 2.0 * math.atanh(0.5)
        exact = -np.tanh((profile.y - x0) / 2.0)
        self.assertLessEqual(np.max(np.abs(profile.U[:, 0] - exact)), 1e-6)
        self.assertAlmostEqual(profile.U[0, 0], 0.5, places=14)
        self.assertLessEqual(abs(profile.U[-1, 0] + 1.0), 1e-6)
        points = np.column_stack([np.zeros(30), np.linspace(0.05, 3.0, 30)])
        self.assertLessEqual(np.max(pde_residual(burgers(), profile, 0.1, points)), 1e-6)

    def test_beyond_other_root_has_no_connection(self):
        with self.assertRaises(NoConnectionError):
            boundary_layer_connect(burgers(), [-1.0], [1.5])

    def test_vanishing_eigenvalue(self):
        with self.assertRaises(DegenerateEigenvalueError):
            boundary_layer_connect(burgers(), [0.0], [0.5])

    def test_metadata_names_boundary_states(self):
        meta = boundary_layer_connect(burgers(), [-1.0], [-0.5]).to_dict()
        self.assertEqual(meta['endpoints'], {'u_b': [-0.5], 'u0': [-1.0]})
        self.assertIsNone(meta['sigma'])

    def test_admissible_dimension_counts_negative_eigenvalues(self):
        self.assertEqual(admissible_dimension(burgers(), [-1.0]), 1)
        self.assertEqual(admissible_dimension(burgers(), [1.0]), 0)
        self.assertEqual(admissible_dimension(linear_flux([-1.0, 2.0]), [0.0, 0.0]), 1)
        self.assertEqual(admissible_dimension(linear_flux([-3.0, -1.0]), [0.0, 0.0]), 2)

    def test_admissible_directions_match_dimension(self):
        flux = linear_flux([-1.0, 2.0])
        boundary_layer_connect(flux, [0.0, 0.0], [0.3, 0.0])
        with self.assertRaises(NoConnectionError):
            boundary_layer_connect(flux, [0.0, 0.0], [0.0, 0.3])
        both = linear_flux([-3.0, -1.0])
        for u_b in ([0.3, 0.0], [0.0, 0.3], [0.2, -0.2]):
            profile = boundary_layer_connect(both, [0.0, 0.0], u_b)
            self.assertLess(np.linalg.norm(profile.U[-1]), 1e-8 * 1.01)

    def test_stable_chart_distance_is_reported(self):
        flux = linear_flux([-1.0, 2.0])
        profile = boundary_layer_connect(flux, [0.0, 0.0], [0.3, 0.0])
        self.assertLessEqual(profile.meta['chart_distance'], 1e-12)
        with self.assertRaises(NoConnectionError) as ctx:
            boundary_layer_connect(flux, [0.0, 0.0], [0.04, 1e-3])
        self.assertAlmostEqual(ctx.exception.details['distance_to_chart'], 1e-3, delta=1e-12)
