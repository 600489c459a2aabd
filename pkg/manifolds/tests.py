import json

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import DomainError, InvalidInputError, NoContractionError
from odeint.services import integrate_autonomous

from .models import EquilibriumCurve, ManifoldChart, SmoothField
from .services import (
    BURN_IN,
    ChartBuilder,
    center_chart,
    check_local_invariance,
    confinement_distance,
    make_cutoff,
    slaving_chart,
    stable_chart,
    track_limit,
    uniformly_stable_chart,
)
from .utils import bump

EXAMPLE_3 = np.array([
    [2.0, 0.0, 0.0, 0.0],
    [0.0, -1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, -3.0],
    [0.0, 0.0, 3.0, 0.0],
])


def linear_field(A):
    return SmoothField(A.shape[0], lambda V: A @ V, lambda V: A, vectorized=True)


def planar_field():
    return SmoothField(2, lambda V: np.array([V[0] * V[1], -V[1] - V[0] ** 2]), vectorized=True, name='planar')


def saddle_field():
    return SmoothField(2, lambda V: np.array([-V[0] + V[1] ** 2, V[1]]), vectorized=True, name='saddle')


def drift_field():
    """Stable x coupled to a center direction y that drifts with x^2"""
    return SmoothField(2, lambda V: np.array([-V[0] + V[1] ** 2, V[0] ** 2]), vectorized=True, name='drift')


def slow_toy(perturbation=0.0):
    """(v1, v3, v4, eps) with the equilibrium curve along the eps axis"""
    return SmoothField(
        4,
        lambda V: np.array([-5.0 * V[0] + perturbation * V[3] * V[0] ** 2, -V[2], V[1], np.zeros_like(V[3])]),
        vectorized=True,
        name='slow toy',
    )


def eps_axis():
    return EquilibriumCurve(lambda s: np.array([0.0, 0.0, 0.0, s]), lambda s: np.array([0.0, 0.0, 0.0, 1.0]))


def coupled_toy(kappa):
    """(v1, v2, eps): slow v1, fast v2 with coupling kappa"""
    return SmoothField(
        3,
        lambda V: np.array([-V[2] * V[0], -V[1] + kappa * V[0] * V[1], np.zeros_like(V[2])]),
        vectorized=True,
        name='coupled toy',
    )


def flat_base_chart(delta=0.1, tilt=0.0):
    """Chart of the plane {v2 = tilt * v1} over (v1, eps)"""
    basis = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
    return ManifoldChart(
        kind='center',
        equilibrium=np.zeros(3),
        base_basis=basis,
        base_left=basis.T,
        delta=delta,
        solver=lambda xi: np.array([xi[0], tilt * xi[0], xi[1]]),
    )


class BumpTests(SimpleTestCase):

    def test_profile_shape(self):
        for profile in ('quintic', 'smooth'):
            r = np.linspace(0.0, 3.0, 301)
            values = bump(r, profile)
            self.assertTrue(np.all(values[r <= 1.0] == 1.0))
            self.assertTrue(np.all(values[r >= 2.0] == 0.0))
            self.assertTrue(np.all(np.diff(values) <= 0.0))
            np.testing.assert_array_equal(bump(-r, profile), values)

    def test_unknown_profile(self):
        with self.assertRaises(InvalidInputError):
            bump(0.5, 'gaussian')


class CutoffTests(SimpleTestCase):

    def test_linear_field_has_no_nonlinearity(self):
        cutoff = make_cutoff(linear_field(EXAMPLE_3), 0.1)
        rng = np.random.default_rng(1)
        W = rng.uniform(-0.2, 0.2, (50, 4))
        np.testing.assert_allclose(cutoff.p_delta_many(W), 0.0, atol=1e-15)
        self.assertEqual(cutoff.C0, 0.0)

    def test_vanishes_outside_support(self):
        cutoff = make_cutoff(saddle_field(), 0.1)
        W = np.array([0.3, 0.0])
        np.testing.assert_array_equal(cutoff.p_delta(W), np.zeros(2))

    def test_sup_bound_from_quadratic_constant(self):
        delta = 0.1
        cutoff = make_cutoff(saddle_field(), delta)
        self.assertGreater(cutoff.quadratic_constant, 0.0)
        self.assertLessEqual(cutoff.C0, 4.0 * cutoff.quadratic_constant * delta ** 2 * (1 + 1e-12))

    def test_bounds_shrink_with_delta(self):
        large = make_cutoff(saddle_field(), 0.1)
        small = make_cutoff(saddle_field(), 0.05)
        self.assertLess(small.C0, large.C0)
        self.assertLess(small.C1, large.C1)

    def test_field_must_vanish_at_equilibrium(self):
        with self.assertRaises(InvalidInputError):
            SmoothField(2, lambda V: np.array([-V[0] + V[1] ** 2, V[1]]), equilibrium=[1.0, 0.0])
        loose = SmoothField(1, lambda V: V + 1e-6, check_tol=1e-3)
        with self.assertRaises(InvalidInputError):
            make_cutoff(loose, 0.1)


def scripted(steps):
    """Update map whose successive changes are the given sizes"""
    sizes = iter(steps)
    return lambda W: W + next(sizes)


class FixedPointTests(SimpleTestCase):

    def setUp(self):
        self.builder = ChartBuilder(linear_field(EXAMPLE_3), delta=0.1, base_n=0, grid_n=51, fp_tol=1e-10)
        self.W = np.zeros((3, 1))
        self.weights = np.ones(3)

    def test_reports_worst_ratio_not_last(self):
        _W, iterations, ratio = self.builder._picard(scripted([1.0, 0.5, 0.25, 0.2, 0.02, 1e-12]), self.W, self.weights)
        self.assertEqual(iterations, 6)
        self.assertAlmostEqual(ratio, 0.8, places=12)
        self.assertAlmostEqual(self.builder.stats['worst_ratio'], 0.8, places=12)

    def test_growth_after_burn_in_raises(self):
        with self.assertRaises(NoContractionError) as ctx:
            self.builder._picard(scripted([1.0, 0.5, 0.25, 0.3, 1e-12]), self.W, self.weights)
        self.assertEqual(ctx.exception.details['iteration'], BURN_IN + 2)
        self.assertAlmostEqual(ctx.exception.details['ratio'], 1.2, places=12)

    def test_growth_during_burn_in_is_recorded_only(self):
        _W, _iterations, ratio = self.builder._picard(scripted([1.0, 2.0, 1.0, 0.1, 1e-12]), self.W, self.weights)
        self.assertAlmostEqual(ratio, 0.1, places=12)

    def test_iteration_budget(self):
        self.builder.max_iter = 3
        with self.assertRaises(NoContractionError) as ctx:
            self.builder._picard(scripted([1.0, 0.5, 0.25, 1e-12]), self.W, self.weights)
        self.assertEqual(ctx.exception.details['max_iter'], 3)


class CenterChartTests(SimpleTestCase):

    def test_linear_example_is_the_center_space(self):
        chart = center_chart(linear_field(EXAMPLE_3), delta=0.1, base_n=5, grid_n=101)
        self.assertEqual(chart.base_dimension, 2)
        self.assertLess(chart.tangency_residual, 1e-6)
        self.assertEqual(chart.contraction_ratio, 0.0)
        for idx in np.ndindex(5, 5):
            xi = np.array([chart.grid_axes[0][idx[0]], chart.grid_axes[1][idx[1]]])
            np.testing.assert_allclose(chart.values[idx], chart.base_basis @ xi, atol=1e-12)
        np.testing.assert_allclose(chart.evaluate(np.zeros(2)), np.zeros(4), atol=1e-12)

    def test_planar_quadratic_coefficient(self):
        field = planar_field()
        chart = center_chart(field, delta=0.1, base_n=0)
        self.assertLess(chart.contraction_ratio, 1.0)
        self.assertLess(chart.tangency_residual, 1e-6)

        xs = np.array([-0.05, -0.025, 0.025, 0.05])
        ys = []
        for x in xs:
            xi = chart.project([x, 0.0])
            V = chart.evaluate(xi, exact=True)
            self.assertAlmostEqual(V[0], x, delta=1e-12)
            np.testing.assert_allclose(chart.project(V), xi, atol=1e-12)
            ys.append(V[1])
        coeffs = np.linalg.lstsq(np.column_stack([xs ** 2, xs ** 4]), np.array(ys), rcond=None)[0]
        self.assertAlmostEqual(coeffs[0], -1.0, delta=1e-3)
        series = -xs ** 2 - 2 * xs ** 4 - 12 * xs ** 6
        np.testing.assert_allclose(ys, series, atol=1e-7)

    def test_bump_profiles_agree_on_confined_trajectories(self):
        field = planar_field()
        quintic = center_chart(field, delta=0.1, base_n=0, profile='quintic')
        smooth = center_chart(field, delta=0.1, base_n=0, profile='smooth')
        xi = quintic.project([0.025, 0.0])
        diff = np.linalg.norm(quintic.evaluate(xi, exact=True) - smooth.evaluate(xi, exact=True))
        self.assertLess(diff, 1e-10)

    def test_local_invariance_and_confinement(self):
        field = planar_field()
        chart = center_chart(field, delta=0.1, base_n=0)
        xi = chart.project([0.025, 0.0])
        report = check_local_invariance(chart, field, horizon=1.0, points=[xi, -xi], tol=1e-7)
        self.assertTrue(report.passed, report.to_dict())

        start = chart.evaluate(xi, exact=True)
        forward = integrate_autonomous(field, start, (0.0, 10.0), rtol=1e-11, atol=1e-13)
        backward = integrate_autonomous(field, start, (0.0, -10.0), rtol=1e-11, atol=1e-13)
        states = np.vstack([forward.y[::4], backward.y[::4]])
        self.assertTrue(np.all(np.linalg.norm(states, axis=1) < 0.05))
        self.assertLess(confinement_distance(chart, states), 1e-7)

    def test_rejects_bad_parameters(self):
        with self.assertRaises(InvalidInputError):
            center_chart(planar_field(), delta=0.1, eta=0.6, base_n=0)
        with self.assertRaises(InvalidInputError):
            center_chart(saddle_field(), delta=0.1, base_n=0)
        with self.assertRaises(InvalidInputError):
            center_chart(planar_field(), delta=-0.1)

    def test_large_delta_does_not_contract(self):
        with self.assertRaises(NoContractionError):
            center_chart(planar_field(), delta=20.0, base_n=3, grid_n=101)

    def test_iteration_budget_exhausted(self):
        with self.assertRaises(NoContractionError) as ctx:
            center_chart(planar_field(), delta=0.1, base_n=0, max_iter=1)
        self.assertEqual(ctx.exception.details['max_iter'], 1)

    def test_outside_radius(self):
        chart = center_chart(linear_field(EXAMPLE_3), delta=0.1, base_n=3, grid_n=51)
        with self.assertRaises(DomainError):
            chart.evaluate([0.2, 0.0])

    def test_json_round_trip(self):
        chart = center_chart(linear_field(EXAMPLE_3), delta=0.1, base_n=5, grid_n=51)
        restored = ManifoldChart.from_dict(json.loads(json.dumps(chart.to_dict())))
        self.assertEqual(restored.kind, 'center')
        xi = np.array([0.03, -0.04])
        np.testing.assert_allclose(restored.evaluate(xi), chart.evaluate(xi), atol=1e-12)

    def test_parallel_grid_matches_serial(self):
        field = linear_field(EXAMPLE_3)
        serial = ChartBuilder(field, delta=0.1, base_n=3, grid_n=51, jobs=1)
        parallel = ChartBuilder(field, delta=0.1, base_n=3, grid_n=51, jobs=2)
        np.testing.assert_array_equal(serial.center().values, parallel.center().values)
        self.assertEqual(parallel.stats['charts'], 1)
        self.assertGreaterEqual(parallel.stats['fixed_points'], 9)


class StableChartTests(SimpleTestCase):

    def test_linear_example_stable_direction(self):
        field = linear_field(EXAMPLE_3)
        chart = stable_chart(field, delta=0.1, base_n=5, grid_n=201)
        self.assertEqual(chart.base_dimension, 1)
        for value in chart.values:
            np.testing.assert_allclose(value[[0, 2, 3]], 0.0, atol=1e-12)
        self.assertAlmostEqual(chart.meta['rate'], 1.0, delta=1e-12)
        report = check_local_invariance(chart, field)
        self.assertTrue(report.passed, report.to_dict())

        start = chart.evaluate(chart.project([0.0, 0.05, 0.0, 0.0]), exact=True)
        trajectory = integrate_autonomous(field, start, (0.0, 3.0), rtol=1e-11, atol=1e-13)
        np.testing.assert_allclose(trajectory.y[:, 1], 0.05 * np.exp(-trajectory.t), rtol=1e-9)

    def test_saddle_stable_manifold_is_the_x_axis(self):
        chart = stable_chart(saddle_field(), delta=0.1, base_n=0, grid_n=201)
        for x in (-0.05, 0.02, 0.08):
            V = chart.evaluate(chart.project([x, 0.0]), exact=True)
            np.testing.assert_allclose(V, [x, 0.0], atol=1e-12)

    def test_scalar_boundary_layer_field(self):
        a = -2.0
        field = SmoothField(1, lambda V: a * V, vectorized=True)
        chart = stable_chart(field, delta=0.1, base_n=5, grid_n=101)
        np.testing.assert_allclose(chart.values[:, 0], chart.base_basis[0, 0] * chart.grid_axes[0], atol=1e-14)
        self.assertAlmostEqual(chart.meta['rate'], abs(a), delta=1e-12)

    def test_requires_stable_directions(self):
        with self.assertRaises(InvalidInputError):
            stable_chart(SmoothField(1, lambda V: V), delta=0.1, base_n=0)

    def test_large_delta_does_not_contract(self):
        with self.assertRaises(NoContractionError):
            stable_chart(drift_field(), delta=20.0, base_n=3, grid_n=101)

    def test_iteration_budget_exhausted(self):
        with self.assertRaises(NoContractionError) as ctx:
            stable_chart(drift_field(), delta=0.1, base_n=0, max_iter=1)
        self.assertEqual(ctx.exception.details['max_iter'], 1)


class UniformlyStableChartTests(SimpleTestCase):

    def test_linear_slow_system(self):
        chart = uniformly_stable_chart(slow_toy(), eps_axis(), delta=0.2, base_n=0, grid_n=201)
        self.assertEqual(chart.base_dimension, 2)
        self.assertLess(chart.tangency_residual, 1e-6)
        for point in ([0.05, 0.0, 0.0, 0.1], [-0.1, 0.0, 0.0, -0.05]):
            V = chart.evaluate(chart.project(point), exact=True)
            np.testing.assert_allclose(V, point, atol=1e-10)

    def test_base_point_on_curve_stays_put(self):
        field = slow_toy()
        chart = uniformly_stable_chart(field, eps_axis(), delta=0.2, base_n=0, grid_n=201)
        start = chart.evaluate(chart.project([0.0, 0.0, 0.0, 0.1]), exact=True)
        report = track_limit(field, start, eps_axis(), horizon=5.0)
        np.testing.assert_allclose(report.V_inf, [0.0, 0.0, 0.0, 0.1], atol=1e-10)
        self.assertLess(report.miss, 1e-10)

    def test_perturbed_field_converges_to_the_curve(self):
        field = slow_toy(perturbation=1.0)
        curve = eps_axis()
        chart = uniformly_stable_chart(field, curve, delta=0.2, base_n=0, grid_n=401)
        start = chart.evaluate(chart.project([0.01, 0.0, 0.0, 0.1]), exact=True)
        report = track_limit(field, start, curve, horizon=20.0)
        self.assertLessEqual(np.linalg.norm(report.V_inf), 0.1 + 1e-6)
        self.assertGreaterEqual(report.rate, 2.0)

    def test_curve_must_be_equilibria(self):
        bad = EquilibriumCurve(lambda s: np.array([s, 0.0, 0.0, 0.0]))
        with self.assertRaises(InvalidInputError):
            uniformly_stable_chart(slow_toy(), bad, delta=0.2, base_n=0)


class SlavingChartTests(SimpleTestCase):

    def test_decoupled_toy_has_no_interaction(self):
        field = coupled_toy(0.0)
        chart = slaving_chart(field, flat_base_chart(), delta=0.1, base_n=0, grid_n=401)
        xi = chart.project([0.01, 0.02, 0.05])
        parts = chart.decompose(xi)
        self.assertLess(np.max(np.abs(parts.Vp)), 1e-10)
        np.testing.assert_allclose(np.abs(parts.Vf[:, 1]), 0.02 * np.exp(-parts.grid), atol=1e-12)
        np.testing.assert_allclose(parts.Vf[:, [0, 2]], 0.0, atol=1e-15)
        self.assertLess(parts.residual, 1e-8)

    def test_start_on_base_chart(self):
        chart = slaving_chart(coupled_toy(0.0), flat_base_chart(), delta=0.1, base_n=0, grid_n=201)
        parts = chart.decompose(chart.project([0.02, 0.0, 0.03]))
        np.testing.assert_array_equal(parts.Vf, np.zeros_like(parts.Vf))
        np.testing.assert_array_equal(parts.Vp, np.zeros_like(parts.Vp))

    def test_weak_coupling_interaction_is_small(self):
        chart = slaving_chart(coupled_toy(1.0), flat_base_chart(), delta=0.1, base_n=0, grid_n=401)
        parts = chart.decompose(chart.project([0.01, 0.01, 0.05]))
        norms = parts.norms()
        self.assertLessEqual(norms['Vp'], 1e-2 * np.linalg.norm(parts.Vf[0]))
        self.assertLess(parts.residual, 1e-6)

    def test_base_chart_must_be_invariant(self):
        with self.assertRaises(InvalidInputError):
            slaving_chart(coupled_toy(0.0), flat_base_chart(tilt=0.5), delta=0.1, base_n=0, grid_n=101)
