import json

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from catalog.systems import (
    fast_example_closed_form,
    fast_example_hit_time,
    ns_polytropic,
    rotation_toy,
    singular_fast_example,
    singular_slow_example,
    toy_5d,
)
from core.exceptions import HypothesisFailure, InvalidInputError, ReductionError
from manifolds.models import EquilibriumCurve
from odeint.services import dense_eval, integrate_autonomous

from .models import HypothesisReport, PolytropicNSParams, SingularSystem, Trajectory
from .navier_stokes import block_matrices, conserved_fluxes, reduce_ns_steady
from .services import (
    check_hypotheses,
    find_equilibrium_curve,
    integrate_singular,
    inverse_rescale,
    rescale_time,
    singular_center_chart,
    singular_us_chart,
    slow_fast_decomposition,
    slow_manifold,
)

GRID = {'grid_n': 201}


def fast_only():
    """(v, eps) with v' = -v / eps: nothing slow apart from the equilibria"""
    return SingularSystem(
        2,
        lambda V: np.stack([-V[0], 0.0 * V[1]]),
        lambda V: np.asarray(V)[1],
        lambda V: np.array([0.0, 1.0]),
        equilibria=EquilibriumCurve(lambda s: np.array([0.0, s]), lambda s: np.array([0.0, 1.0])),
        name='fast only',
        vectorized=True,
    )


def no_fast_part():
    """(v, eps) with v' = -v: F = (-v eps, 0), the whole plane is slow"""
    return SingularSystem(
        2,
        lambda V: np.stack([-V[0] * V[1], 0.0 * V[1]]),
        lambda V: np.asarray(V)[1],
        lambda V: np.array([0.0, 1.0]),
        equilibria=EquilibriumCurve(lambda s: np.array([0.0, s]), lambda s: np.array([0.0, 1.0])),
        name='no fast part',
        vectorized=True,
    )


def complex_step_jacobian(fn, V, h=1e-30):
    V = np.asarray(V, dtype=complex)
    columns = []
    for j in range(V.size):
        shifted = V.copy()
        shifted[j] += 1j * h
        columns.append(np.imag(fn(shifted)) / h)
    return np.column_stack(columns)


class SingularSystemTests(SimpleTestCase):

    def test_origin_must_be_an_equilibrium_on_S(self):
        with self.assertRaises(InvalidInputError):
            SingularSystem(1, lambda V: V + 1.0, lambda V: V[0])
        with self.assertRaises(InvalidInputError):
            SingularSystem(1, lambda V: V, lambda V: V[0] + 1.0)

    def test_G_is_extended_across_S(self):
        sys = SingularSystem(
            2,
            lambda V: np.array([V[0] * (V[1] + V[0] ** 2), 0.0]),
            lambda V: V[0],
        )
        for v2 in (-0.3, 0.0, 0.05):
            self.assertAlmostEqual(sys.G([0.0, v2]), v2, delta=1e-8)
        self.assertAlmostEqual(sys.G([0.2, 0.1]), 0.1 + 0.04, delta=1e-10)

    def test_projection_to_singular_set(self):
        sys = singular_slow_example()
        V = sys.project_to_singular_set([0.03, 0.01, -0.02])
        self.assertLessEqual(abs(sys.zeta(V)), 1e-14)
        np.testing.assert_allclose(V[1:], [0.01, -0.02])

    def test_vectorized_pieces_match_pointwise(self):
        sys = toy_5d(kappa=0.3)
        states = np.random.default_rng(3).uniform(-0.1, 0.1, (7, 5))
        np.testing.assert_allclose(sys.F_many(states), np.array([sys.F(v) for v in states]))
        np.testing.assert_allclose(sys.zeta_many(states), states[:, 4])


class NavierStokesTests(SimpleTestCase):

    def setUp(self):
        self.params = PolytropicNSParams()
        self.sys = reduce_ns_steady(self.params)

    def test_field_agrees_with_flux_elimination(self):
        rng = np.random.default_rng(20)
        for _ in range(20):
            V = rng.uniform(-0.1, 0.1, 5)
            V[1] = rng.choice([-1.0, 1.0]) * rng.uniform(0.02, 0.1)
            J = complex_step_jacobian(lambda W: conserved_fluxes(self.params, W), V)
            w1, w2 = V[3], V[4]
            rhs = -J[:, [1, 2]] @ np.array([w1, w2])
            rho_x, w1_x, w2_x = np.linalg.solve(J[:, [0, 3, 4]], rhs)
            expected = np.array([rho_x, w1, w2, w1_x, w2_x])
            reduced = self.sys.F(V) / self.sys.zeta(V)
            np.testing.assert_allclose(reduced, expected, rtol=1e-10, atol=1e-12)

    def test_fluxes_are_conserved_along_the_field(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            V = rng.uniform(-0.1, 0.1, 5)
            J = complex_step_jacobian(lambda W: conserved_fluxes(self.params, W), V)
            np.testing.assert_allclose(J @ self.sys.F(V), 0.0, atol=1e-12)

    def test_constant_states_are_equilibria(self):
        for V in ([0.1, 0.2, -0.05, 0.0, 0.0], [-0.2, -0.1, 0.3, 0.0, 0.0]):
            np.testing.assert_allclose(self.sys.F(V), 0.0, atol=1e-15)

    def test_zeta_is_the_velocity(self):
        self.assertEqual(self.sys.zeta([0.1, -0.3, 0.0, 0.2, 0.1]), -0.3)
        np.testing.assert_array_equal(self.sys.grad_zeta(np.zeros(5)), [0.0, 1.0, 0.0, 0.0, 0.0])
        self.assertLess(self.sys.equilibria.check(self.sys.F), 1e-12)

    def test_blocks_at_the_base_state(self):
        blocks = block_matrices(self.params, np.zeros(5))
        np.testing.assert_allclose(blocks['b'], [[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(blocks['A21'].ravel(), [self.params.R * self.params.theta0, 0.0])
        self.assertEqual(blocks['A11'][0, 0], 0.0)

    def test_singular_viscous_block(self):
        params = PolytropicNSParams(nu=lambda rho: rho - 0.5)
        with self.assertRaises(ReductionError):
            block_matrices(params, [-0.5, 0.1, 0.0, 0.0, 0.0])
        with self.assertRaises(ReductionError):
            reduce_ns_steady(params).F([-0.6, 0.1, 0.0, 0.01, 0.0])

    def test_parameter_validation(self):
        for kwargs in ({'gamma': 1.0}, {'R': 0.0}, {'nu': -1.0}, {'k': lambda rho: 0.0 * rho}):
            with self.assertRaises(InvalidInputError):
                PolytropicNSParams(**kwargs)


class HypothesisCheckTests(SimpleTestCase):

    def test_fast_counterexample(self):
        report = check_hypotheses(singular_fast_example(), radius=0.1, n_samples=200, tol=1e-8, **GRID)
        # the linearization is nilpotent, so M^c is the whole plane and F = (-v2, 0) on S
        self.assertEqual(report.failed(), ['H3', 'H5'])
        witness = report.results['H5'].witness
        self.assertAlmostEqual(witness['value'], -witness['point'][1], delta=1e-15)
        self.assertGreater(report.results['H5'].residual, 1e-8)

    def test_slow_counterexample(self):
        report = check_hypotheses(singular_slow_example(), radius=0.1, n_samples=200, tol=1e-8, **GRID)
        self.assertEqual(report.failed(), ['H6'])
        witness = report.results['H6'].witness
        self.assertAlmostEqual(witness['value'], -witness['point'][2], delta=1e-6)

    def test_rotation_toy(self):
        report = check_hypotheses(rotation_toy(), radius=0.1, n_samples=200, tol=1e-8, **GRID)
        self.assertEqual(report.failed(), ['H3'])

    def test_toy_passes(self):
        report = check_hypotheses(toy_5d(), radius=0.1, n_samples=200, tol=1e-8, **GRID)
        self.assertTrue(report.passed)
        self.assertEqual(report.cloud, {'count': 200, 'radius': 0.1, 'seed': 0})

    def test_navier_stokes_passes(self):
        report = check_hypotheses(ns_polytropic(), radius=0.1, n_samples=200, tol=1e-8)
        self.assertEqual(report.failed(), [])
        for name in ('H1', 'H2', 'H3', 'H4', 'H5', 'H6'):
            self.assertEqual(report.status(name), 'pass', name)

    def test_report_serializes(self):
        report = check_hypotheses(singular_fast_example(), n_samples=50, **GRID)
        data = json.loads(json.dumps(report.to_dict()))
        self.assertEqual(list(data['hypotheses']), ['H1', 'H2', 'H3', 'H4', 'H5', 'H6'])
        self.assertFalse(data['passed'])
        self.assertEqual(data['failed'], ['H3', 'H5'])

    def test_isolated_origin_leaves_H4_untestable(self):
        sys = SingularSystem(2, lambda V: -np.asarray(V), lambda V: V[0], name='sink')
        report = check_hypotheses(sys, n_samples=20, **GRID)
        self.assertEqual(report.status('H4'), 'untestable')
        self.assertEqual(report.status('H3'), 'pass')

    def test_same_seed_same_report(self):
        first = check_hypotheses(singular_slow_example(), n_samples=60, seed=4, **GRID).to_dict()
        second = check_hypotheses(singular_slow_example(), n_samples=60, seed=4, **GRID).to_dict()
        self.assertEqual(first, second)


class EquilibriumCurveTests(SimpleTestCase):

    def test_continuation_finds_the_eps_axis(self):
        sys = toy_5d()
        curve = find_equilibrium_curve(sys, radius=0.1, step=1e-3, n_steps=50)
        self.assertLess(curve.check(sys.F, n=11), 1e-10)
        self.assertAlmostEqual(curve.s_range[0], -0.05, delta=1e-9)
        np.testing.assert_allclose(curve.at(0.0), 0.0, atol=1e-12)
        tangent = curve.tangent_at(0.0)
        self.assertAlmostEqual(abs(tangent[4]) / np.linalg.norm(tangent), 1.0, delta=1e-8)

    def test_continuation_picks_the_branch_through_S(self):
        curve = find_equilibrium_curve(singular_slow_example(), radius=0.1, n_steps=20)
        for s in np.linspace(*curve.s_range, 5):
            np.testing.assert_allclose(curve.at(s)[1:], 0.0, atol=1e-10)


class IntegrateSingularTests(SimpleTestCase):

    def test_fast_example_hits_S(self):
        traj = integrate_singular(singular_fast_example(), [0.5, 1.0], t_end=1.0)
        self.assertEqual(traj.status, 'singular')
        t_star = fast_example_hit_time(0.5, 1.0)
        self.assertAlmostEqual(t_star, 0.1335, delta=1e-4)
        self.assertAlmostEqual(traj.hit.t_star, t_star, delta=1e-8)
        self.assertLessEqual(traj.hit.t_guard, traj.hit.t_star)
        self.assertAlmostEqual(traj.hit.V[0], 0.0, delta=1e-8)
        self.assertGreater(traj.hit.growth, 1.0)

    def test_fast_example_without_hit(self):
        traj = integrate_singular(singular_fast_example(), [2.0, 0.5], t_end=5.0)
        self.assertEqual(traj.status, 'end')
        self.assertIsNone(traj.hit)
        self.assertAlmostEqual(traj.t_final, 5.0, delta=1e-10)
        v1, v2 = fast_example_closed_form(2.0, 0.5, traj.t)
        np.testing.assert_allclose(traj.V[:, 0], v1, atol=1e-8)
        np.testing.assert_allclose(traj.V[:, 1], v2, atol=1e-8)

    def test_toy_fast_decay(self):
        traj = integrate_singular(toy_5d(), [0.01, 0.02, 0.0, 0.0, 0.1], t_end=1.0)
        self.assertEqual(traj.status, 'end')
        np.testing.assert_allclose(traj.V[:, 1], 0.02 * np.exp(-10.0 * traj.t), atol=1e-10)
        np.testing.assert_allclose(traj.V[:, 0], 0.01 * np.exp(-5.0 * traj.t), atol=1e-10)

    def test_negative_zeta_runs_forward_in_t(self):
        traj = integrate_singular(singular_fast_example(), [-0.5, 1.0], t_end=1.0)
        self.assertEqual(traj.status, 'singular')
        self.assertAlmostEqual(traj.hit.t_star, fast_example_hit_time(-0.5, 1.0), delta=1e-8)
        self.assertTrue(np.all(np.diff(traj.t) > 0))

    def test_start_inside_guard_band(self):
        with self.assertRaises(InvalidInputError):
            integrate_singular(singular_fast_example(), [1e-10, 1.0], t_end=1.0)

    def test_trajectory_frame(self):
        traj = integrate_singular(singular_fast_example(), [2.0, 0.5], t_end=0.5)
        frame = traj.to_frame()
        self.assertEqual(list(frame.columns), ['t', 'tau', 'v1', 'v2'])
        self.assertEqual(traj.to_dict()['status'], 'end')


class RescaleTests(SimpleTestCase):

    def setUp(self):
        self.sys = singular_fast_example()
        self.tau = np.linspace(0.0, 10.0, 2001)

    def constant(self, value):
        return Trajectory('tau', self.tau, np.column_stack([np.full_like(self.tau, value), np.zeros_like(self.tau)]))

    def test_unit_zeta(self):
        np.testing.assert_allclose(rescale_time(self.sys, self.constant(1.0)).grid, self.tau, atol=1e-12)

    def test_zeta_two(self):
        # dt/dtau = zeta
        np.testing.assert_allclose(rescale_time(self.sys, self.constant(2.0)).grid, 2.0 * self.tau, atol=1e-12)

    def test_round_trip(self):
        states = np.column_stack([1.0 + 0.5 * np.sin(self.tau), np.zeros_like(self.tau)])
        in_t = rescale_time(self.sys, Trajectory('tau', self.tau, states))
        np.testing.assert_array_equal(in_t.other, self.tau)
        back = inverse_rescale(self.sys, in_t)
        np.testing.assert_allclose(back.grid, self.tau, atol=1e-8)

    @settings(max_examples=15, derandomize=True, deadline=None)
    @given(st.floats(0.05, 0.5), st.floats(0.0, 0.95), st.sampled_from([-1.0, 1.0]))
    def test_round_trip_away_from_S(self, floor, wobble, sign):
        zeta = sign * (floor + wobble * floor * (1.0 + np.cos(self.tau)) / 2.0)
        states = np.column_stack([zeta, np.zeros_like(self.tau)])
        back = inverse_rescale(self.sys, rescale_time(self.sys, Trajectory('tau', self.tau, states)))
        np.testing.assert_allclose(back.grid, self.tau, atol=1e-8)

    def test_sign_change_is_rejected(self):
        states = np.column_stack([np.sin(self.tau + 0.1), np.zeros_like(self.tau)])
        with self.assertRaises(InvalidInputError):
            rescale_time(self.sys, Trajectory('tau', self.tau, states))

    def test_close_to_S_is_rejected(self):
        with self.assertRaises(InvalidInputError):
            rescale_time(self.sys, self.constant(5e-8))

    def test_variable_is_checked(self):
        with self.assertRaises(InvalidInputError):
            rescale_time(self.sys, Trajectory('t', self.tau, self.constant(1.0).states))

    def test_navier_stokes_quadrature_converges(self):
        sys = ns_polytropic()
        result = integrate_autonomous(sys.tau_field(), [0.0, 0.2, 0.0, 1e-3, 1e-3], (0.0, 5.0), rtol=1e-12,
                                      atol=1e-14)
        coarse_tau = np.linspace(0.0, 5.0, 1001)
        fine_tau = np.linspace(0.0, 5.0, 2001)
        coarse = rescale_time(sys, Trajectory('tau', coarse_tau, dense_eval(result, coarse_tau)))
        fine = rescale_time(sys, Trajectory('tau', fine_tau, dense_eval(result, fine_tau)))
        self.assertTrue(np.all(np.diff(coarse.grid) > 0))
        np.testing.assert_allclose(coarse.grid, fine.grid[::2], rtol=1e-8, atol=1e-12)


class SlowManifoldTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.toy = toy_5d()
        cls.toy_slow = slow_manifold(cls.toy, delta=0.02, **GRID)

    def test_toy_slow_manifold(self):
        slow = self.toy_slow
        self.assertEqual(slow.base_dimension, 4)
        rng = np.random.default_rng(8)
        for _ in range(10):
            V = rng.uniform(-0.008, 0.008, 5)
            V[1] = 0.0
            V[4] = rng.choice([-1.0, 1.0]) * rng.uniform(0.002, 0.008)
            xi = slow.chart.project(V)
            np.testing.assert_allclose(slow.lift(xi), V, atol=1e-10)
            ambient = slow.chart.base_basis @ slow.reduced(xi)
            np.testing.assert_allclose(ambient, [-5.0 * V[0], 0.0, -V[3], V[2], 0.0], atol=1e-8)

    def test_reduced_field_is_finite_on_S(self):
        slow = self.toy_slow
        xi = slow.chart.project([0.005, 0.0, 0.002, -0.003, 0.0])
        value = slow.reduced(xi)
        self.assertTrue(np.all(np.isfinite(value)))
        np.testing.assert_allclose(slow.chart.base_basis @ value, [-0.025, 0.0, 0.003, 0.002, 0.0], atol=1e-6)
        self.assertLess(slow.residual, 1e-6)

    def test_system_with_no_fast_part(self):
        slow = slow_manifold(no_fast_part(), delta=0.02, **GRID)
        self.assertEqual(slow.base_dimension, 2)
        for V in ([0.01, 0.005], [-0.004, -0.01]):
            xi = slow.chart.project(V)
            np.testing.assert_allclose(slow.chart.base_basis @ slow.reduced(xi), [-V[0], 0.0], atol=1e-9)

    def test_exact_model_agrees_with_taylor(self):
        slow = slow_manifold(self.toy, delta=0.02, model='exact', report=self.toy_slow.report, **GRID)
        xi = self.toy_slow.chart.project([0.004, 0.0, 0.001, 0.002, 0.005])
        np.testing.assert_allclose(slow.reduced(xi), self.toy_slow.reduced(xi), atol=1e-8)

    def test_unknown_model(self):
        with self.assertRaises(InvalidInputError):
            slow_manifold(self.toy, delta=0.02, report=self.toy_slow.report, model='pade', **GRID)

    def test_failed_hypotheses_abort(self):
        with self.assertRaises(HypothesisFailure) as ctx:
            slow_manifold(rotation_toy(), delta=0.02, n_samples=50, **GRID)
        self.assertIsInstance(ctx.exception.report, HypothesisReport)
        self.assertEqual(ctx.exception.report.failed(), ['H3'])
        self.assertEqual(ctx.exception.details['failed'], ['H3'])

    def test_navier_stokes_reduced_field_is_finite(self):
        sys = ns_polytropic()
        slow = slow_manifold(sys, delta=0.02, n_check=50)
        self.assertEqual(slow.base_dimension, 4)
        self.assertTrue(np.isfinite(slow.max_reduced))
        self.assertLess(slow.max_reduced, 1.0 / sys.g_tol)
        self.assertLess(slow.residual, 1e-6)


class SingularChartTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.toy = toy_5d()
        cls.slow = slow_manifold(cls.toy, delta=0.02, **GRID)

    def test_toy_center_chart(self):
        chart = singular_center_chart(self.toy, slow=self.slow, **GRID)
        self.assertEqual(chart.base_dimension, 3)
        for point in ([0.0, 0.0, 0.004, -0.002, 0.006], [0.0, 0.0, -0.003, 0.001, -0.004]):
            V = chart.evaluate(chart.project(point), exact=True)
            np.testing.assert_allclose(V, point, atol=1e-8)

    def test_fast_only_center_chart_is_the_curve(self):
        sys = fast_only()
        chart = singular_center_chart(sys, delta=0.02, **GRID)
        self.assertEqual(chart.base_dimension, 1)
        V = chart.evaluate(chart.project([0.0, 0.005]), exact=True)
        np.testing.assert_allclose(V, [0.0, 0.005], atol=1e-10)

    def test_toy_uniformly_stable_chart(self):
        chart = singular_us_chart(self.toy, slow=self.slow, **GRID)
        self.assertEqual(chart.base_dimension, 3)
        self.assertEqual(chart.meta['s0_dimension'], 2)
        for point in ([0.004, 0.003, 0.0, 0.0, 0.006], [-0.002, 0.005, 0.0, 0.0, -0.005]):
            V = chart.evaluate(chart.project(point), exact=True)
            np.testing.assert_allclose(V, point, atol=1e-8)

    def test_decomposition_has_no_interaction_without_coupling(self):
        chart = singular_us_chart(self.toy, slow=self.slow, **GRID)
        parts = slow_fast_decomposition(self.toy, chart, point=[0.004, 0.005, 0.0, 0.0, 0.006])
        self.assertLess(np.max(np.abs(parts.V_p)), 1e-10)
        np.testing.assert_allclose(parts.V_sl + parts.V_f + parts.V_p, parts.V, atol=1e-8)
        self.assertGreaterEqual(parts.rate, parts.c)
        np.testing.assert_allclose(parts.t, 0.006 * parts.tau, rtol=1e-10)
        self.assertEqual(list(parts.to_frame().columns[:2]), ['tau', 't'])

    def test_start_on_the_curve(self):
        chart = singular_us_chart(self.toy, slow=self.slow, **GRID)
        parts = slow_fast_decomposition(self.toy, chart, point=[0.0, 0.0, 0.0, 0.0, 0.005], check_limit=True,
                                        horizon=5.0)
        np.testing.assert_allclose(parts.V_sl, np.tile([0.0, 0.0, 0.0, 0.0, 0.005], (parts.tau.size, 1)),
                                   atol=1e-10)
        np.testing.assert_allclose(parts.V_f, 0.0, atol=1e-12)
        np.testing.assert_allclose(parts.V_p, 0.0, atol=1e-12)
        self.assertLess(parts.limit.miss, 1e-10)

    def test_weak_coupling_keeps_interaction_small(self):
        sys = toy_5d(kappa=1e-2)
        chart = singular_us_chart(sys, delta=0.02, **GRID)
        parts = slow_fast_decomposition(sys, chart, point=[0.005, 0.005, 0.0, 0.0, 0.006], check_limit=True,
                                        horizon=800.0)
        self.assertLessEqual(parts.norms()['V_p'], 0.1 * np.linalg.norm(parts.V_f[0]))
        self.assertGreaterEqual(parts.rate, parts.c)
        self.assertAlmostEqual(parts.limit.V_inf[4], 0.006, delta=1e-6)

    def test_decomposition_needs_a_slaving_chart(self):
        chart = singular_center_chart(self.toy, slow=self.slow, **GRID)
        with self.assertRaises(InvalidInputError):
            slow_fast_decomposition(self.toy, chart, point=[0.0, 0.0, 0.001, 0.0, 0.004])

    def test_navier_stokes_center_chart_keeps_the_sign_of_zeta(self):
        sys = ns_polytropic()
        chart = singular_center_chart(sys, delta=0.02)
        field = sys.tau_field()
        rng = np.random.default_rng(50)
        for _ in range(20):
            xi = rng.uniform(-0.005, 0.005, chart.base_dimension)
            V0 = chart.evaluate(xi, exact=True)
            if abs(sys.zeta(V0)) < 1e-6:
                continue
            result = integrate_autonomous(field, V0, (0.0, 50.0))
            self.assertTrue(np.all(np.sign(result.y[:, 1]) == np.sign(V0[1])))
