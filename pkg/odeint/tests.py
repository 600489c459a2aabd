import math

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import InvalidInputError, RangeError, StiffnessError

from .models import Event
from .services import dense_eval, integrate


def decay(t, y):
    return -y


def rotation(t, y):
    return np.array([y[1], -y[0]])


def fast_example_in_tau(tau, y):
    # (v1, v2, t) for dv/dt = F/zeta with F = (-v2, -v2 v1), zeta = v1
    v1, v2, _t = y
    return np.array([-v2, -v2 * v1, v1])


class IntegrateTests(SimpleTestCase):

    def test_scalar_exponential(self):
        result = integrate(decay, [1.0], (0.0, 1.0), rtol=1e-10, atol=1e-12)
        self.assertAlmostEqual(result.y_final[0], math.exp(-1.0), delta=1e-9)
        self.assertEqual(result.status, 'success')
        self.assertEqual(result.t_final, 1.0)

    def test_rotation_returns_after_one_period(self):
        result = integrate(rotation, [1.0, 0.0], (0.0, 2 * math.pi), rtol=1e-11, atol=1e-13)
        np.testing.assert_allclose(result.y_final, [1.0, 0.0], atol=1e-8)

    def test_backward_integration(self):
        result = integrate(decay, [math.exp(-1.0)], (1.0, 0.0), rtol=1e-10, atol=1e-12)
        self.assertAlmostEqual(result.y_final[0], 1.0, delta=1e-9)

    def test_event_matches_singular_hit_time(self):
        zeta = Event(lambda tau, y: y[0], terminal=True, name='zeta')
        result = integrate(fast_example_in_tau, [0.5, 1.0, 0.0], (0.0, 10.0),
                           rtol=1e-12, atol=1e-14, events=[zeta])
        self.assertEqual(result.status, 'event')
        t_star = -math.log(1.0 - 0.5 ** 2 / 2.0)
        self.assertAlmostEqual(result.terminal_event.y[2], t_star, delta=1e-8)
        self.assertAlmostEqual(result.terminal_event.y[0], 0.0, delta=1e-10)

    def test_event_times_are_deterministic(self):
        zeta = Event(lambda tau, y: y[0], name='zeta')
        first = integrate(fast_example_in_tau, [0.5, 1.0, 0.0], (0.0, 10.0), events=[zeta])
        second = integrate(fast_example_in_tau, [0.5, 1.0, 0.0], (0.0, 10.0), events=[zeta])
        self.assertEqual(first.terminal_event.t, second.terminal_event.t)

    def test_non_terminal_event_is_recorded(self):
        crossing = Event(lambda t, y: y[0], terminal=False, direction=-1, name='down')
        result = integrate(rotation, [1.0, 0.0], (0.0, 2 * math.pi), events=[crossing])
        self.assertEqual(result.status, 'success')
        self.assertEqual(len(result.events), 1)
        self.assertAlmostEqual(result.events[0].t, math.pi / 2, delta=1e-8)

    def test_non_finite_event_rejected(self):
        bad = Event(lambda t, y: float('nan'), name='bad')
        with self.assertRaises(InvalidInputError):
            integrate(decay, [1.0], (0.0, 1.0), events=[bad])

    def test_blow_up_raises_stiffness(self):
        with self.assertRaises(StiffnessError) as ctx:
            integrate(lambda t, y: y ** 2, [1.0], (0.0, 2.0))
        self.assertIn('t', ctx.exception.details)

    def test_fixed_step_convergence_order(self):
        errors = []
        for h in (0.2, 0.1, 0.05):
            result = integrate(decay, [1.0], (0.0, 1.0), rtol=1.0, atol=1.0,
                               first_step=h, max_step=h)
            errors.append(abs(result.y_final[0] - math.exp(-1.0)))
        orders = [math.log2(errors[k] / errors[k + 1]) for k in range(2)]
        self.assertGreaterEqual(min(orders), 4.5)


class DenseEvalTests(SimpleTestCase):

    def setUp(self):
        self.result = integrate(decay, [1.0], (0.0, 2.0), rtol=1e-10, atol=1e-12)

    def test_step_states_are_exact(self):
        for k in (0, len(self.result.t) // 2, len(self.result.t) - 1):
            np.testing.assert_array_equal(dense_eval(self.result, self.result.t[k]), self.result.y[k])

    def test_mid_step_value(self):
        t_mid = 0.5 * (self.result.t[1] + self.result.t[2])
        self.assertAlmostEqual(dense_eval(self.result, t_mid)[0], math.exp(-t_mid), delta=1e-8)

    def test_array_of_times(self):
        times = np.linspace(0.0, 2.0, 11)
        values = dense_eval(self.result, times)
        np.testing.assert_allclose(values[:, 0], np.exp(-times), atol=1e-8)

    def test_out_of_span(self):
        with self.assertRaises(RangeError):
            dense_eval(self.result, 2.5)

    def test_interpolation_error_shrinks_with_step(self):
        errors = []
        for h in (0.2, 0.1):
            result = integrate(rotation, [1.0, 0.0], (0.0, 1.0), rtol=1.0, atol=1.0,
                               first_step=h, max_step=h)
            t_mid = 0.5 * h
            exact = np.array([math.cos(t_mid), -math.sin(t_mid)])
            errors.append(np.linalg.norm(dense_eval(result, t_mid) - exact))
        self.assertGreaterEqual(errors[0] / errors[1], 4.0)
