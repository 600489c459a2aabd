import numpy as np
from django.core.exceptions import ImproperlyConfigured
from django.test import SimpleTestCase, override_settings
from hypothesis import given, settings, strategies as st

from .checks import check_numeric_settings
from .exceptions import NEGATIVE_RESULTS, HypothesisFailure, InvalidInputError, NoConnectionError, UsageError
from .utils import (
    as_square_matrix,
    as_vector,
    declared_settings,
    get_setting,
    gradient_fd,
    jacobian_fd,
    require_positive,
    unit,
)


class SettingsTests(SimpleTestCase):

    def test_project_values(self):
        self.assertEqual(get_setting('SINGULAR', 'chart_delta'), 0.02)
        self.assertEqual(get_setting('CLI', 'float_digits'), 17)

    @override_settings(VISCPROF={'PROFILES': {'tol': 1e-6}})
    def test_partial_override_falls_back(self):
        self.assertEqual(get_setting('PROFILES', 'tol'), 1e-6)
        self.assertEqual(get_setting('PROFILES', 'horizon'), 40.0)

    @override_settings(VISCPROF={})
    def test_declared_module_is_the_only_fallback(self):
        self.assertEqual(get_setting('RIEMANN', 'chart_delta'), declared_settings()['RIEMANN']['chart_delta'])
        with self.assertRaises(ImproperlyConfigured):
            get_setting('RIEMANN', 'no_such_key')

    def test_apps_read_the_settings_module(self):
        for section, values in declared_settings().items():
            for key, value in values.items():
                self.assertEqual(get_setting(section, key), value)

    @override_settings(VISCPROF={'RIEMANN': {'fp_tol': 0.0, 'grid_n': 64}, 'PLOTS': {}})
    def test_checks_flag_bad_values(self):
        ids = sorted(message.id for message in check_numeric_settings(None))
        self.assertEqual(ids, ['core.E001', 'core.E002'])

    @override_settings(VISCPROF={'SINGULAR': {'seed': 0}, 'PROFILES': {'horizon_doublings': 0}})
    def test_counts_may_be_zero(self):
        self.assertEqual(check_numeric_settings(None), [])


class ValidationTests(SimpleTestCase):

    def test_vector(self):
        np.testing.assert_array_equal(as_vector(2.0), [2.0])
        with self.assertRaises(InvalidInputError) as ctx:
            as_vector([1.0, 2.0], 3, 'u_minus')
        self.assertEqual(ctx.exception.details, {'expected': 3, 'got': 2})
        for bad in ([np.nan], [[1.0, 2.0]], ['a']):
            with self.assertRaises(InvalidInputError):
                as_vector(bad)

    def test_matrix(self):
        self.assertEqual(as_square_matrix(3.0).shape, (1, 1))
        with self.assertRaises(InvalidInputError):
            as_square_matrix(np.ones((2, 3)))

    def test_positive(self):
        self.assertEqual(require_positive('0.5', 'tol'), 0.5)
        for bad in (0.0, -1.0, np.inf):
            with self.assertRaises(InvalidInputError):
                require_positive(bad, 'tol')

    def test_unit(self):
        np.testing.assert_allclose(unit(np.array([3.0, 4.0])), [0.6, 0.8])
        with self.assertRaises(InvalidInputError):
            unit(np.zeros(2))


class FiniteDifferenceTests(SimpleTestCase):

    @settings(max_examples=30, derandomize=True, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 16))
    def test_jacobian_of_quadratic_map(self, seed):
        rng = np.random.default_rng(seed)
        A, B = rng.normal(size=(3, 3)), rng.normal(size=3)
        x = rng.normal(size=3)
        fn = lambda v: A @ v + B * v[0] * v[1]
        exact = A + np.outer(B, [x[1], x[0], 0.0])
        np.testing.assert_allclose(jacobian_fd(fn, x), exact, atol=1e-7)

    def test_gradient(self):
        grad = gradient_fd(lambda v: v[0] ** 2 + 3 * v[1], [1.0, 2.0])
        np.testing.assert_allclose(grad, [2.0, 3.0], atol=1e-8)


class ExceptionTests(SimpleTestCase):

    def test_as_dict(self):
        e = NoConnectionError('missed u+', {'miss': 0.7})
        self.assertEqual(e.as_dict(), {'error': 'no-connection', 'message': 'missed u+', 'details': {'miss': 0.7}})

    def test_hierarchy(self):
        self.assertTrue(issubclass(UsageError, ValueError))
        self.assertIn(HypothesisFailure, NEGATIVE_RESULTS)
        self.assertNotIn(InvalidInputError, NEGATIVE_RESULTS)

    def test_hypothesis_failure_carries_report(self):
        class Report:
            def to_dict(self):
                return {'failed': ['H3']}

        e = HypothesisFailure('H3 does not hold', Report())
        self.assertEqual(e.details['failed'], ['H3'])
