import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from core.exceptions import InvalidInputError, RangeError

from .services import classify_spectrum, decay_bound_check, expm_action, linear_flow, matrix_exp, project

EXAMPLE_3 = np.array([
    [2.0, 0.0, 0.0, 0.0],
    [0.0, -1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, -3.0],
    [0.0, 0.0, 3.0, 0.0],
])

JORDAN = np.array([[0.0, 1.0], [0.0, 0.0]])


def random_orthogonal(seed, d):
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


class ClassifySpectrumTests(SimpleTestCase):

    def test_linear_example(self):
        split = classify_spectrum(EXAMPLE_3)
        self.assertEqual(split.dims, (1, 1, 2))
        self.assertEqual(split.beta_plus, 2.0)
        self.assertEqual(split.beta_minus, 1.0)
        residuals = split.residuals()
        self.assertLess(residuals['identity'], 1e-12)
        self.assertLess(residuals['idempotency'], 1e-12)
        self.assertLess(residuals['commutation'], 1e-12)

    def test_nilpotent_jordan_block(self):
        split = classify_spectrum(JORDAN)
        self.assertEqual(split.dims, (0, 0, 2))
        self.assertIsNone(split.beta_plus)
        self.assertIsNone(split.beta_minus)
        self.assertEqual(split.clusters[0].multiplicity, 2)
        self.assertEqual(split.clusters[0].chain_length, 2)

    def test_zero_matrix(self):
        split = classify_spectrum(np.zeros((3, 3)))
        self.assertEqual(split.dims, (0, 0, 3))
        np.testing.assert_allclose(split.proj_c, np.eye(3), atol=1e-15)

    def test_invalid_input(self):
        with self.assertRaises(InvalidInputError):
            classify_spectrum(np.zeros((2, 3)))
        with self.assertRaises(InvalidInputError):
            classify_spectrum([[np.nan, 0.0], [0.0, 1.0]])
        with self.assertRaises(InvalidInputError):
            classify_spectrum(EXAMPLE_3, tol_zero=-1.0)

    def test_caller_tolerance_moves_borderline_eigenvalue(self):
        A = np.diag([-1e-6, 1.0])
        self.assertEqual(classify_spectrum(A).dims, (1, 1, 0))
        self.assertEqual(classify_spectrum(A, tol_zero=1e-4).dims, (0, 1, 1))

    def test_split_is_read_only(self):
        split = classify_spectrum(EXAMPLE_3)
        with self.assertRaises(ValueError):
            split.proj_s[0, 0] = 1.0

    @settings(max_examples=25, derandomize=True, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_orthogonal_similarity_keeps_dimensions(self, seed):
        Q = random_orthogonal(seed, 4)
        split = classify_spectrum(Q @ EXAMPLE_3 @ Q.T)
        self.assertEqual(split.dims, (1, 1, 2))
        self.assertLess(split.residuals()['identity'], 1e-10)


class ProjectTests(SimpleTestCase):

    def test_center_projection_of_linear_example(self):
        split = classify_spectrum(EXAMPLE_3)
        np.testing.assert_allclose(project(split, 'center', [1, 1, 1, 1]), [0, 0, 1, 1], atol=1e-14)

    def test_zero_vector(self):
        split = classify_spectrum(EXAMPLE_3)
        for which in ('stable', 'unstable', 'center'):
            np.testing.assert_array_equal(project(split, which, np.zeros(4)), np.zeros(4))

    def test_projections_sum_to_vector(self):
        rng = np.random.default_rng(7)
        A = rng.standard_normal((5, 5))
        split = classify_spectrum(A)
        v = rng.standard_normal(5)
        total = sum(project(split, which, v) for which in ('stable', 'unstable', 'center'))
        np.testing.assert_allclose(total, v, atol=1e-10)

    def test_dimension_mismatch(self):
        split = classify_spectrum(EXAMPLE_3)
        with self.assertRaises(InvalidInputError):
            project(split, 'center', [1.0, 2.0])
        with self.assertRaises(InvalidInputError):
            project(split, 'sideways', np.zeros(4))


class ExpmActionTests(SimpleTestCase):

    def test_zero_matrix_is_identity(self):
        v = np.array([1.0, -2.0, 3.0])
        np.testing.assert_array_equal(expm_action(np.zeros((3, 3)), 5.0, v), v)

    def test_unstable_direction_of_linear_example(self):
        out = expm_action(EXAMPLE_3, 1.0, [1.0, 0.0, 0.0, 0.0])
        self.assertAlmostEqual(out[0] / math.exp(2.0), 1.0, delta=1e-10)
        np.testing.assert_array_equal(out[1:], np.zeros(3))

    def test_rotation_block(self):
        R = np.array([[0.0, -3.0], [3.0, 0.0]])
        w0, z0, t = 0.3, -1.2, 0.7
        out = expm_action(R, t, [w0, z0])
        expected = [w0 * math.cos(3 * t) - z0 * math.sin(3 * t), z0 * math.cos(3 * t) + w0 * math.sin(3 * t)]
        np.testing.assert_allclose(out, expected, rtol=1e-10, atol=1e-12)

    def test_overflow_guard(self):
        with self.assertRaises(RangeError):
            expm_action(EXAMPLE_3, 1000.0, np.ones(4))

    def test_method_metadata(self):
        self.assertEqual(matrix_exp(EXAMPLE_3, 0.0).method, 'identity')
        action = matrix_exp(np.diag([-1.0, 0.5]), 100.0)
        self.assertEqual(action.method, 'pade-scaling-squaring')
        # ||A t||_1 = 100 needs 2^5 halvings to reach theta_13 = 5.37
        self.assertEqual(action.squarings_estimate, 5)
        self.assertFalse(hasattr(action, 'squarings'))

    def test_linear_flow_samples(self):
        states = linear_flow(EXAMPLE_3, [0.0, 1.0], [0.0, 1.0, 0.0, 0.0])
        np.testing.assert_allclose(states[1], [0.0, math.exp(-1.0), 0.0, 0.0], rtol=1e-12)

    def test_center_part_grows_at_most_polynomially(self):
        for A in (EXAMPLE_3, np.pad(JORDAN, ((0, 2), (0, 2)))):
            split = classify_spectrum(A)
            d = split.dimension
            rng = np.random.default_rng(3)
            for t in np.linspace(-20.0, 20.0, 41):
                v = rng.standard_normal(d)
                growth = np.linalg.norm(expm_action(A, t, split.proj_c @ v))
                self.assertLessEqual(growth, (1 + abs(t)) ** d * np.linalg.norm(v) * (1 + 1e-12))


class DecayBoundTests(SimpleTestCase):

    def test_stable_direction_closed_form(self):
        split = classify_spectrum(EXAMPLE_3)
        report = decay_bound_check(split, EXAMPLE_3, [(1.0, [0.0, 1.0, 0.0, 0.0])])
        self.assertAlmostEqual(report.C_stable, math.exp(-1.0 + 0.5), delta=1e-12)

    def test_time_zero_gives_projection_norm(self):
        split = classify_spectrum(EXAMPLE_3)
        report = decay_bound_check(split, None, [(0.0, [1.0, 1.0, 0.0, 0.0])])
        self.assertAlmostEqual(report.C, 1.0 / math.sqrt(2.0), delta=1e-12)

    def test_random_stable_matrix_constant_is_stable(self):
        Q = random_orthogonal(11, 3)
        A = Q @ np.diag([-0.5, -1.0, -2.0]) @ Q.T
        split = classify_spectrum(A)
        rng = np.random.default_rng(5)

        def samples(n):
            times = np.concatenate([[0.0], rng.uniform(0.0, 10.0, n - 1)])
            return [(t, rng.standard_normal(3)) for t in times]

        small = decay_bound_check(split, A, samples(100))
        large = decay_bound_check(split, A, samples(200))
        self.assertTrue(np.isfinite(small.C))
        self.assertLess(abs(small.C - large.C) / large.C, 0.05)

    def test_violations_are_reported(self):
        split = classify_spectrum(EXAMPLE_3)
        report = decay_bound_check(split, EXAMPLE_3, [(1.0, [0.0, 1.0, 0.0, 0.0])], C_claim=0.1)
        self.assertEqual(len(report.violations), 1)
