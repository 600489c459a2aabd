import numpy as np
from django.test import SimpleTestCase, override_settings
from hypothesis import given, settings, strategies as st

from core.exceptions import ClassificationError, DomainError, InvalidInputError, NoContractionError
from profiles.models import FluxSystem

from .models import Jump, Rarefaction, WaveFanCurve
from .services import (
    classical_scalar_solution,
    classify_segments,
    convex_envelope,
    sample_solution,
    wave_fan_curve_value,
    wave_fan_fixed_point,
    wave_fan_sweep,
)


def burgers():
    return FluxSystem(1, lambda u: 0.5 * u ** 2, lambda u: np.array([[u[0]]]), name='burgers')


def cubic():
    return FluxSystem(1, lambda u: u ** 3 / 3.0, lambda u: np.array([[u[0] ** 2]]), name='cubic')


def chord_oracle(x, y):
    """Convex envelope by minimising over every chord that spans each node"""
    n = x.size
    out = np.empty(n)
    for k in range(n):
        i = np.arange(0, k + 1)[:, None]
        j = np.arange(k, n)[None, :]
        with np.errstate(invalid='ignore', divide='ignore'):
            chords = y[i] + (y[j] - y[i]) * (x[k] - x[i]) / (x[j] - x[i])
        chords = np.where(i == j, y[k], chords)
        out[k] = np.min(chords)
    return out


class ConvexEnvelopeTests(SimpleTestCase):

    def test_convex_input_is_its_own_envelope(self):
        x = np.linspace(0.0, 2.0, 101)
        env = convex_envelope(x, x ** 2)
        np.testing.assert_array_equal(env.envelope, x ** 2)
        self.assertTrue(np.all(env.contact))

    def test_concave_input_gives_chord(self):
        s = 2.0
        x = np.linspace(0.0, s, 101)
        env = convex_envelope(x, -(x - s / 2) ** 2)
        np.testing.assert_allclose(env.envelope, np.full_like(x, -1.0), atol=1e-15)
        self.assertTrue(env.contact_nodes[0] and env.contact_nodes[-1])
        self.assertFalse(np.any(env.contact_nodes[1:-1]))
        self.assertFalse(np.any(env.contact))

    def test_two_wells_match_chord_oracle(self):
        x = np.linspace(-1.5, 1.5, 200)
        y = (x ** 2 - 1.0) ** 2
        env = convex_envelope(x, y)
        self.assertLessEqual(np.max(np.abs(env.envelope - chord_oracle(x, y))), 1e-12)

    def test_concave_envelope_on_descending_grid(self):
        x = np.linspace(0.0, -1.0, 51)
        env = convex_envelope(x, 0.5 * x ** 2, concave=True)
        np.testing.assert_allclose(env.envelope, -0.5 * x, atol=1e-15)
        np.testing.assert_allclose(env.slopes, -0.5, atol=1e-12)
        self.assertEqual(list(env.vertices), [0, 50])

    def test_idempotent(self):
        x = np.linspace(-1.5, 1.5, 200)
        once = convex_envelope(x, np.cos(5 * x) + 0.1 * x)
        twice = convex_envelope(x, once.envelope)
        np.testing.assert_array_equal(twice.envelope, once.envelope)

    def test_invalid_samples(self):
        with self.assertRaises(InvalidInputError):
            convex_envelope([0.0, 1.0], [0.0, np.nan])
        with self.assertRaises(InvalidInputError):
            convex_envelope([0.0], [1.0])
        with self.assertRaises(InvalidInputError):
            convex_envelope([0.0, 1.0, 0.5], [0.0, 1.0, 2.0])

    @settings(max_examples=25, derandomize=True, deadline=None)
    @given(st.integers(0, 10_000), st.booleans())
    def test_random_samples(self, seed, concave):
        rng = np.random.default_rng(seed)
        x = np.linspace(0.0, 1.0, 60)
        y = rng.standard_normal(60)
        env = convex_envelope(x, y, concave=concave)
        sign = -1.0 if concave else 1.0
        self.assertTrue(np.all(sign * (y - env.envelope) >= -1e-12))
        self.assertTrue(np.all(sign * np.diff(env.envelope, 2) >= -1e-12))
        self.assertEqual(env.envelope[0], y[0])
        self.assertEqual(env.envelope[-1], y[-1])
        oracle = sign * chord_oracle(x, sign * y)
        self.assertLessEqual(np.max(np.abs(env.envelope - oracle)), 1e-12)


class WaveFanTests(SimpleTestCase):

    def test_zero_strength_collapses(self):
        curve = wave_fan_fixed_point(burgers(), [0.3], 1, 0.0)
        np.testing.assert_array_equal(curve.u, [[0.3]])
        self.assertEqual(classify_segments(curve).segments, [])
        np.testing.assert_array_equal(wave_fan_curve_value(burgers(), [0.3], 1, 0.0), [0.3])

    def test_burgers_rarefaction(self):
        curve = wave_fan_fixed_point(burgers(), [0.0], 1, 1.0)
        np.testing.assert_allclose(curve.u[:, 0], curve.tau, atol=1e-13)
        np.testing.assert_allclose(curve.v, 0.0, atol=1e-13)
        np.testing.assert_allclose(curve.sigma, curve.tau, atol=1e-13)
        self.assertLessEqual(curve.history[-1], 1e-12)

        fan = classify_segments(curve)
        self.assertEqual(len(fan.segments), 1)
        seg = fan.segments[0]
        self.assertIsInstance(seg, Rarefaction)
        self.assertEqual(seg.tau, (0.0, 1.0))
        np.testing.assert_allclose(seg.speeds, (0.0, 1.0), atol=1e-13)

        self.assertAlmostEqual(sample_solution(fan, 1.0, 0.5)[0], 0.5, places=10)
        self.assertEqual(sample_solution(fan, 1.0, -3.0)[0], 0.0)
        self.assertEqual(sample_solution(fan, 1.0, 4.0)[0], curve.u[-1, 0])

    def test_burgers_shock(self):
        curve = wave_fan_fixed_point(burgers(), [0.0], 1, -1.0)
        self.assertTrue(np.all(curve.v <= 1e-15))
        fan = classify_segments(curve)
        self.assertEqual(len(fan.segments), 1)
        jump = fan.segments[0]
        self.assertIsInstance(jump, Jump)
        self.assertAlmostEqual(jump.speed, -0.5, places=12)
        self.assertLessEqual(jump.rh_residual, 1e-8)
        np.testing.assert_allclose(jump.right, [-1.0], atol=1e-13)
        # shock sits at x = -t/2
        self.assertEqual(sample_solution(fan, 2.0, -1.2)[0], 0.0)
        self.assertAlmostEqual(sample_solution(fan, 2.0, -0.8)[0], -1.0, places=12)

    def test_sampling_needs_positive_time(self):
        fan = classify_segments(wave_fan_fixed_point(burgers(), [0.0], 1, 0.5))
        with self.assertRaises(InvalidInputError):
            sample_solution(fan, 0.0, 0.1)

    def test_scalar_curve_is_unit_speed(self):
        strengths = np.linspace(-0.5, 0.5, 11)
        values = [wave_fan_curve_value(burgers(), [0.0], 1, s)[0] for s in strengths]
        np.testing.assert_allclose(values, strengths, atol=1e-12)
        self.assertLessEqual(np.max(np.abs(np.diff(values))), 2 * (strengths[1] - strengths[0]))

    def test_linear_flux_moves_along_eigenvector(self):
        L = np.diag([1.0, 2.0])
        flux = FluxSystem(2, lambda u: L @ u, lambda u: L, is_linear=True)
        u_minus = np.array([0.2, -0.1])
        for i, r in ((1, [1.0, 0.0]), (2, [0.0, 1.0])):
            for s in (0.3, -0.2):
                np.testing.assert_allclose(wave_fan_curve_value(flux, u_minus, i, s), u_minus + s * np.array(r),
                                           atol=1e-12)
        curve = wave_fan_fixed_point(flux, u_minus, 2, 0.3)
        np.testing.assert_allclose(np.linalg.norm(np.diff(curve.u, axis=0), axis=1), np.diff(curve.tau), rtol=1e-10)
        np.testing.assert_allclose(curve.sigma, 2.0, atol=1e-12)

    def test_speeds_are_monotone_and_ordered(self):
        curve = wave_fan_fixed_point(cubic(), [1.0], 1, -2.0, grid_n=257)
        self.assertTrue(np.all(np.diff(curve.sigma) >= 0))
        fan = classify_segments(curve)
        self.assertEqual([seg.kind for seg in fan.segments], ['jump', 'rarefaction'])
        bounds = [seg.speeds for seg in fan.segments]
        for (_, high), (low, _) in zip(bounds[:-1], bounds[1:]):
            self.assertLessEqual(high, low + 1e-12)
        self.assertAlmostEqual(fan.segments[0].speed, 0.25, delta=1e-3)

    def test_strength_outside_chart(self):
        with self.assertRaises(DomainError):
            wave_fan_fixed_point(burgers(), [0.0], 1, 0.5, delta=0.1)

    def test_default_radius_is_capped(self):
        with self.assertRaises(DomainError) as ctx:
            wave_fan_fixed_point(burgers(), [0.0], 1, 5.0)
        self.assertEqual(ctx.exception.details['delta'], 4.0)

    @override_settings(VISCPROF={'RIEMANN': {'chart_delta': 0.5}})
    def test_default_radius_follows_settings(self):
        with self.assertRaises(DomainError):
            wave_fan_fixed_point(burgers(), [0.0], 1, 1.0)
        curve = wave_fan_fixed_point(burgers(), [0.0], 1, 0.2)
        np.testing.assert_allclose(curve.end_state, [0.2], atol=1e-12)

    def test_iteration_cap(self):
        with self.assertRaises(NoContractionError) as ctx:
            wave_fan_fixed_point(burgers(), [0.0], 1, 1.0, max_iter=1)
        self.assertEqual(len(ctx.exception.details['history']), 1)

    def test_varying_speed_on_gap(self):
        tau = np.linspace(0.0, 1.0, 5)
        curve = WaveFanCurve(
            family=1, u_minus=np.zeros(1), s=1.0, tau=tau, u=tau[:, None].copy(), v=np.ones(5),
            sigma=np.linspace(0.0, 0.4, 5), lam=np.zeros(5), f=np.zeros(5),
            envelope=np.array([0.0, 0.1, 0.3, 0.6, 1.0]), contact=np.zeros(4, dtype=bool),
            contact_nodes=np.zeros(5, dtype=bool), contact_tol=1e-9, flux=burgers(),
        )
        with self.assertRaises(ClassificationError):
            classify_segments(curve)

    def test_sweep_keeps_input_order(self):
        strengths = [0.4, -0.3, 0.1]
        serial = wave_fan_sweep(burgers(), [0.0], 1, strengths)
        parallel = wave_fan_sweep(burgers(), [0.0], 1, strengths, jobs=3)
        self.assertEqual([c.s for c in parallel], strengths)
        for a, b in zip(serial, parallel):
            np.testing.assert_array_equal(a.u, b.u)

    def test_fan_serialises(self):
        fan = classify_segments(wave_fan_fixed_point(burgers(), [0.0], 1, -1.0))
        data = fan.to_dict()
        self.assertEqual(data['segments'][0]['kind'], 'jump')
        self.assertAlmostEqual(data['segments'][0]['speed'], -0.5, places=12)
        self.assertEqual(data['u_minus'], [0.0])


class ScalarEquivalenceTests(SimpleTestCase):

    def test_classical_burgers(self):
        f, fp = (lambda u: 0.5 * u * u), (lambda u: u)
        self.assertAlmostEqual(classical_scalar_solution(f, fp, 0.0, 1.0, 1.0, 0.5), 0.5, places=12)
        self.assertEqual(classical_scalar_solution(f, fp, 0.0, -1.0, 2.0, -1.2), 0.0)
        self.assertEqual(classical_scalar_solution(f, fp, 0.0, -1.0, 2.0, -0.8), -1.0)
        with self.assertRaises(InvalidInputError):
            classical_scalar_solution(f, fp, 0.0, 1.0, -1.0, 0.5)

    def test_cubic_shock_rarefaction(self):
        f, fp = (lambda u: u ** 3 / 3.0), (lambda u: u * u)
        curve = wave_fan_fixed_point(cubic(), [1.0], 1, -2.0, grid_n=1025)
        fan = classify_segments(curve)
        x = np.linspace(-1.0, 2.0, 1000)
        # jump 1 -> -1/2 at speed 1/4, then u = -sqrt(x/t) up to speed 1
        exact = np.where(x < 0.25, 1.0, np.where(x <= 1.0, -np.sqrt(np.clip(x, 0.25, 1.0)), -1.0))
        away = np.abs(x - 0.25) > 1e-2
        pipeline = np.array([sample_solution(fan, 1.0, xk)[0] for xk in x])
        classical = np.array([classical_scalar_solution(f, fp, 1.0, -1.0, 1.0, xk) for xk in x])
        self.assertLessEqual(np.max(np.abs(pipeline - classical)[away]), 1e-6)
        self.assertLessEqual(np.max(np.abs(classical - exact)[away]), 1e-6)

    def test_burgers_pipeline_matches_classical(self):
        f, fp = (lambda u: 0.5 * u * u), (lambda u: u)
        for u_minus, s in ((-0.5, 1.0), (0.5, -1.0)):
            fan = classify_segments(wave_fan_fixed_point(burgers(), [u_minus], 1, s))
            u_right = u_minus + s
            for t in (0.5, 2.0):
                for x in np.linspace(-2.0, 2.0, 41):
                    if abs(x / t - (u_minus + u_right) / 2) < 1e-6:
                        continue
                    self.assertAlmostEqual(
                        sample_solution(fan, t, x)[0],
                        classical_scalar_solution(f, fp, u_minus, u_right, t, x),
                        delta=1e-6,
                    )
