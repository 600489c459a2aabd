import contextlib
import io
import json
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from core.exceptions import InvalidInputError

from .cli import command_names, run_command
from .forms import ProblemConfigForm
from .models import ProblemConfig
from .services import run
from .systems import (
    REGISTRY,
    build_system,
    describe,
    fast_example_closed_form,
    fast_example_hit_time,
    get_entry,
    system_names,
)
from .utils import EXIT_NEGATIVE, EXIT_OK, EXIT_USAGE, dumps, emit_report, load_config, merge_options, \
    parse_params, parse_vector

SYSTEMS = [
    'burgers', 'linear-example-3', 'jordan-example', 'scalar-linear-bl', 'p-system',
    'singular-fast-ex', 'singular-slow-ex', 'rotation-toy', 'toy-5d', 'ns-polytropic',
]


def viscprof(*argv):
    """Exit status, stdout and stderr of one command line"""
    out, err = io.StringIO(), io.StringIO()
    status = run_command([str(a) for a in argv], stdout=out, stderr=err)
    return status, out.getvalue(), err.getvalue()


# ================ CATALOG ================

class SystemCatalogTests(SimpleTestCase):

    def test_ten_systems_in_order(self):
        self.assertEqual(system_names(), SYSTEMS)

    def test_literature_defaults(self):
        self.assertEqual(REGISTRY['p-system'].defaults['gamma'], 1.4)
        self.assertEqual(REGISTRY['ns-polytropic'].defaults['gamma'], 1.4)
        self.assertEqual(REGISTRY['scalar-linear-bl'].defaults['a'], -1.0)

    def test_unknown_name_lists_choices(self):
        with self.assertRaises(InvalidInputError) as ctx:
            get_entry('euler')
        self.assertIn('burgers', ctx.exception.message)

    def test_unknown_parameter(self):
        with self.assertRaises(InvalidInputError):
            build_system('burgers', gamma=1.4)

    def test_overrides(self):
        flux = build_system('scalar-linear-bl', a=-2.0)
        np.testing.assert_allclose(flux([3.0]), [-6.0])
        gas = build_system('p-system', gamma=5.0 / 3.0)
        self.assertAlmostEqual(float(gas([1.0, 0.0])[1]), 1.0)

    def test_linear_example_spectrum(self):
        A = build_system('linear-example-3').linearization()
        self.assertEqual(sorted(np.round(np.linalg.eigvals(A).real, 12)), [-1.0, 0.0, 0.0, 2.0])

    def test_fast_example_closed_form(self):
        sys = build_system('singular-fast-ex')
        v1, v2 = fast_example_closed_form(1.0, 0.5, 0.2)
        h = 1e-6
        p1, _ = fast_example_closed_form(1.0, 0.5, 0.2 + h)
        m1, _ = fast_example_closed_form(1.0, 0.5, 0.2 - h)
        V = [float(v1), float(v2)]
        rate = sys.F(V) / sys.zeta(V)
        self.assertAlmostEqual(float(p1 - m1) / (2 * h), rate[0], places=7)
        self.assertAlmostEqual(rate[1], -V[1], places=12)

    def test_fast_example_hit_time(self):
        t_star = fast_example_hit_time(0.5, 2.0)
        # v1 reaches zero: v1(0)^2 + 2 v2(0) (e^{-t} - 1) = 0
        self.assertAlmostEqual(0.25 + 4.0 * (np.exp(-t_star) - 1.0), 0.0, places=14)
        self.assertGreater(float(fast_example_closed_form(0.5, 2.0, 0.9 * t_star)[0]), 0.0)
        self.assertTrue(np.isinf(fast_example_hit_time(2.0, 0.5)))

    def test_describe(self):
        data = describe('toy-5d')
        self.assertEqual(data['kind'], 'singular')
        self.assertEqual(data['defaults'], {'kappa': 0.0})
        json.loads(dumps(data))


# ================ REPORTS AND CONFIG ================

class ReportTests(SimpleTestCase):

    def test_json_is_strict_and_sorted(self):
        text = dumps({'b': np.float64('nan'), 'a': np.arange(2), 'c': 1 + 2j})
        data = json.loads(text)
        self.assertEqual(list(data), ['a', 'b', 'c'])
        self.assertIsNone(data['b'])
        self.assertEqual(data['c'], {'real': 1.0, 'imag': 2.0})

    @settings(max_examples=25, derandomize=True, deadline=None)
    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=20))
    def test_csv_floats_read_back_exactly(self, values):
        with tempfile.TemporaryDirectory() as tmp:
            path = emit_report({'x': values}, 'csv', Path(tmp) / 'curve.csv')
            back = pd.read_csv(path, float_precision='round_trip')['x'].to_numpy(dtype=float)
        np.testing.assert_array_equal(back, np.asarray(values, dtype=float))

    def test_json_floats_read_back_exactly(self):
        values = np.random.default_rng(3).normal(size=50)
        with tempfile.TemporaryDirectory() as tmp:
            path = emit_report({'x': values}, 'json', Path(tmp) / 'deep' / 'r.json')
            back = json.loads(path.read_text())['x']
        np.testing.assert_array_equal(back, values)

    def test_unknown_format(self):
        with self.assertRaises(InvalidInputError):
            emit_report({}, 'xlsx', 'r.xlsx')

    def test_config_loading(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'c.json'
            path.write_text('{"grid-n": 65, "uminus": "0"}')
            self.assertEqual(load_config(path), {'grid_n': 65, 'uminus': '0'})
            path.write_text('[1, 2]')
            with self.assertRaises(InvalidInputError):
                load_config(path)
            path.write_text('{oops')
            with self.assertRaises(InvalidInputError):
                load_config(path)

    def test_flags_override_config(self):
        merged = merge_options({'s': '1', 'jobs': None}, {'s': '-1', 'jobs': 2})
        self.assertEqual(merged, {'s': '1', 'jobs': 2})

    def test_vectors_and_params(self):
        self.assertEqual(parse_vector('0.5, -1'), [0.5, -1.0])
        self.assertEqual(parse_vector(2), [2.0])
        self.assertEqual(parse_params(['gamma=1.67']), {'gamma': 1.67})
        with self.assertRaises(InvalidInputError):
            parse_vector('a,b')
        with self.assertRaises(InvalidInputError):
            parse_params(['gamma'])


class ProblemConfigFormTests(SimpleTestCase):

    def form(self, data, **kwargs):
        kwargs.setdefault('command', 'wave_fan')
        kwargs.setdefault('kinds', ('flux',))
        return ProblemConfigForm(data=data, **kwargs)

    def test_valid(self):
        form = self.form({'system': 'burgers', 'uminus': '0', 's': '-1'})
        self.assertTrue(form.is_valid(), form.errors)
        config = form.to_config()
        self.assertEqual(config.system, 'burgers')
        self.assertEqual(config.get('jobs'), 1)
        self.assertEqual(config.get('s'), '-1')
        self.assertEqual(config.out, Path('.'))

    def test_system_required(self):
        self.assertFalse(self.form({'uminus': '0'}).is_valid())

    def test_wrong_kind(self):
        form = self.form({'system': 'toy-5d'})
        self.assertFalse(form.is_valid())
        self.assertIn('system', form.errors)

    def test_tolerances_positive(self):
        for key, value in (('tol', '0'), ('grid_n', '-3'), ('fp_tol', 'abc')):
            form = self.form({'system': 'burgers', key: value})
            self.assertFalse(form.is_valid(), key)

    def test_unknown_parameter(self):
        form = self.form({'system': 'burgers'}, params={'gamma': 1.4})
        self.assertFalse(form.is_valid())

    def test_jobs_at_least_one(self):
        self.assertFalse(self.form({'system': 'burgers', 'jobs': 0}).is_valid())


# ================ RUNNERS ================

class RunnerTests(SimpleTestCase):

    def test_spectrum_of_linear_example(self):
        result = run(ProblemConfig('spectrum', 'linear-example-3', options={'x0': '1,1,1,0', 't_end': 1.0}))
        self.assertEqual(result.payload['split'].get('dims'), {'stable': 1, 'unstable': 1, 'center': 2})
        flow = result.frames['flow']
        last = flow.iloc[-1]
        self.assertAlmostEqual(last['x1'], np.exp(2.0), places=8)
        self.assertAlmostEqual(last['x2'], np.exp(-1.0), places=8)
        self.assertAlmostEqual(np.hypot(last['x3'], last['x4']), 1.0, places=8)

    def test_spectrum_of_flux_needs_state(self):
        with self.assertRaises(InvalidInputError):
            run(ProblemConfig('spectrum', 'p-system'))

    def test_sweep_in_input_order(self):
        result = run(ProblemConfig('wave_fan', 'burgers', options={'uminus': '0', 's': '1,-1', 'jobs': 2}))
        fans = result.payload['fans']
        self.assertEqual([fan['s'] for fan in fans], [1.0, -1.0])
        self.assertEqual([fan['segments'][0]['kind'] for fan in fans], ['rarefaction', 'jump'])
        self.assertEqual(sorted(result.frames), ['curve1', 'curve2'])

    def test_classical_comparison(self):
        result = run(ProblemConfig('riemann_sample', 'burgers',
                                   options={'uminus': '-0.5', 's': 1.0, 'x': '-1,-0.25,0,0.3,1', 'classical': True}))
        self.assertLessEqual(result.payload['classical_max_difference'], 1e-6)
        np.testing.assert_allclose(result.frames['solution']['u1'], [-0.5, -0.25, 0.0, 0.3, 0.5], atol=1e-6)

    def test_unknown_command(self):
        with self.assertRaises(InvalidInputError):
            run(ProblemConfig('plot', 'burgers'))


# ================ COMMAND LINE ================

class CommandLineTests(SimpleTestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.out = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def read_json(self, name):
        return json.loads((self.out / name).read_text())

    def test_command_names(self):
        self.assertEqual(len(command_names()), 11)
        self.assertIn('riemann_sample', command_names())

    def test_burgers_shock_fan(self):
        status, stdout, _ = viscprof('wave-fan', '--system', 'burgers', '--uminus', '0', '--family', '1',
                                     '--s', '-1', '--out', self.out)
        self.assertEqual(status, EXIT_OK)
        self.assertIn('wave_fan.json', stdout)
        fan = self.read_json('wave_fan.json')['fans'][0]
        self.assertEqual(len(fan['segments']), 1)
        jump = fan['segments'][0]
        self.assertEqual(jump['kind'], 'jump')
        self.assertAlmostEqual(jump['speed'], -0.5, places=10)
        self.assertTrue((self.out / 'wave_fan.csv').exists())

    def test_zero_strength_fan(self):
        status, _, _ = viscprof('wave-fan', '--system', 'burgers', '--uminus', '0.3', '--s', '0', '--out', self.out)
        self.assertEqual(status, EXIT_OK)
        fan = self.read_json('wave_fan.json')['fans'][0]
        self.assertEqual(fan['segments'], [])
        self.assertEqual(fan['right_state'], [0.3])

    def test_catalog_lists_ten_systems(self):
        status, stdout, _ = viscprof('catalog')
        self.assertEqual(status, EXIT_OK)
        listed = [line.split()[0] for line in stdout.splitlines() if line.strip()]
        self.assertEqual(listed, SYSTEMS)

    def test_catalog_describe(self):
        status, stdout, _ = viscprof('catalog', '--describe', 'p-system')
        self.assertEqual(status, EXIT_OK)
        self.assertEqual(json.loads(stdout)['defaults'], {'gamma': 1.4, 'kappa': 1.0})

    def test_boundary_layer_csv(self):
        status, _, _ = viscprof('boundary-layer', '--system', 'scalar-linear-bl', '--a', '-1', '--u0', '0',
                                '--ub', '1', '--out', self.out)
        self.assertEqual(status, EXIT_OK)
        frame = pd.read_csv(self.out / 'boundary_layer.csv', float_precision='round_trip')
        self.assertEqual(list(frame.columns), ['y', 'U1', 'p1'])
        np.testing.assert_allclose(frame['U1'], np.exp(-frame['y']), atol=1e-8, rtol=0)

    def test_fast_counterexample_is_negative(self):
        status, _, _ = viscprof('hypotheses', '--system', 'singular-fast-ex', '--out', self.out)
        self.assertEqual(status, EXIT_NEGATIVE)
        report = self.read_json('hypotheses.json')
        self.assertFalse(report['passed'])
        self.assertIn('H5', report['failed'])
        witness = report['hypotheses']['H5']['witness']
        self.assertAlmostEqual(witness['value'], -witness['point'][1], delta=1e-15)

    def test_no_connection_is_negative(self):
        status, _, _ = viscprof('traveling-wave', '--system', 'burgers', '--uminus', '-1', '--uplus', '1',
                                '--sigma', '0', '--out', self.out)
        self.assertEqual(status, EXIT_NEGATIVE)
        report = self.read_json('traveling_wave.json')
        self.assertEqual(report['error'], 'no-connection')

    def test_singular_integrate_hits_singular_set(self):
        status, _, _ = viscprof('singular-integrate', '--system', 'singular-fast-ex', '--v0', '0.5,2',
                                '--t-end', '1', '--out', self.out)
        self.assertEqual(status, EXIT_OK)
        hit = self.read_json('singular_integrate.json')['hit']
        self.assertAlmostEqual(hit['t_star'], fast_example_hit_time(0.5, 2.0), delta=1e-8)
        frame = pd.read_csv(self.out / 'singular_integrate.csv')
        self.assertEqual(list(frame.columns), ['t', 'tau', 'v1', 'v2'])

    def test_usage_errors(self):
        for argv in (
            ('plot',),
            (),
            ('wave-fan', '--system', 'burgers', '--bogus', '1'),
            ('wave-fan', '--system', 'euler'),
            ('wave-fan', '--system', 'toy-5d', '--uminus', '0', '--s', '1'),
            ('wave-fan', '--system', 'burgers', '--s', '1'),
            ('wave-fan', '--system', 'burgers', '--uminus', '0', '--s', '1', '--gamma', '1.4'),
            ('hypotheses', '--system', 'toy-5d', '--tol', '-1'),
        ):
            status, _, _ = viscprof(*argv)
            self.assertEqual(status, EXIT_USAGE, argv)

    def test_help_lists_defaults(self):
        out = io.StringIO()
        with contextlib.redirect_stdout(out):
            status = run_command(['traveling-wave', '--help'])
        self.assertEqual(status, EXIT_OK)
        self.assertIn('gamma=1.4', out.getvalue())

    def test_config_file(self):
        config = self.out / 'fan.json'
        config.write_text(json.dumps({'system': 'burgers', 'uminus': '0', 's': '-1', 'grid-n': 129}))
        status, _, _ = viscprof('wave-fan', '--config', config, '--out', self.out)
        self.assertEqual(status, EXIT_OK)
        self.assertEqual(self.read_json('wave_fan.json')['fans'][0]['segments'][0]['kind'], 'jump')
        self.assertEqual(len(pd.read_csv(self.out / 'wave_fan.csv')), 129)

        # flags win over the file
        status, _, _ = viscprof('wave-fan', '--config', config, '--s', '1', '--out', self.out)
        self.assertEqual(status, EXIT_OK)
        self.assertEqual(self.read_json('wave_fan.json')['fans'][0]['segments'][0]['kind'], 'rarefaction')

    def test_unknown_config_key(self):
        config = self.out / 'bad.json'
        config.write_text(json.dumps({'system': 'burgers', 'colour': 'red'}))
        status, _, stderr = viscprof('wave-fan', '--config', config, '--out', self.out)
        self.assertEqual(status, EXIT_USAGE)
        self.assertIn('colour', stderr)

    def test_call_command(self):
        out = io.StringIO()
        call_command('wave_fan', system='burgers', uminus='0', s='0.5', out=str(self.out), stdout=out)
        self.assertIn('wave_fan.json', out.getvalue())
        with self.assertRaises(CommandError) as ctx:
            call_command('wave_fan', system='burgers', s='0.5', out=str(self.out), stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, EXIT_USAGE)
