"""
SERVICES.PY - One runner per command-line analysis
Features:
- Builds the catalog system named in the config
- Calls the owning app's operation with the configured tolerances
- Returns a RunResult (JSON payload plus CSV frames) for the report writer

Runners never touch the filesystem or argv; the management commands do.
"""

import logging
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from django.utils.translation import gettext_lazy as _

from core.exceptions import InvalidInputError, UsageError
from manifolds.models import ManifoldChart
from manifolds.services import center_chart, stable_chart
from profiles.services import (
    boundary_layer_connect,
    build_tw_center_chart,
    build_tw_system,
    profile_summary,
    solve_traveling_wave,
)
from riemann.services import classical_scalar_solution, classify_segments, sample_solution, wave_fan_fixed_point, \
    wave_fan_sweep
from singular.services import check_hypotheses, integrate_singular, singular_us_chart, slow_fast_decomposition
from spectral.services import classify_spectrum, linear_flow

from .models import ProblemConfig, RunResult
from .systems import REGISTRY, describe, get_entry, system_names
from .utils import parse_vector

logger = logging.getLogger(__name__)


# ---------------- option helpers ----------------

def _vector(config: ProblemConfig, key: str, required: bool = True) -> Optional[List[float]]:
    value = config.get(key)
    if value is None:
        if required:
            raise UsageError(_('--{} is required for {}').format(key.replace('_', '-'), config.command))
        return None
    return parse_vector(value)


def _float(config: ProblemConfig, key: str, default: Optional[float] = None) -> Optional[float]:
    value = config.get(key, default)
    return None if value is None else float(value)


def _int(config: ProblemConfig, key: str, default: Optional[int] = None) -> Optional[int]:
    value = config.get(key, default)
    return None if value is None else int(value)


def _build(config: ProblemConfig):
    entry = get_entry(config.system)
    return entry, entry.build(**config.params)


def _chart_options(config: ProblemConfig) -> Dict:
    options = {
        'grid_n': _int(config, 'grid_n'),
        'base_n': _int(config, 'base_n'),
        'fp_tol': _float(config, 'fp_tol'),
        'max_iter': _int(config, 'max_iter'),
        'jobs': _int(config, 'jobs'),
    }
    return {k: v for k, v in options.items() if v is not None}


def _chart_frame(chart: ManifoldChart) -> Optional[pd.DataFrame]:
    """Tabulated chart values, one row per base grid point"""
    if chart.values is None or not chart.grid_axes:
        return None
    mesh = np.meshgrid(*chart.grid_axes, indexing='ij')
    columns = {f'xi{j + 1}': axis.ravel() for j, axis in enumerate(mesh)}
    flat = chart.values.reshape(-1, chart.dimension)
    for j in range(chart.dimension):
        columns[f'v{j + 1}'] = flat[:, j]
    return pd.DataFrame(columns)


def _flow_frame(A: np.ndarray, x0: List[float], t_end: float, n: int) -> pd.DataFrame:
    times = np.linspace(0.0, t_end, n)
    states = linear_flow(A, times, np.asarray(x0, dtype=float))
    columns = {'t': times}
    for j in range(states.shape[1]):
        columns[f'x{j + 1}'] = states[:, j]
    return pd.DataFrame(columns)


def _field_of(entry, system, config: ProblemConfig):
    """Smooth field a chart command works on: the linear field, or dV/dtau = F"""
    if entry.kind == 'linear':
        return system
    if entry.kind == 'singular':
        return system.tau_field()
    raise UsageError(_('{} needs a linear or singular system').format(config.command))


# ================ SPECTRAL AND CHARTS ================

def run_spectrum(config: ProblemConfig) -> RunResult:
    entry, system = _build(config)
    if entry.kind == 'linear':
        A = system.linearization()
    elif entry.kind == 'singular':
        A = system.jacobian(np.zeros(system.dimension))
    else:
        A = system.jacobian(_vector(config, 'u'))
    split = classify_spectrum(A, tol_zero=_float(config, 'tol_zero'))
    payload = {'system': entry.name, 'matrix': A, 'split': split.to_dict()}
    frames = {}
    x0 = _vector(config, 'x0', required=False)
    if x0 is not None:
        frames['flow'] = _flow_frame(A, x0, _float(config, 't_end', 1.0), _int(config, 'n', 101))
    return RunResult('spectrum', payload, frames, message=f'dims (s, u, c) = {split.dims}')


def run_center_chart(config: ProblemConfig) -> RunResult:
    entry, system = _build(config)
    delta = _float(config, 'delta', 0.1)
    if entry.kind == 'flux':
        tw = build_tw_system(system, _vector(config, 'u'), _int(config, 'family', 1))
        chart = build_tw_center_chart(tw, **dict(_chart_options(config), delta=delta))
    else:
        chart = center_chart(_field_of(entry, system, config), delta=delta, **_chart_options(config))
    frame = _chart_frame(chart)
    return RunResult('center_chart', {'system': entry.name, 'chart': chart.to_dict()},
                     {'grid': frame} if frame is not None else {},
                     message=f'center chart of dimension {chart.base_dimension}')


def run_stable_chart(config: ProblemConfig) -> RunResult:
    entry, system = _build(config)
    chart = stable_chart(_field_of(entry, system, config), delta=_float(config, 'delta', 0.1),
                         **_chart_options(config))
    frame = _chart_frame(chart)
    return RunResult('stable_chart', {'system': entry.name, 'chart': chart.to_dict()},
                     {'grid': frame} if frame is not None else {},
                     message=f'stable chart of dimension {chart.base_dimension}')


# ================ PROFILES ================

def _rankine_hugoniot_speed(flux, u_minus: np.ndarray, u_plus: np.ndarray) -> float:
    if flux.N != 1:
        raise UsageError(_('--sigma is required for systems'))
    if u_plus[0] == u_minus[0]:
        return float(flux.jacobian(u_minus)[0, 0])
    return float((flux(u_plus)[0] - flux(u_minus)[0]) / (u_plus[0] - u_minus[0]))


def run_traveling_wave(config: ProblemConfig) -> RunResult:
    entry, flux = _build(config)
    u_minus = np.array(_vector(config, 'uminus'))
    u_plus = np.array(_vector(config, 'uplus'))
    sigma = _float(config, 'sigma')
    if sigma is None:
        sigma = _rankine_hugoniot_speed(flux, u_minus, u_plus)
    profile = solve_traveling_wave(flux, u_minus, u_plus, sigma, horizon=_float(config, 'horizon'),
                                   tol=_float(config, 'tol'), delta=_float(config, 'delta', 0.1))
    payload = dict(profile_summary(profile), system=entry.name)
    return RunResult('traveling_wave', payload, {'profile': profile.to_frame()},
                     message=f'profile with sigma = {profile.sigma:.10g}')


def run_boundary_layer(config: ProblemConfig) -> RunResult:
    entry, flux = _build(config)
    profile = boundary_layer_connect(flux, _vector(config, 'u0'), _vector(config, 'ub'),
                                     horizon=_float(config, 'horizon'), tol=_float(config, 'tol'),
                                     delta=_float(config, 'delta', 0.1))
    payload = dict(profile_summary(profile), system=entry.name)
    return RunResult('boundary_layer', payload, {'profile': profile.to_frame()},
                     message=f'boundary layer over {profile.y.size} points')


# ================ RIEMANN ================

def _riemann_options(config: ProblemConfig) -> Dict:
    options = {'grid_n': _int(config, 'grid_n'), 'fp_tol': _float(config, 'fp_tol'),
               'max_iter': _int(config, 'max_iter')}
    return {k: v for k, v in options.items() if v is not None}


def run_wave_fan(config: ProblemConfig) -> RunResult:
    """Fan of one family for each strength in --s, written in input order"""
    entry, flux = _build(config)
    u_minus = _vector(config, 'uminus')
    family = _int(config, 'family', 1)
    strengths = _vector(config, 's')
    curves = wave_fan_sweep(flux, u_minus, family, strengths, jobs=_int(config, 'jobs', 1),
                            **_riemann_options(config))
    fans, frames = [], {}
    for k, (s, curve) in enumerate(zip(strengths, curves)):
        fan = classify_segments(curve)
        fans.append(dict(fan.to_dict(), s=s))
        frames[f'curve{k + 1}' if len(strengths) > 1 else 'curve'] = curve.to_frame()
    payload = {'system': entry.name, 'family': family, 'u_minus': u_minus, 'fans': fans}
    counts = ', '.join(str(len(fan['segments'])) for fan in fans)
    return RunResult('wave_fan', payload, frames, message=f'segments per fan: {counts}')


def _sample_points(config: ProblemConfig) -> np.ndarray:
    x = _vector(config, 'x', required=False)
    if x is not None:
        return np.array(x)
    x_min, x_max = _float(config, 'x_min', -1.0), _float(config, 'x_max', 1.0)
    return np.linspace(x_min, x_max, _int(config, 'n', 201))


def run_riemann_sample(config: ProblemConfig) -> RunResult:
    entry, flux = _build(config)
    u_minus = _vector(config, 'uminus')
    family = _int(config, 'family', 1)
    s = _float(config, 's')
    if s is None:
        raise UsageError(_('--s is required for riemann-sample'))
    t = _float(config, 't', 1.0)
    curve = wave_fan_fixed_point(flux, u_minus, family, s, **_riemann_options(config))
    fan = classify_segments(curve)
    xs = _sample_points(config)
    states = np.array([sample_solution(fan, t, x) for x in xs])
    columns = {'x': xs}
    for j in range(flux.N):
        columns[f'u{j + 1}'] = states[:, j]
    payload = dict(fan.to_dict(), system=entry.name, s=s, t=t)
    if config.get('classical'):
        if flux.N != 1:
            raise UsageError(_('--classical is only defined for scalar fluxes'))
        f = lambda u: float(flux(np.array([u]))[0])
        fprime = lambda u: float(flux.jacobian(np.array([u]))[0, 0])
        classical = np.array([classical_scalar_solution(f, fprime, u_minus[0], fan.right_state[0], t, x) for x in xs])
        columns['classical'] = classical
        payload['classical_max_difference'] = float(np.max(np.abs(classical - states[:, 0])))
    return RunResult('riemann_sample', payload, {'solution': pd.DataFrame(columns)},
                     message=f'{xs.size} samples at t = {t:g}')


# ================ SINGULAR ================

def _hypothesis_options(config: ProblemConfig) -> Dict:
    options = {
        'radius': _float(config, 'radius'),
        'n_samples': _int(config, 'n_samples'),
        'tol': _float(config, 'tol'),
        'seed': _int(config, 'seed'),
        'angle_tol': _float(config, 'angle_tol'),
        'chart_delta': _float(config, 'chart_delta'),
        'jobs': _int(config, 'jobs'),
        'grid_n': _int(config, 'grid_n'),
    }
    return {k: v for k, v in options.items() if v is not None}


def run_hypotheses(config: ProblemConfig) -> RunResult:
    entry, system = _build(config)
    report = check_hypotheses(system, **_hypothesis_options(config))
    payload = dict(report.to_dict(), system=entry.name)
    return RunResult('hypotheses', payload, negative=not report.passed,
                     message='all hypotheses hold' if report.passed else f"failed: {', '.join(report.failed())}")


def run_singular_integrate(config: ProblemConfig) -> RunResult:
    entry, system = _build(config)
    trajectory = integrate_singular(
        system,
        _vector(config, 'v0'),
        _float(config, 't_end', 1.0),
        guard_tol=_float(config, 'guard_tol'),
        step_tol=_float(config, 'step_tol'),
        bisect_tol=_float(config, 'bisect_tol'),
    )
    payload = dict(trajectory.to_dict(), system=entry.name)
    message = f'reached t = {trajectory.t_final:.10g}'
    if trajectory.hit is not None:
        message = f'singular set reached, t* = {trajectory.hit.t_star}'
    return RunResult('singular_integrate', payload, {'trajectory': trajectory.to_frame()}, message=message)


def run_slow_fast(config: ProblemConfig) -> RunResult:
    entry, system = _build(config)
    options = _hypothesis_options(config)
    grid = {'grid_n': options['grid_n']} if 'grid_n' in options else {}
    report = check_hypotheses(system, **options)
    delta = _float(config, 'delta')
    if delta is None and report.chart is not None:
        delta = report.chart.delta
    chart = singular_us_chart(system, delta=delta, report=report, model=config.get('model', 'taylor'), **grid)
    parts = slow_fast_decomposition(
        system, chart,
        point=_vector(config, 'point'),
        check_limit=bool(config.get('check_limit')),
        horizon=_float(config, 'horizon', 20.0),
        limit_tol=_float(config, 'limit_tol', 1e-8),
    )
    payload = dict(parts.to_dict(), system=entry.name, chart=chart.to_dict())
    return RunResult('slow_fast', payload, {'decomposition': parts.to_frame()},
                     message=f"sup |V_p| = {parts.norms()['V_p']:.3e}")


# ================ CATALOG ================

def run_catalog(config: ProblemConfig) -> RunResult:
    name = config.get('describe')
    if name:
        return RunResult('catalog', describe(name), message=str(REGISTRY[name].summary))
    systems = [{'name': n, 'kind': REGISTRY[n].kind, 'summary': REGISTRY[n].summary} for n in system_names()]
    return RunResult('catalog', {'systems': systems}, message=f'{len(systems)} systems')


RUNNERS: Dict[str, Callable[[ProblemConfig], RunResult]] = {
    'spectrum': run_spectrum,
    'center_chart': run_center_chart,
    'stable_chart': run_stable_chart,
    'traveling_wave': run_traveling_wave,
    'boundary_layer': run_boundary_layer,
    'wave_fan': run_wave_fan,
    'riemann_sample': run_riemann_sample,
    'hypotheses': run_hypotheses,
    'singular_integrate': run_singular_integrate,
    'slow_fast': run_slow_fast,
    'catalog': run_catalog,
}


def run(config: ProblemConfig) -> RunResult:
    try:
        runner = RUNNERS[config.command]
    except KeyError:
        raise InvalidInputError(_('unknown command {!r}').format(config.command))
    logger.debug(f"Running {config.command} on {config.system or 'catalog'}")
    return runner(config)
