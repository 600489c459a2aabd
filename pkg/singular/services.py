"""
SERVICES.PY - Singular systems dV/dt = F(V) / zeta(V)
Features:
- Hypothesis checker (regularity, transversality, equilibria on S)
- Continuation of the curve of equilibria through the origin
- Guarded integration up to the singular set
- Time rescaling between t and tau
- Manifold of the slow dynamics and its reduced nonsingular field
- Singular center and uniformly stable charts, slow/fast decomposition

Everything singular is done on the regular form dV/dtau = F(V) with
dt/dtau = zeta(V); dividing by zeta only happens on the slow manifold,
where F vanishes together with zeta.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize
from django.utils.translation import gettext_lazy as _
from scipy.integrate import cumulative_simpson, cumulative_trapezoid
from scipy.interpolate import CubicSpline

from core.exceptions import (
    DecompositionError,
    HypothesisFailure,
    InvalidInputError,
    NoContractionError,
    NoConvergenceError,
    NumericFailureError,
    SingularReductionError,
)
from core.utils import as_vector, fd_step, get_setting, gradient_fd, require_positive, unit
from manifolds.models import EquilibriumCurve, ManifoldChart, SmoothField
from manifolds.services import center_chart, slaving_chart, track_limit, uniformly_stable_chart
from manifolds.utils import fit_decay_rate
from odeint.models import Event
from odeint.services import dense_eval, integrate
from spectral.models import SpectralSplit
from spectral.services import classify_spectrum

from .models import (
    HypothesisReport,
    HypothesisResult,
    SingularHit,
    SingularSystem,
    SingularTrajectory,
    SlowFastDecomposition,
    SlowManifold,
    Trajectory,
)

logger = logging.getLogger(__name__)

# relative agreement of finite-difference Jacobians at steps h and 2h
REGULARITY_TOL = 1e-6
# sup |F| on zeta = 0 points of the reduced slow manifold
REDUCTION_TOL = 1e-6
# zero threshold, relative, for eigenvalues of the reduced linearization
REDUCED_TOL_ZERO = 1e-4


def _setting(value, key):
    return get_setting('SINGULAR', key) if value is None else value


def _map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            return list(executor.map(fn, items))
    return [fn(item) for item in items]


def sample_cloud(dimension: int, radius: float, n_samples: int, seed: int = 0) -> np.ndarray:
    """Uniform samples of the ball |V| <= radius, shape (n_samples, dimension)"""
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((n_samples, dimension))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    radii = radius * rng.uniform(0.0, 1.0, n_samples) ** (1.0 / dimension)
    return directions * radii[:, None]


def _jacobian_step(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float) -> np.ndarray:
    f0 = np.atleast_1d(fn(x))
    jac = np.empty((f0.shape[0], x.shape[0]))
    for j in range(x.shape[0]):
        e = np.zeros_like(x)
        e[j] = h
        jac[:, j] = (np.atleast_1d(fn(x + e)) - np.atleast_1d(fn(x - e))) / (2.0 * h)
    return jac


def _result(name: str, passed: bool, residual: float, tol: float, point=None, value=None, note: str = ''):
    witness = None
    if point is not None:
        witness = {'point': np.asarray(point, dtype=float).tolist(),
                   'value': value.tolist() if isinstance(value, np.ndarray) else value}
    return HypothesisResult(name, 'pass' if passed else 'fail', float(residual), float(tol), witness, note)


# ================ EQUILIBRIUM CURVE ================

def find_equilibrium_curve(
    sys: SingularSystem,
    radius: Optional[float] = None,
    step: Optional[float] = None,
    n_steps: int = 100,
    tol: float = 1e-10,
) -> EquilibriumCurve:
    """
    Pseudo-arclength continuation of F(V) = 0 from the origin in both
    directions. The initial tangent is grad zeta(0) projected onto the
    kernel of DF(0), so among several equilibrium branches the one crossing
    S is followed.
    """
    radius = require_positive(_setting(radius, 'radius'), 'radius')
    h = require_positive(step if step is not None else 1e-2 * radius, 'step')
    d = sys.dimension
    kernel = scipy.linalg.null_space(sys.jacobian(np.zeros(d)), rcond=1e-8)
    if kernel.shape[1] == 0:
        logger.error(f"Origin is an isolated equilibrium of {sys.name or 'system'}")
        raise NoConvergenceError(_('DF(0) is invertible; the origin is an isolated equilibrium'))
    g0 = sys.grad_zeta(np.zeros(d))
    tangent = kernel @ (kernel.T @ g0)
    tangent = unit(tangent if np.linalg.norm(tangent) > 1e-12 else kernel[:, 0])

    branches = []
    for sign in (1.0, -1.0):
        V = np.zeros(d)
        t = sign * tangent
        points = []
        for n in range(n_steps):
            predicted = V + h * t
            W = predicted.copy()
            for _it in range(30):
                residual = np.concatenate([sys.F(W), [t @ (W - V) - h]])
                J = np.vstack([sys.jacobian(W), t])
                dW = np.linalg.lstsq(J, -residual, rcond=None)[0]
                W = W + dW
                if np.linalg.norm(dW) <= 1e-13 * (1.0 + np.linalg.norm(W)) and np.linalg.norm(sys.F(W)) <= tol:
                    break
            else:
                logger.error(f"Equilibrium continuation stalled after {n} steps")
                raise NoConvergenceError(
                    _('equilibrium continuation did not converge at step {}').format(n),
                    {'step': n, 'state': W.tolist(), 'residual': float(np.linalg.norm(sys.F(W)))},
                )
            t = unit(W - V)
            V = W
            points.append(W)
        branches.append(points)

    states = np.array(branches[1][::-1] + [np.zeros(d)] + branches[0])
    arclength = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(states, axis=0), axis=1))])
    arclength -= arclength[n_steps]
    spline = CubicSpline(arclength, states, axis=0)
    logger.info(f"Continued equilibria over arclength [{arclength[0]:.4g}, {arclength[-1]:.4g}]")
    return EquilibriumCurve(
        lambda s: spline(s),
        lambda s: spline(s, 1),
        s_range=(float(arclength[0]), float(arclength[-1])),
    )


# ================ HYPOTHESES ================

def _check_regularity(sys: SingularSystem, points: np.ndarray) -> HypothesisResult:
    worst, witness = 0.0, None
    for V in points:
        h = fd_step(V)
        J1 = _jacobian_step(sys.F, V, h)
        J2 = _jacobian_step(sys.F, V, 2.0 * h)
        scale = 1.0 + np.linalg.norm(J1)
        r = float(np.linalg.norm(J1 - J2)) / scale
        if sys.has_jacobian:
            r = max(r, float(np.linalg.norm(sys.jacobian(V) - J1)) / scale)
        if not np.isfinite(r) or r > worst:
            worst, witness = (r if np.isfinite(r) else math.inf), V
    passed = worst <= REGULARITY_TOL
    return _result('H1', passed, worst, REGULARITY_TOL, witness, worst,
                   'finite-difference Jacobians at steps h and 2h')


def _check_center_set(sys: SingularSystem, chart: Optional[ManifoldChart], tol: float, n_points: int,
                      rng: np.random.Generator, jobs: int) -> HypothesisResult:
    """sup |F| over points of the tau center chart with zeta = 0"""
    if chart is None:
        return HypothesisResult('H3', 'pass', 0.0, tol, None, 'center space is trivial')
    k = chart.base_dimension
    direction = chart.base_basis.T @ sys.grad_zeta(np.zeros(sys.dimension))
    if np.linalg.norm(direction) < 1e-12:
        return HypothesisResult('H3', 'untestable', None, tol, None, 'center space is tangent to S at 0')
    direction = direction / np.linalg.norm(direction)
    reach = 0.999 * chart.delta

    def zeta_on_chart(xi):
        return sys.zeta(chart.evaluate(xi, exact=True))

    def root(xi0):
        b = float(xi0 @ direction)
        disc = b * b - float(xi0 @ xi0) + reach ** 2
        lo, hi = -b - math.sqrt(disc), -b + math.sqrt(disc)
        g = lambda s: zeta_on_chart(xi0 + s * direction)
        g_lo, g_hi = g(lo), g(hi)
        if g_lo * g_hi > 0:
            return None
        s = scipy.optimize.brentq(g, lo, hi, xtol=1e-15, rtol=8.9e-16)
        return chart.evaluate(xi0 + s * direction, exact=True)

    starts = sample_cloud(k, chart.delta / 2.0, n_points, seed=int(rng.integers(2 ** 31)))
    found = [V for V in _map(root, list(starts), jobs) if V is not None]
    if not found:
        return HypothesisResult('H3', 'untestable', None, tol, None, 'no chart point on S was found')
    norms = [float(np.linalg.norm(sys.F(V))) for V in found]
    j = int(np.argmax(norms))
    return _result('H3', norms[j] <= tol, norms[j], tol, found[j], sys.F(found[j]),
                   f'{len(found)} chart points on S')


def _check_curve(sys: SingularSystem, curve: Optional[EquilibriumCurve], radius: float, tol: float,
                 angle_tol: float, g0: np.ndarray):
    if curve is None:
        try:
            curve = find_equilibrium_curve(sys, radius)
        except NoConvergenceError as e:
            logger.warning(f"H4 untestable: {e.message}")
            return HypothesisResult('H4', 'untestable', None, angle_tol, None, e.message), None
    else:
        try:
            curve.check(sys.F, n=11, tol=max(tol, 1e-10))
        except InvalidInputError as e:
            s = e.details.get('s', 0.0)
            return _result('H4', False, e.details.get('residual', math.inf), tol, curve.at(s),
                           e.details.get('residual'), 'supplied curve is not made of equilibria'), curve
    if np.linalg.norm(g0) == 0.0:
        return HypothesisResult('H4', 'untestable', None, angle_tol, None, 'grad zeta(0) vanishes'), curve
    t = curve.tangent_at(0.0)
    angle = math.asin(min(1.0, abs(float(t @ g0)) / float(np.linalg.norm(g0))))
    return _result('H4', angle > angle_tol, angle, angle_tol, curve.at(0.0), angle,
                   'angle between the curve of equilibria and S at 0'), curve


def _check_flux_through_S(sys: SingularSystem, cloud: np.ndarray, tol: float) -> HypothesisResult:
    """sup over S of |grad zeta . F|"""
    worst, witness, value = -1.0, None, 0.0
    for V in cloud:
        try:
            P = sys.project_to_singular_set(V)
        except InvalidInputError:
            continue
        flux = float(sys.grad_zeta(P) @ sys.F(P))
        if abs(flux) > worst:
            worst, witness, value = abs(flux), P, flux
    if witness is None:
        return HypothesisResult('H5', 'untestable', None, tol, None, 'no sample could be moved onto S')
    return _result('H5', worst <= tol, worst, tol, witness, value, 'grad zeta . F on S')


def _check_G_on_equilibria(sys: SingularSystem, cloud: np.ndarray, tol: float, radius: float,
                           jobs: int) -> HypothesisResult:
    """sup |G| over equilibria lying in S"""
    d = sys.dimension

    def settle(V0):
        res = scipy.optimize.least_squares(
            lambda V: np.concatenate([sys.F(V), [sys.zeta(V)]]), V0,
            method='lm', xtol=1e-15, ftol=1e-15, gtol=1e-15,
        )
        V = res.x
        if np.linalg.norm(sys.F(V)) <= 1e-12 and abs(sys.zeta(V)) <= 1e-12 and np.linalg.norm(V) <= 2.0 * radius:
            return V
        return None

    equilibria = [np.zeros(d)] + [V for V in _map(settle, list(cloud), jobs) if V is not None]
    values = [sys.G(V) for V in equilibria]
    j = int(np.argmax(np.abs(values)))
    return _result('H6', abs(values[j]) <= tol, abs(values[j]), tol, equilibria[j], float(values[j]),
                   f'{len(equilibria)} equilibria on S')


def check_hypotheses(
    sys: SingularSystem,
    radius: Optional[float] = None,
    n_samples: Optional[int] = None,
    tol: Optional[float] = None,
    seed: Optional[int] = None,
    angle_tol: Optional[float] = None,
    chart_delta: Optional[float] = None,
    curve: Optional[EquilibriumCurve] = None,
    chart_points: int = 8,
    equilibrium_starts: int = 40,
    jobs: int = 1,
    **chart_options,
) -> HypothesisReport:
    """
    Probe H1-H6 on a cloud of ``n_samples`` points in the ball of the given
    radius. H3 uses a center chart of dV/dtau = F built here and kept on
    the report for slow_manifold. Without a supplied curve, H4 runs the
    equilibrium continuation; if that fails H4 is untestable, not failed.
    """
    radius = require_positive(_setting(radius, 'radius'), 'radius')
    n_samples = int(_setting(n_samples, 'n_samples'))
    tol = require_positive(_setting(tol, 'hypothesis_tol'), 'tol')
    seed = int(_setting(seed, 'seed'))
    angle_tol = require_positive(_setting(angle_tol, 'angle_tol'), 'angle_tol')
    chart_delta = require_positive(_setting(chart_delta, 'chart_delta'), 'chart_delta')
    if n_samples < 1:
        raise InvalidInputError(_('n_samples must be positive, got {}').format(n_samples))
    rng = np.random.default_rng(seed)
    d = sys.dimension
    cloud = sample_cloud(d, radius, n_samples, seed=seed)
    results: Dict[str, HypothesisResult] = {}

    results['H1'] = _check_regularity(sys, cloud[:min(n_samples, 20)])

    g0 = sys.grad_zeta(np.zeros(d))
    results['H2'] = _result('H2', np.linalg.norm(g0) > tol, float(np.linalg.norm(g0)), tol,
                            np.zeros(d), g0, '|grad zeta(0)|')

    chart = None
    try:
        chart = center_chart(sys.tau_field(), **dict(chart_options, delta=chart_delta, base_n=0, jobs=jobs))
        results['H3'] = _check_center_set(sys, chart, tol, chart_points, rng, jobs)
    except NoContractionError as e:
        logger.warning(f"H3 untestable: {e.message}")
        results['H3'] = HypothesisResult('H3', 'untestable', None, tol, None, e.message)
    except InvalidInputError as e:
        if 'trivial' not in e.message:
            raise
        results['H3'] = _check_center_set(sys, None, tol, chart_points, rng, jobs)

    results['H4'], found_curve = _check_curve(sys, curve or sys.equilibria, radius, tol, angle_tol, g0)
    results['H5'] = _check_flux_through_S(sys, cloud, tol)
    results['H6'] = _check_G_on_equilibria(sys, cloud[:equilibrium_starts], tol, radius, jobs)

    report = HypothesisReport(results, {'count': n_samples, 'radius': radius, 'seed': seed},
                              chart=chart, curve=found_curve)
    for name, result in results.items():
        if result.status == 'untestable':
            logger.warning(f"{name} untestable for {sys.name or 'system'}: {result.note}")
    logger.info(
        f"Hypotheses for {sys.name or 'system'}: "
        + ', '.join(f'{name} {result.status}' for name, result in results.items())
    )
    return report


# ================ INTEGRATION ================

def integrate_singular(
    sys: SingularSystem,
    V0: Sequence[float],
    t_end: float,
    guard_tol: Optional[float] = None,
    step_tol: Optional[float] = None,
    bisect_tol: Optional[float] = None,
    max_doublings: int = 40,
) -> SingularTrajectory:
    """
    Integrate dV/dt = F/zeta from V0 up to t_end, or until |zeta| falls
    below guard_tol * (1 + |V|).

    The work is done in tau on the augmented state (V, t) with
    d(V, t)/dtau = sign zeta(V0) * (F, zeta), which stays smooth through S.
    On a guard hit the tau flow is continued to zeta = 0 and the crossing
    refined by bisection on the dense output, giving the hit time t*.
    """
    d = sys.dimension
    V0 = as_vector(V0, d, 'V0')
    t_end = require_positive(t_end, 't_end')
    guard = require_positive(_setting(guard_tol, 'guard_tol'), 'guard_tol')
    rtol = require_positive(_setting(step_tol, 'step_tol'), 'step_tol')
    bisect_tol = require_positive(_setting(bisect_tol, 'bisect_tol'), 'bisect_tol')
    z0 = sys.zeta(V0)
    if abs(z0) <= guard * (1.0 + np.linalg.norm(V0)):
        raise InvalidInputError(_('zeta(V0) = {:.3e} is already inside the guard band').format(z0), {'zeta': z0})
    sign = 1.0 if z0 > 0 else -1.0

    def augmented(_tau, y):
        V = y[:d]
        return sign * np.concatenate([sys.F(V), [sys.zeta(V)]])

    guard_event = Event(lambda _tau, y: sign * sys.zeta(y[:d]) - guard * (1.0 + np.linalg.norm(y[:d])),
                        terminal=True, direction=-1, name='singular')
    end_event = Event(lambda _tau, y: y[d] - t_end, terminal=True, direction=1, name='end')

    y = np.concatenate([V0, [0.0]])
    tau0 = 0.0
    span = 2.0 * t_end / abs(z0)
    taus: List[np.ndarray] = []
    states: List[np.ndarray] = []
    result = None
    for attempt in range(max_doublings):
        result = integrate(augmented, y, (tau0, tau0 + span), rtol=rtol, atol=1e-2 * rtol,
                           events=[guard_event, end_event])
        skip = 1 if taus else 0
        taus.append(result.t[skip:])
        states.append(result.y[skip:])
        if result.terminal_event is not None:
            break
        tau0, y = result.t_final, result.y_final
        span *= 2.0
        logger.debug(f"Extending tau span to {span:.4g} (t = {y[d]:.6g})")
    else:
        logger.error(f"Neither t_end nor the singular set reached from {V0.tolist()}")
        raise NoConvergenceError(
            _('neither t_end = {} nor the singular set was reached').format(t_end),
            {'t': float(y[d]), 'state': y[:d].tolist()},
        )

    tau = np.concatenate(taus)
    Y = np.concatenate(states)
    V, t = Y[:, :d], Y[:, d]
    event = result.terminal_event
    if event.name == 'end':
        return SingularTrajectory(t, tau, V, 'end')

    tail = V[-11:]
    speeds = np.linalg.norm(sys.F_many(tail), axis=1) / np.abs(sys.zeta_many(tail))
    growth = float(speeds[-1] / speeds[0]) if speeds[0] > 0 else math.inf
    t_star, tau_star, V_star = _locate_hit(sys, augmented, event.y, event.t, sign, max(span, 1.0), rtol, bisect_tol)
    hit = SingularHit(t_star, tau_star, V_star, float(event.y[d]), speeds, growth)
    logger.info(
        f"Singular set reached: guard at t={hit.t_guard:.10g}, t*={hit.t_star}, |dV/dt| grew {growth:.3g}x"
    )
    return SingularTrajectory(t, tau, V, 'singular', hit)


def _locate_hit(sys, augmented, y_guard, tau_guard, sign, span, rtol, bisect_tol):
    """(t*, tau*, V*) where zeta crosses zero, or (None, None, V_guard) if it never does"""
    d = sys.dimension
    crossing = Event(lambda _tau, y: sign * sys.zeta(y[:d]), terminal=True, direction=-1, name='hit')
    result = integrate(augmented, y_guard, (tau_guard, tau_guard + span), rtol=rtol, atol=1e-2 * rtol,
                       events=[crossing])
    if result.terminal_event is None:
        logger.warning('zeta approaches zero without crossing; no hit time')
        return None, None, y_guard[:d].copy()
    lo, hi = result.terminal_event.bracket
    g = lambda s: sign * sys.zeta(dense_eval(result, s)[:d])
    s_star = result.terminal_event.t
    if hi > lo and g(lo) * g(hi) < 0:
        s_star = scipy.optimize.bisect(g, lo, hi, xtol=bisect_tol)
    y_star = dense_eval(result, s_star)
    return float(y_star[d]), float(s_star), y_star[:d]


# ================ TIME RESCALING ================

def _cumulative(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    if grid.size < 3:
        return cumulative_trapezoid(values, x=grid, initial=0.0)
    return cumulative_simpson(values, x=grid, initial=0.0)


def _checked_zeta(sys: SingularSystem, states: np.ndarray, guard_tol: Optional[float]) -> np.ndarray:
    guard = require_positive(_setting(guard_tol, 'guard_tol'), 'guard_tol')
    z = sys.zeta_many(states)
    if np.any(z == 0.0) or np.any(np.sign(z) != np.sign(z[0])):
        k = int(np.flatnonzero(np.sign(z) != np.sign(z[0]))[0]) if np.any(np.sign(z) != np.sign(z[0])) else 0
        logger.error('zeta changes sign along the trajectory')
        raise InvalidInputError(
            _('zeta changes sign along the trajectory; t(tau) is not a diffeomorphism'),
            {'index': k, 'state': states[k].tolist()},
        )
    if np.min(np.abs(z)) < 10.0 * guard:
        raise InvalidInputError(
            _('zeta comes within {:.3e} of zero; rescaling needs at least {:.3e}').format(
                float(np.min(np.abs(z))), 10.0 * guard),
            {'min_zeta': float(np.min(np.abs(z)))},
        )
    return z


def _assert_monotone(values: np.ndarray, name: str):
    steps = np.diff(values)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise NumericFailureError(_('{} is not strictly monotone after rescaling').format(name))


def rescale_time(sys: SingularSystem, trajectory: Trajectory, guard_tol: Optional[float] = None) -> Trajectory:
    """t(tau) from dt/dtau = zeta(V(tau)), t = 0 at the first grid point"""
    if trajectory.variable != 'tau':
        raise InvalidInputError(_('rescale_time expects a tau trajectory'))
    z = _checked_zeta(sys, trajectory.states, guard_tol)
    t = _cumulative(z, trajectory.grid)
    _assert_monotone(t, 't(tau)')
    return Trajectory('t', t, trajectory.states.copy(), trajectory.grid.copy())


def inverse_rescale(sys: SingularSystem, trajectory: Trajectory, guard_tol: Optional[float] = None) -> Trajectory:
    """tau(t) from dtau/dt = 1 / zeta(V(t)), starting at the stored tau if any"""
    if trajectory.variable != 't':
        raise InvalidInputError(_('inverse_rescale expects a t trajectory'))
    z = _checked_zeta(sys, trajectory.states, guard_tol)
    tau = _cumulative(1.0 / z, trajectory.grid)
    if trajectory.other is not None:
        tau = tau + trajectory.other[0]
    _assert_monotone(tau, 'tau(t)')
    return Trajectory('tau', tau, trajectory.states.copy(), trajectory.grid.copy())


# ================ SLOW MANIFOLD ================

def _taylor_lift(chart: ManifoldChart):
    """Quadratic model of the chart from central differences of its solver at step delta/4"""
    k = chart.base_dimension
    h = chart.delta / 4.0
    phi = lambda xi: chart.evaluate(xi, exact=True)
    eye = np.eye(k)
    phi0 = phi(np.zeros(k))
    plus = [phi(h * eye[j]) for j in range(k)]
    minus = [phi(-h * eye[j]) for j in range(k)]
    D = np.column_stack([(plus[j] - minus[j]) / (2.0 * h) for j in range(k)]) if k else np.zeros((chart.dimension, 0))
    H = np.zeros((chart.dimension, k, k))
    for j in range(k):
        H[:, j, j] = (plus[j] - 2.0 * phi0 + minus[j]) / h ** 2
        for l in range(j + 1, k):
            mixed = (phi(h * (eye[j] + eye[l])) - phi(h * (eye[j] - eye[l]))
                     - phi(h * (eye[l] - eye[j])) + phi(-h * (eye[j] + eye[l]))) / (4.0 * h ** 2)
            H[:, j, l] = H[:, l, j] = mixed

    def lift_many(X):
        X = np.asarray(X, dtype=float).reshape(k, -1)
        return phi0[:, None] + D @ X + 0.5 * np.einsum('ijl,jn,ln->in', H, X, X)

    return lift_many


def _exact_lift(chart: ManifoldChart):
    def lift_many(X):
        X = np.asarray(X, dtype=float).reshape(chart.base_dimension, -1)
        return np.column_stack([chart.evaluate(x, exact=True) for x in X.T])
    return lift_many


def _reduced_field(sys: SingularSystem, chart: ManifoldChart, lift_many, check_tol: float) -> SmoothField:
    k = chart.base_dimension
    left = chart.base_left
    g_tol = sys.g_tol

    def lift(x):
        return lift_many(np.asarray(x, dtype=float)[:, None])[:, 0]

    def raw(x):
        V = lift(x)
        return left @ sys.F(V) / sys.zeta(V)

    def extended(x):
        grad = gradient_fd(lambda y: sys.zeta(lift(y)), x)
        norm = float(np.linalg.norm(grad))
        if norm == 0.0:
            raise SingularReductionError(
                _('zeta is stationary on the slow manifold at {}').format(x.tolist()), {'xi': x.tolist()})
        n = grad / norm
        h = max(10.0 * g_tol / norm, 1e-5)
        side = 1.0 if sys.zeta(lift(x)) >= 0 else -1.0
        samples = [raw(x + side * j * h * n) for j in (1, 2, 3)]
        return 3.0 * samples[0] - 3.0 * samples[1] + samples[2]

    def value(X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = X.reshape(k, -1)
        V = lift_many(X)
        FV = sys.F_many(V.T).T
        z = sys.zeta_many(V.T)
        out = np.empty((k, X.shape[1]))
        regular = np.abs(z) > g_tol
        out[:, regular] = (left @ FV[:, regular]) / z[regular]
        for j in np.flatnonzero(~regular):
            out[:, j] = extended(X[:, j])
        return out[:, 0] if single else out

    try:
        return SmoothField(k, value, name=f'{sys.name} (slow)', check_tol=check_tol, vectorized=True)
    except InvalidInputError as e:
        raise SingularReductionError(_('reduced field does not vanish at the origin'), e.details)


def _onto_zero_set(fn: Callable[[np.ndarray], float], x: np.ndarray, max_iter: int = 30) -> Optional[np.ndarray]:
    for _it in range(max_iter):
        z = fn(x)
        if abs(z) <= 1e-15:
            return x
        g = gradient_fd(fn, x)
        gg = float(g @ g)
        if gg == 0.0:
            return None
        x = x - z * g / gg
    return x if abs(fn(x)) <= 1e-13 else None


def slow_manifold(
    sys: SingularSystem,
    delta: Optional[float] = None,
    report: Optional[HypothesisReport] = None,
    model: str = 'taylor',
    tol: float = REDUCTION_TOL,
    n_check: int = 50,
    seed: Optional[int] = None,
    **chart_options,
) -> SlowManifold:
    """
    Manifold of the slow dynamics: a center chart of dV/dtau = F at the
    origin, and the nonsingular field left_c F(phi(xi)) / zeta(phi(xi)) on
    its base coordinates.

    ``model='taylor'`` replaces the chart by its quadratic model, so the
    reduced field is cheap to evaluate; ``'exact'`` solves the chart fixed
    point at every evaluation. The reduced field is checked finite on
    ``n_check`` samples, half of them on zeta = 0, where |F| must also stay
    below ``tol``.
    """
    if report is None:
        report = check_hypotheses(sys, chart_delta=delta, **chart_options)
    if not report.passed:
        logger.error(f"Hypotheses {', '.join(report.failed())} fail for {sys.name or 'system'}")
        raise HypothesisFailure(
            _('hypotheses {} fail; no manifold of the slow dynamics').format(', '.join(report.failed())), report)

    delta = require_positive(_setting(delta, 'chart_delta'), 'delta')
    chart = report.chart
    if chart is None or chart.delta != delta:
        chart = center_chart(sys.tau_field(), **dict(chart_options, delta=delta, base_n=0))

    if model == 'taylor':
        lift_many = _taylor_lift(chart)
    elif model == 'exact':
        lift_many = _exact_lift(chart)
    else:
        raise InvalidInputError(_('unknown slow-manifold model {!r}').format(model))

    field = _reduced_field(sys, chart, lift_many, check_tol=max(1e-10, sys.g_tol * 1e-2))
    k = chart.base_dimension
    lift = lambda xi: lift_many(np.asarray(xi, dtype=float)[:, None])[:, 0]

    rng = np.random.default_rng(int(_setting(seed, 'seed')))
    samples = list(sample_cloud(k, delta, n_check, seed=int(rng.integers(2 ** 31))))
    zeta_on_chart = lambda x: sys.zeta(lift(x))
    on_S = []
    for j in range(0, len(samples), 2):
        x = _onto_zero_set(zeta_on_chart, samples[j])
        if x is not None:
            samples[j] = x
            on_S.append(x)

    values = field.value_many(np.array(samples))
    bound = 1.0 / sys.g_tol
    magnitudes = np.linalg.norm(values, axis=1)
    if not np.all(np.isfinite(magnitudes)) or np.max(magnitudes) > bound:
        j = int(np.argmax(np.where(np.isfinite(magnitudes), magnitudes, np.inf)))
        logger.error(f"Reduced field unbounded at xi={samples[j].tolist()}")
        raise SingularReductionError(
            _('reduced field is unbounded on the slow manifold (|R| = {:.3e})').format(magnitudes[j]),
            {'xi': samples[j].tolist(), 'value': values[j].tolist()},
        )
    residual = max((float(np.linalg.norm(sys.F(lift(x)))) for x in on_S), default=0.0)
    if residual > tol:
        logger.error(f"F does not vanish where zeta does on the slow manifold ({residual:.3e})")
        raise SingularReductionError(
            _('F is {:.3e} at zeta = 0 on the slow manifold').format(residual), {'residual': residual})

    logger.info(
        f"Slow manifold of dimension {k} for {sys.name or 'system'} ({model} lift): "
        f"sup |R| = {np.max(magnitudes):.3e}, 0/0 residual {residual:.3e}"
    )
    return SlowManifold(chart, field, lift, lift_many, report, model, residual, float(np.max(magnitudes)))


def _reduced_split(slow: SlowManifold) -> SpectralSplit:
    """
    Spectral split of the reduced field at the origin. Its Jacobian comes
    from finite differences through the lift, and nilpotent blocks split
    by the square root of that noise, hence the looser zero threshold.
    """
    A = slow.reduced_field.linearization()
    scale = max(float(np.linalg.norm(A, 2)), 1.0)
    return classify_spectrum(A, tol_zero=REDUCED_TOL_ZERO * scale)


def _embed(inner: ManifoldChart, slow: SlowManifold, kind: str, description: str) -> ManifoldChart:
    """Chart on the slow manifold's base coordinates, mapped into ambient space"""
    outer = slow.chart
    d = outer.dimension
    values = None
    if inner.values is not None:
        flat = inner.values.reshape(-1, inner.dimension)
        values = slow.lift_many(flat.T).T.reshape(inner.values.shape[:-1] + (d,))
    return ManifoldChart(
        kind=kind,
        equilibrium=outer.equilibrium.copy(),
        base_basis=outer.base_basis @ inner.base_basis,
        base_left=inner.base_left @ outer.base_left,
        delta=inner.delta,
        base_description=description,
        grid_axes=list(inner.grid_axes),
        values=values,
        tangency_residual=inner.tangency_residual,
        contraction_ratio=inner.contraction_ratio,
        fp_tol=inner.fp_tol,
        meta=dict(inner.meta, slow_model=slow.model, slow_dimension=slow.base_dimension),
        solver=lambda x: slow.lift(inner.evaluate(x, exact=True)),
        projector=lambda V: inner.project(outer.project(V)),
    )


def singular_center_chart(
    sys: SingularSystem,
    delta: Optional[float] = None,
    slow: Optional[SlowManifold] = None,
    report: Optional[HypothesisReport] = None,
    model: str = 'taylor',
    **chart_options,
) -> ManifoldChart:
    """
    Center chart of the reduced slow field, embedded in ambient coordinates.
    Off S its trajectories never reach zeta = 0.
    """
    chart_options.setdefault('base_n', 0)
    slow = slow or slow_manifold(sys, delta, report, model, **chart_options)
    delta = require_positive(delta or slow.chart.delta, 'delta')
    inner = center_chart(slow.reduced_field, split=_reduced_split(slow), delta=delta, **chart_options)
    chart = _embed(inner, slow, 'center', 'center space of the slow dynamics')
    logger.info(f"Singular center chart of dimension {chart.base_dimension} for {sys.name or 'system'}")
    return chart


def singular_us_chart(
    sys: SingularSystem,
    curve: Optional[EquilibriumCurve] = None,
    delta: Optional[float] = None,
    slow: Optional[SlowManifold] = None,
    report: Optional[HypothesisReport] = None,
    model: str = 'taylor',
    invariance_tol: float = 1e-6,
    **chart_options,
) -> ManifoldChart:
    """
    Slaving chart, for dV/dtau = F, over S0 = the uniformly stable chart of
    the reduced slow field relative to the curve of equilibria. Its base
    coordinates are (S0 coordinates, fast stable coordinates) and
    ``decompose`` splits each trajectory as V_sl + V_f + V_p.
    """
    curve = curve or sys.equilibria
    if curve is None:
        raise InvalidInputError(_('a curve of equilibria is needed for the uniformly stable chart'))
    if report is not None and report.results.get('H4') is not None and report.status('H4') != 'pass':
        raise HypothesisFailure(_('H4 does not hold for the supplied curve'), report)
    chart_options.setdefault('base_n', 0)
    slow = slow or slow_manifold(sys, delta, report, model, **chart_options)
    delta = require_positive(delta or slow.chart.delta, 'delta')

    left = slow.chart.base_left
    lo, hi = curve.s_range
    base_curve = EquilibriumCurve(
        lambda s: left @ curve.at(s),
        lambda s: left @ curve.tangent_at(s),
        s_range=(max(lo, -delta), min(hi, delta)),
    )
    inner = uniformly_stable_chart(slow.reduced_field, base_curve, split=_reduced_split(slow), delta=delta,
                                   **chart_options)
    s0 = _embed(inner, slow, 'uniformly_stable', 'uniformly stable chart of the slow dynamics')
    chart = slaving_chart(sys.tau_field(), s0, delta=delta, invariance_tol=invariance_tol, **chart_options)
    chart.meta['s0_dimension'] = s0.base_dimension
    chart.meta['c'] = chart.meta['rate'] / 2.0
    logger.info(
        f"Singular uniformly stable chart for {sys.name or 'system'}: S0 of dimension {s0.base_dimension}, "
        f"{chart.base_dimension - s0.base_dimension} fast directions"
    )
    return chart


def slow_fast_decomposition(
    sys: SingularSystem,
    chart: ManifoldChart,
    xi: Optional[Sequence[float]] = None,
    point: Optional[Sequence[float]] = None,
    curve: Optional[EquilibriumCurve] = None,
    check_limit: bool = False,
    horizon: float = 20.0,
    limit_tol: float = 1e-8,
    tol: Optional[float] = None,
) -> SlowFastDecomposition:
    """
    V = V_sl + V_f + V_p along the trajectory through chart base point xi
    (or the chart point below ``point``). V_f must decay at least at the
    rate c, half the fast rate of dV/dtau = F.
    """
    if chart.kind != 'slaving':
        raise InvalidInputError(_('slow/fast decomposition needs a slaving chart, got {}').format(chart.kind))
    if xi is None:
        if point is None:
            raise InvalidInputError(_('give either xi or point'))
        xi = chart.project(point)
    parts = chart.decompose(xi)
    tol = 1e3 * chart.fp_tol if tol is None else tol
    residual = parts.residual
    if residual > tol:
        logger.error(f"Decomposition residual {residual:.3e} above {tol:.3e}")
        raise DecompositionError(
            _('V_sl + V_f + V_p misses the trajectory by {:.3e}').format(residual),
            {'residual': residual, 'tolerance': tol},
        )

    c = chart.meta.get('c', chart.meta['rate'] / 2.0)
    rate = fit_decay_rate(parts.grid, np.linalg.norm(parts.Vf, axis=1))
    if rate is not None and rate < c * (1.0 - 1e-6):
        raise DecompositionError(
            _('fast part decays at {:.4g}, slower than c = {:.4g}').format(rate, c), {'rate': rate, 'c': c})

    try:
        t = rescale_time(sys, Trajectory('tau', parts.grid, parts.V)).grid
    except InvalidInputError as e:
        logger.warning(f"No t grid for the decomposition: {e.message}")
        t = None

    limit = None
    if check_limit:
        curve = curve or sys.equilibria
        if curve is None:
            raise InvalidInputError(_('checking the limit needs a curve of equilibria'))
        limit = track_limit(sys.tau_field(), parts.V[0], curve, horizon=horizon, tol=limit_tol)

    return SlowFastDecomposition(parts.grid, t, parts.V, parts.V0, parts.Vf, parts.Vp, rate, c, residual, limit)
