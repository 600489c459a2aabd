"""
SERVICES.PY - Viscous profile computation for u_t + f(u)_x = eps u_xx
Features:
- Augmented traveling-wave system and its center chart
- Reduced direction r_i(U, v, sigma) and generalized eigenvalue
- Traveling waves by shooting from the unstable manifold of u-
- Boundary layers by shooting onto the stable manifold of u0
- Scaled solutions and PDE residual checks
"""

import logging
import math
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import scipy.integrate
import scipy.optimize
from django.utils.translation import gettext_lazy as _

from core.exceptions import (
    DegenerateEigenvalueError,
    DomainError,
    HyperbolicityError,
    InvalidInputError,
    NoConnectionError,
    NumericFailureError,
    ViscprofError,
)
from core.utils import as_vector, get_setting, require_positive
from manifolds.models import ManifoldChart, SmoothField
from manifolds.services import center_chart, stable_chart
from manifolds.utils import fit_decay_rate
from odeint.models import Event, IntegrationResult
from odeint.services import dense_eval, integrate_autonomous

from .models import FluxSystem, Profile, TravelingWaveSystem

logger = logging.getLogger(__name__)

PROFILE_RTOL = 1e-11
PROFILE_ATOL = 1e-13
# distance to an end state below which its exponential rate is fitted
TAIL_WINDOW = 1e-2
# seven-point central weights, sixth order
D1_WEIGHTS = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0
D2_WEIGHTS = np.array([2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0]) / 180.0
STENCIL = np.arange(-3, 4)
# reference trajectories for residual checks
REFERENCE_RTOL = 1e-13
REFERENCE_ATOL = 1e-15
MATCH_TOL = 1e-7


# ================ AUGMENTED SYSTEM ================

def build_tw_system(flux: FluxSystem, u_bar, i: int) -> TravelingWaveSystem:
    """Augmented field (U, p, sigma) for family i at u_bar"""
    tw = TravelingWaveSystem(flux, u_bar, i)
    logger.debug(f"Traveling-wave system for {flux.name or 'flux'}: family {tw.i}, sigma_bar={tw.sigma_bar}")
    return tw


def build_tw_center_chart(tw: TravelingWaveSystem, delta: float = 0.1, base_n: int = 0, **kwargs) -> ManifoldChart:
    """Center chart of the augmented field at its equilibrium (solver only by default)"""
    return center_chart(tw.field, delta=delta, base_n=base_n, **kwargs)


class ReducedDirection:
    """
    r_i(U, v, sigma) with p = v r_i on the center chart of the augmented
    system. Points are addressed by center coordinates (U_c, a, sigma) with
    U_c corrected until the chart's U component equals U.
    """

    def __init__(self, tw: TravelingWaveSystem, chart: ManifoldChart, mode: str):
        self.tw = tw
        self.chart = chart
        self.mode = mode
        self.h = 1e-3 * chart.delta
        self.max_corrections = 20

    def coordinates(self, U, a: float, sigma: float) -> np.ndarray:
        xi = self.chart.base_left @ self.tw.center_vector(U, a, sigma)
        if np.linalg.norm(xi) > self.chart.delta * (1 + 1e-12):
            raise DomainError(
                _('(U, v, sigma) lies outside the chart radius {}').format(self.chart.delta),
                {'xi': xi.tolist(), 'delta': self.chart.delta},
            )
        return xi

    def _p(self, U: np.ndarray, a: float, sigma: float) -> np.ndarray:
        N = self.tw.N
        Uc = U.copy()
        for _k in range(self.max_corrections):
            V = self.chart.evaluate(self.coordinates(Uc, a, sigma), exact=self.chart.solver is not None)
            dU = U - V[:N]
            if np.linalg.norm(dU) <= 1e-13 * (1 + np.linalg.norm(U)):
                break
            Uc = Uc + dU
        return V[N:2 * N]

    def _r_hat(self, U: np.ndarray, v: float, sigma: float) -> np.ndarray:
        if abs(v) < self.h:
            return (self._p(U, self.h, sigma) - self._p(U, -self.h, sigma)) / (2 * self.h)
        a = v
        r_hat = self._p(U, a, sigma) / a
        for _k in range(self.max_corrections):
            a_next = v / np.linalg.norm(r_hat)
            if abs(a_next - a) <= 1e-14 * (1 + abs(a)):
                break
            a = a_next
            r_hat = self._p(U, a, sigma) / a
        return r_hat

    def __call__(self, U, v: float, sigma: float) -> np.ndarray:
        U = as_vector(U, self.tw.N, 'U')
        v, sigma = float(v), float(sigma)
        self.coordinates(U, v, sigma)
        if self.mode == 'scalar':
            return np.ones(1)
        if self.mode == 'linear':
            return self.tw.r_i.copy()
        r_hat = self._r_hat(U, v, sigma)
        r = r_hat / np.linalg.norm(r_hat)
        return r if r @ self.tw.r_i >= 0 else -r


def reduced_direction(tw: TravelingWaveSystem, chart: ManifoldChart, method: str = 'auto') -> ReducedDirection:
    """
    Unit direction r_i(U, v, sigma) read off the center chart. ``auto``
    short-cuts N = 1 (r = 1) and linear fluxes (r = r_i); ``chart`` always
    reads the chart.
    """
    if chart.kind != 'center':
        raise InvalidInputError(_('reduced direction needs a center chart, got {}').format(chart.kind))
    if chart.dimension != tw.dimension or np.linalg.norm(chart.equilibrium - tw.equilibrium) > 1e-10:
        raise InvalidInputError(_('chart was not built on this traveling-wave system'))
    if method not in ('auto', 'chart'):
        raise InvalidInputError(_('unknown method {!r}').format(method))
    mode = 'chart'
    if method == 'auto':
        if tw.N == 1:
            mode = 'scalar'
        elif tw.flux.is_linear:
            mode = 'linear'
    return ReducedDirection(tw, chart, mode)


def generalized_eigenvalue(tw: TravelingWaveSystem, r_tilde: Callable, U, v: float, sigma: float) -> float:
    """<Df(U) r, r> along the reduced direction"""
    U = as_vector(U, tw.N, 'U')
    r = r_tilde(U, v, sigma)
    return float(r @ tw.flux.jacobian(U) @ r)


# ================ SHOOTING HELPERS ================

def _arrival_events(target: np.ndarray, origin: np.ndarray, tol: float, bound: float):
    arrive = Event(lambda _t, y: float(np.linalg.norm(y - target)) - tol, terminal=True, direction=-1, name='arrive')
    escape = Event(lambda _t, y: float(np.linalg.norm(y - origin)) - bound, terminal=True, direction=1, name='escape')
    return [arrive, escape]


def _run_leg(H, start, horizon, doublings, events, sign=1.0) -> Tuple[IntegrationResult, bool]:
    """
    Integrate from ``start`` with the horizon doubled until a terminal
    ``arrive`` event fires
    """
    result = None
    for k in range(doublings + 1):
        span = sign * horizon * 2 ** k
        result = integrate_autonomous(H, start, (0.0, span), rtol=PROFILE_RTOL, atol=PROFILE_ATOL, events=events)
        fired = result.terminal_event
        if fired is not None:
            return result, fired.name == 'arrive'
    return result, False


def _miss(result: IntegrationResult, target: np.ndarray) -> float:
    return float(np.min(np.linalg.norm(result.y - target, axis=1)))


def _tail_rate(times: np.ndarray, states: np.ndarray, limit: np.ndarray, tol: float) -> Optional[float]:
    dist = np.linalg.norm(states - limit, axis=1)
    mask = dist < TAIL_WINDOW
    return fit_decay_rate(times[mask], dist[mask], floor=tol / 10.0)


def _unit_from_angles(angles: np.ndarray) -> np.ndarray:
    """Point on the unit sphere of R^(len(angles)+1) from hyperspherical angles"""
    k = angles.size + 1
    x = np.ones(k)
    for j, a in enumerate(angles):
        x[j] *= math.cos(a)
        x[j + 1:] *= math.sin(a)
    return x


def _check_endpoint(flux: FluxSystem, u: np.ndarray, sigma: float, label: str):
    values = flux.eigen_data(u).values - sigma
    scale = max(1.0, float(np.max(np.abs(values + sigma))))
    if np.min(np.abs(values)) <= 1e-9 * scale:
        raise HyperbolicityError(
            _('end state {} is not hyperbolic for speed {}').format(label, sigma),
            {label: u.tolist(), 'sigma': sigma, 'shifted_eigenvalues': values.tolist()},
        )
    return values


def _residual(profile: Profile, H: Callable[[np.ndarray], np.ndarray], h: float = 1e-3) -> float:
    """Largest |U' - H(U)| at interior grid points, U' by a five-point stencil"""
    y = profile.y
    inner = y[(y - 2 * h > y[0]) & (y + 2 * h < y[-1])]
    worst = 0.0
    for yk in inner:
        dU = (-profile.evaluate(yk + 2 * h) + 8 * profile.evaluate(yk + h)
              - 8 * profile.evaluate(yk - h) + profile.evaluate(yk - 2 * h)) / (12 * h)
        worst = max(worst, float(np.linalg.norm(dU - H(profile.evaluate(yk)))))
    return worst


def _constant_profile(kind: str, u: np.ndarray, sigma: Optional[float], grid: np.ndarray) -> Profile:
    U = np.tile(u, (grid.size, 1))
    return Profile(kind, grid, U, np.zeros_like(U), u.copy(), u.copy(), sigma, {'minus': None, 'plus': None})


def _crossing(profile: Profile, component: int, level: float) -> float:
    values = profile.U[:, component] - level
    idx = np.flatnonzero(np.sign(values[:-1]) * np.sign(values[1:]) <= 0)
    if idx.size == 0:
        raise NoConnectionError(_('profile never reaches the midpoint level {}').format(level))
    k = int(idx[0])
    fn = lambda y: float(profile.evaluate(y)[component] - level)
    return float(scipy.optimize.brentq(fn, profile.y[k], profile.y[k + 1], xtol=1e-14, rtol=1e-15))


def normalize_profile(profile: Profile) -> Profile:
    """
    Shift so that the normalising component at y = 0 equals the mean of its
    end values. The component is the first one unless its end values agree.
    """
    jump = profile.u_plus - profile.u_minus
    if not np.any(jump):
        return profile
    component = 0 if abs(jump[0]) > 1e-12 else int(np.argmax(np.abs(jump)))
    level = 0.5 * (profile.u_minus[component] + profile.u_plus[component])
    y0 = _crossing(profile, component, level)
    shifted = profile.shifted(-y0)
    shifted.meta['normalising_component'] = component
    return shifted


# ================ TRAVELING WAVES ================

class _Shooter:
    """Forward shots from a point of the unstable manifold of u- towards u+"""

    def __init__(self, H, chart: ManifoldChart, u_minus, u_plus, radius, tol, horizon, doublings):
        self.H = H
        self.chart = chart
        self.u_minus = u_minus
        self.u_plus = u_plus
        self.radius = radius
        self.tol = tol
        self.horizon = horizon
        self.doublings = doublings
        self.bound = 10.0 * (1.0 + float(np.linalg.norm(u_plus - u_minus)))
        self.shots = 0

    def start(self, direction: np.ndarray) -> np.ndarray:
        return self.chart.evaluate(self.radius * direction, exact=True)

    def shoot(self, direction: np.ndarray):
        self.shots += 1
        start = self.start(direction)
        events = _arrival_events(self.u_plus, self.u_minus, self.tol, self.bound)
        result, arrived = _run_leg(self.H, start, self.horizon, self.doublings, events)
        return _miss(result, self.u_plus), result, arrived, start


def solve_traveling_wave(
    flux: FluxSystem,
    u_minus,
    u_plus,
    sigma: float,
    horizon: Optional[float] = None,
    tol: Optional[float] = None,
    delta: float = 0.1,
) -> Profile:
    """
    Profile U(y) with U' = f(U) - sigma U - (f(u-) - sigma u-) joining u- to
    u+. Raises NoConnectionError whose details carry the miss distance.
    """
    N = flux.N
    u_minus = as_vector(u_minus, N, 'u_minus')
    u_plus = as_vector(u_plus, N, 'u_plus')
    sigma = float(sigma)
    tol = require_positive(tol or get_setting('PROFILES', 'tol'), 'tol')
    horizon = require_positive(horizon or get_setting('PROFILES', 'horizon'), 'horizon')
    doublings = int(get_setting('PROFILES', 'horizon_doublings'))

    rh = float(np.linalg.norm(flux(u_plus) - flux(u_minus) - sigma * (u_plus - u_minus)))
    if rh > tol:
        raise NoConnectionError(
            _('Rankine-Hugoniot residual {:.3e} exceeds tolerance {:.1e}').format(rh, tol),
            {'rh_residual': rh, 'tol': tol},
        )
    if np.linalg.norm(u_plus - u_minus) <= tol:
        return _constant_profile('traveling_wave', u_minus, sigma, np.linspace(-1.0, 1.0, 3))

    shifted_minus = _check_endpoint(flux, u_minus, sigma, 'u_minus')
    _check_endpoint(flux, u_plus, sigma, 'u_plus')

    c = flux(u_minus) - sigma * u_minus
    H = lambda U: flux(U) - sigma * U - c
    DH = lambda U: flux.jacobian(U) - sigma * np.eye(N)
    k_u = int(np.count_nonzero(shifted_minus > 0))
    if k_u == 0:
        miss = float(np.linalg.norm(u_plus - u_minus))
        raise NoConnectionError(
            _('u_minus has no unstable directions for speed {}').format(sigma),
            {'miss': miss, 'rh_residual': rh, 'unstable_dimension': 0},
        )

    reversed_field = SmoothField(N, H, DH, u_minus, name='traveling-wave ODE').time_reversed()
    chart = stable_chart(reversed_field, delta=delta, base_n=0)
    radius = min(1e-4, chart.delta / 10.0)
    shooter = _Shooter(H, chart, u_minus, u_plus, radius, tol, horizon, doublings)

    if k_u == 1:
        shots = [shooter.shoot(np.array([s])) for s in (1.0, -1.0)]
    else:
        best = None

        def objective(angles):
            return shooter.shoot(_unit_from_angles(np.asarray(angles)))[0]

        starts = [np.full(k_u - 1, a) for a in np.linspace(0.0, math.pi, 5)]
        for x0 in starts:
            found = scipy.optimize.minimize(objective, x0, method='Nelder-Mead',
                                            options={'xatol': 1e-10, 'fatol': tol / 10.0, 'maxiter': 400})
            if best is None or found.fun < best.fun:
                best = found
        shots = [shooter.shoot(_unit_from_angles(best.x))]

    miss, forward, arrived, start = min(shots, key=lambda shot: (not shot[2], shot[0]))
    logger.debug(f"Traveling wave: {shooter.shots} shots, best miss {miss:.3e}")
    if not arrived:
        raise NoConnectionError(
            _('no trajectory from u_minus reaches u_plus (miss {:.3e})').format(miss),
            {'miss': miss, 'rh_residual': rh, 'unstable_dimension': k_u, 'shots': shooter.shots},
        )

    bound = shooter.bound
    back_events = _arrival_events(u_minus, u_minus, tol, bound)
    backward, back_arrived = _run_leg(H, start, horizon, doublings, back_events, sign=-1.0)
    if not back_arrived:
        raise NoConnectionError(_('shooting point does not return to u_minus backwards'),
                                {'miss': _miss(backward, u_minus), 'rh_residual': rh})

    rate_plus = _tail_rate(forward.t, forward.y, u_plus, tol)
    rate_minus = _tail_rate(-backward.t, backward.y, u_minus, tol)
    if rate_plus is not None and rate_plus <= 0:
        raise NoConnectionError(_('trajectory passes near u_plus without converging'),
                                {'miss': miss, 'rate': rate_plus})

    t = np.concatenate([backward.t[::-1][:-1], forward.t])
    U = np.concatenate([backward.y[::-1][:-1], forward.y])

    def dense(s: float) -> np.ndarray:
        return dense_eval(forward, s) if s >= 0 else dense_eval(backward, s)

    profile = Profile(
        kind='traveling_wave',
        y=t,
        U=U,
        p=np.array([H(u) for u in U]),
        u_minus=u_minus,
        u_plus=u_plus,
        sigma=sigma,
        rates={'minus': rate_minus, 'plus': rate_plus},
        meta={'rh_residual': rh, 'miss': miss, 'unstable_dimension': k_u, 'shots': shooter.shots},
        dense=dense,
    )
    profile = normalize_profile(profile)
    profile.residual = _residual(profile, H)
    logger.info(
        f"Traveling wave {u_minus.tolist()} -> {u_plus.tolist()} (sigma={sigma}): "
        f"{profile.y.size} points, residual {profile.residual:.2e}"
    )
    return profile


# ================ BOUNDARY LAYERS ================

def admissible_dimension(flux: FluxSystem, u0) -> int:
    """Number of negative eigenvalues of Df(u0)"""
    return int(np.count_nonzero(flux.eigen_data(u0).values < 0))


def boundary_layer_connect(
    flux: FluxSystem,
    u0,
    u_b,
    horizon: Optional[float] = None,
    tol: Optional[float] = None,
    delta: float = 0.1,
) -> Profile:
    """
    Profile on x >= 0 with U' = f(U) - f(u0), U(0) = u_b and U -> u0, by
    forward integration from u_b. The stable chart of u0 is a check only: the
    first state within delta/2 of u0 is measured against it and reported as
    ``chart_distance``. Raises NoConnectionError when u_b is off the stable
    manifold of u0.
    """
    N = flux.N
    u0 = as_vector(u0, N, 'u0')
    u_b = as_vector(u_b, N, 'u_b')
    tol = require_positive(tol or get_setting('PROFILES', 'tol'), 'tol')
    horizon = require_positive(horizon or get_setting('PROFILES', 'horizon'), 'horizon')
    doublings = int(get_setting('PROFILES', 'horizon_doublings'))

    values = flux.eigen_data(u0).values
    scale = max(1.0, float(np.max(np.abs(values))))
    if np.min(np.abs(values)) <= 1e-9 * scale:
        raise DegenerateEigenvalueError(
            _('Df(u0) has a vanishing eigenvalue'),
            {'u0': u0.tolist(), 'eigenvalues': values.tolist()},
        )
    k_s = int(np.count_nonzero(values < 0))

    if np.linalg.norm(u_b - u0) <= tol:
        profile = _constant_profile('boundary_layer', u0, None, np.linspace(0.0, 1.0, 3))
        profile.meta['admissible_dimension'] = k_s
        return profile

    f0 = flux(u0)
    H = lambda U: flux(U) - f0
    if k_s == 0:
        raise NoConnectionError(
            _('u0 has no stable directions'),
            {'distance_to_chart': float(np.linalg.norm(u_b - u0)), 'admissible_dimension': 0},
        )
    field = SmoothField(N, H, flux.jacobian, u0, name='boundary-layer ODE')
    chart = stable_chart(field, delta=delta, base_n=0)

    bound = 10.0 * (1.0 + float(np.linalg.norm(u_b - u0)))
    events = _arrival_events(u0, u0, tol, bound)
    result, arrived = _run_leg(H, u_b, horizon, doublings, events)

    near = result.y[np.linalg.norm(result.y - u0, axis=1) <= chart.delta / 2.0]
    chart_distance = None
    if near.size:
        try:
            chart_distance = chart.distance(near[0])
        except ViscprofError:
            chart_distance = None

    if not arrived:
        raise NoConnectionError(
            _('u_b is not on the stable manifold of u0'),
            {
                'miss': _miss(result, u0),
                'distance_to_chart': chart_distance,
                'admissible_dimension': k_s,
            },
        )

    rate = _tail_rate(result.t, result.y, u0, tol)
    profile = Profile(
        kind='boundary_layer',
        y=result.t.copy(),
        U=result.y.copy(),
        p=np.array([H(u) for u in result.y]),
        u_minus=u_b,
        u_plus=u0,
        sigma=None,
        rates={'minus': None, 'plus': rate},
        meta={'admissible_dimension': k_s, 'chart_distance': chart_distance},
        dense=lambda s: dense_eval(result, s),
    )
    profile.residual = _residual(profile, H)
    logger.info(f"Boundary layer {u_b.tolist()} -> {u0.tolist()}: {profile.y.size} points")
    return profile


# ================ SCALING ================

def scaled_solution(profile: Profile, eps: float) -> Callable[[float, float], np.ndarray]:
    """u(t, x) = U((x - sigma t) / eps); boundary layers are steady"""
    eps = require_positive(eps, 'eps')
    sigma = profile.sigma or 0.0
    return lambda t, x: profile.evaluate((x - sigma * t) / eps)


def _trajectory_at(H: Callable, U0: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """States at the given offsets of the trajectory of U' = H(U) through U0"""
    out = np.empty((offsets.size, U0.size))
    out[offsets == 0] = U0
    for sign in (1.0, -1.0):
        idx = np.flatnonzero(sign * offsets > 0)
        if idx.size == 0:
            continue
        order = idx[np.argsort(sign * offsets[idx])]
        sol = scipy.integrate.solve_ivp(
            lambda _y, U: H(U), (0.0, offsets[order[-1]]), U0, method='DOP853',
            t_eval=offsets[order], rtol=REFERENCE_RTOL, atol=REFERENCE_ATOL,
        )
        if not sol.success:
            raise NumericFailureError(_('reference integration failed: {}').format(sol.message))
        out[order] = sol.y.T
    return out


def pde_residual(flux: FluxSystem, profile: Profile, eps: float, points, step: float = 0.05) -> np.ndarray:
    """
    |u_t + f(u)_x - eps u_xx| of the scaled solution at (t, x) points.
    Derivatives are seven-point differences with spacing ``step`` in profile
    units, taken on a DOP853 reference trajectory through the profile point
    so interpolation noise of the profile does not enter.
    """
    eps = require_positive(eps, 'eps')
    step = require_positive(step, 'step')
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != 2:
        raise InvalidInputError(_('points must be (t, x) pairs'))
    sigma = profile.sigma or 0.0
    c = flux(profile.u_plus) - sigma * profile.u_plus
    H = lambda U: flux(U) - sigma * U - c
    hx = step * eps
    ht = hx / max(abs(sigma), 1.0)
    x_offsets = step * STENCIL
    t_offsets = -sigma * ht / eps * STENCIL
    out = np.empty(points.shape[0])
    for k, (t, x) in enumerate(points):
        if profile.kind == 'boundary_layer' and x - 3 * hx < 0:
            raise DomainError(_('boundary-layer residual needs x >= {}').format(3 * hx), {'x': x})
        y0 = (x - sigma * t) / eps
        U0 = profile.evaluate(y0)
        along_x = _trajectory_at(H, U0, x_offsets)
        sampled = np.array([profile.evaluate(y0 + d) for d in x_offsets])
        deviation = float(np.max(np.linalg.norm(sampled - along_x, axis=1)))
        if deviation > MATCH_TOL * (1.0 + float(np.linalg.norm(U0))):
            raise NumericFailureError(
                _('profile is not a trajectory of the traveling-wave ODE near y = {}').format(y0),
                {'y': y0, 'deviation': deviation},
            )
        fluxes = np.array([flux(u) for u in along_x])
        f_x = D1_WEIGHTS @ fluxes / hx
        u_xx = D2_WEIGHTS @ along_x / (hx * hx)
        u_t = D1_WEIGHTS @ _trajectory_at(H, U0, t_offsets) / ht if sigma else 0.0
        out[k] = float(np.linalg.norm(u_t + f_x - eps * u_xx))
    return out


def profile_summary(profile: Profile) -> Dict:
    data = profile.to_dict()
    data.update({k: v for k, v in profile.meta.items() if not isinstance(v, np.ndarray)})
    return data
