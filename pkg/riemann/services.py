"""
SERVICES.PY - Wave-fan curves of one characteristic family
Features:
- Monotone-chain convex and concave envelopes
- Fixed point for (u, v, sigma) along the fan curve
- Classification into rarefactions and jumps
- Self-similar sampling and the classical scalar construction
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence

import numpy as np
import scipy.integrate
import scipy.optimize
from django.utils.translation import gettext_lazy as _
from scipy.interpolate import PchipInterpolator

from core.exceptions import ClassificationError, DomainError, InvalidInputError, NoContractionError
from core.utils import as_vector, get_setting
from profiles.models import FluxSystem
from profiles.services import build_tw_center_chart, build_tw_system, generalized_eigenvalue, reduced_direction

from .models import EnvelopeResult, Jump, Rarefaction, WaveFan, WaveFanCurve

logger = logging.getLogger(__name__)


# ================ ENVELOPES ================

def _lower_hull(x: np.ndarray, y: np.ndarray) -> List[int]:
    """Indices of the lower convex hull of points sorted by x"""
    tol = 1e-14 * (x[-1] - x[0]) * (1.0 + float(np.max(np.abs(y))))
    hull: List[int] = []
    for k in range(x.size):
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            cross = (x[j] - x[i]) * (y[k] - y[i]) - (y[j] - y[i]) * (x[k] - x[i])
            if cross > tol:
                break
            hull.pop()
        hull.append(k)
    return hull


def default_contact_tol(values: np.ndarray) -> float:
    return 1e-9 * (1.0 + float(np.max(np.abs(values))))


def convex_envelope(grid, values, contact_tol: Optional[float] = None, concave: bool = False) -> EnvelopeResult:
    """
    Convex envelope (concave with ``concave=True``) of samples on a strictly
    monotone grid; results keep the grid's order
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
        raise InvalidInputError(_('envelope needs at least two samples on a 1-d grid'))
    if not (np.all(np.isfinite(grid)) and np.all(np.isfinite(values))):
        raise InvalidInputError(_('envelope samples must be finite'))
    steps = np.diff(grid)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise InvalidInputError(_('envelope grid must be strictly monotone'))

    descending = steps[0] < 0
    x = grid[::-1] if descending else grid
    y = values[::-1] if descending else values
    sign = -1.0 if concave else 1.0
    hull = _lower_hull(x, sign * y)
    env = sign * np.interp(x, x[hull], sign * y[hull])
    env[hull] = y[hull]
    if descending:
        env = env[::-1]
        hull = [grid.size - 1 - k for k in reversed(hull)]

    if contact_tol is None:
        contact_tol = default_contact_tol(values)
    nodes = np.abs(values - env) <= contact_tol
    return EnvelopeResult(
        grid=grid,
        values=values,
        envelope=env,
        slopes=np.diff(env) / steps,
        contact=nodes[:-1] & nodes[1:],
        contact_nodes=nodes,
        vertices=np.asarray(hull, dtype=int),
        concave=concave,
        contact_tol=float(contact_tol),
    )


def _fan_speeds(env: EnvelopeResult, lam: np.ndarray) -> np.ndarray:
    """
    sigma at nodes along the path: lambda where the node touches a contact
    interval, otherwise the slope of the hull edge to its right
    """
    n = env.grid.size
    slopes = np.append(env.slopes, env.slopes[-1])
    touches = np.zeros(n, dtype=bool)
    touches[:-1] |= env.contact
    touches[1:] |= env.contact
    return np.maximum.accumulate(np.where(touches, lam, slopes))


# ================ FIXED POINT ================

def _cumulative(values: np.ndarray, tau: np.ndarray) -> np.ndarray:
    if tau.size < 3:
        return scipy.integrate.cumulative_trapezoid(values, tau, axis=0, initial=0)
    return scipy.integrate.cumulative_simpson(values, x=tau, axis=0, initial=0)


def _collapsed_curve(tw, u_minus: np.ndarray) -> WaveFanCurve:
    zero = np.zeros(1)
    return WaveFanCurve(
        family=tw.i, u_minus=u_minus, s=0.0, tau=zero, u=u_minus[None, :].copy(), v=zero.copy(),
        sigma=np.array([tw.sigma_bar]), lam=np.array([tw.sigma_bar]), f=zero.copy(), envelope=zero.copy(),
        contact=np.zeros(0, dtype=bool), contact_nodes=np.ones(1, dtype=bool), flux=tw.flux,
    )


def wave_fan_fixed_point(
    flux: FluxSystem,
    u_minus,
    i: int,
    s: float,
    grid_n: Optional[int] = None,
    fp_tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    delta: Optional[float] = None,
    contact_tol: Optional[float] = None,
) -> WaveFanCurve:
    """
    Iterate u = u- + int r, f = int lambda, v = f - conv f, sigma = (conv f)'
    on tau from 0 to s. The concave envelope is used for s < 0. Without
    ``delta`` the chart radius is 2|s| kept within [0.1, RIEMANN chart_delta],
    so strengths beyond chart_delta raise DomainError.
    """
    u_minus = as_vector(u_minus, flux.N, 'u_minus')
    s = float(s)
    grid_n = int(grid_n or get_setting('RIEMANN', 'grid_n'))
    fp_tol = float(fp_tol or get_setting('RIEMANN', 'fp_tol'))
    max_iter = int(max_iter or get_setting('RIEMANN', 'max_iter'))
    relax_threshold = float(get_setting('RIEMANN', 'relax_threshold'))
    if grid_n < 3:
        raise InvalidInputError(_('grid_n must be at least 3, got {}').format(grid_n))
    if not np.isfinite(s):
        raise InvalidInputError(_('strength s must be finite'))

    tw = build_tw_system(flux, u_minus, i)
    if s == 0.0:
        return _collapsed_curve(tw, u_minus)
    if delta is None:
        delta = min(float(get_setting('RIEMANN', 'chart_delta')), max(2.0 * abs(s), 0.1))
    if abs(s) > delta:
        raise DomainError(_('|s| = {} exceeds the chart radius {}').format(abs(s), delta), {'s': s, 'delta': delta})
    chart = build_tw_center_chart(tw, delta=delta)
    r_tilde = reduced_direction(tw, chart)
    concave = s < 0

    tau = np.linspace(0.0, s, grid_n)
    u = u_minus + np.outer(tau, tw.r_i)
    v = np.zeros(grid_n)
    sigma = np.full(grid_n, tw.sigma_bar)
    history: List[float] = []
    ratio = 0.0
    env = None

    for iteration in range(1, max_iter + 1):
        r_vals = np.array([r_tilde(u[k], v[k], sigma[k]) for k in range(grid_n)])
        lam = np.array([generalized_eigenvalue(tw, r_tilde, u[k], v[k], sigma[k]) for k in range(grid_n)])
        u_new = u_minus + _cumulative(r_vals, tau)
        f = _cumulative(lam, tau)
        env = convex_envelope(tau, f, contact_tol, concave=concave)
        v_new = f - env.envelope
        sigma_new = _fan_speeds(env, lam)

        diff = max(
            float(np.max(np.abs(u_new - u))),
            float(np.max(np.abs(v_new - v))),
            float(np.max(np.abs(sigma_new - sigma))),
        )
        if history and history[-1] > 0:
            ratio = diff / history[-1]
        history.append(diff)
        if ratio > relax_threshold:
            u_new = 0.5 * (u + u_new)
            v_new = 0.5 * (v + v_new)
            sigma_new = 0.5 * (sigma + sigma_new)
        u, v, sigma = u_new, v_new, sigma_new
        if diff <= fp_tol:
            logger.debug(f"Wave fan family {tw.i}, s={s}: converged in {iteration} iterations")
            return WaveFanCurve(
                family=tw.i, u_minus=u_minus, s=s, tau=tau, u=u, v=v, sigma=sigma, lam=lam, f=f,
                envelope=env.envelope, contact=env.contact, contact_nodes=env.contact_nodes,
                contact_tol=env.contact_tol, iterations=iteration, contraction_ratio=ratio, history=history,
                flux=flux,
            )

    logger.error(f"Wave fan fixed point stalled after {max_iter} iterations (last change {history[-1]:.3e})")
    raise NoContractionError(
        _('wave-fan fixed point did not converge in {} iterations').format(max_iter),
        {'history': history, 'ratio': ratio, 's': s},
    )


def wave_fan_curve_value(flux: FluxSystem, u_minus, i: int, s: float, **kwargs) -> np.ndarray:
    """T_i(u-, s)"""
    if float(s) == 0.0:
        return as_vector(u_minus, flux.N, 'u_minus').copy()
    return wave_fan_fixed_point(flux, u_minus, i, s, **kwargs).end_state


def wave_fan_sweep(flux: FluxSystem, u_minus, i: int, strengths: Sequence[float], jobs: int = 1,
                   **kwargs) -> List[WaveFanCurve]:
    """Curves for several strengths, in input order"""
    run = lambda s: wave_fan_fixed_point(flux, u_minus, i, s, **kwargs)
    if jobs <= 1 or len(strengths) < 2:
        return [run(s) for s in strengths]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run, strengths))


# ================ CLASSIFICATION ================

def _runs(mask: np.ndarray):
    """Maximal runs of equal flags as (flag, start, stop) over intervals"""
    runs = []
    start = 0
    for k in range(1, mask.size + 1):
        if k == mask.size or mask[k] != mask[start]:
            runs.append((bool(mask[start]), start, k))
            start = k
    return runs


def classify_segments(
    curve: WaveFanCurve,
    contact_tol: Optional[float] = None,
    rh_tol: Optional[float] = None,
) -> WaveFan:
    """
    Contact runs become rarefactions and gap runs jumps; gap runs split at
    interior nodes that touch the envelope
    """
    flux = curve.flux
    if flux is None:
        raise InvalidInputError(_('curve carries no flux to check jumps against'))
    if rh_tol is None:
        rh_tol = get_setting('RIEMANN', 'rh_tol_scalar' if curve.N == 1 else 'rh_tol_system')
    if contact_tol is None:
        contact_tol = curve.contact_tol or default_contact_tol(curve.f)
    segments = []
    if curve.tau.size < 2:
        return WaveFan(curve.u_minus.copy(), segments, curve)

    tau, u, sigma = curve.tau, curve.u, curve.sigma
    for is_contact, a, b in _runs(curve.contact):
        if is_contact:
            segments.append(Rarefaction(a, b, (float(tau[a]), float(tau[b])),
                                        (float(sigma[a]), float(sigma[b])), u[a].copy(), u[b].copy()))
            continue
        cuts = [a] + [k for k in range(a + 1, b) if curve.contact_nodes[k]] + [b]
        for c, d in zip(cuts[:-1], cuts[1:]):
            speeds = np.diff(curve.envelope[c:d + 1]) / np.diff(tau[c:d + 1])
            if np.max(speeds) - np.min(speeds) > contact_tol * (1.0 + float(np.max(np.abs(speeds)))):
                raise ClassificationError(
                    _('speed varies on the gap interval [{}, {}]').format(tau[c], tau[d]),
                    {'tau': [float(tau[c]), float(tau[d])], 'speeds': [float(np.min(speeds)), float(np.max(speeds))]},
                )
            speed = float(speeds[0])
            rh = float(np.linalg.norm(flux(u[d]) - flux(u[c]) - speed * (u[d] - u[c])))
            if rh > rh_tol:
                raise ClassificationError(
                    _('jump on [{}, {}] violates Rankine-Hugoniot ({:.3e})').format(tau[c], tau[d], rh),
                    {'tau': [float(tau[c]), float(tau[d])], 'rh_residual': rh},
                )
            segments.append(Jump(c, d, (float(tau[c]), float(tau[d])), speed, u[c].copy(), u[d].copy(), rh))

    logger.debug(f"Classified fan: {[seg.kind for seg in segments]}")
    return WaveFan(curve.u_minus.copy(), segments, curve)


# ================ SAMPLING ================

def _rarefaction_state(curve: WaveFanCurve, seg: Rarefaction, xi: float) -> np.ndarray:
    sigma = curve.sigma[seg.start:seg.stop + 1]
    states = curve.u[seg.start:seg.stop + 1]
    sigma, keep = np.unique(sigma, return_index=True)
    if sigma.size < 2:
        return states[keep[0]].copy()
    return PchipInterpolator(sigma, states[keep], axis=0)(xi)


def sample_solution(fan: WaveFan, t: float, x: float) -> np.ndarray:
    """Self-similar state at (t, x) with x/t read against the fan speeds"""
    t = float(t)
    if not t > 0:
        raise InvalidInputError(_('sampling time must be positive, got {}').format(t))
    xi = float(x) / t
    state = fan.u_minus.copy()
    for seg in fan.segments:
        low, high = seg.speeds
        if xi < low:
            return state
        if isinstance(seg, Rarefaction) and xi <= high:
            return _rarefaction_state(fan.curve, seg, xi)
        state = seg.right.copy()
    return state


def classical_scalar_solution(
    f: Callable[[float], float],
    fprime: Callable[[float], float],
    u_left: float,
    u_right: float,
    t: float,
    x: float,
    n: int = 2001,
) -> float:
    """
    Entropy solution of the scalar Riemann problem from the envelope of f
    between the two states: argmin of conv f(u) - xi u (argmax of
    conc f(u) - xi u when u_left > u_right), refined by f'(u) = xi on
    contact intervals
    """
    t = float(t)
    if not t > 0:
        raise InvalidInputError(_('sampling time must be positive, got {}').format(t))
    if u_left == u_right:
        return float(u_left)
    xi = float(x) / t
    grid = np.linspace(u_left, u_right, n)
    values = np.array([f(u) for u in grid])
    concave = u_right < u_left
    env = convex_envelope(grid, values, concave=concave)
    score = env.envelope - xi * grid
    k = int(np.argmax(score) if concave else np.argmin(score))

    g = lambda u: fprime(u) - xi
    for a, b in ((k - 1, k), (k, k + 1)):
        if 0 <= a and b < n and env.contact[a]:
            ga, gb = g(grid[a]), g(grid[b])
            if ga == 0.0:
                return float(grid[a])
            if ga * gb < 0:
                return float(scipy.optimize.brentq(g, grid[a], grid[b], xtol=1e-15, rtol=4 * np.finfo(float).eps))
    return float(grid[k])
