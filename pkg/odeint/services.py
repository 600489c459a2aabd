"""
SERVICES.PY - Adaptive explicit Runge-Kutta integration

Dormand-Prince 5(4) pair with the standard fourth order dense output,
PI step-size control and event location by bisection on the dense output.
The coefficient set is fixed so results are reproducible bit for bit.
"""

import logging
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from django.utils.translation import gettext_lazy as _

from core.exceptions import InvalidInputError, NumericFailureError, RangeError, StiffnessError
from core.utils import as_vector, get_setting, require_positive

from .models import Event, EventRecord, IntegrationResult

logger = logging.getLogger(__name__)


# ================ DORMAND-PRINCE TABLEAU ================

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])

A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
])

B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])

# difference between the 5th and 4th order weights, last entry for the FSAL stage
E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])

# dense output, y(t_k + x h) = y_k + h * K^T P (x, x^2, x^3, x^4)
P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

ORDER = 4
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
PI_BETA = 0.04
PI_ALPHA = 1.0 / (ORDER + 1) - 0.75 * PI_BETA


def _rms(x: np.ndarray) -> float:
    return float(np.linalg.norm(x) / np.sqrt(x.size))


def _powers(x: float) -> np.ndarray:
    return np.array([x, x * x, x ** 3, x ** 4])


# ================ INTEGRATOR SERVICE ================

class DormandPrince:
    """
    Embedded 5(4) integrator with:
    - PI step control (no growth right after a rejection)
    - dense output on every accepted step
    - terminal and non-terminal events
    """

    def __init__(
        self,
        rtol: Optional[float] = None,
        atol: Optional[float] = None,
        max_step: float = np.inf,
        first_step: Optional[float] = None,
    ):
        self.rtol = require_positive(rtol if rtol is not None else get_setting('ODEINT', 'rtol'), 'rtol')
        self.atol = require_positive(atol if atol is not None else get_setting('ODEINT', 'atol'), 'atol')
        self.max_step = float(max_step)
        self.first_step = first_step
        self.min_step_rel = float(get_setting('ODEINT', 'min_step'))
        self.max_steps = int(get_setting('ODEINT', 'max_steps'))
        self.event_tol = float(get_setting('ODEINT', 'event_tol'))

        self.stats = {
            'steps': 0,
            'rejected': 0,
            'evaluations': 0,
        }

    def _eval(self, fun, t, y) -> np.ndarray:
        self.stats['evaluations'] += 1
        return np.asarray(fun(t, y), dtype=float)

    def _initial_step(self, fun, t0, y0, f0, direction) -> float:
        scale = self.atol + np.abs(y0) * self.rtol
        d0 = _rms(y0 / scale)
        d1 = _rms(f0 / scale)
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        y1 = y0 + h0 * direction * f0
        f1 = self._eval(fun, t0 + h0 * direction, y1)
        d2 = _rms((f1 - f0) / scale) / h0
        if d1 <= 1e-15 and d2 <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1.0 / (ORDER + 1))
        return min(100 * h0, h1)

    def _step(self, fun, t, y, f, h) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        K = np.empty((7, y.shape[0]))
        K[0] = f
        for s in range(1, 6):
            dy = K[:s].T @ A[s, :s] * h
            K[s] = self._eval(fun, t + C[s] * h, y + dy)
        y_new = y + h * (K[:6].T @ B)
        K[6] = self._eval(fun, t + h, y_new)
        err = h * (K.T @ E)
        return y_new, K, err

    def _locate(self, event: Event, t0, y0, h, Q, g0, g1) -> Tuple[float, np.ndarray, Tuple[float, float]]:
        """Bisection on the dense output of one step"""
        lo, hi = 0.0, 1.0
        glo = g0
        t_scale = max(1.0, abs(t0), abs(t0 + h))
        while abs(hi - lo) * abs(h) > self.event_tol * t_scale:
            mid = 0.5 * (lo + hi)
            y_mid = y0 + h * Q @ _powers(mid)
            g_mid = float(event(t0 + mid * h, y_mid))
            if not np.isfinite(g_mid):
                raise InvalidInputError(_('event {} returned a non-finite value').format(event.name))
            if g_mid == 0.0:
                lo = hi = mid
                break
            if np.sign(g_mid) == np.sign(glo):
                lo, glo = mid, g_mid
            else:
                hi = mid
        x = hi
        return t0 + x * h, y0 + h * Q @ _powers(x), (t0 + lo * h, t0 + hi * h)

    def run(
        self,
        fun: Callable[[float, np.ndarray], np.ndarray],
        y0: Sequence[float],
        t_span: Tuple[float, float],
        events: Iterable[Union[Event, Callable]] = (),
    ) -> IntegrationResult:
        t0, t1 = float(t_span[0]), float(t_span[1])
        y = as_vector(y0, name='V0').copy()
        if not (np.isfinite(t0) and np.isfinite(t1)):
            raise InvalidInputError(_('integration span must be finite'))
        events = [ev if isinstance(ev, Event) else Event(
            ev, getattr(ev, 'terminal', True), getattr(ev, 'direction', 0),
            getattr(ev, '__name__', 'event')) for ev in events]

        ts: List[float] = [t0]
        ys: List[np.ndarray] = [y.copy()]
        hs: List[float] = []
        dense: List[np.ndarray] = []
        records: List[EventRecord] = []

        if t1 == t0:
            return IntegrationResult(np.array(ts), np.array(ys), np.empty(0),
                                     np.empty((0, y.shape[0], 4)), dict(self.stats))

        direction = 1.0 if t1 > t0 else -1.0
        span = abs(t1 - t0)
        t = t0
        f = self._eval(fun, t, y)
        if not np.all(np.isfinite(f)):
            raise InvalidInputError(_('field is not finite at the initial state'))
        g_prev = [self._event_value(ev, t, y) for ev in events]

        h_abs = self.first_step if self.first_step else self._initial_step(fun, t, y, f, direction)
        h_abs = min(h_abs, self.max_step, span)
        err_prev = 1e-4
        rejected_last = False
        terminal = None

        while direction * (t1 - t) > 0:
            if self.stats['steps'] >= self.max_steps:
                raise NumericFailureError(
                    _('step budget of {} exhausted at t = {}').format(self.max_steps, t),
                    {'t': t, 'y': y.tolist()},
                )
            h_min = max(10 * np.spacing(abs(t)), self.min_step_rel * span)
            last = h_abs >= abs(t1 - t)
            if h_abs < h_min and not last:
                logger.error(f"Step size underflow at t={t}: h={h_abs:.3e}")
                raise StiffnessError(
                    _('step size {:.3e} below minimum at t = {}').format(h_abs, t),
                    {'t': t, 'y': y.tolist(), 'h': h_abs},
                )
            if last:
                h_abs = abs(t1 - t)
                h = t1 - t
            else:
                h = direction * h_abs

            y_new, K, err = self._step(fun, t, y, f, h)
            scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = _rms(err / scale)

            if not np.isfinite(err_norm):
                self.stats['rejected'] += 1
                h_abs *= MIN_FACTOR
                rejected_last = True
                continue

            if err_norm > 1.0:
                self.stats['rejected'] += 1
                h_abs *= max(MIN_FACTOR, SAFETY * err_norm ** (-1.0 / (ORDER + 1)))
                rejected_last = True
                continue

            # accepted
            self.stats['steps'] += 1
            Q = K.T @ P
            t_new = t1 if last else t + h
            if err_norm == 0.0:
                factor = MAX_FACTOR
            else:
                factor = SAFETY * err_norm ** (-PI_ALPHA) * err_prev ** PI_BETA
                factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
            if rejected_last:
                factor = min(1.0, factor)
            err_prev = max(err_norm, 1e-4)
            rejected_last = False

            # events on this step, earliest first
            hits = []
            g_new = []
            for k, ev in enumerate(events):
                g1 = self._event_value(ev, t_new, y_new)
                g_new.append(g1)
                g0 = g_prev[k]
                if g0 == 0.0:
                    continue
                crossed = g1 == 0.0 or np.sign(g1) != np.sign(g0)
                if crossed and (ev.direction == 0 or np.sign(g1 - g0) == np.sign(ev.direction)):
                    te, ye, bracket = self._locate(ev, t, y, h, Q, g0, g1)
                    hits.append((direction * te, k, te, ye, bracket))
            hits.sort(key=lambda item: (item[0], item[1]))
            for _key, k, te, ye, bracket in hits:
                ev = events[k]
                rec = EventRecord(ev.name, float(te), ye, ev.terminal, bracket)
                records.append(rec)
                if ev.terminal:
                    terminal = rec
                    break

            hs.append(h)
            dense.append(Q)
            if terminal is not None:
                ts.append(terminal.t)
                ys.append(terminal.y.copy())
                logger.debug(f"Terminal event {terminal.name} at t={terminal.t}")
                break
            ts.append(t_new)
            ys.append(y_new.copy())
            t, y, f = t_new, y_new, K[6]
            g_prev = g_new
            h_abs = min(h_abs * factor, self.max_step)

        return IntegrationResult(
            t=np.array(ts),
            y=np.array(ys),
            h=np.array(hs),
            dense=np.array(dense) if dense else np.empty((0, y.shape[0], 4)),
            stats=dict(self.stats),
            events=records,
            terminal_event=terminal,
            status='event' if terminal is not None else 'success',
        )

    @staticmethod
    def _event_value(ev: Event, t: float, y: np.ndarray) -> float:
        value = float(ev(t, y))
        if not np.isfinite(value):
            raise InvalidInputError(_('event {} returned a non-finite value').format(ev.name))
        return value


# ================ PUBLIC OPERATIONS ================

def integrate(
    field: Callable[[float, np.ndarray], np.ndarray],
    V0: Sequence[float],
    t_span: Tuple[float, float],
    rtol: Optional[float] = None,
    atol: Optional[float] = None,
    events: Iterable[Union[Event, Callable]] = (),
    max_step: float = np.inf,
    first_step: Optional[float] = None,
) -> IntegrationResult:
    """
    Integrate V' = field(t, V) over t_span (either direction)
    """
    solver = DormandPrince(rtol=rtol, atol=atol, max_step=max_step, first_step=first_step)
    result = solver.run(field, V0, t_span, events)
    logger.debug(
        f"Integrated to t={result.t_final} in {solver.stats['steps']} steps "
        f"({solver.stats['rejected']} rejected)"
    )
    return result


def integrate_autonomous(G: Callable[[np.ndarray], np.ndarray], V0, t_span, **kwargs) -> IntegrationResult:
    return integrate(lambda _t, v: G(v), V0, t_span, **kwargs)


def dense_eval(result: IntegrationResult, t: Union[float, Sequence[float]]) -> np.ndarray:
    """
    State at time t from the dense output; stored step states are returned
    exactly. Arrays of times give an array of states.
    """
    if np.ndim(t) > 0:
        return np.array([dense_eval(result, ti) for ti in t])
    t = float(t)
    times = result.t
    lo, hi = min(times[0], times[-1]), max(times[0], times[-1])
    if not (lo <= t <= hi):
        raise RangeError(
            _('t = {} outside integrated span [{}, {}]').format(t, lo, hi),
            {'t': t, 'span': [float(lo), float(hi)]},
        )
    exact = np.flatnonzero(times == t)
    if exact.size:
        return result.y[exact[0]].copy()

    ascending = times if times[-1] >= times[0] else -times
    key = t if times[-1] >= times[0] else -t
    k = int(np.searchsorted(ascending, key, side='right')) - 1
    k = min(max(k, 0), result.n_steps - 1)
    h = result.h[k]
    x = (t - times[k]) / h
    return result.y[k] + h * result.dense[k] @ _powers(x)
