"""
MODELS.PY - Singular systems, hypothesis reports and slow/fast results
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from django.utils.translation import gettext_lazy as _

from core.exceptions import InvalidInputError
from core.utils import as_vector, get_setting, gradient_fd, jacobian_fd
from manifolds.models import EquilibriumCurve, LimitReport, ManifoldChart, SmoothField

logger = logging.getLogger(__name__)

HYPOTHESES = ('H1', 'H2', 'H3', 'H4', 'H5', 'H6')
STATUSES = ('pass', 'fail', 'untestable')


# ================ SYSTEM ================

class SingularSystem:
    """
    dV/dt = F(V) / zeta(V) on R^d with F(0) = 0 and zeta(0) = 0.

    With ``vectorized=True`` both ``F`` and ``zeta`` accept a (d, n) array of
    states and return (d, n) and (n,) respectively. The regular form
    dV/dtau = F(V) is available as a SmoothField through ``tau_field``.
    """

    def __init__(
        self,
        dimension: int,
        F: Callable[[np.ndarray], np.ndarray],
        zeta: Callable[[np.ndarray], Any],
        grad_zeta: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        equilibria: Optional[EquilibriumCurve] = None,
        name: str = '',
        g_tol: Optional[float] = None,
        vectorized: bool = False,
        meta: Optional[Dict[str, Any]] = None,
    ):
        self.dimension = int(dimension)
        if self.dimension < 1:
            raise InvalidInputError(_('system dimension must be positive'))
        self._F = F
        self._zeta = zeta
        self._grad_zeta = grad_zeta
        self._jacobian = jacobian
        self.equilibria = equilibria
        self.name = name
        self.g_tol = float(g_tol if g_tol is not None else get_setting('SINGULAR', 'g_tol'))
        self.vectorized = vectorized
        self.meta = dict(meta or {})
        self._tau_field = None

        origin = np.zeros(self.dimension)
        f0 = float(np.linalg.norm(self.F(origin)))
        z0 = abs(self.zeta(origin))
        if f0 > 1e-10 or z0 > 1e-10:
            raise InvalidInputError(
                _('F and zeta must vanish at the origin (|F(0)| = {:.3e}, |zeta(0)| = {:.3e})').format(f0, z0),
                {'F0': f0, 'zeta0': z0},
            )

    def __repr__(self):
        return f'SingularSystem({self.name or "unnamed"}, d={self.dimension})'

    # ---------------- pieces ----------------

    def F(self, V) -> np.ndarray:
        return np.asarray(self._F(np.asarray(V, dtype=float)), dtype=float)

    def F_many(self, states: np.ndarray) -> np.ndarray:
        """F on an (n, d) array, returned as (n, d)"""
        states = np.asarray(states, dtype=float)
        if self.vectorized:
            return np.asarray(self._F(states.T), dtype=float).reshape(self.dimension, -1).T
        return np.array([self.F(v) for v in states])

    def zeta(self, V) -> float:
        return float(self._zeta(np.asarray(V, dtype=float)))

    def zeta_many(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=float)
        if self.vectorized:
            return np.asarray(self._zeta(states.T), dtype=float).reshape(-1)
        return np.array([self.zeta(v) for v in states])

    def grad_zeta(self, V) -> np.ndarray:
        V = np.asarray(V, dtype=float)
        if self._grad_zeta is not None:
            return np.asarray(self._grad_zeta(V), dtype=float)
        return gradient_fd(self.zeta, V)

    def jacobian(self, V) -> np.ndarray:
        V = np.asarray(V, dtype=float)
        if self._jacobian is not None:
            return np.asarray(self._jacobian(V), dtype=float)
        return jacobian_fd(self.F, V)

    @property
    def has_jacobian(self) -> bool:
        return self._jacobian is not None

    def tau_field(self) -> SmoothField:
        """dV/dtau = F(V), the regular form"""
        if self._tau_field is None:
            self._tau_field = SmoothField(self.dimension, self._F, self._jacobian,
                                          name=f'{self.name} (tau)', vectorized=self.vectorized)
        return self._tau_field

    def singular_field(self, V) -> np.ndarray:
        """F(V) / zeta(V); infinite where zeta vanishes and F does not"""
        V = np.asarray(V, dtype=float)
        z = self.zeta(V)
        with np.errstate(divide='ignore', invalid='ignore'):
            return self.F(V) / z

    # ---------------- G near S ----------------

    def _G_raw(self, V: np.ndarray) -> float:
        return float(self.grad_zeta(V) @ self.F(V)) / self.zeta(V)

    def G(self, V) -> float:
        """
        (grad zeta . F) / zeta, extended across S by one-sided quadratic
        extrapolation along grad zeta when |zeta| <= g_tol
        """
        V = as_vector(V, self.dimension, 'V')
        if abs(self.zeta(V)) > self.g_tol:
            return self._G_raw(V)
        g = self.grad_zeta(V)
        norm = float(np.linalg.norm(g))
        if norm == 0.0:
            raise InvalidInputError(_('grad zeta vanishes at {}; G cannot be extended').format(V.tolist()))
        n = g / norm
        h = max(10.0 * self.g_tol / norm, 1e-5)
        side = 1.0 if self.zeta(V) >= 0 else -1.0
        samples = [self._G_raw(V + side * j * h * n) for j in (1, 2, 3)]
        return 3.0 * samples[0] - 3.0 * samples[1] + samples[2]

    # ---------------- singular set ----------------

    def project_to_singular_set(self, V, tol: float = 1e-14, max_iter: int = 50) -> np.ndarray:
        """Newton steps along grad zeta onto zeta = 0"""
        V = as_vector(V, self.dimension, 'V').copy()
        for _it in range(max_iter):
            z = self.zeta(V)
            if abs(z) <= tol:
                return V
            g = self.grad_zeta(V)
            gg = float(g @ g)
            if gg == 0.0:
                break
            V = V - z * g / gg
        if abs(self.zeta(V)) > 1e3 * tol:
            raise InvalidInputError(
                _('could not reach the singular set from {} (zeta = {:.3e})').format(V.tolist(), self.zeta(V)),
                {'V': V.tolist(), 'zeta': self.zeta(V)},
            )
        return V


# ================ HYPOTHESES ================

@dataclass
class HypothesisResult:
    """
    Outcome of one hypothesis. ``residual`` is the measured quantity: a sup
    that must stay below ``tolerance`` for H1, H3, H5 and H6, and a lower
    bound (|grad zeta(0)|, transversality angle) that must exceed it for H2
    and H4.
    """

    name: str
    status: str
    residual: Optional[float] = None
    tolerance: float = 0.0
    witness: Optional[Dict[str, Any]] = None
    note: str = ''

    def __post_init__(self):
        if self.status not in STATUSES:
            raise InvalidInputError(_('unknown hypothesis status {!r}').format(self.status))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'status': self.status,
            'residual': self.residual,
            'tolerance': self.tolerance,
            'witness': self.witness,
            'note': self.note,
        }


@dataclass
class HypothesisReport:
    results: Dict[str, HypothesisResult]
    cloud: Dict[str, Any]
    # center chart of the tau field built for H3, reused by slow_manifold
    chart: Optional[ManifoldChart] = field(default=None, repr=False, compare=False)
    curve: Optional[EquilibriumCurve] = field(default=None, repr=False, compare=False)

    @property
    def passed(self) -> bool:
        return not self.failed()

    def failed(self) -> List[str]:
        return [name for name in HYPOTHESES if name in self.results and self.results[name].status == 'fail']

    def status(self, name: str) -> str:
        return self.results[name].status

    def to_dict(self) -> Dict[str, Any]:
        return {
            'hypotheses': {name: self.results[name].to_dict() for name in HYPOTHESES if name in self.results},
            'cloud': dict(self.cloud),
            'failed': self.failed(),
            'passed': self.passed,
        }


# ================ NAVIER-STOKES PARAMETERS ================

Coefficient = Union[float, Callable[[Any], Any]]


@dataclass(frozen=True)
class PolytropicNSParams:
    """
    Polytropic gas with p = R rho theta and e = R theta / (gamma - 1).
    ``nu`` and ``k`` are constants or functions of rho; their rho
    derivatives default to 0 for constants and to central differences for
    functions.
    """

    R: float = 1.0
    gamma: float = 1.4
    nu: Coefficient = 1.0
    k: Coefficient = 1.0
    nu_prime: Optional[Coefficient] = None
    k_prime: Optional[Coefficient] = None
    rho0: float = 1.0
    theta0: float = 1.0

    def __post_init__(self):
        if not self.R > 0:
            raise InvalidInputError(_('gas constant R must be positive, got {}').format(self.R))
        if not self.gamma > 1:
            raise InvalidInputError(_('adiabatic exponent gamma must exceed 1, got {}').format(self.gamma))
        if not (self.rho0 > 0 and self.theta0 > 0):
            raise InvalidInputError(_('base density and temperature must be positive'))
        for name in ('nu', 'k'):
            value = getattr(self, name)
            if not callable(value) and not float(value) > 0:
                raise InvalidInputError(_('{} must be positive, got {}').format(name, value))
            if callable(value) and not float(value(self.rho0)) > 0:
                raise InvalidInputError(_('{} must be positive at the base density').format(name))

    @staticmethod
    def _eval(value: Coefficient, rho):
        return value(rho) if callable(value) else value + 0.0 * rho

    @staticmethod
    def _derivative(value: Coefficient, slope: Optional[Coefficient], rho):
        if slope is not None:
            return slope(rho) if callable(slope) else slope + 0.0 * rho
        if not callable(value):
            return 0.0 * rho
        h = 1e-6 * (1.0 + np.abs(rho))
        return (value(rho + h) - value(rho - h)) / (2.0 * h)

    def viscosity(self, rho):
        return self._eval(self.nu, rho)

    def conductivity(self, rho):
        return self._eval(self.k, rho)

    def viscosity_prime(self, rho):
        return self._derivative(self.nu, self.nu_prime, rho)

    def conductivity_prime(self, rho):
        return self._derivative(self.k, self.k_prime, rho)

    def pressure(self, rho, theta):
        return self.R * rho * theta

    def energy(self, theta):
        return self.R * theta / (self.gamma - 1.0)

    @property
    def e_theta(self) -> float:
        return self.R / (self.gamma - 1.0)

    @property
    def stable_rate(self) -> float:
        """Decay rate of w1 at the base state, rho0 p_rho / nu"""
        return float(self.rho0 * self.R * self.theta0 / self.viscosity(self.rho0))

    def to_dict(self) -> Dict[str, Any]:
        out = {'R': self.R, 'gamma': self.gamma, 'rho0': self.rho0, 'theta0': self.theta0}
        for name in ('nu', 'k'):
            value = getattr(self, name)
            out[name] = 'callable' if callable(value) else float(value)
        return out


# ================ TRAJECTORIES ================

@dataclass
class Trajectory:
    """
    States along a grid in one time variable, ``'t'`` or ``'tau'``.
    ``other`` is the matching grid in the other variable when known.
    """

    variable: str
    grid: np.ndarray
    states: np.ndarray
    other: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.variable not in ('t', 'tau'):
            raise InvalidInputError(_('trajectory variable must be t or tau, got {!r}').format(self.variable))
        self.grid = np.asarray(self.grid, dtype=float)
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if self.states.shape[0] != self.grid.shape[0]:
            raise InvalidInputError(_('trajectory has {} states for {} grid points').format(
                self.states.shape[0], self.grid.shape[0]))

    def to_frame(self) -> pd.DataFrame:
        columns = {self.variable: self.grid}
        if self.other is not None:
            columns['tau' if self.variable == 't' else 't'] = self.other
        for j in range(self.states.shape[1]):
            columns[f'v{j + 1}'] = self.states[:, j]
        return pd.DataFrame(columns)


@dataclass(frozen=True)
class SingularHit:
    """Where the trajectory reaches the singular set"""

    t_star: Optional[float]
    tau: Optional[float]
    V: np.ndarray
    t_guard: float
    # |dV/dt| over the last steps before the guard, oldest first
    speeds: np.ndarray
    growth: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            't_star': self.t_star,
            'tau': self.tau,
            'V': self.V.tolist(),
            't_guard': self.t_guard,
            'speeds': self.speeds.tolist(),
            'growth': self.growth,
        }


@dataclass
class SingularTrajectory:
    t: np.ndarray
    tau: np.ndarray
    V: np.ndarray
    status: str
    hit: Optional[SingularHit] = None

    @property
    def t_final(self) -> float:
        return float(self.t[-1])

    def as_trajectory(self) -> Trajectory:
        return Trajectory('t', self.t, self.V, self.tau)

    def to_frame(self) -> pd.DataFrame:
        return self.as_trajectory().to_frame()

    def to_dict(self) -> Dict[str, Any]:
        return {
            'status': self.status,
            't_final': self.t_final,
            'n_points': int(self.t.size),
            'V_final': self.V[-1].tolist(),
            'hit': self.hit.to_dict() if self.hit is not None else None,
        }


# ================ SLOW MANIFOLD AND DECOMPOSITION ================

@dataclass
class SlowManifold:
    """
    Center chart of dV/dtau = F at the origin together with the reduced
    nonsingular field on its base coordinates.
    """

    chart: ManifoldChart
    reduced_field: SmoothField
    lift: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    lift_many: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    report: Optional[HypothesisReport] = field(default=None, repr=False)
    model: str = 'taylor'
    residual: float = 0.0
    max_reduced: float = 0.0

    @property
    def base_dimension(self) -> int:
        return self.chart.base_dimension

    def reduced(self, xi) -> np.ndarray:
        return self.reduced_field(xi)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'model': self.model,
            'base_dimension': self.base_dimension,
            'residual': self.residual,
            'max_reduced': self.max_reduced,
            'chart': self.chart.to_dict(),
        }


@dataclass
class SlowFastDecomposition:
    """V = V_sl + V_f + V_p along one trajectory of a singular slaving chart"""

    tau: np.ndarray
    t: Optional[np.ndarray]
    V: np.ndarray
    V_sl: np.ndarray
    V_f: np.ndarray
    V_p: np.ndarray
    rate: Optional[float]
    c: float
    residual: float
    limit: Optional[LimitReport] = None

    def norms(self) -> Dict[str, float]:
        sup = lambda arr: float(np.max(np.linalg.norm(arr, axis=1))) if arr.size else 0.0
        return {'V_sl': sup(self.V_sl), 'V_f': sup(self.V_f), 'V_p': sup(self.V_p)}

    def to_frame(self) -> pd.DataFrame:
        columns = {'tau': self.tau}
        if self.t is not None:
            columns['t'] = self.t
        d = self.V.shape[1]
        for label, arr in (('v', self.V), ('sl', self.V_sl), ('f', self.V_f), ('p', self.V_p)):
            for j in range(d):
                columns[f'{label}{j + 1}'] = arr[:, j]
        return pd.DataFrame(columns)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'rate': self.rate,
            'c': self.c,
            'residual': self.residual,
            'norms': self.norms(),
            'limit': self.limit.to_dict() if self.limit is not None else None,
        }
