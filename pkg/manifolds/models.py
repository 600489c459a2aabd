"""
MODELS.PY - Fields, cut-off nonlinearities, trajectories and manifold charts
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from django.utils.translation import gettext_lazy as _
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import minimize_scalar

from core.exceptions import DomainError, InvalidInputError
from core.utils import as_vector, jacobian_fd

from .utils import bump, weighted_sup

logger = logging.getLogger(__name__)

CHART_KINDS = ('center', 'stable', 'uniformly_stable', 'slaving')


# ================ FIELDS ================

class SmoothField:
    """
    Autonomous vector field V' = G(V) with an equilibrium.

    With ``vectorized=True``, ``value`` must accept a (d, n) array of states
    and return (d, n); otherwise ``value_many`` loops over states.
    """

    def __init__(
        self,
        dimension: int,
        value: Callable[[np.ndarray], np.ndarray],
        jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        equilibrium=None,
        name: str = '',
        check_tol: float = 1e-10,
        vectorized: bool = False,
    ):
        self.dimension = int(dimension)
        self._value = value
        self._jacobian = jacobian
        self.name = name
        self.equilibrium = (
            np.zeros(self.dimension) if equilibrium is None else as_vector(equilibrium, self.dimension, 'equilibrium')
        )
        residual = float(np.linalg.norm(self(self.equilibrium)))
        if residual > check_tol:
            raise InvalidInputError(
                _('field does not vanish at the equilibrium (|G| = {:.3e})').format(residual),
                {'residual': residual, 'equilibrium': self.equilibrium.tolist()},
            )
        self.vectorized = vectorized

    def __call__(self, V) -> np.ndarray:
        return np.asarray(self._value(np.asarray(V, dtype=float)), dtype=float)

    def value_many(self, states: np.ndarray) -> np.ndarray:
        """G on an (n, d) array of states, returned as (n, d)"""
        states = np.asarray(states, dtype=float)
        if self.vectorized:
            return np.asarray(self._value(states.T), dtype=float).reshape(self.dimension, -1).T
        return np.array([self(v) for v in states])

    def jacobian(self, V) -> np.ndarray:
        V = np.asarray(V, dtype=float)
        if self._jacobian is not None:
            return np.asarray(self._jacobian(V), dtype=float)
        return jacobian_fd(self, V)

    def linearization(self) -> np.ndarray:
        return self.jacobian(self.equilibrium)

    def shifted(self, equilibrium) -> 'SmoothField':
        """Same field, anchored at another equilibrium"""
        return SmoothField(self.dimension, self._value, self._jacobian, equilibrium, self.name,
                           vectorized=self.vectorized)

    def time_reversed(self) -> 'SmoothField':
        value, jac = self._value, self._jacobian
        return SmoothField(
            self.dimension,
            lambda V: -np.asarray(value(V), dtype=float),
            (lambda V: -np.asarray(jac(V), dtype=float)) if jac is not None else None,
            self.equilibrium,
            f'{self.name} (reversed)',
            vectorized=self.vectorized,
        )


@dataclass
class CutoffNonlinearity:
    """
    p(W) = G(V + W) - A W in coordinates W centred at the equilibrium V,
    and p_delta(W) = p(W) rho(|W| / delta), supported in |W| <= 2 delta.
    """

    field: SmoothField
    A: np.ndarray
    delta: float
    profile: str = 'quintic'
    C0: float = 0.0
    C1: float = 0.0
    quadratic_constant: float = 0.0

    def p(self, W) -> np.ndarray:
        W = np.asarray(W, dtype=float)
        return self.field(self.field.equilibrium + W) - self.A @ W

    def p_delta(self, W) -> np.ndarray:
        W = np.asarray(W, dtype=float)
        r = np.linalg.norm(W) / self.delta
        if r >= 2.0:
            return np.zeros_like(W)
        return self.p(W) * bump(r, self.profile)

    def p_delta_many(self, W: np.ndarray) -> np.ndarray:
        """p_delta on (n, d) states"""
        r = np.linalg.norm(W, axis=1) / self.delta
        rho = bump(r, self.profile)
        active = rho > 0
        out = np.zeros_like(W)
        if np.any(active):
            Wa = W[active]
            G = self.field.value_many(self.field.equilibrium + Wa)
            out[active] = (G - Wa @ self.A.T) * rho[active][:, None]
        return out


# ================ TRAJECTORIES ================

@dataclass
class WeightedTrajectory:
    """Fixed-point trajectory on a uniform grid with its weight function"""

    grid: np.ndarray
    states: np.ndarray
    weights: np.ndarray
    eta: float
    iterations: int = 0
    contraction_ratio: float = 0.0

    def __post_init__(self):
        if self.grid.size > 1 and not np.all(np.diff(self.grid) > 0):
            raise InvalidInputError(_('trajectory grid must be strictly increasing'))

    @property
    def weighted_norm(self) -> float:
        return weighted_sup(self.states, self.weights)

    def at(self, t: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.grid - t)))
        return self.states[k]


@dataclass
class FiberDecomposition:
    """V = V0 + Vf + Vp along one trajectory of a slaving chart"""

    grid: np.ndarray
    V: np.ndarray
    V0: np.ndarray
    Vf: np.ndarray
    Vp: np.ndarray

    @property
    def residual(self) -> float:
        return float(np.max(np.abs(self.V0 + self.Vf + self.Vp - self.V)))

    def norms(self) -> Dict[str, float]:
        sup = lambda arr: float(np.max(np.linalg.norm(arr, axis=1))) if arr.size else 0.0
        return {'V0_variation': sup(self.V0 - self.V0[0]), 'Vf': sup(self.Vf), 'Vp': sup(self.Vp)}


# ================ CHARTS ================

@dataclass
class ManifoldChart:
    """
    Parameterisation phi of an invariant manifold over base coordinates xi.

    ``base_basis`` spans the base subspace in ambient (shifted) coordinates
    and ``base_left`` maps ambient displacements to xi. Grid values, when
    present, are interpolated multilinearly; ``solver`` gives exact values
    off the grid and is not serialised.
    """

    kind: str
    equilibrium: np.ndarray
    base_basis: np.ndarray
    base_left: np.ndarray
    delta: float
    base_description: str = ''
    grid_axes: List[np.ndarray] = field(default_factory=list)
    values: Optional[np.ndarray] = None
    tangency_residual: float = 0.0
    contraction_ratio: float = 0.0
    fp_tol: float = 1e-10
    meta: Dict[str, Any] = field(default_factory=dict)
    solver: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False, compare=False)
    projector: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False, compare=False)
    decomposer: Optional[Callable[[np.ndarray], FiberDecomposition]] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in CHART_KINDS:
            raise InvalidInputError(_('unknown chart kind {!r}').format(self.kind))
        self._interp = None

    @property
    def base_dimension(self) -> int:
        return int(self.base_basis.shape[1])

    @property
    def dimension(self) -> int:
        return int(self.equilibrium.shape[0])

    def _interpolator(self):
        if self._interp is None and self.values is not None and self.base_dimension > 0:
            self._interp = RegularGridInterpolator(tuple(self.grid_axes), self.values, method='linear')
        return self._interp

    def evaluate(self, xi, exact: bool = False) -> np.ndarray:
        """Ambient point phi(xi)"""
        xi = as_vector(xi, self.base_dimension, 'xi') if self.base_dimension else np.zeros(0)
        if np.linalg.norm(xi) > self.delta * (1 + 1e-12):
            raise DomainError(
                _('base point |xi| = {:.4g} outside chart radius {:.4g}').format(np.linalg.norm(xi), self.delta),
                {'xi': xi.tolist(), 'delta': self.delta},
            )
        interp = None if exact else self._interpolator()
        if interp is not None:
            return interp(xi[None, :])[0]
        if self.solver is None:
            if self.base_dimension == 0:
                return self.equilibrium.copy()
            raise DomainError(_('chart has neither grid values nor a solver'))
        return self.solver(xi)

    def project(self, V) -> np.ndarray:
        """Base coordinates of an ambient point"""
        V = as_vector(V, self.dimension, 'V')
        if self.projector is not None:
            return self.projector(V)
        return self.base_left @ (V - self.equilibrium)

    def distance(self, V) -> float:
        """Distance from V to the chart point with the same base coordinates"""
        V = as_vector(V, self.dimension, 'V')
        return float(np.linalg.norm(V - self.evaluate(self.project(V), exact=True)))

    def decompose(self, xi) -> FiberDecomposition:
        if self.decomposer is None:
            raise InvalidInputError(_('{} charts carry no fiber decomposition').format(self.kind))
        return self.decomposer(as_vector(xi, self.base_dimension, 'xi'))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'base': {
                'description': self.base_description,
                'dimension': self.base_dimension,
                'basis': self.base_basis.tolist(),
            },
            'equilibrium': self.equilibrium.tolist(),
            'delta': self.delta,
            'grid': [axis.tolist() for axis in self.grid_axes],
            'values': self.values.tolist() if self.values is not None else None,
            'tolerances': {'fp_tol': self.fp_tol},
            'tangency_residual': self.tangency_residual,
            'contraction_ratio': self.contraction_ratio,
            'meta': {k: v for k, v in self.meta.items() if isinstance(v, (int, float, str, bool, list, type(None)))},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ManifoldChart':
        basis = np.array(data['base']['basis'], dtype=float).reshape(len(data['equilibrium']), -1)
        return cls(
            kind=data['kind'],
            equilibrium=np.array(data['equilibrium'], dtype=float),
            base_basis=basis,
            base_left=np.linalg.pinv(basis) if basis.size else np.zeros((0, basis.shape[0])),
            delta=float(data['delta']),
            base_description=data['base'].get('description', ''),
            grid_axes=[np.array(axis, dtype=float) for axis in data['grid']],
            values=np.array(data['values'], dtype=float) if data['values'] is not None else None,
            tangency_residual=float(data['tangency_residual']),
            contraction_ratio=float(data['contraction_ratio']),
            fp_tol=float(data['tolerances']['fp_tol']),
            meta=dict(data.get('meta', {})),
        )


# ================ CURVES AND REPORTS ================

@dataclass
class EquilibriumCurve:
    """
    Curve s -> E(s) of equilibria through the chart's equilibrium at s = 0
    """

    point: Callable[[float], np.ndarray]
    tangent: Optional[Callable[[float], np.ndarray]] = None
    s_range: tuple = (-1.0, 1.0)

    def at(self, s: float) -> np.ndarray:
        return np.asarray(self.point(float(s)), dtype=float)

    def tangent_at(self, s: float) -> np.ndarray:
        if self.tangent is not None:
            t = np.asarray(self.tangent(float(s)), dtype=float)
        else:
            h = 1e-6 * (1.0 + abs(s))
            t = (self.at(s + h) - self.at(s - h)) / (2.0 * h)
        n = np.linalg.norm(t)
        if n == 0:
            raise InvalidInputError(_('equilibrium curve has a zero tangent at s = {}').format(s))
        return t / n

    def check(self, field_fn: Callable[[np.ndarray], np.ndarray], n: int = 21, tol: float = 1e-10) -> float:
        """Largest |G(E(s))| on n samples; raises when the curve is not made of equilibria"""
        worst = 0.0
        for s in np.linspace(self.s_range[0], self.s_range[1], n):
            residual = float(np.linalg.norm(field_fn(self.at(s))))
            if residual > tol:
                raise InvalidInputError(
                    _('curve point at s = {:.4g} is not an equilibrium (|G| = {:.3e})').format(s, residual),
                    {'s': float(s), 'residual': residual},
                )
            worst = max(worst, residual)
        return worst

    def nearest(self, V: np.ndarray):
        """(s, E(s)) minimising |V - E(s)| over s_range"""
        V = np.asarray(V, dtype=float)
        lo, hi = self.s_range
        res = minimize_scalar(lambda s: float(np.sum((V - self.at(s)) ** 2)), bounds=(lo, hi),
                              method='bounded', options={'xatol': 1e-13})
        s = float(res.x)
        return s, self.at(s)


@dataclass
class InvarianceReport:
    max_distance: float
    n_points: int
    horizon: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_distance <= self.tolerance

    def to_dict(self) -> Dict[str, Any]:
        return {
            'max_distance': self.max_distance,
            'n_points': self.n_points,
            'horizon': self.horizon,
            'tolerance': self.tolerance,
            'passed': self.passed,
        }


@dataclass
class LimitReport:
    """Where a trajectory of a uniformly stable chart ends up on the curve E"""

    V_inf: np.ndarray
    s_inf: float
    rate: Optional[float]
    miss: float
    times: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    distances: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))

    def to_dict(self) -> Dict[str, Any]:
        return {'V_inf': self.V_inf.tolist(), 's_inf': self.s_inf, 'rate': self.rate, 'miss': self.miss}
