"""
MODELS.PY - Flux functions, the augmented traveling-wave field and profiles
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np
import pandas as pd
from django.utils.translation import gettext_lazy as _

from core.exceptions import HyperbolicityError, InvalidInputError
from core.utils import as_vector, jacobian_fd
from manifolds.models import SmoothField

logger = logging.getLogger(__name__)


# ================ FLUX ================

@dataclass(frozen=True)
class EigenData:
    """Eigenvalues in increasing order with unit right and dual left eigenvectors (columns / rows)"""

    values: np.ndarray
    right: np.ndarray
    left: np.ndarray

    def r(self, i: int) -> np.ndarray:
        return self.right[:, i - 1]

    def l(self, i: int) -> np.ndarray:
        return self.left[i - 1]

    def lam(self, i: int) -> float:
        return float(self.values[i - 1])


class FluxSystem:
    """
    Flux f of u_t + f(u)_x = eps u_xx on R^N.

    Right eigenvectors are normalised to unit length with their largest
    component positive, so they vary continuously with u away from ties.
    """

    def __init__(
        self,
        N: int,
        f: Callable[[np.ndarray], np.ndarray],
        Df: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        name: str = '',
        is_linear: bool = False,
        imag_tol: float = 1e-10,
        gap_tol: float = 1e-8,
    ):
        self.N = int(N)
        if self.N < 1:
            raise InvalidInputError(_('flux dimension must be positive'))
        self._f = f
        self._Df = Df
        self.name = name
        self.is_linear = is_linear
        self.imag_tol = imag_tol
        self.gap_tol = gap_tol

    def __call__(self, u) -> np.ndarray:
        return np.atleast_1d(np.asarray(self._f(np.asarray(u, dtype=float)), dtype=float))

    def jacobian(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self._Df is not None:
            return np.atleast_2d(np.asarray(self._Df(u), dtype=float))
        return jacobian_fd(self, u)

    def eigen_data(self, u) -> EigenData:
        u = as_vector(u, self.N, 'u')
        J = self.jacobian(u)
        values, vectors = np.linalg.eig(J)
        scale = max(1.0, float(np.max(np.abs(values))))
        if np.max(np.abs(values.imag)) > self.imag_tol * scale:
            raise HyperbolicityError(
                _('flux Jacobian has complex eigenvalues at u = {}').format(u.tolist()),
                {'u': u.tolist(), 'eigenvalues': [[float(z.real), float(z.imag)] for z in values]},
            )
        order = np.argsort(values.real)
        values = values.real[order]
        vectors = vectors.real[:, order]
        if self.N > 1 and np.min(np.diff(values)) <= self.gap_tol * scale:
            raise HyperbolicityError(
                _('flux Jacobian has repeated eigenvalues at u = {}').format(u.tolist()),
                {'u': u.tolist(), 'eigenvalues': values.tolist()},
            )
        vectors = vectors / np.linalg.norm(vectors, axis=0)
        for j in range(self.N):
            k = int(np.argmax(np.abs(vectors[:, j])))
            if vectors[k, j] < 0:
                vectors[:, j] = -vectors[:, j]
        return EigenData(values, vectors, np.linalg.inv(vectors))


# ================ AUGMENTED SYSTEM ================

class TravelingWaveSystem:
    """
    V = (U, p, sigma) with V' = G(V) = (p, (Df(U) - sigma I) p, 0) around
    the equilibrium (u_bar, 0, lambda_i(u_bar)).
    """

    def __init__(self, flux: FluxSystem, u_bar, i: int):
        self.flux = flux
        self.N = flux.N
        if not 1 <= int(i) <= self.N:
            raise InvalidInputError(_('family index must be in 1..{}, got {}').format(self.N, i))
        self.i = int(i)
        self.u_bar = as_vector(u_bar, self.N, 'u_bar')
        self.eigen = flux.eigen_data(self.u_bar)
        self.sigma_bar = self.eigen.lam(self.i)
        self.r_i = self.eigen.r(self.i)
        self.l_i = self.eigen.l(self.i)
        self.dimension = 2 * self.N + 1
        self.equilibrium = np.concatenate([self.u_bar, np.zeros(self.N), [self.sigma_bar]])
        self.field = SmoothField(
            self.dimension,
            self.value,
            self.jacobian,
            self.equilibrium,
            name=f'{flux.name or "flux"} traveling waves, family {self.i}',
        )

    def unpack(self, V):
        N = self.N
        return V[:N], V[N:2 * N], float(V[2 * N])

    def value(self, V: np.ndarray) -> np.ndarray:
        U, p, sigma = self.unpack(V)
        return np.concatenate([p, self.flux.jacobian(U) @ p - sigma * p, [0.0]])

    def jacobian(self, V: np.ndarray) -> np.ndarray:
        N = self.N
        U, p, sigma = self.unpack(V)
        J = np.zeros((self.dimension, self.dimension))
        J[:N, N:2 * N] = np.eye(N)
        if np.any(p):
            J[N:2 * N, :N] = jacobian_fd(lambda u: self.flux.jacobian(u) @ p, U)
        J[N:2 * N, N:2 * N] = self.flux.jacobian(U) - sigma * np.eye(N)
        J[N:2 * N, 2 * N] = -p
        return J

    def expected_jacobian(self) -> np.ndarray:
        """Block form at the equilibrium: (0 | I | 0; 0 | Df - lambda_i I | 0; 0 row)"""
        N = self.N
        J = np.zeros((self.dimension, self.dimension))
        J[:N, N:2 * N] = np.eye(N)
        J[N:2 * N, N:2 * N] = self.flux.jacobian(self.u_bar) - self.sigma_bar * np.eye(N)
        return J

    def center_vector(self, U, a: float, sigma: float) -> np.ndarray:
        """Ambient displacement (U - u_bar, a r_i, sigma - sigma_bar) of the center space"""
        return np.concatenate([np.asarray(U, dtype=float) - self.u_bar, a * self.r_i, [sigma - self.sigma_bar]])


# ================ PROFILES ================

@dataclass
class Profile:
    """
    Viscous profile sampled on an increasing y grid. ``evaluate`` uses the
    integrator's dense output inside the integrated range and decays
    exponentially to the end states beyond it.
    """

    kind: str
    y: np.ndarray
    U: np.ndarray
    p: np.ndarray
    u_minus: np.ndarray
    u_plus: np.ndarray
    sigma: Optional[float] = None
    rates: Dict[str, Optional[float]] = field(default_factory=dict)
    residual: float = 0.0
    meta: Dict[str, Any] = field(default_factory=dict)
    dense: Optional[Callable[[float], np.ndarray]] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.y.size > 1 and not np.all(np.diff(self.y) > 0):
            raise InvalidInputError(_('profile grid must be strictly increasing'))

    @property
    def N(self) -> int:
        return int(self.U.shape[1])

    @staticmethod
    def _tail(limit: np.ndarray, edge: np.ndarray, rate: Optional[float], gap: float) -> np.ndarray:
        # exponential approach to the end state past the integrated range
        if gap <= 0:
            return edge.copy()
        if rate is None or rate <= 0:
            return limit.copy()
        return limit + (edge - limit) * np.exp(-rate * gap)

    def evaluate(self, y: float) -> np.ndarray:
        y = float(y)
        if y <= self.y[0]:
            return self._tail(self.u_minus, self.U[0], self.rates.get('minus'), self.y[0] - y)
        if y >= self.y[-1]:
            return self._tail(self.u_plus, self.U[-1], self.rates.get('plus'), y - self.y[-1])
        if self.dense is not None:
            return self.dense(y)
        return np.array([np.interp(y, self.y, self.U[:, j]) for j in range(self.N)])

    def shifted(self, dy: float) -> 'Profile':
        """Same profile with y replaced by y + dy"""
        dense = self.dense
        return Profile(
            kind=self.kind,
            y=self.y + dy,
            U=self.U.copy(),
            p=self.p.copy(),
            u_minus=self.u_minus,
            u_plus=self.u_plus,
            sigma=self.sigma,
            rates=dict(self.rates),
            residual=self.residual,
            meta=dict(self.meta, shift=self.meta.get('shift', 0.0) + dy),
            dense=(lambda y: dense(y - dy)) if dense is not None else None,
        )

    def to_frame(self) -> pd.DataFrame:
        columns = {'y': self.y}
        for j in range(self.N):
            columns[f'U{j + 1}'] = self.U[:, j]
        for j in range(self.N):
            columns[f'p{j + 1}'] = self.p[:, j]
        return pd.DataFrame(columns)

    def to_dict(self) -> Dict[str, Any]:
        endpoints = {'u_minus': self.u_minus.tolist(), 'u_plus': self.u_plus.tolist()}
        if self.kind == 'boundary_layer':
            endpoints = {'u_b': self.u_minus.tolist(), 'u0': self.u_plus.tolist()}
        return {
            'kind': self.kind,
            'endpoints': endpoints,
            'sigma': self.sigma,
            'rates': self.rates,
            'residual': self.residual,
            'n_points': int(self.y.size),
            'y_range': [float(self.y[0]), float(self.y[-1])],
        }
