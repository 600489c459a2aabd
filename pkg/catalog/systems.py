"""
SYSTEMS.PY - Registry of named systems
Features:
- Linear fields for the spectral and chart examples
- Flux functions for traveling waves, boundary layers and Riemann problems
- Singular systems: counterexamples to the hypotheses, toy models, Navier-Stokes

Every entry carries its parameter defaults, taken from the literature where
the system comes from there (gamma = 1.4 for air, a = -1 for the boundary
layer example), and a builder accepting overrides of those parameters.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List

import numpy as np
from django.utils.translation import gettext_lazy as _

from core.exceptions import InvalidInputError
from manifolds.models import EquilibriumCurve, SmoothField
from profiles.models import FluxSystem
from singular.models import PolytropicNSParams, SingularSystem
from singular.navier_stokes import reduce_ns_steady

logger = logging.getLogger(__name__)

KINDS = ('linear', 'flux', 'singular')


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    kind: str
    summary: str
    builder: Callable[..., Any] = field(repr=False, compare=False)
    defaults: Dict[str, Any] = field(default_factory=dict)
    sources: Dict[str, str] = field(default_factory=dict)

    def build(self, **overrides):
        unknown = sorted(set(overrides) - set(self.defaults))
        if unknown:
            raise InvalidInputError(
                _('unknown parameter(s) {} for system {}').format(', '.join(unknown), self.name),
                {'system': self.name, 'parameters': unknown},
            )
        params = dict(self.defaults, **{k: v for k, v in overrides.items() if v is not None})
        return self.builder(**params)

    def describe(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'kind': self.kind,
            'summary': str(self.summary),
            'defaults': dict(self.defaults),
            'sources': dict(self.sources),
        }


# ================ LINEAR FIELDS ================

EXAMPLE_3 = np.array([
    [2.0, 0.0, 0.0, 0.0],
    [0.0, -1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, -3.0],
    [0.0, 0.0, 3.0, 0.0],
])

JORDAN = np.array([[0.0, 1.0], [0.0, 0.0]])


def linear_field(A: np.ndarray, name: str = '') -> SmoothField:
    A = np.array(A, dtype=float)
    return SmoothField(A.shape[0], lambda V: A @ V, lambda V: A, name=name, vectorized=True)


def _linear_example_3():
    return linear_field(EXAMPLE_3, 'linear-example-3')


def _jordan_example():
    return linear_field(JORDAN, 'jordan-example')


# ================ FLUXES ================

def burgers_flux() -> FluxSystem:
    return FluxSystem(1, lambda u: 0.5 * u ** 2, lambda u: np.array([[u[0]]]), name='burgers')


def scalar_linear_flux(a: float = -1.0) -> FluxSystem:
    a = float(a)
    return FluxSystem(1, lambda u: a * u, lambda u: np.array([[a]]), name='scalar-linear-bl', is_linear=True)


def p_system_flux(gamma: float = 1.4, kappa: float = 1.0) -> FluxSystem:
    """
    Isentropic gas in Lagrangian coordinates, u = (specific volume, velocity),
    f(u) = (-velocity, p(volume)) with p(v) = kappa v^-gamma. Strictly
    hyperbolic for positive volume, eigenvalues -+ sqrt(-p'(v)).
    """
    gamma, kappa = float(gamma), float(kappa)
    if gamma <= 1.0 or kappa <= 0.0:
        raise InvalidInputError(_('p-system needs gamma > 1 and kappa > 0'))

    def f(u):
        return np.array([-u[1], kappa * u[0] ** -gamma])

    def Df(u):
        if u[0] <= 0.0:
            raise InvalidInputError(_('p-system volume must be positive, got {}').format(u[0]))
        return np.array([[0.0, -1.0], [-gamma * kappa * u[0] ** (-gamma - 1.0), 0.0]])

    return FluxSystem(2, f, Df, name='p-system')


# ================ SINGULAR SYSTEMS ================

def singular_fast_example() -> SingularSystem:
    """v1' = -v2 / v1, v2' = -v2: grad zeta . F = -v2 does not vanish on S"""
    return SingularSystem(
        2,
        lambda V: np.stack([-V[1], -V[1] * V[0]]),
        lambda V: np.asarray(V)[0],
        lambda V: np.array([1.0, 0.0]),
        name='singular-fast-ex',
        vectorized=True,
    )


def fast_example_closed_form(v1_0: float, v2_0: float, t):
    """(v1, v2)(t) while v1 keeps its sign; NaN past the hit time"""
    t = np.asarray(t, dtype=float)
    with np.errstate(invalid='ignore'):
        v1 = np.sign(v1_0) * np.sqrt(v1_0 ** 2 + 2.0 * v2_0 * (np.exp(-t) - 1.0))
    return v1, v2_0 * np.exp(-t)


def fast_example_hit_time(v1_0: float, v2_0: float) -> float:
    ratio = v1_0 ** 2 / (2.0 * v2_0) if v2_0 != 0 else np.inf
    return float(-np.log1p(-ratio)) if 0.0 < ratio < 1.0 else np.inf


def singular_slow_example() -> SingularSystem:
    """
    v1' = -v3, v2' = -v2 / v1, v3' = -v3. The curve of equilibria through the
    origin is the v1 axis; G = -v3 on the other branch {(0, 0, v3)}, inside S.
    """
    return SingularSystem(
        3,
        lambda V: np.stack([-V[2] * V[0], -V[1], -V[2] * V[0]]),
        lambda V: np.asarray(V)[0],
        lambda V: np.array([1.0, 0.0, 0.0]),
        equilibria=EquilibriumCurve(lambda s: np.array([s, 0.0, 0.0]), lambda s: np.array([1.0, 0.0, 0.0])),
        name='singular-slow-ex',
        vectorized=True,
    )


def rotation_toy() -> SingularSystem:
    """v1' = v2 / eps, v2' = -v1 / eps, eps' = 0: F is a rotation on the center space"""
    return SingularSystem(
        3,
        lambda V: np.stack([V[1], -V[0], 0.0 * V[2]]),
        lambda V: np.asarray(V)[2],
        lambda V: np.array([0.0, 0.0, 1.0]),
        equilibria=EquilibriumCurve(lambda s: np.array([0.0, 0.0, s]), lambda s: np.array([0.0, 0.0, 1.0])),
        name='rotation-toy',
        vectorized=True,
    )


def toy_5d(kappa: float = 0.0) -> SingularSystem:
    """
    V = (v1, v2, v3, v4, eps) with

        v1' = -5 v1,  v2' = -v2 / eps + kappa v1 v2 / eps,  (v3, v4)' = (-v4, v3),  eps' = 0

    The fast direction is v2; kappa couples it weakly to the slow v1.
    """
    kappa = float(kappa)
    return SingularSystem(
        5,
        lambda V: np.stack([-5.0 * V[0] * V[4], -V[1] + kappa * V[0] * V[1], -V[3] * V[4], V[2] * V[4],
                            0.0 * V[4]]),
        lambda V: np.asarray(V)[4],
        lambda V: np.array([0.0, 0.0, 0.0, 0.0, 1.0]),
        equilibria=EquilibriumCurve(lambda s: np.array([0.0, 0.0, 0.0, 0.0, s]),
                                    lambda s: np.array([0.0, 0.0, 0.0, 0.0, 1.0])),
        name='toy-5d',
        vectorized=True,
        meta={'kappa': kappa},
    )


def ns_polytropic(R: float = 1.0, gamma: float = 1.4, nu: float = 1.0, k: float = 1.0,
                  rho0: float = 1.0, theta0: float = 1.0) -> SingularSystem:
    return reduce_ns_steady(PolytropicNSParams(R=R, gamma=gamma, nu=nu, k=k, rho0=rho0, theta0=theta0))


# ================ REGISTRY ================

REGISTRY: Dict[str, CatalogEntry] = {
    entry.name: entry for entry in (
        CatalogEntry(
            'burgers', 'flux', _('Inviscid Burgers flux f(u) = u^2 / 2'),
            burgers_flux,
            sources={'shock profile': 'U(y) = -tanh(y / 2) for u- = 1, u+ = -1, sigma = 0'},
        ),
        CatalogEntry(
            'linear-example-3', 'linear', _('4x4 linear field with eigenvalues 2, -1 and +-3i'),
            _linear_example_3,
            sources={'solution': '(e^{2t} x, e^{-t} y, rotation by 3t of (w, z))'},
        ),
        CatalogEntry(
            'jordan-example', 'linear', _('Nilpotent Jordan block x\' = y, y\' = 0'),
            _jordan_example,
            sources={'solution': '(x + y t, y)'},
        ),
        CatalogEntry(
            'scalar-linear-bl', 'flux', _('Scalar linear flux f(u) = a u, boundary layer for a < 0'),
            scalar_linear_flux,
            defaults={'a': -1.0},
            sources={'profile': 'U(x) = (u_b - u_0) e^{a x} + u_0'},
        ),
        CatalogEntry(
            'p-system', 'flux', _('Isentropic p-system in Lagrangian coordinates, p(v) = kappa v^-gamma'),
            p_system_flux,
            defaults={'gamma': 1.4, 'kappa': 1.0},
            sources={'gamma': 'diatomic ideal gas (air)'},
        ),
        CatalogEntry(
            'singular-fast-ex', 'singular', _('Counterexample violating the fast-flux hypothesis H5'),
            singular_fast_example,
            sources={'solution': 'v1(t) = sqrt(v1(0)^2 + 2 v2(0) (e^{-t} - 1)), v2(t) = v2(0) e^{-t}'},
        ),
        CatalogEntry(
            'singular-slow-ex', 'singular', _('Counterexample violating the slow-flux hypothesis H6'),
            singular_slow_example,
            sources={'G': 'G(v1, v2, v3) = -v3'},
        ),
        CatalogEntry(
            'rotation-toy', 'singular', _('Rotation on the center space, violating H3'),
            rotation_toy,
        ),
        CatalogEntry(
            'toy-5d', 'singular', _('Five-dimensional slow/fast toy model'),
            toy_5d,
            defaults={'kappa': 0.0},
            sources={'slow manifold': '{v2 = 0}', 'center chart': '{(0, 0, v3, v4, eps)}',
                     'uniformly stable chart': '{(v1, v2, 0, 0, eps)}'},
        ),
        CatalogEntry(
            'ns-polytropic', 'singular', _('Steady compressible Navier-Stokes, polytropic gas, zeta = velocity'),
            ns_polytropic,
            defaults={'R': 1.0, 'gamma': 1.4, 'nu': 1.0, 'k': 1.0, 'rho0': 1.0, 'theta0': 1.0},
            sources={'gamma': 'diatomic ideal gas (air)', 'R, nu, k, rho0, theta0': 'nondimensional units'},
        ),
    )
}


def system_names() -> List[str]:
    return list(REGISTRY)


def get_entry(name: str) -> CatalogEntry:
    try:
        return REGISTRY[name]
    except KeyError:
        logger.error(f"Unknown catalog key {name!r}")
        raise InvalidInputError(
            _('unknown system {!r}; choose one of {}').format(name, ', '.join(REGISTRY)),
            {'system': name, 'choices': list(REGISTRY)},
        )


def build_system(name: str, **overrides):
    return get_entry(name).build(**overrides)


def describe(name: str) -> Dict[str, Any]:
    return get_entry(name).describe()
