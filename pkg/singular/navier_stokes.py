"""
NAVIER_STOKES.PY - Steady compressible Navier-Stokes as a singular system

Steady one-dimensional flow of a polytropic gas with viscosity nu(rho) and
heat conduction k(rho). With w = (v_x, theta_x) the equations read, in block
form,

    v rho_x + A12 w = 0
    b w_x = A22 w + A21 rho_x

and eliminating rho_x = -(A12 w) / v then multiplying through by v leaves
dV/dx = F(V) / v with V = (rho, v, theta, w1, w2). States are stored
shifted by the base state (rho0, 0, theta0, 0, 0), so the origin is the
constant state with zero velocity.
"""

import logging
from typing import Dict

import numpy as np
from django.utils.translation import gettext_lazy as _

from core.exceptions import ReductionError
from core.utils import as_vector
from manifolds.models import EquilibriumCurve

from .models import PolytropicNSParams, SingularSystem

logger = logging.getLogger(__name__)

DIMENSION = 5
# |nu k| below this makes the viscous block b singular
B_DET_TOL = 1e-14


def _unshift(params: PolytropicNSParams, V):
    return params.rho0 + V[0], V[1], params.theta0 + V[2], V[3], V[4]


def _blocks(params: PolytropicNSParams, V):
    """Block entries at (shifted) states V of shape (5,) or (5, n)"""
    rho, v, theta, w1, w2 = _unshift(params, V)
    nu = params.viscosity(rho)
    k = params.conductivity(rho)
    nu_p = params.viscosity_prime(rho)
    k_p = params.conductivity_prime(rho)
    p = params.pressure(rho, theta)
    p_rho = params.R * theta
    p_theta = params.R * rho
    e = params.energy(theta)
    e_theta = params.e_theta

    det = np.atleast_1d(nu * k)
    if np.any(~np.isfinite(det)) or np.any(np.abs(det) < B_DET_TOL) or np.any(np.atleast_1d(nu) <= 0) \
            or np.any(np.atleast_1d(k) <= 0):
        worst = int(np.argmin(np.abs(det)))
        logger.error(f"Viscous block singular: nu*k = {det[worst]:.3e}")
        raise ReductionError(
            _('viscous block b is singular or not positive (nu k = {:.3e})').format(float(det[worst])),
            {'nu_k': float(det[worst])},
        )

    A12 = (rho, 0.0 * rho)
    A21 = (
        v ** 2 + p_rho - nu_p * w1,
        v * (0.5 * v ** 2 + e + p_rho) - k_p * w2 - nu_p * v * w1,
    )
    A22 = (
        (2.0 * rho * v, p_theta),
        (1.5 * rho * v ** 2 + rho * e + p - nu * w1, v * (rho * e_theta + p_theta)),
    )
    b = ((nu, 0.0 * nu), (nu * v, k))
    return {'A12': A12, 'A21': A21, 'A22': A22, 'b': b, 'rho': rho, 'v': v, 'w': (w1, w2)}


def _solve_b(blocks, x0, x1):
    (nu, _zero), (nu_v, k) = blocks['b']
    y0 = x0 / nu
    return y0, (x1 - nu_v * y0) / k


def block_matrices(params: PolytropicNSParams, V) -> Dict[str, np.ndarray]:
    """Blocks A12, A21, A22 and b at one shifted state, as arrays"""
    V = as_vector(V, DIMENSION, 'V')
    blocks = _blocks(params, V)
    return {
        'A11': np.array([[blocks['v']]], dtype=float),
        'A12': np.array([blocks['A12']], dtype=float),
        'A21': np.array(blocks['A21'], dtype=float).reshape(2, 1),
        'A22': np.array(blocks['A22'], dtype=float),
        'b': np.array(blocks['b'], dtype=float),
    }


def reduce_ns_steady(params: PolytropicNSParams = None, name: str = 'ns-polytropic') -> SingularSystem:
    """
    Singular system dV/dx = F(V) / v for the steady equations. The curve of
    equilibria through the origin is the velocity axis E(s) = (0, s, 0, 0, 0).
    """
    params = params or PolytropicNSParams()

    def F(V):
        blocks = _blocks(params, V)
        rho, v = blocks['rho'], blocks['v']
        w1, w2 = blocks['w']
        A12, A21, A22 = blocks['A12'], blocks['A21'], blocks['A22']
        # v rho_x = -A12 w
        rho_x_v = -(A12[0] * w1 + A12[1] * w2)
        x0 = v * (A22[0][0] * w1 + A22[0][1] * w2) + A21[0] * rho_x_v
        x1 = v * (A22[1][0] * w1 + A22[1][1] * w2) + A21[1] * rho_x_v
        y0, y1 = _solve_b(blocks, x0, x1)
        return np.stack([rho_x_v, v * w1, v * w2, y0, y1])

    def zeta(V):
        return np.asarray(V)[1]

    def grad_zeta(V):
        return np.array([0.0, 1.0, 0.0, 0.0, 0.0])

    curve = EquilibriumCurve(
        lambda s: np.array([0.0, s, 0.0, 0.0, 0.0]),
        lambda s: np.array([0.0, 1.0, 0.0, 0.0, 0.0]),
        s_range=(-0.5, 0.5),
    )
    system = SingularSystem(
        DIMENSION, F, zeta, grad_zeta,
        equilibria=curve,
        name=name,
        vectorized=True,
        meta={'params': params.to_dict(), 'coordinates': ['rho', 'v', 'theta', 'w1', 'w2'],
              'base_state': [params.rho0, 0.0, params.theta0, 0.0, 0.0]},
    )
    logger.info(
        f"Reduced steady Navier-Stokes (gamma={params.gamma}, R={params.R}); "
        f"fast rate at the base state {params.stable_rate:.4g}"
    )
    return system


def conserved_fluxes(params: PolytropicNSParams, V):
    """
    Mass, momentum and energy fluxes minus the viscous terms; constant along
    every steady solution. Works on complex states for complex-step checks.
    """
    rho, v, theta, w1, w2 = _unshift(params, V)
    p = params.pressure(rho, theta)
    e = params.energy(theta)
    nu = params.viscosity(rho)
    k = params.conductivity(rho)
    return np.stack([
        rho * v,
        rho * v ** 2 + p - nu * w1,
        v * (0.5 * rho * v ** 2 + rho * e + p) - k * w2 - nu * v * w1,
    ])
