"""
UTILS.PY - Shared helpers for viscprof apps
Features:
- Settings lookup with fallback to the declared project values
- Input validation for vectors and matrices
- Finite-difference Jacobians and gradients
"""

import logging
from importlib import import_module
from typing import Any, Callable, Dict, Optional

import numpy as np
from django.conf import settings
from django.core.exceptions import ImproperlyConfigured
from django.utils.translation import gettext_lazy as _

from .exceptions import InvalidInputError

logger = logging.getLogger(__name__)


# ================ SETTINGS ================

def declared_settings() -> Dict[str, Dict[str, Any]]:
    """VISCPROF as written in the project settings module, ignoring overrides"""
    module = getattr(settings, 'SETTINGS_MODULE', None)
    if not module:
        return {}
    return getattr(import_module(module), 'VISCPROF', {})


def get_setting(section: str, key: str) -> Any:
    """
    Read ``settings.VISCPROF[section][key]``. Keys missing from an overridden
    VISCPROF fall back to the value declared in the settings module.
    """
    for source in (getattr(settings, 'VISCPROF', {}), declared_settings()):
        values = source.get(section, {})
        if key in values:
            return values[key]
    raise ImproperlyConfigured(f'VISCPROF[{section!r}][{key!r}] is not set')


# ================ VALIDATION ================

def as_vector(value: Any, dim: Optional[int] = None, name: str = 'vector') -> np.ndarray:
    """
    Convert to a finite 1-d float array, checking the length if given
    """
    try:
        arr = np.atleast_1d(np.asarray(value, dtype=float))
    except (TypeError, ValueError) as e:
        raise InvalidInputError(_('{} is not numeric: {}').format(name, e))
    if arr.ndim != 1:
        raise InvalidInputError(_('{} must be one-dimensional').format(name))
    if dim is not None and arr.shape[0] != dim:
        raise InvalidInputError(
            _('{} has length {}, expected {}').format(name, arr.shape[0], dim),
            {'expected': dim, 'got': int(arr.shape[0])},
        )
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(_('{} contains non-finite entries').format(name))
    return arr


def as_square_matrix(value: Any, name: str = 'matrix') -> np.ndarray:
    try:
        arr = np.atleast_2d(np.asarray(value, dtype=float))
    except (TypeError, ValueError) as e:
        raise InvalidInputError(_('{} is not numeric: {}').format(name, e))
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidInputError(_('{} must be square, got shape {}').format(name, arr.shape))
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(_('{} contains non-finite entries').format(name))
    return arr


def require_positive(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise InvalidInputError(_('{} must be positive, got {}').format(name, value))
    return value


# ================ FINITE DIFFERENCES ================

def fd_step(point: np.ndarray) -> float:
    return 1e-6 * (1.0 + float(np.linalg.norm(point)))


def jacobian_fd(fn: Callable[[np.ndarray], np.ndarray], point: Any) -> np.ndarray:
    """
    Central finite-difference Jacobian with step 1e-6*(1+|V|)
    """
    x = np.asarray(point, dtype=float)
    h = fd_step(x)
    f0 = np.atleast_1d(np.asarray(fn(x), dtype=float))
    jac = np.empty((f0.shape[0], x.shape[0]))
    for j in range(x.shape[0]):
        e = np.zeros_like(x)
        e[j] = h
        jac[:, j] = (np.atleast_1d(fn(x + e)) - np.atleast_1d(fn(x - e))) / (2.0 * h)
    return jac


def gradient_fd(fn: Callable[[np.ndarray], float], point: Any) -> np.ndarray:
    return jacobian_fd(lambda v: np.atleast_1d(fn(v)), point)[0]


def unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0:
        raise InvalidInputError(_('cannot normalise the zero vector'))
    return v / n
