"""
UTILS.PY - Building blocks for invariant-manifold fixed points
Features:
- Cut-off bump profiles
- Exponential-integrator convolution on a uniform grid
- Weighted norms and decay-rate fits
"""

import logging
import math
from typing import Callable, Dict, Optional

import numpy as np
import scipy.linalg
from django.utils.translation import gettext_lazy as _

from core.exceptions import InvalidInputError

logger = logging.getLogger(__name__)


# ================ BUMP PROFILES ================

def _quintic_step(x: np.ndarray) -> np.ndarray:
    return x ** 3 * (10.0 - 15.0 * x + 6.0 * x ** 2)


def _smooth_step(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide='ignore', over='ignore'):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


STEPS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    'quintic': _quintic_step,
    'smooth': _smooth_step,
}


def bump(r, profile: str = 'quintic'):
    """
    Even cut-off: 1 on |r| <= 1, 0 on |r| >= 2, monotone in between
    """
    if profile not in STEPS:
        raise InvalidInputError(_('unknown bump profile {!r}').format(profile))
    r = np.abs(np.asarray(r, dtype=float))
    x = np.clip(r - 1.0, 0.0, 1.0)
    out = 1.0 - STEPS[profile](x)
    out = np.where(r <= 1.0, 1.0, np.where(r >= 2.0, 0.0, out))
    return float(out) if out.ndim == 0 else out


# ================ CONVOLUTIONS ================

class ExponentialPropagator:
    """
    One step g of the variation-of-constants formula on an invariant block B.
    With q linear between grid points,

        I(t+g) = e^{Bg} I(t) + g phi1(Bg) q(t) + g phi2(Bg) (q(t+g) - q(t))

    is exact for the convolution integral of e^{B(t-s)} q(s).
    """

    def __init__(self, block: np.ndarray, g: float):
        m = block.shape[0]
        self.m = m
        if m == 0:
            self.E = self.F1 = self.F2 = np.zeros((0, 0))
            return
        aug = np.zeros((3 * m, 3 * m))
        aug[:m, :m] = block * g
        aug[:m, m:2 * m] = np.eye(m)
        aug[m:2 * m, 2 * m:] = np.eye(m)
        ex = scipy.linalg.expm(aug)
        self.E = ex[:m, :m]
        self.F1 = g * ex[:m, m:2 * m]
        self.F2 = g * ex[:m, 2 * m:]

    def convolve(self, q: np.ndarray, start: int, direction: int) -> np.ndarray:
        """Integral from grid[start] to every grid point reachable in ``direction``"""
        n = q.shape[0]
        out = np.zeros_like(q)
        if self.m == 0:
            return out
        k = start
        while 0 <= k + direction < n:
            j = k + direction
            out[j] = self.E @ out[k] + self.F1 @ q[k] + self.F2 @ (q[j] - q[k])
            k = j
        return out

    def flow(self, x0: np.ndarray, n: int, start: int, direction: int) -> np.ndarray:
        """e^{B (t - t_start)} x0 along the grid"""
        out = np.zeros((n, self.m))
        if self.m == 0:
            return out
        out[start] = x0
        k = start
        while 0 <= k + direction < n:
            out[k + direction] = self.E @ out[k]
            k += direction
        return out


# ================ NORMS AND FITS ================

def weighted_sup(states: np.ndarray, weights: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(states, axis=1) * weights)) if states.size else 0.0


def horizon_for(rate: Optional[float], eta: float, fp_tol: float, floor: float = 1.0) -> float:
    """T with e^{(eta - rate/2) T} <= fp_tol"""
    if rate is None:
        return floor
    gap = rate / 2.0 - eta
    if gap <= 0:
        raise InvalidInputError(_('weight rate eta={} must stay below half the spectral gap {}').format(eta, rate))
    return max(floor, math.log(1.0 / fp_tol) / gap)


def fit_decay_rate(times: np.ndarray, norms: np.ndarray, floor: float = 1e-13) -> Optional[float]:
    """Least-squares exponential rate of decay; None when there is nothing to fit"""
    mask = norms > floor
    if np.count_nonzero(mask) < 3:
        return None
    slope = np.polyfit(times[mask], np.log(norms[mask]), 1)[0]
    return float(-slope)


def box_grid(radius: float, base_n: int, dim: int):
    axes = [np.linspace(-radius, radius, base_n) for _ in range(dim)]
    mesh = np.meshgrid(*axes, indexing='ij') if dim else []
    points = np.stack([m.ravel() for m in mesh], axis=1) if dim else np.zeros((1, 0))
    return axes, points
