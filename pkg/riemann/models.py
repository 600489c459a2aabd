"""
MODELS.PY - Envelopes, wave-fan curves and classified fans
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd


@dataclass(frozen=True)
class EnvelopeResult:
    """
    Convex (or concave) envelope of samples on a monotone grid, in the grid's
    own order. ``slopes`` and ``contact`` are per interval, ``contact_nodes``
    per node.
    """

    grid: np.ndarray
    values: np.ndarray
    envelope: np.ndarray
    slopes: np.ndarray
    contact: np.ndarray
    contact_nodes: np.ndarray
    vertices: np.ndarray
    concave: bool = False
    contact_tol: float = 0.0


@dataclass
class WaveFanCurve:
    """
    Fixed point (u, v, sigma) along the path tau from 0 to s.
    ``sigma`` is nondecreasing along the path.
    """

    family: int
    u_minus: np.ndarray
    s: float
    tau: np.ndarray
    u: np.ndarray
    v: np.ndarray
    sigma: np.ndarray
    lam: np.ndarray
    f: np.ndarray
    envelope: np.ndarray
    contact: np.ndarray
    contact_nodes: np.ndarray
    contact_tol: float = 0.0
    iterations: int = 0
    contraction_ratio: float = 0.0
    history: List[float] = field(default_factory=list)
    flux: Any = field(default=None, repr=False, compare=False)

    @property
    def N(self) -> int:
        return int(self.u.shape[1])

    @property
    def end_state(self) -> np.ndarray:
        return self.u[-1].copy()

    def to_frame(self) -> pd.DataFrame:
        columns = {'tau': self.tau}
        for j in range(self.N):
            columns[f'u{j + 1}'] = self.u[:, j]
        columns['v'] = self.v
        columns['sigma'] = self.sigma
        return pd.DataFrame(columns)


@dataclass(frozen=True)
class Rarefaction:
    start: int
    stop: int
    tau: Tuple[float, float]
    speeds: Tuple[float, float]
    left: np.ndarray
    right: np.ndarray

    kind = 'rarefaction'

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'tau': list(self.tau),
            'speeds': list(self.speeds),
            'left': self.left.tolist(),
            'right': self.right.tolist(),
        }


@dataclass(frozen=True)
class Jump:
    start: int
    stop: int
    tau: Tuple[float, float]
    speed: float
    left: np.ndarray
    right: np.ndarray
    rh_residual: float = 0.0

    kind = 'jump'

    @property
    def speeds(self) -> Tuple[float, float]:
        return (self.speed, self.speed)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'tau': list(self.tau),
            'speed': self.speed,
            'left': self.left.tolist(),
            'right': self.right.tolist(),
            'rh_residual': self.rh_residual,
        }


Segment = Union[Rarefaction, Jump]


@dataclass
class WaveFan:
    """Segments of one family's fan in order of increasing speed"""

    u_minus: np.ndarray
    segments: List[Segment]
    curve: Optional[WaveFanCurve] = field(default=None, repr=False)

    @property
    def right_state(self) -> np.ndarray:
        return self.segments[-1].right.copy() if self.segments else self.u_minus.copy()

    def to_dict(self) -> Dict[str, Any]:
        return {
            'u_minus': self.u_minus.tolist(),
            'right_state': self.right_state.tolist(),
            'segments': [seg.to_dict() for seg in self.segments],
        }
