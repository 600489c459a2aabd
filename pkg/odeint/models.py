"""
MODELS.PY - Result types of the adaptive integrator
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np


@dataclass(frozen=True)
class Event:
    """
    Event function g(t, y). A crossing is a sign change of g between two
    accepted steps; ``direction`` > 0 keeps only rising crossings, < 0 only
    falling ones.
    """

    fn: Callable[[float, np.ndarray], float]
    terminal: bool = True
    direction: int = 0
    name: str = 'event'

    def __call__(self, t: float, y: np.ndarray) -> float:
        return self.fn(t, y)


@dataclass(frozen=True)
class EventRecord:
    name: str
    t: float
    y: np.ndarray
    terminal: bool
    # bracket left after bisection
    bracket: tuple = (0.0, 0.0)


@dataclass
class IntegrationResult:
    """
    Accepted steps of one integration.

    ``t`` and ``y`` hold the n+1 accepted states, ``h`` the n signed step
    sizes and ``dense`` the (n, d, 4) interpolation coefficients, so that on
    step k, y(t) = y[k] + h[k] * dense[k] @ (x, x**2, x**3, x**4) with
    x = (t - t[k]) / h[k]. When a terminal event fires, the last entry of
    ``t``/``y`` is the refined crossing inside the final step.
    """

    t: np.ndarray
    y: np.ndarray
    h: np.ndarray
    dense: np.ndarray
    stats: Dict[str, int] = field(default_factory=dict)
    events: List[EventRecord] = field(default_factory=list)
    terminal_event: Optional[EventRecord] = None
    status: str = 'success'

    @property
    def t_final(self) -> float:
        return float(self.t[-1])

    @property
    def y_final(self) -> np.ndarray:
        return self.y[-1]

    @property
    def n_steps(self) -> int:
        return int(self.h.shape[0])

    def to_dict(self) -> Dict[str, Any]:
        return {
            'status': self.status,
            'stats': dict(self.stats),
            't_final': self.t_final,
            'events': [
                {'name': ev.name, 't': ev.t, 'y': ev.y.tolist(), 'terminal': ev.terminal}
                for ev in self.events
            ],
        }
