"""
MODELS.PY - Spectral decomposition types
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

KINDS = ('stable', 'unstable', 'center')


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EigenCluster:
    """Eigenvalues merged into one numerical eigenvalue"""

    value: complex
    multiplicity: int
    kind: str
    # smallest k with dim ker (A - value I)^k == multiplicity
    chain_length: int


@dataclass(frozen=True)
class SpectralSplit:
    """
    Generalized eigenspaces of a real matrix grouped by the sign of the real
    part. ``left_*`` are the matching rows of the inverse basis matrix, so
    ``proj_s = basis_s @ left_s``.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    basis_s: np.ndarray
    basis_u: np.ndarray
    basis_c: np.ndarray
    left_s: np.ndarray
    left_u: np.ndarray
    left_c: np.ndarray
    beta_plus: Optional[float]
    beta_minus: Optional[float]
    tol_zero: float
    clusters: Tuple[EigenCluster, ...] = ()
    method: str = 'kernel-chain'
    proj_s: np.ndarray = field(init=False)
    proj_u: np.ndarray = field(init=False)
    proj_c: np.ndarray = field(init=False)

    def __post_init__(self):
        for name in ('matrix', 'basis_s', 'basis_u', 'basis_c', 'left_s', 'left_u', 'left_c'):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        eig = np.array(self.eigenvalues, dtype=complex, copy=True)
        eig.setflags(write=False)
        object.__setattr__(self, 'eigenvalues', eig)
        object.__setattr__(self, 'proj_s', _frozen(self.basis_s @ self.left_s))
        object.__setattr__(self, 'proj_u', _frozen(self.basis_u @ self.left_u))
        object.__setattr__(self, 'proj_c', _frozen(self.basis_c @ self.left_c))

    @property
    def dimension(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def dims(self) -> Tuple[int, int, int]:
        return (self.basis_s.shape[1], self.basis_u.shape[1], self.basis_c.shape[1])

    def projection(self, which: str) -> np.ndarray:
        return {'stable': self.proj_s, 'unstable': self.proj_u, 'center': self.proj_c}[which]

    def basis(self, which: str) -> np.ndarray:
        return {'stable': self.basis_s, 'unstable': self.basis_u, 'center': self.basis_c}[which]

    def left(self, which: str) -> np.ndarray:
        return {'stable': self.left_s, 'unstable': self.left_u, 'center': self.left_c}[which]

    def block(self, which: str) -> np.ndarray:
        """Matrix of A restricted to one invariant subspace, in its basis"""
        return self.left(which) @ self.matrix @ self.basis(which)

    def residuals(self) -> Dict[str, float]:
        eye = np.eye(self.dimension)
        projs = (self.proj_s, self.proj_u, self.proj_c)
        return {
            'identity': float(np.max(np.abs(sum(projs) - eye))),
            'idempotency': float(max(np.max(np.abs(p @ p - p)) for p in projs)),
            'commutation': float(max(np.max(np.abs(p @ self.matrix - self.matrix @ p)) for p in projs)),
        }

    def to_dict(self) -> Dict[str, Any]:
        s, u, c = self.dims
        return {
            'dimension': self.dimension,
            'dims': {'stable': s, 'unstable': u, 'center': c},
            'eigenvalues': [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            'beta_plus': self.beta_plus,
            'beta_minus': self.beta_minus,
            'tol_zero': self.tol_zero,
            'method': self.method,
            'clusters': [
                {'value': [float(cl.value.real), float(cl.value.imag)], 'multiplicity': cl.multiplicity,
                 'kind': cl.kind, 'chain_length': cl.chain_length}
                for cl in self.clusters
            ],
            'proj_s': self.proj_s.tolist(),
            'proj_u': self.proj_u.tolist(),
            'proj_c': self.proj_c.tolist(),
            'residuals': self.residuals(),
        }


@dataclass(frozen=True)
class MatrixExpAction:
    """exp(A t) as an operator, with the method used to form it"""

    matrix: np.ndarray
    t: float
    method: str
    # squarings a degree-13 Pade pass needs at ||A t||_1; scipy may use fewer
    squarings_estimate: int
    operator: np.ndarray

    def apply(self, v: np.ndarray) -> np.ndarray:
        if self.method == 'identity':
            return np.array(v, dtype=float, copy=True)
        return self.operator @ v


@dataclass
class DecayReport:
    """Smallest constants C making the exponential-dichotomy bounds hold on the samples"""

    C_stable: float
    C_unstable: float
    ratios: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    n_samples: int = 0

    @property
    def C(self) -> float:
        return max(self.C_stable, self.C_unstable)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'C': self.C,
            'C_stable': self.C_stable,
            'C_unstable': self.C_unstable,
            'n_samples': self.n_samples,
            'violations': self.violations,
        }
