"""
SERVICES.PY - Eigenvalue classification, projections and exp(At) actions

Generalized eigenspaces are read off kernel chains of (A - lambda I)^k; when a
chain does not close at the cluster multiplicity (a numerically perturbed
Jordan block), the stable/unstable/center subspaces are taken from an ordered
real Schur form instead.
"""

import logging
import math
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from django.utils.translation import gettext_lazy as _

from core.exceptions import InvalidInputError, NumericFailureError, RangeError
from core.utils import as_square_matrix, as_vector, get_setting

from .models import KINDS, DecayReport, EigenCluster, MatrixExpAction, SpectralSplit

logger = logging.getLogger(__name__)


# ================ CLASSIFICATION ================

def _cluster_eigenvalues(eigvals: np.ndarray, tol: float) -> List[Tuple[complex, int]]:
    """Single-linkage grouping; returns (mean, multiplicity) per cluster"""
    remaining = list(eigvals)
    clusters = []
    while remaining:
        group = [remaining.pop(0)]
        grown = True
        while grown:
            grown = False
            for z in list(remaining):
                if min(abs(z - g) for g in group) <= tol:
                    group.append(z)
                    remaining.remove(z)
                    grown = True
        clusters.append((complex(np.mean(group)), len(group)))
    return clusters


def _kind(value: complex, tol_zero: float) -> str:
    if value.real < -tol_zero:
        return 'stable'
    if value.real > tol_zero:
        return 'unstable'
    return 'center'


def _kernel_chain(A: np.ndarray, value: complex, multiplicity: int, scale: float, rank_rel: float):
    """Basis of ker (A - value I)^k for the first k where its dimension reaches the multiplicity"""
    d = A.shape[0]
    if value.imag == 0.0:
        shifted = A - value.real * np.eye(d)
        power = np.eye(d)
    else:
        shifted = A - value * np.eye(d)
        power = np.eye(d, dtype=complex)
    for k in range(1, d + 1):
        power = power @ shifted
        _u, sing, vh = np.linalg.svd(power)
        rank = int(np.sum(sing > rank_rel * scale ** k))
        dim = d - rank
        if dim == multiplicity:
            return vh[rank:].conj().T, k
        if dim > multiplicity:
            return None, k
    return None, d


def _real_block(Z: np.ndarray) -> np.ndarray:
    if not np.iscomplexobj(Z):
        return Z
    return scipy.linalg.orth(np.hstack([Z.real, Z.imag]))


def _schur_basis(A: np.ndarray, kind: str, tol_zero: float) -> np.ndarray:
    predicates = {
        'stable': lambda re, im: re < -tol_zero,
        'unstable': lambda re, im: re > tol_zero,
        'center': lambda re, im: abs(re) <= tol_zero,
    }
    _T, Z, sdim = scipy.linalg.schur(A, output='real', sort=predicates[kind])
    return Z[:, :sdim]


def classify_spectrum(A, tol_zero: Optional[float] = None) -> SpectralSplit:
    """
    Split R^d into stable, unstable and center generalized eigenspaces of A.
    Eigenvalues with |Re| <= tol_zero count as center (default 1e-9*||A||).
    """
    A = as_square_matrix(A, 'A')
    d = A.shape[0]
    norm = float(np.linalg.norm(A, 2))
    scale = max(norm, 1.0)
    if tol_zero is None:
        tol_zero = float(get_setting('SPECTRAL', 'tol_zero_rel')) * norm
    tol_zero = float(tol_zero)
    if not np.isfinite(tol_zero) or tol_zero < 0:
        raise InvalidInputError(_('tol_zero must be a non-negative number, got {}').format(tol_zero))
    rank_rel = float(get_setting('SPECTRAL', 'rank_rel'))
    cluster_tol = float(get_setting('SPECTRAL', 'cluster_rel')) * scale

    try:
        eigvals = scipy.linalg.eigvals(A)
    except (np.linalg.LinAlgError, ValueError) as e:
        logger.error(f"Eigenvalue solver failed on a {d}x{d} matrix: {e}")
        raise NumericFailureError(_('eigenvalue solver failed: {}').format(e), {'residual': None})
    if not np.all(np.isfinite(eigvals)):
        raise NumericFailureError(_('eigenvalue solver returned non-finite values'), {'residual': float('inf')})

    clusters = []
    bases = {kind: [] for kind in KINDS}
    method = 'kernel-chain'
    for value, mult in _cluster_eigenvalues(eigvals, cluster_tol):
        if value.imag < -cluster_tol:
            continue  # handled together with its conjugate
        if abs(value.imag) <= cluster_tol:
            value = complex(value.real, 0.0)
        kind = _kind(value, tol_zero)
        Z, chain = _kernel_chain(A, value, mult, scale, rank_rel)
        if Z is None:
            method = 'schur'
            logger.warning(f"Kernel chain did not close at {value} (multiplicity {mult}); using ordered Schur form")
            break
        block = _real_block(Z)
        is_pair = abs(value.imag) > cluster_tol
        clusters.append(EigenCluster(value, mult, kind, chain))
        if is_pair:
            clusters.append(EigenCluster(value.conjugate(), mult, kind, chain))
        bases[kind].append(block)

    if method == 'kernel-chain':
        basis = {kind: (np.hstack(bases[kind]) if bases[kind] else np.zeros((d, 0))) for kind in KINDS}
        if sum(b.shape[1] for b in basis.values()) != d:
            method = 'schur'
            logger.warning("Generalized eigenspace dimensions do not add up; using ordered Schur form")
    if method == 'schur':
        clusters = [EigenCluster(v, m, _kind(v, tol_zero), 0) for v, m in _cluster_eigenvalues(eigvals, cluster_tol)]
        basis = {kind: _schur_basis(A, kind, tol_zero) for kind in KINDS}

    T = np.hstack([basis['stable'], basis['unstable'], basis['center']])
    if T.shape[1] != d:
        raise NumericFailureError(
            _('invariant subspaces have total dimension {} instead of {}').format(T.shape[1], d),
            {'residual': float(abs(T.shape[1] - d))},
        )
    try:
        Tinv = np.linalg.inv(T)
    except np.linalg.LinAlgError as e:
        raise NumericFailureError(_('invariant subspaces are not complementary: {}').format(e),
                                  {'residual': float('inf')})
    ks, ku = basis['stable'].shape[1], basis['unstable'].shape[1]

    re = eigvals.real
    unstable = re[re > tol_zero]
    stable = -re[re < -tol_zero]

    split = SpectralSplit(
        matrix=A,
        eigenvalues=eigvals,
        basis_s=basis['stable'],
        basis_u=basis['unstable'],
        basis_c=basis['center'],
        left_s=Tinv[:ks],
        left_u=Tinv[ks:ks + ku],
        left_c=Tinv[ks + ku:],
        beta_plus=float(unstable.min()) if unstable.size else None,
        beta_minus=float(stable.min()) if stable.size else None,
        tol_zero=tol_zero,
        clusters=tuple(clusters),
        method=method,
    )
    logger.debug(f"Spectrum of {d}x{d} matrix split as (s,u,c)={split.dims} via {method}")
    return split


def project(split: SpectralSplit, which: str, v) -> np.ndarray:
    """Apply pi_s, pi_u or pi_c to v"""
    if which not in KINDS:
        raise InvalidInputError(_('unknown subspace {!r}; expected one of {}').format(which, ', '.join(KINDS)))
    v = as_vector(v, split.dimension, 'v')
    return split.projection(which) @ v


# ================ MATRIX EXPONENTIAL ================

def matrix_exp(A, t: float) -> MatrixExpAction:
    """
    exp(A t) by Pade scaling and squaring (scipy), identity short-circuit
    for t = 0 or A = 0.
    """
    A = as_square_matrix(A, 'A')
    t = float(t)
    if not np.isfinite(t):
        raise InvalidInputError(_('t must be finite'))
    if t == 0.0 or not np.any(A):
        return MatrixExpAction(A, t, 'identity', 0, np.eye(A.shape[0]))
    norm = float(np.linalg.norm(A * t, 1))
    guard = float(get_setting('SPECTRAL', 'expm_guard'))
    if norm > guard:
        raise RangeError(
            _('||A t||_1 = {:.3g} exceeds the overflow guard {:.3g}').format(norm, guard),
            {'norm': norm, 'guard': guard},
        )
    # upper estimate from theta_13 of the degree-13 Pade approximant; scipy
    # picks its own count from sharper norm estimates
    squarings_estimate = max(0, int(math.ceil(math.log2(norm / 5.371920351148152))))
    return MatrixExpAction(A, t, 'pade-scaling-squaring', squarings_estimate, scipy.linalg.expm(A * t))


def expm_action(A, t: float, v) -> np.ndarray:
    """exp(A t) v"""
    action = matrix_exp(A, t)
    v = as_vector(v, action.matrix.shape[0], 'v')
    return action.apply(v)


def linear_flow(A, times: Iterable[float], x0) -> np.ndarray:
    """Solution of x' = A x sampled at the given times"""
    return np.array([expm_action(A, t, x0) for t in times])


def restricted_propagator(split: SpectralSplit, which: str, t: float) -> np.ndarray:
    """
    exp(A t) pi_which as a d x d matrix, formed on the invariant block so the
    decaying direction never sees the growing one.
    """
    basis = split.basis(which)
    if basis.shape[1] == 0:
        return np.zeros((split.dimension, split.dimension))
    block = split.block(which)
    return basis @ scipy.linalg.expm(block * t) @ split.left(which)


# ================ DECAY ESTIMATES ================

def decay_bound_check(
    split: SpectralSplit,
    A=None,
    samples: Sequence[Tuple[float, Sequence[float]]] = (),
    C_claim: Optional[float] = None,
) -> DecayReport:
    """
    Smallest C with |e^{At} pi_u v| <= C e^{beta_+ t/2}|v| (t <= 0) and
    |e^{At} pi_s v| <= C e^{-beta_- t/2}|v| (t >= 0) over the samples.
    Samples above ``C_claim`` are listed as violations.
    """
    if A is not None and not np.array_equal(as_square_matrix(A, 'A'), split.matrix):
        raise InvalidInputError(_('matrix does not match the one the split was computed from'))
    beta_plus = split.beta_plus or 0.0
    beta_minus = split.beta_minus or 0.0
    C_s = 0.0
    C_u = 0.0
    ratios = []
    violations = []
    for t, v in samples:
        t = float(t)
        v = as_vector(v, split.dimension, 'v')
        vn = np.linalg.norm(v)
        if vn == 0.0:
            ratios.append(0.0)
            continue
        ratio = 0.0
        if t >= 0:
            lhs = np.linalg.norm(restricted_propagator(split, 'stable', t) @ v)
            ratio_s = lhs / (math.exp(-beta_minus * t / 2) * vn)
            C_s = max(C_s, ratio_s)
            ratio = max(ratio, ratio_s)
        if t <= 0:
            lhs = np.linalg.norm(restricted_propagator(split, 'unstable', t) @ v)
            ratio_u = lhs / (math.exp(beta_plus * t / 2) * vn)
            C_u = max(C_u, ratio_u)
            ratio = max(ratio, ratio_u)
        ratios.append(float(ratio))
        if C_claim is not None and ratio > C_claim:
            violations.append({'t': t, 'v': v.tolist(), 'ratio': float(ratio)})
    return DecayReport(float(C_s), float(C_u), ratios, violations, len(ratios))
