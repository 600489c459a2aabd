"""
SERVICES.PY - Invariant-manifold charts near an equilibrium
Features:
- Cut-off nonlinearity with measured bounds
- Center charts from the weighted fixed point on [-T, T]
- Stable and uniformly stable charts from the fixed point on [0, T]
- Slaving charts over a locally invariant base chart
- Local invariance and confinement checks

Every fixed point is solved in the invariant-block coordinates of the
linearization. Convolutions use an exponential integrator with the
nonlinearity linear between grid points, so linear fields are reproduced
exactly whatever the grid spacing.
"""

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from django.utils.translation import gettext_lazy as _

from core.exceptions import InvalidInputError, NoContractionError, NoConvergenceError, NumericFailureError
from core.utils import as_vector, get_setting, jacobian_fd, require_positive
from odeint.services import dense_eval, integrate_autonomous
from spectral.models import SpectralSplit
from spectral.services import classify_spectrum

from .models import (
    CutoffNonlinearity,
    EquilibriumCurve,
    FiberDecomposition,
    InvarianceReport,
    LimitReport,
    ManifoldChart,
    SmoothField,
    WeightedTrajectory,
)
from .utils import ExponentialPropagator, box_grid, fit_decay_rate, horizon_for, weighted_sup

logger = logging.getLogger(__name__)

# tolerances for reference integrations inside the checks
REFERENCE_RTOL = 1e-11
REFERENCE_ATOL = 1e-13
# successive-change ratios exempt from the contraction test while the
# iterate leaves the linear guess
BURN_IN = 2


# ================ CUT-OFF ================

def make_cutoff(
    field: SmoothField,
    delta: float,
    profile: str = 'quintic',
    n_samples: int = 200,
    seed: int = 0,
    A: Optional[np.ndarray] = None,
) -> CutoffNonlinearity:
    """
    p_delta for the field at its equilibrium. With n_samples > 0 the bounds
    C0 = sup|p_delta|, C1 = sup|D p_delta| and C = max|p(W)|/|W|^2 are
    measured on a random cloud in |W| <= 2 delta.
    """
    delta = require_positive(delta, 'delta')
    residual = float(np.linalg.norm(field(field.equilibrium)))
    if residual > 1e-10:
        raise InvalidInputError(
            _('field does not vanish at the equilibrium (|G| = {:.3e})').format(residual),
            {'residual': residual},
        )
    A = field.linearization() if A is None else np.asarray(A, dtype=float)
    cutoff = CutoffNonlinearity(field, A, delta, profile)
    if n_samples <= 0:
        return cutoff

    rng = np.random.default_rng(seed)
    d = field.dimension
    directions = rng.standard_normal((n_samples, d))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    radii = 2.0 * delta * rng.uniform(0.0, 1.0, n_samples) ** (1.0 / d)
    cloud = directions[radii > 0] * radii[radii > 0][:, None]

    norms = np.linalg.norm(cloud, axis=1)
    p_values = np.array([cutoff.p(w) for w in cloud])
    cutoff.quadratic_constant = float(np.max(np.linalg.norm(p_values, axis=1) / norms ** 2))
    cutoff.C0 = float(np.max(np.linalg.norm(cutoff.p_delta_many(cloud), axis=1)))
    cutoff.C1 = float(max(np.linalg.norm(jacobian_fd(cutoff.p_delta, w), 2) for w in cloud[:50]))
    logger.debug(
        f"Cut-off at delta={delta}: C0={cutoff.C0:.3e}, C1={cutoff.C1:.3e}, "
        f"C={cutoff.quadratic_constant:.3e} on {len(cloud)} samples"
    )
    return cutoff


# ================ BUILDER ================

class ChartBuilder:
    """
    Solves the weighted-space fixed points behind every chart kind for one
    field. ``stats`` accumulates over all charts built by this instance.
    Base grid points are independent and run on ``jobs`` threads; builds on
    one builder are serialised.
    """

    def __init__(
        self,
        field: SmoothField,
        split: Optional[SpectralSplit] = None,
        delta: float = 0.1,
        grid_n: Optional[int] = None,
        fp_tol: Optional[float] = None,
        max_iter: Optional[int] = None,
        base_n: Optional[int] = None,
        jobs: Optional[int] = None,
        profile: str = 'quintic',
        seed: int = 0,
    ):
        if not isinstance(field, SmoothField):
            raise InvalidInputError(_('charts need a SmoothField, got {}').format(type(field).__name__))
        self.field = field
        self.split = split if split is not None else classify_spectrum(field.linearization())
        if self.split.dimension != field.dimension:
            raise InvalidInputError(_('spectral split has dimension {}, field has {}').format(
                self.split.dimension, field.dimension))
        self.delta = require_positive(delta, 'delta')
        grid_n = int(grid_n or get_setting('MANIFOLDS', 'grid_n'))
        if grid_n < 5:
            raise InvalidInputError(_('grid_n must be at least 5, got {}').format(grid_n))
        self.grid_n = grid_n if grid_n % 2 else grid_n + 1
        self.fp_tol = require_positive(fp_tol or get_setting('MANIFOLDS', 'fp_tol'), 'fp_tol')
        self.max_iter = int(max_iter or get_setting('MANIFOLDS', 'max_iter'))
        self.base_n = int(get_setting('MANIFOLDS', 'base_n') if base_n is None else base_n)
        self.jobs = max(1, int(jobs or get_setting('MANIFOLDS', 'jobs')))
        self.profile = profile
        self.cutoff = make_cutoff(field, self.delta, profile, seed=seed, A=self.split.matrix)

        self.stats = {
            'charts': 0,
            'fixed_points': 0,
            'iterations': 0,
            'worst_ratio': 0.0,
        }
        self._stats_lock = threading.Lock()
        self._build_lock = threading.Lock()

    # ---------------- fixed-point core ----------------

    def _picard(self, update: Callable[[np.ndarray], np.ndarray], W: np.ndarray, weights: np.ndarray):
        """
        Iterate W <- update(W) until the weighted change is below fp_tol.
        The first BURN_IN ratios of successive changes are only recorded;
        after them any ratio >= 1 raises NoContractionError. Returns the
        worst ratio measured after the burn-in, or within it when the
        iteration converges first.
        """
        previous = None
        ratios = []
        for iteration in range(1, self.max_iter + 1):
            W_new = update(W)
            diff = weighted_sup(W_new - W, weights)
            if not np.isfinite(diff):
                raise NoContractionError(
                    _('fixed-point iterate became non-finite; try a smaller delta'),
                    {'iteration': iteration, 'delta': self.delta},
                )
            if previous is not None:
                ratio = diff / previous
                ratios.append(ratio)
                if ratio >= 1.0 and len(ratios) > BURN_IN:
                    logger.error(f"Fixed point stopped contracting at iteration {iteration} (ratio {ratio:.3f})")
                    raise NoContractionError(
                        _('contraction ratio {:.3f} >= 1 at iteration {}; try a smaller delta').format(ratio, iteration),
                        {'iteration': iteration, 'ratio': ratio, 'difference': diff, 'delta': self.delta},
                    )
            W = W_new
            if diff <= self.fp_tol:
                worst = float(max(ratios[BURN_IN:] or ratios or [0.0]))
                self._record(iteration, worst)
                return W, iteration, worst
            previous = diff
        raise NoContractionError(
            _('no convergence within {} iterations; try a smaller delta').format(self.max_iter),
            {'max_iter': self.max_iter, 'difference': previous, 'delta': self.delta,
             'worst_ratio': float(max(ratios, default=0.0))},
        )

    def _record(self, iterations: int, ratio: float):
        with self._stats_lock:
            self.stats['fixed_points'] += 1
            self.stats['iterations'] += iterations
            self.stats['worst_ratio'] = max(self.stats['worst_ratio'], ratio)

    def _map(self, fn: Callable, points: Sequence) -> list:
        if self.jobs > 1 and len(points) > 1:
            with ThreadPoolExecutor(max_workers=self.jobs) as executor:
                return list(executor.map(fn, points))
        return [fn(p) for p in points]

    def _tangency(self, point: Callable[[np.ndarray], np.ndarray], base_basis: np.ndarray) -> float:
        """|(I - Q Q^T) D phi(0)| with Q an orthonormal basis of the base subspace"""
        k = base_basis.shape[1]
        if k == 0:
            return 0.0
        h = 1e-3 * self.delta
        D = np.empty((self.field.dimension, k))
        for j in range(k):
            e = np.zeros(k)
            e[j] = h
            D[:, j] = (point(e) - point(-e)) / (2.0 * h)
        Q = scipy.linalg.orth(base_basis)
        return float(np.linalg.norm(D - Q @ (Q.T @ D), 2))

    def _assemble(
        self,
        kind: str,
        solve: Callable[[np.ndarray], Tuple[np.ndarray, WeightedTrajectory]],
        base_basis: np.ndarray,
        base_left: np.ndarray,
        description: str,
        meta: Dict,
        projector: Optional[Callable] = None,
        decomposer: Optional[Callable] = None,
    ) -> ManifoldChart:
        with self._build_lock:
            eq = self.field.equilibrium
            k = base_basis.shape[1]
            ratios = []

            def point(xi):
                V, trajectory = solve(np.asarray(xi, dtype=float))
                ratios.append(trajectory.contraction_ratio)
                return V

            origin = point(np.zeros(k))
            if np.linalg.norm(origin - eq) > 1e-8:
                raise NumericFailureError(
                    _('{} chart misses the equilibrium by {:.3e}').format(kind, np.linalg.norm(origin - eq)),
                    {'residual': float(np.linalg.norm(origin - eq))},
                )
            tangency = self._tangency(point, base_basis)

            axes, values = [], None
            if self.base_n > 0 and k > 0:
                axes, points = box_grid(self.delta, self.base_n, k)
                values = np.array(self._map(point, points)).reshape((self.base_n,) * k + (self.field.dimension,))

            chart = ManifoldChart(
                kind=kind,
                equilibrium=eq.copy(),
                base_basis=np.array(base_basis, dtype=float),
                base_left=np.array(base_left, dtype=float),
                delta=self.delta,
                base_description=description,
                grid_axes=axes,
                values=values,
                tangency_residual=tangency,
                contraction_ratio=float(max(ratios, default=0.0)),
                fp_tol=self.fp_tol,
                meta=dict(meta, profile=self.profile, grid_n=self.grid_n),
                solver=lambda xi: solve(np.asarray(xi, dtype=float))[0],
                projector=projector,
                decomposer=decomposer,
            )
            self.stats['charts'] += 1
            logger.info(
                f"Built {kind} chart of dimension {k} for {self.field.name or 'field'}: "
                f"tangency {tangency:.2e}, contraction {chart.contraction_ratio:.3f}"
            )
            return chart

    def _trailing_grid(self, rate: float, T: Optional[float]):
        """Grid on [0, T] with weights e^{rate t / 2}"""
        if T is None:
            T = 2.0 * math.log(max(self.delta / self.fp_tol, math.e)) / rate
        T = require_positive(T, 'T')
        grid = np.linspace(0.0, T, self.grid_n)
        return grid, np.exp(rate * grid / 2.0)

    def _stable_solver(self, cutoff: CutoffNonlinearity, split: SpectralSplit, T: Optional[float]):
        ks, ku, kc = split.dims
        rate = split.beta_minus
        grid, weights = self._trailing_grid(rate, T)
        n = grid.size
        g = grid[1] - grid[0]
        forward = ExponentialPropagator(split.block('stable'), g)
        center_back = ExponentialPropagator(split.block('center'), -g)
        unstable_back = ExponentialPropagator(split.block('unstable'), -g)
        eq = cutoff.field.equilibrium

        def solve(xs: np.ndarray):
            linear = forward.flow(xs, n, 0, 1) @ split.basis_s.T

            def update(W):
                q = cutoff.p_delta_many(W)
                out = linear + forward.convolve(q @ split.left_s.T, 0, 1) @ split.basis_s.T
                if kc:
                    out = out + center_back.convolve(q @ split.left_c.T, n - 1, -1) @ split.basis_c.T
                if ku:
                    out = out + unstable_back.convolve(q @ split.left_u.T, n - 1, -1) @ split.basis_u.T
                return out

            W, iterations, ratio = self._picard(update, linear, weights)
            return eq + W[0], WeightedTrajectory(grid, W, weights, rate / 2.0, iterations, ratio)

        return solve, {'T': float(grid[-1]), 'rate': rate}

    # ---------------- chart kinds ----------------

    def center(self, eta: Optional[float] = None, T: Optional[float] = None) -> ManifoldChart:
        split = self.split
        ks, ku, kc = split.dims
        if kc == 0:
            raise InvalidInputError(_('center space is trivial'))
        eq = self.field.equilibrium

        if ks == 0 and ku == 0:
            def identity(xi):
                return eq + split.basis_c @ xi, WeightedTrajectory(np.zeros(1), np.zeros((1, kc)), np.ones(1), 0.0)
            return self._assemble('center', identity, split.basis_c, split.left_c,
                                  'center space (whole state space)', {'T': 0.0, 'eta': 0.0})

        rates = [r for r in (split.beta_plus, split.beta_minus) if r is not None]
        if eta is None:
            eta = min(rates) / 4.0
        eta = require_positive(eta, 'eta')
        if eta >= min(rates) / 2.0:
            raise InvalidInputError(
                _('eta = {} must stay below half the smallest rate {}').format(eta, min(rates)),
                {'eta': eta, 'rates': rates},
            )
        if T is None:
            T = max(horizon_for(r, eta, self.fp_tol) for r in rates)
        T = require_positive(T, 'T')

        n = self.grid_n
        mid = n // 2
        grid = np.linspace(-T, T, n)
        grid[mid] = 0.0
        g = grid[1] - grid[0]
        weights = np.exp(-eta * np.abs(grid))
        forward = {k: ExponentialPropagator(split.block(k), g) for k in ('stable', 'center')}
        backward = {k: ExponentialPropagator(split.block(k), -g) for k in ('unstable', 'center')}

        def solve(xc: np.ndarray):
            linear_c = forward['center'].flow(xc, n, mid, 1)
            linear_c[:mid] = backward['center'].flow(xc, n, mid, -1)[:mid]
            linear = linear_c @ split.basis_c.T

            def update(W):
                q = self.cutoff.p_delta_many(W)
                qc = q @ split.left_c.T
                Ic = forward['center'].convolve(qc, mid, 1) + backward['center'].convolve(qc, mid, -1)
                out = linear + Ic @ split.basis_c.T
                if ks:
                    out = out + forward['stable'].convolve(q @ split.left_s.T, 0, 1) @ split.basis_s.T
                if ku:
                    out = out + backward['unstable'].convolve(q @ split.left_u.T, n - 1, -1) @ split.basis_u.T
                return out

            W, iterations, ratio = self._picard(update, linear, weights)
            return eq + W[mid], WeightedTrajectory(grid, W, weights, eta, iterations, ratio)

        return self._assemble('center', solve, split.basis_c, split.left_c, 'center space',
                              {'T': T, 'eta': eta})

    def stable(self, T: Optional[float] = None) -> ManifoldChart:
        if self.split.dims[0] == 0:
            raise InvalidInputError(_('stable space is trivial'))
        solve, meta = self._stable_solver(self.cutoff, self.split, T)
        return self._assemble('stable', solve, self.split.basis_s, self.split.left_s, 'stable space', meta)

    def uniformly_stable(self, curve: EquilibriumCurve, T: Optional[float] = None) -> ManifoldChart:
        """
        Base coordinates are (x_s, s): x_s in the stable basis at the
        equilibrium and s the curve parameter. Each fiber is the stable
        chart of the field re-anchored at E(s).
        """
        split = self.split
        ks = split.dims[0]
        if ks == 0:
            raise InvalidInputError(_('stable space is trivial'))
        curve.check(self.field)
        eq = self.field.equilibrium
        if np.linalg.norm(curve.at(0.0) - eq) > 1e-10:
            raise InvalidInputError(_('equilibrium curve must pass through the equilibrium at s = 0'))

        base_basis = np.column_stack([split.basis_s, curve.tangent_at(0.0)])
        solvers: Dict[float, tuple] = {}
        lock = threading.Lock()

        def fiber(s: float):
            with lock:
                cached = solvers.get(s)
            if cached is not None:
                return cached
            if s == 0.0:
                local_field, local_split, cutoff = self.field, split, self.cutoff
            else:
                local_field = self.field.shifted(curve.at(s))
                local_split = classify_spectrum(local_field.linearization())
                if local_split.dims[0] != ks:
                    raise NumericFailureError(
                        _('stable dimension changes along the curve ({} at s = {:.4g}, {} at 0)').format(
                            local_split.dims[0], s, ks),
                        {'s': s},
                    )
                cutoff = make_cutoff(local_field, self.delta, self.profile, n_samples=0, A=local_split.matrix)
            solve, _meta = self._stable_solver(cutoff, local_split, T)
            cached = (solve, local_split.left_s @ split.basis_s)
            with lock:
                solvers[s] = cached
            return cached

        def solve(xi: np.ndarray):
            stable_solve, to_local = fiber(float(xi[ks]))
            return stable_solve(to_local @ xi[:ks])

        _solve, meta = self._stable_solver(self.cutoff, split, T)
        return self._assemble('uniformly_stable', solve, base_basis, np.linalg.pinv(base_basis),
                              'stable space plus curve of equilibria', meta)

    def slaving(self, base_chart: ManifoldChart, T: Optional[float] = None,
                invariance_tol: float = 1e-6) -> ManifoldChart:
        """
        Base coordinates are (xi, x_s): xi on ``base_chart`` and x_s in the
        stable basis. Trajectories split as V = V0 + Vf + Vp with V0 on the
        base chart and Vf = e^{At} x_s.
        """
        split = self.split
        ks, ku, kc = split.dims
        if ks == 0:
            raise InvalidInputError(_('stable space is trivial'))
        if base_chart.dimension != self.field.dimension:
            raise InvalidInputError(_('base chart lives in dimension {}, field in {}').format(
                base_chart.dimension, self.field.dimension))
        report = check_local_invariance(base_chart, self.field, horizon=1.0, tol=invariance_tol)
        if not report.passed:
            logger.error(f"Base chart is not locally invariant (distance {report.max_distance:.3e})")
            raise InvalidInputError(
                _('base chart is not locally invariant (distance {:.3e})').format(report.max_distance),
                report.to_dict(),
            )

        rate = split.beta_minus
        grid, weights = self._trailing_grid(rate, T)
        n = grid.size
        g = grid[1] - grid[0]
        forward = ExponentialPropagator(split.block('stable'), g)
        center_back = ExponentialPropagator(split.block('center'), -g)
        unstable_back = ExponentialPropagator(split.block('unstable'), -g)
        k0 = base_chart.base_dimension
        eq = self.field.equilibrium
        horizon = float(grid[-1])

        def pieces(xi: np.ndarray):
            start = base_chart.evaluate(xi[:k0], exact=base_chart.solver is not None)
            slow = integrate_autonomous(self.field, start, (0.0, horizon), rtol=REFERENCE_RTOL, atol=REFERENCE_ATOL)
            V0 = dense_eval(slow, grid)
            D0 = V0 - eq
            p0 = self.cutoff.p_delta_many(D0)
            Vf = forward.flow(xi[k0:], n, 0, 1) @ split.basis_s.T

            def update(W):
                dq = self.cutoff.p_delta_many(D0 + W) - p0
                out = Vf + forward.convolve(dq @ split.left_s.T, 0, 1) @ split.basis_s.T
                if kc:
                    out = out + center_back.convolve(dq @ split.left_c.T, n - 1, -1) @ split.basis_c.T
                if ku:
                    out = out + unstable_back.convolve(dq @ split.left_u.T, n - 1, -1) @ split.basis_u.T
                return out

            W, iterations, ratio = self._picard(update, Vf, weights)
            return V0, Vf, W, WeightedTrajectory(grid, W, weights, rate / 2.0, iterations, ratio)

        def solve(xi: np.ndarray):
            V0, _Vf, W, trajectory = pieces(xi)
            return V0[0] + W[0], trajectory

        def decompose(xi: np.ndarray) -> FiberDecomposition:
            V0, Vf, W, _trajectory = pieces(np.asarray(xi, dtype=float))
            reference = integrate_autonomous(self.field, V0[0] + W[0], (0.0, horizon),
                                             rtol=REFERENCE_RTOL, atol=REFERENCE_ATOL)
            return FiberDecomposition(grid, dense_eval(reference, grid), V0, Vf, W - Vf)

        base_basis = np.column_stack([base_chart.base_basis, split.basis_s])
        return self._assemble('slaving', solve, base_basis, np.linalg.pinv(base_basis),
                              f'{base_chart.kind} chart plus stable space',
                              {'T': horizon, 'rate': rate, 'base_kind': base_chart.kind},
                              decomposer=decompose)


# ================ PUBLIC OPERATIONS ================

def _builder(field, split, delta, grid_n, fp_tol, max_iter, base_n, jobs, profile) -> ChartBuilder:
    return ChartBuilder(field, split=split, delta=delta, grid_n=grid_n, fp_tol=fp_tol, max_iter=max_iter,
                        base_n=base_n, jobs=jobs, profile=profile)


def center_chart(field: SmoothField, split: Optional[SpectralSplit] = None, delta: float = 0.1,
                 eta: Optional[float] = None, T: Optional[float] = None, grid_n: Optional[int] = None,
                 fp_tol: Optional[float] = None, max_iter: Optional[int] = None, base_n: Optional[int] = None,
                 jobs: Optional[int] = None, profile: str = 'quintic') -> ManifoldChart:
    """Center chart phi_c with pi_c phi_c(x_c) = x_c over |x_c| <= delta"""
    builder = _builder(field, split, delta, grid_n, fp_tol, max_iter, base_n, jobs, profile)
    return builder.center(eta=eta, T=T)


def stable_chart(field: SmoothField, split: Optional[SpectralSplit] = None, delta: float = 0.1,
                 T: Optional[float] = None, grid_n: Optional[int] = None, fp_tol: Optional[float] = None,
                 max_iter: Optional[int] = None, base_n: Optional[int] = None, jobs: Optional[int] = None,
                 profile: str = 'quintic') -> ManifoldChart:
    builder = _builder(field, split, delta, grid_n, fp_tol, max_iter, base_n, jobs, profile)
    return builder.stable(T=T)


def uniformly_stable_chart(field: SmoothField, equilibria: EquilibriumCurve,
                           split: Optional[SpectralSplit] = None, delta: float = 0.1,
                           T: Optional[float] = None, grid_n: Optional[int] = None,
                           fp_tol: Optional[float] = None, max_iter: Optional[int] = None,
                           base_n: Optional[int] = None, jobs: Optional[int] = None,
                           profile: str = 'quintic') -> ManifoldChart:
    builder = _builder(field, split, delta, grid_n, fp_tol, max_iter, base_n, jobs, profile)
    return builder.uniformly_stable(equilibria, T=T)


def slaving_chart(field: SmoothField, base_chart: ManifoldChart, split: Optional[SpectralSplit] = None,
                  delta: float = 0.1, T: Optional[float] = None, grid_n: Optional[int] = None,
                  fp_tol: Optional[float] = None, max_iter: Optional[int] = None, base_n: Optional[int] = None,
                  jobs: Optional[int] = None, profile: str = 'quintic',
                  invariance_tol: float = 1e-6) -> ManifoldChart:
    builder = _builder(field, split, delta, grid_n, fp_tol, max_iter, base_n, jobs, profile)
    return builder.slaving(base_chart, T=T, invariance_tol=invariance_tol)


# ================ CHECKS ================

def _probe_points(chart: ManifoldChart) -> list:
    k = chart.base_dimension
    r = chart.delta / 4.0
    points = [np.zeros(k)]
    for j in range(k):
        for sign in (1.0, -1.0):
            e = np.zeros(k)
            e[j] = sign * r
            points.append(e)
    return points


def check_local_invariance(
    chart: ManifoldChart,
    field: Callable[[np.ndarray], np.ndarray],
    horizon: Optional[float] = None,
    points: Optional[Iterable[Sequence[float]]] = None,
    n_times: int = 5,
    tol: Optional[float] = None,
) -> InvarianceReport:
    """
    Integrate the full field from chart points and measure how far the flow
    drifts from the chart surface. Samples that leave the chart domain are
    skipped.
    """
    if horizon is None:
        horizon = chart.meta.get('T', 4.0) / 4.0 if chart.kind != 'center' else 1.0
    horizon = require_positive(horizon, 'horizon')
    points = _probe_points(chart) if points is None else [as_vector(p, chart.base_dimension, 'xi') for p in points]
    exact = chart.solver is not None
    worst = 0.0
    for xi in points:
        start = chart.evaluate(xi, exact=exact)
        result = integrate_autonomous(field, start, (0.0, horizon), rtol=REFERENCE_RTOL, atol=REFERENCE_ATOL)
        for t in np.linspace(0.0, horizon, n_times)[1:]:
            V = dense_eval(result, t)
            if np.linalg.norm(chart.project(V)) > chart.delta:
                continue
            worst = max(worst, chart.distance(V))
    report = InvarianceReport(worst, len(points), horizon, 10.0 * chart.fp_tol if tol is None else tol)
    logger.debug(f"Local invariance of {chart.kind} chart: {report.max_distance:.3e} over {horizon}")
    return report


def confinement_distance(chart: ManifoldChart, states: np.ndarray) -> float:
    """Largest distance from a confined trajectory to the chart"""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    return float(max((chart.distance(V) for V in states), default=0.0))


def track_limit(
    field: Callable[[np.ndarray], np.ndarray],
    V0: Sequence[float],
    curve: EquilibriumCurve,
    horizon: float = 20.0,
    tol: float = 1e-8,
) -> LimitReport:
    """
    Integrate from V0, take the nearest point of the curve as the limit
    V_inf and fit the exponential rate of |V(t) - V_inf|.
    """
    result = integrate_autonomous(field, V0, (0.0, require_positive(horizon, 'horizon')),
                                  rtol=REFERENCE_RTOL, atol=REFERENCE_ATOL)
    s_inf, V_inf = curve.nearest(result.y_final)
    miss = float(np.linalg.norm(result.y_final - V_inf))
    if miss > tol:
        raise NoConvergenceError(
            _('trajectory is still {:.3e} away from the equilibrium curve at t = {}').format(miss, horizon),
            {'miss': miss, 'horizon': horizon, 'state': result.y_final.tolist()},
        )
    distances = np.linalg.norm(result.y - V_inf, axis=1)
    rate = fit_decay_rate(result.t, distances, floor=max(100.0 * tol, 1e-10))
    return LimitReport(V_inf, s_inf, rate, miss, result.t, distances)
