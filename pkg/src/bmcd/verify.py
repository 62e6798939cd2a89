"""Cube constructions, measure estimation and the inequality checks.

The pipeline pieces:

* ``curvature_aligned_cube`` builds the exponential image of a coordinate
  cube spanned by the eigenvectors of the curvature form of the transport
  endpoint, so the linearized midpoint operators act diagonally on it.
* ``pushforward_raster`` / ``midpoint_raster`` estimate m(T_t(A)) and
  m(M_t(A, T(A))) by mapping lattices through the transport / midpoint maps
  and rasterizing in a normal chart at the interpolated center whose basis is
  the parallel transport of the cube basis (so box-shaped images stay grid
  aligned and the three estimates share their discretization bias).
* ``bm_check`` assembles the generalized Brunn-Minkowski report;
  ``cd_check_along_transport`` evaluates the entropy inequality along the
  constructed transport; ``counterexample_search`` runs the full violation
  pipeline over a schedule of transport scales with the cube size coupled as
  eps = lam^4.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .distortion import tau
from .eigen import jacobi_eigh
from .errors import EstimatorError, ModelError, PreconditionError
from .geodesics import (NormalChart, chart_dist, chart_exp, chart_log,
                        integrate_geodesic, orthonormal_frame, parallel_transport)
from .jacobi import reparametrized_field
from .manifold import ChartManifold
from .raster import (CELL_BUDGET, RasterMeasure, lattice_adjacent_step,
                     rasterize_points)
from .transport import (MidpointOperators, PotentialSpec, midpoint_operators,
                        transport_map)

DEFAULT_LAMBDA_SCHEDULE = (0.1, 0.07, 0.05, 0.035, 0.025)


@dataclass
class RasterBudget:
    """Lattice and grid sizes for the measure estimators."""

    samples_per_axis: int = 33
    cells_per_axis: int = 12
    theta_samples: int = 17
    quadrature_per_axis: int = 24
    refine: bool = True
    chunk: int = 2_000_000
    cell_budget: int = CELL_BUDGET
    jobs: int = 1


@dataclass
class CubeSet:
    """Exponential image of the coordinate cube [0, eps]^n at ``center``.

    ``basis`` columns are g-orthonormal at the center; the cube is the set
    {exp(sum u_i basis_i) : u in [0, eps]^n} (corner convention).
    """

    manifold: ChartManifold
    center: np.ndarray
    basis: np.ndarray
    eps: float
    chart: NormalChart = None
    eigenvalues: np.ndarray = None

    def __post_init__(self):
        if self.chart is None:
            self.chart = NormalChart(self.manifold, self.center, self.basis,
                                     use_oracles=self.manifold.oracles is not None)

    def lattice_u(self, samples):
        """Corner-inclusive lattice of the coordinate cube, shape (s^n, n)."""
        axes = [np.linspace(0.0, self.eps, samples)] * self.manifold.dim
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def points(self, samples):
        return self.chart.forward(self.lattice_u(samples))


def curvature_aligned_cube(M: ChartManifold, spec: PotentialSpec, eps) -> CubeSet:
    """Cube at x0 on the eigenbasis of the transport-endpoint curvature form.

    Eigenpairs come from the cyclic Jacobi solver, sorted by ascending
    eigenvalue with ties broken by the lexicographic order of the eigenvector
    chart components (sign-normalized).  ``eps`` must not exceed lam^4 and
    the cube must sit inside the potential's chi = 1 core.
    """
    from .transport import curvature_form

    eps = float(eps)
    lam_cap = spec.lam ** 4
    if eps <= 0 or eps > lam_cap * (1.0 + 1e-12):
        raise ModelError(f"cube size {eps:.3g} outside (0, lam^4 = {lam_cap:.3g}]")
    if eps * np.sqrt(M.dim) > spec.core_radius:
        raise ModelError("cube does not fit inside the potential core")
    y0 = transport_map(M, spec, 1.0, spec.x0)
    R = curvature_form(M, spec.x0, y0, frame=spec.chart.basis,
                       steps=spec.steps, use_oracles=spec.use_oracles)
    values, vectors = jacobi_eigh(R)
    chart_vecs = spec.chart.basis @ vectors
    order = _eigen_order(values, chart_vecs)
    values = values[order]
    chart_vecs = chart_vecs[:, order]
    for j in range(chart_vecs.shape[1]):
        col = chart_vecs[:, j]
        lead = np.nonzero(np.abs(col) > 1e-10)[0]
        if lead.size and col[lead[0]] < 0:
            chart_vecs[:, j] = -col
    cube = CubeSet(M, spec.x0.copy(), chart_vecs, eps,
                   chart=NormalChart(M, spec.x0, chart_vecs, steps=spec.steps,
                                     use_oracles=spec.use_oracles),
                   eigenvalues=values)
    return cube


def _eigen_order(values, chart_vecs):
    keys = []
    for j in range(chart_vecs.shape[1]):
        col = chart_vecs[:, j].copy()
        lead = np.nonzero(np.abs(col) > 1e-10)[0]
        if lead.size and col[lead[0]] < 0:
            col = -col
        keys.append((round(float(values[j]), 12),) + tuple(np.round(col, 12)))
    return sorted(range(len(keys)), key=lambda j: keys[j])


def _cube_to_spec_matrix(A: CubeSet, spec: PotentialSpec):
    """Coordinates change from the cube basis to the potential chart basis."""
    return np.linalg.solve(spec.chart.basis, A.basis)


def _interp_chart(M, A, spec, t):
    """Normal chart at T_t(x0) whose basis is the transported cube basis."""
    if t == 0.0:
        return A.chart, spec.x0.copy()
    velocity = (t * spec.lam) * spec.v0
    path = integrate_geodesic(M, spec.x0, velocity, steps=max(spec.steps, 64))
    z0 = transport_map(M, spec, t, spec.x0)
    if np.max(np.abs(path.points[-1] - z0)) > 1e-6:
        raise ModelError("transport of the cube center deviates from its geodesic")
    cols = [parallel_transport(M, path, A.basis[:, j])[-1] for j in range(M.dim)]
    basis = np.column_stack(cols)
    G = M.metric_at(z0)
    ortho = []
    for j in range(M.dim):
        vec = basis[:, j].copy()
        for b in ortho:
            vec -= (b @ G @ vec) * b
        vec /= np.sqrt(vec @ G @ vec)
        ortho.append(vec)
    basis = np.column_stack(ortho)
    return NormalChart(M, z0, basis, steps=spec.steps,
                       use_oracles=spec.use_oracles), z0


def pushforward_raster(M: ChartManifold, spec: PotentialSpec, t, A: CubeSet,
                       budget: RasterBudget = None) -> RasterMeasure:
    """Raster estimate of m(T_t(A)) with a Jacobian-quadrature cross check.

    The lattice image is rasterized in the transported-basis normal chart at
    T_t(x0); the cross check integrates |det dT_t| times the density ratio
    over the cube by the midpoint rule and must agree within two raster cells
    (plus the refinement slack), else :class:`EstimatorError` is raised.
    """
    budget = budget or RasterBudget()
    if not np.allclose(A.center, spec.x0):
        raise ModelError("cube must be centered at the potential base point")
    s = budget.samples_per_axis
    n = M.dim
    T = _cube_to_spec_matrix(A, spec)
    U = A.lattice_u(s)
    images = spec.transport_from_u(t, U @ T.T)
    zchart, _ = _interp_chart(M, A, spec, t)
    zeta = zchart.inverse(images)
    grid_shape = (s,) * n + (n,)
    max_step = lattice_adjacent_step(zeta.reshape(grid_shape))
    raster = rasterize_points(zchart, zeta, max_step,
                              cell_target=budget.cells_per_axis,
                              refine=budget.refine,
                              cell_budget=budget.cell_budget)
    raster.jacobian_estimate = _jacobian_measure(M, spec, t, A, zchart, budget)
    tolerance = 2.0 * raster.cell_measure * _mean_density(raster, zchart) \
        + 3.0 * raster.error_bar + 1e-12 * raster.measure
    if abs(raster.jacobian_estimate - raster.measure) > tolerance:
        raise EstimatorError(
            f"pushforward estimates disagree: raster {raster.measure:.6e} vs "
            f"jacobian {raster.jacobian_estimate:.6e} (tolerance {tolerance:.3e})")
    return raster


def _mean_density(raster, zchart):
    occupied = np.argwhere(raster.marked)
    centers = raster.origin + (occupied + 0.5) * raster.cell
    return float(np.mean(zchart.volume_density(centers)))


def _jacobian_measure(M, spec, t, A, zchart, budget, delta=1e-6):
    q = max(budget.quadrature_per_axis, 2)
    n = M.dim
    axes = [(np.arange(q) + 0.5) * (A.eps / q)] * n
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    T = _cube_to_spec_matrix(A, spec)

    def zeta_of(Ucube):
        return zchart.inverse(spec.transport_from_u(t, Ucube @ T.T))

    m = centers.shape[0]
    J = np.empty((m, n, n))
    for a in range(n):
        E = np.zeros_like(centers)
        E[:, a] = delta
        J[:, :, a] = (zeta_of(centers + E) - zeta_of(centers - E)) / (2.0 * delta)
    det = np.abs(np.linalg.det(J))
    dens = zchart.volume_density(zeta_of(centers))
    return float(np.sum(det * dens) * (A.eps / q) ** n)


def midpoint_raster(M: ChartManifold, A: CubeSet, spec: PotentialSpec, t,
                    budget: RasterBudget = None) -> RasterMeasure:
    """Raster estimate of m(M_t(A, T(A))) over the full pair lattice.

    For every pair (x, x') of cube lattice points the t-point of the geodesic
    from x to T(x') is computed and rasterized in the interpolated-center
    chart.  The covering criterion is enforced through the measured adjacent
    image steps along all 2n lattice axes.
    """
    budget = budget or RasterBudget()
    if not 0.0 < t < 1.0:
        raise ModelError("midpoint interpolation time must lie in (0, 1)")
    s = budget.samples_per_axis
    n = M.dim
    T = _cube_to_spec_matrix(A, spec)
    U = A.lattice_u(s)
    X = A.chart.forward(U)
    Y = spec.transport_from_u(1.0, U @ T.T)
    zchart, _ = _interp_chart(M, A, spec, t)

    m_x = X.shape[0]
    m_y = Y.shape[0]
    zeta = np.empty((m_x * m_y, n))
    block = max(1, budget.chunk // m_y)
    for start in range(0, m_x, block):
        stop = min(start + block, m_x)
        Xb = np.repeat(X[start:stop], m_y, axis=0)
        Yb = np.tile(Y, (stop - start, 1))
        W = chart_log(M, Xb, Yb, steps=spec.steps, tol=1e-11,
                      use_oracles=spec.use_oracles)
        mid = chart_exp(M, Xb, t * W, spec.steps, spec.use_oracles)
        zeta[start * m_y:stop * m_y] = zchart.inverse(mid)
    grid_shape = (s,) * n + (s,) * n + (n,)
    max_step = lattice_adjacent_step(zeta.reshape(grid_shape))
    return rasterize_points(zchart, zeta, max_step,
                            cell_target=budget.cells_per_axis,
                            refine=budget.refine,
                            cell_budget=budget.cell_budget)


def midpoint_linearization_radius(M, A, spec, ops: MidpointOperators, t=0.5,
                                  samples=9):
    """Max distance from midpoint samples to the linearized image box.

    Distances are measured in the cube-basis normal coordinates at x0, where
    the linearized transport is z0 + M3 u with M3 diagonal; the radius decays
    like eps^2 + eps lam^4.
    """
    T = _cube_to_spec_matrix(A, spec)
    U = A.lattice_u(samples)
    X = A.chart.forward(U)
    Y = spec.transport_from_u(1.0, U @ T.T)
    m = U.shape[0]
    Xb = np.repeat(X, m, axis=0)
    Yb = np.tile(Y, (m, 1))
    W = chart_log(M, Xb, Yb, steps=spec.steps, tol=1e-11,
                  use_oracles=spec.use_oracles)
    mid = chart_exp(M, Xb, t * W, spec.steps, spec.use_oracles)
    xi = A.chart.inverse(mid)
    z0 = transport_map(M, spec, t, spec.x0)
    z0_u = A.chart.inverse(z0)
    M3_cube = T.T @ ops.M3 @ T
    mu = np.diag(M3_cube)
    if np.max(np.abs(M3_cube - np.diag(mu))) > 1e-8:
        raise ModelError("midpoint operator is not diagonal on the cube basis")
    rel = xi - z0_u
    clamp = np.where(rel < 0.0, rel, np.where(rel > mu * A.eps, rel - mu * A.eps, 0.0))
    return float(np.max(np.linalg.norm(clamp, axis=1)))


def theta(M: ChartManifold, A: CubeSet, B, K, samples=17, use_oracles=None,
          return_delta=False):
    """Extremal set distance: inf over pairs for K >= 0, sup for K < 0.

    Lattice extremum Richardson-refined once (samples -> 2 samples - 1).
    ``B`` may be a CubeSet, a point array, or a callable returning points for
    a given per-axis sample count.
    """
    if use_oracles is None:
        use_oracles = M.oracles is not None

    def b_points(s):
        if isinstance(B, CubeSet):
            return B.points(s)
        if callable(B):
            return B(s)
        return np.atleast_2d(np.asarray(B, dtype=float))

    def extremum(s):
        P = A.points(s)
        Q = b_points(s)
        best = None
        for start in range(0, P.shape[0], 4096):
            Pb = P[start:start + 4096]
            Xb = np.repeat(Pb, Q.shape[0], axis=0)
            Qb = np.tile(Q, (Pb.shape[0], 1))
            d = chart_dist(M, Xb, Qb, use_oracles=use_oracles)
            cand = float(np.min(d) if K >= 0 else np.max(d))
            if best is None:
                best = cand
            else:
                best = min(best, cand) if K >= 0 else max(best, cand)
        return best

    t1 = extremum(samples)
    t2 = extremum(2 * samples - 1)
    refined = t2 + (t2 - t1) / 3.0
    if return_delta:
        return refined, abs(t2 - t1)
    return refined


def renyi_entropy(masses, weights, N):
    """-sum rho^{1-1/N} w for a quadrature-sampled density (sum rho w = 1)."""
    rho = np.asarray(masses, dtype=float)
    w = np.asarray(weights, dtype=float)
    if np.any(rho < 0):
        raise ModelError("density samples must be nonnegative")
    total = float(np.sum(rho * w))
    if abs(total - 1.0) > 1e-6:
        raise ModelError(f"density not normalized: integral = {total:.8f}")
    return float(-np.sum(rho ** (1.0 - 1.0 / N) * w))


@dataclass
class BMReport:
    """One Brunn-Minkowski comparison at interpolation time t."""

    t: float
    K: float
    N: float
    theta: float
    theta_err: float
    m_A: float
    m_A_err: float
    m_B: float
    m_B_err: float
    m_mid: float
    m_mid_err: float
    lhs: float
    rhs: float
    margin: float
    error_bar: float
    certified_violation: bool

    def row(self):
        return [self.t, self.K, self.N, self.theta, self.m_A, self.m_B,
                self.m_mid, self.lhs, self.rhs, self.margin, self.error_bar,
                1.0 if self.certified_violation else 0.0]

    ROW_HEADER = ("t,K,N,theta,m_A,m_B,m_mid,lhs,rhs,margin,error_bar,"
                  "certified_violation")


def bm_check(M: ChartManifold, spec: PotentialSpec, A: CubeSet, t, K, N,
             budget: RasterBudget = None) -> BMReport:
    """Check m(M_t(A, B))^{1/N} >= tau^{(1-t)}(Theta) m(A)^{1/N} + tau^{(t)}(Theta) m(B)^{1/N}.

    B = T(A) through the potential.  The margin is lhs - rhs; a certified
    violation requires margin < -3 error_bar, where the error bar folds the
    raster refinement deltas and the Theta sensitivity of the coefficients.
    """
    budget = budget or RasterBudget()
    r_A = pushforward_raster(M, spec, 0.0, A, budget)
    r_B = pushforward_raster(M, spec, 1.0, A, budget)
    r_mid = midpoint_raster(M, A, spec, t, budget)

    def b_gen(s):
        return spec.transport_from_u(1.0, A.lattice_u(s) @ _cube_to_spec_matrix(A, spec).T)

    th, th_err = theta(M, A, b_gen, K, samples=budget.theta_samples,
                       use_oracles=spec.use_oracles, return_delta=True)
    th = max(th, 0.0)
    tau_a = float(tau(1.0 - t, K, N, th))
    tau_b = float(tau(t, K, N, th))
    lhs = r_mid.measure ** (1.0 / N)
    a_pow = r_A.measure ** (1.0 / N)
    b_pow = r_B.measure ** (1.0 / N)
    rhs = tau_a * a_pow + tau_b * b_pow
    margin = lhs - rhs

    def pow_err(raster):
        if raster.measure <= 0:
            return 0.0
        return raster.measure ** (1.0 / N) * raster.error_bar / (N * raster.measure)

    dth = max(1e-6, 1e-6 * max(th, 1.0))
    slope = abs((float(tau(1.0 - t, K, N, th + dth)) - tau_a) / dth) * a_pow \
        + abs((float(tau(t, K, N, th + dth)) - tau_b) / dth) * b_pow
    error_bar = pow_err(r_mid) + tau_a * pow_err(r_A) + tau_b * pow_err(r_B) \
        + slope * th_err
    return BMReport(t, K, N, th, th_err,
                    r_A.measure, r_A.error_bar, r_B.measure, r_B.error_bar,
                    r_mid.measure, r_mid.error_bar, lhs, rhs, margin,
                    error_bar, margin < -3.0 * error_bar)


@dataclass
class InterpolationReport:
    """Distortion concavity defect along the transport geodesic."""

    lam: float
    K: float
    N: float
    D0: float
    D_half: float
    D1: float
    tau_half: float
    defect: float          # tau (D0 + D1) - D(1/2); positive past the bound
    defect_rate: float     # defect / lam^2
    ric_value: float       # modified Ricci at x0 along v0
    informational: bool    # True when the Ricci precondition does not hold


def interpolation_defect(M: ChartManifold, spec: PotentialSpec, K, N,
                         steps=256) -> InterpolationReport:
    """Evaluate D(1/2) against tau^{(1/2)}_{K,N}(lam) (D(0) + D(1)).

    D comes from the reparametrized Jacobi field seeded with alpha0 Id; the
    defect is positive (of size ~ lam^2) when the modified Ricci at x0 along
    v0 sits below K, and the report is marked informational otherwise.
    """
    if steps % 2:
        raise ModelError("interpolation defect needs an even step count")
    fld = reparametrized_field(M, spec.x0, spec.v0, spec.lam,
                               spec.alpha0 * np.eye(M.dim), N, steps=steps)
    half = steps // 2
    D0, Dh, D1 = fld.distortion[0], fld.distortion[half], fld.distortion[-1]
    tau_half = float(tau(0.5, K, N, spec.lam))
    defect = tau_half * (D0 + D1) - Dh
    ric = M.modified_ricci_at(spec.x0, N)
    ric_value = float(spec.v0 @ ric @ spec.v0)
    return InterpolationReport(spec.lam, K, N, float(D0), float(Dh), float(D1),
                               tau_half, float(defect),
                               float(defect / spec.lam ** 2), ric_value,
                               informational=ric_value >= K - 1e-6)


def cd_check_along_transport(M: ChartManifold, spec: PotentialSpec, A: CubeSet,
                             K, N, t_grid, budget: RasterBudget = None):
    """Entropy-inequality margins along the constructed transport.

    mu_0 is uniform on A, mu_1 its pushforward under T; the interpolating
    density uses the transport Jacobian.  Returns one record per t with the
    normalized margin (rhs - lhs)/|lhs| and a quadrature refinement error.
    """
    budget = budget or RasterBudget()
    q = budget.quadrature_per_axis
    records = []
    coarse = _cd_margins(M, spec, A, K, N, t_grid, q)
    fine = _cd_margins(M, spec, A, K, N, t_grid, 2 * q)
    for i, t in enumerate(t_grid):
        lhs, rhs = fine[i]
        margin = (rhs - lhs) / abs(lhs)
        margin_c = (coarse[i][1] - coarse[i][0]) / abs(coarse[i][0])
        records.append({
            "t": float(t), "lhs": lhs, "rhs": rhs, "margin": margin,
            "margin_err": abs(margin - margin_c),
        })
    return records


def _cd_margins(M, spec, A, K, N, t_grid, q, delta=1e-6):
    n = M.dim
    axes = [(np.arange(q) + 0.5) * (A.eps / q)] * n
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    T = _cube_to_spec_matrix(A, spec)
    U_psi = centers @ T.T
    du = (A.eps / q) ** n
    dens = spec.chart.volume_density(U_psi)
    mass = float(np.sum(dens) * du)
    rho0 = 1.0 / mass

    pts, grad = spec.gradient_from_u(U_psi)
    dist = spec.lam * M.norm(pts, grad)

    def jac_det(t):
        m = centers.shape[0]
        J = np.empty((m, n, n))
        for a in range(n):
            E = np.zeros_like(centers)
            E[:, a] = delta
            plus = spec.chart.inverse(spec.transport_from_u(t, (centers + E) @ T.T))
            minus = spec.chart.inverse(spec.transport_from_u(t, (centers - E) @ T.T))
            J[:, :, a] = (plus - minus) / (2.0 * delta)
        det = np.abs(np.linalg.det(J))
        img = spec.chart.inverse(spec.transport_from_u(t, U_psi))
        return det * spec.chart.volume_density(img) / dens

    jac_end = jac_det(1.0)
    out = []
    w_quad = rho0 * dens * du
    for t in t_grid:
        jt = jac_det(float(t)) if 0.0 < t < 1.0 else (
            np.ones_like(jac_end) if t == 0.0 else jac_end)
        lhs = float(-np.sum(rho0 ** (-1.0 / N) * jt ** (1.0 / N) * w_quad))
        tau_a = np.asarray(tau(1.0 - float(t), K, N, dist))
        tau_b = np.asarray(tau(float(t), K, N, dist))
        rhs = float(-np.sum((tau_a * rho0 ** (-1.0 / N)
                             + tau_b * (rho0 / jac_end) ** (-1.0 / N)) * w_quad))
        out.append((lhs, rhs))
    return out


@dataclass
class LambdaReport:
    """All pipeline measurements at one transport scale."""

    lam: float
    eps: float
    interpolation: InterpolationReport
    bm: BMReport
    m_interp: float                 # m(T_{1/2}(A))
    midpoint_ratio_minus_1: float   # m(M_1/2)^{1/N} / m(T_1/2 A)^{1/N} - 1
    control_rate: float             # ratio / (lam^4 + eps)
    mass_ratio: float               # m(T_1/2 A) / m(A)
    linearization_radius: float
    upper_bound_ok: bool            # modified Ricci stays below (K - 2 delta) lam^2

    def row(self):
        return [self.lam, self.eps, self.bm.theta, self.bm.margin,
                self.bm.error_bar, self.interpolation.defect,
                self.interpolation.defect_rate, self.midpoint_ratio_minus_1,
                self.control_rate, 1.0 if self.bm.certified_violation else 0.0]

    ROW_HEADER = ("lambda,eps,theta,margin,error_bar,defect,defect_rate,"
                  "midpoint_ratio_minus_1,control_rate,certified")


@dataclass
class CounterexampleReport:
    K: float
    N: float
    delta: float
    precondition_value: float
    precondition_threshold: float
    lambdas: list = field(default_factory=list)
    certified_lam: Optional[float] = None
    closest_margin: float = np.inf

    @property
    def certified(self):
        return self.certified_lam is not None


def run_pipeline_at_scale(M, K, N, delta, x0, v0, lam, budget,
                          use_oracles=None) -> LambdaReport:
    """One schedule point: potential, cube, defect, rasters, BM report."""
    from .transport import build_potential

    budget = budget or RasterBudget()
    spec = build_potential(M, x0, v0, N, lam, use_oracles=use_oracles)
    eps = min(lam ** 4, 0.04 * spec.r_cut)
    A = curvature_aligned_cube(M, spec, eps)
    interp = interpolation_defect(M, spec, K, N)
    ops = midpoint_operators(M, spec)
    bm = bm_check(M, spec, A, 0.5, K, N, budget)
    r_half = pushforward_raster(M, spec, 0.5, A, budget)
    ratio = (bm.m_mid / r_half.measure) ** (1.0 / N) - 1.0
    rho = midpoint_linearization_radius(M, A, spec, ops)
    samples = np.linspace(0.0, 1.0, 9)
    gamma = chart_exp(M, np.broadcast_to(spec.x0, (9, M.dim)),
                      np.outer(samples * lam, spec.v0), spec.steps,
                      spec.use_oracles)
    ric = M.modified_ricci(gamma, N)
    vals = np.einsum("i,mij,j->m", spec.v0, ric, spec.v0) * lam ** 2
    upper_ok = bool(np.all(vals < (K - 2.0 * delta) * lam ** 2 + 1e-12))
    return LambdaReport(lam, eps, interp, bm, r_half.measure, float(ratio),
                        float(ratio / (lam ** 4 + eps)),
                        float(r_half.measure / bm.m_A), rho, upper_ok)


def counterexample_search(M: ChartManifold, K, N, delta, x0, v0,
                          lambda_schedule=None, budget: RasterBudget = None,
                          use_oracles=None, full_schedule=False
                          ) -> CounterexampleReport:
    """Search the scale schedule for a certified Brunn-Minkowski violation.

    Requires the modified Ricci at (x0, v0) to sit below K - 3 delta, else
    :class:`PreconditionError`.  Stops at the first scale whose BM margin is
    below -3 error bars unless ``full_schedule`` forces the whole sweep.
    """
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    v0 = v0 / M.norm(x0, v0)
    ric = M.modified_ricci_at(x0, N)
    value = float(v0 @ ric @ v0)
    threshold = K - 3.0 * delta
    report = CounterexampleReport(K, N, delta, value, threshold)
    if value >= threshold:
        raise PreconditionError(
            f"modified Ricci value {value:.6g} at (x0, v0) does not violate "
            f"the bound {threshold:.6g}; no counterexample direction")
    schedule = tuple(lambda_schedule or DEFAULT_LAMBDA_SCHEDULE)
    for lam in schedule:
        lam_report = run_pipeline_at_scale(M, K, N, delta, x0, v0, lam,
                                           budget, use_oracles)
        report.lambdas.append(lam_report)
        if lam_report.bm.margin < report.closest_margin:
            report.closest_margin = lam_report.bm.margin
        if lam_report.bm.certified_violation and report.certified_lam is None:
            report.certified_lam = lam
            if not full_schedule:
                break
    return report
