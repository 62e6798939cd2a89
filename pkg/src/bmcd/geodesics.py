"""Geodesic integration, exp/log maps, parallel transport, normal coordinates.

The integrators are fixed-step classical RK4: trajectories in this package are
short and smooth, and fixed steps keep results bit-reproducible across runs.
``chart_exp`` / ``chart_log`` are the batched work-horses; they dispatch to a
manifold's closed-form oracles when present and requested, otherwise they
integrate numerically.  The public ``exp_map`` / ``log_map`` operations are
always numeric, so tests can hold them against the oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainExitError, ModelError
from .manifold import ChartManifold

DEFAULT_STEPS = 256
LOG_TOL = 1e-9


@dataclass
class GeodesicPath:
    """Time-sampled solution of the geodesic equation on [0, 1]."""

    manifold: ChartManifold
    times: np.ndarray       # (steps+1,)
    points: np.ndarray      # (steps+1, n)
    velocities: np.ndarray  # (steps+1, n)
    v0: np.ndarray
    unit_time: bool = True

    @property
    def steps(self):
        return len(self.times) - 1

    def speed(self):
        """g-norm of the velocity at every sample."""
        return self.manifold.norm(self.points, self.velocities)

    def length(self):
        return float(np.mean(self.speed()))


def _geodesic_rhs(M, X, V):
    Gam = M.christoffel(X)
    acc = -np.einsum("mkij,mi,mj->mk", Gam, V, V)
    return V, acc


def _rk4_flow(M, X, V, steps, collect=False, check_domain=True):
    h = 1.0 / steps
    xs = [X.copy()] if collect else None
    vs = [V.copy()] if collect else None
    for k in range(steps):
        ax1, av1 = _geodesic_rhs(M, X, V)
        ax2, av2 = _geodesic_rhs(M, X + 0.5 * h * ax1, V + 0.5 * h * av1)
        ax3, av3 = _geodesic_rhs(M, X + 0.5 * h * ax2, V + 0.5 * h * av2)
        ax4, av4 = _geodesic_rhs(M, X + h * ax3, V + h * av3)
        X = X + (h / 6.0) * (ax1 + 2.0 * ax2 + 2.0 * ax3 + ax4)
        V = V + (h / 6.0) * (av1 + 2.0 * av2 + 2.0 * av3 + av4)
        if check_domain:
            inside = np.all((X >= M.lo) & (X <= M.hi), axis=1)
            if not np.all(inside):
                raise DomainExitError("geodesic left the chart domain",
                                      exit_time=(k + 1) * h)
        if collect:
            xs.append(X.copy())
            vs.append(V.copy())
    if collect:
        return np.array(xs), np.array(vs)
    return X, V


def integrate_geodesic(M: ChartManifold, p, v, steps=DEFAULT_STEPS) -> GeodesicPath:
    """Solve x'' + Gam(x')x' = 0 on [0, 1] from (p, v) by RK4."""
    if steps < 8:
        raise ModelError(f"step count {steps} below minimum 8")
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    M.require_inside(p, what="geodesic start")
    xs, vs = _rk4_flow(M, p[None, :], v[None, :], steps, collect=True)
    times = np.linspace(0.0, 1.0, steps + 1)
    return GeodesicPath(M, times, xs[:, 0], vs[:, 0], v0=v.copy())


def exp_map(M: ChartManifold, p, v, steps=DEFAULT_STEPS):
    """Endpoint x(1) of the geodesic from p with initial velocity v (numeric)."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        return p.copy()
    M.require_inside(p, what="exp base point")
    X, _ = _rk4_flow(M, p[None, :], v[None, :], steps)
    return X[0]


def chart_exp(M, X, V, steps=DEFAULT_STEPS, use_oracles=True):
    """Batched exponential map; oracle-dispatched when available."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if use_oracles and M.oracles is not None and M.oracles.exp is not None:
        return M.oracles.exp(X, V)
    out, _ = _rk4_flow(M, X.copy(), V.copy(), steps)
    return out


def chart_log(M, X, Q, steps=DEFAULT_STEPS, tol=LOG_TOL, max_iter=50, use_oracles=True):
    """Batched logarithm: v with exp_x(v) = q, by Newton shooting.

    The initial guess is g(x)^{-1/2}(q - x), exact on flat charts.  The
    Jacobian of the shooting residual is a central finite difference of
    ``chart_exp``.  Raises :class:`ConvergenceError` with the worst residual
    if some point fails to reach ``tol`` within ``max_iter`` iterations.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if use_oracles and M.oracles is not None and M.oracles.log is not None:
        return M.oracles.log(X, Q)
    m, n = X.shape
    G = M.metric(X).reshape(m, n, n)
    w, U = np.linalg.eigh(G)
    inv_sqrt = np.einsum("mij,mj,mkj->mik", U, 1.0 / np.sqrt(w), U)
    V = np.einsum("mij,mj->mi", inv_sqrt, Q - X)
    delta = 1e-6
    best = np.full(m, np.inf)
    for _ in range(max_iter):
        R = chart_exp(M, X, V, steps, use_oracles=False) - Q
        res = np.linalg.norm(R, axis=1)
        best = np.minimum(best, res)
        if np.max(res) < tol:
            return V
        J = np.empty((m, n, n))
        for a in range(n):
            E = np.zeros((m, n))
            E[:, a] = delta
            plus = chart_exp(M, X, V + E, steps, use_oracles=False)
            minus = chart_exp(M, X, V - E, steps, use_oracles=False)
            J[:, :, a] = (plus - minus) / (2.0 * delta)
        try:
            step = np.linalg.solve(J, -R[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular shooting Jacobian: {exc}",
                                   residual=float(np.max(res))) from exc
        V = V + step
    R = chart_exp(M, X, V, steps, use_oracles=False) - Q
    res = np.linalg.norm(R, axis=1)
    if np.max(res) < tol:
        return V
    raise ConvergenceError("log map shooting did not converge",
                           residual=float(np.max(res)))


def log_map(M: ChartManifold, p, q, steps=DEFAULT_STEPS, tol=LOG_TOL, max_iter=50):
    """Numeric inverse of exp_map; residual below ``tol`` in chart norm."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.array_equal(p, q):
        return np.zeros_like(p)
    V = chart_log(M, p[None, :], q[None, :], steps=steps, tol=tol,
                  max_iter=max_iter, use_oracles=False)
    return V[0]


def chart_dist(M, X, Q, steps=DEFAULT_STEPS, use_oracles=True):
    """Batched geodesic distance via the g-norm of the log."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if use_oracles and M.oracles is not None and M.oracles.dist is not None:
        return M.oracles.dist(X, Q)
    V = chart_log(M, X, Q, steps=steps, use_oracles=use_oracles)
    return M.norm(X, V)


def parallel_transport(M: ChartManifold, path: GeodesicPath, w):
    """Transport w along the path: w'^k + Gam^k_ij x'^i w^j = 0, RK4 samples.

    Positions at RK4 half-steps come from the cubic Hermite midpoint of the
    stored samples, which preserves the integrator's fourth order.
    """
    w = np.asarray(w, dtype=float)
    X, V = path.points, path.velocities
    steps = path.steps
    h = 1.0 / steps
    out = np.empty_like(X)
    out[0] = w
    cur = w[None, :].copy()

    def rhs(x, wv):
        Gam = M.christoffel(x)
        return -np.einsum("kij,i,mj->mk", Gam, x_dot_holder[0], wv)

    x_dot_holder = [None]
    for k in range(steps):
        x0, x1 = X[k], X[k + 1]
        v0, v1 = V[k], V[k + 1]
        xm = 0.5 * (x0 + x1) + (h / 8.0) * (v0 - v1)
        vm = 1.5 * (x1 - x0) / h - 0.25 * (v0 + v1)

        x_dot_holder[0] = v0
        k1 = rhs(x0, cur)
        x_dot_holder[0] = vm
        k2 = rhs(xm, cur + 0.5 * h * k1)
        k3 = rhs(xm, cur + 0.5 * h * k2)
        x_dot_holder[0] = v1
        k4 = rhs(x1, cur + h * k3)
        cur = cur + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = cur[0]
    return out


def orthonormal_frame(M: ChartManifold, p, preferred_first=None):
    """Gram-Schmidt basis of T_pM w.r.t. g(p); columns are the basis vectors.

    Candidates are the optional preferred vector followed by the chart axes;
    near-dependent candidates are skipped.
    """
    p = np.asarray(p, dtype=float)
    G = M.metric_at(p)
    n = M.dim
    candidates = []
    if preferred_first is not None:
        pref = np.asarray(preferred_first, dtype=float)
        if float(pref @ G @ pref) < 1e-24:
            raise ModelError("preferred frame vector has zero g-norm")
        candidates.append(pref)
    candidates.extend(np.eye(n))
    basis = []
    for cand in candidates:
        vec = cand.astype(float).copy()
        for b in basis:
            vec -= (b @ G @ vec) * b
        norm_sq = float(vec @ G @ vec)
        if norm_sq < 1e-12:
            continue
        basis.append(vec / np.sqrt(norm_sq))
        if len(basis) == n:
            break
    if len(basis) < n:
        raise ModelError("could not complete an orthonormal frame")
    return np.column_stack(basis)


@dataclass
class NormalChart:
    """Normal coordinates at ``center``: u -> exp_center(sum u_i basis_i).

    ``basis`` columns are g-orthonormal at the center.  ``forward`` and
    ``inverse`` are batched; ``use_oracles`` selects the closed-form maps when
    the manifold carries them.
    """

    manifold: ChartManifold
    center: np.ndarray
    basis: np.ndarray          # (n, n), columns
    steps: int = DEFAULT_STEPS
    use_oracles: bool = True

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.basis = np.asarray(self.basis, dtype=float)
        self._basis_inv = np.linalg.inv(self.basis)

    def forward(self, U):
        U = np.asarray(U, dtype=float)
        single = U.ndim == 1
        Um = np.atleast_2d(U)
        V = Um @ self.basis.T
        X = np.broadcast_to(self.center, Um.shape)
        out = chart_exp(self.manifold, X, V, self.steps, self.use_oracles)
        return out[0] if single else out

    def inverse(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        Xm = np.atleast_2d(X)
        base = np.broadcast_to(self.center, Xm.shape)
        V = chart_log(self.manifold, base, Xm, steps=self.steps,
                      tol=1e-12, use_oracles=self.use_oracles)
        U = V @ self._basis_inv.T
        return U[0] if single else U

    def jacobian(self, U, delta=1e-6):
        """d(forward)/du by central differences, shape (..., n, n)."""
        U = np.asarray(U, dtype=float)
        single = U.ndim == 1
        Um = np.atleast_2d(U)
        m, n = Um.shape
        J = np.empty((m, n, n))
        for a in range(n):
            E = np.zeros_like(Um)
            E[:, a] = delta
            J[:, :, a] = (self.forward(Um + E) - self.forward(Um - E)) / (2.0 * delta)
        return J[0] if single else J

    def pullback_metric(self, U, delta=1e-6):
        """Metric in normal coordinates: J^T g(forward(u)) J."""
        U = np.asarray(U, dtype=float)
        single = U.ndim == 1
        Um = np.atleast_2d(U)
        J = self.jacobian(Um, delta)
        G = self.manifold.metric(self.forward(Um))
        out = np.einsum("mia,mij,mjb->mab", J, G, J)
        return out[0] if single else out

    def volume_density(self, U):
        """m-density in normal coordinates: e^{-V} sqrt(det pullback metric)."""
        U = np.asarray(U, dtype=float)
        single = U.ndim == 1
        Um = np.atleast_2d(U)
        pts = self.forward(Um)
        weight = np.exp(-self.manifold.weight(pts))
        ora = self.manifold.oracles
        if self.use_oracles and ora is not None and ora.normal_density is not None:
            dens = ora.normal_density(Um)
        else:
            dens = np.sqrt(np.linalg.det(self.pullback_metric(Um)))
        out = weight * dens
        return float(out[0]) if single else out


def normal_chart(M: ChartManifold, x0, basis, steps=DEFAULT_STEPS,
                 use_oracles=None, check=True) -> NormalChart:
    """Build a normal chart and audit it.

    Checks: basis Gram matrix = Id to 1e-10; pullback metric at 0 equals Id
    to 1e-8 and its first differences at 0 vanish to 1e-4.
    """
    x0 = np.asarray(x0, dtype=float)
    basis = np.asarray(basis, dtype=float)
    G = M.metric_at(x0)
    gram = basis.T @ G @ basis
    if np.max(np.abs(gram - np.eye(M.dim))) > 1e-10:
        raise ModelError("normal chart basis is not g-orthonormal at the center")
    if use_oracles is None:
        use_oracles = M.oracles is not None
    chart = NormalChart(M, x0, basis, steps=steps, use_oracles=use_oracles)
    if check:
        g0 = chart.pullback_metric(np.zeros(M.dim))
        if np.max(np.abs(g0 - np.eye(M.dim))) > 1e-8:
            raise ModelError("pullback metric at the center deviates from Id")
        h = 1e-3
        for a in range(M.dim):
            e = np.zeros(M.dim)
            e[a] = h
            dg = (chart.pullback_metric(e) - chart.pullback_metric(-e)) / (2.0 * h)
            if np.max(np.abs(dg)) > 1e-4:
                raise ModelError("pullback metric derivatives do not vanish at the center")
    return chart
