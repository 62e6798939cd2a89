"""Potential-driven transport maps and their differentials.

The potential is defined in normal coordinates at a base point x0 as
``(u . v0 + (alpha0/2)|u|^2) chi(|u|/r_cut)`` with a C^3 polynomial bump chi
that is identically 1 on the inner half of the cutoff ball.  The trace
normalization ``n alpha0 = -(n/(N-n)) <grad V(x0), v0>`` makes the remainder
of the associated Jacobi field vanish at t = 0.  Every evaluation asserts
that the queried point sits in the chi = 1 core, so the cutoff never leaks
into results.

``transport_differential`` evaluates the covariant Hessian of
``d^2_{z_t}/2 + t lam psi`` at x by second central differences over an
orthonormal frame and cross-checks it against the direct finite-difference
Jacobian of the transport map; disagreement signals step-size or cut-locus
trouble and is raised as an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConventionError, EstimatorError, ModelError
from .geodesics import (DEFAULT_STEPS, NormalChart, chart_dist, chart_exp,
                        chart_log, normal_chart, orthonormal_frame)
from .manifold import ChartManifold

LAMBDA_DEFAULT_MAX = 0.1


def _bump(rho):
    """C^3 cutoff: 1 on [0, 1/2], 0 on [1, inf), degree-7 smoothstep between."""
    rho = np.asarray(rho, dtype=float)
    x = np.clip(2.0 * rho - 1.0, 0.0, 1.0)
    s = x ** 4 * (35.0 - 84.0 * x + 70.0 * x ** 2 - 20.0 * x ** 3)
    return 1.0 - s


def _bump_derivative(rho):
    rho = np.asarray(rho, dtype=float)
    x = np.clip(2.0 * rho - 1.0, 0.0, 1.0)
    return -2.0 * 140.0 * (x * (1.0 - x)) ** 3


@dataclass
class PotentialSpec:
    """Transport potential anchored at x0 driving mass along v0.

    ``chart`` is the normal chart at x0 whose first basis vector is v0, so the
    potential in chart coordinates is (u_1 + alpha0 |u|^2 / 2) chi(|u|/r_cut).
    """

    manifold: ChartManifold
    x0: np.ndarray
    v0: np.ndarray            # unit chart components
    N: float
    lam: float
    alpha0: float
    r_cut: float
    chart: NormalChart
    steps: int = DEFAULT_STEPS
    use_oracles: bool = True
    grad_delta: float = 1e-6

    @property
    def core_radius(self):
        return 0.5 * self.r_cut

    def _require_core(self, U):
        worst = float(np.max(np.linalg.norm(np.atleast_2d(U), axis=1)))
        if worst > self.core_radius * (1.0 + 1e-9):
            raise ModelError(
                f"queried point at normal radius {worst:.3g} leaves the "
                f"chi=1 core (radius {self.core_radius:.3g})")

    def psi_values(self, U, allow_outside_core=False):
        U = np.atleast_2d(np.asarray(U, dtype=float))
        if not allow_outside_core:
            self._require_core(U)
        r = np.linalg.norm(U, axis=1)
        quad = U[:, 0] + 0.5 * self.alpha0 * np.sum(U * U, axis=1)
        return quad * _bump(r / self.r_cut)

    def psi_grad_u(self, U, allow_outside_core=False):
        """Gradient of the potential in normal coordinates, batched."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        if not allow_outside_core:
            self._require_core(U)
        m, n = U.shape
        r = np.linalg.norm(U, axis=1)
        quad = U[:, 0] + 0.5 * self.alpha0 * np.sum(U * U, axis=1)
        chi = _bump(r / self.r_cut)
        dchi = _bump_derivative(r / self.r_cut) / self.r_cut
        grad = np.zeros((m, n))
        grad[:, 0] = 1.0
        grad += self.alpha0 * U
        grad *= chi[:, None]
        safe_r = np.where(r > 0, r, 1.0)
        grad += (quad * dchi / safe_r)[:, None] * U
        return grad

    def gradient_from_u(self, U):
        """Transport velocity field grad psi (g-gradient, chart components).

        The chart gradient is J_f^{-T} grad_u psi with J_f the forward-map
        Jacobian; the g-gradient then applies the inverse metric.
        """
        U = np.atleast_2d(np.asarray(U, dtype=float))
        Jf = self.chart.jacobian(U, self.grad_delta)
        du = self.psi_grad_u(U)
        dx = np.linalg.solve(np.swapaxes(Jf, 1, 2), du[:, :, None])[:, :, 0]
        pts = self.chart.forward(U)
        Ginv = self.manifold.inverse_metric(pts)
        return pts, np.einsum("mij,mj->mi", Ginv, dx)

    def transport_from_u(self, t, U):
        """T_t at points given by their normal coordinates, batched."""
        pts, grad = self.gradient_from_u(U)
        return chart_exp(self.manifold, pts, (t * self.lam) * grad,
                         self.steps, self.use_oracles)


def build_potential(M: ChartManifold, x0, v0, N, lam, r_cut=None,
                    lam_max=None, steps=DEFAULT_STEPS, use_oracles=None,
                    check=True) -> PotentialSpec:
    """Construct the transport potential and audit its pointwise normalization.

    ``lam`` is capped at min(0.1, 0.1 x injectivity scale) unless ``lam_max``
    overrides it; requests beyond half the injectivity scale are refused
    outright.  The audit verifies grad psi(x0) = v0, Hess psi(x0) = alpha0 Id
    and the Laplacian trace identity by finite differences to 1e-6.
    """
    n = M.dim
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    M.require_inside(x0, what="potential base point")
    norm = M.norm(x0, v0)
    if norm < 1e-12:
        raise ModelError("transport direction has zero norm")
    v0 = v0 / norm

    if N < n:
        raise ConventionError(f"effective dimension N = {N} below n = {n}")
    dV = M.weight_grad(x0)
    pairing = float(dV @ v0)
    if N == n:
        if abs(pairing) > 1e-10:
            raise ConventionError(
                "N = n requires <grad V(x0), v0> = 0; got %.3e" % pairing)
        alpha0 = 0.0
    else:
        alpha0 = -pairing / (N - n)

    inj = np.inf
    if M.oracles is not None:
        inj = M.oracles.injectivity_scale
    cap = lam_max if lam_max is not None else min(LAMBDA_DEFAULT_MAX, 0.1 * inj)
    if lam <= 0 or lam > cap or lam > 0.5 * inj:
        raise ModelError(f"transport scale {lam} outside (0, {min(cap, 0.5 * inj):.3g}]")

    if r_cut is None:
        r_cut = min(0.25 * M.domain_margin(x0), 10.0 * lam)
    if r_cut <= 0:
        raise ModelError("cutoff radius must be positive")

    if use_oracles is None:
        use_oracles = M.oracles is not None
    basis = orthonormal_frame(M, x0, preferred_first=v0)
    chart = normal_chart(M, x0, basis, steps=steps, use_oracles=use_oracles,
                         check=False)
    spec = PotentialSpec(M, x0, v0, float(N), float(lam), float(alpha0),
                         float(r_cut), chart, steps=steps, use_oracles=use_oracles)
    if check:
        _audit_conditions(spec)
    return spec


def _audit_conditions(spec, delta=1e-3, tol=1e-6):
    """Finite-difference check of the potential normalization at x0."""
    M = spec.manifold
    n = M.dim
    _, grad = spec.gradient_from_u(np.zeros((1, n)))
    if np.max(np.abs(grad[0] - spec.v0)) > tol:
        raise ModelError("potential gradient at x0 deviates from the transport direction")
    B = spec.chart.basis
    x0 = spec.x0

    def psi_at(W):
        pts = chart_exp(M, np.broadcast_to(x0, W.shape), W, spec.steps, spec.use_oracles)
        U = spec.chart.inverse(pts)
        return spec.psi_values(U)

    H = np.empty((n, n))
    probes = []
    for a in range(n):
        probes.append(delta * B[:, a])
        probes.append(-delta * B[:, a])
    for a in range(n):
        for b in range(a):
            probes.append(delta * (B[:, a] + B[:, b]))
            probes.append(-delta * (B[:, a] + B[:, b]))
            probes.append(delta * (B[:, a] - B[:, b]))
            probes.append(-delta * (B[:, a] - B[:, b]))
    probes.append(np.zeros(n))
    vals = psi_at(np.array(probes))
    idx = 0
    center = vals[-1]
    diag = []
    for a in range(n):
        plus, minus = vals[idx], vals[idx + 1]
        idx += 2
        diag.append((plus - 2.0 * center + minus) / delta ** 2)
        H[a, a] = diag[-1]
    for a in range(n):
        for b in range(a):
            pp, mm, pm, mp = vals[idx], vals[idx + 1], vals[idx + 2], vals[idx + 3]
            idx += 4
            H[a, b] = H[b, a] = (pp + mm - pm - mp) / (4.0 * delta ** 2)
    target = spec.alpha0 * np.eye(n)
    if np.max(np.abs(H - target)) > tol:
        raise ModelError(
            f"potential Hessian at x0 deviates from alpha0 Id by "
            f"{np.max(np.abs(H - target)):.3e}")
    if abs(float(np.trace(H)) - n * spec.alpha0) > n * tol:
        raise ModelError("potential Laplacian trace normalization failed")


def transport_map(M: ChartManifold, spec: PotentialSpec, t, x, u=None):
    """T_t(x) = exp_x(t lam grad psi(x)); ``u`` may supply known normal coords."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if t == 0.0:
        return x.copy() if single else X.copy()
    if u is None:
        U = spec.chart.inverse(X)
    else:
        U = np.atleast_2d(np.asarray(u, dtype=float))
    out = spec.transport_from_u(t, U)
    return out[0] if single else out


def transport_differential(M: ChartManifold, spec: PotentialSpec, t, x,
                           delta=1e-3, cross_check=True, tol=1e-4, frame=None):
    """d_x T_t as a matrix in normal coordinates at x.

    Computed from the covariant Hessian of ``d^2_{z_t}/2 + t lam psi`` by
    second central differences over an orthonormal frame at x, then verified
    against the finite-difference Jacobian of the transport map itself.
    ``frame`` fixes the orthonormal frame spanning the coordinates; matrices
    in different frames differ by conjugation.
    """
    x = np.asarray(x, dtype=float)
    B = orthonormal_frame(M, x) if frame is None else np.asarray(frame, dtype=float)
    n = M.dim
    z = transport_map(M, spec, t, x)
    log_tol = 1e-13

    def f_at(W):
        pts = chart_exp(M, np.broadcast_to(x, W.shape), W, spec.steps, spec.use_oracles)
        if spec.use_oracles and M.oracles is not None and M.oracles.dist is not None:
            d = M.oracles.dist(pts, np.broadcast_to(z, pts.shape))
        else:
            V = chart_log(M, pts, np.broadcast_to(z, pts.shape), steps=spec.steps,
                          tol=log_tol, use_oracles=False)
            d = M.norm(pts, V)
        U = spec.chart.inverse(pts)
        return 0.5 * d ** 2 + (t * spec.lam) * spec.psi_values(U)

    probes = [np.zeros(n)]
    for a in range(n):
        probes.append(delta * B[:, a])
        probes.append(-delta * B[:, a])
    for a in range(n):
        for b in range(a):
            probes.append(delta * (B[:, a] + B[:, b]))
            probes.append(-delta * (B[:, a] + B[:, b]))
            probes.append(delta * (B[:, a] - B[:, b]))
            probes.append(-delta * (B[:, a] - B[:, b]))
    vals = f_at(np.array(probes))
    H = np.empty((n, n))
    center = vals[0]
    idx = 1
    for a in range(n):
        H[a, a] = (vals[idx] - 2.0 * center + vals[idx + 1]) / delta ** 2
        idx += 2
    for a in range(n):
        for b in range(a):
            pp, mm, pm, mp = vals[idx], vals[idx + 1], vals[idx + 2], vals[idx + 3]
            idx += 4
            H[a, b] = H[b, a] = (pp + mm - pm - mp) / (4.0 * delta ** 2)

    if cross_check:
        J = np.empty((n, n))
        chart_x = NormalChart(M, x, B, steps=spec.steps, use_oracles=spec.use_oracles)
        for a in range(n):
            plus = transport_map(M, spec, t, chart_x.forward(delta * np.eye(n)[a]))
            minus = transport_map(M, spec, t, chart_x.forward(-delta * np.eye(n)[a]))
            J[:, a] = (chart_x.inverse(plus) - chart_x.inverse(minus)) / (2.0 * delta)
        if np.max(np.abs(H - J)) > tol:
            raise EstimatorError(
                f"transport differential cross-check failed: Hessian route vs "
                f"direct Jacobian deviate by {np.max(np.abs(H - J)):.3e}")
    return H


def hessian_dist_sq(M: ChartManifold, x0, y, delta=1e-3, steps=DEFAULT_STEPS,
                    use_oracles=None):
    """Exact and model Hessian of d_y^2/2 at x0, in an orthonormal frame.

    ``exact`` is a second central difference of d_y^2/2 along exp rays;
    ``model`` is Id - (1/3) R_y(x0) with R_y the curvature form of the
    transport direction.  Their gap decays like the fourth power of d(x0, y).
    """
    x0 = np.asarray(x0, dtype=float)
    y = np.asarray(y, dtype=float)
    if use_oracles is None:
        use_oracles = M.oracles is not None
    B = orthonormal_frame(M, x0)
    n = M.dim

    def half_dsq(W):
        pts = chart_exp(M, np.broadcast_to(x0, W.shape), W, steps, use_oracles)
        d = chart_dist(M, pts, np.broadcast_to(y, pts.shape), steps=steps,
                       use_oracles=use_oracles)
        return 0.5 * np.asarray(d) ** 2

    probes = [np.zeros(n)]
    for a in range(n):
        probes.append(delta * B[:, a])
        probes.append(-delta * B[:, a])
    for a in range(n):
        for b in range(a):
            probes.append(delta * (B[:, a] + B[:, b]))
            probes.append(-delta * (B[:, a] + B[:, b]))
            probes.append(delta * (B[:, a] - B[:, b]))
            probes.append(-delta * (B[:, a] - B[:, b]))
    vals = half_dsq(np.array(probes))
    exact = np.empty((n, n))
    center = vals[0]
    idx = 1
    for a in range(n):
        exact[a, a] = (vals[idx] - 2.0 * center + vals[idx + 1]) / delta ** 2
        idx += 2
    for a in range(n):
        for b in range(a):
            pp, mm, pm, mp = vals[idx], vals[idx + 1], vals[idx + 2], vals[idx + 3]
            idx += 4
            exact[a, b] = exact[b, a] = (pp + mm - pm - mp) / (4.0 * delta ** 2)

    form = curvature_form(M, x0, y, frame=B, steps=steps, use_oracles=use_oracles)
    model = np.eye(n) - form / 3.0
    return {"exact": exact, "model": model}


def curvature_form(M: ChartManifold, x0, y, frame=None, steps=DEFAULT_STEPS,
                   use_oracles=None):
    """Symmetric form <R(., w)w, .> with w = log_{x0}(y), in frame components."""
    x0 = np.asarray(x0, dtype=float)
    y = np.asarray(y, dtype=float)
    if use_oracles is None:
        use_oracles = M.oracles is not None
    if frame is None:
        frame = orthonormal_frame(M, x0)
    w = chart_log(M, x0[None, :], y[None, :], steps=steps, tol=1e-12,
                  use_oracles=use_oracles)[0]
    if use_oracles and M.oracles is not None and M.oracles.sectional is not None:
        S = M.oracles.sectional(x0[None, :], w[None, :])[0]
    else:
        S = M.sectional_operator(x0, w)
    G = M.metric_at(x0)
    form = frame.T @ G @ S @ frame
    asym = np.max(np.abs(form - form.T))
    if asym > 1e-8 * max(1.0, np.max(np.abs(form))):
        raise ModelError(f"curvature form not symmetric: asymmetry {asym:.3e}")
    return 0.5 * (form + form.T)


@dataclass
class MidpointOperators:
    """Linearized midpoint operators in the x0 normal frame.

    M3 is assembled as (M1 + M2)/2 so the identity holds exactly in floating
    point; all three are SPD for admissible transport scales.
    """

    M1: np.ndarray
    M2: np.ndarray
    M3: np.ndarray
    curvature: np.ndarray   # R_{y0}(x0) in the frame
    lam: float
    alpha0: float
    y0: np.ndarray = field(default=None)

    def eigenvalues(self):
        return tuple(np.linalg.eigvalsh(Mi) for Mi in (self.M1, self.M2, self.M3))


def midpoint_operators(M: ChartManifold, spec: PotentialSpec) -> MidpointOperators:
    """Assemble M1 = Id + R/6, M2 = (1 + lam alpha0) Id - R/3, M3 = (M1+M2)/2."""
    n = M.dim
    y0 = transport_map(M, spec, 1.0, spec.x0)
    R = curvature_form(M, spec.x0, y0, frame=spec.chart.basis,
                       steps=spec.steps, use_oracles=spec.use_oracles)
    eye = np.eye(n)
    M1 = eye + R / 6.0
    M2 = (1.0 + spec.lam * spec.alpha0) * eye - R / 3.0
    M3 = 0.5 * (M1 + M2)
    ops = MidpointOperators(M1, M2, M3, R, spec.lam, spec.alpha0, y0=y0)
    for name, Mi in (("M1", M1), ("M2", M2), ("M3", M3)):
        w = np.linalg.eigvalsh(Mi)
        if w[0] <= 0:
            norm_r = np.linalg.norm(R, 2)
            lam_adm = spec.lam * np.sqrt(1.5 / max(norm_r, 1e-30))
            raise ModelError(
                f"midpoint operator {name} not positive definite "
                f"(min eig {w[0]:.3e}); admissible scale is roughly {lam_adm:.3g}")
    return ops
