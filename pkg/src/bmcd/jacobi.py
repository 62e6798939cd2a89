"""Matrix Jacobi fields and the weighted volume-distortion profile.

A field solves J'' + A(t) J = 0 in a parallel orthonormal frame along a
geodesic, where A(t) is the frame projection of the sectional operator
w -> R(w, gamma') gamma'.  Geodesic, frame and field are integrated as one
coupled RK4 system so every stage sees consistent positions.

Derived profiles per sample: U = J' J^{-1}, the unweighted determinant,
the weighted Jacobian (with the e^{-V} ratio), the distortion D = weighted^{1/N},
and the nonnegative remainder built from the traceless part of U and the
weight gradient.  ``riccati_residual`` checks the identity
-N D''/D = Ric^{N,m}(gamma', gamma') + remainder by central differences,
which ties the field to the curvature module without re-solving any ODE.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConventionError, FocalizationError, ModelError
from .geodesics import GeodesicPath, orthonormal_frame
from .manifold import ChartManifold


@dataclass
class MatrixJacobiField:
    manifold: ChartManifold
    N: float
    H0: np.ndarray
    times: np.ndarray          # (s+1,)
    points: np.ndarray         # (s+1, n)
    velocities: np.ndarray     # (s+1, n)
    frame: np.ndarray          # (s+1, n, n), columns are the parallel frame
    J: np.ndarray              # (s+1, n, n)
    Jdot: np.ndarray           # (s+1, n, n)
    U: np.ndarray              # (s+1, n, n)
    det_unweighted: np.ndarray  # (s+1,)
    weighted: np.ndarray       # (s+1,)
    distortion: np.ndarray     # (s+1,)
    remainder: np.ndarray      # (s+1,)
    ric_term: np.ndarray       # (s+1,), modified Ricci along the velocity

    @property
    def steps(self):
        return len(self.times) - 1


def _sectional(M, x, v, use_oracles):
    if use_oracles and M.oracles is not None and M.oracles.sectional is not None:
        return M.oracles.sectional(x[None, :], v[None, :])[0]
    return M.sectional_operator(x, v)


def _coupled_rhs(M, x, v, E, J, Jd, use_oracles):
    Gam = M.christoffel(x)
    dv = -np.einsum("kij,i,j->k", Gam, v, v)
    dE = -np.einsum("kij,i,ja->ka", Gam, v, E)
    S = _sectional(M, x, v, use_oracles)
    G = M.metric(x)
    A = E.T @ G @ S @ E
    return v, dv, dE, Jd, -A @ J


def _integrate_field(M, x0, v0, frame0, H0, steps, use_oracles):
    n = M.dim
    x, v = x0.copy(), v0.copy()
    E = frame0.copy()
    J = np.eye(n)
    Jd = H0.copy()
    h = 1.0 / steps
    out = {key: [val.copy()] for key, val in
           (("x", x), ("v", v), ("E", E), ("J", J), ("Jd", Jd))}
    for _ in range(steps):
        k1 = _coupled_rhs(M, x, v, E, J, Jd, use_oracles)
        k2 = _coupled_rhs(M, x + 0.5 * h * k1[0], v + 0.5 * h * k1[1],
                          E + 0.5 * h * k1[2], J + 0.5 * h * k1[3],
                          Jd + 0.5 * h * k1[4], use_oracles)
        k3 = _coupled_rhs(M, x + 0.5 * h * k2[0], v + 0.5 * h * k2[1],
                          E + 0.5 * h * k2[2], J + 0.5 * h * k2[3],
                          Jd + 0.5 * h * k2[4], use_oracles)
        k4 = _coupled_rhs(M, x + h * k3[0], v + h * k3[1], E + h * k3[2],
                          J + h * k3[3], Jd + h * k3[4], use_oracles)
        x = x + (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        v = v + (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        E = E + (h / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        J = J + (h / 6.0) * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
        Jd = Jd + (h / 6.0) * (k1[4] + 2 * k2[4] + 2 * k3[4] + k4[4])
        for key, val in (("x", x), ("v", v), ("E", E), ("J", J), ("Jd", Jd)):
            out[key].append(val.copy())
    return {key: np.array(vals) for key, vals in out.items()}


def _remainder(U, b, n, N):
    tr = np.trace(U)
    traceless = U - (tr / n) * np.eye(n)
    first = float(np.sum(traceless * traceless))
    if N == n:
        if abs(b) > 1e-8:
            raise ConventionError(
                f"N = n requires a vanishing weight gradient along the path; "
                f"trace term {b:.3e}")
        return first
    second = (n / (N * (N - n))) * ((N - n) / n * tr + b) ** 2
    return first + float(second)


def jacobi_matrix_field(M: ChartManifold, path: GeodesicPath, H0, N,
                        use_oracles=False, frame0=None) -> MatrixJacobiField:
    """Field along ``path`` with J(0) = Id, J'(0) = H0 in the parallel frame.

    H0 must be symmetric; N > n, or N = n with the weight gradient vanishing
    along the path (checked to 1e-8).  Raises :class:`FocalizationError` if
    det J loses positivity on the sample grid.  ``frame0`` overrides the
    initial orthonormal frame; the derived scalar profiles do not depend on
    that choice.
    """
    n = M.dim
    H0 = np.asarray(H0, dtype=float)
    if H0.shape != (n, n) or np.max(np.abs(H0 - H0.T)) > 1e-12:
        raise ModelError("initial Hessian must be a symmetric n x n matrix")
    if N < n:
        raise ConventionError(f"effective dimension N = {N} below n = {n}")
    if N == n:
        dv = M.weight_grad(path.points)
        if np.max(np.abs(dv)) > 1e-8:
            raise ConventionError("N = n requires the weight gradient to vanish along the path")

    x0 = path.points[0]
    v0 = path.v0
    if frame0 is None:
        frame0 = orthonormal_frame(M, x0)
    else:
        frame0 = np.asarray(frame0, dtype=float)
        G = M.metric_at(x0)
        if np.max(np.abs(frame0.T @ G @ frame0 - np.eye(n))) > 1e-10:
            raise ModelError("supplied initial frame is not g-orthonormal")
    steps = path.steps
    raw = _integrate_field(M, x0, v0, frame0, H0, steps, use_oracles)
    if np.max(np.abs(raw["x"] - path.points)) > 1e-9:
        raise ModelError("field trajectory deviates from the supplied path")
    return _finalize(M, N, H0, raw, np.linspace(0.0, 1.0, steps + 1))


def _finalize(M, N, H0, raw, times):
    n = M.dim
    X, V, E, J, Jd = raw["x"], raw["v"], raw["E"], raw["J"], raw["Jd"]
    det = np.linalg.det(J)
    bad = np.nonzero(det <= 0.0)[0]
    if bad.size:
        raise FocalizationError("Jacobi determinant lost positivity",
                                time=float(times[bad[0]]))
    U = np.einsum("sij,sjk->sik", Jd, np.linalg.inv(J))
    Vvals = M.weight(X)
    weighted = np.exp(-(Vvals - Vvals[0])) * det
    distortion = weighted ** (1.0 / N)
    dV = M.weight_grad(X)
    b = np.einsum("si,si->s", V, dV)
    remainder = np.array([_remainder(U[k], b[k], n, N) for k in range(len(times))])
    ric = M.modified_ricci(X, N)
    ric_term = np.einsum("si,sij,sj->s", V, ric, V)
    return MatrixJacobiField(M, N, H0, times, X, V, E, J, Jd, U,
                             det, weighted, distortion, remainder, ric_term)


def remainder_term(field: MatrixJacobiField, k: int) -> float:
    """Nonnegative remainder at sample k, re-evaluated from U and the weight."""
    n = field.manifold.dim
    dV = field.manifold.weight_grad(field.points[k])
    b = float(field.velocities[k] @ dV)
    return _remainder(field.U[k], b, n, field.N)


def riccati_residual(field: MatrixJacobiField):
    """max_k | -N D''/D - Ric^{N,m}(gamma', gamma') - remainder | on interior samples.

    D'' is a central second difference on the field's own grid, so the
    returned value is an independent cross-check of the distortion identity,
    not a by-product of the integration.  Returns ``(residual, argmax_time)``.
    """
    if field.steps < 64:
        raise ModelError("riccati residual needs at least 64 steps")
    D = field.distortion
    h = field.times[1] - field.times[0]
    second = (D[2:] - 2.0 * D[1:-1] + D[:-2]) / (h * h)
    lhs = -field.N * second / D[1:-1]
    resid = np.abs(lhs - field.ric_term[1:-1] - field.remainder[1:-1])
    k = int(np.argmax(resid))
    return float(resid[k]), float(field.times[k + 1])


def reparametrized_field(M: ChartManifold, x, v, lam, H0, N, steps=256,
                         use_oracles=False) -> MatrixJacobiField:
    """Field along s -> exp_x(s lam v) with initial Hessian lam H0.

    Matches the transport scaling psi -> lam psi: the geodesic velocity and
    the initial Hessian scale together.  ``lam = 1`` reproduces
    :func:`jacobi_matrix_field` along the unit-parameter geodesic.
    """
    if not 0.0 < lam <= 1.0:
        raise ModelError(f"reparametrization scale must lie in (0, 1], got {lam}")
    n = M.dim
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    H0 = np.asarray(H0, dtype=float)
    if H0.shape != (n, n) or np.max(np.abs(H0 - H0.T)) > 1e-12:
        raise ModelError("initial Hessian must be a symmetric n x n matrix")
    if N < n:
        raise ConventionError(f"effective dimension N = {N} below n = {n}")
    frame0 = orthonormal_frame(M, x)
    raw = _integrate_field(M, x, lam * v, frame0, lam * H0, steps, use_oracles)
    return _finalize(M, N, lam * H0, raw, np.linspace(0.0, 1.0, steps + 1))
