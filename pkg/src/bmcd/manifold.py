"""Weighted Riemannian manifolds in a single chart.

A :class:`ChartManifold` carries the metric components g_ij and the weight V
as expression trees over chart coordinates, together with an axis-aligned
chart domain.  First derivatives of g and V are symbolic; derivatives of the
Christoffel symbols are central differences at step ``h_curv``, which keeps
the curvature error at O(h_curv^2).

All query methods accept a single point ``(n,)`` or a batch ``(m, n)`` and
vectorize the expression evaluation over the batch.  Manifolds are immutable
after construction; the per-point SPD cache is insert-only, so concurrent
reads are safe.

Index conventions, pinned by the constant-curvature model spaces:

* ``christoffel`` returns ``Gam[k, i, j]`` (upper index first).
* ``curvature`` returns ``R[l, i, j, k]`` with
  ``R^l_ijk = d_i Gam^l_jk - d_j Gam^l_ik + Gam^l_im Gam^m_jk - Gam^l_jm Gam^m_ik``
  so that ``Ricci_jk = R^i_ijk`` is positive on a round sphere.
* ``sectional_operator(p, v)`` is the symmetric operator
  ``w -> R(w, v)v`` with components ``A^l_i = R^l_ijk v^j v^k``; it is positive
  semidefinite on the sphere and drives both the Jacobi equation and the
  squared-distance Hessian model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConventionError, ModelError
from .expressions import Const, ExprAst, differentiate, evaluate, parse_expression

SPD_MIN_EIGENVALUE = 1e-12


@dataclass
class ManifoldOracles:
    """Optional closed-form accelerators / cross-validation oracles.

    All callables are batched: points and tangents have shape ``(m, n)``.
    ``exp`` and ``log`` must agree with the numeric integrators to the zoo
    tolerance; they exist both as test oracles and as fast paths for the
    raster estimators.
    """

    exp: Optional[Callable] = None          # (X, V) -> (m, n)
    log: Optional[Callable] = None          # (X, Y) -> (m, n)
    dist: Optional[Callable] = None         # (X, Y) -> (m,)
    metric: Optional[Callable] = None       # (X,) -> (m, n, n)
    christoffel: Optional[Callable] = None  # (X,) -> (m, n, n, n)
    sectional: Optional[Callable] = None    # (X, V) -> (m, n, n) operator R(., v)v
    ricci: Optional[Callable] = None        # (X,) -> (m, n, n)
    normal_density: Optional[Callable] = None  # (U,) -> (m,) volume density in normal coords
    injectivity_scale: float = np.inf
    curvature_const: Optional[float] = None


class ChartManifold:
    """Chart-defined weighted manifold (M, g, m = e^{-V} vol_g)."""

    def __init__(self, dim, domain, metric_exprs, weight_expr=None, h_curv=1e-4,
                 name="custom", oracles=None):
        """
        Parameters
        ----------
        dim : int, >= 2
        domain : array-like, shape (2n,) or (n, 2)
            Axis-aligned chart box, (lo1, hi1, lo2, hi2, ...) when flat.
        metric_exprs : mapping or nested sequence
            Lower-triangle entries; either ``{(i, j): src}`` with 1-based
            ``i >= j`` or a list of rows ``[[g11], [g21, g22], ...]``.
            Entries may be source strings or parsed trees.
        weight_expr : str or ExprAst, optional
            V in m = e^{-V} vol_g; defaults to 0.
        h_curv : float
            Step for the central differences of the Christoffel symbols.
        """
        if dim < 2:
            raise ModelError("dimension must be at least 2")
        self.dim = int(dim)
        box = np.asarray(domain, dtype=float).reshape(-1)
        if box.size != 2 * self.dim:
            raise ModelError(f"domain needs {2 * self.dim} bounds, got {box.size}")
        self.lo = box[0::2].copy()
        self.hi = box[1::2].copy()
        if np.any(self.hi <= self.lo):
            raise ModelError("domain box is empty along some axis")
        self.h_curv = float(h_curv)
        self.name = name
        self.oracles = oracles

        self._g = self._normalize_metric(metric_exprs)
        if weight_expr is None:
            weight_expr = Const(0.0)
        elif isinstance(weight_expr, str):
            weight_expr = parse_expression(weight_expr, self.dim)
        self._V = weight_expr

        n = self.dim
        self._dg = [[[differentiate(self._g[i][j], k + 1) for j in range(i + 1)]
                     for i in range(n)] for k in range(n)]
        self._dV = [differentiate(self._V, k + 1) for k in range(n)]
        self._ddV = [[differentiate(self._dV[i], j + 1) for j in range(i + 1)]
                     for i in range(n)]
        self._spd_cache = {}

    def _normalize_metric(self, metric_exprs):
        n = self.dim
        rows = [[None] * (i + 1) for i in range(n)]
        if isinstance(metric_exprs, dict):
            items = metric_exprs.items()
            for (i, j), src in items:
                if not (1 <= j <= i <= n):
                    raise ModelError(f"metric key ({i},{j}) must satisfy 1 <= j <= i <= {n}")
                rows[i - 1][j - 1] = src
        else:
            for i, row in enumerate(metric_exprs):
                for j, src in enumerate(row):
                    rows[i][j] = src
        out = []
        for i in range(n):
            parsed = []
            for j in range(i + 1):
                src = rows[i][j]
                if src is None:
                    raise ModelError(f"missing metric entry g_{i + 1}{j + 1}")
                parsed.append(parse_expression(src, n) if isinstance(src, str) else src)
            out.append(parsed)
        return out

    # -- domain ------------------------------------------------------------

    def contains(self, points, margin=0.0):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ok = np.all((pts >= self.lo + margin) & (pts <= self.hi - margin), axis=1)
        return ok if np.asarray(points).ndim > 1 else bool(ok[0])

    def require_inside(self, points, margin=0.0, what="point"):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ok = np.all((pts >= self.lo - 1e-12 + margin) & (pts <= self.hi + 1e-12 - margin), axis=1)
        if not np.all(ok):
            bad = pts[np.argmin(ok)]
            raise ModelError(f"{what} {bad.tolist()} outside chart domain "
                             f"(margin {margin:.3g})")

    def domain_margin(self, p):
        p = np.asarray(p, dtype=float)
        return float(min(np.min(p - self.lo), np.min(self.hi - p)))

    # -- metric ------------------------------------------------------------

    def metric(self, points):
        """g at one point (n, n) or a batch (m, n, n); no SPD validation."""
        pts, single = _batch(points, self.dim)
        m, n = pts.shape[0], self.dim
        G = np.empty((m, n, n))
        for i in range(n):
            for j in range(i + 1):
                val = evaluate(self._g[i][j], pts)
                G[:, i, j] = val
                G[:, j, i] = val
        return G[0] if single else G

    def metric_at(self, p, validate=True):
        """g(p) with a cached SPD check (min eigenvalue > 1e-12)."""
        p = np.asarray(p, dtype=float)
        G = self.metric(p)
        if validate:
            key = p.tobytes()
            if key not in self._spd_cache:
                w = np.linalg.eigvalsh(G)
                if w[0] <= SPD_MIN_EIGENVALUE:
                    raise ModelError(
                        f"metric not positive definite at {p.tolist()}: min eig {w[0]:.3e}")
                self._spd_cache[key] = True
        return G

    def inverse_metric(self, points):
        pts, single = _batch(points, self.dim)
        Ginv = np.linalg.inv(self.metric(pts))
        return Ginv[0] if single else Ginv

    def norm(self, points, vectors):
        """g-norm of tangent vectors at the given base points."""
        pts, single = _batch(points, self.dim)
        vec = np.atleast_2d(np.asarray(vectors, dtype=float))
        G = self.metric(pts)
        out = np.sqrt(np.einsum("mi,mij,mj->m", vec, G, vec))
        return float(out[0]) if single else out

    # -- connection and curvature ------------------------------------------

    def metric_derivatives(self, points):
        """Symbolic d_k g_ij, shape (..., n, n, n) indexed [k, i, j]."""
        pts, single = _batch(points, self.dim)
        m, n = pts.shape[0], self.dim
        dG = np.empty((m, n, n, n))
        for k in range(n):
            for i in range(n):
                for j in range(i + 1):
                    val = evaluate(self._dg[k][i][j], pts)
                    dG[:, k, i, j] = val
                    dG[:, k, j, i] = val
        return dG[0] if single else dG

    def christoffel(self, points):
        """Levi-Civita symbols Gam[k, i, j], symmetric in (i, j)."""
        pts, single = _batch(points, self.dim)
        G = self.metric(pts)
        try:
            Ginv = np.linalg.inv(G)
        except np.linalg.LinAlgError as exc:
            raise ModelError(f"singular metric in christoffel evaluation: {exc}") from exc
        dG = self.metric_derivatives(pts)
        # Gam^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)
        bracket = (np.einsum("mijl->mlij", dG[:, :, :, :])
                   + np.einsum("mjil->mlij", dG)
                   - dG)
        Gam = 0.5 * np.einsum("mkl,mlij->mkij", Ginv, bracket)
        return Gam[0] if single else Gam

    def christoffel_at(self, p):
        return self.christoffel(np.asarray(p, dtype=float))

    def curvature(self, points):
        """Riemann tensor R[l, i, j, k] and Ricci matrix, batched.

        d Gam is a central difference at ``h_curv``; points must sit at least
        ``h_curv`` inside the chart domain.
        """
        pts, single = _batch(points, self.dim)
        self.require_inside(pts, margin=self.h_curv, what="curvature point")
        m, n, h = pts.shape[0], self.dim, self.h_curv
        shifted = np.empty((2 * n, m, n))
        for i in range(n):
            shifted[2 * i] = pts
            shifted[2 * i][:, i] += h
            shifted[2 * i + 1] = pts
            shifted[2 * i + 1][:, i] -= h
        Gs = self.christoffel(shifted.reshape(-1, n)).reshape(2 * n, m, n, n, n)
        dGam = np.empty((m, n, n, n, n))  # [m, deriv, l, j, k]
        for i in range(n):
            dGam[:, i] = (Gs[2 * i] - Gs[2 * i + 1]) / (2.0 * h)
        Gam = self.christoffel(pts)
        t1 = np.transpose(dGam, (0, 2, 1, 3, 4))       # d_i Gam^l_jk
        t2 = np.transpose(dGam, (0, 2, 3, 1, 4))       # d_j Gam^l_ik
        q1 = np.einsum("mliu,mujk->mlijk", Gam, Gam)
        q2 = np.einsum("mlju,muik->mlijk", Gam, Gam)
        R = t1 - t2 + q1 - q2
        ricci = np.einsum("miijk->mjk", R)
        if single:
            return R[0], ricci[0]
        return R, ricci

    def curvature_at(self, p):
        R, ricci = self.curvature(np.asarray(p, dtype=float))
        return {"riemann": R, "ricci": ricci}

    def sectional_operator(self, points, vectors):
        """Symmetric operator w -> R(w, v)v in chart components, batched."""
        pts, single = _batch(points, self.dim)
        vec = np.atleast_2d(np.asarray(vectors, dtype=float))
        R, _ = self.curvature(pts)
        A = np.einsum("mlijk,mj,mk->mli", R, vec, vec)
        return A[0] if single else A

    # -- weight ------------------------------------------------------------

    def weight(self, points):
        pts, single = _batch(points, self.dim)
        out = evaluate(self._V, pts)
        return float(out[0]) if single else out

    def weight_grad(self, points):
        """Coordinate partials dV, shape (..., n)."""
        pts, single = _batch(points, self.dim)
        out = np.stack([evaluate(self._dV[k], pts) for k in range(self.dim)], axis=-1)
        return out[0] if single else out

    def weight_hessian(self, points):
        """Covariant Hessian of V: d_i d_j V - Gam^k_ij d_k V."""
        pts, single = _batch(points, self.dim)
        m, n = pts.shape[0], self.dim
        H = np.empty((m, n, n))
        for i in range(n):
            for j in range(i + 1):
                val = evaluate(self._ddV[i][j], pts)
                H[:, i, j] = val
                H[:, j, i] = val
        Gam = self.christoffel(pts)
        dV = self.weight_grad(pts)
        H -= np.einsum("mkij,mk->mij", Gam, dV)
        return H[0] if single else H

    # -- modified Ricci ------------------------------------------------------

    def modified_ricci(self, points, N):
        """Ric + Hess V - (dV x dV)/(N - n) as a form matrix in chart frame.

        With N = n the gradient term must vanish (checked to 1e-10), matching
        the 0*inf convention for the dimensional parameter.
        """
        n = self.dim
        if N < n:
            raise ConventionError(f"effective dimension N = {N} below manifold dimension {n}")
        pts, single = _batch(points, self.dim)
        _, ricci = self.curvature(pts)
        out = ricci + self.weight_hessian(pts)
        dV = self.weight_grad(pts)
        if N == n:
            worst = np.max(np.abs(dV))
            if worst > 1e-10:
                raise ConventionError(
                    f"N = n requires vanishing weight gradient; |dV| = {worst:.3e}")
        else:
            out -= np.einsum("mi,mj->mij", dV, dV) / (N - n)
        return out[0] if single else out

    def modified_ricci_at(self, p, N):
        return self.modified_ricci(np.asarray(p, dtype=float), N)

    # -- misc ----------------------------------------------------------------

    def volume_density(self, points):
        """e^{-V} sqrt(det g) in chart coordinates, batched."""
        pts, single = _batch(points, self.dim)
        det = np.linalg.det(self.metric(pts))
        out = np.exp(-self.weight(pts)) * np.sqrt(det)
        return float(out[0]) if single else out

    def __repr__(self):
        return f"ChartManifold(name={self.name!r}, dim={self.dim})"


def _batch(points, dim):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        if pts.shape[0] != dim:
            raise ModelError(f"point has {pts.shape[0]} coordinates, expected {dim}")
        return pts[None, :], True
    if pts.shape[-1] != dim:
        raise ModelError(f"points have {pts.shape[-1]} coordinates, expected {dim}")
    return pts, False


def euclidean_chart(dim, half_width=5.0):
    """Plain flat chart, mostly a building block for tests and the zoo."""
    entries = {(i, j): ("1" if i == j else "0")
               for i in range(1, dim + 1) for j in range(1, i + 1)}
    domain = np.column_stack([np.full(dim, -half_width), np.full(dim, half_width)])
    return ChartManifold(dim, domain, entries, name=f"euclidean({dim})")
