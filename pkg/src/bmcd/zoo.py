"""Built-in manifolds with closed-form oracles for cross-validation.

Each entry pairs an expression-defined :class:`ChartManifold` with closed
forms for the exponential / logarithm / distance, the connection and the
curvature, plus the volume density in normal coordinates.  The numeric
pipeline must reproduce the oracles to the zoo tolerance; the raster
estimators use them as fast paths.

Entries: ``euclidean(n)``, ``sphere(n, r)`` in the stereographic chart,
``hyperbolic(n)`` on the Poincare ball (curvature -1), ``gaussian(n, a)``
with weight a |x|^2 / 2, and ``saddle_weight(n, c)`` with weight -c x1^2.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError
from .manifold import ChartManifold, ManifoldOracles


@dataclass
class CDStatus:
    """One (K, N) pair with its known verdict and a witness for failures."""

    K: float
    N: float
    holds: bool
    witness_point: np.ndarray = None
    witness_direction: np.ndarray = None


@dataclass
class ZooEntry:
    name: str
    params: dict
    manifold: ChartManifold
    cd_status: list = field(default_factory=list)
    safe_radius: float = 1.0

    @property
    def oracles(self):
        return self.manifold.oracles


def _fmt(x):
    return repr(float(x))


# -- flat-metric entries -----------------------------------------------------

def _flat_oracles():
    def o_exp(X, V):
        return X + V

    def o_log(X, Y):
        return Y - X

    def o_dist(X, Y):
        return np.linalg.norm(Y - X, axis=-1)

    def o_metric(X):
        m, n = X.shape
        return np.broadcast_to(np.eye(n), (m, n, n)).copy()

    def o_christoffel(X):
        m, n = X.shape
        return np.zeros((m, n, n, n))

    def o_sectional(X, V):
        m, n = X.shape
        return np.zeros((m, n, n))

    def o_ricci(X):
        m, n = X.shape
        return np.zeros((m, n, n))

    def o_density(U):
        return np.ones(U.shape[0])

    return ManifoldOracles(exp=o_exp, log=o_log, dist=o_dist, metric=o_metric,
                           christoffel=o_christoffel, sectional=o_sectional,
                           ricci=o_ricci, normal_density=o_density,
                           injectivity_scale=np.inf, curvature_const=0.0)


def _flat_metric_entries(n):
    return {(i, j): ("1" if i == j else "0")
            for i in range(1, n + 1) for j in range(1, i + 1)}


def euclidean(n):
    M = ChartManifold(n, np.column_stack([np.full(n, -4.0), np.full(n, 4.0)]).reshape(-1),
                      _flat_metric_entries(n), name=f"euclidean({n})",
                      oracles=_flat_oracles())
    status = [
        CDStatus(0.0, float(n), True),
        CDStatus(0.0, float(n + 2), True),
        CDStatus(-1.0, float(n), True),
        CDStatus(1.0, float(n), False, np.zeros(n), np.eye(n)[0]),
    ]
    return ZooEntry("euclidean", {"n": n}, M, status, safe_radius=3.0)


def gaussian(n, a):
    if a <= 0:
        raise ModelError("gaussian weight parameter must be positive")
    sq = "+".join(f"x{i}^2" for i in range(1, n + 1))
    M = ChartManifold(n, np.column_stack([np.full(n, -1.0), np.full(n, 1.0)]).reshape(-1),
                      _flat_metric_entries(n), weight_expr=f"{_fmt(a / 2)}*({sq})",
                      name=f"gaussian({n},{a})", oracles=_flat_oracles())
    # Ric^{N,m} = a Id - a^2 x x^T / (N - n); over |x| <= R it stays above
    # (a - a^2 R^2 / (N - n)) Id, so small K bounds hold on the chart while
    # K = a fails off the origin.
    R2 = float(n)  # corner radius^2 of the domain box
    holds_K = a - a * a * R2 / 1.0
    status = [
        CDStatus(holds_K, float(n + 1), True),
        CDStatus(a, float(n + 1), False,
                 np.full(n, 0.5), np.eye(n)[0]),
    ]
    return ZooEntry("gaussian", {"n": n, "a": a}, M, status, safe_radius=0.8)


def saddle_weight(n, c):
    if c <= 0:
        raise ModelError("saddle weight parameter must be positive")
    M = ChartManifold(n, np.column_stack([np.full(n, -1.0), np.full(n, 1.0)]).reshape(-1),
                      _flat_metric_entries(n), weight_expr=f"-{_fmt(c)}*x1^2",
                      name=f"saddle_weight({n},{c})", oracles=_flat_oracles())
    status = [
        CDStatus(0.0, float(2 * n), False, np.zeros(n), np.eye(n)[0]),
        CDStatus(-2.0 * c - 4.0 * c * c * float(n) / float(n), float(2 * n), True),
    ]
    return ZooEntry("saddle_weight", {"n": n, "c": c}, M, status, safe_radius=0.8)


# -- constant-curvature entries ----------------------------------------------

def _conformal_sectional(curvature, metric_fn):
    def o_sectional(X, V):
        G = metric_fn(X)
        n = X.shape[1]
        vsq = np.einsum("mi,mij,mj->m", V, G, V)
        Gv = np.einsum("mij,mj->mi", G, V)
        eye = np.eye(n)
        return curvature * (vsq[:, None, None] * eye[None, :, :]
                            - np.einsum("mi,mj->mij", V, Gv))
    return o_sectional


def sphere(n, r):
    """Round sphere of radius r in the stereographic chart (chart box |x_i| < r)."""
    if r <= 0:
        raise ModelError("sphere radius must be positive")
    sq = "+".join(f"x{i}^2" for i in range(1, n + 1))
    conf = f"{_fmt(4 * r ** 4)}/(({_fmt(r * r)}+{sq})^2)"
    entries = {(i, j): (conf if i == j else "0")
               for i in range(1, n + 1) for j in range(1, i + 1)}
    half = 0.9 * r / np.sqrt(n) if n > 2 else 0.9 * r
    M = ChartManifold(n, np.column_stack([np.full(n, -half), np.full(n, half)]).reshape(-1),
                      entries, name=f"sphere({n},{r})")

    def embed(X):
        s = np.sum(X * X, axis=-1, keepdims=True) + r * r
        P = np.empty(X.shape[:-1] + (n + 1,))
        P[..., :n] = 2.0 * r * r * X / s
        P[..., n] = r * (np.sum(X * X, axis=-1) - r * r) / s[..., 0]
        return P

    def embed_jac(X):
        m = X.shape[0]
        s = np.sum(X * X, axis=1) + r * r
        J = np.empty((m, n + 1, n))
        eye = np.eye(n)
        J[:, :n, :] = 2.0 * r * r * (eye[None, :, :] / s[:, None, None]
                                     - 2.0 * np.einsum("mi,mj->mij", X, X) / s[:, None, None] ** 2)
        J[:, n, :] = 4.0 * r ** 3 * X / s[:, None] ** 2
        return J

    def unembed(P):
        return r * P[..., :n] / (r - P[..., n])[..., None]

    def conf_factor(X):
        s = np.sum(X * X, axis=-1) + r * r
        return 4.0 * r ** 4 / s ** 2

    def o_exp(X, V):
        X = np.atleast_2d(X)
        V = np.atleast_2d(V)
        P = embed(X)
        J = embed_jac(X)
        W = np.einsum("mki,mi->mk", J, V)
        wn = np.linalg.norm(W, axis=1)
        out = np.empty_like(P)
        zero = wn < 1e-300
        wn_safe = np.where(zero, 1.0, wn)
        theta = wn_safe / r
        out = np.cos(theta)[:, None] * P + (r * np.sin(theta) / wn_safe)[:, None] * W
        out[zero] = P[zero]
        return unembed(out)

    def _angle(P, Q):
        # Chord-based angle: conditioned near 0, unlike arccos of the inner product.
        chord = np.linalg.norm(Q - P, axis=-1)
        return 2.0 * np.arcsin(np.clip(0.5 * chord / r, 0.0, 1.0))

    def o_log(X, Y):
        X = np.atleast_2d(X)
        Y = np.atleast_2d(Y)
        P, Q = embed(X), embed(Y)
        c = np.clip(np.einsum("mk,mk->m", P, Q) / r ** 2, -1.0, 1.0)
        ang = _angle(P, Q)
        W = Q - c[:, None] * P
        wn = np.linalg.norm(W, axis=1)
        small = wn < 1e-300
        W = np.where(small[:, None], 0.0, W / np.where(small, 1.0, wn)[:, None])
        Vemb = (r * ang)[:, None] * W
        J = embed_jac(X)
        return np.einsum("mki,mk->mi", J, Vemb) / conf_factor(X)[:, None]

    def o_dist(X, Y):
        X = np.atleast_2d(X)
        Y = np.atleast_2d(Y)
        return r * _angle(embed(X), embed(Y))

    def o_metric(X):
        phi = conf_factor(np.atleast_2d(X))
        return phi[:, None, None] * np.eye(n)[None, :, :]

    def o_christoffel(X):
        X = np.atleast_2d(X)
        s = np.sum(X * X, axis=1) + r * r
        df = -2.0 * X / s[:, None]
        return _conformal_christoffel(df)

    def o_ricci(X):
        return (n - 1) / r ** 2 * o_metric(X)

    def o_density(U):
        rho = np.linalg.norm(np.atleast_2d(U), axis=1) / r
        ratio = np.where(rho > 1e-12, np.sin(rho) / np.where(rho > 1e-12, rho, 1.0), 1.0)
        return ratio ** (n - 1)

    M.oracles = ManifoldOracles(
        exp=o_exp, log=o_log, dist=o_dist, metric=o_metric,
        christoffel=o_christoffel,
        sectional=_conformal_sectional(1.0 / r ** 2, o_metric),
        ricci=o_ricci, normal_density=o_density,
        injectivity_scale=np.pi * r, curvature_const=1.0 / r ** 2)
    status = [
        CDStatus((n - 1) / r ** 2, float(n), True),
        CDStatus((n - 1) / r ** 2 + 0.5, float(n), False,
                 np.zeros(n), np.eye(n)[0]),
    ]
    return ZooEntry("sphere", {"n": n, "r": r}, M, status, safe_radius=0.5 * r)


def _conformal_christoffel(df):
    """Gam^k_ij = d_i f delta_jk + d_j f delta_ik - d_k f delta_ij for g = e^{2f} Id."""
    m, n = df.shape
    eye = np.eye(n)
    Gam = (np.einsum("mi,jk->mkij", df, eye)
           + np.einsum("mj,ik->mkij", df, eye)
           - np.einsum("mk,ij->mkij", df, eye))
    return Gam


def hyperbolic(n):
    """Poincare ball of curvature -1; chart box keeps |x| <= 0.9."""
    sq = "+".join(f"x{i}^2" for i in range(1, n + 1))
    conf = f"4/((1-({sq}))^2)"
    entries = {(i, j): (conf if i == j else "0")
               for i in range(1, n + 1) for j in range(1, i + 1)}
    half = 0.9 / np.sqrt(n)
    M = ChartManifold(n, np.column_stack([np.full(n, -half), np.full(n, half)]).reshape(-1),
                      entries, name=f"hyperbolic({n})")

    def mobius_add(X, Y):
        xy = np.sum(X * Y, axis=-1, keepdims=True)
        x2 = np.sum(X * X, axis=-1, keepdims=True)
        y2 = np.sum(Y * Y, axis=-1, keepdims=True)
        num = (1.0 + 2.0 * xy + y2) * X + (1.0 - x2) * Y
        den = 1.0 + 2.0 * xy + x2 * y2
        return num / den

    def lam_factor(X):
        return 2.0 / (1.0 - np.sum(X * X, axis=-1))

    def o_exp(X, V):
        X = np.atleast_2d(X)
        V = np.atleast_2d(V)
        vn = np.linalg.norm(V, axis=1)
        zero = vn < 1e-300
        vn_safe = np.where(zero, 1.0, vn)
        lam = lam_factor(X)
        scaled = np.tanh(0.5 * lam * vn_safe)[:, None] * (V / vn_safe[:, None])
        out = mobius_add(X, scaled)
        out[zero] = X[zero]
        return out

    def o_log(X, Y):
        X = np.atleast_2d(X)
        Y = np.atleast_2d(Y)
        W = mobius_add(-X, Y)
        wn = np.linalg.norm(W, axis=1)
        zero = wn < 1e-300
        wn_safe = np.where(zero, 0.5, wn)
        lam = lam_factor(X)
        out = (2.0 / lam * np.arctanh(wn_safe) / wn_safe)[:, None] * W
        out[zero] = 0.0
        return out

    def o_dist(X, Y):
        X = np.atleast_2d(X)
        Y = np.atleast_2d(Y)
        W = mobius_add(-X, Y)
        return 2.0 * np.arctanh(np.clip(np.linalg.norm(W, axis=1), 0.0, 1.0 - 1e-16))

    def o_metric(X):
        lam = lam_factor(np.atleast_2d(X))
        return (lam ** 2)[:, None, None] * np.eye(n)[None, :, :]

    def o_christoffel(X):
        X = np.atleast_2d(X)
        df = 2.0 * X / (1.0 - np.sum(X * X, axis=1))[:, None]
        return _conformal_christoffel(df)

    def o_ricci(X):
        return -(n - 1) * o_metric(X)

    def o_density(U):
        rho = np.linalg.norm(np.atleast_2d(U), axis=1)
        ratio = np.where(rho > 1e-12, np.sinh(rho) / np.where(rho > 1e-12, rho, 1.0), 1.0)
        return ratio ** (n - 1)

    M.oracles = ManifoldOracles(
        exp=o_exp, log=o_log, dist=o_dist, metric=o_metric,
        christoffel=o_christoffel,
        sectional=_conformal_sectional(-1.0, o_metric),
        ricci=o_ricci, normal_density=o_density,
        injectivity_scale=np.inf, curvature_const=-1.0)
    status = [
        CDStatus(-(n - 1.0), float(n), True),
        CDStatus(-(n - 1.0) + 0.5, float(n), False, np.zeros(n), np.eye(n)[0]),
    ]
    return ZooEntry("hyperbolic", {"n": n}, M, status, safe_radius=0.4)


_BUILDERS = {
    "euclidean": (euclidean, 1),
    "sphere": (sphere, 2),
    "hyperbolic": (hyperbolic, 1),
    "gaussian": (gaussian, 2),
    "saddle_weight": (saddle_weight, 2),
}


def builtin(name, *params) -> ZooEntry:
    """Look up a zoo entry; ``params`` are the positional constructor arguments."""
    if name not in _BUILDERS:
        raise ModelError(f"unknown builtin manifold '{name}'; "
                         f"available: {sorted(_BUILDERS)}")
    builder, arity = _BUILDERS[name]
    if len(params) != arity:
        raise ModelError(f"builtin '{name}' takes {arity} parameter(s), "
                         f"got {len(params)}")
    n = int(params[0])
    if n < 2:
        raise ModelError("manifold dimension must be at least 2")
    rest = [float(p) for p in params[1:]]
    return builder(n, *rest)


def parse_builtin(text) -> ZooEntry:
    """Parse CLI syntax like ``sphere(2,1)`` into a zoo entry."""
    match = re.fullmatch(r"\s*([a-z_]+)\s*\(([^)]*)\)\s*", text)
    if not match:
        raise ModelError(f"cannot parse builtin manifold spec '{text}'")
    name = match.group(1)
    params = [p for p in match.group(2).split(",") if p.strip()]
    return builtin(name, *[float(p) for p in params])
