"""Volume distortion coefficients and the one-dimensional comparison checks.

``sigma`` and ``tau`` are the trigonometric / hyperbolic model coefficients
of curvature K, dimension N and distance theta.  The infinite regime
(N pi^2 <= K theta^2) is reported as ``inf``.  Near alpha = 0 the sine ratio
is evaluated by its series in K theta^2 / N, which makes the coefficients
continuous across K = 0 instead of hitting 0/0.

``ode_defect`` and ``midpoint_inequality_defect`` discretize the two sides of
the comparison lemma for sampled nonnegative functions on [0, 1]:
``f'' + Lambda f >= 0`` on the interior is equivalent to the sigma-combination
midpoint bound over all grid triples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelError

MIN_GRID_NODES = 65
_SERIES_ALPHA = 1e-4


def sigma(t, K, N, theta):
    """Distortion coefficient sigma_{K,N}^{(t)}(theta); broadcasts over t, theta.

    Cases: +inf when N pi^2 <= K theta^2; sin(t a)/sin(a) for K > 0;
    t for K = 0; sinh(t a)/sinh(a) for K < 0, with a = theta sqrt(|K|/N).
    """
    if N <= 0:
        raise ModelError(f"sigma needs N > 0, got {N}")
    t_arr = np.asarray(t, dtype=float)
    th_arr = np.asarray(theta, dtype=float)
    if np.any(th_arr < 0):
        raise ModelError("theta must be nonnegative")
    t_b, th_b = np.broadcast_arrays(t_arr, th_arr)
    out = np.empty(t_b.shape, dtype=float)
    if K == 0:
        out[...] = t_b
        return out if out.ndim else float(out)

    alpha = th_b * np.sqrt(abs(K) / N)
    small = alpha < _SERIES_ALPHA
    s_signed = np.sign(K) * alpha * alpha
    # sin(t a)/sin(a) = t (1 + (1-t^2) s/6 + (7/360 - t^2/36 + t^4/120) s^2 + O(s^3)),
    # with s = K theta^2 / N; sinh is the same series with s < 0.
    series = t_b * (1.0 + (1.0 - t_b ** 2) * s_signed / 6.0
                    + (7.0 / 360.0 - t_b ** 2 / 36.0 + t_b ** 4 / 120.0) * s_signed ** 2)
    if K > 0:
        infinite = N * np.pi ** 2 <= K * th_b ** 2
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.sin(t_b * alpha) / np.sin(alpha)
        out = np.where(small, series, ratio)
        out = np.where(infinite, np.inf, out)
    else:
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.sinh(t_b * alpha) / np.sinh(alpha)
        out = np.where(small, series, ratio)
    return out if out.ndim else float(out)


def tau(t, K, N, theta):
    """tau_{K,N}^{(t)}(theta) = t^{1/N} sigma_{K,N-1}^{(t)}(theta)^{1-1/N}.

    Requires N > 1; equals t exactly when K = 0.
    """
    if N <= 1:
        raise ModelError(f"tau needs N > 1, got {N}")
    t_arr = np.asarray(t, dtype=float)
    th_arr = np.asarray(theta, dtype=float)
    t_b, th_b = np.broadcast_arrays(t_arr, th_arr)
    if K == 0:
        out = t_b.astype(float).copy()
        return out if out.ndim else float(out)
    s = sigma(t_b, K, N - 1.0, th_b)
    s = np.asarray(s, dtype=float)
    out = np.empty(t_b.shape, dtype=float)
    finite = np.isfinite(s)
    with np.errstate(invalid="ignore"):
        out = np.where(finite, t_b ** (1.0 / N) * np.where(finite, s, 1.0) ** (1.0 - 1.0 / N),
                       np.where(t_b > 0, np.inf, 0.0))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DistortionParams:
    """Argument bundle (K, N, t, theta) with the derived quantities."""

    K: float
    N: float
    t: float
    theta: float

    @property
    def alpha(self):
        return self.theta * np.sqrt(abs(self.K) / self.N)

    @property
    def infinite_regime(self):
        return self.K > 0 and self.N * np.pi ** 2 <= self.K * self.theta ** 2

    def sigma(self):
        return sigma(self.t, self.K, self.N, self.theta)

    def tau(self):
        return tau(self.t, self.K, self.N, self.theta)


def tau_expansion_defect(K, N, t, lam):
    """tau(lam) minus its second-order model t (1 + (1-t^2) K lam^2 / (6N)).

    The defect is o(lam^2); sweeping lam checks the expansion order.
    """
    value = tau(t, K, N, lam)
    model = t * (1.0 + (1.0 - t ** 2) * K * lam ** 2 / (6.0 * N))
    return float(value - model)


@dataclass(frozen=True)
class SampledFunction:
    """Nonnegative function sampled on a uniform grid over [0, 1]."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        if grid.ndim != 1 or grid.size < MIN_GRID_NODES:
            raise ModelError(f"grid needs at least {MIN_GRID_NODES} nodes")
        if grid.size != values.size:
            raise ModelError("grid and values size mismatch")
        steps = np.diff(grid)
        if grid[0] != 0.0 or grid[-1] != 1.0 or np.max(np.abs(steps - steps[0])) > 1e-12:
            raise ModelError("grid must be uniform over [0, 1]")
        if np.any(values < 0):
            raise ModelError("sampled values must be nonnegative")

    @property
    def spacing(self):
        return float(self.grid[1] - self.grid[0])

    @classmethod
    def from_callable(cls, f, nodes=129):
        grid = np.linspace(0.0, 1.0, nodes)
        return cls(grid, np.asarray([f(s) for s in grid], dtype=float))


def ode_defect(f: SampledFunction, Lam):
    """Most negative value of f'' + Lambda f on interior nodes.

    Returns ``(value, argmin_s)``; second differences on the sample grid.
    """
    if Lam >= np.pi ** 2:
        raise ModelError(f"comparison requires Lambda < pi^2, got {Lam}")
    v = f.values
    h = f.spacing
    second = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (h * h)
    defect = second + Lam * v[1:-1]
    k = int(np.argmin(defect))
    return float(defect[k]), float(f.grid[k + 1])


def midpoint_inequality_defect(f: SampledFunction, Lam):
    """Worst violation of the sigma-combination midpoint bound over grid triples.

    Scans every (s0, s1, t) with t in (0, 1) and (1-t) s0 + t s1 on the grid,
    returning ``(min(rhs - lhs), (s0, s1, t))`` with sigma = sigma_{Lambda,1}.
    Endpoint values of t are skipped: the bound is an identity there for any f.
    """
    if Lam >= np.pi ** 2:
        raise ModelError(f"comparison requires Lambda < pi^2, got {Lam}")
    v = f.values
    grid = f.grid
    h = f.spacing
    nodes = v.size
    worst = np.inf
    worst_triple = (0.0, 0.0, 0.0)
    for gap in range(2, nodes):
        starts = np.arange(nodes - gap)
        offsets = np.arange(1, gap)
        i = starts[:, None]
        k = i + offsets[None, :]
        t = offsets[None, :] / gap
        theta = gap * h
        s_t = sigma(t, Lam, 1.0, theta)
        s_1mt = sigma(1.0 - t, Lam, 1.0, theta)
        rhs = s_1mt * v[i] + s_t * v[i + gap]
        defect = rhs - v[k]
        idx = np.unravel_index(np.argmin(defect), defect.shape)
        if defect[idx] < worst:
            worst = float(defect[idx])
            i0 = int(starts[idx[0]])
            worst_triple = (float(grid[i0]), float(grid[i0 + gap]),
                            float(offsets[idx[1]]) / gap)
    return worst, worst_triple
