"""Cyclic Jacobi eigensolver for small dense symmetric matrices.

Row-cyclic Givens rotations until every off-diagonal entry falls below the
tolerance.  Deterministic and dependency-free; intended for the n <= 8
curvature forms, with ``numpy.linalg.eigh`` serving as the cross-check in
the test suite rather than as the production path.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError


def jacobi_eigh(A, tol=1e-12, max_sweeps=60):
    """Eigenvalues (ascending) and eigenvectors (columns) of symmetric A."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or np.max(np.abs(A - A.T)) > 1e-10 * max(1.0, np.max(np.abs(A))):
        raise ConvergenceError("jacobi_eigh needs a symmetric square matrix")
    work = 0.5 * (A + A.T)
    V = np.eye(n)
    scale = max(np.max(np.abs(work)), 1.0)
    threshold = tol * scale
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = work[p, q]
                off = max(off, abs(apq))
                if abs(apq) <= threshold:
                    continue
                # Rotation angle from the 2x2 block (app, apq; apq, aqq).
                theta = 0.5 * (work[q, q] - work[p, p]) / apq
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) \
                    if theta != 0.0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp, rq = work[p, :].copy(), work[q, :].copy()
                work[p, :] = c * rp - s * rq
                work[q, :] = s * rp + c * rq
                cp, cq = work[:, p].copy(), work[:, q].copy()
                work[:, p] = c * cp - s * cq
                work[:, q] = s * cp + c * cq
                work[p, q] = work[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
        if off <= threshold:
            values = np.diag(work).copy()
            order = np.argsort(values, kind="stable")
            return values[order], V[:, order]
    raise ConvergenceError(
        f"jacobi eigensolver did not reach off-diagonal < {tol:g} "
        f"in {max_sweeps} sweeps")
