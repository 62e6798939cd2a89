import numpy as np
import pytest

from bmcd.eigen import jacobi_eigh
from bmcd.errors import ConvergenceError


def test_matches_numpy_eigh(rng):
    for n in (2, 3, 4, 6, 8):
        for _ in range(10):
            A = rng.normal(size=(n, n))
            A = 0.5 * (A + A.T)
            vals, vecs = jacobi_eigh(A)
            ref_vals, _ = np.linalg.eigh(A)
            assert np.max(np.abs(vals - ref_vals)) < 1e-12 * max(1.0, np.max(np.abs(ref_vals)))
            assert np.max(np.abs(A @ vecs - vecs * vals)) < 1e-11 * max(1.0, np.max(np.abs(A)))
            assert np.max(np.abs(vecs.T @ vecs - np.eye(n))) < 1e-12


def test_sorted_ascending(rng):
    A = rng.normal(size=(5, 5))
    A = 0.5 * (A + A.T)
    vals, _ = jacobi_eigh(A)
    assert np.all(np.diff(vals) >= 0)


def test_deterministic(rng):
    A = rng.normal(size=(4, 4))
    A = 0.5 * (A + A.T)
    v1, V1 = jacobi_eigh(A)
    v2, V2 = jacobi_eigh(A)
    assert np.array_equal(v1, v2) and np.array_equal(V1, V2)


def test_rejects_asymmetric():
    with pytest.raises(ConvergenceError):
        jacobi_eigh(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_degenerate_spectrum():
    vals, vecs = jacobi_eigh(np.eye(3))
    assert np.allclose(vals, 1.0)
    assert np.allclose(vecs, np.eye(3))
