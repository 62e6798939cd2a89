import numpy as np
import pytest

from bmcd import zoo
from bmcd.errors import ConventionError, ModelError
from bmcd.manifold import ChartManifold


def test_metric_euclidean(flat_chart):
    assert np.array_equal(flat_chart.metric_at([0.3, -0.7]), np.eye(2))


def test_metric_poincare_origin(poincare_chart):
    assert np.allclose(poincare_chart.metric_at([0.0, 0.0]), 4.0 * np.eye(2))


def test_metric_sphere_origin(sphere_chart):
    assert np.allclose(sphere_chart.metric_at([0.0, 0.0]), 4.0 * np.eye(2))


def test_non_spd_metric_detected():
    bad = ChartManifold(2, [-1, 1, -1, 1],
                        {(1, 1): "x1", (2, 1): "0", (2, 2): "1"})
    with pytest.raises(ModelError):
        bad.metric_at([-0.5, 0.0])


def test_christoffel_flat_zero(flat_chart):
    assert np.max(np.abs(flat_chart.christoffel_at([0.2, 0.9]))) == 0.0


def test_christoffel_halfplane(halfplane_chart):
    Gam = halfplane_chart.christoffel_at([0.0, 1.0])
    assert abs(Gam[0, 0, 1] + 1.0) < 1e-12
    assert abs(Gam[0, 1, 0] + 1.0) < 1e-12
    assert abs(Gam[1, 0, 0] - 1.0) < 1e-12
    assert abs(Gam[1, 1, 1] + 1.0) < 1e-12


def test_christoffel_symmetry_random(sphere_chart, rng):
    for _ in range(10):
        p = rng.uniform(-0.4, 0.4, 2)
        Gam = sphere_chart.christoffel_at(p)
        assert np.allclose(Gam, np.swapaxes(Gam, 1, 2), atol=1e-14)


def test_curvature_flat_zero(flat_chart):
    cur = flat_chart.curvature_at([0.1, 0.4])
    assert np.max(np.abs(cur["riemann"])) < 1e-12
    assert np.max(np.abs(cur["ricci"])) < 1e-12


def test_sphere_ricci_and_sectional(sphere_chart, rng):
    for _ in range(5):
        p = rng.uniform(-0.3, 0.3, 2)
        G = sphere_chart.metric_at(p)
        cur = sphere_chart.curvature_at(p)
        assert np.max(np.abs(cur["ricci"] - G)) < 1e-6
        v = rng.normal(size=2)
        v /= sphere_chart.norm(p, v)
        val = float(v @ cur["ricci"] @ v)
        assert abs(val - 1.0) < 1e-6  # Ric(v, v) = (n-1) |v|^2 on the unit sphere


def test_poincare_ricci(poincare_chart, rng):
    for _ in range(5):
        p = rng.uniform(-0.3, 0.3, 2)
        G = poincare_chart.metric_at(p)
        cur = poincare_chart.curvature_at(p)
        assert np.max(np.abs(cur["ricci"] + G)) < 1e-6


def test_curvature_needs_interior_margin(sphere_chart):
    with pytest.raises(ModelError):
        sphere_chart.curvature_at([1.0, 0.0])


def test_riemann_antisymmetries(rng):
    entries = {name: zoo.builtin(name, 2, *extra) for name, extra in
               (("sphere", (1.0,)), ("hyperbolic", ()))}
    for entry in entries.values():
        M = entry.manifold
        for _ in range(5):
            p = rng.uniform(-0.2, 0.2, 2)
            R, _ = M.curvature(p)
            G = M.metric_at(p)
            lowered = np.einsum("lm,lijk->mijk", G, R)  # R_{mijk}
            asym_ij = lowered + np.swapaxes(lowered, 1, 2)
            asym_mk = lowered + np.transpose(lowered, (3, 1, 2, 0))
            assert np.max(np.abs(asym_ij)) < 1e-5
            assert np.max(np.abs(asym_mk)) < 1e-5


def test_modified_ricci_reduces_to_ricci_without_weight(sphere_chart):
    p = np.array([0.1, -0.2])
    ric = sphere_chart.curvature_at(p)["ricci"]
    assert np.array_equal(sphere_chart.modified_ricci_at(p, 2.0), ric)
    assert np.array_equal(sphere_chart.modified_ricci_at(p, 7.5), ric)


def test_modified_ricci_gaussian_origin():
    M = zoo.gaussian(2, 1.0).manifold
    assert np.allclose(M.modified_ricci_at([0.0, 0.0], 4.0), np.eye(2), atol=1e-10)


def test_modified_ricci_saddle_origin():
    M = zoo.saddle_weight(2, 1.0).manifold
    got = M.modified_ricci_at([0.0, 0.0], 4.0)
    assert np.allclose(got, np.diag([-2.0, 0.0]), atol=1e-10)
    e1 = np.array([1.0, 0.0])
    assert abs(float(e1 @ got @ e1) + 2.0) < 1e-10


def test_modified_ricci_conventions():
    M = zoo.gaussian(2, 1.0).manifold
    with pytest.raises(ConventionError):
        M.modified_ricci_at([0.1, 0.0], 1.5)  # N < n
    with pytest.raises(ConventionError):
        M.modified_ricci_at([0.1, 0.0], 2.0)  # N = n with grad V != 0


def test_closed_form_overrides_match_numeric(rng):
    for entry in (zoo.sphere(2, 1.0), zoo.hyperbolic(2), zoo.gaussian(2, 0.5)):
        M = entry.manifold
        pts = rng.uniform(-0.2, 0.2, size=(8, 2))
        assert np.max(np.abs(M.metric(pts) - M.oracles.metric(pts))) < 1e-8
        assert np.max(np.abs(M.christoffel(pts) - M.oracles.christoffel(pts))) < 1e-8
        _, ric = M.curvature(pts)
        assert np.max(np.abs(ric - M.oracles.ricci(pts))) < 1e-5


def test_weight_hessian_flat_gaussian():
    M = zoo.gaussian(2, 2.0).manifold
    H = M.weight_hessian(np.array([0.3, -0.4]))
    assert np.allclose(H, 2.0 * np.eye(2), atol=1e-12)


def test_volume_density():
    M = zoo.gaussian(2, 1.0).manifold
    p = np.array([0.5, 0.0])
    assert abs(M.volume_density(p) - np.exp(-0.125)) < 1e-12
