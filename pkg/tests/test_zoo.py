import numpy as np
import pytest

from bmcd import geodesics as geo
from bmcd import zoo
from bmcd.errors import ModelError


def test_builtin_lookup_and_errors():
    assert zoo.builtin("euclidean", 2).manifold.dim == 2
    with pytest.raises(ModelError):
        zoo.builtin("torus", 2)
    with pytest.raises(ModelError):
        zoo.builtin("sphere", 2)  # missing radius
    with pytest.raises(ModelError):
        zoo.builtin("sphere", 2, -1.0)
    with pytest.raises(ModelError):
        zoo.builtin("euclidean", 1)


def test_parse_builtin_syntax():
    entry = zoo.parse_builtin("sphere(2, 1)")
    assert entry.params == {"n": 2, "r": 1.0}
    with pytest.raises(ModelError):
        zoo.parse_builtin("sphere[2,1]")


def test_euclidean_cd_status():
    entry = zoo.euclidean(2)
    flags = {(s.K, s.N): s.holds for s in entry.cd_status}
    assert flags[(0.0, 2.0)] and flags[(0.0, 4.0)]
    assert not flags[(1.0, 2.0)]


def test_sphere_modified_ricci_equals_metric():
    entry = zoo.sphere(2, 1.0)
    M = entry.manifold
    p = np.array([0.1, -0.2])
    assert np.max(np.abs(M.modified_ricci_at(p, 2.0) - M.metric_at(p))) < 1e-6


def test_saddle_cd_failure_witness():
    entry = zoo.saddle_weight(2, 1.0)
    failing = [s for s in entry.cd_status if not s.holds][0]
    M = entry.manifold
    ric = M.modified_ricci_at(failing.witness_point, failing.N)
    v = failing.witness_direction
    assert float(v @ ric @ v) < failing.K - 1e-6
    assert abs(float(v @ ric @ v) + 2.0) < 1e-10


def test_zoo_oracle_agreement(rng):
    """Closed-form oracles match the numeric pipeline on random safe queries."""
    entries = [zoo.euclidean(2), zoo.sphere(2, 1.0), zoo.hyperbolic(2),
               zoo.gaussian(2, 1.0), zoo.saddle_weight(2, 0.5)]
    for entry in entries:
        M = entry.manifold
        o = entry.oracles
        for _ in range(20):
            p = rng.uniform(-0.4, 0.4, 2) * entry.safe_radius
            v = rng.normal(size=2)
            v = rng.uniform(0.05, 0.3) * v / M.norm(p, v)
            q_num = geo.exp_map(M, p, v, steps=192)
            q_orc = o.exp(p[None, :], v[None, :])[0]
            assert np.max(np.abs(q_num - q_orc)) < 1e-5
            v_orc = o.log(p[None, :], q_num[None, :])[0]
            assert np.max(np.abs(v_orc - v)) < 1e-5
            d = o.dist(p[None, :], q_num[None, :])[0]
            assert abs(d - M.norm(p, v)) < 1e-5
            assert np.max(np.abs(M.metric(p[None, :]) - o.metric(p[None, :]))) < 1e-8
            assert np.max(np.abs(M.christoffel(p[None, :])
                                 - o.christoffel(p[None, :]))) < 1e-8


def test_sphere_normal_density_closed_form():
    entry = zoo.sphere(2, 1.0)
    M = entry.manifold
    p = np.array([0.05, 0.1])
    chart = geo.normal_chart(M, p, geo.orthonormal_frame(M, p), steps=128,
                             check=False, use_oracles=False)
    U = np.array([[0.15, -0.1], [0.02, 0.0]])
    numeric = chart.volume_density(U)
    closed = np.exp(-M.weight(chart.forward(U))) * M.oracles.normal_density(U)
    assert np.max(np.abs(numeric - closed)) < 1e-6


def test_hyperbolic_normal_density_closed_form():
    entry = zoo.hyperbolic(2)
    M = entry.manifold
    p = np.array([-0.03, 0.06])
    chart = geo.normal_chart(M, p, geo.orthonormal_frame(M, p), steps=128,
                             check=False, use_oracles=False)
    U = np.array([[0.12, 0.05]])
    numeric = chart.volume_density(U)
    closed = M.oracles.normal_density(U)
    assert np.max(np.abs(numeric - closed)) < 1e-6


def test_gaussian_modified_ricci_profile():
    entry = zoo.gaussian(2, 1.0)
    M = entry.manifold
    x = np.array([0.5, 0.0])
    ric = M.modified_ricci_at(x, 3.0)
    assert np.allclose(ric, np.eye(2) - np.outer(x, x), atol=1e-10)
