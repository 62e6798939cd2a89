import numpy as np
import pytest

from bmcd import zoo
from bmcd.errors import ModelError, PreconditionError
from bmcd.transport import build_potential, midpoint_operators
from bmcd.verify import (RasterBudget, bm_check, cd_check_along_transport,
                         counterexample_search, curvature_aligned_cube,
                         interpolation_defect, midpoint_linearization_radius,
                         midpoint_raster, pushforward_raster, renyi_entropy,
                         theta)

BUDGET = RasterBudget(samples_per_axis=21, cells_per_axis=8)


@pytest.fixture(scope="module")
def saddle():
    return zoo.saddle_weight(2, 1.0)


@pytest.fixture(scope="module")
def saddle_setup(saddle):
    M = saddle.manifold
    spec = build_potential(M, [0.0, 0.0], [1.0, 0.0], N=4.0, lam=0.1)
    A = curvature_aligned_cube(M, spec, 1e-4)
    return M, spec, A


def test_cube_flat_eigenbasis(saddle_setup):
    M, spec, A = saddle_setup
    assert np.allclose(A.basis.T @ A.basis, np.eye(2), atol=1e-10)
    assert np.max(np.abs(A.eigenvalues)) < 1e-12


def test_cube_sphere_eigenvalues():
    entry = zoo.sphere(2, 1.0)
    lam = 0.1
    spec = build_potential(entry.manifold, [0.02, -0.01], [1.0, 0.3], N=2.0, lam=lam)
    A = curvature_aligned_cube(entry.manifold, spec, lam ** 4)
    vals = np.sort(A.eigenvalues)
    assert abs(vals[0]) < 1e-10                    # direction of the transport
    assert abs(vals[1] - lam ** 2) < 1e-6 * lam ** 2 + 1e-10  # sectional * lam^2
    G = entry.manifold.metric_at(spec.x0)
    assert np.max(np.abs(A.basis.T @ G @ A.basis - np.eye(2))) < 1e-10


def test_cube_size_cap(saddle_setup):
    M, spec, _ = saddle_setup
    with pytest.raises(ModelError):
        curvature_aligned_cube(M, spec, 10.0 * spec.lam ** 4)


def test_pushforward_time_zero_measures_cube(saddle_setup):
    M, spec, A = saddle_setup
    raster = pushforward_raster(M, spec, 0.0, A, BUDGET)
    # m(A) = int e^{x1^2} over the cube = eps^2 (1 + O(eps^2))
    assert abs(raster.measure - A.eps ** 2) < 1e-8 * A.eps ** 2
    assert raster.jacobian_estimate is not None


def test_pushforward_translation_invariance():
    entry = zoo.euclidean(2)
    spec = build_potential(entry.manifold, [0.0, 0.0], [1.0, 0.0], N=4.0, lam=0.1)
    A = curvature_aligned_cube(entry.manifold, spec, 1e-4)
    for t in (0.3, 1.0):
        raster = pushforward_raster(entry.manifold, spec, t, A, BUDGET)
        assert abs(raster.measure - A.eps ** 2) < 1e-10 * A.eps ** 2


def test_pushforward_weight_ratio(saddle_setup):
    M, spec, A = saddle_setup
    r0 = pushforward_raster(M, spec, 0.0, A, BUDGET)
    r1 = pushforward_raster(M, spec, 1.0, A, BUDGET)
    got = r1.measure / r0.measure
    expected = np.exp(spec.lam ** 2)  # weight -x1^2 gains e^{lam^2} under translation
    assert abs(got / expected - 1.0) < 5e-3


def test_midpoint_translation_exact(saddle_setup):
    M, spec, A = saddle_setup
    mid = midpoint_raster(M, A, spec, 0.5, BUDGET)
    half = pushforward_raster(M, spec, 0.5, A, BUDGET)
    assert abs(mid.measure / half.measure - 1.0) < 1e-10


def test_midpoint_requires_interior_time(saddle_setup):
    M, spec, A = saddle_setup
    with pytest.raises(ModelError):
        midpoint_raster(M, A, spec, 0.0, BUDGET)


def test_degenerate_cube_single_cell(saddle_setup):
    M, spec, _ = saddle_setup
    from bmcd.verify import CubeSet
    tiny = CubeSet(M, spec.x0.copy(), np.eye(2), 1e-13)
    raster = pushforward_raster(M, spec, 0.0, tiny,
                                RasterBudget(samples_per_axis=3, cells_per_axis=2))
    assert raster.marked_count == 1


def test_midpoint_control_on_sphere():
    entry = zoo.sphere(2, 1.0)
    M = entry.manifold
    lam = 0.1
    spec = build_potential(M, [0.02, -0.01], [1.0, 0.3], N=2.0, lam=lam)
    A = curvature_aligned_cube(M, spec, lam ** 4)
    mid = midpoint_raster(M, A, spec, 0.5, BUDGET)
    half = pushforward_raster(M, spec, 0.5, A, BUDGET)
    ratio = (mid.measure / half.measure) ** (1.0 / 2.0) - 1.0
    assert ratio <= 5.0 * (lam ** 4 + A.eps)


def test_linearization_radius_small(saddle_setup):
    M, spec, A = saddle_setup
    ops = midpoint_operators(M, spec)
    rho = midpoint_linearization_radius(M, A, spec, ops)
    assert rho <= 10.0 * (A.eps ** 2 + A.eps * spec.lam ** 4)


def test_linear_problem_coordinatewise_convexity(saddle_setup, rng):
    M, spec, A = saddle_setup
    ops = midpoint_operators(M, spec)
    T = np.linalg.solve(spec.chart.basis, A.basis)
    M1 = T.T @ ops.M1 @ T
    M2 = T.T @ ops.M2 @ T
    M3 = T.T @ ops.M3 @ T
    U = A.lattice_u(5)
    for x in U:
        for xp in U:
            sol = np.linalg.solve(M3, 0.5 * (M1 @ x + M2 @ xp))
            assert np.all(sol >= -1e-10) and np.all(sol <= A.eps + 1e-10)


def test_theta_flat_brackets():
    entry = zoo.euclidean(2)
    M = entry.manifold
    spec = build_potential(M, [0.0, 0.0], [1.0, 0.0], N=4.0, lam=0.1)
    eps = 1e-4
    A = curvature_aligned_cube(M, spec, eps)
    B_pts = A.points(9) + np.array([0.1, 0.0])
    v = 0.1
    th_min = theta(M, A, B_pts, K=1.0, samples=9)
    assert v - eps * np.sqrt(2) - 1e-12 <= th_min <= v + 1e-12
    th_max = theta(M, A, B_pts, K=-1.0, samples=9)
    assert v - 1e-12 <= th_max <= v + eps * np.sqrt(2) + 1e-12


def test_theta_identical_sets_zero(saddle_setup):
    M, spec, A = saddle_setup
    assert theta(M, A, A, K=1.0, samples=5) < 1e-12


def test_theta_matches_scale(saddle_setup):
    M, spec, A = saddle_setup
    def b_gen(s):
        T = np.linalg.solve(spec.chart.basis, A.basis)
        return spec.transport_from_u(1.0, A.lattice_u(s) @ T.T)
    th = theta(M, A, b_gen, K=0.0, samples=9)
    assert abs(th - spec.lam) <= 2.0 * A.eps


def test_renyi_entropy_uniform(saddle_setup):
    M, spec, A = saddle_setup
    r0 = pushforward_raster(M, spec, 0.0, A, BUDGET)
    m_A = r0.measure
    weights = np.full(16, m_A / 16)
    rho = np.full(16, 1.0 / m_A)
    for N in (2.0, 4.0, 16.0, 64.0):
        val = renyi_entropy(rho, weights, N)
        assert abs(val + m_A ** (1.0 / N)) < 1e-12
    vals = [renyi_entropy(rho, weights, N) for N in (2.0, 4.0, 16.0, 64.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))  # toward -m(support)


def test_renyi_entropy_requires_normalization():
    with pytest.raises(ModelError):
        renyi_entropy([1.0, 1.0], [1.0, 1.0], 2.0)


def test_renyi_change_of_variables(saddle_setup):
    # entropy of the pushforward computed on the source lattice vs from a
    # density histogram on the image raster
    M, spec, A = saddle_setup
    N = 4.0
    t = 1.0
    q = 32
    axes = [(np.arange(q) + 0.5) * (A.eps / q)] * 2
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    T = np.linalg.solve(spec.chart.basis, A.basis)
    du = (A.eps / q) ** 2
    dens = spec.chart.volume_density(centers @ T.T)
    mass = float(np.sum(dens) * du)
    rho0 = 1.0 / mass
    delta = 1e-7
    J = np.empty((centers.shape[0], 2, 2))
    for a in range(2):
        E = np.zeros_like(centers)
        E[:, a] = delta
        plus = spec.chart.inverse(spec.transport_from_u(t, (centers + E) @ T.T))
        minus = spec.chart.inverse(spec.transport_from_u(t, (centers - E) @ T.T))
        J[:, :, a] = (plus - minus) / (2.0 * delta)
    img = spec.chart.inverse(spec.transport_from_u(t, centers @ T.T))
    jac = np.abs(np.linalg.det(J)) * spec.chart.volume_density(img) / dens
    source_side = float(-np.sum(rho0 ** (-1.0 / N) * jac ** (1.0 / N)
                                * rho0 * dens * du))
    # target-side histogram: bin the transported mass on a grid over the image;
    # pad the sample bbox by half a sample step so the grid spans the true box
    lo, hi = img.min(axis=0), img.max(axis=0)
    pad = (hi - lo) / (2.0 * (q - 1))
    lo, hi = lo - pad, hi + pad
    cells = 16
    h = (hi - lo) / cells
    idx = np.clip(((img - lo) / h).astype(int), 0, cells - 1)
    flat = idx[:, 0] * cells + idx[:, 1]
    mass_per_sample = rho0 * dens * du
    binned = np.bincount(flat, weights=mass_per_sample, minlength=cells * cells)
    cellvol = float(np.prod(h))
    dens_img = spec.chart.volume_density(
        lo + (np.stack(np.unravel_index(np.arange(cells * cells),
                                        (cells, cells)), axis=-1) + 0.5) * h)
    m_meas = cellvol * dens_img
    rho_img = np.where(m_meas > 0, binned / m_meas, 0.0)
    target_side = float(-np.sum(rho_img[binned > 0] ** (1.0 - 1.0 / N)
                                * m_meas[binned > 0]))
    assert abs(source_side - target_side) / abs(source_side) < 1e-3


def test_bm_flat_translate_margin(saddle_setup):
    entry = zoo.euclidean(2)
    M = entry.manifold
    spec = build_potential(M, [0.0, 0.0], [1.0, 0.0], N=4.0, lam=0.1)
    A = curvature_aligned_cube(M, spec, 1e-4)
    report = bm_check(M, spec, A, 0.5, 0.0, 4.0, BUDGET)
    assert report.margin >= -report.error_bar
    assert abs(report.margin) < 1e-9 * report.lhs


def test_bm_counterexample_margin_negative(saddle_setup):
    M, spec, A = saddle_setup
    report = bm_check(M, spec, A, 0.5, 0.0, 4.0, BUDGET)
    assert report.certified_violation
    rel = report.margin / report.m_A ** 0.25
    assert abs(rel + spec.lam ** 2 / 16.0) < 0.1 * spec.lam ** 2 / 16.0


def test_interpolation_defect_flat_zero():
    entry = zoo.euclidean(2)
    spec = build_potential(entry.manifold, [0.0, 0.0], [1.0, 0.0], N=4.0, lam=0.1)
    rep = interpolation_defect(entry.manifold, spec, 0.0, 4.0)
    assert abs(rep.defect) < 1e-12
    assert rep.D0 == 1.0


def test_interpolation_defect_saddle_positive_and_stable(saddle):
    M = saddle.manifold
    rates = []
    for lam in (0.1, 0.05):
        spec = build_potential(M, [0.0, 0.0], [1.0, 0.0], N=4.0, lam=lam)
        rep = interpolation_defect(M, spec, 0.0, 4.0)
        assert rep.defect > 0.0
        assert not rep.informational
        rates.append(rep.defect_rate)
    assert abs(rates[0] - rates[1]) < 0.5 * min(rates)
    assert abs(rates[1] - 1.0 / 16.0) < 5e-3


def test_interpolation_defect_sphere_nonpositive():
    entry = zoo.sphere(2, 1.0)
    spec = build_potential(entry.manifold, [0.0, 0.0], [1.0, 0.0], N=2.0, lam=0.1)
    rep = interpolation_defect(entry.manifold, spec, 1.0, 2.0)
    assert rep.defect <= 1e-12
    assert rep.informational  # curvature bound holds, no violation predicted


def test_cd_margins_flat():
    entry = zoo.euclidean(2)
    M = entry.manifold
    spec = build_potential(M, [0.0, 0.0], [1.0, 0.0], N=4.0, lam=0.1)
    A = curvature_aligned_cube(M, spec, 1e-4)
    records = cd_check_along_transport(M, spec, A, 0.0, 4.0, [0.25, 0.5, 0.75],
                                       BUDGET)
    for rec in records:
        assert rec["margin"] >= -1e-4


def test_cd_margins_counterexample_negative(saddle_setup):
    M, spec, A = saddle_setup
    records = cd_check_along_transport(M, spec, A, 0.0, 4.0, [0.5], BUDGET)
    assert records[0]["margin"] < -1e-6


def test_counterexample_pipeline(saddle):
    report = counterexample_search(saddle.manifold, 0.0, 4.0, 0.3,
                                   [0.0, 0.0], [1.0, 0.0], budget=BUDGET)
    assert report.certified
    assert report.certified_lam == 0.1
    assert report.lambdas[0].upper_bound_ok
    assert report.precondition_value == -2.0


def test_counterexample_precondition_sphere():
    entry = zoo.sphere(2, 1.0)
    with pytest.raises(PreconditionError):
        counterexample_search(entry.manifold, 1.0, 2.0, 0.1,
                              [0.0, 0.0], [1.0, 0.0], budget=BUDGET)


def test_counterexample_precondition_flat_negative_bound():
    entry = zoo.euclidean(2)
    with pytest.raises(PreconditionError):
        counterexample_search(entry.manifold, -1.0, 4.0, 0.1,
                              [0.0, 0.0], [1.0, 0.0], budget=BUDGET)


def test_raster_refinement_consistency(saddle_setup):
    M, spec, A = saddle_setup
    coarse = pushforward_raster(M, spec, 0.5, A,
                                RasterBudget(samples_per_axis=21, cells_per_axis=4))
    fine = pushforward_raster(M, spec, 0.5, A,
                              RasterBudget(samples_per_axis=21, cells_per_axis=8))
    change = abs(fine.measure - coarse.measure) / coarse.measure
    assert change < 0.03
    assert abs(fine.measure - coarse.measure) <= coarse.error_bar + fine.error_bar \
        + 1e-12 * coarse.measure


def test_measure_comparability_uniform(saddle):
    M = saddle.manifold
    ratios = []
    for lam in (0.1, 0.05, 0.025):
        spec = build_potential(M, [0.0, 0.0], [1.0, 0.0], N=4.0, lam=lam)
        A = curvature_aligned_cube(M, spec, lam ** 4)
        half = pushforward_raster(M, spec, 0.5, A, BUDGET)
        base = pushforward_raster(M, spec, 0.0, A, BUDGET)
        ratios.append(half.measure / base.measure)
    assert max(ratios) < 1.1


def test_theta_expansion_in_eps(saddle):
    M = saddle.manifold
    lam = 0.1
    spec = build_potential(M, [0.0, 0.0], [1.0, 0.0], N=4.0, lam=lam)
    for eps in (1e-4, 5e-5):
        A = curvature_aligned_cube(M, spec, eps)
        def b_gen(s, A=A):
            T = np.linalg.solve(spec.chart.basis, A.basis)
            return spec.transport_from_u(1.0, A.lattice_u(s) @ T.T)
        th = theta(M, A, b_gen, K=0.0, samples=9)
        assert abs(th - lam) <= 1.5 * eps
