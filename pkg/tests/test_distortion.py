import numpy as np
import pytest

from bmcd.distortion import (DistortionParams, SampledFunction,
                             midpoint_inequality_defect, ode_defect, sigma,
                             tau, tau_expansion_defect)
from bmcd.errors import ModelError


def test_sigma_flat_case():
    assert sigma(0.3, 0.0, 1.0, 2.0) == 0.3


def test_sigma_positive_curvature_value():
    got = sigma(0.5, 1.0, 1.0, np.pi / 2)
    assert abs(got - np.sin(np.pi / 4) / np.sin(np.pi / 2)) < 1e-15


def test_sigma_infinite_regime():
    assert sigma(0.5, 4.0 * np.pi ** 2, 1.0, 1.0) == np.inf
    assert DistortionParams(4.0 * np.pi ** 2, 1.0, 0.5, 1.0).infinite_regime


def test_sigma_negative_curvature():
    alpha = 1.3
    got = sigma(0.25, -1.0, 1.0, 1.3)
    assert abs(got - np.sinh(0.25 * alpha) / np.sinh(alpha)) < 1e-15


def test_sigma_continuity_across_flat(rng):
    for _ in range(20):
        t = rng.uniform(0.0, 1.0)
        theta = rng.uniform(0.0, 2.0)
        assert abs(sigma(t, 1e-8, 2.0, theta) - t) < 1e-7
        assert abs(sigma(t, -1e-8, 2.0, theta) - t) < 1e-7


def test_tau_flat_is_exactly_t(rng):
    for _ in range(50):
        t = rng.uniform(0.0, 1.0)
        assert tau(t, 0.0, rng.uniform(1.1, 9.0), rng.uniform(0.0, 3.0)) == t


def test_tau_endpoint_one():
    assert abs(tau(1.0, 1.0, 2.5, 0.7) - 1.0) < 1e-15
    assert tau(0.0, -2.0, 3.0, 0.5) == 0.0


def test_tau_positive_curvature_value():
    # t^{1/N} sigma_{K, N-1}^{(t)}(theta)^{1 - 1/N} at t=1/2, K=1, N=2, theta=1
    expected = np.sqrt(0.5 * np.sin(0.5) / np.sin(1.0))
    assert abs(tau(0.5, 1.0, 2.0, 1.0) - expected) < 1e-15


def test_tau_needs_dimension_above_one():
    with pytest.raises(ModelError):
        tau(0.5, 1.0, 1.0, 0.5)


def test_tau_expansion_defect_flat_zero():
    assert tau_expansion_defect(0.0, 3.0, 0.5, 0.1) == 0.0


def test_tau_expansion_defect_vanishes_quadratically():
    rates = [abs(tau_expansion_defect(1.0, 3.0, 0.5, lam)) / lam ** 2
             for lam in (0.1, 0.05, 0.025, 0.0125)]
    assert all(a > b for a, b in zip(rates, rates[1:]))
    assert rates[-1] < 1e-3 * rates[0] * 80  # clean o(lam^2) trend


def test_tau_curvature_difference_law():
    K, delta, N, t = 1.0, 0.5, 3.0, 0.5
    for lam in (0.1, 0.05, 0.025):
        gap = tau(t, K - delta, N, lam) - tau(t, K, N, lam) \
            + t * (1.0 - t ** 2) * delta * lam ** 2 / (6.0 * N)
        assert abs(gap) < 5e-3 * lam ** 2


def test_sampled_function_validation():
    with pytest.raises(ModelError):
        SampledFunction(np.linspace(0, 1, 33), np.ones(33))
    with pytest.raises(ModelError):
        SampledFunction(np.linspace(0, 1, 65), -np.ones(65))


def test_ode_defect_exact_solution():
    f = SampledFunction.from_callable(lambda s: np.sin(2.0 * s), 129)
    value, _ = ode_defect(f, 4.0)
    assert abs(value) < 1e-4


def test_ode_defect_quadratic():
    f = SampledFunction.from_callable(lambda s: s * s, 129)
    value, _ = ode_defect(f, 0.0)
    assert abs(value - 2.0) < 1e-9


def test_ode_defect_constant_negative_lambda():
    f = SampledFunction.from_callable(lambda s: 1.0, 129)
    value, _ = ode_defect(f, -1.0)
    assert abs(value + 1.0) < 1e-12


def test_ode_defect_lambda_cap():
    f = SampledFunction.from_callable(lambda s: 1.0, 129)
    with pytest.raises(ModelError):
        ode_defect(f, np.pi ** 2)


def test_midpoint_defect_linear_equality():
    f = SampledFunction.from_callable(lambda s: 1.0 + 0.5 * s, 129)
    value, _ = midpoint_inequality_defect(f, 0.0)
    assert abs(value) < 1e-12


def test_midpoint_defect_sine_equality():
    f = SampledFunction.from_callable(lambda s: np.sin(2.0 * s), 129)
    value, _ = midpoint_inequality_defect(f, 4.0)
    assert abs(value) < 1e-4


def test_midpoint_defect_convex_strict():
    f = SampledFunction.from_callable(np.exp, 129)
    value, triple = midpoint_inequality_defect(f, 0.0)
    assert value > 0.0
    s0, s1, t = triple
    assert 0.0 <= s0 < s1 <= 1.0 and 0.0 < t < 1.0


def _random_ode_nonnegative(rng):
    """Random f >= 0 with f'' + Lam f >= 0 on the grid, plus its Lam."""
    lam = float(rng.uniform(-5.0, 5.0))
    s = np.linspace(0.0, 1.0, 129)
    if lam > 1e-12:
        root = np.sqrt(lam)
        phase = rng.uniform(0.05, max(np.pi - root - 0.05, 0.1))
        f = rng.uniform(0.1, 2.0) * np.sin(root * s + phase)
        f = np.abs(f) + rng.uniform(0.0, 0.5)  # + c keeps f'' + lam f >= 0
    elif lam < -1e-12:
        root = np.sqrt(-lam)
        b = rng.uniform(0.0, 1.0)
        f = rng.uniform(0.1, 2.0) * np.cosh(root * (s - b))
    else:
        f = rng.uniform(0.1, 2.0) * (s - rng.uniform(0, 1)) ** 2 + rng.uniform(0.01, 1.0)
    return SampledFunction(s, f), lam


def test_comparison_forward_property(rng):
    checked = 0
    while checked < 40:
        f, lam = _random_ode_nonnegative(rng)
        value, _ = ode_defect(f, lam)
        if value < 0.0:
            continue
        worst, _ = midpoint_inequality_defect(f, lam)
        assert worst >= -1e-6, (lam, worst)
        checked += 1


def test_comparison_reverse_estimator(rng):
    s = np.linspace(0.0, 1.0, 129)
    for _ in range(25):
        lam = float(rng.uniform(-5.0, 5.0))
        a, b = rng.uniform(0.2, 1.5, size=2)
        f = a * np.asarray(sigma(1.0 - s, lam, 1.0, 1.0)) \
            + b * np.asarray(sigma(s, lam, 1.0, 1.0))
        fn = SampledFunction(s, f)
        worst_mid, _ = midpoint_inequality_defect(fn, lam)
        assert worst_mid >= -1e-6
        worst_ode, _ = ode_defect(fn, lam)
        assert worst_ode >= -1e-3


def test_sigma_tau_monotonicity(rng):
    # sigma <= tau in the nonnegative-curvature regime, used by the
    # interpolation bound.
    for _ in range(40):
        K = rng.uniform(0.0, 2.0)
        N = rng.uniform(1.5, 6.0)
        t = rng.uniform(0.0, 1.0)
        theta = rng.uniform(0.0, 1.0)
        assert sigma(t, K, N, theta) <= tau(t, K, N, theta) + 1e-12
