import itertools
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from satsci.errors import ParameterError
from satsci.harness.scenes import SceneSpec, generate_scene
from satsci.theory import (BoundParams, beta_T, delta_T, estimate_ps, exact_ps, normalized_bound_g, optimal_density,
                           power_curve, theorem_bound, uniform_scene_curve)

RHO = 2.0


def enumerate_ps(x_pixel, T, p):
    """Exact saturation probability of one pixel by summing over all mask patterns."""
    total = 0.0
    for bits in itertools.product((0, 1), repeat=len(x_pixel)):
        prob = math.prod(p if b else 1 - p for b in bits)
        if sum(b * v for b, v in zip(bits, x_pixel)) >= T:
            total += prob
    return total


def test_ps_zero_above_cap():
    x = np.ones((4, 4, 3))
    est, _ = estimate_ps(x, 3 * RHO / 2 + 1e-6, 0.7, trials=50, seed=0)
    assert est == 0.0


@pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
def test_ps_single_pixel_enumeration(p):
    x = np.full((1, 1, 2), RHO / 2)
    # boundary case: T = rho/2 saturates when at least one bit is open
    exact = enumerate_ps([RHO / 2] * 2, RHO / 2, p)
    assert exact == pytest.approx(1 - (1 - p) ** 2)
    est, hw = estimate_ps(x, RHO / 2, p, trials=20000, seed=1)
    assert abs(est - exact) <= hw
    # strict interior: both bits needed
    exact = enumerate_ps([RHO / 2] * 2, 0.6 * RHO, p)
    assert exact == pytest.approx(p**2)
    est, hw = estimate_ps(x, 0.6 * RHO, p, trials=20000, seed=2)
    assert abs(est - exact) <= hw


def test_ps_half_width_formula():
    _, hw = estimate_ps(np.ones((2, 3, 2)), 1.0, 0.5, trials=10, seed=0)
    assert hw == pytest.approx(math.sqrt(math.log(200) / (2 * 10 * 6)))


def test_ps_decreases_with_threshold_on_bright_scene():
    x = generate_scene(SceneSpec("bright_field", 32, 32, 8, seed=0))
    ests = [estimate_ps(x, tb * 8, 0.5, trials=100, seed=4)[0] for tb in (0.25, 0.5, 0.75)]
    assert ests[0] > ests[1] > ests[2]


def test_ps_monotone_in_p_with_common_random_numbers():
    x = generate_scene(SceneSpec("moving_square", 16, 16, 8, seed=2))
    ests = [estimate_ps(x, 2.0, p, trials=200, seed=9)[0] for p in (0.1, 0.3, 0.5, 0.7, 0.9)]
    assert all(b >= a for a, b in zip(ests, ests[1:]))


def test_ps_parameter_errors():
    with pytest.raises(ParameterError):
        estimate_ps(np.ones((1, 1, 1)), 1.0, 0.5, trials=0)
    with pytest.raises(ParameterError):
        estimate_ps(np.ones((1, 1, 1)), 1.0, 1.0, trials=5)


def test_beta_examples():
    assert theorem_bound(BoundParams(p=0.5, T=2, B=8, rho=1, delta=0, r=1, n=10)).beta_T == 2
    assert beta_T(10, 8, 2) == 0


def test_bound_without_saturation_term():
    P = BoundParams(p=0.4, T=8.0, B=8, rho=2.0, delta=0.02, r=1.0, n=64, eps1=0.01, eps2=0.05, p_s=0.0)
    expect = math.sqrt((1 + 8 * 0.4 / 0.6) * 0.02 + 4 * 0.01 / (0.4 * 0.6))
    assert theorem_bound(P).rhs == pytest.approx(expect, rel=1e-14)


def mp_bound(p, T, B, rho, delta, r, n, e1, e2, ez, ps):
    mp.mp.dps = 50
    p, T, B, rho, delta, r, n, e1, e2, ez, ps = (mp.mpf(str(v)) for v in (p, T, B, rho, delta, r, n, e1, e2, ez, ps))
    beta = max(B * rho / 2 - T, 0)
    rhs = (2 * mp.sqrt((1 - ps) / (n * B * p)) * ez
           + mp.sqrt((1 + B * p / (1 - p)) * delta + rho**2 * e1 / (p * (1 - p)) + (ps + e2) * beta * (beta / B + 4 * rho)))
    prob = 1 - 2 ** (B * r + 1) * mp.exp(-n * e1**2 / (2 * B**2)) - mp.exp(-2 * n * e2**2)
    return float(rhs), float(prob)


def test_bound_high_precision_spot_value():
    args = dict(p=0.3, T=2.5, B=8, rho=2.0, delta=0.01, r=1.5, n=4096, eps1=0.01, eps2=0.02, eps_z=0.5, p_s=0.12)
    res = theorem_bound(BoundParams(**args))
    # frozen from a 50-digit evaluation
    assert res.rhs == pytest.approx(2.6408368850795467364, rel=1e-13)
    assert res.success_prob_lower == pytest.approx(-8164.8652471966171322, rel=1e-12)
    assert (res.rhs, res.success_prob_lower) == pytest.approx(mp_bound(*args.values()), rel=1e-13)


def test_success_probability_meaningful_regime():
    res = theorem_bound(BoundParams(p=0.3, T=2.5, B=8, rho=2.0, delta=0.01, r=1.5, n=2 * 10**7))
    assert 0 < res.success_prob_lower < 1
    assert res.success_prob_lower == pytest.approx(mp_bound(0.3, 2.5, 8, 2.0, 0.01, 1.5, 2 * 10**7, 0.01, 0.01, 0, 0)[1], rel=1e-12)


@pytest.mark.parametrize("p", [0.0, 1.0])
def test_bound_rejects_degenerate_density(p):
    with pytest.raises(ParameterError):
        BoundParams(p=p, T=1, B=2, rho=1, delta=0, r=1, n=4)


@given(st.floats(0.05, 0.95), st.floats(0.1, 7.9), st.floats(0.1, 7.9), st.floats(0, 1))
def test_bound_monotone_in_threshold(p, t1, t2, ps):
    lo, hi = sorted((t1, t2))
    common = dict(p=p, B=8, rho=2.0, delta=0.01, r=1.0, n=256, eps_z=0.1)
    # p_s nonincreasing in T: use a larger p_s at the smaller threshold
    b_lo = theorem_bound(BoundParams(T=lo, p_s=min(1.0, ps + 0.1), **common)).rhs
    b_hi = theorem_bound(BoundParams(T=hi, p_s=ps, **common)).rhs
    assert b_hi <= b_lo + 1e-12


def test_delta_and_beta_monotone():
    T = np.linspace(0.01, 10, 200)
    d = delta_T(T, 8, 2.0)
    b = beta_T(T, 8, 2.0)
    assert np.all(np.diff(d) <= 0) and np.all(np.diff(b) <= 0)
    assert np.all(d[T >= 8] == 0) and np.all(b[T >= 8] == 0)


def test_g_matches_squared_bound():
    curve = power_curve(2)
    for p in (0.1, 0.35, 0.8):
        for T in (1.0, 4.0, 9.0):
            g = normalized_bound_g(p, T, 8, 2.0, 0.04, 0.01, 0.01, curve)
            rhs = theorem_bound(BoundParams(p=p, T=T, B=8, rho=2.0, delta=0.04, r=1, n=64, p_s=p**2)).rhs
            assert g * 4.0 == pytest.approx(rhs**2, rel=1e-12)


def test_g_saturation_free_when_T_at_cap():
    a = normalized_bound_g(0.3, 8.0, 8, 2.0, 0.04, 0.01, 0.01, power_curve(2))
    b = normalized_bound_g(0.3, 8.0, 8, 2.0, 0.04, 0.01, 0.01, lambda p, T: np.ones_like(p))
    assert a == b


def test_g_poles():
    g = normalized_bound_g(np.array([1e-6, 0.5, 1 - 1e-6]), 2.0, 8, 2.0, 0.01, 0.01, 0.01, power_curve(2))
    assert g[0] > 100 * g[1] and g[2] > 100 * g[1]


def test_g_minimizer_below_half_dense_grid():
    p_grid = np.round(np.arange(1, 100) / 100, 2)
    g = normalized_bound_g(p_grid, 2.0, 8, 1.0, 0.01, 0.01, 0.01, power_curve(2))
    assert p_grid[np.argmin(g)] < 0.5


@pytest.mark.parametrize("k", [1, 2, 3])
def test_optimal_density_properties(k):
    T_grid = [tb * 8 for tb in np.arange(1, 11) / 10]
    ps = [p for _, p in optimal_density(T_grid, 8, 2.0, 0.01, 0.01, 0.01, power_curve(k))]
    assert all(p < 0.5 for p in ps)
    assert all(b >= a for a, b in zip(ps, ps[1:]))


def test_optimal_density_below_half_for_threshold_dependent_curve():
    T_grid = [tb * 8 for tb in np.arange(1, 11) / 10]
    out = optimal_density(T_grid, 8, 2.0, 0.01, 0.01, 0.01, uniform_scene_curve(1.0, 8))
    assert all(p < 0.5 for _, p in out)


def test_optimal_density_constant_above_cap():
    out = optimal_density([8.0, 9.0, 12.0], 8, 2.0, 0.01, 0.01, 0.01, power_curve(3))
    assert len({p for _, p in out}) == 1


def test_optimal_density_tie_breaks_low():
    out = optimal_density([1.0], 1, 2.0, 0.0, 0.01, 0.01, lambda p, T: np.zeros_like(p),
                          p_grid=[0.5 - 1e-9, 0.5 + 1e-9])
    assert out[0][1] == 0.5 - 1e-9


def test_uniform_scene_curve_matches_enumeration():
    curve = uniform_scene_curve(0.75, 4)
    for p in (0.2, 0.6):
        for T in (0.5, 1.5, 2.9):
            assert curve(np.array([p]), T)[0] == pytest.approx(enumerate_ps([0.75] * 4, T, p), abs=1e-12)


def test_exact_ps_matches_enumeration_and_estimate():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, (3, 2, 4))
    T, p = 1.3, 0.45
    brute = np.mean([enumerate_ps(x[i, j], T, p) for j in range(2) for i in range(3)])
    assert exact_ps(x, T, p) == pytest.approx(brute, abs=1e-14)
    est, hw = estimate_ps(x, T, p, trials=5000, seed=3)
    assert abs(est - brute) <= hw
