"""Chi-squared machinery and threshold tests.

The independent oracle integrates the chi-squared density numerically
(adaptive Simpson); for one degree of freedom the integrand is first
substituted x = t^2 so the endpoint singularity disappears.  Quantile
oracles bisect the integrated CDF.  Nothing here reuses the closed forms
the implementation is built on.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from copymove.acontrario import (
    AContrarioParams,
    budget_params,
    chi2_cdf,
    chi2_inv,
    compute_threshold,
    erfinv,
    predicted_false_match_probability,
)

# ---------------------------------------------------------------- oracles


def _adaptive_simpson(f, a, b, tol=1e-13, depth=60):
    def simpson(x0, x2):
        x1 = 0.5 * (x0 + x2)
        return (x2 - x0) / 6.0 * (f(x0) + 4.0 * f(x1) + f(x2)), x1

    def recurse(x0, x2, whole, x1, eps, level):
        left, lm = simpson(x0, x1)
        right, rm = simpson(x1, x2)
        if level <= 0 or abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return recurse(x0, x1, left, lm, eps / 2.0, level - 1) + recurse(
            x1, x2, right, rm, eps / 2.0, level - 1
        )

    whole, mid = simpson(a, b)
    return recurse(a, b, whole, mid, tol, depth)


def chi2_cdf_oracle(x: float, dof: int) -> float:
    """CDF by quadrature.  dof=1 uses the substitution x = t**2, which maps
    the density with its inverse-sqrt singularity onto 2*phi(t)."""
    if x <= 0:
        return 0.0
    if dof == 1:
        f = lambda t: 2.0 * math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)
        return min(_adaptive_simpson(f, 0.0, math.sqrt(x)), 1.0)
    f = lambda u: 0.5 * math.exp(-0.5 * u)
    return min(_adaptive_simpson(f, 0.0, x), 1.0)


def chi2_inv_oracle(p: float, dof: int) -> float:
    lo, hi = 0.0, 1.0
    while chi2_cdf_oracle(hi, dof) < p:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi2_cdf_oracle(mid, dof) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


# ------------------------------------------------------------------ chi2


def test_cdf_at_zero():
    assert chi2_cdf(0.0, 1) == 0.0
    assert chi2_cdf(0.0, 2) == 0.0


def test_cdf_dof2_closed_form_midpoint():
    assert chi2_cdf(2.0 * math.log(2.0), 2) == 0.5


def test_cdf_rejects_negative_and_bad_dof():
    with pytest.raises(ValueError):
        chi2_cdf(-1e-9, 1)
    with pytest.raises(ValueError):
        chi2_cdf(1.0, 3)


def test_cdf_against_integration_oracle():
    for dof in (1, 2):
        for x in np.linspace(0.05, 40.0, 41):
            assert chi2_cdf(float(x), dof) == pytest.approx(
                chi2_cdf_oracle(float(x), dof), abs=1e-12
            )


def test_cdf_95_percent_point():
    assert chi2_cdf(3.8415, 1) == pytest.approx(0.95, abs=1e-4)
    assert chi2_cdf(3.8415, 1) == pytest.approx(chi2_cdf_oracle(3.8415, 1), abs=1e-12)


def test_quantile_at_zero_and_domain_errors():
    assert chi2_inv(0.0, 1) == 0.0
    assert chi2_inv(0.0, 2) == 0.0
    with pytest.raises(ValueError):
        chi2_inv(1.0, 1)
    with pytest.raises(ValueError):
        chi2_inv(-0.1, 1)
    with pytest.raises(ValueError):
        chi2_inv(0.5, 5)


def test_quantile_known_values_against_bisection_oracle():
    # medians and the 95% point, all cross-checked by bisecting the
    # integration oracle
    assert chi2_inv(0.5, 1) == pytest.approx(0.4549, abs=1e-3)
    assert chi2_inv(0.5, 1) == pytest.approx(chi2_inv_oracle(0.5, 1), rel=1e-9)
    assert chi2_inv(0.95, 1) == pytest.approx(3.8415, abs=1e-3)
    assert chi2_inv(0.95, 1) == pytest.approx(chi2_inv_oracle(0.95, 1), rel=1e-9)
    assert chi2_inv(0.9, 2) == pytest.approx(chi2_inv_oracle(0.9, 2), rel=1e-9)


def test_roundtrip_identity_inside_float64_information_range():
    # Beyond x ~ 28 the roundtrip through a float64 probability cannot be
    # tighter than ulp(1)/pdf(x); the acceptance suite documents that wall.
    for x in np.linspace(0.0, 28.0, 120):
        x = float(x)
        assert chi2_inv(chi2_cdf(x, 1), 1) == pytest.approx(x, abs=1e-9)
    for x in np.linspace(0.0, 28.0, 40):
        x = float(x)
        assert chi2_inv(chi2_cdf(x, 2), 2) == pytest.approx(x, abs=1e-9)


@given(st.floats(min_value=-0.999999, max_value=0.999999))
def test_erfinv_is_right_inverse_of_erf(p):
    assert math.erf(erfinv(p)) == pytest.approx(p, abs=1e-14)


# ------------------------------------------------------------- threshold


def _paper_budget_params(mode="per-cell"):
    # 100-image budget, 50 keypoints per image, 4x4x3 descriptor cells
    return AContrarioParams(
        sigma=1.0, epsilon=1.0, n_tests=100 * (50 * 49) // 2, exponent=48, mode=mode
    )


def test_threshold_reproduces_published_example():
    tau = compute_threshold(_paper_budget_params()).tau
    assert 2.7 <= tau <= 3.2
    # the same number derived through the quadrature oracle
    p_cell = (1.0 / 122500.0) ** (1.0 / 48.0)
    assert tau == pytest.approx(2.0 * chi2_inv_oracle(p_cell, 1), rel=1e-9)


def test_threshold_sigma_scaling_is_exact():
    for sigma in (0.25, 1.0, 3.7):
        base = compute_threshold(
            AContrarioParams(sigma=sigma, epsilon=1.0, n_tests=1e4, exponent=48)
        ).tau
        doubled = compute_threshold(
            AContrarioParams(sigma=2 * sigma, epsilon=1.0, n_tests=1e4, exponent=48)
        ).tau
        assert doubled == 4.0 * base


def test_threshold_single_cell_median():
    # E = 1 and epsilon/n_tests = 1/2 makes tau twice the chi-squared median
    params = AContrarioParams(sigma=1.0, epsilon=1.0, n_tests=2.0, exponent=1)
    tau = compute_threshold(params).tau
    assert tau == pytest.approx(2.0 * chi2_inv_oracle(0.5, 1), rel=1e-9)
    assert tau == pytest.approx(0.9098, abs=2e-4)


def test_per_scalar_mode_doubles_the_exponent():
    cell = _paper_budget_params("per-cell")
    scalar = _paper_budget_params("per-scalar")
    assert cell.effective_exponent == 48
    assert scalar.effective_exponent == 96
    assert compute_threshold(scalar).tau > compute_threshold(cell).tau


def test_predicted_probability_round_trip_both_modes():
    for mode in ("per-cell", "per-scalar"):
        params = _paper_budget_params(mode)
        threshold = compute_threshold(params)
        predicted = predicted_false_match_probability(threshold)
        assert predicted == pytest.approx(params.epsilon / params.n_tests, rel=1e-9)


def test_predicted_probability_vanishes_with_tau():
    params = _paper_budget_params()
    from copymove.acontrario import Threshold

    tiny = Threshold(tau=1e-300, params=params)
    assert predicted_false_match_probability(tiny) < 1e-30


def test_predicted_probability_direct_value():
    # E=48, tau=3.05, sigma=1 -> about 1/122500; cross-checked by Monte
    # Carlo sampling of the max of 48 squared N(0, 2) draws
    from copymove.acontrario import Threshold

    params = _paper_budget_params()
    threshold = Threshold(tau=3.053837546056753, params=params)
    predicted = predicted_false_match_probability(threshold)
    assert predicted == pytest.approx(1.0 / 122500.0, rel=1e-6)
    rng = np.random.default_rng(11)
    draws = rng.normal(0.0, math.sqrt(2.0), size=(400_000, 48))
    hits = (np.square(draws).max(axis=1) <= threshold.tau).mean()
    se = math.sqrt(predicted * (1 - predicted) / 400_000)
    assert abs(hits - predicted) <= 4 * se + 1e-12


@settings(max_examples=60, deadline=None)
@given(
    sigma=st.floats(min_value=0.01, max_value=10),
    epsilon=st.floats(min_value=0.01, max_value=10),
    n_tests=st.floats(min_value=100, max_value=1e9),
    exponent=st.integers(min_value=1, max_value=300),
)
def test_threshold_monotonicity(sigma, epsilon, n_tests, exponent):
    base = compute_threshold(
        AContrarioParams(sigma=sigma, epsilon=epsilon, n_tests=n_tests, exponent=exponent)
    ).tau
    more_eps = compute_threshold(
        AContrarioParams(sigma=sigma, epsilon=2 * epsilon, n_tests=n_tests, exponent=exponent)
    ).tau
    more_tests = compute_threshold(
        AContrarioParams(sigma=sigma, epsilon=epsilon, n_tests=4 * n_tests, exponent=exponent)
    ).tau
    more_cells = compute_threshold(
        AContrarioParams(sigma=sigma, epsilon=epsilon, n_tests=n_tests, exponent=exponent + 1)
    ).tau
    assert more_eps > base
    assert more_tests < base
    # (epsilon/n_tests)**(1/E) rises toward 1 as E grows, so a bigger
    # descriptor buys a looser per-cell threshold
    assert more_cells > base


def test_nfa_control_monte_carlo_per_scalar():
    # The self-consistent configuration: component differences are
    # N(0, 2 sigma^2) i.i.d. and every scalar is a test.
    sigma = 1.0
    params = AContrarioParams(
        sigma=sigma, epsilon=1.0, n_tests=20_000.0, exponent=48, mode="per-scalar"
    )
    tau = compute_threshold(params).tau
    target = params.epsilon / params.n_tests
    m = 200_000
    rng = np.random.default_rng(5)
    diffs = rng.normal(0.0, math.sqrt(2.0) * sigma, size=(m, 96))
    rate = (np.square(diffs).max(axis=1) <= tau).mean()
    se = math.sqrt(target * (1 - target) / m)
    assert abs(rate - target) <= 3 * se


def test_nfa_control_monte_carlo_per_cell_single_component():
    # The published convention applies the one-degree law per cell; it is
    # exact when each cell difference has a single noisy component.
    sigma = 1.0
    params = AContrarioParams(
        sigma=sigma, epsilon=1.0, n_tests=20_000.0, exponent=48, mode="per-cell"
    )
    tau = compute_threshold(params).tau
    target = params.epsilon / params.n_tests
    m = 200_000
    rng = np.random.default_rng(6)
    diffs = rng.normal(0.0, math.sqrt(2.0) * sigma, size=(m, 48))
    rate = (np.square(diffs).max(axis=1) <= tau).mean()
    se = math.sqrt(target * (1 - target) / m)
    assert abs(rate - target) <= 3 * se


# ------------------------------------------------------------- validation


def test_params_validation_messages():
    with pytest.raises(ValueError, match="epsilon must be positive"):
        AContrarioParams(sigma=1.0, epsilon=0.0, n_tests=10, exponent=4)
    with pytest.raises(ValueError, match="sigma must be positive"):
        AContrarioParams(sigma=0.0, epsilon=1.0, n_tests=10, exponent=4)
    with pytest.raises(ValueError, match="unbounded"):
        AContrarioParams(sigma=1.0, epsilon=10.0, n_tests=10, exponent=4)
    with pytest.raises(ValueError, match="mode"):
        AContrarioParams(sigma=1.0, epsilon=1.0, n_tests=10, exponent=4, mode="both")


def test_budget_params_accounting():
    params = budget_params(
        sigma=1 / 255.0,
        epsilon=1.0,
        images_budget=100,
        keypoint_count=50,
        descriptor_n=4,
        channels=3,
    )
    assert params.n_tests == 100 * (50 * 49) / 2
    assert params.exponent == 48
    flip = budget_params(
        sigma=1 / 255.0,
        epsilon=1.0,
        images_budget=100,
        keypoint_count=50,
        descriptor_n=4,
        channels=3,
        count_flip_tests=True,
    )
    assert flip.n_tests == 2 * params.n_tests
    with pytest.raises(ValueError):
        budget_params(
            sigma=1.0, epsilon=1.0, images_budget=100, keypoint_count=1,
            descriptor_n=4, channels=3,
        )
