"""Chi-squared quantile machinery and the a-contrario match threshold.

The matcher declares two descriptors suspicious when every cell difference
stays below a threshold tau.  Under the background model -- the two
descriptors are the same patch, one corrupted by Gaussian noise of variance
sigma^2, so per-component differences are N(0, 2 sigma^2) -- a cell passes
with probability chi2_cdf(tau / (2 sigma^2), 1) and a whole pair passes
with that probability to the power E (independent cells).  Solving for the
pass probability that makes epsilon false alarms expected over n_tests pair
tests gives

    tau = 2 sigma^2 * chi2_inv((epsilon / n_tests) ** (1 / E), 1).

The single user-facing knob is sigma; everything else adapts to the number
of tests and the descriptor geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "AContrarioParams",
    "Threshold",
    "budget_params",
    "chi2_cdf",
    "chi2_inv",
    "compute_threshold",
    "erfinv",
    "predicted_false_match_probability",
]

_MODES = ("per-cell", "per-scalar")


def erfinv(p: float) -> float:
    """Inverse error function on (-1, 1).

    Winitzki's initial approximation followed by Newton steps against
    math.erf; the refinement converges to double precision, keeping
    downstream thresholds stable across platforms.
    """
    if not -1.0 < p < 1.0:
        if p == 1.0 or p == -1.0:
            return math.copysign(math.inf, p)
        raise ValueError("erfinv argument must lie in [-1, 1]")
    if p == 0.0:
        return 0.0
    a = 0.147
    ln1mp2 = math.log1p(-p * p)
    t = 2.0 / (math.pi * a) + ln1mp2 / 2.0
    x = math.copysign(math.sqrt(math.sqrt(t * t - ln1mp2 / a) - t), p)
    # Newton: d/dx erf(x) = 2/sqrt(pi) exp(-x^2)
    for _ in range(3):
        err = math.erf(x) - p
        x -= err * math.sqrt(math.pi) / 2.0 * math.exp(x * x)
    return x


def chi2_cdf(x: float, dof: int = 1) -> float:
    """Chi-squared CDF for 1 or 2 degrees of freedom.

    Closed forms: erf(sqrt(x/2)) for dof=1 and 1 - exp(-x/2) for dof=2,
    both accurate to better than 1e-12.
    """
    if x < 0:
        raise ValueError("chi2_cdf argument must be >= 0")
    if dof == 1:
        return math.erf(math.sqrt(x / 2.0))
    if dof == 2:
        return -math.expm1(-x / 2.0)
    raise ValueError("only 1 or 2 degrees of freedom are supported")


def _chi2_pdf(x: float, dof: int) -> float:
    if dof == 1:
        if x == 0.0:
            return math.inf
        return math.exp(-x / 2.0) / math.sqrt(2.0 * math.pi * x)
    return 0.5 * math.exp(-x / 2.0)


def chi2_inv(p: float, dof: int = 1) -> float:
    """Chi-squared quantile: the x with chi2_cdf(x, dof) == p.

    Closed-form seed (via erfinv for dof=1, a logarithm for dof=2) refined
    by bracket-safeguarded Newton steps to relative accuracy 1e-10.
    p must satisfy 0 <= p < 1; the quantile is unbounded at p = 1.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError("quantile argument must satisfy 0 <= p < 1")
    if p == 0.0:
        return 0.0
    if dof == 1:
        x = 2.0 * erfinv(p) ** 2
    elif dof == 2:
        x = -2.0 * math.log1p(-p)
    else:
        raise ValueError("only 1 or 2 degrees of freedom are supported")

    lo, hi = 0.0, math.inf
    for _ in range(60):
        err = chi2_cdf(x, dof) - p
        if err > 0:
            hi = min(hi, x)
        elif err < 0:
            lo = max(lo, x)
        else:
            break
        slope = _chi2_pdf(x, dof)
        step = err / slope if math.isfinite(slope) and slope > 0 else 0.0
        nxt = x - step
        if not (lo < nxt < hi):  # fall back to bisection inside the bracket
            nxt = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * x
        if abs(nxt - x) <= 1e-13 * max(x, 1e-300):
            x = nxt
            break
        x = nxt
    return x


@dataclass(frozen=True)
class AContrarioParams:
    """Inputs of the threshold formula.

    ``sigma`` is the noise standard deviation on the [0, 1] intensity scale
    (configuration files give it on 0-255 and divide by 255 at parse time).
    ``epsilon`` is the expected number of false alarms tolerated over
    ``n_tests`` pair tests.  ``exponent`` is the number of descriptor cells
    n*n*channels; in "per-scalar" mode every cell contributes its two
    gradient components as separate tests, doubling the effective exponent,
    which is the statistically self-consistent reading for 2-vector cells.
    "per-cell" applies the exponent as-is and reproduces the published
    numeric convention.
    """

    sigma: float
    epsilon: float
    n_tests: float
    exponent: int
    mode: str = "per-cell"

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.n_tests < 1:
            raise ValueError("n_tests must be >= 1")
        if self.exponent < 1:
            raise ValueError("exponent must be >= 1")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        if self.epsilon / self.n_tests >= 1.0:
            raise ValueError(
                "epsilon/n_tests must be < 1 (otherwise the threshold is unbounded)"
            )

    @property
    def effective_exponent(self) -> int:
        return self.exponent if self.mode == "per-cell" else 2 * self.exponent


@dataclass(frozen=True)
class Threshold:
    """Squared-difference threshold tau plus the parameters it came from."""

    tau: float
    params: AContrarioParams

    def __post_init__(self) -> None:
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValueError("tau must be positive and finite")


def compute_threshold(params: AContrarioParams) -> Threshold:
    """tau = 2 sigma^2 * chi2_inv((epsilon/n_tests)^(1/E), 1).

    E is the cell count in "per-cell" mode and twice that in "per-scalar"
    mode.  tau scales exactly with sigma^2 and grows with epsilon; it
    shrinks as n_tests or E grow.
    """
    p_cell = (params.epsilon / params.n_tests) ** (1.0 / params.effective_exponent)
    tau = 2.0 * params.sigma**2 * chi2_inv(p_cell, dof=1)
    return Threshold(tau=tau, params=params)


def predicted_false_match_probability(threshold: Threshold) -> float:
    """Per-pair probability that two independent-noise descriptors match.

    chi2_cdf(tau / (2 sigma^2), 1) ** E; composed with compute_threshold it
    returns epsilon / n_tests.
    """
    p = threshold.params
    per_test = chi2_cdf(threshold.tau / (2.0 * p.sigma**2), dof=1)
    return per_test**p.effective_exponent


def budget_params(
    sigma: float,
    epsilon: float,
    images_budget: int,
    keypoint_count: int,
    descriptor_n: int,
    channels: int,
    mode: str = "per-cell",
    count_flip_tests: bool = False,
) -> AContrarioParams:
    """Standard test-budget accounting for one image.

    n_tests = images_budget * K(K-1)/2 with K the per-image descriptor
    count, doubled when flip tests are budgeted as separate tests.  The
    exponent is the cell count n*n*channels.
    """
    if images_budget < 1:
        raise ValueError("images_budget must be >= 1")
    if keypoint_count < 2:
        raise ValueError("at least two keypoints are needed to form a pair")
    pairs = keypoint_count * (keypoint_count - 1) // 2
    n_tests = float(images_budget) * pairs * (2.0 if count_flip_tests else 1.0)
    return AContrarioParams(
        sigma=sigma,
        epsilon=epsilon,
        n_tests=n_tests,
        exponent=descriptor_n * descriptor_n * channels,
        mode=mode,
    )
