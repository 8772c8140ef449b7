"""Exhaustive descriptor pair matching with early stopping.

Every unordered keypoint pair is tested against the a-contrario threshold:
once directly and once against the mirrored descriptor to catch flipped
copies.  A pair matches only when every cell agrees, so most comparisons
abort at the first cell examined and the exhaustive scan stays cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .acontrario import Threshold
from .descriptor import GradientDescriptor
from .scale_space import Keypoint

EXCLUSION_MODES = ("footprint", "fixed", "none")


@dataclass(frozen=True)
class MatchPair:
    """A keypoint pair that passed the direct or the flipped test.

    ``distance`` is the achieved maximum cell difference, ``flipped`` tells
    which test accepted, ``comparisons_used`` counts the cells examined for
    this pair across the tests that ran.
    """

    a: Keypoint
    b: Keypoint
    distance: float
    flipped: bool
    comparisons_used: int


@dataclass
class MatchStats:
    """Counters backing the detection report."""

    pairs_enumerated: int = 0
    pairs_tested: int = 0
    distance_tests: int = 0
    cells_examined: int = 0

    @property
    def mean_comparisons_per_pair(self) -> float:
        if self.distance_tests == 0:
            return 0.0
        return self.cells_examined / self.distance_tests


def _check_geometry(d1: GradientDescriptor, d2: GradientDescriptor) -> None:
    if d1.gx.shape != d2.gx.shape:
        raise ValueError(
            f"descriptor geometry mismatch: {d1.gx.shape} vs {d2.gx.shape}"
        )


def d_max(
    d1: GradientDescriptor, d2: GradientDescriptor, tau: Threshold
) -> tuple[bool, float, int]:
    """Early-exit maximum cell difference test.

    Cells are visited in fixed row-major order, channels innermost.  In
    "per-cell" mode the cell value is the squared norm of the gradient
    2-vector difference; in "per-scalar" mode each gradient component is a
    separate test.  Returns (matched, distance, comparisons): the scan
    aborts at the first value above tau, so the decision is identical to a
    full evaluation; ``distance`` is the running maximum at the decision
    point, i.e. the true maximum when matched and the first exceeding value
    otherwise.
    """
    _check_geometry(d1, d2)
    t = tau.tau
    ax, ay = d1.flat_gx, d1.flat_gy
    bx, by = d2.flat_gx, d2.flat_gy
    best = 0.0
    comparisons = 0
    # squares spelled as products: bit-identical to the vectorized path
    if tau.params.mode == "per-scalar":
        for i in range(len(ax)):
            dx = ax[i] - bx[i]
            dy = ay[i] - by[i]
            for v in (dx * dx, dy * dy):
                comparisons += 1
                if v > best:
                    best = v
                    if v > t:
                        return False, best, comparisons
        return True, best, comparisons
    for i in range(len(ax)):
        dx = ax[i] - bx[i]
        dy = ay[i] - by[i]
        v = dx * dx + dy * dy
        comparisons += 1
        if v > best:
            best = v
            if v > t:
                return False, best, comparisons
    return True, best, comparisons


def d_flip(
    d1: GradientDescriptor, d2: GradientDescriptor, tau: Threshold
) -> tuple[bool, float, int]:
    """d_max against the mirrored second descriptor, without materializing it.

    Row indices of d2 are remapped k -> n-1-k and its y-gradient is negated
    inline; the result is identical to d_max(d1, flip_descriptor(d2), tau).
    """
    _check_geometry(d1, d2)
    t = tau.tau
    n, channels = d1.n, d1.channels
    row_stride = n * channels
    ax, ay = d1.flat_gx, d1.flat_gy
    bx, by = d2.flat_gx, d2.flat_gy
    best = 0.0
    comparisons = 0
    per_scalar = tau.params.mode == "per-scalar"
    for k in range(n):
        base = k * row_stride
        mirrored = (n - 1 - k) * row_stride
        for r in range(row_stride):
            i = base + r
            j = mirrored + r
            dx = ax[i] - bx[j]
            dy = ay[i] + by[j]
            if per_scalar:
                for v in (dx * dx, dy * dy):
                    comparisons += 1
                    if v > best:
                        best = v
                        if v > t:
                            return False, best, comparisons
            else:
                v = dx * dx + dy * dy
                comparisons += 1
                if v > best:
                    best = v
                    if v > t:
                        return False, best, comparisons
    return True, best, comparisons


def _flip_permutation(n: int, channels: int) -> np.ndarray:
    """Flat cell index remap k -> n-1-k for row-major (k, l, c) ordering."""
    idx = np.arange(n * n * channels).reshape(n, n, channels)
    return idx[::-1, :, :].reshape(-1)


def _pair_values(
    x_i: np.ndarray,
    y_i: np.ndarray,
    x_j: np.ndarray,
    y_j: np.ndarray,
    per_scalar: bool,
) -> np.ndarray:
    """Per-test values for a block of pairs, in early-stopping scan order."""
    dx = x_i - x_j
    dy = y_i - y_j
    dx2 = dx * dx
    dy2 = dy * dy
    if not per_scalar:
        return dx2 + dy2
    values = np.empty((dx2.shape[0], 2 * dx2.shape[1]))
    values[:, 0::2] = dx2
    values[:, 1::2] = dy2
    return values


def match_all(
    descriptors: list[GradientDescriptor],
    tau: Threshold,
    *,
    exclusion_mode: str = "footprint",
    exclusion_radius: float = 0.0,
    spacing_factor: float = 1.0,
    enable_flip: bool = True,
) -> tuple[list[MatchPair], MatchStats]:
    """Test every unordered descriptor pair and collect the matches.

    Pairs whose keypoints are closer than the exclusion radius are skipped
    ("footprint" mode uses one descriptor footprint, "none" restores the
    bare discard-self-matches behavior).  Each surviving pair is tested
    with d_max and, when that rejects and flips are enabled, with d_flip.
    The output is sorted by canonical keypoint order and is independent of
    the input ordering.

    Pairs are evaluated in vectorized blocks; decisions, distances and
    comparison counts are bit-identical to calling d_max/d_flip pair by
    pair (the per-pair comparison count is the index of the first cell
    exceeding tau, plus one).
    """
    if exclusion_mode not in EXCLUSION_MODES:
        raise ValueError(f"exclusion_mode must be one of {EXCLUSION_MODES}")
    stats = MatchStats()
    matches: list[MatchPair] = []
    count = len(descriptors)
    if count < 2:
        return matches, stats

    per_scalar = tau.params.mode == "per-scalar"
    t = tau.tau
    n, channels = descriptors[0].n, descriptors[0].channels
    for d in descriptors[1:]:
        _check_geometry(descriptors[0], d)
    gx = np.stack([d.gx.reshape(-1) for d in descriptors])  # (K, E)
    gy = np.stack([d.gy.reshape(-1) for d in descriptors])
    xs = np.array([d.keypoint.x for d in descriptors])
    ys = np.array([d.keypoint.y for d in descriptors])
    sigmas = np.array([d.keypoint.sigma for d in descriptors])
    perm = _flip_permutation(n, channels) if enable_flip else None

    for i in range(count - 1):
        js = slice(i + 1, count)
        block = count - 1 - i
        stats.pairs_enumerated += block

        dist = np.hypot(xs[js] - xs[i], ys[js] - ys[i])
        if exclusion_mode == "footprint":
            radius = (n + 2) * spacing_factor * np.maximum(sigmas[js], sigmas[i])
        elif exclusion_mode == "fixed":
            radius = exclusion_radius
        else:
            radius = 0.0
        tested = dist >= radius
        n_tested = int(np.count_nonzero(tested))
        if n_tested == 0:
            continue
        stats.pairs_tested += n_tested
        stats.distance_tests += n_tested

        j_idx = np.flatnonzero(tested) + i + 1
        values = _pair_values(gx[i], gy[i], gx[j_idx], gy[j_idx], per_scalar)
        exceed = values > t
        failed = exceed.any(axis=1)
        first = exceed.argmax(axis=1)
        # Examined cells: up to and including the first exceeding one, or
        # the whole descriptor when the pair matches.
        stats.cells_examined += int(
            np.where(failed, first + 1, values.shape[1]).sum()
        )

        direct_hits = np.flatnonzero(~failed)
        hit_info = {
            int(j_idx[r]): (float(values[r].max()), False, values.shape[1])
            for r in direct_hits
        }

        if enable_flip:
            retry = np.flatnonzero(failed)
            if retry.size:
                jr = j_idx[retry]
                stats.distance_tests += retry.size
                fvalues = _pair_values(
                    gx[i], gy[i], gx[jr][:, perm], -gy[jr][:, perm], per_scalar
                )
                fexceed = fvalues > t
                ffailed = fexceed.any(axis=1)
                ffirst = fexceed.argmax(axis=1)
                stats.cells_examined += int(
                    np.where(ffailed, ffirst + 1, fvalues.shape[1]).sum()
                )
                for r in np.flatnonzero(~ffailed):
                    direct_comparisons = int(first[retry[r]]) + 1
                    hit_info[int(jr[r])] = (
                        float(fvalues[r].max()),
                        True,
                        direct_comparisons + fvalues.shape[1],
                    )

        ka = descriptors[i].keypoint
        for j, (distance, flipped, comparisons) in hit_info.items():
            a, b = ka, descriptors[j].keypoint
            if b.sort_key() < a.sort_key():
                a, b = b, a
            matches.append(
                MatchPair(
                    a=a,
                    b=b,
                    distance=distance,
                    flipped=flipped,
                    comparisons_used=comparisons,
                )
            )
    matches.sort(key=lambda m: (m.a.sort_key(), m.b.sort_key()))
    return matches, stats
