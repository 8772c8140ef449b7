"""Gaussian/DoG scale-space construction and keypoint detection.

Keypoints are extrema of the difference-of-Gaussians stack, refined to
subpixel/subscale accuracy by one quadratic fit, filtered by contrast and
edge-curvature tests, and given one principal orientation per dominant peak
of a gradient-orientation histogram.  The recipe and its default constants
follow the standard scale-invariant feature transform parameterization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import total_ordering

import numpy as np

from .raster import Raster

# Octave count is floor(log2(min(w, h) / MIN_OCTAVE_SIDE)); images smaller
# than MIN_IMAGE_SIDE are rejected outright.
MIN_IMAGE_SIDE = 32
MIN_OCTAVE_SIDE = 12


@dataclass(frozen=True)
class ScaleSpaceConfig:
    """Parameters of the pyramid and of the keypoint filters.

    ``contrast_threshold`` applies to DoG responses of images scaled to
    [0, 1].  ``upsample`` prepends a 2x-interpolated octave (index -1) for
    extra fine-scale keypoints; it is off by default because keypoint
    density is already sufficient for forgery matching.
    """

    scales_per_octave: int = 3
    sigma_min: float = 0.8
    assumed_blur: float = 0.5
    contrast_threshold: float = 0.015
    edge_threshold: float = 10.0
    upsample: bool = False
    orientation_bins: int = 36
    orientation_sigma_factor: float = 1.5
    orientation_smooth_passes: int = 6
    orientation_peak_ratio: float = 0.8

    def __post_init__(self) -> None:
        if self.scales_per_octave < 1:
            raise ValueError("scales_per_octave must be >= 1")
        if self.sigma_min <= self.assumed_blur:
            raise ValueError("sigma_min must exceed the assumed input blur")
        if self.contrast_threshold <= 0 or self.edge_threshold < 1:
            raise ValueError("invalid contrast/edge threshold")


@total_ordering
@dataclass(frozen=True)
class Keypoint:
    """Scale-space extremum in input-image coordinates.

    ``x`` is the subpixel column, ``y`` the subpixel row, ``sigma`` the
    detection scale in input pixels, ``theta`` the principal orientation in
    [0, 2pi).  ``level`` is the refined (fractional) scale index inside the
    octave, kept so descriptor extraction can pick the nearest blur level.
    """

    x: float
    y: float
    sigma: float
    theta: float
    octave: int
    response: float
    level: float = 0.0

    def sort_key(self) -> tuple[float, float, float, float]:
        return (self.octave, self.y, self.x, self.theta)

    def __lt__(self, other: "Keypoint") -> bool:
        return self.sort_key() < other.sort_key()


@dataclass(frozen=True)
class Pyramid:
    """Gaussian scale-space stacks, one per octave, plus their DoG stacks.

    ``octaves[k]`` has shape (levels, h, w, channels) where levels equals
    scales_per_octave + 3; each octave halves the spatial resolution of the
    previous one.  ``first_octave`` is 0, or -1 when the pyramid starts with
    an upsampled octave.  DoG stacks (adjacent-level differences) are only
    built for single-channel input.
    """

    octaves: tuple[np.ndarray, ...]
    dog: tuple[np.ndarray, ...] | None
    scales_per_octave: int
    sigma_min: float
    first_octave: int
    input_shape: tuple[int, int]

    @property
    def n_octaves(self) -> int:
        return len(self.octaves)

    def octave_index(self, octave: int) -> int:
        return octave - self.first_octave

    def downsample_factor(self, octave: int) -> float:
        return 2.0**octave

    def level_blur(self, octave: int, level: float) -> float:
        """Absolute blur, in input pixels, of a (possibly fractional) level."""
        return self.sigma_min * 2.0 ** (octave + level / self.scales_per_octave)


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = math.ceil(4.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    return kernel / kernel.sum()


def _convolve_axis(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = (len(kernel) - 1) // 2
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (radius, radius)
    padded = np.pad(arr, pad, mode="symmetric")
    out = np.zeros_like(arr)
    window = [slice(None)] * arr.ndim
    n = arr.shape[axis]
    for i, coeff in enumerate(kernel):
        window[axis] = slice(i, i + n)
        out += coeff * padded[tuple(window)]
    return out


def gaussian_blur(image: Raster | np.ndarray, sigma: float) -> Raster | np.ndarray:
    """Separable Gaussian convolution, kernel radius ceil(4*sigma), symmetric
    boundary handling.  ``sigma == 0`` returns the input unchanged.

    Accepts a Raster or a bare (h, w[, c]) float array and returns the same
    kind.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if isinstance(image, Raster):
        if sigma == 0:
            return image
        return Raster(gaussian_blur(image.samples, sigma))
    arr = np.asarray(image, dtype=np.float64)
    if sigma == 0:
        return arr
    kernel = _gaussian_kernel(sigma)
    return _convolve_axis(_convolve_axis(arr, kernel, 0), kernel, 1)


def _upsample2x(arr: np.ndarray) -> np.ndarray:
    """Bilinear 2x upsampling; output pixel (i, j) samples input at (i/2, j/2)."""
    h, w, c = arr.shape
    ys = np.arange(2 * h, dtype=np.float64) / 2.0
    xs = np.arange(2 * w, dtype=np.float64) / 2.0
    y0 = np.minimum(ys.astype(np.intp), h - 2) if h > 1 else np.zeros(2 * h, np.intp)
    x0 = np.minimum(xs.astype(np.intp), w - 2) if w > 1 else np.zeros(2 * w, np.intp)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    a = arr[y0][:, x0]
    b = arr[y0][:, np.minimum(x0 + 1, w - 1)]
    cc = arr[np.minimum(y0 + 1, h - 1)][:, x0]
    d = arr[np.minimum(y0 + 1, h - 1)][:, np.minimum(x0 + 1, w - 1)]
    return (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * cc + fx * d)


def build_pyramid(image: Raster, config: ScaleSpaceConfig) -> Pyramid:
    """Build the Gaussian pyramid (and DoG stacks for grayscale input).

    The number of octaves is floor(log2(min(w, h) / 12)).  Level ``s`` of
    octave ``o`` carries absolute blur sigma_min * 2**(o + s / S); each
    octave holds S + 3 levels so that S + 2 DoG levels exist.  The next
    octave is seeded by decimating level S of the previous one.
    """
    if min(image.width, image.height) < MIN_IMAGE_SIDE:
        raise ValueError(
            f"image too small for scale-space analysis: "
            f"{image.width}x{image.height} (need min side >= {MIN_IMAGE_SIDE})"
        )
    s_per_oct = config.scales_per_octave
    n_levels = s_per_oct + 3
    n_octaves = int(math.floor(math.log2(min(image.width, image.height) / MIN_OCTAVE_SIDE)))

    # Per-octave blur ladder in octave-grid units: level s has blur
    # sigma_min * 2**(s/S) relative to its own grid.
    grid_blur = [config.sigma_min * 2.0 ** (s / s_per_oct) for s in range(n_levels)]

    first_octave = -1 if config.upsample else 0
    base = np.asarray(image.samples, dtype=np.float64)
    if config.upsample:
        base = _upsample2x(base)
        n_octaves += 1
    # Blur already present in the seed, measured on the seed's grid.
    seed_blur = config.assumed_blur / 2.0**first_octave

    octaves: list[np.ndarray] = []
    current = base
    for _ in range(n_octaves):
        levels = np.empty((n_levels,) + current.shape, dtype=np.float64)
        inc = math.sqrt(max(grid_blur[0] ** 2 - seed_blur**2, 0.0))
        levels[0] = gaussian_blur(current, inc)
        for s in range(1, n_levels):
            inc = math.sqrt(grid_blur[s] ** 2 - grid_blur[s - 1] ** 2)
            levels[s] = gaussian_blur(levels[s - 1], inc)
        octaves.append(levels)
        # Level S has twice the base blur: decimating it yields the next
        # octave's level-0 blur exactly, so no further smoothing is needed.
        current = levels[s_per_oct][::2, ::2]
        seed_blur = grid_blur[0]
        if min(current.shape[0], current.shape[1]) < 3:
            break

    dog = None
    if image.channels == 1:
        dog = tuple(np.diff(lv, axis=0) for lv in octaves)
    return Pyramid(
        octaves=tuple(octaves),
        dog=dog,
        scales_per_octave=s_per_oct,
        sigma_min=config.sigma_min,
        first_octave=first_octave,
        input_shape=(image.height, image.width),
    )


def _extremum_candidates(dog: np.ndarray, pre_threshold: float) -> np.ndarray:
    """Indices (s, i, j) of strict 3x3x3 extrema with |value| >= pre_threshold."""
    d = dog[..., 0] if dog.ndim == 4 else dog
    n_lv, h, w = d.shape
    if n_lv < 3 or h < 3 or w < 3:
        return np.empty((0, 3), dtype=np.intp)
    center = d[1:-1, 1:-1, 1:-1]
    is_max = np.abs(center) >= pre_threshold
    is_min = is_max.copy()
    for ds in (-1, 0, 1):
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if ds == di == dj == 0:
                    continue
                nb = d[1 + ds : n_lv - 1 + ds, 1 + di : h - 1 + di, 1 + dj : w - 1 + dj]
                is_max &= center > nb
                is_min &= center < nb
                if not (is_max.any() or is_min.any()):
                    return np.empty((0, 3), dtype=np.intp)
    return np.argwhere(is_max | is_min) + 1


def _refine_candidate(
    d: np.ndarray, s: int, i: int, j: int
) -> tuple[np.ndarray, float] | None:
    """One quadratic fit step around a DoG extremum.

    Returns (offset [ds, di, dj], interpolated response) or None when the
    fit diverges (any offset component with magnitude >= 1) or is singular.
    """
    grad = 0.5 * np.array(
        [
            d[s + 1, i, j] - d[s - 1, i, j],
            d[s, i + 1, j] - d[s, i - 1, j],
            d[s, i, j + 1] - d[s, i, j - 1],
        ]
    )
    c = d[s, i, j]
    hss = d[s + 1, i, j] + d[s - 1, i, j] - 2 * c
    hii = d[s, i + 1, j] + d[s, i - 1, j] - 2 * c
    hjj = d[s, i, j + 1] + d[s, i, j - 1] - 2 * c
    hsi = 0.25 * (d[s + 1, i + 1, j] - d[s + 1, i - 1, j] - d[s - 1, i + 1, j] + d[s - 1, i - 1, j])
    hsj = 0.25 * (d[s + 1, i, j + 1] - d[s + 1, i, j - 1] - d[s - 1, i, j + 1] + d[s - 1, i, j - 1])
    hij = 0.25 * (d[s, i + 1, j + 1] - d[s, i + 1, j - 1] - d[s, i - 1, j + 1] + d[s, i - 1, j - 1])
    hessian = np.array([[hss, hsi, hsj], [hsi, hii, hij], [hsj, hij, hjj]])
    try:
        offset = -np.linalg.solve(hessian, grad)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.abs(offset) < 1.0):
        return None
    return offset, c + 0.5 * float(grad @ offset)


def _passes_edge_test(d: np.ndarray, s: int, i: int, j: int, edge_threshold: float) -> bool:
    c = d[s, i, j]
    hii = d[s, i + 1, j] + d[s, i - 1, j] - 2 * c
    hjj = d[s, i, j + 1] + d[s, i, j - 1] - 2 * c
    hij = 0.25 * (d[s, i + 1, j + 1] - d[s, i + 1, j - 1] - d[s, i - 1, j + 1] + d[s, i - 1, j - 1])
    det = hii * hjj - hij * hij
    if det <= 0:
        return False
    trace = hii + hjj
    r = edge_threshold
    return trace * trace * r <= det * (r + 1.0) ** 2


def _orientation_histogram(
    gy: np.ndarray,
    gx: np.ndarray,
    ci: int,
    cj: int,
    window_sigma: float,
    n_bins: int,
) -> np.ndarray:
    h, w = gx.shape
    radius = max(1, int(round(3.0 * window_sigma)))
    i0, i1 = max(0, ci - radius), min(h, ci + radius + 1)
    j0, j1 = max(0, cj - radius), min(w, cj + radius + 1)
    if i0 >= i1 or j0 >= j1:
        return np.zeros(n_bins)
    wy = gy[i0:i1, j0:j1]
    wx = gx[i0:i1, j0:j1]
    mag = np.hypot(wx, wy)
    angle = np.mod(np.arctan2(wy, wx), 2.0 * math.pi)
    di = (np.arange(i0, i1) - ci)[:, None]
    dj = (np.arange(j0, j1) - cj)[None, :]
    weights = mag * np.exp(-(di * di + dj * dj) / (2.0 * window_sigma**2))
    bins = (np.floor(angle * n_bins / (2.0 * math.pi) + 0.5).astype(np.intp)) % n_bins
    return np.bincount(bins.ravel(), weights.ravel(), minlength=n_bins)


def _histogram_peaks(hist: np.ndarray, peak_ratio: float, smooth_passes: int) -> list[float]:
    """Interpolated peak positions (in bins) of a circular histogram."""
    padded = np.empty(len(hist) + 2)
    for _ in range(smooth_passes):
        padded[1:-1] = hist
        padded[0] = hist[-1]
        padded[-1] = hist[0]
        hist = (padded[:-2] + padded[1:-1] + padded[2:]) / 3.0
    top = hist.max()
    if top <= 0.0:
        return []
    n = len(hist)
    peaks = []
    for b in range(n):
        left, right = hist[(b - 1) % n], hist[(b + 1) % n]
        v = hist[b]
        if v > left and v > right and v >= peak_ratio * top:
            denom = left - 2.0 * v + right
            delta = 0.0 if denom == 0 else 0.5 * (left - right) / denom
            peaks.append(b + delta)
    return peaks


def detect_keypoints(pyr: Pyramid, config: ScaleSpaceConfig) -> list[Keypoint]:
    """Detect, refine, filter and orient DoG extrema.

    Emitted keypoints satisfy |response| >= contrast_threshold, pass the
    principal-curvature edge test, carry a refinement offset below one pixel
    per axis, and are duplicated once per orientation-histogram peak at or
    above 80% of the dominant peak.  The result is sorted by
    (octave, y, x, theta), so ordering is deterministic.
    """
    if pyr.dog is None:
        raise ValueError("keypoint detection requires a grayscale pyramid")
    input_h, input_w = pyr.input_shape
    s_per_oct = pyr.scales_per_octave
    two_pi = 2.0 * math.pi
    keypoints: list[Keypoint] = []

    for oct_idx, dog4 in enumerate(pyr.dog):
        octave = pyr.first_octave + oct_idx
        scale = pyr.downsample_factor(octave)
        d = dog4[..., 0]
        gauss = pyr.octaves[oct_idx][..., 0]
        grad_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

        for s, i, j in _extremum_candidates(dog4, 0.8 * config.contrast_threshold):
            refined = _refine_candidate(d, s, i, j)
            if refined is None:
                continue
            offset, response = refined
            if abs(response) < config.contrast_threshold:
                continue
            if not _passes_edge_test(d, s, i, j, config.edge_threshold):
                continue

            level = s + offset[0]
            x = (j + offset[2]) * scale
            y = (i + offset[1]) * scale
            if not (0.0 <= x < input_w and 0.0 <= y < input_h):
                continue
            sigma = pyr.level_blur(octave, level)

            # Orientation from the Gaussian level with the nearest blur.
            g_level = int(np.clip(round(level), 0, gauss.shape[0] - 1))
            if g_level not in grad_cache:
                lv = gauss[g_level]
                grad_cache[g_level] = (
                    np.gradient(lv, axis=0),  # gy
                    np.gradient(lv, axis=1),  # gx
                )
            gy, gx = grad_cache[g_level]
            window_sigma = config.orientation_sigma_factor * sigma / scale
            hist = _orientation_histogram(
                gy, gx, int(round(i + offset[1])), int(round(j + offset[2])),
                window_sigma, config.orientation_bins,
            )
            for peak in _histogram_peaks(
                hist, config.orientation_peak_ratio, config.orientation_smooth_passes
            ):
                theta = (peak * two_pi / config.orientation_bins) % two_pi
                keypoints.append(
                    Keypoint(
                        x=float(x),
                        y=float(y),
                        sigma=float(sigma),
                        theta=float(theta),
                        octave=octave,
                        response=float(response),
                        level=float(level),
                    )
                )

    keypoints.sort()
    return keypoints
