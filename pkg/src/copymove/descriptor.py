"""Oriented, scale-normalized gradient-patch descriptors.

Each keypoint gets an (N+2)x(N+2) intensity patch per color channel,
sampled on a grid rotated by the keypoint orientation with inter-sample
spacing proportional to the keypoint scale.  Central differences consume
the one-sample border and yield the N x N grid of gradient 2-vectors that
is compared cell by cell during matching.  The raw gradients are kept on
purpose: pooling them into histograms would make naturally similar objects
indistinguishable from digital copies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .raster import Raster
from .scale_space import Keypoint, Pyramid


@dataclass(frozen=True)
class Patch:
    """Sampled intensity patch of side n + 2 feeding an n x n descriptor."""

    values: np.ndarray  # (side, side, channels)
    keypoint: Keypoint

    @property
    def side(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class GradientDescriptor:
    """N x N x C grid of gradient 2-vectors around a keypoint.

    ``gx``/``gy`` hold the per-cell x/y gradient components.  Cells are
    ordered row-major with channels innermost wherever the grid is
    flattened, which fixes the early-stopping comparison order.
    """

    gx: np.ndarray  # (n, n, channels)
    gy: np.ndarray  # (n, n, channels)
    keypoint: Keypoint

    @property
    def n(self) -> int:
        return self.gx.shape[0]

    @property
    def channels(self) -> int:
        return self.gx.shape[2]

    @property
    def cell_count(self) -> int:
        return self.gx.size

    @cached_property
    def flat_gx(self) -> list[float]:
        return self.gx.ravel().tolist()

    @cached_property
    def flat_gy(self) -> list[float]:
        return self.gy.ravel().tolist()


def sample_patch(
    image: Raster | np.ndarray,
    kp: Keypoint,
    n: int,
    spacing_factor: float = 1.0,
    *,
    downsample: float = 1.0,
) -> Patch | None:
    """Bilinearly sample the (n+2)x(n+2) oriented patch around a keypoint.

    The grid is centered at (kp.x, kp.y), rotated by kp.theta, with
    inter-sample spacing ``spacing_factor * kp.sigma`` input pixels.
    ``image`` is the pixel array to sample (a raster or a pyramid level);
    ``downsample`` is that array's grid step in input pixels (2**octave for
    pyramid levels).  Returns None when any sample falls outside the image:
    boundary keypoints are dropped rather than padded, because padded
    gradients would fabricate exact matches between border patches.
    """
    if n < 2:
        raise ValueError("descriptor side n must be >= 2")
    arr = image.samples if isinstance(image, Raster) else np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    h, w = arr.shape[:2]

    side = n + 2
    half = (side - 1) / 2.0
    offsets = (np.arange(side, dtype=np.float64) - half) * (spacing_factor * kp.sigma)
    dx = offsets[np.newaxis, :]  # column offsets, patch x axis
    dy = offsets[:, np.newaxis]  # row offsets, patch y axis
    cos_t, sin_t = math.cos(kp.theta), math.sin(kp.theta)
    xs = (kp.x + cos_t * dx - sin_t * dy) / downsample
    ys = (kp.y + sin_t * dx + cos_t * dy) / downsample

    if xs.min() < 0.0 or xs.max() > w - 1 or ys.min() < 0.0 or ys.max() > h - 1:
        return None

    x0 = np.clip(np.floor(xs).astype(np.intp), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(ys).astype(np.intp), 0, max(h - 2, 0))
    fx = (xs - x0)[:, :, np.newaxis]
    fy = (ys - y0)[:, :, np.newaxis]
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    values = (
        (1 - fy) * ((1 - fx) * arr[y0, x0] + fx * arr[y0, x1])
        + fy * ((1 - fx) * arr[y1, x0] + fx * arr[y1, x1])
    )
    return Patch(values=values, keypoint=kp)


def compute_descriptor(patch: Patch) -> GradientDescriptor:
    """Central-difference gradients of the patch interior.

    gx[k, l] = (p[k][l+1] - p[k][l-1]) / 2 and
    gy[k, l] = (p[k+1][l] - p[k-1][l]) / 2 per channel; the one-sample
    border of the patch is consumed, so an (n+2)-sided patch yields exactly
    n x n cells.  Adding a constant to the patch leaves the result
    unchanged.
    """
    v = patch.values
    gx = 0.5 * (v[1:-1, 2:, :] - v[1:-1, :-2, :])
    gy = 0.5 * (v[2:, 1:-1, :] - v[:-2, 1:-1, :])
    return GradientDescriptor(gx=gx, gy=gy, keypoint=patch.keypoint)


def flip_descriptor(d: GradientDescriptor) -> GradientDescriptor:
    """Descriptor of the mirrored patch: rows reversed, y-gradients negated.

    This is the geometrically consistent mirror along the patch y axis
    (the descriptor of a vertically mirrored pixel patch, recomputed from
    scratch, equals this transform exactly).  It is an involution.
    """
    return GradientDescriptor(
        gx=d.gx[::-1, :, :].copy(),
        gy=-d.gy[::-1, :, :],
        keypoint=d.keypoint,
    )


def extract_descriptors(
    pyramid: Pyramid,
    keypoints: list[Keypoint],
    n: int,
    spacing_factor: float = 1.0,
) -> tuple[list[GradientDescriptor], int]:
    """Descriptors for every keypoint whose patch fits inside the image.

    Patches are sampled from the Gaussian pyramid level whose blur is
    nearest the keypoint scale (the keypoint's own octave, rounded level).
    Returns the kept descriptors in keypoint order plus the count of
    keypoints dropped by the boundary check.
    """
    descriptors: list[GradientDescriptor] = []
    dropped = 0
    for kp in keypoints:
        oct_idx = pyramid.octave_index(kp.octave)
        if not 0 <= oct_idx < pyramid.n_octaves:
            dropped += 1
            continue
        levels = pyramid.octaves[oct_idx]
        level = int(np.clip(round(kp.level), 0, levels.shape[0] - 1))
        patch = sample_patch(
            levels[level],
            kp,
            n,
            spacing_factor,
            downsample=pyramid.downsample_factor(kp.octave),
        )
        if patch is None:
            dropped += 1
            continue
        descriptors.append(compute_descriptor(patch))
    return descriptors, dropped
