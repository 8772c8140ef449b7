"""Image decoding, grayscale conversion and annotated overlay rendering.

All pixel data is held as float64 scaled to [0, 1].  Decoding reads the
stored pixels only: EXIF orientation tags are ignored on purpose, since a
forensic analysis must see what is in the file, not what a viewer would
display.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

import numpy as np
from PIL import Image, UnidentifiedImageError

if TYPE_CHECKING:  # pragma: no cover
    from .matcher import MatchPair

# Rec. 601 luma weights, also the helper contract for grayscale conversion.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

# Alpha channels are dropped (stored color planes are kept as-is); palette
# images are expanded to RGB.  Anything else is rejected.
_EIGHT_BIT_MODES = {"L", "RGB"}
_CONVERTED_MODES = {"P": "RGB", "RGBA": "RGB", "LA": "L", "1": "L"}


class ImageFormatError(ValueError):
    """The file decoded, but not to a representation this package supports."""


@dataclass(frozen=True)
class Raster:
    """Immutable planar image, shape ``(height, width, channels)`` in [0, 1].

    ``channels`` is 1 (grayscale) or 3 (RGB).  The sample array is locked
    read-only after construction, so rasters are safe to share across
    parallel workers.
    """

    samples: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(
                f"raster samples must have shape (h, w, 1|3), got {arr.shape}"
            )
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("raster must contain at least one pixel")
        if not np.isfinite(arr).all():
            raise ValueError("raster samples must be finite")
        if arr is self.samples and arr.flags.writeable:
            arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def channels(self) -> int:
        return self.samples.shape[2]


def load_image(path: str | Path) -> Raster:
    """Decode a PNG/JPEG/TIFF file into a Raster.

    8-bit sample values map to v/255 and 16-bit values to v/65535, so the
    full-scale white is 1.0 regardless of bit depth.  Color sources yield 3
    channels, grayscale sources 1.  Decoding is deterministic.

    Raises OSError for unreadable files and ImageFormatError for files that
    decode to an unsupported representation.
    """
    path = Path(path)
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            if mode in _CONVERTED_MODES:
                img = img.convert(_CONVERTED_MODES[mode])
                mode = img.mode
            if mode in _EIGHT_BIT_MODES:
                arr = np.asarray(img, dtype=np.float64) / 255.0
            elif mode.startswith("I;16") or mode == "I":
                arr = np.asarray(img, dtype=np.float64) / 65535.0
            else:
                raise ImageFormatError(f"unsupported image mode {mode!r}: {path}")
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"not a decodable image: {path}") from exc
    return Raster(arr)


def save_png(raster: Raster, path: str | Path) -> None:
    """Encode a raster to an 8-bit PNG (values rounded to v*255)."""
    arr = np.clip(np.rint(raster.samples * 255.0), 0, 255).astype(np.uint8)
    if raster.channels == 1:
        img = Image.fromarray(arr[:, :, 0], mode="L")
    else:
        img = Image.fromarray(arr, mode="RGB")
    img.save(Path(path), format="PNG")


def to_grayscale(raster: Raster) -> Raster:
    """Luma conversion 0.299 R + 0.587 G + 0.114 B; identity on 1-channel input."""
    if raster.channels == 1:
        return raster
    luma = raster.samples @ np.asarray(LUMA_WEIGHTS, dtype=np.float64)
    return Raster(luma[:, :, np.newaxis])


def _segment_disc_mask(
    shape: tuple[int, int],
    ax: float,
    ay: float,
    bx: float,
    by: float,
    disc_radius: float,
    line_halfwidth: float,
) -> np.ndarray:
    """Boolean mask of the pixels covered by one drawn match.

    A pixel is drawn when its center lies within ``line_halfwidth`` of the
    segment a-b or within ``disc_radius`` of either endpoint.
    """
    h, w = shape
    margin = max(disc_radius, line_halfwidth) + 1.0
    i0 = max(0, int(np.floor(min(ay, by) - margin)))
    i1 = min(h, int(np.ceil(max(ay, by) + margin)) + 1)
    j0 = max(0, int(np.floor(min(ax, bx) - margin)))
    j1 = min(w, int(np.ceil(max(ax, bx) + margin)) + 1)
    mask = np.zeros(shape, dtype=bool)
    if i0 >= i1 or j0 >= j1:
        return mask

    ys, xs = np.mgrid[i0:i1, j0:j1]
    ys = ys.astype(np.float64)
    xs = xs.astype(np.float64)

    vx, vy = bx - ax, by - ay
    seg_len_sq = vx * vx + vy * vy
    if seg_len_sq == 0.0:
        t = np.zeros_like(xs)
    else:
        t = np.clip(((xs - ax) * vx + (ys - ay) * vy) / seg_len_sq, 0.0, 1.0)
    dist_seg_sq = (xs - (ax + t * vx)) ** 2 + (ys - (ay + t * vy)) ** 2
    dist_a_sq = (xs - ax) ** 2 + (ys - ay) ** 2
    dist_b_sq = (xs - bx) ** 2 + (ys - by) ** 2

    local = (
        (dist_seg_sq <= line_halfwidth**2)
        | (dist_a_sq <= disc_radius**2)
        | (dist_b_sq <= disc_radius**2)
    )
    mask[i0:i1, j0:j1] = local
    return mask


def render_overlay(
    image: Raster,
    matches: Iterable["MatchPair"],
    path: str | Path,
    *,
    disc_radius: float = 3.0,
    line_halfwidth: float = 0.75,
    color: tuple[float, float, float] = (1.0, 0.15, 0.1),
) -> None:
    """Write a PNG with a segment between the keypoints of every match and a
    disc at each endpoint.  Pixels outside the drawn geometry are copied
    unchanged; the drawn-pixel set of several matches is the union of their
    individual masks.
    """
    if image.channels == 1:
        canvas = np.repeat(image.samples, 3, axis=2).copy()
    else:
        canvas = image.samples.copy()
    shape = (image.height, image.width)

    drawn = np.zeros(shape, dtype=bool)
    for match in matches:
        a, b = match.a, match.b
        for p in (a, b):
            if not (0 <= p.x < image.width and 0 <= p.y < image.height):
                raise ValueError(
                    f"match endpoint ({p.x:.1f}, {p.y:.1f}) outside image bounds"
                )
        drawn |= _segment_disc_mask(
            shape, a.x, a.y, b.x, b.y, disc_radius, line_halfwidth
        )
    canvas[drawn] = np.asarray(color, dtype=np.float64)
    save_png(Raster(canvas), path)
