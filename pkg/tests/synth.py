"""Synthetic textured images and copy-move forgeries for the test suite.

The texture generator sums band-limited noise at a few scales, which gives
natural-looking blob structure at several octaves without any dataset
download.  Forgeries copy a square region to a distant location, optionally
rotating, rescaling or mirroring the copy and optionally degrading the
whole image afterwards (JPEG recompression, additive noise).
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from copymove.scale_space import gaussian_blur

FORGERY_KINDS = ("verbatim", "rotated", "scaled", "flipped", "jpeg", "noise")


def textured_image(
    rng: np.random.Generator,
    height: int = 448,
    width: int = 448,
    *,
    scales: tuple[float, ...] = (3.0, 7.0, 16.0),
    amplitudes: tuple[float, ...] = (1.0, 1.6, 2.4),
) -> np.ndarray:
    """Grayscale texture in [0.05, 0.95] with structure at several scales."""
    img = np.zeros((height, width))
    for s, amp in zip(scales, amplitudes):
        img += amp * gaussian_blur(rng.standard_normal((height, width)), s)
    img -= img.min()
    img /= img.max()
    return 0.05 + 0.9 * img


def colorize(gray: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Three correlated color planes from one grayscale texture."""
    tint = 0.1 * gaussian_blur(rng.standard_normal(gray.shape), 24.0)
    r = np.clip(gray + tint, 0.0, 1.0)
    g = np.clip(gray * 0.92 + 0.04, 0.0, 1.0)
    b = np.clip(gray - tint, 0.0, 1.0)
    return np.stack([r, g, b], axis=-1)


def pristine_image(
    rng: np.random.Generator, height: int = 448, width: int = 448, *, color: bool = True
) -> np.ndarray:
    gray = textured_image(rng, height, width)
    return colorize(gray, rng) if color else gray[:, :, None]


def jpeg_recompress(img: np.ndarray, quality: int = 80) -> np.ndarray:
    arr = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    mode = "RGB" if arr.ndim == 3 else "L"
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="JPEG", quality=quality)
    buf.seek(0)
    out = np.asarray(Image.open(buf), dtype=np.float64) / 255.0
    return out.reshape(img.shape)


def add_noise(img: np.ndarray, std: float, rng: np.random.Generator) -> np.ndarray:
    return np.clip(img + rng.normal(0.0, std, img.shape), 0.0, 1.0)


@dataclass(frozen=True)
class Forgery:
    image: np.ndarray
    kind: str
    src: tuple[int, int]  # (row, col) of the copied block
    dst: tuple[int, int]  # (row, col) of the pasted block
    size: int


def make_forgery(
    rng: np.random.Generator,
    kind: str = "verbatim",
    *,
    height: int = 448,
    width: int = 448,
    size: int = 128,
    color: bool = True,
    margin: int = 32,
) -> Forgery:
    """Textured image with one copied region; ``kind`` picks the corruption.

    The source block sits at the top-left margin and the copy at the
    bottom-right one, so the two never overlap; the displacement is a
    multiple of 32 pixels, which keeps verbatim copies bit-exact on every
    pyramid octave used.
    """
    if kind not in FORGERY_KINDS:
        raise ValueError(f"unknown forgery kind {kind!r}")
    img = pristine_image(rng, height, width, color=color)
    src = (margin, margin)

    if kind == "rotated":
        # Rotate a padded source region and keep the central block, which is
        # then fully covered by rotated source content.
        pad = int(np.ceil(size * 0.25)) + 4
        region = img[src[0] : src[0] + size + 2 * pad, src[1] : src[1] + size + 2 * pad]
        rotated = ndimage.rotate(
            region, angle=30.0, axes=(1, 0), reshape=False, order=3, mode="nearest"
        )
        pasted = rotated[pad : pad + size, pad : pad + size]
    elif kind == "scaled":
        block = img[src[0] : src[0] + size, src[1] : src[1] + size]
        zoom = (0.9, 0.9) + (1.0,) * (block.ndim - 2)
        pasted = ndimage.zoom(block, zoom, order=3, mode="nearest")
    elif kind == "flipped":
        pasted = img[src[0] : src[0] + size, src[1] : src[1] + size][:, ::-1]
    else:
        pasted = img[src[0] : src[0] + size, src[1] : src[1] + size]

    ph, pw = pasted.shape[:2]
    dst = (height - size - margin, width - size - margin)
    out = img.copy()
    out[dst[0] : dst[0] + ph, dst[1] : dst[1] + pw] = pasted
    out = np.clip(out, 0.0, 1.0)

    if kind == "jpeg":
        out = jpeg_recompress(out, quality=80)
    elif kind == "noise":
        out = add_noise(out, 2.0 / 255.0, rng)
    return Forgery(image=out, kind=kind, src=src, dst=dst, size=size)
