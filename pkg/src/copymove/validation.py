"""Input validation helpers shared by the estimator, config and CLI layers."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .raster import Raster, load_image


def as_raster(image: Any) -> Raster:
    """Coerce a file path, numpy array or Raster into a Raster.

    Arrays may be (h, w) or (h, w, 1|3); integer dtypes are assumed 8-bit
    and scaled by 1/255, floating arrays must already lie in [0, 1].
    """
    if isinstance(image, Raster):
        return image
    if isinstance(image, (str, Path)):
        return load_image(image)
    arr = np.asarray(image)
    if arr.ndim not in (2, 3):
        raise ValueError(f"expected a (h, w[, c]) image array, got shape {arr.shape}")
    if np.issubdtype(arr.dtype, np.integer):
        arr = arr.astype(np.float64) / 255.0
    else:
        arr = arr.astype(np.float64)
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("floating-point image samples must lie in [0, 1]")
    return Raster(arr)


def check_positive(name: str, value: float, *, strict: bool = True) -> float:
    value = float(value)
    if strict and value <= 0:
        raise ValueError(f"{name} must be positive")
    if not strict and value < 0:
        raise ValueError(f"{name} must be >= 0")
    return value


def check_int_at_least(name: str, value: int, minimum: int) -> int:
    ivalue = int(value)
    if ivalue != value or ivalue < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}")
    return ivalue


def check_choice(name: str, value: str, choices: Sequence[str]) -> str:
    if value not in choices:
        raise ValueError(f"{name} must be one of {tuple(choices)}, got {value!r}")
    return value
