"""Flat key-value configuration files.

The file format is one ``key = value`` pair per line, ``#`` starts a
comment.  Keys are namespaced per pipeline stage and map one-to-one onto
CopyMoveDetector constructor parameters, e.g.::

    acontrario.sigma = 1.0        # noise std on the 0-255 scale
    acontrario.epsilon = 1.0
    descriptor.n = auto
    matcher.exclusion_radius_mode = footprint
    scale_space.contrast_threshold = 0.015
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Callable


class ConfigError(ValueError):
    """A configuration file or parameter set violates its contract."""


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_descriptor_n(text: str) -> int | str:
    if text.strip().lower() == "auto":
        return "auto"
    return int(text)


# config file key -> (CopyMoveDetector parameter, value parser)
_KEYS: dict[str, tuple[str, Callable[[str], Any]]] = {
    "acontrario.sigma": ("sigma", float),
    "acontrario.epsilon": ("epsilon", float),
    "acontrario.images_budget": ("images_budget", int),
    "acontrario.mode": ("mode", str),
    "acontrario.count_flip_tests": ("count_flip_tests", _parse_bool),
    "descriptor.n": ("descriptor_n", _parse_descriptor_n),
    "descriptor.channels": ("descriptor_channels", int),
    "descriptor.spacing": ("spacing", float),
    "matcher.exclusion_radius_mode": ("exclusion_radius_mode", str),
    "matcher.exclusion_radius": ("exclusion_radius", float),
    "matcher.enable_flip": ("enable_flip", _parse_bool),
    "scale_space.scales_per_octave": ("scales_per_octave", int),
    "scale_space.sigma_min": ("sigma_min", float),
    "scale_space.assumed_blur": ("assumed_blur", float),
    "scale_space.contrast_threshold": ("contrast_threshold", float),
    "scale_space.edge_threshold": ("edge_threshold", float),
    "scale_space.upsample": ("upsample", _parse_bool),
}


def parse_config_text(text: str, *, source: str = "<config>") -> dict[str, Any]:
    """Parse config text into CopyMoveDetector keyword arguments."""
    params: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown configuration key {key!r}")
        param, parser = _KEYS[key]
        try:
            params[param] = parser(value.strip())
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
    return params


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Read a config file; returns CopyMoveDetector keyword arguments."""
    path = Path(path)
    return parse_config_text(path.read_text(encoding="utf-8"), source=str(path))
