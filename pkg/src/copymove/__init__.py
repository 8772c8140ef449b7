"""Copy-move forgery detection with an a-contrario matching threshold.

Sparse scale/rotation-normalized gradient-patch descriptors are extracted
at difference-of-Gaussians keypoints and matched exhaustively; a pair
counts as a match only when every descriptor cell agrees within a
threshold calibrated so the expected number of false alarms over the whole
test budget stays below a user-chosen epsilon.  Exact digital copies pass
this test; naturally similar objects almost never do.
"""

from .acontrario import (
    AContrarioParams,
    Threshold,
    budget_params,
    chi2_cdf,
    chi2_inv,
    compute_threshold,
    erfinv,
    predicted_false_match_probability,
)
from .config import ConfigError, load_config_file, parse_config_text
from .descriptor import (
    GradientDescriptor,
    Patch,
    compute_descriptor,
    extract_descriptors,
    flip_descriptor,
    sample_patch,
)
from .detector import CopyMoveDetector, DetectionReport, detect
from .evaluate import DatasetSummary, discover_dataset, evaluate_dataset
from .matcher import MatchPair, MatchStats, d_flip, d_max, match_all
from .raster import (
    ImageFormatError,
    Raster,
    load_image,
    render_overlay,
    save_png,
    to_grayscale,
)
from .scale_space import (
    Keypoint,
    Pyramid,
    ScaleSpaceConfig,
    build_pyramid,
    detect_keypoints,
    gaussian_blur,
)
from .validation import as_raster

__version__ = "0.1.0"

__all__ = [
    "AContrarioParams",
    "ConfigError",
    "CopyMoveDetector",
    "DatasetSummary",
    "DetectionReport",
    "GradientDescriptor",
    "ImageFormatError",
    "Keypoint",
    "MatchPair",
    "MatchStats",
    "Patch",
    "Pyramid",
    "Raster",
    "ScaleSpaceConfig",
    "Threshold",
    "as_raster",
    "budget_params",
    "build_pyramid",
    "chi2_cdf",
    "chi2_inv",
    "compute_descriptor",
    "compute_threshold",
    "d_flip",
    "d_max",
    "detect",
    "detect_keypoints",
    "discover_dataset",
    "erfinv",
    "evaluate_dataset",
    "extract_descriptors",
    "flip_descriptor",
    "gaussian_blur",
    "load_config_file",
    "load_image",
    "match_all",
    "parse_config_text",
    "predicted_false_match_probability",
    "render_overlay",
    "sample_patch",
    "save_png",
    "to_grayscale",
    "__version__",
]
