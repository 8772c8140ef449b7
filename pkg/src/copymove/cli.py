"""Command-line interface: detect / evaluate / threshold subcommands.

Exit codes: 0 the command ran (any verdict), 2 usage or configuration
error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from .acontrario import AContrarioParams, compute_threshold, predicted_false_match_probability
from .config import ConfigError, load_config_file
from .detector import CopyMoveDetector
from .evaluate import evaluate_dataset
from .raster import render_overlay
from .validation import as_raster


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="copymove",
        description="Copy-move forgery detection with an a-contrario match threshold.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_detect = sub.add_parser("detect", help="analyze a single image")
    p_detect.add_argument("image", help="path to a PNG/JPEG/TIFF image")
    p_detect.add_argument("--config", help="key=value configuration file")
    p_detect.add_argument("--sigma", type=float, help="noise std on the 0-255 scale")
    p_detect.add_argument("--epsilon", type=float, help="false-alarm budget")
    p_detect.add_argument(
        "--descriptor-n", help="descriptor side (integer or 'auto')", dest="descriptor_n"
    )
    p_detect.add_argument("--json", dest="json_out", help="write the JSON report here")
    p_detect.add_argument("--overlay", help="write a match-overlay PNG here")

    p_eval = sub.add_parser("evaluate", help="run over a labeled dataset")
    p_eval.add_argument(
        "dataset", help="directory with forged/ and pristine/ subdirs, or a path,label CSV"
    )
    p_eval.add_argument("--config", help="key=value configuration file")
    p_eval.add_argument("--summary", help="write the JSON summary here")
    p_eval.add_argument(
        "--reports-dir", help="write one JSON report per image into this directory"
    )

    p_thr = sub.add_parser(
        "threshold",
        help="print the matching threshold for a given test budget",
        description=(
            "Computes the squared-difference threshold from (sigma, epsilon, "
            "test budget, descriptor cell count).  sigma is used in the units "
            "you give it; pass the 0-255 scale to compare with published "
            "conventions (detection itself works on the [0,1] scale)."
        ),
    )
    p_thr.add_argument("--sigma", type=float, default=1.0)
    p_thr.add_argument("--epsilon", type=float, default=1.0)
    p_thr.add_argument("--images", type=int, default=100, help="image budget")
    p_thr.add_argument("--avg-keypoints", type=int, default=50, dest="avg_keypoints")
    p_thr.add_argument(
        "--exponent", type=int, default=48, help="descriptor cell count n*n*channels"
    )
    p_thr.add_argument("--mode", choices=("cell", "scalar"), default="cell")
    p_thr.add_argument("--json", action="store_true", dest="json_out")
    return parser


def _detector_from_args(args: argparse.Namespace) -> CopyMoveDetector:
    params = load_config_file(args.config) if args.config else {}
    if getattr(args, "sigma", None) is not None:
        params["sigma"] = args.sigma
    if getattr(args, "epsilon", None) is not None:
        params["epsilon"] = args.epsilon
    n = getattr(args, "descriptor_n", None)
    if n is not None:
        params["descriptor_n"] = n if n == "auto" else int(n)
    detector = CopyMoveDetector(**params)
    detector.fit()
    return detector


def _cmd_detect(args: argparse.Namespace) -> int:
    detector = _detector_from_args(args)
    raster = as_raster(args.image)
    report = detector.detect(raster, image_path=args.image)
    print(f"image: {args.image}")
    print(f"verdict: {report.verdict}")
    flipped = sum(1 for m in report.matches if m.flipped)
    print(f"matches: {len(report.matches)} ({flipped} flipped)")
    print(
        f"keypoints: {report.keypoint_count} descriptors "
        f"({report.keypoints_detected} detected, {report.boundary_dropped} dropped)"
    )
    if report.tau is not None and report.params is not None:
        print(
            f"tau: {report.tau:.6g} (sigma {detector.sigma:g}/255, "
            f"epsilon {report.params.epsilon:g}, n_tests {report.params.n_tests:.4g}, "
            f"E {report.params.exponent}, {report.params.mode})"
        )
    print(f"mean comparisons/pair: {report.mean_comparisons_per_pair:.3f}")
    print(f"elapsed: {report.elapsed_ms:.0f} ms")
    if args.json_out:
        Path(args.json_out).write_text(report.to_json() + "\n", encoding="utf-8")
    if args.overlay:
        render_overlay(raster, report.matches, args.overlay)
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    detector = _detector_from_args(args)
    summary = evaluate_dataset(
        args.dataset, detector, output_dir=args.reports_dir
    )
    print(f"dataset: {summary.dataset_name}")
    if summary.true_detection_rate is not None:
        print(
            f"forged: {summary.forged_flagged}/{summary.forged_total} flagged "
            f"(true detection rate {100 * summary.true_detection_rate:.1f}%)"
        )
    if summary.false_detection_rate is not None:
        print(
            f"pristine: {summary.pristine_flagged}/{summary.pristine_total} flagged "
            f"(false detection rate {100 * summary.false_detection_rate:.1f}%)"
        )
    if args.summary:
        Path(args.summary).write_text(summary.to_json() + "\n", encoding="utf-8")
    return 0


def _cmd_threshold(args: argparse.Namespace) -> int:
    pairs = args.avg_keypoints * (args.avg_keypoints - 1) / 2
    params = AContrarioParams(
        sigma=args.sigma,
        epsilon=args.epsilon,
        n_tests=args.images * pairs,
        exponent=args.exponent,
        mode="per-cell" if args.mode == "cell" else "per-scalar",
    )
    threshold = compute_threshold(params)
    probability = predicted_false_match_probability(threshold)
    if args.json_out:
        print(
            json.dumps(
                {
                    "tau": threshold.tau,
                    "sigma": params.sigma,
                    "epsilon": params.epsilon,
                    "n_tests": params.n_tests,
                    "exponent": params.exponent,
                    "effective_exponent": params.effective_exponent,
                    "mode": params.mode,
                    "false_match_probability": probability,
                },
                indent=2,
                sort_keys=True,
            )
        )
    else:
        print(f"tau = {threshold.tau:.6g}")
        print(f"exponent E = {params.exponent} ({params.mode})")
        print(f"n_tests = {params.n_tests:.6g}")
        print(f"sigma = {params.sigma:g}, epsilon = {params.epsilon:g}")
        print(f"predicted per-pair false-match probability = {probability:.6g}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors exit with code 2
        return int(exc.code or 0)
    handlers = {
        "detect": _cmd_detect,
        "evaluate": _cmd_evaluate,
        "threshold": _cmd_threshold,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:  # pragma: no cover
    raise SystemExit(main())


if __name__ == "__main__":  # pragma: no cover
    entrypoint()
