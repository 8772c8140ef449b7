"""Dataset evaluation harness: detection rates over labeled image corpora.

A dataset is either a directory with ``forged/`` and ``pristine/``
subdirectories, or a CSV manifest with ``path,label`` rows (labels
"forged"/"pristine", paths relative to the manifest).  The false-detection
rate is computed over the pristine originals only.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from sklearn.base import clone

from .config import ConfigError
from .detector import REPORT_SCHEMA_VERSION, CopyMoveDetector, DetectionReport

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".tif", ".tiff"}
_LABELS = ("forged", "pristine")


@dataclass(frozen=True)
class DatasetSummary:
    """Aggregated detection statistics plus the per-image reports."""

    dataset_name: str
    true_detection_rate: float | None
    false_detection_rate: float | None
    forged_total: int
    forged_flagged: int
    pristine_total: int
    pristine_flagged: int
    per_image: tuple[tuple[str, DetectionReport], ...]  # (label, report)

    def to_dict(self, *, include_timing: bool = True) -> dict[str, Any]:
        return {
            "schema": REPORT_SCHEMA_VERSION,
            "dataset": self.dataset_name,
            "true_detection_rate": self.true_detection_rate,
            "false_detection_rate": self.false_detection_rate,
            "forged_total": self.forged_total,
            "forged_flagged": self.forged_flagged,
            "pristine_total": self.pristine_total,
            "pristine_flagged": self.pristine_flagged,
            "images": [
                {"label": label, **report.to_dict(include_timing=include_timing)}
                for label, report in self.per_image
            ],
        }

    def to_json(self, *, include_timing: bool = True) -> str:
        return json.dumps(
            self.to_dict(include_timing=include_timing), indent=2, sort_keys=True
        )


def _from_manifest(manifest: Path) -> list[tuple[Path, str]]:
    entries: list[tuple[Path, str]] = []
    with manifest.open(newline="", encoding="utf-8") as handle:
        for row_index, row in enumerate(csv.reader(handle)):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise ConfigError(f"{manifest}: row {row_index + 1} needs 'path,label'")
            path_text, label = row[0].strip(), row[1].strip().lower()
            if row_index == 0 and (path_text.lower(), label) == ("path", "label"):
                continue
            if label not in _LABELS:
                raise ConfigError(
                    f"{manifest}: row {row_index + 1}: label must be forged|pristine, "
                    f"got {label!r}"
                )
            entries.append(((manifest.parent / path_text).resolve(), label))
    return entries


def _from_directory(root: Path) -> list[tuple[Path, str]]:
    entries: list[tuple[Path, str]] = []
    for label in _LABELS:
        subdir = root / label
        if not subdir.is_dir():
            continue
        for path in sorted(subdir.rglob("*")):
            if path.is_file() and path.suffix.lower() in IMAGE_EXTENSIONS:
                entries.append((path, label))
    return entries


def discover_dataset(dataset: str | Path) -> list[tuple[Path, str]]:
    """List (image path, label) pairs from a dataset directory or manifest."""
    dataset = Path(dataset)
    if dataset.is_file():
        entries = _from_manifest(dataset)
    elif dataset.is_dir():
        entries = _from_directory(dataset)
    else:
        raise ConfigError(f"dataset not found: {dataset}")
    if not entries:
        raise ConfigError(
            f"empty dataset: {dataset} (need forged/ and pristine/ image "
            f"subdirectories or a path,label manifest)"
        )
    entries.sort(key=lambda item: (item[1], str(item[0])))
    return entries


def evaluate_dataset(
    dataset: str | Path,
    detector: CopyMoveDetector | None = None,
    *,
    output_dir: str | Path | None = None,
    dataset_name: str | None = None,
) -> DatasetSummary:
    """Run the detector on every image of a labeled dataset.

    The false-alarm budget (n_tests accounting) uses the dataset's image
    count rather than the configured single-image default.  When
    ``output_dir`` is given, one JSON report per image plus a summary
    document are written there.
    """
    entries = discover_dataset(dataset)
    base = detector if detector is not None else CopyMoveDetector()
    runner: CopyMoveDetector = clone(base)
    runner.set_params(images_budget=len(entries))

    per_image: list[tuple[str, DetectionReport]] = []
    counts = {"forged": [0, 0], "pristine": [0, 0]}  # label -> [total, flagged]
    out_path = Path(output_dir) if output_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    for index, (path, label) in enumerate(entries):
        report = runner.detect(path)
        per_image.append((label, report))
        counts[label][0] += 1
        counts[label][1] += 1 if report.forged else 0
        if out_path is not None:
            doc = {"label": label, **report.to_dict()}
            target = out_path / f"{index:04d}_{Path(path).stem}.json"
            target.write_text(
                json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )

    forged_total, forged_flagged = counts["forged"]
    pristine_total, pristine_flagged = counts["pristine"]
    summary = DatasetSummary(
        dataset_name=dataset_name or Path(dataset).name,
        true_detection_rate=(forged_flagged / forged_total) if forged_total else None,
        false_detection_rate=(pristine_flagged / pristine_total) if pristine_total else None,
        forged_total=forged_total,
        forged_flagged=forged_flagged,
        pristine_total=pristine_total,
        pristine_flagged=pristine_flagged,
        per_image=tuple(per_image),
    )
    if out_path is not None:
        (out_path / "summary.json").write_text(
            summary.to_json() + "\n", encoding="utf-8"
        )
    return summary
