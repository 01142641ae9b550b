"""Label handling: filename datetimes, default labels, ground-truth mapping.

Default labels are inferred for every segment without any annotations:
time_of_day / day_of_year / continuous_timestamp come from a datetime parsed
out of the file name plus the segment's start offset, parent_directory is the
immediate parent folder (recording site, by convention) and audio_file_name
the file stem. Ground-truth tables are plain CSV with columns
audiofilename,start,end,label:<name> and get mapped onto each model's segment
grid by interval overlap.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import PurePosixPath
from typing import Optional

import numpy as np

from .errors import AnnotationError
from .loader import DatasetIndex

log = logging.getLogger(__name__)

DEFAULT_OVERLAP_THRESHOLD = 0.5

DEFAULT_LABEL_NAMES = ("time_of_day", "day_of_year", "continuous_timestamp",
                       "parent_directory", "audio_file_name")


@dataclass(frozen=True)
class Annotation:
    """A labeled time interval on one audio file (times relative to file start)."""

    audiofilename: str
    start: float
    end: float
    label: str

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid interval [{self.start}, {self.end}]")
        if not self.label:
            raise ValueError("label must be non-empty")


# Filename datetime patterns, tried in this order; first parseable match wins.
_PAT_YMD_HMS = re.compile(r"(?<!\d)(\d{4})(\d{2})(\d{2})_(\d{2})(\d{2})(\d{2})(?!\d)")
_PAT_SHORT_YMD = re.compile(r"(?<!\d)(\d{2})(\d{2})(\d{2})_(\d{2})(\d{2})(\d{2})(?!\d)")
_PAT_ISO_T = re.compile(r"(?<!\d)(\d{4})-(\d{2})-(\d{2})T(\d{2})-(\d{2})-(\d{2})(?!\d)")
_PAT_HEX_EPOCH = re.compile(r"^[0-9A-Fa-f]{8}$")


def get_dt_filename(filename: str) -> Optional[datetime]:
    """Parse a UTC datetime out of an audio file name, or None.

    Patterns in fixed order: YYYYMMDD_HHMMSS, YYMMDD_HHMMSS (2000-based),
    YYYY-MM-DDTHH-MM-SS, then a bare 8-hex-digit UNIX epoch stem (the
    AudioMoth convention).
    """
    stem = PurePosixPath(str(filename).replace("\\", "/")).stem
    m = _PAT_YMD_HMS.search(stem)
    if m:
        try:
            y, mo, d, h, mi, s = (int(g) for g in m.groups())
            return datetime(y, mo, d, h, mi, s, tzinfo=timezone.utc)
        except ValueError:
            pass
    m = _PAT_SHORT_YMD.search(stem)
    if m:
        try:
            y, mo, d, h, mi, s = (int(g) for g in m.groups())
            return datetime(2000 + y, mo, d, h, mi, s, tzinfo=timezone.utc)
        except ValueError:
            pass
    m = _PAT_ISO_T.search(stem)
    if m:
        try:
            y, mo, d, h, mi, s = (int(g) for g in m.groups())
            return datetime(y, mo, d, h, mi, s, tzinfo=timezone.utc)
        except ValueError:
            pass
    if _PAT_HEX_EPOCH.match(stem):
        return datetime.fromtimestamp(int(stem, 16), tz=timezone.utc)
    return None


@dataclass
class SegmentLabels:
    """Per-segment default labels, rows aligned with the model's embeddings."""

    time_of_day: list[Optional[int]]
    day_of_year: list[Optional[int]]
    continuous_timestamp: list[Optional[float]]
    parent_directory: list[str]
    audio_file_name: list[str]

    def __len__(self) -> int:
        return len(self.parent_directory)

    def as_dict(self) -> dict[str, list]:
        return {name: getattr(self, name) for name in DEFAULT_LABEL_NAMES}

    def label_values(self, name: str) -> list:
        if name not in DEFAULT_LABEL_NAMES:
            raise KeyError(f"unknown default label {name}")
        return getattr(self, name)


def _parent_dir(relpath: str, dataset_name: str) -> str:
    parent = PurePosixPath(relpath).parent.name
    return parent if parent else dataset_name


def create_default_labels(index: DatasetIndex,
                          timestamps_by_file: dict[str, list[tuple[float, float]]]
                          ) -> SegmentLabels:
    """Default labels for every segment of a model's grid.

    Time-based labels exist only when the file name carries a datetime; the
    instant of a segment is the file datetime plus the segment start offset.
    parent_directory and audio_file_name are always present.
    """
    tod: list[Optional[int]] = []
    doy: list[Optional[int]] = []
    cts: list[Optional[float]] = []
    parents: list[str] = []
    names: list[str] = []
    for entry in index.files:
        stamps = timestamps_by_file.get(entry.relpath)
        if stamps is None:
            continue
        stem = PurePosixPath(entry.relpath).stem
        file_dt = get_dt_filename(entry.relpath)
        parent = _parent_dir(entry.relpath, index.dataset_name)
        for start_s, _end_s in stamps:
            if file_dt is not None:
                instant = file_dt + timedelta(seconds=start_s)
                tod.append(instant.hour)
                doy.append(instant.timetuple().tm_yday)
                cts.append(instant.timestamp())
            else:
                tod.append(None)
                doy.append(None)
                cts.append(None)
            parents.append(parent)
            names.append(stem)
    return SegmentLabels(tod, doy, cts, parents, names)


def parse_annotations(path) -> tuple[list[Annotation], str]:
    """Read a ground-truth CSV; returns the rows and the class-set name.

    The table must have columns audiofilename, start, end and exactly one
    label:<name> column; <name> is reported as the class-set name.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if header is None:
            raise AnnotationError(f"annotation table {path} has no header row")
        for required in ("audiofilename", "start", "end"):
            if required not in header:
                raise AnnotationError(
                    f"annotation table {path} is missing required column {required!r}")
        label_cols = [h for h in header if h.startswith("label:")]
        if len(label_cols) != 1:
            raise AnnotationError(
                f"annotation table {path} must have exactly one label:* column, "
                f"found {label_cols or 'none'}")
        label_col = label_cols[0]
        class_set = label_col.split(":", 1)[1]
        rows: list[Annotation] = []
        for line_no, row in enumerate(reader, start=2):
            try:
                start = float(row["start"])
                end = float(row["end"])
            except (TypeError, ValueError) as exc:
                raise AnnotationError(
                    f"{path} row {line_no}: non-numeric start/end") from exc
            if start >= end:
                raise AnnotationError(
                    f"{path} row {line_no}: start ({start}) must be < end ({end})")
            label = (row[label_col] or "").strip()
            if not label:
                raise AnnotationError(f"{path} row {line_no}: empty label")
            rows.append(Annotation(row["audiofilename"].strip(), start, end, label))
    return rows, class_set


@dataclass
class GroundTruthMatrix:
    """Multi-label ground truth on one model's segment grid.

    Rows align with that model's stacked embeddings; columns are the sorted
    class names.
    """

    matrix: np.ndarray                      # (n_segments, n_classes) bool
    class_names: list[str]
    timestamps: list[tuple[str, float, float]]  # (relpath, start_s, end_s) per row

    def __post_init__(self):
        if self.matrix.shape != (len(self.timestamps), len(self.class_names)):
            raise ValueError("ground truth shape disagrees with axes")

    @property
    def annotated_rows(self) -> np.ndarray:
        """Row indices with at least one positive class (the annotated portion)."""
        return np.flatnonzero(self.matrix.any(axis=1))

    def row_class_labels(self) -> list[Optional[str]]:
        """One class name per row for clustering comparisons.

        Multi-positive rows take the lexicographically first positive class;
        unannotated rows map to None.
        """
        out: list[Optional[str]] = []
        for row in self.matrix:
            hits = np.flatnonzero(row)
            out.append(self.class_names[hits[0]] if hits.size else None)
        return out


def _match_annotations_to_files(annotations: list[Annotation],
                                known_relpaths: list[str]
                                ) -> dict[str, list[Annotation]]:
    by_basename: dict[str, list[str]] = {}
    for rel in known_relpaths:
        by_basename.setdefault(PurePosixPath(rel).name, []).append(rel)
    matched: dict[str, list[Annotation]] = {rel: [] for rel in known_relpaths}
    known = set(known_relpaths)
    for ann in annotations:
        name = ann.audiofilename.replace("\\", "/")
        if name in known:
            matched[name].append(ann)
            continue
        candidates = by_basename.get(PurePosixPath(name).name, [])
        if len(candidates) == 1:
            matched[candidates[0]].append(ann)
        elif len(candidates) > 1:
            log.warning("annotation for %s is ambiguous (%d files share the "
                        "basename); row skipped", ann.audiofilename, len(candidates))
        else:
            log.warning("annotation for unknown audio file %s; row skipped",
                        ann.audiofilename)
    return matched


def ground_truth_by_model(annotations: list[Annotation],
                          timestamps_by_file: dict[str, list[tuple[float, float]]],
                          overlap_threshold: float = DEFAULT_OVERLAP_THRESHOLD,
                          file_order: Optional[list[str]] = None
                          ) -> GroundTruthMatrix:
    """Map annotations onto a model's segment grid.

    A segment is positive for a class iff some annotation of that class on the
    same file overlaps it by at least overlap_threshold x min(segment length,
    annotation length). Rows with no positive class stay all-false and stand
    for the unannotated ("noise") portion.
    """
    if not (0 < overlap_threshold <= 1):
        raise ValueError("overlap_threshold must be in (0, 1]")
    order = file_order if file_order is not None else sorted(timestamps_by_file)
    class_names = sorted({a.label for a in annotations})
    col = {name: i for i, name in enumerate(class_names)}
    matched = _match_annotations_to_files(annotations, list(order))
    row_meta: list[tuple[str, float, float]] = []
    rows: list[np.ndarray] = []
    for relpath in order:
        stamps = timestamps_by_file[relpath]
        anns = matched.get(relpath, [])
        block = np.zeros((len(stamps), len(class_names)), dtype=bool)
        for ann in anns:
            ann_len = ann.end - ann.start
            for i, (seg_start, seg_end) in enumerate(stamps):
                overlap = min(seg_end, ann.end) - max(seg_start, ann.start)
                needed = overlap_threshold * min(seg_end - seg_start, ann_len)
                if overlap >= needed and overlap > 0:
                    block[i, col[ann.label]] = True
        rows.append(block)
        row_meta.extend((relpath, s, e) for s, e in stamps)
    matrix = np.concatenate(rows, axis=0) if rows else np.zeros((0, len(class_names)), bool)
    return GroundTruthMatrix(matrix, class_names, row_meta)
