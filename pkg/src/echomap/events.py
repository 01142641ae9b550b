"""Classifier outputs as events: Raven tables, activity heatmaps, exports.

Per-segment class scores become merged events (consecutive positive windows
of one class collapse into a single event carrying the maximum score), which
are persisted as Raven-style selection tables, one per audio file plus a
combined table carrying a Begin File column.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from typing import Optional, Sequence

import numpy as np

from .labels import get_dt_filename
from .loader import ArtifactLayout, atomic_write_text

log = logging.getLogger(__name__)

DEFAULT_DETECTION_THRESHOLD = 0.5

RAVEN_HEADER = ["Selection", "View", "Channel", "Begin Time (s)", "End Time (s)",
                "Low Freq (Hz)", "High Freq (Hz)", "Species", "Confidence"]
RAVEN_COMBINED_HEADER = RAVEN_HEADER[:7] + ["Begin File"] + RAVEN_HEADER[7:]


@dataclass(frozen=True)
class PredictionEvent:
    """One detected interval of one class on one file."""

    audiofilename: str
    start: float
    end: float
    class_name: str
    score: float

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"invalid event interval [{self.start}, {self.end}]")


def scores_to_events(scores: np.ndarray,
                     timestamps: Sequence[tuple[float, float]],
                     class_list: Sequence[str], threshold: float,
                     audiofilename: str = "") -> list[PredictionEvent]:
    """Threshold per-segment scores and merge consecutive positives per class."""
    if not (0 < threshold < 1):
        raise ValueError("threshold must be in (0, 1)")
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape != (len(timestamps), len(class_list)):
        raise ValueError("scores must be (n_segments, n_classes)")
    events: list[PredictionEvent] = []
    for c, class_name in enumerate(class_list):
        run_start: Optional[int] = None
        best = 0.0
        for i in range(len(timestamps) + 1):
            positive = i < len(timestamps) and scores[i, c] >= threshold
            if positive:
                if run_start is None:
                    run_start = i
                    best = float(scores[i, c])
                else:
                    best = max(best, float(scores[i, c]))
            elif run_start is not None:
                events.append(PredictionEvent(
                    audiofilename, timestamps[run_start][0],
                    timestamps[i - 1][1], class_name, best))
                run_start = None
    events.sort(key=lambda e: (e.start, e.end, e.class_name))
    return events


def _format_raven_rows(events: Sequence[PredictionEvent], nyquist_hz: int,
                       with_file: bool, first_selection: int = 1) -> list[str]:
    lines = []
    for number, e in enumerate(events, start=first_selection):
        cells = [str(number), "Spectrogram 1", "1",
                 f"{e.start:.3f}", f"{e.end:.3f}", "0", str(nyquist_hz)]
        if with_file:
            cells.append(e.audiofilename)
        cells += [e.class_name, f"{e.score:.3f}"]
        lines.append("\t".join(cells))
    return lines


def write_raven_tables(layout: ArtifactLayout, model: str, sample_rate: int,
                       events: Sequence[PredictionEvent],
                       relpaths: Sequence[str]) -> dict[str, object]:
    """Write one selection table per audio file plus the combined table.

    Files without events still get a header-only table. Frequency bounds are
    the full band (0 to the model rate's Nyquist) since the backends are not
    frequency-localized.
    """
    nyquist = int(sample_rate // 2)
    by_file: dict[str, list[PredictionEvent]] = {rel: [] for rel in relpaths}
    for e in events:
        by_file.setdefault(e.audiofilename, []).append(e)
    paths: dict[str, object] = {"per_file": {}, "combined": None}
    combined_rows: list[str] = []
    total = 0
    for relpath in by_file:
        rows = sorted(by_file[relpath], key=lambda e: (e.start, e.end, e.class_name))
        body = _format_raven_rows(rows, nyquist, with_file=False)
        path = layout.prediction_path(model, relpath)
        atomic_write_text(path, "\n".join(["\t".join(RAVEN_HEADER)] + body) + "\n")
        paths["per_file"][relpath] = path
        combined_rows += _format_raven_rows(rows, nyquist, with_file=True,
                                            first_selection=total + 1)
        total += len(rows)
    combined = layout.combined_predictions_path(model)
    atomic_write_text(combined, "\n".join(
        ["\t".join(RAVEN_COMBINED_HEADER)] + combined_rows) + "\n")
    paths["combined"] = combined
    return paths


def read_raven_table(path, audiofilename: str = "") -> list[PredictionEvent]:
    """Parse a selection table back into events.

    Per-file tables carry no file column, so the caller names the file;
    combined tables use their Begin File column.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        events = []
        for row in reader:
            events.append(PredictionEvent(
                audiofilename=row.get("Begin File", audiofilename) or audiofilename,
                start=float(row["Begin Time (s)"]),
                end=float(row["End Time (s)"]),
                class_name=row["Species"],
                score=float(row["Confidence"])))
    return events


@dataclass
class HeatmapGrid:
    """Event counts per (date, hour-of-day) for one class."""

    class_name: str
    dates: list[date]
    cells: np.ndarray  # (len(dates), 24) int

    def __post_init__(self):
        if self.cells.shape != (len(self.dates), 24):
            raise ValueError("cells must be (n_dates, 24)")
        if (self.cells < 0).any():
            raise ValueError("cell counts must be >= 0")

    @property
    def total(self) -> int:
        return int(self.cells.sum())

    def to_dict(self) -> dict:
        return {"class": self.class_name,
                "dates": [d.isoformat() for d in self.dates],
                "hours": list(range(24)),
                "cells": self.cells.astype(int).tolist()}


def _event_instant(event: PredictionEvent) -> Optional[datetime]:
    file_dt = get_dt_filename(event.audiofilename)
    if file_dt is None:
        return None
    return file_dt + timedelta(seconds=event.start)


def heatmap(events: Sequence[PredictionEvent],
            file_datetimes: dict[str, Optional[datetime]],
            class_name: str) -> HeatmapGrid:
    """Dates x hours activity grid for one class.

    Events on files without a parseable datetime are excluded with a notice.
    A class with zero events yields an all-zero grid spanning the dataset's
    dates.
    """
    instants: list[datetime] = []
    missing = 0
    for e in events:
        if e.class_name != class_name:
            continue
        instant = _event_instant(e)
        if instant is None:
            missing += 1
            continue
        instants.append(instant)
    if missing:
        log.info("%d event(s) of %s excluded from the heatmap: file name has "
                 "no datetime", missing, class_name)
    if instants:
        dates = sorted({i.date() for i in instants})
    else:
        known = [d for d in file_datetimes.values() if d is not None]
        if known:
            first, last = min(known).date(), max(known).date()
            dates = [first + timedelta(days=i)
                     for i in range((last - first).days + 1)]
        else:
            dates = []
    row = {d: i for i, d in enumerate(dates)}
    cells = np.zeros((len(dates), 24), dtype=np.int64)
    for instant in instants:
        cells[row[instant.date()], instant.hour] += 1
    return HeatmapGrid(class_name, dates, cells)


def export_selection(layout: ArtifactLayout,
                     points: Sequence[tuple[str, float, float]],
                     label: str) -> object:
    """Write a dashboard selection as an annotations CSV.

    The schema (audiofilename,start,end,label:selection) round-trips through
    parse_annotations, so exported selections can seed probing runs.
    """
    if not points:
        raise ValueError("cannot export an empty selection")
    if not label:
        raise ValueError("selection label must be non-empty")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["audiofilename", "start", "end", "label:selection"])
    for relpath, start, end in points:
        writer.writerow([relpath, repr(float(start)), repr(float(end)), label])
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%f")
    path = layout.selections_dir / f"selection-{stamp}.csv"
    while path.exists():  # same-microsecond exports must not overwrite
        stamp += "x"
        path = layout.selections_dir / f"selection-{stamp}.csv"
    atomic_write_text(path, buf.getvalue())
    return path
