from datetime import datetime, timezone

import numpy as np
import pytest

from echomap.events import (HeatmapGrid, PredictionEvent, export_selection,
                            heatmap, read_raven_table, scores_to_events,
                            write_raven_tables)
from echomap.labels import parse_annotations
from echomap.loader import layout_for


def _grid(n, window=3.0):
    return [(i * window, (i + 1) * window) for i in range(n)]


class TestScoresToEvents:
    def test_consecutive_positives_merge_with_max_score(self):
        scores = np.array([[0.9], [0.8], [0.1]])
        events = scores_to_events(scores, _grid(3), ["frog"], 0.5, "a.wav")
        assert events == [PredictionEvent("a.wav", 0.0, 6.0, "frog", 0.9)]

    def test_all_below_threshold_is_empty(self):
        scores = np.array([[0.2], [0.3]])
        assert scores_to_events(scores, _grid(2), ["frog"], 0.5) == []

    def test_two_classes_same_interval(self):
        scores = np.array([[0.9, 0.7]])
        events = scores_to_events(scores, _grid(1), ["a", "b"], 0.5, "f.wav")
        assert len(events) == 2
        assert {e.class_name for e in events} == {"a", "b"}
        assert all((e.start, e.end) == (0.0, 3.0) for e in events)

    def test_separate_runs_stay_separate(self):
        scores = np.array([[0.9], [0.1], [0.8], [0.85]])
        events = scores_to_events(scores, _grid(4), ["frog"], 0.5, "f.wav")
        assert [(e.start, e.end, e.score) for e in events] == \
            [(0.0, 3.0, 0.9), (6.0, 12.0, 0.85)]

    def test_no_overlap_per_file_and_class(self):
        rng = np.random.default_rng(0)
        scores = rng.uniform(0, 1, size=(50, 3))
        events = scores_to_events(scores, _grid(50), ["a", "b", "c"], 0.5, "f")
        by_class = {}
        for e in events:
            by_class.setdefault(e.class_name, []).append((e.start, e.end))
        for intervals in by_class.values():
            intervals.sort()
            for (s0, e0), (s1, e1) in zip(intervals, intervals[1:]):
                assert e0 <= s1

    def test_threshold_guard(self):
        with pytest.raises(ValueError):
            scores_to_events(np.zeros((1, 1)), _grid(1), ["a"], 0.0)


class TestRavenTables:
    def test_exact_line_format(self, tmp_path):
        layout = layout_for("ds", tmp_path)
        events = [PredictionEvent("a.wav", 0.0, 6.0, "toyclass3", 0.9)]
        write_raven_tables(layout, "mel-large", 48000, events, ["a.wav"])
        lines = layout.prediction_path("mel-large", "a.wav").read_text().splitlines()
        assert lines[0] == ("Selection\tView\tChannel\tBegin Time (s)\t"
                            "End Time (s)\tLow Freq (Hz)\tHigh Freq (Hz)\t"
                            "Species\tConfidence")
        assert lines[1] == "1\tSpectrogram 1\t1\t0.000\t6.000\t0\t24000\ttoyclass3\t0.900"

    def test_zero_events_writes_header_only_table(self, tmp_path):
        layout = layout_for("ds", tmp_path)
        write_raven_tables(layout, "m", 16000, [], ["quiet.wav"])
        lines = layout.prediction_path("m", "quiet.wav").read_text().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("Selection\t")

    def test_combined_table_row_count_and_begin_file(self, tmp_path):
        layout = layout_for("ds", tmp_path)
        events = [PredictionEvent("a.wav", 0.0, 3.0, "x", 1.0),
                  PredictionEvent("a.wav", 6.0, 9.0, "x", 0.75),
                  PredictionEvent("b/c.wav", 0.0, 3.0, "y", 0.5)]
        write_raven_tables(layout, "m", 16000, events, ["a.wav", "b/c.wav"])
        combined = layout.combined_predictions_path("m").read_text().splitlines()
        assert "Begin File" in combined[0]
        assert len(combined) - 1 == 3
        assert combined[1].split("\t")[7] == "a.wav"
        assert combined[3].split("\t")[7] == "b/c.wav"
        # selections numbered globally from 1
        assert [row.split("\t")[0] for row in combined[1:]] == ["1", "2", "3"]

    def test_roundtrip_through_reader(self, tmp_path):
        layout = layout_for("ds", tmp_path)
        events = [PredictionEvent("a.wav", 0.0, 3.0, "frog", 0.875),
                  PredictionEvent("a.wav", 9.0, 15.0, "toad", 0.5)]
        write_raven_tables(layout, "m", 16000, events, ["a.wav"])
        parsed = read_raven_table(layout.prediction_path("m", "a.wav"), "a.wav")
        assert parsed == events
        combined = read_raven_table(layout.combined_predictions_path("m"))
        assert combined == events

    def test_per_file_tables_mirror_audio_tree(self, tmp_path):
        layout = layout_for("ds", tmp_path)
        write_raven_tables(layout, "m", 16000, [], ["siteA/x.wav"])
        assert (layout.predictions_dir("m") / "siteA" / "x.txt").exists()


class TestHeatmap:
    def test_counts_by_date_and_hour(self):
        events = [PredictionEvent("20240601_061500.wav", s, s + 3, "frog", 0.9)
                  for s in (0.0, 60.0, 120.0)]
        grid = heatmap(events, {}, "frog")
        assert grid.dates == [datetime(2024, 6, 1).date()]
        assert grid.cells[0, 6] == 3
        assert grid.total == 3

    def test_events_spanning_two_dates(self):
        events = [PredictionEvent("20240601_230000.wav", 0.0, 3.0, "frog", 0.9),
                  PredictionEvent("20240602_010000.wav", 0.0, 3.0, "frog", 0.8)]
        grid = heatmap(events, {}, "frog")
        assert len(grid.dates) == 2
        assert grid.cells[0, 23] == 1
        assert grid.cells[1, 1] == 1

    def test_offset_rolls_into_next_hour(self):
        events = [PredictionEvent("20240601_065900.wav", 120.0, 123.0, "frog", 0.9)]
        grid = heatmap(events, {}, "frog")
        assert grid.cells[0, 7] == 1

    def test_zero_event_class_spans_dataset_dates(self):
        file_dts = {"a.wav": datetime(2024, 6, 1, tzinfo=timezone.utc),
                    "b.wav": datetime(2024, 6, 3, tzinfo=timezone.utc)}
        grid = heatmap([], file_dts, "ghost")
        assert len(grid.dates) == 3
        assert grid.total == 0
        assert grid.cells.shape == (3, 24)

    def test_files_without_datetime_excluded_with_notice(self, caplog):
        events = [PredictionEvent("nodate.wav", 0.0, 3.0, "frog", 0.9),
                  PredictionEvent("20240601_060000.wav", 0.0, 3.0, "frog", 0.9)]
        with caplog.at_level("INFO"):
            grid = heatmap(events, {}, "frog")
        assert grid.total == 1
        assert "no datetime" in caplog.text

    def test_cells_validated(self):
        with pytest.raises(ValueError):
            HeatmapGrid("x", [datetime(2024, 6, 1).date()], np.zeros((2, 24)))


class TestExportSelection:
    def test_roundtrips_through_parse_annotations(self, tmp_path):
        layout = layout_for("ds", tmp_path)
        path = export_selection(layout, [("a.wav", 0.0, 1.0), ("a.wav", 2.0, 3.5)],
                                "mystery-call")
        rows, class_set = parse_annotations(path)
        assert class_set == "selection"
        assert [(r.audiofilename, r.start, r.end, r.label) for r in rows] == \
            [("a.wav", 0.0, 1.0, "mystery-call"), ("a.wav", 2.0, 3.5, "mystery-call")]

    def test_selection_across_files(self, tmp_path):
        layout = layout_for("ds", tmp_path)
        path = export_selection(layout, [("a.wav", 0, 1), ("b.wav", 5, 6)], "x")
        rows, _ = parse_annotations(path)
        assert {r.audiofilename for r in rows} == {"a.wav", "b.wav"}

    def test_lands_under_selections_dir(self, tmp_path):
        layout = layout_for("ds", tmp_path)
        path = export_selection(layout, [("a.wav", 0, 1)], "x")
        assert path.parent == layout.selections_dir

    def test_empty_selection_rejected(self, tmp_path):
        layout = layout_for("ds", tmp_path)
        with pytest.raises(ValueError):
            export_selection(layout, [], "x")

    def test_exports_never_overwrite(self, tmp_path):
        layout = layout_for("ds", tmp_path)
        paths = {export_selection(layout, [("a.wav", 0, 1)], "x")
                 for _ in range(3)}
        assert len(paths) == 3
