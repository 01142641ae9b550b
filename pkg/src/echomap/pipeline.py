"""End-to-end orchestration: plan, embed, classify, reduce, evaluate.

The pipeline owns the worker pool (size = settings.worker_count) and applies
file-level parallelism to embedding; evaluation tasks run per model from the
persisted artifacts only. Every artifact write is atomic, and the plan step
excludes cached (model, file) pairs, so interrupted runs resume where they
left off.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

import numpy as np

from . import audio, backends, dimred, evaluate, events
from .config import RunConfig, RunPlan, Settings, plan_run, record_run, snapshot
from .errors import EchomapError
from .labels import (SegmentLabels, create_default_labels, ground_truth_by_model,
                     parse_annotations)
from .loader import (ArtifactLayout, DatasetIndex, EmbeddingSet, RunMetadata,
                     atomic_write_text, embedding_complete, get_audio_files,
                     layout_for, read_embeddings_one, read_metadata, scan_cache,
                     stack_embeddings, write_embeddings, write_metadata)

log = logging.getLogger(__name__)


@dataclass
class TaskOutcome:
    name: str
    status: str            # "computed" | "skipped" | "failed"
    seconds: float = 0.0
    error: str = ""


@dataclass
class PipelineResult:
    index: DatasetIndex
    layout: ArtifactLayout
    plan: RunPlan
    outcomes: list[TaskOutcome] = field(default_factory=list)

    @property
    def failed(self) -> list[TaskOutcome]:
        return [o for o in self.outcomes if o.status == "failed"]

    @property
    def counts(self) -> dict[str, int]:
        out = {"computed": 0, "skipped": 0, "failed": 0}
        for o in self.outcomes:
            out[o.status] += 1
        return out


def _clean_stale_temps(layout: ArtifactLayout) -> None:
    if layout.root.is_dir():
        for tmp in layout.root.rglob(".*.tmp.*"):
            tmp.unlink(missing_ok=True)


def _embed_one_file(handle: backends.Backend, index: DatasetIndex,
                    layout: ArtifactLayout, model: str, relpath: str) -> int:
    spec = handle.spec
    entry = index.entry(relpath)
    buf = audio.decode(index.audio_root / relpath)
    buf = audio.resample(buf, spec.sample_rate)
    matrices = []
    stamps: list[tuple[float, float]] = []
    for batch in audio.segment(buf, spec.window_s, source=relpath):
        matrices.append(handle.embed(batch))
        stamps.extend(batch.timestamps)
    if matrices:
        matrix = np.concatenate(matrices, axis=0)
    else:
        matrix = np.zeros((0, spec.embedding_dim), dtype=np.float32)
    write_embeddings(layout, model, relpath, matrix, stamps,
                     source_identity=(entry.size, entry.mtime))
    return matrix.shape[0]


def _run_embed_stage(result: PipelineResult, settings: Settings,
                     model: str, relpaths: list[str]) -> None:
    index, layout = result.index, result.layout
    workers = max(1, settings.worker_count)
    handles: queue.Queue = queue.Queue()
    opened: list[backends.Backend] = []
    for _ in range(min(workers, max(len(relpaths), 1))):
        handle = backends.open_backend(model)
        opened.append(handle)
        handles.put(handle)
    lock = threading.Lock()

    def _task(relpath: str) -> None:
        started = time.monotonic()
        handle = handles.get()
        try:
            _embed_one_file(handle, index, layout, model, relpath)
            outcome = TaskOutcome(f"embed {model} {relpath}", "computed",
                                  time.monotonic() - started)
        except Exception as exc:
            outcome = TaskOutcome(f"embed {model} {relpath}", "failed",
                                  time.monotonic() - started, str(exc))
        finally:
            handles.put(handle)
        with lock:
            result.outcomes.append(outcome)
        if outcome.status == "failed":
            log.error("[embed] %s %s FAILED after %.2fs: %s", model, relpath,
                      outcome.seconds, outcome.error)
        else:
            log.info("[embed] %s %s ok %.2fs", model, relpath, outcome.seconds)

    try:
        if workers == 1:
            for relpath in relpaths:
                _task(relpath)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(_task, relpaths))
    finally:
        for handle in opened:
            handle.close()


def _complete_entries(index: DatasetIndex, layout: ArtifactLayout,
                      model: str) -> list:
    return [e for e in index.files if embedding_complete(layout, model, e)]


def _write_model_metadata(index: DatasetIndex, layout: ArtifactLayout,
                          model: str, config: RunConfig, settings: Settings,
                          started: datetime) -> None:
    spec = backends.get_spec(model)
    entries = _complete_entries(index, layout, model)
    segment_count = 0
    for entry in entries:
        sidecar = json.loads(layout.sidecar_path(model, entry.relpath)
                             .read_text("utf-8"))
        segment_count += len(sidecar["segments"])
    meta = RunMetadata(
        model_name=model, sample_rate=spec.sample_rate, window_s=spec.window_s,
        embedding_dim=spec.embedding_dim, file_count=len(entries),
        segment_count=segment_count,
        total_audio_s=float(sum(e.duration_s for e in entries)),
        processing_start=started, processing_end=datetime.now(timezone.utc),
        config_snapshot=snapshot(config, settings))
    write_metadata(layout, model, meta)


@dataclass
class _ModelArtifacts:
    """Everything the evaluation stage needs for one model, loaded once."""

    sets: list[EmbeddingSet]
    entries: list
    stacked: np.ndarray
    row_provenance: list[tuple[str, float, float]]
    labels: SegmentLabels
    ground_truth: Optional[object]
    class_set_name: Optional[str]


def _load_model_artifacts(index: DatasetIndex, layout: ArtifactLayout,
                          model: str, settings: Settings) -> _ModelArtifacts:
    entries = _complete_entries(index, layout, model)
    if not entries:
        raise EchomapError(
            f"no completed embeddings for model {model} under {layout.root}; "
            "run the embed stage first")
    sets = [read_embeddings_one(layout, model, e.relpath) for e in entries]
    stacked, provenance = stack_embeddings(sets)
    stamps = {s.relpath: s.timestamps for s in sets}
    sub_index = DatasetIndex(index.dataset_name, index.audio_root, entries)
    labels = create_default_labels(sub_index, stamps)
    ground_truth = None
    class_set_name = None
    if settings.annotations_path:
        annotations, class_set_name = parse_annotations(settings.annotations_path)
        ground_truth = ground_truth_by_model(
            annotations, stamps, settings.overlap_threshold,
            file_order=[e.relpath for e in entries])
    return _ModelArtifacts(sets, entries, stacked, provenance, labels,
                           ground_truth, class_set_name)


def _persist_labels(layout: ArtifactLayout, model: str,
                    artifacts: _ModelArtifacts) -> None:
    body = {
        "rows": [{"file": rel, "start": s, "end": e}
                 for rel, s, e in artifacts.row_provenance],
        "default_labels": artifacts.labels.as_dict(),
    }
    if artifacts.ground_truth is not None:
        gt = artifacts.ground_truth
        body["ground_truth"] = {
            "class_set": artifacts.class_set_name,
            "classes": gt.class_names,
            "rows": [[gt.class_names[c] for c in np.flatnonzero(row)]
                     for row in gt.matrix],
        }
    atomic_write_text(layout.evaluation_path(model, "labels"),
                      json.dumps(body, sort_keys=True))


def _classification_scores(layout: ArtifactLayout, model: str,
                           artifacts: _ModelArtifacts
                           ) -> Optional[tuple[list[str], dict[str, np.ndarray]]]:
    """Per-file score matrices from a trained probe or the native head.

    A persisted linear probe takes precedence: it was trained on the user's
    own classes, so its predictions are the ones heatmaps and benchmarking
    care about. Models keep their native classifier for probe-less runs.
    """
    try:
        probe = evaluate.LinearProbe.load(layout, model)
        log.info("classification for %s uses the trained linear probe "
                 "(%d classes)", model, len(probe.class_list))
        return (list(probe.class_list),
                {s.relpath: probe.predict(s.matrix) for s in artifacts.sets})
    except (OSError, ValueError, KeyError):
        pass
    spec = backends.get_spec(model)
    if spec.has_classifier:
        with backends.open_backend(model) as handle:
            return (list(spec.class_list),
                    {s.relpath: handle.classify(s.matrix) for s in artifacts.sets})
    log.info("model %s has no classifier and no trained probe; "
             "classification skipped", model)
    return None


def _run_eval_task(task: str, model: str, result: PipelineResult,
                   settings: Settings, artifacts: _ModelArtifacts) -> str:
    """Returns "computed" or "skipped"; raises on failure."""
    index, layout = result.index, result.layout
    if task == "reduction":
        identities = {e.relpath: (e.size, e.mtime) for e in artifacts.entries}
        dimred.reduce_and_persist(layout, model, settings.reducer,
                                  artifacts.sets, identities,
                                  seed=settings.random_seed)
        return "computed"
    if task == "clustering":
        report = evaluate.run_clustering_task(
            artifacts.stacked, artifacts.labels, artifacts.ground_truth,
            settings.random_seed)
        atomic_write_text(layout.evaluation_path(model, "clustering"),
                          json.dumps(report, sort_keys=True))
        return "computed"
    if task == "probing":
        if artifacts.ground_truth is None:
            log.info("probing skipped for %s: no annotations configured", model)
            return "skipped"
        splits = evaluate.split(artifacts.ground_truth, settings.probe_split,
                                settings.random_seed)
        knn = evaluate.knn_probe(artifacts.stacked, artifacts.ground_truth, splits)
        atomic_write_text(layout.evaluation_path(model, "probe_knn"),
                          json.dumps(knn.to_dict(), sort_keys=True))
        probe, linear = evaluate.train_linear_probe(
            artifacts.stacked, artifacts.ground_truth, splits, model_name=model)
        probe.save(layout, model)
        atomic_write_text(layout.evaluation_path(model, "probe_linear"),
                          json.dumps(linear.to_dict(), sort_keys=True))
        return "computed"
    if task == "classification":
        scored = _classification_scores(layout, model, artifacts)
        if scored is None:
            return "skipped"
        class_list, by_file = scored
        all_events: list[events.PredictionEvent] = []
        for s in artifacts.sets:
            all_events.extend(events.scores_to_events(
                by_file[s.relpath], s.timestamps, class_list,
                settings.detection_threshold, audiofilename=s.relpath))
        spec = backends.get_spec(model)
        events.write_raven_tables(layout, model, spec.sample_rate, all_events,
                                  [e.relpath for e in artifacts.entries])
        return "computed"
    if task == "benchmarking":
        if artifacts.ground_truth is None:
            log.info("benchmarking skipped for %s: no annotations configured", model)
            return "skipped"
        combined = layout.combined_predictions_path(model)
        if not combined.exists():
            log.info("benchmarking skipped for %s: no prediction tables "
                     "(run classification first)", model)
            return "skipped"
        parsed = events.read_raven_table(combined)
        report = evaluate.benchmark_predictions(parsed, artifacts.ground_truth)
        atomic_write_text(layout.evaluation_path(model, "benchmark"),
                          json.dumps(report, sort_keys=True))
        return "computed"
    raise EchomapError(f"unknown evaluation task {task}")


def run_pipeline(config: RunConfig, settings: Settings, *,
                 embed: bool = True, evaluate_stage: bool = True
                 ) -> PipelineResult:
    """Execute the run: record, embed (resumably), then evaluate.

    embed/evaluate_stage select which halves run; the embed/evaluate CLI
    subcommands use exactly one of them.
    """
    index = get_audio_files(config.audio_dir)
    layout = layout_for(index, settings.output_root)
    _clean_stale_temps(layout)
    record_run(config, settings)
    cache = scan_cache(layout, index, config.selected_models)
    plan = plan_run(config, settings, cache, index)
    result = PipelineResult(index, layout, plan)
    log.info("plan: %d embedding tasks (%d cached), evaluation tasks: %s",
             len(plan.embed_tasks), plan.skipped,
             ", ".join(plan.eval_tasks) or "none")

    if embed:
        for model in config.selected_models:
            todo = [rel for (m, rel) in plan.embed_tasks if m == model]
            started = datetime.now(timezone.utc)
            if todo:
                _run_embed_stage(result, settings, model, todo)
                _write_model_metadata(index, layout, model, config, settings,
                                      started)
            else:
                try:
                    read_metadata(layout, model)
                except EchomapError:
                    if _complete_entries(index, layout, model):
                        _write_model_metadata(index, layout, model, config,
                                              settings, started)

    if evaluate_stage:
        for model in config.selected_models:
            if not plan.eval_tasks:
                break
            started = time.monotonic()
            try:
                artifacts = _load_model_artifacts(index, layout, model, settings)
                _persist_labels(layout, model, artifacts)
            except Exception as exc:
                for task in plan.eval_tasks:
                    result.outcomes.append(TaskOutcome(
                        f"{task} {model}", "failed", time.monotonic() - started,
                        str(exc)))
                log.error("evaluation for %s failed to load artifacts: %s",
                          model, exc)
                continue
            for task in plan.eval_tasks:
                started = time.monotonic()
                try:
                    status = _run_eval_task(task, model, result, settings,
                                            artifacts)
                    result.outcomes.append(TaskOutcome(
                        f"{task} {model}", status, time.monotonic() - started))
                    log.info("[%s] %s %s %.2fs", task, model, status,
                             time.monotonic() - started)
                except Exception as exc:
                    result.outcomes.append(TaskOutcome(
                        f"{task} {model}", "failed",
                        time.monotonic() - started, str(exc)))
                    log.error("[%s] %s FAILED: %s", task, model, exc)

    counts = result.counts
    log.info("summary: %d computed, %d skipped, %d failed "
             "(embedding cache skipped %d file/model pairs)",
             counts["computed"], counts["skipped"], counts["failed"],
             plan.skipped)
    return result
