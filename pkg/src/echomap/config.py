"""Run configuration, settings, execution records, and work planning.

One flat YAML schema covers both key groups: the run config (audio_dir,
selected_models, evaluation_tasks, dashboard) and the settings (device,
worker_count, output_root, annotations_path, probe_split, random_seed,
overlap_threshold, detection_threshold, reducer). Only audio_dir and
selected_models are mandatory; every other key has the documented default.
Unknown keys are hard errors so typos cannot silently change a run.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Optional

import yaml

from . import backends
from .errors import BackendError, ConfigError
from .loader import DatasetIndex, atomic_write_text, layout_for

log = logging.getLogger(__name__)

TOOL_VERSION = "0.1.0"

EVALUATION_TASKS = ("classification", "reduction", "clustering", "probing",
                    "benchmarking")
# Canonical execution order: probing precedes classification so probe-trained
# heads can produce predictions for models without native classifiers, and
# benchmarking scores the prediction tables last.
EVALUATION_TASK_ORDER = ("reduction", "clustering", "probing", "classification",
                         "benchmarking")

DEVICES = ("cpu", "gpu")
REDUCERS = ("pca", "tsne")


@dataclass
class RunConfig:
    audio_dir: Path
    selected_models: list[str]
    evaluation_tasks: list[str] = field(
        default_factory=lambda: ["classification", "reduction", "clustering"])
    dashboard: bool = False


@dataclass
class Settings:
    device: str = "cpu"
    worker_count: int = 1
    output_root: Path = Path("outputs")
    annotations_path: Optional[Path] = None
    probe_split: tuple[float, float, float] = (0.7, 0.15, 0.15)
    random_seed: int = 42
    overlap_threshold: float = 0.5
    detection_threshold: float = 0.5
    reducer: str = "tsne"


_CONFIG_KEYS = ("audio_dir", "selected_models", "evaluation_tasks", "dashboard")
_SETTINGS_KEYS = ("device", "worker_count", "output_root", "annotations_path",
                  "probe_split", "random_seed", "overlap_threshold",
                  "detection_threshold", "reducer")


def _coerce_bool(key: str, value) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        low = value.strip().lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _coerce_int(key: str, value) -> int:
    try:
        if isinstance(value, bool):
            raise TypeError
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def _coerce_float(key: str, value) -> float:
    try:
        if isinstance(value, bool):
            raise TypeError
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def _coerce_str_list(key: str, value) -> list[str]:
    if isinstance(value, str):
        items = [v.strip() for v in value.split(",") if v.strip()]
    elif isinstance(value, (list, tuple)):
        items = [str(v) for v in value]
    else:
        raise ConfigError(f"{key}: expected a list, got {value!r}")
    return items


def _coerce_float_list(key: str, value) -> list[float]:
    if isinstance(value, str):
        parts = [v for v in value.replace(",", " ").split() if v]
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        raise ConfigError(f"{key}: expected three fractions, got {value!r}")
    return [_coerce_float(key, p) for p in parts]


def _validate(merged: dict) -> tuple[RunConfig, Settings]:
    for key in ("audio_dir", "selected_models"):
        if merged.get(key) in (None, "", []):
            raise ConfigError(f"missing required key {key}")

    audio_dir = Path(str(merged["audio_dir"]))
    if not audio_dir.is_dir():
        raise ConfigError(f"audio_dir: {audio_dir} does not exist or is not a directory")

    models = _coerce_str_list("selected_models", merged["selected_models"])
    if not models:
        raise ConfigError("selected_models: must name at least one model")
    for name in models:
        try:
            backends.get_spec(name)
        except BackendError as exc:
            raise ConfigError(f"selected_models: {exc}") from None

    if "evaluation_tasks" in merged:  # explicitly empty is allowed
        tasks = _coerce_str_list("evaluation_tasks", merged["evaluation_tasks"])
    else:
        tasks = ["classification", "reduction", "clustering"]
    for task in tasks:
        if task not in EVALUATION_TASKS:
            raise ConfigError(
                f"evaluation_tasks: unknown task {task!r}; "
                f"valid tasks: {', '.join(EVALUATION_TASKS)}")

    dashboard = _coerce_bool("dashboard", merged.get("dashboard", False))

    device = str(merged.get("device", "cpu"))
    if device not in DEVICES:
        raise ConfigError(f"device: must be one of {DEVICES}, got {device!r}")

    worker_count = _coerce_int("worker_count", merged.get("worker_count", 1))
    if worker_count < 1:
        raise ConfigError(f"worker_count: must be >= 1, got {worker_count}")

    output_root = Path(str(merged.get("output_root", "outputs")))

    annotations_raw = merged.get("annotations_path")
    annotations_path = Path(str(annotations_raw)) if annotations_raw else None

    split = _coerce_float_list("probe_split", merged.get("probe_split", [0.7, 0.15, 0.15]))
    if len(split) != 3 or any(f <= 0 for f in split) or abs(sum(split) - 1.0) > 1e-9:
        raise ConfigError(
            f"probe_split: needs three positive fractions summing to 1, got {split}")

    random_seed = _coerce_int("random_seed", merged.get("random_seed", 42))

    overlap = _coerce_float("overlap_threshold", merged.get("overlap_threshold", 0.5))
    if not (0 < overlap <= 1):
        raise ConfigError(f"overlap_threshold: must be in (0, 1], got {overlap}")

    detection = _coerce_float("detection_threshold",
                              merged.get("detection_threshold", 0.5))
    if not (0 < detection < 1):
        raise ConfigError(f"detection_threshold: must be in (0, 1), got {detection}")

    reducer = str(merged.get("reducer", "tsne"))
    if reducer not in REDUCERS:
        raise ConfigError(f"reducer: must be one of {REDUCERS}, got {reducer!r}")

    config = RunConfig(audio_dir=audio_dir, selected_models=models,
                       evaluation_tasks=tasks, dashboard=dashboard)
    settings = Settings(device=device, worker_count=worker_count,
                        output_root=output_root, annotations_path=annotations_path,
                        probe_split=(split[0], split[1], split[2]),
                        random_seed=random_seed, overlap_threshold=overlap,
                        detection_threshold=detection, reducer=reducer)
    return config, settings


def load_config(path=None, overrides: Optional[dict] = None
                ) -> tuple[RunConfig, Settings]:
    """Load and validate a run configuration.

    File values are applied first, then overrides. The on-disk file is never
    mutated. A run-record file (as written by record_run) is accepted
    transparently, which is what makes old experiments replayable.
    """
    raw: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = yaml.safe_load(path.read_text("utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        if "config" in loaded and "timestamp" in loaded:  # run-record replay
            loaded = loaded["config"]
            if not isinstance(loaded, dict):
                raise ConfigError(f"{path}: run record carries no config mapping")
        raw.update(loaded)

    known = set(_CONFIG_KEYS) | set(_SETTINGS_KEYS)
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
    if overrides:
        for key, value in overrides.items():
            if key not in known:
                raise ConfigError(f"unknown override key {key!r}")
            if value is not None:
                raw[key] = value
    return _validate(raw)


def snapshot(config: RunConfig, settings: Settings) -> dict:
    """Flat, YAML-serializable copy of the effective configuration."""
    return {
        "audio_dir": str(config.audio_dir),
        "selected_models": list(config.selected_models),
        "evaluation_tasks": list(config.evaluation_tasks),
        "dashboard": config.dashboard,
        "device": settings.device,
        "worker_count": settings.worker_count,
        "output_root": str(settings.output_root),
        "annotations_path": str(settings.annotations_path)
        if settings.annotations_path else None,
        "probe_split": list(settings.probe_split),
        "random_seed": settings.random_seed,
        "overlap_threshold": settings.overlap_threshold,
        "detection_threshold": settings.detection_threshold,
        "reducer": settings.reducer,
    }


@dataclass(frozen=True)
class RunRecord:
    timestamp: datetime
    config_snapshot: dict
    tool_version: str
    path: Path


def _existing_record_stamps(logs_dir: Path) -> list[datetime]:
    stamps = []
    if logs_dir.is_dir():
        for p in logs_dir.glob("*.yml"):
            try:
                stamps.append(datetime.strptime(p.stem, "%Y%m%dT%H%M%S.%f")
                              .replace(tzinfo=timezone.utc))
            except ValueError:
                continue
    return stamps


def record_run(config: RunConfig, settings: Settings) -> RunRecord:
    """Append a timestamped record of the effective configuration.

    Records live under <output_root>/<dataset>/logs/, one file per run named
    by its UTC timestamp; timestamps strictly increase within an output root
    and existing records are never overwritten.
    """
    layout = layout_for(Path(config.audio_dir).resolve().name, settings.output_root)
    logs_dir = layout.logs_dir
    now = datetime.now(timezone.utc)
    existing = _existing_record_stamps(logs_dir)
    if existing:
        newest = max(existing)
        if now <= newest:
            now = newest + timedelta(microseconds=1)
    record_path = logs_dir / (now.strftime("%Y%m%dT%H%M%S.%f") + ".yml")
    body = {
        "timestamp": now.isoformat(),
        "tool_version": TOOL_VERSION,
        "config": snapshot(config, settings),
    }
    try:
        atomic_write_text(record_path, yaml.safe_dump(body, sort_keys=False))
    except OSError as exc:
        raise ConfigError(f"output root is not writable: {exc}") from exc
    return RunRecord(now, body["config"], TOOL_VERSION, record_path)


@dataclass
class RunPlan:
    """Immutable work list: embedding tasks first, then evaluation tasks."""

    embed_tasks: list[tuple[str, str]]   # (model, relpath), config order x index order
    eval_tasks: list[str]
    skipped: int = 0                     # cached (model, file) pairs left out

    @property
    def total_embed_candidates(self) -> int:
        return len(self.embed_tasks) + self.skipped


def plan_run(config: RunConfig, settings: Settings,
             cache_state: dict[tuple[str, str], bool],
             index: Optional[DatasetIndex] = None) -> RunPlan:
    """Deterministic plan of remaining work.

    cache_state is the loader's per-(model, relpath) completion map; complete
    pairs are excluded, so a rerun over a finished dataset plans zero
    embedding tasks.
    """
    if index is not None:
        file_order = [e.relpath for e in index.files]
    else:
        file_order = sorted({rel for (_m, rel) in cache_state})
    embed_tasks = []
    skipped = 0
    for model in config.selected_models:
        for relpath in file_order:
            if cache_state.get((model, relpath), False):
                skipped += 1
            else:
                embed_tasks.append((model, relpath))
    eval_tasks = [t for t in EVALUATION_TASK_ORDER if t in config.evaluation_tasks]
    return RunPlan(embed_tasks=embed_tasks, eval_tasks=eval_tasks, skipped=skipped)
