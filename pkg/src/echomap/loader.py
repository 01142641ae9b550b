"""Path handling: dataset scans, the mirrored artifact layout, persistence.

Output layout, rooted at <output_root>/<dataset_name>/:

    embeddings/<model>/<audio relpath with .npy>      float32 NPY v1.0 matrices
    embeddings/<model>/<audio relpath with .json>     per-segment timestamp sidecars
    embeddings/<model>/metadata.yml                   human-readable run metadata
    reduced/<model>/<reducer>/<relpath with .json>    2-d points for the dashboard
    predictions/<model>/<relpath with .txt>           Raven-style selection tables
    predictions/<model>/combined.txt
    evaluations/<model>/*.json                        clustering/probe/benchmark reports
    evaluations/selections/*.csv                      dashboard selection exports
    logs/<timestamp>.yml                              one run record per execution

The embeddings subtree mirrors the audio subtree: one artifact per audio file,
same relative path, extension replaced. All writes are atomic (temp + rename),
so a killed run never leaves a partial artifact at a final path.
"""

from __future__ import annotations

import io
import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path, PurePosixPath
from typing import Iterable, Optional

import numpy as np
import yaml

from .audio import SUPPORTED_EXTENSIONS, probe_info
from .errors import (ArtifactCorruptError, ArtifactMissingError,
                     AudioDecodeError, MetadataMissingError)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FileEntry:
    """One indexed audio file; identity for caching is (relpath, size, mtime)."""

    relpath: str          # POSIX-style path relative to the audio root
    size: int             # bytes
    mtime: int            # modification time truncated to whole seconds
    duration_s: float
    sample_rate: int


@dataclass
class DatasetIndex:
    """Recursive scan of one audio folder tree."""

    dataset_name: str
    audio_root: Path
    files: list[FileEntry]
    skipped: list[tuple[str, str]] = field(default_factory=list)  # (relpath, reason)

    def entry(self, relpath: str) -> FileEntry:
        for f in self.files:
            if f.relpath == relpath:
                return f
        raise KeyError(relpath)

    @property
    def total_duration_s(self) -> float:
        return sum(f.duration_s for f in self.files)


def get_audio_files(audio_dir) -> DatasetIndex:
    """Recursively index the supported audio files under a directory.

    Entries are sorted by relative POSIX path. Files whose headers cannot be
    parsed (or that are empty) are listed under `skipped` with a logged
    warning instead of failing the scan.
    """
    root = Path(audio_dir)
    if not root.is_dir():
        raise NotADirectoryError(f"audio directory not found: {root}")
    entries: list[FileEntry] = []
    skipped: list[tuple[str, str]] = []
    paths = [p for p in root.rglob("*")
             if p.is_file() and p.suffix.lower() in SUPPORTED_EXTENSIONS]
    paths.sort(key=lambda p: p.relative_to(root).as_posix())
    for path in paths:
        relpath = path.relative_to(root).as_posix()
        try:
            duration, rate = probe_info(path)
        except AudioDecodeError as exc:
            log.warning("skipping %s: %s", relpath, exc)
            skipped.append((relpath, str(exc)))
            continue
        if duration <= 0:
            log.warning("skipping %s: empty audio stream", relpath)
            skipped.append((relpath, "empty audio stream"))
            continue
        stat = path.stat()
        entries.append(FileEntry(relpath, stat.st_size, int(stat.st_mtime),
                                 duration, rate))
    return DatasetIndex(dataset_name=root.resolve().name, audio_root=root,
                        files=entries, skipped=skipped)


@dataclass(frozen=True)
class ArtifactLayout:
    """Deterministic mapping from (model, audio relpath) to artifact paths."""

    root: Path  # <output_root>/<dataset_name>

    @property
    def logs_dir(self) -> Path:
        return self.root / "logs"

    def embeddings_dir(self, model: str) -> Path:
        return self.root / "embeddings" / model

    def reduced_dir(self, model: str, reducer: str) -> Path:
        return self.root / "reduced" / model / reducer

    def predictions_dir(self, model: str) -> Path:
        return self.root / "predictions" / model

    def evaluations_dir(self, model: str) -> Path:
        return self.root / "evaluations" / model

    @property
    def selections_dir(self) -> Path:
        return self.root / "evaluations" / "selections"

    def embedding_path(self, model: str, relpath: str) -> Path:
        return self.embeddings_dir(model) / _swap_ext(relpath, ".npy")

    def sidecar_path(self, model: str, relpath: str) -> Path:
        return self.embeddings_dir(model) / _swap_ext(relpath, ".json")

    def audio_relpath_for(self, model: str, embedding_path: Path,
                          extension: str) -> str:
        """Inverse of embedding_path, given the original audio extension."""
        rel = embedding_path.relative_to(self.embeddings_dir(model))
        return str(PurePosixPath(rel.as_posix()).with_suffix(extension))

    def reduced_path(self, model: str, reducer: str, relpath: str) -> Path:
        return self.reduced_dir(model, reducer) / _swap_ext(relpath, ".json")

    def prediction_path(self, model: str, relpath: str) -> Path:
        return self.predictions_dir(model) / _swap_ext(relpath, ".txt")

    def combined_predictions_path(self, model: str) -> Path:
        return self.predictions_dir(model) / "combined.txt"

    def metadata_path(self, model: str) -> Path:
        return self.embeddings_dir(model) / "metadata.yml"

    def evaluation_path(self, model: str, task: str) -> Path:
        return self.evaluations_dir(model) / f"{task}.json"


def _swap_ext(relpath: str, new_ext: str) -> str:
    return str(PurePosixPath(relpath).with_suffix(new_ext))


def layout_for(dataset, output_root) -> ArtifactLayout:
    """Layout rooted at <output_root>/<dataset name>; directories are created
    on demand by the write operations."""
    name = dataset.dataset_name if isinstance(dataset, DatasetIndex) else str(dataset)
    return ArtifactLayout(Path(output_root) / name)


def atomic_write_bytes(path: Path, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.parent / f".{path.name}.tmp.{os.getpid()}"
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    finally:
        tmp.unlink(missing_ok=True)


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


@dataclass
class EmbeddingSet:
    """Embeddings of one audio file with per-segment timestamps."""

    relpath: str
    matrix: np.ndarray                     # (n_segments, dim) float32
    timestamps: list[tuple[float, float]]  # (start_s, end_s) per row


def write_embeddings(layout: ArtifactLayout, model: str, relpath: str,
                     matrix: np.ndarray,
                     timestamps: Iterable[tuple[float, float]],
                     source_identity: Optional[tuple[int, int]] = None
                     ) -> tuple[Path, Path]:
    """Persist one file's embedding matrix plus its timestamp sidecar.

    The matrix is stored as little-endian float32 NPY v1.0 with shape
    (n_segments, dim); identical input produces byte-identical artifacts.
    `source_identity` is the (size, mtime) of the source audio file and is
    what makes runs resumable.
    """
    stamps = [(float(s), float(e)) for s, e in timestamps]
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2:
        raise ValueError("embedding matrix must be 2-d (n_segments, dim)")
    if matrix.shape[0] != len(stamps):
        raise ValueError(
            f"matrix has {matrix.shape[0]} rows but {len(stamps)} timestamps given")
    npy_path = layout.embedding_path(model, relpath)
    sidecar_path = layout.sidecar_path(model, relpath)
    buf = io.BytesIO()
    np.save(buf, matrix, allow_pickle=False)
    atomic_write_bytes(npy_path, buf.getvalue())
    sidecar = {"segments": stamps}
    if source_identity is not None:
        sidecar["source"] = {"size": int(source_identity[0]),
                             "mtime": int(source_identity[1])}
    atomic_write_text(sidecar_path,
                      json.dumps(sidecar, sort_keys=True, indent=None,
                                 separators=(",", ":")))
    return npy_path, sidecar_path


def read_embeddings_one(layout: ArtifactLayout, model: str,
                        relpath: str) -> EmbeddingSet:
    npy_path = layout.embedding_path(model, relpath)
    sidecar_path = layout.sidecar_path(model, relpath)
    missing = [str(p) for p in (npy_path, sidecar_path) if not p.exists()]
    if missing:
        raise ArtifactMissingError(
            f"missing artifact(s) for {relpath} under model {model}: "
            + ", ".join(missing), paths=missing)
    try:
        matrix = np.load(npy_path, allow_pickle=False)
    except Exception as exc:
        raise ArtifactCorruptError(f"corrupt embedding artifact {npy_path}: {exc}") from exc
    try:
        sidecar = json.loads(sidecar_path.read_text("utf-8"))
        stamps = [(float(s), float(e)) for s, e in sidecar["segments"]]
    except Exception as exc:
        raise ArtifactCorruptError(f"corrupt timestamp sidecar {sidecar_path}: {exc}") from exc
    if matrix.ndim != 2 or matrix.shape[0] != len(stamps):
        raise ArtifactCorruptError(
            f"artifact {npy_path} rows ({matrix.shape}) disagree with sidecar "
            f"({len(stamps)} segments)")
    return EmbeddingSet(relpath, matrix, stamps)


def read_embeddings(layout: ArtifactLayout, model: str,
                    index: DatasetIndex) -> list[EmbeddingSet]:
    """All embedding sets of a dataset, in DatasetIndex order."""
    missing: list[str] = []
    for entry in index.files:
        for p in (layout.embedding_path(model, entry.relpath),
                  layout.sidecar_path(model, entry.relpath)):
            if not p.exists():
                missing.append(str(p))
    if missing:
        raise ArtifactMissingError(
            f"dataset {index.dataset_name} is not fully processed for model {model}; "
            f"missing: " + ", ".join(missing), paths=missing)
    return [read_embeddings_one(layout, model, entry.relpath)
            for entry in index.files]


def stack_embeddings(sets: Iterable[EmbeddingSet]
                     ) -> tuple[np.ndarray, list[tuple[str, float, float]]]:
    """Concatenate per-file matrices; returns (matrix, per-row provenance)."""
    sets = list(sets)
    if not sets:
        return np.zeros((0, 0), dtype=np.float32), []
    matrix = np.concatenate([s.matrix for s in sets], axis=0)
    rows = [(s.relpath, start, end) for s in sets for start, end in s.timestamps]
    return matrix, rows


def embedding_complete(layout: ArtifactLayout, model: str,
                       entry: FileEntry) -> bool:
    """True when the artifact exists and matches the audio file's identity."""
    npy_path = layout.embedding_path(model, entry.relpath)
    sidecar_path = layout.sidecar_path(model, entry.relpath)
    if not npy_path.exists() or not sidecar_path.exists():
        return False
    try:
        sidecar = json.loads(sidecar_path.read_text("utf-8"))
        source = sidecar.get("source") or {}
        return (int(source.get("size", -1)) == entry.size
                and int(source.get("mtime", -1)) == entry.mtime)
    except (OSError, ValueError):
        return False


def scan_cache(layout: ArtifactLayout, index: DatasetIndex,
               models: Iterable[str]) -> dict[tuple[str, str], bool]:
    """Per-(model, relpath) completion map consumed by run planning."""
    return {(model, entry.relpath): embedding_complete(layout, model, entry)
            for model in models for entry in index.files}


@dataclass
class RunMetadata:
    """Human-readable processing summary stored next to each model's embeddings."""

    model_name: str
    sample_rate: int
    window_s: float
    embedding_dim: int
    file_count: int
    segment_count: int
    total_audio_s: float
    processing_start: datetime
    processing_end: datetime
    config_snapshot: dict

    def to_dict(self) -> dict:
        return {
            "model_name": self.model_name,
            "sample_rate": self.sample_rate,
            "window_s": self.window_s,
            "embedding_dim": self.embedding_dim,
            "file_count": self.file_count,
            "segment_count": self.segment_count,
            "total_audio_s": self.total_audio_s,
            "processing_start": self.processing_start.astimezone(timezone.utc).isoformat(),
            "processing_end": self.processing_end.astimezone(timezone.utc).isoformat(),
            "config_snapshot": self.config_snapshot,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "RunMetadata":
        return cls(
            model_name=raw["model_name"],
            sample_rate=int(raw["sample_rate"]),
            window_s=float(raw["window_s"]),
            embedding_dim=int(raw["embedding_dim"]),
            file_count=int(raw["file_count"]),
            segment_count=int(raw["segment_count"]),
            total_audio_s=float(raw["total_audio_s"]),
            processing_start=datetime.fromisoformat(raw["processing_start"]),
            processing_end=datetime.fromisoformat(raw["processing_end"]),
            config_snapshot=dict(raw["config_snapshot"]),
        )


def write_metadata(layout: ArtifactLayout, model: str, meta: RunMetadata) -> Path:
    path = layout.metadata_path(model)
    atomic_write_text(path, yaml.safe_dump(meta.to_dict(), sort_keys=False))
    return path


def read_metadata(layout: ArtifactLayout, model: str) -> RunMetadata:
    path = layout.metadata_path(model)
    if not path.exists():
        raise MetadataMissingError(
            f"model {model} has not been processed yet (no {path})", paths=[str(path)])
    try:
        raw = yaml.safe_load(path.read_text("utf-8"))
        return RunMetadata.from_dict(raw)
    except MetadataMissingError:
        raise
    except Exception as exc:
        raise ArtifactCorruptError(f"cannot parse metadata {path}: {exc}") from exc
