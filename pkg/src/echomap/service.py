"""Read-only HTTP service over a completed artifact root.

Every response except /spectrogram and /audio is derived from persisted
artifacts, so a moved output root serves fine with the audio tree detached;
the two audio endpoints answer 409 in that case. The only write path is
POST /selection/export, which lands under evaluations/selections/.
"""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import audio, backends, events
from .errors import AudioDecodeError
from .labels import get_dt_filename
from .loader import ArtifactLayout

log = logging.getLogger(__name__)

MAX_SLICE_S = 120.0


@dataclass
class ApiSession:
    """One served artifact root; audio_root is optional and only feeds the
    spectrogram/audio endpoints."""

    output_root: Path
    dataset_name: str
    audio_root: Optional[Path] = None

    def __post_init__(self):
        self.output_root = Path(self.output_root)
        self.audio_root = Path(self.audio_root) if self.audio_root else None
        self.layout = ArtifactLayout(self.output_root / self.dataset_name)
        if not self.layout.root.is_dir():
            raise FileNotFoundError(
                f"no artifact root at {self.layout.root}; run the pipeline first")

    # -- artifact lookups ---------------------------------------------------

    def completed_models(self) -> list[str]:
        base = self.layout.root / "embeddings"
        if not base.is_dir():
            return []
        return sorted(p.parent.name for p in base.glob("*/metadata.yml"))

    def reducers_for(self, model: str) -> list[str]:
        base = self.layout.root / "reduced" / model
        if not base.is_dir():
            return []
        return sorted(p.name for p in base.iterdir() if p.is_dir())

    def reduced_documents(self, model: str, reducer: str) -> list[dict]:
        base = self.layout.reduced_dir(model, reducer)
        docs = []
        for path in sorted(base.rglob("*.json")):
            docs.append(json.loads(path.read_text("utf-8")))
        return docs

    def evaluation_json(self, model: str, task: str) -> Optional[dict]:
        path = self.layout.evaluation_path(model, task)
        if not path.exists():
            return None
        return json.loads(path.read_text("utf-8"))


def _labels_payload(session: ApiSession, model: str, n_rows: int) -> list[dict]:
    """Per-row label dicts from the persisted labels document (plus cluster ids)."""
    rows = [{} for _ in range(n_rows)]
    stored = session.evaluation_json(model, "labels")
    if stored and len(stored.get("rows", ())) == n_rows:
        defaults = stored["default_labels"]
        for name in ("time_of_day", "day_of_year", "parent_directory",
                     "audio_file_name"):
            values = defaults.get(name)
            if values and len(values) == n_rows:
                for i, v in enumerate(values):
                    rows[i][name] = v
        gt = stored.get("ground_truth")
        if gt and len(gt.get("rows", ())) == n_rows:
            for i, classes in enumerate(gt["rows"]):
                rows[i]["ground_truth"] = classes
    clustering = session.evaluation_json(model, "clustering")
    if clustering:
        full = [r for r in clustering.get("results", ())
                if r.get("scope") == "full" and len(r.get("assignments", ())) == n_rows]
        preferred = [r for r in full if r.get("label_set") == "ground_truth"] or full
        if preferred:
            for i, cid in enumerate(preferred[0]["assignments"]):
                rows[i]["cluster_id"] = cid
    return rows


class SelectionPoint(BaseModel):
    file: str
    start: float
    end: float


class SelectionBody(BaseModel):
    points: list[SelectionPoint]
    label: str = "selection"


def create_app(session: ApiSession) -> FastAPI:
    app = FastAPI(title="echomap artifact service", version="0.1.0")

    @app.get("/models")
    def models() -> dict:
        completed = set(session.completed_models())
        payload = []
        for spec in backends.registry_list():
            payload.append({
                "name": spec.name, "sample_rate": spec.sample_rate,
                "window_s": spec.window_s, "embedding_dim": spec.embedding_dim,
                "has_classifier": spec.has_classifier,
                "class_list": list(spec.class_list) if spec.class_list else [],
                "completed": spec.name in completed,
                "reducers": session.reducers_for(spec.name),
            })
        # Artifact roots can carry models this process does not have registered.
        for name in sorted(completed - {s.name for s in backends.registry_list()}):
            payload.append({"name": name, "completed": True,
                            "reducers": session.reducers_for(name)})
        return {"dataset": session.dataset_name, "models": payload}

    @app.get("/embeddings/{model}")
    def embeddings(model: str, reducer: Optional[str] = Query(default=None)) -> Response:
        available = session.reducers_for(model)
        if reducer is None:
            reducer = available[0] if available else None
        if reducer is None or reducer not in available:
            missing = session.layout.reduced_dir(model, reducer or "<reducer>")
            return JSONResponse(status_code=404, content={
                "error": f"no reduced embeddings for model {model!r}",
                "missing_artifact": str(missing),
                "hint": "run the pipeline's reduction task first",
                "available_reducers": available})
        points = []
        for doc in session.reduced_documents(model, reducer):
            for relpath, body in sorted(doc["files"].items()):
                for (x, y), (s, e) in zip(body["points"], body["timestamps"]):
                    points.append({"file": relpath, "start": s, "end": e,
                                   "x": x, "y": y})
        labels = _labels_payload(session, model, len(points))
        for point, label in zip(points, labels):
            point["labels"] = label
        return JSONResponse({"model": model, "reducer": reducer,
                             "n_points": len(points), "points": points})

    def _slice_for(model: str, file: str, start: float, end: float):
        """Shared audio-slice plumbing; returns (buffer, error response)."""
        if session.audio_root is None:
            return None, JSONResponse(status_code=409, content={
                "error": "audio detached: this artifact root is being served "
                         "without access to the original audio files"})
        try:
            spec = backends.get_spec(model)
        except Exception as exc:
            return None, JSONResponse(status_code=404, content={"error": str(exc)})
        path = session.audio_root / file
        if not path.is_file():
            return None, JSONResponse(status_code=404, content={
                "error": f"audio file not found: {file}"})
        try:
            duration, _rate = audio.probe_info(path)
        except AudioDecodeError as exc:
            return None, JSONResponse(status_code=415, content={"error": str(exc)})
        if not (0 <= start < end and end <= duration + spec.window_s):
            return None, JSONResponse(status_code=416, content={
                "error": f"interval [{start}, {end}] outside "
                         f"[0, {duration + spec.window_s:.3f}] for {file}"})
        if end - start > MAX_SLICE_S:
            return None, JSONResponse(status_code=413, content={
                "error": f"slice of {end - start:.1f} s exceeds the "
                         f"{MAX_SLICE_S:.0f} s per-request cap"})
        buf = audio.resample(audio.decode(path), spec.sample_rate)
        lo = int(round(start * spec.sample_rate))
        hi = int(round(end * spec.sample_rate))
        samples = buf.samples[lo:hi]
        if len(samples) < hi - lo:  # the zero-padded tail window is viewable
            samples = np.concatenate([samples, np.zeros(hi - lo - len(samples))])
        return audio.AudioBuffer(samples, spec.sample_rate), None

    @app.get("/spectrogram")
    def spectrogram(request: Request, file: str, start: float, end: float,
                    model: str) -> Response:
        sliced, error = _slice_for(model, file, start, end)
        if error is not None:
            return error
        image = audio.spectrogram(sliced)
        if "image/png" in request.headers.get("accept", ""):
            from PIL import Image
            span = -image.floor_db
            grey = ((image.matrix - image.floor_db) / span * 255).astype(np.uint8)
            png = io.BytesIO()
            Image.fromarray(grey[::-1, :], mode="L").save(png, format="PNG")
            return Response(png.getvalue(), media_type="image/png")
        return JSONResponse({
            "matrix": image.matrix.round(2).tolist(),
            "freq_axis": image.freq_axis.tolist(),
            "time_axis": image.time_axis.round(6).tolist(),
            "floor_db": image.floor_db,
            "sample_rate": sliced.sample_rate})

    @app.get("/audio")
    def audio_slice(file: str, start: float, end: float, model: str) -> Response:
        sliced, error = _slice_for(model, file, start, end)
        if error is not None:
            return error
        wav = io.BytesIO()
        from scipy.io import wavfile
        wavfile.write(wav, sliced.sample_rate, sliced.samples.astype(np.float32))
        return Response(wav.getvalue(), media_type="audio/wav")

    @app.get("/metrics/{kind}")
    def metrics(kind: str, model: str) -> Response:
        if kind == "probes":
            knn = session.evaluation_json(model, "probe_knn")
            linear = session.evaluation_json(model, "probe_linear")
            if knn is None and linear is None:
                return JSONResponse(status_code=404, content={
                    "error": f"no probing results for model {model!r}",
                    "missing_artifact": str(session.layout.evaluation_path(
                        model, "probe_knn"))})
            return JSONResponse({"model": model, "knn": knn, "linear": linear})
        if kind in ("clustering", "benchmark"):
            body = session.evaluation_json(model, kind)
            if body is None:
                return JSONResponse(status_code=404, content={
                    "error": f"no {kind} results for model {model!r}",
                    "missing_artifact": str(session.layout.evaluation_path(
                        model, kind))})
            return JSONResponse({"model": model, kind: body})
        return JSONResponse(status_code=404, content={
            "error": f"unknown metrics kind {kind!r}; "
                     "use clustering, probes or benchmark"})

    @app.get("/heatmap")
    def heatmap_endpoint(model: str, cls: str = Query(alias="class")) -> Response:
        combined = session.layout.combined_predictions_path(model)
        if not combined.exists():
            return JSONResponse(status_code=404, content={
                "error": f"no predictions for model {model!r}",
                "missing_artifact": str(combined)})
        parsed = events.read_raven_table(combined)
        table_dir = session.layout.predictions_dir(model)
        file_datetimes = {}
        for table in table_dir.rglob("*.txt"):
            if table == combined:
                continue
            rel = table.relative_to(table_dir).as_posix()
            file_datetimes[rel] = get_dt_filename(rel)
        grid = events.heatmap(parsed, file_datetimes, cls)
        classes = sorted({e.class_name for e in parsed})
        body = grid.to_dict()
        body["available_classes"] = classes
        body["model"] = model
        return JSONResponse(body)

    @app.post("/selection/export")
    def selection_export(body: SelectionBody) -> Response:
        if not body.points:
            return JSONResponse(status_code=400,
                                content={"error": "empty selection"})
        path = events.export_selection(
            session.layout,
            [(p.file, p.start, p.end) for p in body.points], body.label)
        return JSONResponse({"path": str(path), "rows": len(body.points)})

    return app


def serve(session: ApiSession, host: str = "127.0.0.1", port: int = 8765,
          static_dir: Optional[Path] = None) -> None:
    """Run the service (blocking). Mounts a built dashboard when given."""
    import uvicorn
    app = create_app(session)
    if static_dir and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/ui", StaticFiles(directory=str(static_dir), html=True),
                  name="dashboard")
        log.info("dashboard mounted at http://%s:%d/ui/", host, port)
    uvicorn.run(app, host=host, port=port, log_level="warning")
