"""Feature-extractor backends: registry, reference models, external processes.

Two deterministic reference backends (mel-small, mel-large) stand in for
heavyweight pretrained networks: they compute log-mel band statistics and
project them through a fixed seeded Gaussian matrix. Real models plug in
either by registering a Backend subclass or by wrapping an executable that
speaks the length-prefixed float32 wire protocol (see ExternalProcessBackend).
"""

from __future__ import annotations

import hashlib
import logging
import struct
import subprocess
import threading
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import signal as sig

from .audio import SegmentBatch
from .errors import BackendError

log = logging.getLogger(__name__)

EXTERNAL_BATCH_DEADLINE_S = 60.0

_MEL_BANDS = 64
_MEL_FMIN = 50.0
_MEL_FFT = 1024
_MEL_HOP = 256
_MEL_FLOOR_DB = -80.0


@dataclass(frozen=True)
class ModelSpec:
    """Registry entry describing one feature extractor."""

    name: str
    sample_rate: int
    window_s: float
    embedding_dim: int
    has_classifier: bool = False
    class_list: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be >= 1")
        if self.sample_rate <= 0 or self.window_s <= 0:
            raise ValueError("sample_rate and window_s must be positive")
        if self.has_classifier != bool(self.class_list):
            raise ValueError("has_classifier requires a non-empty class_list and vice versa")

    @property
    def window_samples(self) -> int:
        return int(round(self.window_s * self.sample_rate))


def _name_seed(name: str, salt: str = "") -> int:
    digest = hashlib.sha256((name + salt).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Backend:
    """One loaded feature extractor; confined to a single worker at a time."""

    def __init__(self, spec: ModelSpec):
        self.spec = spec

    def embed(self, batch: SegmentBatch) -> np.ndarray:
        raise NotImplementedError

    def classify(self, embeddings: np.ndarray) -> np.ndarray:
        """Per-class scores in [0, 1] from the model's own classifier head."""
        raise BackendError(f"no classifier available for model {self.spec.name}")

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False

    def _check_batch(self, batch: SegmentBatch) -> np.ndarray:
        frames = np.asarray(batch.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[1] != self.spec.window_samples:
            raise BackendError(
                f"model {self.spec.name} expects frames of {self.spec.window_samples} samples "
                f"({self.spec.window_s} s at {self.spec.sample_rate} Hz), "
                f"got shape {frames.shape}")
        return frames


def _mel_filterbank(sample_rate: int) -> np.ndarray:
    """Triangular HTK-mel filterbank, 64 bands from 50 Hz to Nyquist."""
    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)

    fmax = sample_rate / 2.0
    mel_pts = np.linspace(hz_to_mel(_MEL_FMIN), hz_to_mel(fmax), _MEL_BANDS + 2)
    hz_pts = mel_to_hz(mel_pts)
    bin_freqs = np.fft.rfftfreq(_MEL_FFT, 1.0 / sample_rate)
    fb = np.zeros((_MEL_BANDS, len(bin_freqs)))
    for m in range(_MEL_BANDS):
        lo, mid, hi = hz_pts[m], hz_pts[m + 1], hz_pts[m + 2]
        rising = (bin_freqs - lo) / max(mid - lo, 1e-12)
        falling = (hi - bin_freqs) / max(hi - mid, 1e-12)
        fb[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb


class MelStatsBackend(Backend):
    """Deterministic reference extractor: log-mel band statistics, projected.

    Per frame: magnitude STFT (fft 1024, hop 256, Hann) -> 64-band HTK mel ->
    dB re full scale, floored at -80 dB -> per-band mean and standard
    deviation over time (128 statistics) -> fixed Gaussian projection seeded
    from the model name -> L2 normalization.
    """

    def __init__(self, spec: ModelSpec):
        super().__init__(spec)
        self._fb = _mel_filterbank(spec.sample_rate)
        rng = np.random.default_rng(_name_seed(spec.name))
        self._projection = rng.standard_normal((2 * _MEL_BANDS, spec.embedding_dim))
        if spec.has_classifier:
            rng_c = np.random.default_rng(_name_seed(spec.name, salt="/classifier"))
            self._clf_weights = rng_c.standard_normal(
                (spec.embedding_dim, len(spec.class_list)))
        self._window = sig.get_window("hann", _MEL_FFT, fftbins=True)

    def embed(self, batch: SegmentBatch) -> np.ndarray:
        frames = self._check_batch(batch)
        n = frames.shape[1]
        if n < _MEL_FFT:
            frames = np.pad(frames, ((0, 0), (0, _MEL_FFT - n)))
            n = _MEL_FFT
        n_t = 1 + (n - _MEL_FFT) // _MEL_HOP
        idx = np.arange(_MEL_FFT)[None, :] + _MEL_HOP * np.arange(n_t)[:, None]
        segs = frames[:, idx] * self._window                    # (b, T, fft)
        mag = np.abs(np.fft.rfft(segs, axis=2))                 # (b, T, bins)
        mel = mag @ self._fb.T                                  # (b, T, 64)
        with np.errstate(divide="ignore"):
            db = 20.0 * np.log10(np.where(mel > 0, mel, np.nan))
        db = np.nan_to_num(db, nan=_MEL_FLOOR_DB, neginf=_MEL_FLOOR_DB)
        db = np.maximum(db, _MEL_FLOOR_DB)
        stats = np.concatenate((db.mean(axis=1), db.std(axis=1)), axis=1)  # (b, 128)
        out = stats @ self._projection
        norms = np.linalg.norm(out, axis=1, keepdims=True)
        out = np.divide(out, norms, out=np.zeros_like(out), where=norms > 1e-12)
        return out.astype(np.float32)

    def classify(self, embeddings: np.ndarray) -> np.ndarray:
        if not self.spec.has_classifier:
            return super().classify(embeddings)
        emb = np.asarray(embeddings, dtype=np.float64)
        if emb.ndim != 2 or emb.shape[1] != self.spec.embedding_dim:
            raise BackendError(
                f"classifier of {self.spec.name} expects (n, {self.spec.embedding_dim}) embeddings")
        return _sigmoid(emb @ self._clf_weights).astype(np.float32)


def _read_exact(stream, count: int) -> bytes:
    chunks = []
    remaining = count
    while remaining > 0:
        part = stream.read(remaining)
        if not part:
            raise BackendError("external backend closed the stream mid-record")
        chunks.append(part)
        remaining -= len(part)
    return b"".join(chunks)


def _read_record(stream) -> np.ndarray:
    header = _read_exact(stream, 4)
    count = struct.unpack("<I", header)[0]
    payload = _read_exact(stream, 4 * count)
    return np.frombuffer(payload, dtype="<f4").copy()


def _write_record(stream, values: np.ndarray) -> None:
    data = np.ascontiguousarray(values, dtype="<f4")
    stream.write(struct.pack("<I", data.size))
    stream.write(data.tobytes())


class ExternalProcessBackend(Backend):
    """Adapter that runs a feature extractor in a child process.

    Wire protocol, all values little-endian:
      child -> parent handshake line:  "EMBED v1 <dim> <sample_rate> <window_samples>\\n"
      parent -> child, per frame:      u32 float-count, then count float32 samples
      child -> parent, per frame:      u32 float-count, then count float32 embedding
    Replies must arrive in frame order; the child lives as long as the handle.
    """

    def __init__(self, spec: ModelSpec, command: Sequence[str]):
        super().__init__(spec)
        self.command = list(command)
        try:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        except OSError as exc:
            raise BackendError(f"cannot start external backend {spec.name}: {exc}") from exc
        self._handshake()

    def _handshake(self) -> None:
        line = self._proc.stdout.readline()
        parts = line.decode("ascii", errors="replace").split()
        if len(parts) != 5 or parts[0] != "EMBED" or parts[1] != "v1":
            self.close()
            raise BackendError(
                f"external backend {self.spec.name} sent a bad handshake: {line!r}")
        dim, rate, win = (int(p) for p in parts[2:])
        if (dim, rate, win) != (self.spec.embedding_dim, self.spec.sample_rate,
                                self.spec.window_samples):
            self.close()
            raise BackendError(
                f"external backend {self.spec.name} declared (dim={dim}, sr={rate}, "
                f"window={win}) but the registry expects (dim={self.spec.embedding_dim}, "
                f"sr={self.spec.sample_rate}, window={self.spec.window_samples})")

    def embed(self, batch: SegmentBatch) -> np.ndarray:
        frames = self._check_batch(batch).astype("<f4")
        if self._proc.poll() is not None:
            raise BackendError(f"external backend {self.spec.name} is not running")

        write_error: list[BaseException] = []

        def _pump():
            try:
                for row in frames:
                    _write_record(self._proc.stdin, row)
                self._proc.stdin.flush()
            except BaseException as exc:  # surfaced by the reader failing
                write_error.append(exc)

        timer = threading.Timer(EXTERNAL_BATCH_DEADLINE_S, self._kill)
        writer = threading.Thread(target=_pump, daemon=True)
        timer.start()
        writer.start()
        rows = []
        try:
            for i in range(frames.shape[0]):
                reply = _read_record(self._proc.stdout)
                if reply.shape[0] != self.spec.embedding_dim:
                    raise BackendError(
                        f"external backend {self.spec.name} replied {reply.shape[0]} values "
                        f"for frame {i}, expected {self.spec.embedding_dim}")
                rows.append(reply)
        except BackendError as exc:
            if not timer.is_alive():
                raise BackendError(
                    f"external backend {self.spec.name} exceeded the "
                    f"{EXTERNAL_BATCH_DEADLINE_S:.0f} s per-batch deadline") from exc
            raise
        finally:
            timer.cancel()
            writer.join(timeout=5.0)
        if write_error:
            raise BackendError(
                f"writing to external backend {self.spec.name} failed: {write_error[0]}")
        out = np.stack(rows)
        if not np.all(np.isfinite(out)):
            raise BackendError(f"external backend {self.spec.name} produced non-finite values")
        return out

    def _kill(self) -> None:
        try:
            self._proc.kill()
        except OSError:
            pass

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
                self._proc.wait(timeout=5.0)
            except (OSError, subprocess.TimeoutExpired):
                self._kill()
                self._proc.wait()


class _Registry:
    def __init__(self):
        self._entries: dict[str, tuple[ModelSpec, type, dict]] = {}

    def register(self, spec: ModelSpec, backend_cls, **kwargs) -> None:
        if spec.name in self._entries:
            raise BackendError(f"model name already registered: {spec.name}")
        self._entries[spec.name] = (spec, backend_cls, kwargs)

    def unregister(self, name: str) -> None:
        self._entries.pop(name, None)

    def list(self) -> list[ModelSpec]:
        return [spec for spec, _, _ in self._entries.values()]

    def spec(self, name: str) -> ModelSpec:
        try:
            return self._entries[name][0]
        except KeyError:
            known = ", ".join(sorted(self._entries)) or "none"
            raise BackendError(
                f"unknown model {name!r}; registered models: {known}") from None

    def open(self, name: str) -> Backend:
        spec, backend_cls, kwargs = self._entries[name] if name in self._entries \
            else (self.spec(name), None, None)
        return backend_cls(spec, **kwargs)


_REGISTRY = _Registry()

TOY_CLASSES = tuple(f"toyclass{i}" for i in range(10))


def _register_builtins() -> None:
    _REGISTRY.register(
        ModelSpec("mel-small", sample_rate=16000, window_s=1.0, embedding_dim=128),
        MelStatsBackend)
    _REGISTRY.register(
        ModelSpec("mel-large", sample_rate=48000, window_s=3.0, embedding_dim=1024,
                  has_classifier=True, class_list=TOY_CLASSES),
        MelStatsBackend)


_register_builtins()


def registry_list() -> list[ModelSpec]:
    """All registered models, in registration order."""
    return _REGISTRY.list()


def get_spec(name: str) -> ModelSpec:
    return _REGISTRY.spec(name)


def open_backend(name: str) -> Backend:
    """Instantiate a backend handle; callers own it (use as a context manager)."""
    return _REGISTRY.open(name)


def register_backend(spec: ModelSpec, backend_cls, **kwargs) -> None:
    """Add a custom in-process backend class to the registry."""
    _REGISTRY.register(spec, backend_cls, **kwargs)


def register_external(spec: ModelSpec, command: Sequence[str]) -> None:
    """Register an external-process backend run via the wire protocol."""
    _REGISTRY.register(spec, ExternalProcessBackend, command=command)


def unregister(name: str) -> None:
    """Remove a registry entry (built-ins included; used by tests and plugins)."""
    _REGISTRY.unregister(name)
