"""Audio handling: decode, resample, segment into model windows, spectrograms.

Decoding is built on scipy (WAV), the stdlib aifc module (AIFF) and the
bundled FLAC reader; the sandbox provides no codec libraries, so MP3 files
are recognized but refused with an "unsupported codec" error.
"""

from __future__ import annotations

import aifc
import logging
import math
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
from scipy import signal as sig
from scipy.io import wavfile

from . import flacfile
from .errors import AudioDecodeError

log = logging.getLogger(__name__)

SUPPORTED_EXTENSIONS = (".wav", ".flac", ".aiff", ".mp3")

# Fraction of a window below which a whole buffer is dropped instead of padded.
MIN_BUFFER_FRACTION = 0.05

DEFAULT_FFT_SIZE = 1024
DEFAULT_HOP = 256
DEFAULT_FLOOR_DB = -80.0


@dataclass
class AudioBuffer:
    """Mono audio in [-1, 1] at a known sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("AudioBuffer holds mono audio (1-d samples)")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("AudioBuffer samples must be finite")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class SegmentBatch:
    """A batch of fixed-length windows cut from one file."""

    frames: np.ndarray                       # (b, L)
    timestamps: list[tuple[float, float]]    # (start_s, end_s) per row
    source: str = ""

    def __post_init__(self):
        if self.frames.ndim != 2:
            raise ValueError("frames must be a (b, L) matrix")
        if self.frames.shape[0] != len(self.timestamps):
            raise ValueError("one timestamp pair per frame required")


@dataclass
class SpectrogramImage:
    """dB-scaled magnitude STFT with physical axes."""

    matrix: np.ndarray       # (freq_bins, time_frames)
    freq_axis: np.ndarray    # Hz
    time_axis: np.ndarray    # s
    floor_db: float = DEFAULT_FLOOR_DB


def _to_float(samples: np.ndarray) -> np.ndarray:
    if samples.dtype == np.int16:
        return samples.astype(np.float64) / 32768.0
    if samples.dtype == np.int32:
        return samples.astype(np.float64) / 2147483648.0
    if samples.dtype == np.uint8:
        return (samples.astype(np.float64) - 128.0) / 128.0
    if samples.dtype in (np.float32, np.float64):
        return samples.astype(np.float64)
    raise AudioDecodeError(f"unsupported PCM sample type {samples.dtype}")


def _downmix(samples: np.ndarray) -> np.ndarray:
    if samples.ndim == 2:
        return samples.mean(axis=1)
    return samples


def _decode_wav(path: Path) -> AudioBuffer:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            rate, samples = wavfile.read(str(path))
    except Exception as exc:
        raise AudioDecodeError(f"cannot decode WAV {path}: {exc}") from exc
    if samples.size == 0:
        raise AudioDecodeError(f"empty audio payload in {path}")
    floats = _downmix(_to_float(samples))
    if not np.all(np.isfinite(floats)):
        raise AudioDecodeError(f"non-finite samples in {path}")
    return AudioBuffer(floats, int(rate))


def _decode_aiff(path: Path) -> AudioBuffer:
    try:
        with aifc.open(str(path), "rb") as fh:
            n_channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = int(fh.getframerate())
            n_frames = fh.getnframes()
            raw = fh.readframes(n_frames)
    except AudioDecodeError:
        raise
    except Exception as exc:
        raise AudioDecodeError(f"cannot decode AIFF {path}: {exc}") from exc
    if not raw:
        raise AudioDecodeError(f"empty audio payload in {path}")
    if width == 1:
        ints = np.frombuffer(raw, dtype=np.int8).astype(np.float64) / 128.0
    elif width == 2:
        ints = np.frombuffer(raw, dtype=">i2").astype(np.float64) / 32768.0
    elif width == 3:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3)
        vals = (b[:, 0].astype(np.int32) << 16) | (b[:, 1].astype(np.int32) << 8) | b[:, 2]
        vals = np.where(vals >= 1 << 23, vals - (1 << 24), vals)
        ints = vals.astype(np.float64) / 8388608.0
    elif width == 4:
        ints = np.frombuffer(raw, dtype=">i4").astype(np.float64) / 2147483648.0
    else:
        raise AudioDecodeError(f"unsupported AIFF sample width {width} in {path}")
    samples = ints.reshape(-1, n_channels) if n_channels > 1 else ints
    return AudioBuffer(_downmix(samples), rate)


def _decode_flac(path: Path) -> AudioBuffer:
    samples, rate, bps = flacfile.read(path)
    floats = samples.astype(np.float64) / float(1 << (bps - 1))
    return AudioBuffer(_downmix(floats), rate)


def decode(path) -> AudioBuffer:
    """Decode a supported audio file to a mono buffer at its native rate.

    Multichannel input is downmixed by the channel mean.
    """
    path = Path(path)
    ext = path.suffix.lower()
    if ext == ".wav":
        return _decode_wav(path)
    if ext == ".aiff":
        return _decode_aiff(path)
    if ext == ".flac":
        return _decode_flac(path)
    if ext == ".mp3":
        raise AudioDecodeError(
            f"unsupported codec: no MP3 decoder is available in this environment ({path})")
    raise AudioDecodeError(f"unsupported container {ext or path.name}")


def _probe_wav(path: Path) -> tuple[float, int]:
    with open(path, "rb") as fh:
        head = fh.read(12)
        if len(head) < 12 or head[:4] != b"RIFF" or head[8:12] != b"WAVE":
            raise AudioDecodeError(f"bad RIFF header in {path}")
        rate = None
        block_align = None
        data_size = None
        while True:
            chunk = fh.read(8)
            if len(chunk) < 8:
                break
            cid, size = chunk[:4], struct.unpack("<I", chunk[4:])[0]
            if cid == b"fmt ":
                body = fh.read(size + (size & 1))
                if len(body) < 16:
                    raise AudioDecodeError(f"short fmt chunk in {path}")
                _, channels, rate, _, block_align, _ = struct.unpack("<HHIIHH", body[:16])
                if channels == 0 or block_align == 0:
                    raise AudioDecodeError(f"degenerate fmt chunk in {path}")
            elif cid == b"data":
                data_size = size
                fh.seek(size + (size & 1), 1)
            else:
                fh.seek(size + (size & 1), 1)
        if rate is None or data_size is None:
            raise AudioDecodeError(f"missing fmt/data chunk in {path}")
        frames = data_size // block_align
        return frames / rate, int(rate)


def probe_info(path) -> tuple[float, int]:
    """Cheaply read (duration_s, native_sample_rate) from container headers."""
    path = Path(path)
    ext = path.suffix.lower()
    try:
        if ext == ".wav":
            return _probe_wav(path)
        if ext == ".flac":
            info = flacfile.probe(path)
            if info.total_samples == 0:
                raise AudioDecodeError(f"FLAC stream of unknown length: {path}")
            return info.total_samples / info.sample_rate, info.sample_rate
        if ext == ".aiff":
            with aifc.open(str(path), "rb") as fh:
                return fh.getnframes() / fh.getframerate(), int(fh.getframerate())
    except AudioDecodeError:
        raise
    except Exception as exc:
        raise AudioDecodeError(f"cannot parse header of {path}: {exc}") from exc
    if ext == ".mp3":
        raise AudioDecodeError(
            f"unsupported codec: no MP3 decoder is available in this environment ({path})")
    raise AudioDecodeError(f"unsupported container {ext or path.name}")


def resample(buf: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Band-limited polyphase resampling to target_rate.

    Windowed-sinc design: 64 taps per polyphase branch, Kaiser beta 8.6,
    cutoff at 0.95x the Nyquist of the lower rate. Identity when the rates
    already match. Output length is round(n * target / source).
    """
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    source_rate = buf.sample_rate
    if target_rate == source_rate:
        return buf
    x = buf.samples
    n = len(x)
    if n == 0:
        return AudioBuffer(np.zeros(0), target_rate)
    g = math.gcd(source_rate, target_rate)
    up, down = target_rate // g, source_rate // g
    n_out = (2 * n * target_rate + source_rate) // (2 * source_rate)

    n_taps = 64 * up + 1  # odd length -> integer group delay of 32*up
    cutoff_hz = 0.95 * min(source_rate, target_rate) / 2.0
    h = sig.firwin(n_taps, cutoff_hz / (source_rate * up / 2.0), window=("kaiser", 8.6))
    y_full = sig.upfirdn(h * up, x, up=up, down=1)
    delay = 32 * up
    y = y_full[delay:delay + n_out * down:down]
    if len(y) < n_out:
        y = np.concatenate((y, np.zeros(n_out - len(y))))
    return AudioBuffer(y, target_rate)


def segment(buf: AudioBuffer, window_s: float, source: str = "",
            batch_size: int = 32) -> Iterator[SegmentBatch]:
    """Cut a buffer into consecutive non-overlapping windows from t=0.

    The final partial window is zero-padded to full length. Buffers shorter
    than MIN_BUFFER_FRACTION of one window are dropped with a warning and
    yield no batches.
    """
    if window_s <= 0:
        raise ValueError("window_s must be positive")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    window_len = int(round(window_s * buf.sample_rate))
    n = len(buf.samples)
    if n < MIN_BUFFER_FRACTION * window_len:
        log.warning("dropping %s: %.4f s is shorter than %.0f%% of a %.2f s window",
                    source or "buffer", n / buf.sample_rate,
                    MIN_BUFFER_FRACTION * 100, window_s)
        return
    n_segments = -(-n // window_len)  # ceil
    stride = window_len / buf.sample_rate
    for batch_start in range(0, n_segments, batch_size):
        rows = []
        stamps = []
        for i in range(batch_start, min(batch_start + batch_size, n_segments)):
            frame = buf.samples[i * window_len:(i + 1) * window_len]
            if len(frame) < window_len:
                frame = np.concatenate((frame, np.zeros(window_len - len(frame))))
            rows.append(frame)
            stamps.append((i * stride, (i + 1) * stride))
        yield SegmentBatch(np.stack(rows), stamps, source=source)


def segment_count(duration_s: float, window_s: float) -> int:
    """Number of windows a file of the given duration produces."""
    if duration_s < MIN_BUFFER_FRACTION * window_s:
        return 0
    return max(1, math.ceil(duration_s / window_s - 1e-12))


def spectrogram(buf: AudioBuffer, fft_size: int = DEFAULT_FFT_SIZE,
                hop: int = DEFAULT_HOP,
                floor_db: float = DEFAULT_FLOOR_DB) -> SpectrogramImage:
    """Magnitude STFT (Hann window) in dB relative to the peak, clipped at floor_db."""
    if fft_size < 2 or fft_size & (fft_size - 1):
        raise ValueError("fft_size must be a power of two")
    if hop > fft_size or hop < 1:
        raise ValueError("hop must satisfy 1 <= hop <= fft_size")
    x = buf.samples
    if len(x) < fft_size:
        x = np.concatenate((x, np.zeros(fft_size - len(x))))
    n_frames = 1 + (len(x) - fft_size) // hop
    window = sig.get_window("hann", fft_size, fftbins=True)
    idx = np.arange(fft_size)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = x[idx] * window
    mag = np.abs(np.fft.rfft(frames, axis=1))  # (time, freq)
    ref = mag.max()
    if ref <= 0:
        db = np.full_like(mag, floor_db)
    else:
        with np.errstate(divide="ignore"):
            db = 20.0 * np.log10(mag / ref)
        db = np.clip(db, floor_db, 0.0)
    freq_axis = np.fft.rfftfreq(fft_size, 1.0 / buf.sample_rate)
    time_axis = (hop * np.arange(n_frames) + fft_size / 2.0) / buf.sample_rate
    return SpectrogramImage(db.T, freq_axis, time_axis, floor_db=floor_db)


def write_wav(path, samples: np.ndarray, sample_rate: int,
              pcm16: bool = False) -> None:
    """Write mono WAV, float32 by default or 16-bit PCM when pcm16 is set."""
    samples = np.asarray(samples, dtype=np.float64)
    if pcm16:
        data = np.round(np.clip(samples, -1.0, 1.0) * 32767.0).astype(np.int16)
    else:
        data = samples.astype(np.float32)
    wavfile.write(str(path), int(sample_rate), data)
