"""Synthetic desk-scale datasets: tone bursts over pink noise, with labels.

Each generated WAV carries a handful of band-limited tone bursts of one
class (class c uses a 500*(c+1) Hz carrier) over a pink-noise floor. File
names embed datetimes spanning at least two dates, files are spread over at
least two site directories, and every burst is written to a ground-truth CSV
in the audiofilename,start,end,label:species schema.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .audio import write_wav
from .loader import atomic_write_text

log = logging.getLogger(__name__)

SYNTH_SAMPLE_RATE = 32000
SITES = ("siteA", "siteB")
BASE_DATETIME = datetime(2024, 6, 1, tzinfo=timezone.utc)
NOISE_RMS = 0.02
TONE_AMPLITUDE = 0.4
FADE_S = 0.05


@dataclass
class SynthDataset:
    audio_dir: Path
    annotations_path: Path
    files: list[str] = field(default_factory=list)       # relpaths
    class_names: list[str] = field(default_factory=list)
    n_annotations: int = 0


def _pink_noise(rng: np.random.Generator, n: int) -> np.ndarray:
    white = rng.standard_normal(n)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n)
    scale = np.ones_like(freqs)
    nz = freqs > 0
    scale[nz] = 1.0 / np.sqrt(freqs[nz])
    scale[0] = 0.0
    pink = np.fft.irfft(spectrum * scale, n)
    rms = np.sqrt((pink ** 2).mean())
    return pink / rms * NOISE_RMS if rms > 0 else pink


def _tone_burst(rng: np.random.Generator, carrier_hz: float, length_s: float,
                sample_rate: int) -> np.ndarray:
    n = int(round(length_s * sample_rate))
    t = np.arange(n) / sample_rate
    phase = rng.uniform(0, 2 * np.pi)
    tone = TONE_AMPLITUDE * np.sin(2 * np.pi * carrier_hz * t + phase)
    fade = min(int(FADE_S * sample_rate), n // 2)
    if fade > 0:
        ramp = 0.5 - 0.5 * np.cos(np.linspace(0, np.pi, fade))
        tone[:fade] *= ramp
        tone[-fade:] *= ramp[::-1]
    return tone


def class_name_for(class_index: int) -> str:
    return f"tone{int(500 * (class_index + 1))}hz"


def synthgen(out_dir, n_classes: int = 3, n_files: int = 12,
             duration_s: float = 60.0, seed: int = 0) -> SynthDataset:
    """Write a labeled synthetic dataset; byte-identical for a fixed seed."""
    if n_classes < 1 or n_files < 1 or duration_s <= 0:
        raise ValueError("need n_classes >= 1, n_files >= 1, duration_s > 0")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    master = np.random.default_rng(seed)
    n_samples = int(round(duration_s * SYNTH_SAMPLE_RATE))
    rows: list[tuple[str, float, float, str]] = []
    relpaths: list[str] = []

    for i in range(n_files):
        rng = np.random.default_rng(master.integers(0, 2 ** 63 - 1))
        site = SITES[i % len(SITES)]
        day = (i // len(SITES)) % 2
        hour = (5 + 2 * i) % 24
        stamp = BASE_DATETIME + timedelta(days=day, hours=hour, minutes=i)
        relpath = f"{site}/{stamp.strftime('%Y%m%d_%H%M%S')}.wav"
        class_index = i % n_classes
        carrier = 500.0 * (class_index + 1)
        label = class_name_for(class_index)

        samples = _pink_noise(rng, n_samples)
        n_bursts = int(rng.integers(3, 6))
        slot = duration_s / n_bursts
        hi = max(0.5, min(4.0, slot - 0.4))
        lo = min(1.5, 0.8 * hi)
        for b in range(n_bursts):
            burst_len = float(rng.uniform(lo, hi))
            max_offset = slot - burst_len - 0.2
            start = b * slot + 0.1 + float(rng.uniform(0, max(max_offset, 0)))
            end = min(start + burst_len, duration_s)
            burst = _tone_burst(rng, carrier, end - start, SYNTH_SAMPLE_RATE)
            offset = int(round(start * SYNTH_SAMPLE_RATE))
            samples[offset:offset + len(burst)] += burst
            rows.append((relpath, round(start, 3), round(end, 3), label))

        path = out / relpath
        path.parent.mkdir(parents=True, exist_ok=True)
        write_wav(path, np.clip(samples, -1.0, 1.0), SYNTH_SAMPLE_RATE, pcm16=True)
        relpaths.append(relpath)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["audiofilename", "start", "end", "label:species"])
    for relpath, start, end, label in rows:
        writer.writerow([relpath, f"{start:.3f}", f"{end:.3f}", label])
    annotations_path = out / "annotations.csv"
    atomic_write_text(annotations_path, buf.getvalue())

    log.info("synthetic dataset: %d files, %d annotations, %d classes under %s",
             n_files, len(rows), n_classes, out)
    return SynthDataset(out, annotations_path, relpaths,
                        [class_name_for(c) for c in range(n_classes)], len(rows))
