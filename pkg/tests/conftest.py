import logging

import numpy as np
import pytest

from echomap import synthgen
from echomap.audio import write_wav

logging.getLogger("echomap").setLevel(logging.INFO)


@pytest.fixture(scope="session")
def small_synth(tmp_path_factory):
    """Small labeled dataset shared by pipeline/service tests: 3 classes,
    6 files x 10 s across 2 sites and 2 dates."""
    root = tmp_path_factory.mktemp("synth-small")
    return synthgen(root / "toydata", n_classes=3, n_files=6, duration_s=10.0,
                    seed=123)


@pytest.fixture(scope="session")
def completed_run(small_synth, tmp_path_factory):
    """The small dataset processed end to end with both bundled models."""
    from echomap import load_config, run_pipeline
    out = tmp_path_factory.mktemp("synth-small-out")
    config, settings = load_config(None, {
        "audio_dir": str(small_synth.audio_dir),
        "selected_models": "mel-small,mel-large",
        "evaluation_tasks": "classification,reduction,clustering,probing,benchmarking",
        "annotations_path": str(small_synth.annotations_path),
        "output_root": str(out),
    })
    result = run_pipeline(config, settings)
    assert not result.failed, [o.error for o in result.failed]
    return result


def sine_wave(freq_hz: float, duration_s: float, rate: int,
              amplitude: float = 0.5, phase: float = 0.0) -> np.ndarray:
    t = np.arange(int(round(duration_s * rate))) / rate
    return amplitude * np.sin(2 * np.pi * freq_hz * t + phase)


@pytest.fixture
def make_wav(tmp_path):
    counter = {"n": 0}

    def _make(samples, rate=16000, name=None, pcm16=True):
        counter["n"] += 1
        path = tmp_path / (name or f"clip{counter['n']}.wav")
        path.parent.mkdir(parents=True, exist_ok=True)
        write_wav(path, samples, rate, pcm16=pcm16)
        return path

    return _make
