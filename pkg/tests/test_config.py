import pytest
import yaml

from echomap.config import (EVALUATION_TASK_ORDER, load_config, plan_run,
                            record_run, snapshot)
from echomap.errors import ConfigError
from echomap.loader import get_audio_files, layout_for, scan_cache, write_embeddings

import numpy as np

from conftest import sine_wave


@pytest.fixture
def audio_dir(tmp_path, make_wav):
    make_wav(sine_wave(440, 1.0, 16000), name="data/one.wav")
    make_wav(sine_wave(880, 1.0, 16000), name="data/two.wav")
    return tmp_path / "data"


def _write_config(tmp_path, body):
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(body))
    return path


class TestLoadConfig:
    def test_minimal_file_fills_defaults(self, tmp_path, audio_dir):
        path = _write_config(tmp_path, {"audio_dir": str(audio_dir),
                                        "selected_models": ["mel-small"]})
        config, settings = load_config(path)
        assert config.selected_models == ["mel-small"]
        assert config.evaluation_tasks == ["classification", "reduction",
                                           "clustering"]
        assert config.dashboard is False
        assert settings.device == "cpu"
        assert settings.probe_split == (0.7, 0.15, 0.15)
        assert settings.reducer == "tsne"

    def test_override_wins_over_file(self, tmp_path, audio_dir):
        path = _write_config(tmp_path, {"audio_dir": str(audio_dir),
                                        "selected_models": ["mel-small"]})
        config, _ = load_config(path, {"selected_models": "mel-large"})
        assert config.selected_models == ["mel-large"]

    def test_overrides_do_not_mutate_file(self, tmp_path, audio_dir):
        path = _write_config(tmp_path, {"audio_dir": str(audio_dir),
                                        "selected_models": ["mel-small"]})
        before = path.read_bytes()
        load_config(path, {"selected_models": "mel-large", "random_seed": 9})
        assert path.read_bytes() == before

    def test_bad_probe_split_names_key(self, tmp_path, audio_dir):
        path = _write_config(tmp_path, {"audio_dir": str(audio_dir),
                                        "selected_models": ["mel-small"],
                                        "probe_split": [0.5, 0.5, 0.5]})
        with pytest.raises(ConfigError, match="probe_split"):
            load_config(path)

    def test_unknown_key_rejected(self, tmp_path, audio_dir):
        path = _write_config(tmp_path, {"audio_dir": str(audio_dir),
                                        "selected_models": ["mel-small"],
                                        "audio_dirs": "typo"})
        with pytest.raises(ConfigError, match="audio_dirs"):
            load_config(path)

    def test_unresolvable_model_named(self, tmp_path, audio_dir):
        path = _write_config(tmp_path, {"audio_dir": str(audio_dir),
                                        "selected_models": ["nessie"]})
        with pytest.raises(ConfigError, match="nessie"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "ghost.yaml")

    def test_missing_audio_dir(self, tmp_path):
        path = _write_config(tmp_path, {"audio_dir": str(tmp_path / "nope"),
                                        "selected_models": ["mel-small"]})
        with pytest.raises(ConfigError, match="audio_dir"):
            load_config(path)

    def test_unknown_task_rejected(self, audio_dir):
        with pytest.raises(ConfigError, match="evaluation_tasks"):
            load_config(None, {"audio_dir": str(audio_dir),
                               "selected_models": "mel-small",
                               "evaluation_tasks": "flying"})

    def test_worker_count_bound(self, audio_dir):
        with pytest.raises(ConfigError, match="worker_count"):
            load_config(None, {"audio_dir": str(audio_dir),
                               "selected_models": "mel-small",
                               "worker_count": 0})

    def test_overlap_threshold_range(self, audio_dir):
        with pytest.raises(ConfigError, match="overlap_threshold"):
            load_config(None, {"audio_dir": str(audio_dir),
                               "selected_models": "mel-small",
                               "overlap_threshold": 0})

    def test_string_coercions(self, audio_dir):
        config, settings = load_config(None, {
            "audio_dir": str(audio_dir),
            "selected_models": "mel-small,mel-large",
            "dashboard": "false", "worker_count": "4", "random_seed": "7",
            "probe_split": "0.6,0.2,0.2"})
        assert config.selected_models == ["mel-small", "mel-large"]
        assert settings.worker_count == 4
        assert settings.probe_split == (0.6, 0.2, 0.2)


class TestRecordRun:
    def _load(self, audio_dir, out, extra=None):
        raw = {"audio_dir": str(audio_dir), "selected_models": "mel-small",
               "output_root": str(out)}
        raw.update(extra or {})
        return load_config(None, raw)

    def test_timestamps_strictly_increase(self, tmp_path, audio_dir):
        config, settings = self._load(audio_dir, tmp_path / "out")
        r1 = record_run(config, settings)
        r2 = record_run(config, settings)
        assert r2.timestamp > r1.timestamp
        assert r1.path != r2.path
        assert r1.path.exists() and r2.path.exists()

    def test_replay_yields_identical_config(self, tmp_path, audio_dir):
        config, settings = self._load(audio_dir, tmp_path / "out",
                                      {"random_seed": 99, "reducer": "pca"})
        record = record_run(config, settings)
        config2, settings2 = load_config(record.path)
        assert snapshot(config2, settings2) == snapshot(config, settings)

    def test_snapshot_contains_post_override_values(self, tmp_path, audio_dir):
        path = _write_config(tmp_path, {"audio_dir": str(audio_dir),
                                        "selected_models": ["mel-small"],
                                        "output_root": str(tmp_path / "out")})
        config, settings = load_config(path, {"selected_models": "mel-large"})
        record = record_run(config, settings)
        assert record.config_snapshot["selected_models"] == ["mel-large"]


class TestPlanRun:
    def _setup(self, audio_dir, tmp_path):
        config, settings = load_config(None, {
            "audio_dir": str(audio_dir), "selected_models": "mel-small,mel-large",
            "output_root": str(tmp_path / "out"),
            "evaluation_tasks": "clustering,reduction"})
        index = get_audio_files(audio_dir)
        layout = layout_for(index, settings.output_root)
        return config, settings, index, layout

    def test_fresh_dataset_is_full_cross_product(self, audio_dir, tmp_path):
        config, settings, index, layout = self._setup(audio_dir, tmp_path)
        cache = scan_cache(layout, index, config.selected_models)
        plan = plan_run(config, settings, cache, index)
        assert len(plan.embed_tasks) == 4
        assert plan.embed_tasks[0] == ("mel-small", "one.wav")
        # evaluation tasks come after embedding tasks, canonical order
        assert plan.eval_tasks == ["reduction", "clustering"]

    def test_completed_dataset_plans_nothing(self, audio_dir, tmp_path):
        config, settings, index, layout = self._setup(audio_dir, tmp_path)
        for model in config.selected_models:
            for entry in index.files:
                write_embeddings(layout, model, entry.relpath,
                                 np.zeros((1, 4)), [(0.0, 1.0)],
                                 source_identity=(entry.size, entry.mtime))
        cache = scan_cache(layout, index, config.selected_models)
        plan = plan_run(config, settings, cache, index)
        assert plan.embed_tasks == []
        assert plan.skipped == 4

    def test_new_file_plans_only_that_file(self, audio_dir, tmp_path, make_wav):
        config, settings, index, layout = self._setup(audio_dir, tmp_path)
        for model in config.selected_models:
            for entry in index.files:
                write_embeddings(layout, model, entry.relpath,
                                 np.zeros((1, 4)), [(0.0, 1.0)],
                                 source_identity=(entry.size, entry.mtime))
        make_wav(sine_wave(660, 1.0, 16000), name="data/three.wav")
        index2 = get_audio_files(audio_dir)
        cache = scan_cache(layout, index2, config.selected_models)
        plan = plan_run(config, settings, cache, index2)
        assert plan.embed_tasks == [("mel-small", "three.wav"),
                                    ("mel-large", "three.wav")]

    def test_plan_is_deterministic(self, audio_dir, tmp_path):
        config, settings, index, layout = self._setup(audio_dir, tmp_path)
        cache = scan_cache(layout, index, config.selected_models)
        p1 = plan_run(config, settings, cache, index)
        p2 = plan_run(config, settings, cache, index)
        assert p1.embed_tasks == p2.embed_tasks
        assert p1.eval_tasks == p2.eval_tasks

    def test_canonical_eval_order_is_total(self):
        assert set(EVALUATION_TASK_ORDER) == {"reduction", "clustering",
                                              "probing", "classification",
                                              "benchmarking"}
