"""echomap: embedding pipelines and evaluation for audio archives.

Process folder trees of field recordings through pluggable feature-extractor
backends into a resumable on-disk artifact layout, evaluate the resulting
embedding spaces (clustering, probing, benchmarking, 2-d reduction), and
serve everything to an interactive dashboard.

Typical use:

    import echomap
    result = echomap.play(audio_dir="recordings/", selected_models=["mel-small"])
"""

from .audio import AudioBuffer, SegmentBatch, SpectrogramImage, decode, resample
from .audio import segment, spectrogram
from .backends import (Backend, ModelSpec, get_spec, open_backend,
                       register_backend, register_external, registry_list)
from .config import (RunConfig, Settings, TOOL_VERSION, load_config, plan_run,
                     record_run)
from .dimred import pca_fit_transform, reduce_and_persist, tsne_fit_transform
from .errors import (AnnotationError, ArtifactCorruptError, ArtifactMissingError,
                     AudioDecodeError, BackendError, ConfigError, EchomapError,
                     MetadataMissingError)
from .evaluate import (ami, ari, average_precision, benchmark_predictions,
                       kmeans, knn_probe, run_clustering_task, split,
                       train_linear_probe)
from .events import (HeatmapGrid, PredictionEvent, export_selection, heatmap,
                     read_raven_table, scores_to_events, write_raven_tables)
from .labels import (Annotation, GroundTruthMatrix, create_default_labels,
                     get_dt_filename, ground_truth_by_model, parse_annotations)
from .loader import (ArtifactLayout, DatasetIndex, EmbeddingSet, RunMetadata,
                     get_audio_files, layout_for, read_embeddings,
                     read_metadata, write_embeddings, write_metadata)
from .pipeline import PipelineResult, run_pipeline
from .service import ApiSession, create_app, serve
from .synth import synthgen

__version__ = TOOL_VERSION


def play(config_path=None, **overrides) -> PipelineResult:
    """Run the whole pipeline from a config file and/or keyword overrides.

    Keyword names match the config schema (audio_dir, selected_models,
    evaluation_tasks, dashboard, device, worker_count, output_root,
    annotations_path, probe_split, random_seed, overlap_threshold,
    detection_threshold, reducer). With dashboard=True the artifact service
    is started after processing (blocking).
    """
    config, settings = load_config(config_path, overrides)
    result = run_pipeline(config, settings)
    if config.dashboard:
        session = ApiSession(settings.output_root, result.index.dataset_name,
                             audio_root=config.audio_dir)
        serve(session)
    return result
