"""Reducers and the artifact service.

Exact PCA and exact t-SNE sit behind one persistence interface; the fit runs
once over the whole dataset and lands as human-readable per-file JSON. The
read-only HTTP service then exposes everything the browser dashboard needs;
with the audio tree detached every endpoint except /spectrogram and /audio
keeps working.
"""

from pathlib import Path

import numpy as np

import echomap
from echomap.dimred import pca_fit_transform, tsne_fit_transform

rng = np.random.default_rng(0)
x = np.vstack([rng.standard_normal((60, 16)),
               rng.standard_normal((60, 16)) + 7.0])

pca = pca_fit_transform(x, 2)
print(f"PCA: first two components explain "
      f"{pca.explained_variance_ratios.round(3).tolist()} of the variance")

y = tsne_fit_transform(x, perplexity=20, iterations=500, seed=0)
gap = y[60:, 0].mean() - y[:60, 0].mean()
print(f"t-SNE: two blobs end up {abs(gap):.1f} units apart in 2-d")

# persist a full run and serve it
workspace = Path("demo_workspace/service")
dataset = echomap.synthgen(workspace / "toydata", n_classes=2, n_files=4,
                           duration_s=10.0, seed=3)
config, settings = echomap.load_config(None, {
    "audio_dir": str(dataset.audio_dir),
    "selected_models": "mel-small",
    "evaluation_tasks": "classification,reduction,clustering",
    "annotations_path": str(dataset.annotations_path),
    "output_root": str(workspace / "out"),
    "reducer": "pca",
})
result = echomap.run_pipeline(config, settings)
reduced = result.layout.reduced_path("mel-small", "pca", dataset.files[0])
print(f"\nreduced embeddings persisted at {reduced}")

session = echomap.ApiSession(settings.output_root, "toydata",
                             audio_root=dataset.audio_dir)
print(f"serving would expose: /models /embeddings/mel-small /metrics/... "
      f"/heatmap /spectrogram /audio for {session.layout.root}")
print("start it with:  echomap serve --output-root "
      f"{settings.output_root} --audio-dir {dataset.audio_dir} "
      "--static frontend/dist")
