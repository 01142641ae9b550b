"""Quickstart: generate a labeled synthetic dataset and run the whole pipeline.

The pipeline plans work, embeds every file with both bundled reference models,
maps labels, clusters, trains probes, writes prediction tables and reduces to
2-d, all into a resumable artifact tree. Run it twice and watch the second run
skip every embedding task.
"""

import json
from pathlib import Path

import echomap

workspace = Path("demo_workspace/quickstart")
dataset = echomap.synthgen(workspace / "toydata", n_classes=3, n_files=6,
                           duration_s=15.0, seed=7)
print(f"dataset: {len(dataset.files)} WAVs, {dataset.n_annotations} annotated "
      f"tone bursts, classes {dataset.class_names}")

config, settings = echomap.load_config(None, {
    "audio_dir": str(dataset.audio_dir),
    "selected_models": "mel-small,mel-large",
    "evaluation_tasks": "classification,reduction,clustering,probing,benchmarking",
    "annotations_path": str(dataset.annotations_path),
    "output_root": str(workspace / "out"),
})

result = echomap.run_pipeline(config, settings)
print(f"\nfirst run: {result.counts}")

result = echomap.run_pipeline(config, settings)
print(f"rerun:     {result.counts} "
      f"({result.plan.skipped} embedding tasks served from cache)")

print("\nartifact tree:")
for path in sorted((workspace / "out").rglob("*")):
    if path.is_file():
        print("  ", path.relative_to(workspace / "out"))
        if len(list(path.parent.iterdir())) > 4 and path.suffix == ".npy":
            print("   ...")
            break

report = json.loads(
    (result.layout.evaluation_path("mel-small", "clustering")).read_text())
print("\nclustering scores for mel-small (scope, label set, AMI):")
for entry in report["results"]:
    print(f"  {entry['scope']:>15}  {entry['label_set']:<18} {entry['ami']:.3f}")
