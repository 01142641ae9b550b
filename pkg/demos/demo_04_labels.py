"""Labels: filename datetimes, automatic default labels, ground-truth mapping.

Nothing here needs annotations: time_of_day, day_of_year, parent_directory
and friends come straight from file names and folder structure, per segment.
When an annotation table exists, its intervals are mapped onto each model's
own segment grid with an interval-overlap rule, so a 1 s model and a 3 s
model each get a row-aligned ground-truth matrix.
"""

from pathlib import Path

from echomap.labels import (Annotation, create_default_labels, get_dt_filename,
                            ground_truth_by_model)
from echomap.loader import DatasetIndex, FileEntry

for name in ("20240501_063000.wav", "5FAD2A80.WAV", "notes_final.wav"):
    print(f"{name:<24} -> {get_dt_filename(name)}")

index = DatasetIndex("toydata", Path("."), [
    FileEntry("siteA/20240501_063000.wav", 1, 1, 7200.0, 16000)])
stamps = {"siteA/20240501_063000.wav": [(0.0, 3600.0), (3600.0, 7200.0)]}
labels = create_default_labels(index, stamps)
print("\nsegment default labels (one hour apart):")
for i in range(2):
    print(f"  segment {i}: hour={labels.time_of_day[i]} "
          f"doy={labels.day_of_year[i]} site={labels.parent_directory[i]}")

annotations = [Annotation("siteA/20240501_063000.wav", 2.0, 4.0, "frog"),
               Annotation("siteA/20240501_063000.wav", 10.2, 10.4, "cricket")]
for window in (1.0, 3.0):
    grid = {"siteA/20240501_063000.wav":
            [(i * window, (i + 1) * window) for i in range(int(12 / window))]}
    gt = ground_truth_by_model(annotations, grid, overlap_threshold=0.5,
                               file_order=list(grid))
    positives = {name: int(gt.matrix[:, i].sum())
                 for i, name in enumerate(gt.class_names)}
    print(f"\n{window} s windows -> {gt.matrix.shape[0]} rows, positives "
          f"{positives}")
    print(f"  frog rows: {list(map(int, gt.matrix[:, gt.class_names.index('frog')]))}")
