/** View models for the metrics and all-models tabs. */

import type { ClusteringReport, ProbeReport } from "./api.js";

export interface Bar {
  label: string;
  value: number;
}

/** Per-class AP bars, best class first, mAP appended last. */
export function probeBars(report: ProbeReport): Bar[] {
  const bars = Object.entries(report.per_class_ap)
    .map(([label, value]) => ({ label, value }))
    .sort((a, b) => b.value - a.value || a.label.localeCompare(b.label));
  bars.push({ label: "mAP", value: report.map });
  return bars;
}

export interface ClusteringRow {
  scope: string;
  labelSet: string;
  k: number;
  ami: number;
  ari: number;
}

export function clusteringRows(report: ClusteringReport): ClusteringRow[] {
  const rows = report.results.map((r) => ({
    scope: r.scope, labelSet: r.label_set, k: r.k, ami: r.ami, ari: r.ari,
  }));
  for (const cross of report.cross) {
    rows.push({
      scope: "cross", labelSet: `${cross.label_set_a} vs ${cross.label_set_b}`,
      k: 0, ami: cross.ami, ari: cross.ari,
    });
  }
  return rows;
}

export interface ModelSummary {
  model: string;
  linearMap: number | null;
  knnMap: number | null;
  bestAmi: number | null;
}

/** One row per model for the all-models overview. */
export function overviewRows(
  perModel: { model: string; probes?: { knn: ProbeReport | null; linear: ProbeReport | null } | null;
              clustering?: ClusteringReport | null }[]): ModelSummary[] {
  return perModel.map(({ model, probes, clustering }) => {
    let bestAmi: number | null = null;
    for (const entry of clustering?.results ?? []) {
      if (entry.label_set !== "ground_truth") continue;
      if (bestAmi === null || entry.ami > bestAmi) bestAmi = entry.ami;
    }
    return {
      model,
      linearMap: probes?.linear?.map ?? null,
      knnMap: probes?.knn?.map ?? null,
      bestAmi,
    };
  });
}
