/** Typed client for the artifact service. The dashboard talks to these
 * endpoints exclusively; the only mutating call is the selection export. */

export interface PointLabels {
  time_of_day?: number | null;
  day_of_year?: number | null;
  parent_directory?: string;
  audio_file_name?: string;
  cluster_id?: number;
  ground_truth?: string[];
}

export interface EmbeddingPoint {
  file: string;
  start: number;
  end: number;
  x: number;
  y: number;
  labels: PointLabels;
}

export interface EmbeddingsResponse {
  model: string;
  reducer: string;
  n_points: number;
  points: EmbeddingPoint[];
}

export interface ModelInfo {
  name: string;
  completed: boolean;
  reducers: string[];
  sample_rate?: number;
  window_s?: number;
  embedding_dim?: number;
  has_classifier?: boolean;
}

export interface SpectrogramResponse {
  matrix: number[][];
  freq_axis: number[];
  time_axis: number[];
  floor_db: number;
  sample_rate: number;
}

export interface ProbeReport {
  probe_type: string;
  per_class_ap: Record<string, number>;
  map: number;
  split_sizes: Record<string, number>;
}

export interface ClusteringEntry {
  scope: string;
  label_set: string;
  k: number;
  ami: number;
  ari: number;
  n_scored: number;
}

export interface ClusteringReport {
  results: ClusteringEntry[];
  cross: { label_set_a: string; label_set_b: string; ami: number; ari: number }[];
}

export interface HeatmapResponse {
  class: string;
  dates: string[];
  hours: number[];
  cells: number[][];
  available_classes: string[];
  model: string;
}

export interface SelectionPoint {
  file: string;
  start: number;
  end: number;
}

/** Raised for 409 responses: the root is served without the audio tree. */
export class AudioDetachedError extends Error {}

async function getJson<T>(url: string): Promise<T> {
  const response = await fetch(url);
  if (response.status === 409) {
    throw new AudioDetachedError(
      "audio detached: spectrograms and playback need the original files");
  }
  if (!response.ok) {
    let detail = `${response.status}`;
    try {
      const body = await response.json();
      if (body.error) detail = body.error;
    } catch {
      /* non-JSON error body */
    }
    throw new Error(detail);
  }
  return response.json() as Promise<T>;
}

export class ApiClient {
  constructor(readonly base: string = "") {}

  models(): Promise<{ dataset: string; models: ModelInfo[] }> {
    return getJson(`${this.base}/models`);
  }

  embeddings(model: string, reducer?: string): Promise<EmbeddingsResponse> {
    const query = reducer ? `?reducer=${encodeURIComponent(reducer)}` : "";
    return getJson(`${this.base}/embeddings/${encodeURIComponent(model)}${query}`);
  }

  spectrogram(file: string, start: number, end: number,
              model: string): Promise<SpectrogramResponse> {
    return getJson(`${this.base}/spectrogram?` + new URLSearchParams(
      { file, start: String(start), end: String(end), model }).toString());
  }

  /** URL for an <audio> element; playback itself stays in the browser. */
  audioUrl(file: string, start: number, end: number, model: string): string {
    return `${this.base}/audio?` + new URLSearchParams(
      { file, start: String(start), end: String(end), model }).toString();
  }

  probes(model: string): Promise<{ knn: ProbeReport | null; linear: ProbeReport | null }> {
    return getJson(`${this.base}/metrics/probes?model=${encodeURIComponent(model)}`);
  }

  clustering(model: string): Promise<{ clustering: ClusteringReport }> {
    return getJson(`${this.base}/metrics/clustering?model=${encodeURIComponent(model)}`);
  }

  benchmark(model: string): Promise<{ benchmark: { per_class_ap: Record<string, number>; map: number } }> {
    return getJson(`${this.base}/metrics/benchmark?model=${encodeURIComponent(model)}`);
  }

  heatmap(model: string, cls: string): Promise<HeatmapResponse> {
    return getJson(`${this.base}/heatmap?` + new URLSearchParams(
      { model, class: cls }).toString());
  }

  async exportSelection(points: SelectionPoint[], label: string)
      : Promise<{ path: string; rows: number }> {
    const response = await fetch(`${this.base}/selection/export`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ points, label }),
    });
    if (!response.ok) {
      const body = await response.json().catch(() => ({}));
      throw new Error(body.error ?? `${response.status}`);
    }
    return response.json();
  }
}
