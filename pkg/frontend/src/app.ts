/** Dashboard shell: tabs, scatter panels, spectrogram/audio, metrics,
 * heatmaps, lasso export. All data comes from the documented service
 * endpoints; zoom, pan and selection are pure client-side transforms. */

import { ApiClient, AudioDetachedError, EmbeddingPoint, ModelInfo } from "./api.js";
import { COLOR_BY_CHOICES, ColorBy, buildDomain, colorFor, labelValue } from "./colors.js";
import { cellColor, heatmapModel } from "./heatmap.js";
import { clusteringRows, overviewRows, probeBars } from "./metrics.js";
import { Canvas2DLike, Viewport, drawScatter, fitViewport, hitTest,
         nullContext, pan, zoomAt } from "./scatter.js";
import { Polygon, selectPoints, toExportPayload } from "./selection.js";
import { peakFrequency, toPixels } from "./spectrogram.js";

const TABS = ["single", "side-by-side", "all-models", "metrics", "heatmaps"] as const;
type Tab = typeof TABS[number];

function el<K extends keyof HTMLElementTagNameMap>(
    tag: K, className = "", text = ""): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function option(value: string, label = value): HTMLOptionElement {
  const node = el("option");
  node.value = value;
  node.textContent = label;
  return node;
}

export class Toasts {
  private host: HTMLElement;

  constructor(parent: HTMLElement) {
    this.host = el("div", "toasts");
    parent.appendChild(this.host);
  }

  show(message: string, kind: "info" | "error" = "info"): void {
    const node = el("div", `toast toast-${kind}`, message);
    this.host.appendChild(node);
    setTimeout(() => node.remove(), 6000);
  }
}

/** One scatter panel: canvas, color-by coloring, zoom/pan, click, lasso. */
export class ScatterPanel {
  readonly root: HTMLElement;
  readonly canvas: HTMLCanvasElement;
  private ctx: Canvas2DLike;
  points: EmbeddingPoint[] = [];
  private colors: string[] = [];
  private viewport: Viewport = { scale: 1, originX: 0, originY: 0 };
  private visible?: boolean[];
  private selected = new Set<number>();
  private lasso: Polygon | null = null;
  private dragging: { x: number; y: number } | null = null;
  lassoMode = false;
  onPointClick: (point: EmbeddingPoint) => void = () => undefined;
  onSelection: (indices: number[]) => void = () => undefined;

  constructor(readonly width = 520, readonly height = 420) {
    this.root = el("div", "scatter-panel");
    this.canvas = el("canvas");
    this.canvas.width = width;
    this.canvas.height = height;
    this.root.appendChild(this.canvas);
    // happy-dom and friends have no canvas; rendering becomes a no-op there
    this.ctx = (this.canvas.getContext?.("2d") as Canvas2DLike | null)
      ?? nullContext();
    this.bindEvents();
  }

  setData(points: EmbeddingPoint[], colorBy: ColorBy,
          domain: (string | number)[], annotatedOnly = false): void {
    this.points = points;
    this.visible = annotatedOnly
      ? points.map((p) => (p.labels.ground_truth ?? []).length > 0)
      : undefined;
    this.colors = points.map((p) => colorFor(p, colorBy, domain));
    const shown = this.visible
      ? points.filter((_, i) => this.visible![i]) : points;
    this.viewport = fitViewport(shown, this.width, this.height);
    this.selected.clear();
    this.draw();
  }

  /** Exposed for tests: last draw count. */
  drawnPoints = 0;

  draw(): void {
    this.drawnPoints = drawScatter(
      this.ctx, this.points, this.colors, this.viewport, this.width,
      this.height, { visible: this.visible, highlight: this.selected });
    if (this.lasso && this.lasso.length > 1) {
      this.ctx.strokeStyle = "#facc15";
      this.ctx.lineWidth = 1;
      this.ctx.beginPath();
      this.ctx.moveTo(this.lasso[0][0], this.lasso[0][1]);
      for (const [x, y] of this.lasso.slice(1)) this.ctx.lineTo(x, y);
      this.ctx.stroke();
    }
  }

  selectedIndices(): number[] {
    return [...this.selected].sort((a, b) => a - b);
  }

  private canvasPos(event: MouseEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    return [event.clientX - rect.left, event.clientY - rect.top];
  }

  private bindEvents(): void {
    this.canvas.addEventListener("wheel", (event) => {
      event.preventDefault();
      const [sx, sy] = this.canvasPos(event);
      this.viewport = zoomAt(this.viewport, sx, sy,
                             event.deltaY < 0 ? 1.2 : 1 / 1.2);
      this.draw();
    });
    this.canvas.addEventListener("mousedown", (event) => {
      const [sx, sy] = this.canvasPos(event);
      if (this.lassoMode) {
        this.lasso = [[sx, sy]];
      } else {
        this.dragging = { x: sx, y: sy };
      }
    });
    this.canvas.addEventListener("mousemove", (event) => {
      const [sx, sy] = this.canvasPos(event);
      if (this.lasso) {
        this.lasso.push([sx, sy]);
        this.draw();
      } else if (this.dragging) {
        this.viewport = pan(this.viewport, sx - this.dragging.x,
                            sy - this.dragging.y);
        this.dragging = { x: sx, y: sy };
        this.draw();
      }
    });
    const finish = (event: MouseEvent) => {
      const [sx, sy] = this.canvasPos(event);
      if (this.lasso) {
        const chosen = selectPoints(this.points, this.viewport, this.lasso,
                                    this.visible);
        this.selected = new Set(chosen);
        this.lasso = null;
        this.draw();
        this.onSelection(chosen);
      } else if (this.dragging) {
        const moved = Math.abs(sx - this.dragging.x)
          + Math.abs(sy - this.dragging.y);
        this.dragging = null;
        if (moved < 3) {
          const index = hitTest(this.points, this.viewport, sx, sy, 8);
          if (index >= 0 && (!this.visible || this.visible[index])) {
            this.onPointClick(this.points[index]);
          }
        }
      }
    };
    this.canvas.addEventListener("mouseup", finish);
    this.canvas.addEventListener("mouseleave", () => {
      this.dragging = null;
    });
  }
}

/** Spectrogram + audio player shown when a point is clicked. */
export class ClipPanel {
  readonly root: HTMLElement;
  private title: HTMLElement;
  private canvas: HTMLCanvasElement;
  private audio: HTMLAudioElement;
  private info: HTMLElement;

  constructor(private api: ApiClient, private toasts: Toasts) {
    this.root = el("div", "clip-panel");
    this.title = el("div", "clip-title", "click a point to inspect its audio");
    this.canvas = el("canvas", "clip-spectrogram");
    this.canvas.width = 480;
    this.canvas.height = 200;
    this.audio = document.createElement("audio");
    this.audio.controls = true;
    this.info = el("div", "clip-info");
    this.root.append(this.title, this.canvas, this.audio, this.info);
  }

  async show(point: EmbeddingPoint, model: string): Promise<void> {
    this.title.textContent =
      `${point.file} [${point.start.toFixed(2)}s – ${point.end.toFixed(2)}s]`;
    try {
      const response = await this.api.spectrogram(
        point.file, point.start, point.end, model);
      const { pixels, width, height } = toPixels(response.matrix,
                                                 response.floor_db);
      const ctx = this.canvas.getContext?.("2d");
      if (ctx && typeof ImageData !== "undefined") {
        this.canvas.width = width;
        this.canvas.height = height;
        ctx.putImageData(new ImageData(pixels, width, height), 0, 0);
      }
      this.info.textContent =
        `peak ${peakFrequency(response).toFixed(0)} Hz @ ` +
        `${response.sample_rate} Hz (model rate)`;
      // one active player at a time: reassigning src stops the previous clip
      this.audio.src = this.api.audioUrl(point.file, point.start, point.end,
                                         model);
    } catch (error) {
      if (error instanceof AudioDetachedError) {
        this.toasts.show(error.message, "error");
      } else {
        this.toasts.show(`spectrogram failed: ${error}`, "error");
      }
    }
  }
}

export class App {
  private api: ApiClient;
  private toasts: Toasts;
  private models: ModelInfo[] = [];
  private tabHost!: HTMLElement;
  private body!: HTMLElement;

  constructor(private root: HTMLElement, api?: ApiClient) {
    this.api = api ?? new ApiClient("");
    this.toasts = new Toasts(root);
  }

  async start(): Promise<void> {
    const header = el("header");
    header.appendChild(el("h1", "", "echomap dashboard"));
    this.tabHost = el("nav", "tabs");
    for (const tab of TABS) {
      const button = el("button", "tab", tab);
      button.dataset.tab = tab;
      button.addEventListener("click", () => this.switchTab(tab));
      this.tabHost.appendChild(button);
    }
    header.appendChild(this.tabHost);
    this.body = el("main");
    this.root.append(header, this.body);

    const payload = await this.api.models();
    this.models = payload.models.filter((m) => m.completed);
    if (this.models.length === 0) {
      this.body.appendChild(el(
        "p", "empty", "no completed models in this artifact root; run the "
        + "pipeline first"));
      return;
    }
    this.switchTab("single");
  }

  private completedNames(): string[] {
    return this.models.map((m) => m.name);
  }

  private switchTab(tab: Tab): void {
    for (const button of this.tabHost.querySelectorAll("button")) {
      button.classList.toggle("active", button.dataset.tab === tab);
    }
    this.body.replaceChildren();
    if (tab === "single") void this.renderScatterTab(false);
    if (tab === "side-by-side") void this.renderScatterTab(true);
    if (tab === "all-models") void this.renderOverviewTab();
    if (tab === "metrics") void this.renderMetricsTab();
    if (tab === "heatmaps") void this.renderHeatmapTab();
  }

  private async renderScatterTab(sideBySide: boolean): Promise<void> {
    const controls = el("div", "controls");
    const names = this.completedNames();
    const modelSelects = (sideBySide ? [0, 1] : [0]).map((slot) => {
      const select = el("select");
      for (const name of names) select.appendChild(option(name));
      select.value = names[Math.min(slot, names.length - 1)];
      controls.appendChild(select);
      return select;
    });
    const colorSelect = el("select");
    for (const choice of COLOR_BY_CHOICES) colorSelect.appendChild(option(choice));
    colorSelect.value = "time_of_day";
    const annotatedToggle = el("label", "toggle");
    const annotatedBox = el("input") as HTMLInputElement;
    annotatedBox.type = "checkbox";
    annotatedToggle.append(annotatedBox, document.createTextNode(" annotated only"));
    const lassoToggle = el("label", "toggle");
    const lassoBox = el("input") as HTMLInputElement;
    lassoBox.type = "checkbox";
    lassoToggle.append(lassoBox, document.createTextNode(" lasso"));
    const exportButton = el("button", "", "export selection");
    const exportLabel = el("input") as HTMLInputElement;
    exportLabel.value = "selection";
    controls.append(colorSelect, annotatedToggle, lassoToggle, exportLabel,
                    exportButton);
    this.body.appendChild(controls);

    const panelHost = el("div", sideBySide ? "panels split" : "panels");
    this.body.appendChild(panelHost);
    const clip = new ClipPanel(this.api, this.toasts);
    const legend = el("div", "legend");
    this.body.append(legend, clip.root);

    const panels = modelSelects.map(() => {
      const panel = new ScatterPanel(sideBySide ? 460 : 820, 420);
      panelHost.appendChild(panel.root);
      return panel;
    });

    const refresh = async () => {
      const colorBy = colorSelect.value as ColorBy;
      const responses = await Promise.all(
        modelSelects.map((select) => this.api.embeddings(select.value)));
      // one shared domain keeps label colors consistent across panels
      const domain = buildDomain(responses.map((r) => r.points), colorBy);
      responses.forEach((response, i) => {
        panels[i].setData(response.points, colorBy, domain,
                          annotatedBox.checked);
        panels[i].lassoMode = lassoBox.checked;
        panels[i].onPointClick = (point) =>
          void clip.show(point, modelSelects[i].value);
        panels[i].onSelection = (indices) =>
          this.toasts.show(`${indices.length} point(s) selected`);
      });
      legend.replaceChildren();
      for (const value of domain.slice(0, 24)) {
        const sample = responses.flatMap((r) => r.points).find(
          (p) => labelValue(p, colorBy) === value);
        const chip = el("span", "chip", String(value));
        chip.style.borderColor = sample ? colorFor(sample, colorBy, domain)
          : "#555";
        legend.appendChild(chip);
      }
    };
    for (const select of [...modelSelects, colorSelect]) {
      select.addEventListener("change", () => void refresh());
    }
    annotatedBox.addEventListener("change", () => void refresh());
    lassoBox.addEventListener("change", () => {
      for (const panel of panels) panel.lassoMode = lassoBox.checked;
    });
    exportButton.addEventListener("click", async () => {
      const chosen = panels.flatMap((panel) =>
        toExportPayload(panel.points, panel.selectedIndices()));
      if (chosen.length === 0) {
        this.toasts.show("nothing selected; enable lasso and draw around "
          + "points first", "error");
        return;
      }
      try {
        const result = await this.api.exportSelection(
          chosen, exportLabel.value || "selection");
        this.toasts.show(`exported ${result.rows} rows to ${result.path}`);
      } catch (error) {
        this.toasts.show(`export failed: ${error}`, "error");
      }
    });
    await refresh();
  }

  private async renderOverviewTab(): Promise<void> {
    const rows = await Promise.all(this.completedNames().map(async (model) => ({
      model,
      probes: await this.api.probes(model).catch(() => null),
      clustering: (await this.api.clustering(model).catch(() => null))
        ?.clustering ?? null,
    })));
    const table = el("table", "grid-table");
    const head = el("tr");
    for (const title of ["model", "linear mAP", "kNN mAP", "AMI vs ground truth"]) {
      head.appendChild(el("th", "", title));
    }
    table.appendChild(head);
    for (const summary of overviewRows(rows)) {
      const row = el("tr");
      row.appendChild(el("td", "", summary.model));
      for (const value of [summary.linearMap, summary.knnMap, summary.bestAmi]) {
        row.appendChild(el("td", "", value === null ? "–" : value.toFixed(3)));
      }
      table.appendChild(row);
    }
    this.body.appendChild(table);
  }

  private async renderMetricsTab(): Promise<void> {
    const controls = el("div", "controls");
    const modelSelect = el("select");
    for (const name of this.completedNames()) modelSelect.appendChild(option(name));
    const probeSelect = el("select");
    probeSelect.append(option("linear"), option("knn"));
    controls.append(modelSelect, probeSelect);
    const barsHost = el("div", "bars");
    const tableHost = el("div");
    this.body.append(controls, barsHost, tableHost);

    const refresh = async () => {
      barsHost.replaceChildren();
      tableHost.replaceChildren();
      const model = modelSelect.value;
      try {
        const probes = await this.api.probes(model);
        const report = probeSelect.value === "knn" ? probes.knn : probes.linear;
        if (report) {
          for (const bar of probeBars(report)) {
            const row = el("div", "bar-row");
            row.appendChild(el("span", "bar-label", bar.label));
            const track = el("div", "bar-track");
            const fill = el("div", "bar-fill");
            fill.style.width = `${Math.round(bar.value * 100)}%`;
            track.appendChild(fill);
            row.append(track, el("span", "bar-value", bar.value.toFixed(3)));
            barsHost.appendChild(row);
          }
        }
      } catch (error) {
        barsHost.appendChild(el("p", "empty", `no probing results: ${error}`));
      }
      try {
        const { clustering } = await this.api.clustering(model);
        const table = el("table", "grid-table");
        const head = el("tr");
        for (const title of ["scope", "label set", "k", "AMI", "ARI"]) {
          head.appendChild(el("th", "", title));
        }
        table.appendChild(head);
        for (const row of clusteringRows(clustering)) {
          const tr = el("tr");
          tr.append(el("td", "", row.scope), el("td", "", row.labelSet),
                    el("td", "", row.k ? String(row.k) : "–"),
                    el("td", "", row.ami.toFixed(3)),
                    el("td", "", row.ari.toFixed(3)));
          table.appendChild(tr);
        }
        tableHost.appendChild(table);
      } catch (error) {
        tableHost.appendChild(el("p", "empty", `no clustering results: ${error}`));
      }
    };
    modelSelect.addEventListener("change", () => void refresh());
    probeSelect.addEventListener("change", () => void refresh());
    await refresh();
  }

  private async renderHeatmapTab(): Promise<void> {
    const controls = el("div", "controls");
    const modelSelect = el("select");
    for (const name of this.completedNames()) modelSelect.appendChild(option(name));
    const classSelect = el("select");
    controls.append(modelSelect, classSelect);
    const host = el("div", "heatmap-host");
    this.body.append(controls, host);

    const render = async (cls?: string) => {
      host.replaceChildren();
      try {
        const response = await this.api.heatmap(modelSelect.value,
                                                cls ?? classSelect.value ?? "");
        if (classSelect.options.length === 0) {
          for (const name of response.available_classes) {
            classSelect.appendChild(option(name));
          }
          if (response.available_classes.length > 0 && !cls) {
            classSelect.value = response.available_classes[0];
            return render(classSelect.value);
          }
        }
        const model = heatmapModel(response);
        const table = el("table", "heatmap");
        const head = el("tr");
        head.appendChild(el("th"));
        for (const hour of response.hours) {
          head.appendChild(el("th", "", String(hour)));
        }
        table.appendChild(head);
        model.dates.forEach((date, rowIndex) => {
          const tr = el("tr");
          tr.appendChild(el("th", "", date));
          for (const count of model.cells[rowIndex]) {
            const td = el("td", "", count ? String(count) : "");
            td.style.background = cellColor(count, model.maxCount);
            tr.appendChild(td);
          }
          table.appendChild(tr);
        });
        host.append(el("p", "", `${model.total} event(s) of `
          + `${classSelect.value || response.class}`), table);
      } catch (error) {
        host.appendChild(el("p", "empty", `no predictions: ${error}`));
      }
    };
    modelSelect.addEventListener("change", () => {
      classSelect.replaceChildren();
      void render();
    });
    classSelect.addEventListener("change", () => void render(classSelect.value));
    await render();
  }
}
