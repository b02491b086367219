/**
 * Single-page shell: holds view state, fetches from the service, and
 * re-renders from responses. Reloading the page reproduces the same views
 * because nothing lives here that the API cannot restate.
 */

import { ApiClient, ApiError } from "./api.js";
import type { ClustersResponse, Meta, TemplateRecord, VideoRecord } from "./api.js";
import {
  accuracyCurve,
  confusionCells,
  labelMutation,
  sankeyLayout,
  templateRows,
} from "./viewmodels.js";
import {
  checkPatternDefs,
  classColorMap,
  codeColorMap,
  notice,
  renderConfusion,
  renderCurve,
  renderProjection,
  renderRetrieved,
  renderSankey,
  renderTemplateTable,
  renderVideoList,
  svgEl,
} from "./render.js";

type SortColumn = "purity" | "unlabeled" | "accuracy" | "support";

interface ViewState {
  sort: SortColumn;
  order: "asc" | "desc";
  minSupport: number | undefined;
  search: string;
  expanded: string | null;
  selection: Set<string>;
  w: number;
  anchors: string[];
}

const client = new ApiClient("");
const state: ViewState = {
  sort: "purity",
  order: "desc",
  minSupport: undefined,
  search: "",
  expanded: null,
  selection: new Set(),
  w: 0.5,
  anchors: [],
};

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node;
}

function report(error: unknown): void {
  const message = error instanceof Error ? error.message : String(error);
  notice(byId("notices"), message);
}

async function refreshMeta(): Promise<Meta> {
  const meta = await client.meta();
  byId("meta-summary").textContent =
    `${meta.video_count} videos, ${meta.labeled_count} labeled, ` +
    `${meta.conflict_count} conflicts, iteration ${meta.iteration}, ` +
    `${meta.new_since_retrain}/${meta.threshold} new labels toward retrain`;
  return meta;
}

async function refreshTemplates(meta: Meta): Promise<void> {
  const query = {
    sort: state.sort,
    order: state.order,
    min_support: state.minSupport,
    search: state.search || undefined,
  };
  const response = await client.templates(query);
  if (!("templates" in response)) {
    return;
  }
  const classOrder = meta.classes.map((c) => c.class_id);
  const rows = templateRows(response.templates as TemplateRecord[], classOrder);
  renderTemplateTable(byId("template-table"), rows, classColorMap(meta.classes), {
    onSort: (column) => {
      state.order = state.sort === column && state.order === "desc" ? "asc" : "desc";
      state.sort = column;
      void refreshAll();
    },
    onExpand: (symbols) => {
      state.expanded = symbols;
      void refreshLabelingView(meta);
    },
  });
}

async function refreshLabelingView(meta: Meta): Promise<void> {
  if (!state.expanded) {
    return;
  }
  byId("labeling-title").textContent = `template ${state.expanded}`;
  let clusters: ClustersResponse;
  let videos: VideoRecord[];
  try {
    clusters = await client.clusters(state.expanded);
    videos = (await client.videos({ template: state.expanded })).videos;
  } catch (error) {
    report(error);
    return;
  }
  const labelByVideo = new Map<string, string>();
  for (const video of videos) {
    if (video.label) {
      labelByVideo.set(video.video_id, video.label.class);
    }
  }
  const classOrder = meta.classes.map((c) => c.class_id);
  const layout = sankeyLayout(clusters.clusters, labelByVideo, classOrder, {
    width: 420,
    height: 260,
  });
  renderSankey(byId("sankey"), layout, classColorMap(meta.classes), 420, 260);
  renderVideoList(
    byId("video-list"),
    videos,
    codeColorMap(meta.alphabet),
    state.selection,
    (videoId, checked) => {
      if (checked) {
        state.selection.add(videoId);
      } else {
        state.selection.delete(videoId);
      }
      byId("selection-count").textContent = `${state.selection.size} selected`;
    },
  );
}

async function refreshInfoView(meta: Meta): Promise<void> {
  const [metrics, projection] = await Promise.all([client.metrics(), client.projection()]);
  renderCurve(byId("accuracy-curve"), accuracyCurve(metrics.records), 360, 180);
  const latest = metrics.records[metrics.records.length - 1];
  if (latest) {
    renderConfusion(byId("confusion"), confusionCells(latest), latest.class_ids.length);
  }
  renderProjection(byId("projection"), projection.points, classColorMap(meta.classes), 360, 280);
}

async function applySelection(): Promise<void> {
  const classId = (byId("class-picker") as HTMLSelectElement).value;
  try {
    const mutation = state.expanded
      ? labelMutation(state.selection, classId, `template:${state.expanded}`)
      : labelMutation(state.selection, classId);
    const outcome = await client.applyLabels(mutation);
    state.selection.clear();
    byId("selection-count").textContent = "0 selected";
    if (outcome.conflicts_raised.length) {
      notice(byId("notices"), `conflicts raised: ${outcome.conflicts_raised.join(", ")}`);
    }
    await refreshAll();
  } catch (error) {
    report(error);
  }
}

async function triggerRetrain(force: boolean): Promise<void> {
  try {
    const record = await client.retrain(force);
    notice(byId("notices"), `retrained: iteration ${record.iteration}, F1 ${record.overall_f1.toFixed(3)}`);
    await refreshAll();
  } catch (error) {
    if (error instanceof ApiError && error.status === 409) {
      notice(byId("notices"), `not enough new labels yet (${error.message})`);
    } else {
      report(error);
    }
  }
}

async function runRetrieve(): Promise<void> {
  if (!state.anchors.length) {
    notice(byId("notices"), "enter at least one labeled anchor id");
    return;
  }
  try {
    const response = await client.retrieve({ anchors: state.anchors, w: state.w, top_k: 25 });
    renderRetrieved(byId("retrieved"), response.results, state.selection, (videoId, checked) => {
      if (checked) {
        state.selection.add(videoId);
      } else {
        state.selection.delete(videoId);
      }
      byId("selection-count").textContent = `${state.selection.size} selected`;
    });
  } catch (error) {
    report(error);
  }
}

async function refreshAll(): Promise<void> {
  try {
    const meta = await refreshMeta();
    const picker = byId("class-picker") as HTMLSelectElement;
    if (!picker.options.length) {
      for (const info of meta.classes) {
        picker.appendChild(new Option(`${info.name} (${info.class_id})`, info.class_id));
      }
    }
    const defsHost = byId("pattern-defs");
    defsHost.replaceChildren();
    const svg = svgEl("svg", { width: "0", height: "0" });
    svg.appendChild(checkPatternDefs(classColorMap(meta.classes)));
    defsHost.appendChild(svg);
    await refreshTemplates(meta);
    await refreshLabelingView(meta);
    await refreshInfoView(meta);
  } catch (error) {
    report(error);
  }
}

function wireControls(): void {
  (byId("search-box") as HTMLInputElement).addEventListener("change", (event) => {
    state.search = (event.target as HTMLInputElement).value.trim();
    void refreshAll();
  });
  (byId("min-support") as HTMLInputElement).addEventListener("change", (event) => {
    const raw = (event.target as HTMLInputElement).value;
    state.minSupport = raw ? Number(raw) : undefined;
    void refreshAll();
  });
  (byId("w-slider") as HTMLInputElement).addEventListener("input", (event) => {
    state.w = Number((event.target as HTMLInputElement).value);
    byId("w-value").textContent = state.w.toFixed(2);
    void runRetrieve();
  });
  (byId("anchor-box") as HTMLInputElement).addEventListener("change", (event) => {
    state.anchors = (event.target as HTMLInputElement).value
      .split(",")
      .map((s) => s.trim())
      .filter(Boolean);
    void runRetrieve();
  });
  byId("apply-labels").addEventListener("click", () => void applySelection());
  byId("retrain").addEventListener("click", () => void triggerRetrain(false));
  byId("retrain-force").addEventListener("click", () => void triggerRetrain(true));
}

wireControls();
void refreshAll();
