/**
 * DOM construction from view models. Nothing in here computes a number; it
 * only places values and pixel sizes that the view models already decided.
 */

import type { ClassInfo, ProjectionPoint, RetrieveResult, VideoRecord } from "./api.js";
import { timelineGlyphs } from "./viewmodels.js";
import type {
  BarSegment,
  ConfusionCell,
  CurvePoint,
  SankeyLayout,
  TemplateRow,
  TimelineGlyph,
} from "./viewmodels.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

export function svgEl(tag: string, attrs: Record<string, string> = {}): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  return node;
}

/** Cross-hatch pattern marking labels applied after the seed round. */
export function checkPatternDefs(classColors: Map<string, string>): SVGElement {
  const defs = svgEl("defs");
  for (const [classId, color] of classColors) {
    const pattern = svgEl("pattern", {
      id: `check-${classId}`,
      width: "6",
      height: "6",
      patternUnits: "userSpaceOnUse",
    });
    pattern.appendChild(svgEl("rect", { width: "6", height: "6", fill: color }));
    pattern.appendChild(
      svgEl("path", { d: "M0,6 L6,0 M-1,1 L1,-1 M5,7 L7,5", stroke: "#fff", "stroke-width": "1.2" }),
    );
    defs.appendChild(pattern);
  }
  return defs;
}

export function distributionBar(
  segments: BarSegment[],
  classColors: Map<string, string>,
  height = 14,
): SVGElement {
  const width = segments.reduce((acc, s) => Math.max(acc, s.x + s.width), 0);
  const svg = svgEl("svg", { width: String(width), height: String(height), class: "dist-bar" });
  for (const segment of segments) {
    const fill = segment.checkTexture
      ? `url(#check-${segment.classId})`
      : classColors.get(segment.classId) ?? "#999";
    const rect = svgEl("rect", {
      x: String(segment.x),
      y: "0",
      width: String(segment.width),
      height: String(height),
      fill,
      "data-class": segment.classId,
      "data-check": segment.checkTexture ? "1" : "0",
    });
    const title = svgEl("title");
    title.textContent = `${segment.classId}: ${segment.count}${segment.checkTexture ? " (new)" : ""}`;
    rect.appendChild(title);
    svg.appendChild(rect);
  }
  return svg;
}

export interface TableHandlers {
  onSort(column: "purity" | "unlabeled" | "accuracy" | "support"): void;
  onExpand(symbols: string): void;
}

export function renderTemplateTable(
  container: HTMLElement,
  rows: TemplateRow[],
  classColors: Map<string, string>,
  handlers: TableHandlers,
): void {
  container.replaceChildren();
  const table = el("table", { class: "template-table" });
  const header = el("tr", {}, [el("th", {}, ["template"])]);
  for (const column of ["support", "purity", "accuracy", "unlabeled"] as const) {
    const button = el("button", { type: "button" }, [column]);
    button.addEventListener("click", () => handlers.onSort(column));
    header.appendChild(el("th", {}, [button]));
  }
  header.appendChild(el("th", {}, ["labeled distribution"]));
  table.appendChild(header);

  for (const row of rows) {
    const expand = el("button", { type: "button", class: "expand" }, [`+ ${row.symbols}`]);
    expand.addEventListener("click", () => handlers.onExpand(row.symbols));
    const cells = [
      el("td", {}, [expand]),
      el("td", { class: "num" }, [String(row.support)]),
      el("td", { class: "num" }, [row.purity.toFixed(2)]),
      el("td", { class: "num" }, [row.accuracy === null ? "n/a" : row.accuracy.toFixed(2)]),
      el("td", { class: "num" }, [String(row.unlabeledCount)]),
      el("td", {}, [distributionBar(row.segments, classColors)]),
    ];
    table.appendChild(el("tr", { "data-symbols": row.symbols }, cells));
  }
  container.appendChild(table);
}

export function renderSankey(
  container: HTMLElement,
  layout: SankeyLayout,
  classColors: Map<string, string>,
  width: number,
  height: number,
): void {
  container.replaceChildren();
  const svg = svgEl("svg", { width: String(width), height: String(height), class: "sankey" });
  for (const link of layout.links) {
    const mid = (link.x0 + link.x1) / 2;
    const path = svgEl("path", {
      d: `M${link.x0},${link.y0} C${mid},${link.y0} ${mid},${link.y1} ${link.x1},${link.y1}`,
      fill: "none",
      stroke: classColors.get(link.classId) ?? "#bbb",
      "stroke-width": String(Math.max(link.width, 0)),
      "stroke-opacity": "0.55",
      "data-count": String(link.count),
    });
    const title = svgEl("title");
    title.textContent = `cluster ${link.clusterIndex} to ${link.classId}: ${link.count}`;
    path.appendChild(title);
    svg.appendChild(path);
  }
  for (const node of layout.nodes) {
    svg.appendChild(
      svgEl("rect", {
        x: String(node.x),
        y: String(node.y),
        width: String(node.width),
        height: String(Math.max(node.height, 1)),
        fill: node.side === "class" ? classColors.get(node.label) ?? "#777" : "#555",
      }),
    );
    const text = svgEl("text", {
      x: String(node.side === "cluster" ? node.x + node.width + 4 : node.x - 4),
      y: String(node.y + Math.max(node.height, 1) / 2 + 4),
      "text-anchor": node.side === "cluster" ? "start" : "end",
      class: "sankey-label",
    });
    text.textContent = node.label;
    svg.appendChild(text);
  }
  container.appendChild(svg);
}

export function renderTimeline(
  container: HTMLElement,
  glyphs: TimelineGlyph[],
  codeColors: Map<string, string>,
  width: number,
): void {
  const roleBorder: Record<string, string> = { core: "#222", focus: "#e15759", context: "#ccc" };
  const strip = el("div", { class: "timeline", style: `width:${width}px` });
  for (const glyph of glyphs) {
    const chip = el("span", {
      class: "glyph",
      style:
        `left:${glyph.x.toFixed(1)}px;` +
        `background:${codeColors.get(glyph.code) ?? "#eee"};` +
        `border-color:${roleBorder[glyph.role] ?? "#ccc"}`,
      title: glyph.role,
    });
    chip.textContent = glyph.code;
    strip.appendChild(chip);
  }
  container.appendChild(strip);
}

export function renderVideoList(
  container: HTMLElement,
  videos: VideoRecord[],
  codeColors: Map<string, string>,
  selection: Set<string>,
  onToggle: (videoId: string, checked: boolean) => void,
): void {
  container.replaceChildren();
  for (const video of videos) {
    const checkbox = el("input", { type: "checkbox", "data-video": video.video_id }) as HTMLInputElement;
    checkbox.checked = selection.has(video.video_id);
    checkbox.addEventListener("change", () => onToggle(video.video_id, checkbox.checked));
    const label = video.label
      ? el("span", { class: "tag" }, [`${video.label.class} @${video.label.iteration}`])
      : el("span", { class: "tag unlabeled" }, ["unlabeled"]);
    const row = el("div", { class: "video-row" }, [checkbox, el("code", {}, [video.video_id]), label]);
    renderTimeline(row, timelineFor(video), codeColors, 260);
    container.appendChild(row);
  }
}

function timelineFor(video: VideoRecord): TimelineGlyph[] {
  return timelineGlyphs(video, 240);
}

export function renderCurve(container: HTMLElement, points: CurvePoint[], width: number, height: number): void {
  container.replaceChildren();
  const svg = svgEl("svg", { width: String(width), height: String(height), class: "curve" });
  if (points.length) {
    const maxLabels = Math.max(...points.map((p) => p.labeledCount), 1);
    const coords = points.map((p) => {
      const x = (p.labeledCount / maxLabels) * (width - 20) + 10;
      const y = height - 10 - p.f1 * (height - 20);
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    });
    svg.appendChild(
      svgEl("polyline", { points: coords.join(" "), fill: "none", stroke: "#4e79a7", "stroke-width": "2" }),
    );
  }
  container.appendChild(svg);
}

export function renderConfusion(
  container: HTMLElement,
  cells: ConfusionCell[],
  classCount: number,
  cellSize = 34,
): void {
  container.replaceChildren();
  const size = classCount * cellSize;
  const svg = svgEl("svg", { width: String(size), height: String(size), class: "confusion" });
  for (const cell of cells) {
    const shade = Math.round(255 - cell.intensity * 170);
    const rect = svgEl("rect", {
      x: String(cell.col * cellSize),
      y: String(cell.row * cellSize),
      width: String(cellSize - 2),
      height: String(cellSize - 2),
      fill: `rgb(${shade},${shade},255)`,
    });
    const title = svgEl("title");
    title.textContent = `truth ${cell.truth} / predicted ${cell.predicted}: ${cell.value}`;
    rect.appendChild(title);
    svg.appendChild(rect);
    const text = svgEl("text", {
      x: String(cell.col * cellSize + cellSize / 2 - 1),
      y: String(cell.row * cellSize + cellSize / 2 + 3),
      "text-anchor": "middle",
      class: "confusion-value",
    });
    text.textContent = String(cell.value);
    svg.appendChild(text);
  }
  container.appendChild(svg);
}

export function renderProjection(
  container: HTMLElement,
  points: ProjectionPoint[],
  classColors: Map<string, string>,
  width: number,
  height: number,
): void {
  container.replaceChildren();
  const svg = svgEl("svg", { width: String(width), height: String(height), class: "projection" });
  if (points.length) {
    const xs = points.map((p) => p.x);
    const ys = points.map((p) => p.y);
    const [minX, maxX] = [Math.min(...xs), Math.max(...xs)];
    const [minY, maxY] = [Math.min(...ys), Math.max(...ys)];
    const spanX = maxX - minX || 1;
    const spanY = maxY - minY || 1;
    for (const point of points) {
      const cx = ((point.x - minX) / spanX) * (width - 16) + 8;
      const cy = ((point.y - minY) / spanY) * (height - 16) + 8;
      const dot = svgEl("circle", {
        cx: cx.toFixed(1),
        cy: cy.toFixed(1),
        r: String(2 + point.error * 4),
        fill: point.label ? classColors.get(point.label) ?? "#999" : "#bbb",
        "fill-opacity": String(0.35 + point.error * 0.6),
      });
      const title = svgEl("title");
      title.textContent = `${point.video_id} error ${point.error.toFixed(2)}`;
      dot.appendChild(title);
      svg.appendChild(dot);
    }
  }
  container.appendChild(svg);
}

export function renderRetrieved(
  container: HTMLElement,
  results: RetrieveResult[],
  selection: Set<string>,
  onToggle: (videoId: string, checked: boolean) => void,
): void {
  container.replaceChildren();
  for (const result of results) {
    const checkbox = el("input", { type: "checkbox", "data-video": result.video_id }) as HTMLInputElement;
    checkbox.checked = selection.has(result.video_id);
    checkbox.addEventListener("change", () => onToggle(result.video_id, checkbox.checked));
    container.appendChild(
      el("div", { class: "video-row" }, [
        checkbox,
        el("code", {}, [result.video_id]),
        el("span", { class: "num" }, [result.sim_total.toFixed(3)]),
        el("span", { class: "tag" }, [`anchor ${result.best_anchor_id}`]),
      ]),
    );
  }
}

export function notice(container: HTMLElement, message: string): void {
  const note = el("div", { class: "notice" }, [message]);
  container.appendChild(note);
  setTimeout(() => note.remove(), 6000);
}

export function classColorMap(classes: ClassInfo[]): Map<string, string> {
  return new Map(classes.map((c) => [c.class_id, c.color]));
}

const GLYPH_PALETTE = [
  "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
  "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#86bcb6", "#d37295",
];

export function codeColorMap(alphabet: string[]): Map<string, string> {
  return new Map(alphabet.map((code, i) => [code, GLYPH_PALETTE[i % GLYPH_PALETTE.length]!]));
}
