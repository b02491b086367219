/**
 * Pure view-model builders.
 *
 * Every number shown in the UI comes straight from an API payload; the only
 * arithmetic here is proportional scaling from counts to pixels. Keeping the
 * math in plain functions (no DOM) is what makes the display contracts
 * testable.
 */

import type {
  ClusterRecord,
  EventRecord,
  IterationRecord,
  LabelMutation,
  TemplateRecord,
  VideoRecord,
} from "./api.js";

/**
 * Scale non-negative counts to integer pixel widths that sum to `total`.
 *
 * Largest-remainder rounding: every width differs from the exact
 * proportional share by less than one pixel, and the pixels always add up,
 * so stacked segments never leave gaps or overflow the bar.
 */
export function proportionalWidths(counts: number[], total: number): number[] {
  if (counts.some((c) => c < 0) || total < 0 || !Number.isInteger(total)) {
    throw new Error("counts must be non-negative and total a non-negative integer");
  }
  const sum = counts.reduce((a, b) => a + b, 0);
  if (sum === 0) {
    return counts.map(() => 0);
  }
  const exact = counts.map((c) => (c / sum) * total);
  const widths = exact.map(Math.floor);
  let leftover = total - widths.reduce((a, b) => a + b, 0);
  const order = exact
    .map((value, index) => ({ index, frac: value - Math.floor(value) }))
    .sort((a, b) => b.frac - a.frac || a.index - b.index);
  for (const { index } of order) {
    if (leftover === 0) {
      break;
    }
    widths[index] = (widths[index] ?? 0) + 1;
    leftover -= 1;
  }
  return widths;
}

export interface BarSegment {
  classId: string;
  count: number;
  x: number;
  width: number;
  /** True exactly when the counted labels were applied at iteration > 0. */
  checkTexture: boolean;
}

/**
 * Split a template's class distribution into stacked bar segments.
 *
 * Each class contributes up to two segments: labels from the seed round
 * (plain) and labels applied at iteration > 0 (check-textured). Segment
 * widths are proportional to the API counts within one pixel.
 */
export function distributionSegments(
  template: Pick<TemplateRecord, "class_counts" | "newly_labeled_counts">,
  classOrder: string[],
  barWidth: number,
): BarSegment[] {
  const parts: { classId: string; count: number; checkTexture: boolean }[] = [];
  for (const classId of classOrder) {
    const count = template.class_counts[classId] ?? 0;
    const newly = template.newly_labeled_counts[classId] ?? 0;
    if (newly > count) {
      throw new Error(`newly labeled count exceeds class count for ${classId}`);
    }
    if (count - newly > 0) {
      parts.push({ classId, count: count - newly, checkTexture: false });
    }
    if (newly > 0) {
      parts.push({ classId, count: newly, checkTexture: true });
    }
  }
  const widths = proportionalWidths(parts.map((p) => p.count), barWidth);
  const segments: BarSegment[] = [];
  let x = 0;
  for (let i = 0; i < parts.length; i += 1) {
    const part = parts[i]!;
    const width = widths[i]!;
    segments.push({ classId: part.classId, count: part.count, x, width, checkTexture: part.checkTexture });
    x += width;
  }
  return segments;
}

export interface TemplateRow {
  symbols: string;
  support: number;
  length: number;
  purity: number;
  accuracy: number | null;
  unlabeledCount: number;
  segments: BarSegment[];
}

/**
 * Table rows in exactly the order the API returned them. Sorting and
 * filtering are the service's job; re-ordering here would let the table
 * drift from the query the user asked for.
 */
export function templateRows(
  records: TemplateRecord[],
  classOrder: string[],
  barWidth = 120,
): TemplateRow[] {
  return records.map((record) => ({
    symbols: record.symbols,
    support: record.support,
    length: record.length,
    purity: record.purity,
    accuracy: record.accuracy,
    unlabeledCount: record.unlabeled_count,
    segments: distributionSegments(record, classOrder, barWidth),
  }));
}

export interface SankeyNode {
  id: string;
  side: "cluster" | "class";
  label: string;
  x: number;
  y: number;
  width: number;
  height: number;
}

export interface SankeyLink {
  clusterIndex: number;
  classId: string;
  count: number;
  width: number;
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export interface SankeyLayout {
  nodes: SankeyNode[];
  links: SankeyLink[];
  usableHeight: number;
}

export interface SankeyOptions {
  width: number;
  height: number;
  nodeWidth?: number;
  nodeGap?: number;
}

export const UNLABELED_KEY = "(unlabeled)";

/**
 * Two-column flow layout: clusters on the left, classes on the right, one
 * ribbon per (cluster, class) pair carrying the member count. All ribbon
 * widths share a single scale, so each is proportional to its count within
 * one pixel of rounding.
 */
export function sankeyLayout(
  clusters: ClusterRecord[],
  labelByVideo: Map<string, string>,
  classOrder: string[],
  opts: SankeyOptions,
): SankeyLayout {
  const nodeWidth = opts.nodeWidth ?? 14;
  const nodeGap = opts.nodeGap ?? 8;

  const flows: { clusterIndex: number; classId: string; count: number }[] = [];
  const rightOrder = [...classOrder, UNLABELED_KEY];
  for (let i = 0; i < clusters.length; i += 1) {
    const counts = new Map<string, number>();
    for (const vid of clusters[i]!.member_ids) {
      const classId = labelByVideo.get(vid) ?? UNLABELED_KEY;
      counts.set(classId, (counts.get(classId) ?? 0) + 1);
    }
    for (const classId of rightOrder) {
      const count = counts.get(classId);
      if (count) {
        flows.push({ clusterIndex: i, classId, count });
      }
    }
  }

  const leftUsed = new Set(flows.map((f) => f.clusterIndex)).size;
  const rightUsed = new Set(flows.map((f) => f.classId)).size;
  const gaps = Math.max(leftUsed, rightUsed, 1) - 1;
  const usableHeight = Math.max(opts.height - gaps * nodeGap, 0);
  const widths = proportionalWidths(flows.map((f) => f.count), usableHeight);

  const links: SankeyLink[] = flows.map((flow, i) => ({
    ...flow,
    width: widths[i]!,
    x0: nodeWidth,
    y0: 0,
    x1: opts.width - nodeWidth,
    y1: 0,
  }));

  const nodes: SankeyNode[] = [];
  let y = 0;
  for (let i = 0; i < clusters.length; i += 1) {
    const mine = links.filter((l) => l.clusterIndex === i);
    if (!mine.length) {
      continue;
    }
    let offset = y;
    for (const link of mine) {
      link.y0 = offset + link.width / 2;
      offset += link.width;
    }
    const height = offset - y;
    nodes.push({
      id: `cluster-${i}`,
      side: "cluster",
      label: clusters[i]!.representative,
      x: 0,
      y,
      width: nodeWidth,
      height,
    });
    y = offset + nodeGap;
  }

  y = 0;
  for (const classId of rightOrder) {
    const mine = links.filter((l) => l.classId === classId);
    if (!mine.length) {
      continue;
    }
    let offset = y;
    for (const link of mine) {
      link.y1 = offset + link.width / 2;
      offset += link.width;
    }
    const height = offset - y;
    nodes.push({
      id: `class-${classId}`,
      side: "class",
      label: classId,
      x: opts.width - nodeWidth,
      y,
      width: nodeWidth,
      height,
    });
    y = offset + nodeGap;
  }

  return { nodes, links, usableHeight };
}

/**
 * Build the single POST /labels body for a batch selection. Selecting k
 * videos must produce exactly one mutation carrying exactly those k ids.
 */
export function labelMutation(
  selection: Iterable<string>,
  classId: string,
  source = "manual",
  actor?: string,
): LabelMutation {
  const ids: string[] = [];
  const seen = new Set<string>();
  for (const id of selection) {
    if (!seen.has(id)) {
      seen.add(id);
      ids.push(id);
    }
  }
  if (!ids.length) {
    throw new Error("select at least one video before applying a label");
  }
  const mutation: LabelMutation = { ids, class: classId, source };
  if (actor !== undefined) {
    mutation.actor = actor;
  }
  return mutation;
}

/** True exactly when the video's current label was applied after seeding. */
export function isNewlyLabeled(video: Pick<VideoRecord, "label">): boolean {
  return video.label !== null && video.label.iteration > 0;
}

export interface CurvePoint {
  iteration: number;
  labeledCount: number;
  f1: number;
}

/** Accuracy-vs-labels curve, numbers taken verbatim from iteration records. */
export function accuracyCurve(records: IterationRecord[]): CurvePoint[] {
  return records.map((r) => ({
    iteration: r.iteration,
    labeledCount: r.labeled_count,
    f1: r.overall_f1,
  }));
}

export interface ConfusionCell {
  row: number;
  col: number;
  truth: string;
  predicted: string;
  value: number;
  /** Share of the largest cell, for the sequential colormap. */
  intensity: number;
}

export function confusionCells(record: IterationRecord): ConfusionCell[] {
  const peak = Math.max(1, ...record.confusion_matrix.flat());
  const cells: ConfusionCell[] = [];
  record.confusion_matrix.forEach((rowValues, row) => {
    rowValues.forEach((value, col) => {
      cells.push({
        row,
        col,
        truth: record.class_ids[row] ?? String(row),
        predicted: record.class_ids[col] ?? String(col),
        value,
        intensity: value / peak,
      });
    });
  });
  return cells;
}

export const HEATMAP_BINS = 20;

/**
 * Event counts over normalized time bins (duration mapped to [0, 1)), the
 * grid behind the cluster summary heatmap.
 */
export function heatmapBins(
  events: EventRecord[],
  duration: number,
  bins = HEATMAP_BINS,
): number[] {
  const counts = new Array<number>(bins).fill(0);
  if (duration <= 0) {
    return counts;
  }
  for (const event of events) {
    const position = Math.min(Math.max(event.t_start / duration, 0), 1);
    const bin = Math.min(Math.floor(position * bins), bins - 1);
    counts[bin] = (counts[bin] ?? 0) + 1;
  }
  return counts;
}

export interface TimelineGlyph {
  code: string;
  x: number;
  role: string;
}

/**
 * Event chips positioned by start time across a fixed pixel width, with the
 * core/focus/context role (when the video came from a cluster view) driving
 * the border color.
 */
export function timelineGlyphs(
  video: Pick<VideoRecord, "events" | "duration" | "roles">,
  width: number,
): TimelineGlyph[] {
  const duration = video.duration > 0 ? video.duration : 1;
  return video.events.map((event, i) => ({
    code: event.code,
    x: Math.min(event.t_start / duration, 1) * width,
    role: video.roles?.[i] ?? "context",
  }));
}
