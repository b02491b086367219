/**
 * Typed client for the seqlab HTTP service.
 *
 * Reads may overlap freely; mutations (labels, resolve, retrain) are
 * serialized client-side so at most one is in flight, and they are never
 * silently retried.
 */

export interface ClassInfo {
  class_id: string;
  name: string;
  color: string;
}

export interface Meta {
  classes: ClassInfo[];
  alphabet: string[];
  event_names: Record<string, string>;
  video_count: number;
  labeled_count: number;
  conflict_count: number;
  iteration: number;
  threshold: number;
  new_since_retrain: number;
  default_w: number;
  has_embeddings: boolean;
}

export interface TemplateRecord {
  symbols: string;
  support: number;
  length: number;
  class_counts: Record<string, number>;
  purity: number;
  accuracy: number | null;
  unlabeled_count: number;
  newly_labeled_counts: Record<string, number>;
}

export interface TemplatesResponse {
  templates: TemplateRecord[];
}

export interface PrefixGroup {
  prefix: string;
  template: TemplateRecord | null;
  children: PrefixGroup[];
}

export interface KeyedGroup {
  key: string | number;
  templates: TemplateRecord[];
}

export type AggregateResponse =
  | { aggregate: "prefix"; groups: PrefixGroup[] }
  | { aggregate: "degree" | "set"; groups: KeyedGroup[] };

export interface ClusterMember {
  video_id: string;
  edit_cost: number;
  roles: string[];
}

export interface ClusterRecord {
  representative: string;
  member_ids: string[];
  members: ClusterMember[];
}

export interface ClustersResponse {
  seed_template: string;
  alpha: number;
  lam: number;
  total_dl: number;
  clusters: ClusterRecord[];
}

export interface EventRecord {
  code: string;
  t_start: number;
  t_end: number;
}

export interface LabelInfo {
  class: string;
  source: string;
  iteration: number;
}

export interface VideoRecord {
  video_id: string;
  symbols: string;
  duration: number;
  thumbnail: string | null;
  events: EventRecord[];
  label: LabelInfo | null;
  roles?: string[];
}

export interface VideosResponse {
  videos: VideoRecord[];
}

export interface RetrieveResult {
  video_id: string;
  sim_total: number;
  sim_e: number;
  sim_v: number;
  best_anchor_id: string;
}

export interface RetrieveResponse {
  w: number;
  results: RetrieveResult[];
}

export interface LabelMutation {
  ids: string[];
  class: string;
  source: string;
  actor?: string;
}

export interface LabelOutcome {
  applied: number;
  conflicts_raised: string[];
  labeled_count: number;
  conflict_count: number;
  iteration: number;
}

export interface ResolveOutcome {
  video_id: string;
  class: string;
  conflict_count: number;
}

export interface HistoryEvent {
  video_id: string;
  class: string;
  source: string;
  iteration: number;
  actor: string;
  timestamp: number;
  resolves: boolean;
}

export interface IterationRecord {
  iteration: number;
  labeled_count: number;
  per_class_accuracy: Record<string, number>;
  overall_f1: number;
  confusion_matrix: number[][];
  class_ids: string[];
  timestamp: number;
}

export interface MetricsResponse {
  iteration: number;
  threshold: number;
  new_since_retrain: number;
  records: IterationRecord[];
}

export interface ProjectionPoint {
  video_id: string;
  x: number;
  y: number;
  error: number;
  label: string | null;
  iteration: number | null;
}

export interface ProjectionResponse {
  points: ProjectionPoint[];
}

export interface TemplateQuery {
  sort?: "purity" | "unlabeled" | "accuracy" | "support";
  order?: "asc" | "desc";
  min_support?: number;
  min_degree?: number;
  max_degree?: number;
  aggregate_by?: "prefix" | "degree" | "set";
  search?: string;
}

export class ApiError extends Error {
  readonly status: number;
  readonly retryAfter: number | null;

  constructor(status: number, message: string, retryAfter: number | null = null) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.retryAfter = retryAfter;
  }
}

function queryString(params: Record<string, string | number | boolean | undefined>): string {
  const pairs: string[] = [];
  for (const [key, value] of Object.entries(params)) {
    if (value !== undefined) {
      pairs.push(`${encodeURIComponent(key)}=${encodeURIComponent(String(value))}`);
    }
  }
  return pairs.length ? `?${pairs.join("&")}` : "";
}

export class ApiClient {
  private readonly baseUrl: string;
  private mutationInFlight = false;

  constructor(baseUrl = "") {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  get busy(): boolean {
    return this.mutationInFlight;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.baseUrl + path, init);
    if (!response.ok) {
      let message = `${response.status} ${response.statusText}`;
      try {
        const body = await response.json();
        message = body.detail ?? body.error ?? message;
      } catch {
        // non-JSON error body; keep the status text
      }
      const retryAfter = response.headers.get("Retry-After");
      throw new ApiError(response.status, String(message), retryAfter ? Number(retryAfter) : null);
    }
    return (await response.json()) as T;
  }

  private async mutate<T>(path: string, body: unknown): Promise<T> {
    if (this.mutationInFlight) {
      throw new ApiError(0, "a mutation is already in flight");
    }
    this.mutationInFlight = true;
    try {
      return await this.request<T>(path, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      });
    } finally {
      this.mutationInFlight = false;
    }
  }

  meta(): Promise<Meta> {
    return this.request("/meta");
  }

  templates(query: TemplateQuery = {}): Promise<TemplatesResponse | AggregateResponse> {
    return this.request(`/templates${queryString({ ...query })}`);
  }

  clusters(
    symbols: string,
    opts: { alpha?: number; lam?: number; use_lsh?: boolean } = {},
  ): Promise<ClustersResponse> {
    return this.request(`/templates/${encodeURIComponent(symbols)}/clusters${queryString({ ...opts })}`);
  }

  videos(
    filter: {
      template?: string;
      cluster_index?: number;
      labeled?: boolean;
      alpha?: number;
      lam?: number;
    } = {},
  ): Promise<VideosResponse> {
    return this.request(`/videos${queryString({ ...filter })}`);
  }

  retrieve(body: { anchors: string[]; w?: number; top_k?: number }): Promise<RetrieveResponse> {
    return this.request("/retrieve", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  applyLabels(mutation: LabelMutation): Promise<LabelOutcome> {
    return this.mutate("/labels", mutation);
  }

  resolveConflict(body: { video_id: string; class: string; actor?: string }): Promise<ResolveOutcome> {
    return this.mutate("/labels/resolve", body);
  }

  history(videoId?: string): Promise<{ events: HistoryEvent[] }> {
    return this.request(`/labels/history${queryString({ video_id: videoId })}`);
  }

  retrain(force = false): Promise<IterationRecord> {
    return this.mutate("/retrain", { force });
  }

  metrics(): Promise<MetricsResponse> {
    return this.request("/metrics");
  }

  projection(): Promise<ProjectionResponse> {
    return this.request("/projection");
  }
}
