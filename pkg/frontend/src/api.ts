// Typed client for the teaching service. Every number the UI shows comes
// through here; the UI never recomputes model math on its own.

export interface DictionaryView {
  id: string;
  name: string;
  terms: string[][];
  gamma: number | null;
  context_model_trained: boolean;
  context_model_stale: boolean;
}

export interface SessionView {
  id: string;
  task: string;
  epsilon: number;
  labels: number;
  positive_labels: number;
  negative_labels: number;
  dictionaries: DictionaryView[];
  current_scheme: string | null;
  model_trained: boolean;
  model_stale: boolean;
  bow_trained: boolean;
  bow_stale: boolean;
  events: number;
}

export interface SessionSummary {
  id: string;
  task: string;
}

export interface LabelResponse {
  doc_id: string;
  label: number;
  labels: number;
}

export interface NextResponse {
  strategy: string;
  doc_ids: string[];
}

export interface Disagreement {
  doc_id: string;
  teacher_label: number;
  model_score: number;
}

export interface BlindnessView {
  disagreements: Disagreement[];
  training_error_rate: number;
}

export interface StatusView {
  converged: boolean;
  training_error_rate: number;
  epsilon: number;
  labels: number;
}

export interface ContextRow {
  percentile: number;
  probability: number;
  before: string;
  target: string;
  after: string;
  doc_id: string;
  start: number;
}

export interface ContextsResponse {
  term: string;
  occurrences: number;
  rows: ContextRow[];
  gamma: number | null;
  trigger_percent: number | null;
}

export interface Suggestion {
  term: string[];
  mean_probability: number;
  occurrences: number;
}

export interface SuggestionsResponse {
  dict_id: string;
  entries: Suggestion[];
}

export interface PrPoint {
  recall: number;
  precision: number;
}

export interface MetricsResponse {
  scheme: string;
  auroc: number;
  accuracy: number;
  pr_curve: PrPoint[];
  positives: number;
  negatives: number;
  nonzero_weights: number;
  eval_docs: number;
}

export interface DocView {
  id: string;
  text: string;
  tokens: string[];
  label: number | null;
}

export interface CalibrateResponse {
  dict_id: string;
  gamma: number;
  target: number;
  mean_smooth_matches: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, readonly code: string, message: string) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class Client {
  constructor(private base = "", private fetchFn: FetchLike = (...a) => fetch(...a)) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "content-type": "application/json" } };
    if (body !== undefined) init.body = JSON.stringify(body);
    const resp = await this.fetchFn(this.base + path, init);
    if (!resp.ok) {
      let code = "http_error";
      let message = `HTTP ${resp.status}`;
      try {
        const payload = await resp.json();
        code = payload.code ?? code;
        message = payload.error ?? JSON.stringify(payload);
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, code, message);
    }
    return resp.json() as Promise<T>;
  }

  listSessions(): Promise<{ sessions: SessionSummary[] }> {
    return this.request("GET", "/sessions");
  }

  createSession(task: string, opts: { epsilon?: number; seed?: number; auto_seed?: boolean } = {}): Promise<SessionView> {
    return this.request("POST", "/sessions", { task, ...opts });
  }

  getSession(id: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${id}`);
  }

  addLabel(id: string, docId: string, label: 0 | 1): Promise<LabelResponse> {
    return this.request("POST", `/sessions/${id}/labels`, { doc_id: docId, label });
  }

  nextDocs(id: string, strategy: string, count = 1, query?: string): Promise<NextResponse> {
    const params = new URLSearchParams({ strategy, count: String(count) });
    if (query) params.set("query", query);
    return this.request("GET", `/sessions/${id}/next?${params}`);
  }

  retrain(id: string, scheme: string): Promise<SessionView> {
    return this.request("POST", `/sessions/${id}/retrain`, { scheme });
  }

  blindness(id: string): Promise<BlindnessView> {
    return this.request("GET", `/sessions/${id}/blindness`);
  }

  status(id: string): Promise<StatusView> {
    return this.request("GET", `/sessions/${id}/status`);
  }

  putDictionary(id: string, dictId: string, name: string, terms: string[][], gamma?: number | null): Promise<SessionView> {
    const body: Record<string, unknown> = { name, terms };
    if (gamma != null) body.gamma = gamma;
    return this.request("PUT", `/sessions/${id}/dictionaries/${dictId}`, body);
  }

  deleteDictionary(id: string, dictId: string): Promise<SessionView> {
    return this.request("DELETE", `/sessions/${id}/dictionaries/${dictId}`);
  }

  trainContext(id: string, dictId: string): Promise<unknown> {
    return this.request("POST", `/sessions/${id}/dictionaries/${dictId}/train-context`, {});
  }

  calibrate(id: string, dictId: string, target?: number): Promise<CalibrateResponse> {
    return this.request("POST", `/sessions/${id}/dictionaries/${dictId}/calibrate`,
      target === undefined ? {} : { target });
  }

  contexts(id: string, dictId: string, term: string, limit = 40, gamma?: number): Promise<ContextsResponse> {
    const params = new URLSearchParams({ term, limit: String(limit) });
    if (gamma !== undefined) params.set("gamma", String(gamma));
    return this.request("GET", `/sessions/${id}/dictionaries/${dictId}/contexts?${params}`);
  }

  suggestions(id: string, dictId: string, k = 10): Promise<SuggestionsResponse> {
    return this.request("GET", `/sessions/${id}/dictionaries/${dictId}/suggestions?k=${k}`);
  }

  metrics(id: string, scheme: string): Promise<MetricsResponse> {
    return this.request("GET", `/sessions/${id}/metrics?scheme=${encodeURIComponent(scheme)}`);
  }

  getDoc(docId: string): Promise<DocView> {
    return this.request("GET", `/docs/${docId}`);
  }
}
