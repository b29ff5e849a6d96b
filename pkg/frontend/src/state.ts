// View state and its pure transitions. The server is the source of truth;
// the only optimistic update is the label counter, reconciled on the next
// session refresh.

import type {
  BlindnessView, ContextsResponse, DocView, MetricsResponse, SessionView,
  Suggestion,
} from "./api.js";

export type Strategy = "uncertainty" | "disagreement" | "keyword";

export interface ExplorerState {
  term: string;
  rows: ContextsResponse["rows"];
  occurrences: number;
  gamma: number | null;
  triggerPercent: number | null;
  sliderIndex: number;
}

export interface ViewState {
  sessionId: string | null;
  session: SessionView | null;
  strategy: Strategy;
  keywordQuery: string;
  queue: string[];
  currentDoc: DocView | null;
  selectedDictionary: string | null;
  explorer: ExplorerState | null;
  suggestions: Suggestion[];
  blindness: BlindnessView | null;
  metrics: Record<string, MetricsResponse>;
  notice: string | null;
  dictError: string | null;
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    session: null,
    strategy: "uncertainty",
    keywordQuery: "",
    queue: [],
    currentDoc: null,
    selectedDictionary: null,
    explorer: null,
    suggestions: [],
    blindness: null,
    metrics: {},
    notice: null,
    dictError: null,
  };
}

export type Listener = (state: ViewState) => void;

export class Store {
  private listeners: Listener[] = [];
  constructor(public state: ViewState = initialState()) {}

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  update(fn: (state: ViewState) => ViewState): void {
    this.state = fn(this.state);
    for (const listener of this.listeners) listener(this.state);
  }
}

export function withSession(state: ViewState, session: SessionView): ViewState {
  const next = { ...state, sessionId: session.id, session };
  if (next.selectedDictionary &&
      !session.dictionaries.some((d) => d.id === next.selectedDictionary)) {
    next.selectedDictionary = null;
    next.explorer = null;
    next.suggestions = [];
  }
  if (!next.selectedDictionary && session.dictionaries.length > 0) {
    next.selectedDictionary = session.dictionaries[0].id;
  }
  return next;
}

/** Optimistic label submission: bump the counter, drop the queue head. */
export function afterLabelSubmit(state: ViewState): ViewState {
  const session = state.session
    ? { ...state.session, labels: state.session.labels + 1, model_stale: true }
    : null;
  return { ...state, session, currentDoc: null, queue: state.queue.slice(1) };
}

export function withQueue(state: ViewState, docIds: string[]): ViewState {
  return {
    ...state,
    queue: docIds,
    notice: docIds.length === 0 ? "No unlabeled documents for this strategy." : null,
  };
}

export function withCurrentDoc(state: ViewState, doc: DocView | null): ViewState {
  return { ...state, currentDoc: doc };
}

export function withNotice(state: ViewState, notice: string | null): ViewState {
  return { ...state, notice };
}

export function withExplorer(state: ViewState, resp: ContextsResponse,
                             sliderIndex: number): ViewState {
  return {
    ...state,
    explorer: {
      term: resp.term,
      rows: resp.rows,
      occurrences: resp.occurrences,
      gamma: resp.gamma,
      // displayed verbatim from the service; the client never counts rows
      triggerPercent: resp.trigger_percent,
      sliderIndex,
    },
  };
}

/** Gamma for a slider position: the probability of the row at that rank. */
export function sliderGamma(rows: ContextsResponse["rows"], index: number): number | null {
  if (rows.length === 0) return null;
  const clamped = Math.max(0, Math.min(rows.length - 1, index));
  return rows[clamped].probability;
}

/** Client-side dictionary edits (term strings only, never model math). */
export function parseTerm(text: string): string[] {
  return text.toLowerCase().split(/\s+/).filter((t) => t.length > 0);
}

export function addTerm(terms: string[][], text: string): { terms: string[][]; error: string | null } {
  const term = parseTerm(text);
  if (term.length === 0) return { terms, error: "term is empty" };
  if (terms.some((t) => t.join(" ") === term.join(" "))) {
    return { terms, error: `duplicate term "${term.join(" ")}"` };
  }
  return { terms: [...terms, term], error: null };
}

export function removeTerm(terms: string[][], index: number): { terms: string[][]; error: string | null } {
  if (terms.length <= 1) {
    return { terms, error: "dictionary must be nonempty" };
  }
  return { terms: terms.filter((_, i) => i !== index), error: null };
}
