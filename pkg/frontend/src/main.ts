// Bootstrap: wires the store, the API client, and DOM event delegation.
// All numbers shown come from service payloads; this file only moves them.

import { ApiError, Client } from "./api.js";
import {
  Store, Strategy, addTerm, afterLabelSubmit, initialState, removeTerm,
  sliderGamma, withCurrentDoc, withExplorer, withNotice, withQueue,
  withSession,
} from "./state.js";
import {
  contextExplorer, dictionaryEditor, labelingPane, metricsPanel, statusBar,
} from "./render.js";

const client = new Client("");
const store = new Store(initialState());

function pane(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing pane #${id}`);
  return el;
}

function renderAll(): void {
  pane("status-bar").innerHTML = statusBar(store.state);
  pane("labeling-pane").innerHTML = labelingPane(store.state);
  pane("context-pane").innerHTML = contextExplorer(store.state);
  pane("dictionary-pane").innerHTML = dictionaryEditor(store.state);
  pane("metrics-pane").innerHTML = metricsPanel(store.state);
}

function notify(error: unknown): void {
  const message = error instanceof ApiError
    ? (error.status === 409 ? `Train first: ${error.message}` : error.message)
    : String(error);
  store.update((s) => withNotice(s, message));
}

async function refreshSession(): Promise<void> {
  const sid = store.state.sessionId;
  if (!sid) return;
  const session = await client.getSession(sid);
  store.update((s) => withSession(s, session));
}

async function loadDoc(docId: string): Promise<void> {
  const doc = await client.getDoc(docId);
  store.update((s) => withCurrentDoc(s, doc));
}

async function sample(): Promise<void> {
  const { sessionId, strategy, keywordQuery } = store.state;
  if (!sessionId) return;
  try {
    const resp = await client.nextDocs(sessionId, strategy, 5,
      strategy === "keyword" ? keywordQuery : undefined);
    store.update((s) => withQueue(withNotice(s, null), resp.doc_ids));
    if (resp.doc_ids.length > 0) await loadDoc(resp.doc_ids[0]);
  } catch (error) {
    notify(error);
  }
}

async function submitLabel(label: 0 | 1): Promise<void> {
  const { sessionId, currentDoc } = store.state;
  if (!sessionId || !currentDoc) return;
  try {
    await client.addLabel(sessionId, currentDoc.id, label);
    store.update(afterLabelSubmit);          // optimistic counter bump
    const next = store.state.queue[0];
    if (next) await loadDoc(next);
    await refreshSession();                  // reconcile against the server
  } catch (error) {
    notify(error);
  }
}

let sliderFetchToken = 0;

async function moveSlider(index: number): Promise<void> {
  const { sessionId, selectedDictionary, explorer } = store.state;
  if (!sessionId || !selectedDictionary || !explorer) return;
  const gamma = sliderGamma(explorer.rows, index);
  if (gamma == null) return;
  const token = ++sliderFetchToken;
  const resp = await client.contexts(sessionId, selectedDictionary,
    explorer.term, explorer.rows.length, gamma);
  if (token !== sliderFetchToken) return;    // a newer slider move won
  store.update((s) => withExplorer(s, resp, index));
}

async function explore(term: string): Promise<void> {
  const { sessionId, selectedDictionary } = store.state;
  if (!sessionId || !selectedDictionary || !term) return;
  try {
    const resp = await client.contexts(sessionId, selectedDictionary, term, 200);
    store.update((s) => withExplorer(s, resp, 0));
  } catch (error) {
    notify(error);
  }
}

async function mutateDictionary(terms: string[][], gamma?: number | null): Promise<void> {
  const { sessionId, selectedDictionary, session } = store.state;
  const dict = session?.dictionaries.find((d) => d.id === selectedDictionary);
  if (!sessionId || !selectedDictionary || !dict) return;
  const view = await client.putDictionary(sessionId, selectedDictionary,
    dict.name, terms, gamma ?? dict.gamma);
  store.update((s) => ({ ...withSession(s, view), dictError: null }));
}

function inputValue(role: string): string {
  const el = document.querySelector<HTMLInputElement>(`[data-role="${role}"]`);
  return el ? el.value : "";
}

async function handleAction(action: string, target: HTMLElement): Promise<void> {
  const state = store.state;
  const sid = state.sessionId;
  switch (action) {
    case "sample":
      store.update((s) => ({ ...s, keywordQuery: inputValue("keyword-query") }));
      await sample();
      break;
    case "label-positive":
      await submitLabel(1);
      break;
    case "label-negative":
      await submitLabel(0);
      break;
    case "skip": {
      store.update((s) => ({ ...s, currentDoc: null, queue: s.queue.slice(1) }));
      const next = store.state.queue[0];
      if (next) await loadDoc(next);
      break;
    }
    case "retrain":
      if (!sid) return;
      try {
        const scheme = (document.querySelector<HTMLSelectElement>('[data-role="scheme"]'))?.value
          ?? "bow-tfidf";
        const view = await client.retrain(sid, scheme);
        store.update((s) => withSession(withNotice(s, null), view));
      } catch (error) {
        notify(error);
      }
      break;
    case "select-dictionary":
      store.update((s) => ({
        ...s,
        selectedDictionary: (target as HTMLSelectElement).value,
        explorer: null,
        suggestions: [],
        dictError: null,
      }));
      break;
    case "create-dictionary": {
      if (!sid) return;
      const name = inputValue("new-dict-name").trim();
      if (!name) return;
      const dictId = name.toLowerCase().replace(/[^a-z0-9]+/g, "-");
      try {
        const view = await client.putDictionary(sid, dictId, name, [[name.toLowerCase()]]);
        store.update((s) => ({ ...withSession(s, view), selectedDictionary: dictId }));
      } catch (error) {
        notify(error);
      }
      break;
    }
    case "delete-dictionary":
      if (!sid || !state.selectedDictionary) return;
      try {
        const view = await client.deleteDictionary(sid, state.selectedDictionary);
        store.update((s) => withSession({ ...s, selectedDictionary: null }, view));
      } catch (error) {
        notify(error);
      }
      break;
    case "add-term": {
      const dict = state.session?.dictionaries.find((d) => d.id === state.selectedDictionary);
      if (!dict) return;
      const result = addTerm(dict.terms, inputValue("new-term"));
      if (result.error) {
        store.update((s) => ({ ...s, dictError: result.error }));
        return;
      }
      await mutateDictionary(result.terms);
      break;
    }
    case "remove-term": {
      const dict = state.session?.dictionaries.find((d) => d.id === state.selectedDictionary);
      if (!dict) return;
      const index = Number(target.dataset.index);
      const result = removeTerm(dict.terms, index);
      if (result.error) {
        store.update((s) => ({ ...s, dictError: result.error }));
        return;
      }
      await mutateDictionary(result.terms);
      break;
    }
    case "accept-suggestion": {
      const dict = state.session?.dictionaries.find((d) => d.id === state.selectedDictionary);
      const termText = target.dataset.term;
      if (!dict || !termText) return;
      const result = addTerm(dict.terms, termText);
      if (result.error) {
        store.update((s) => ({ ...s, dictError: result.error }));
        return;
      }
      await mutateDictionary(result.terms);
      break;
    }
    case "load-suggestions":
      if (!sid || !state.selectedDictionary) return;
      try {
        const resp = await client.suggestions(sid, state.selectedDictionary, 10);
        store.update((s) => ({ ...s, suggestions: resp.entries }));
      } catch (error) {
        notify(error);
      }
      break;
    case "train-context":
      if (!sid || !state.selectedDictionary) return;
      try {
        await client.trainContext(sid, state.selectedDictionary);
        await refreshSession();
      } catch (error) {
        notify(error);
      }
      break;
    case "explore":
      await explore(inputValue("explorer-term").trim());
      break;
    case "apply-gamma": {
      const dict = state.session?.dictionaries.find((d) => d.id === state.selectedDictionary);
      if (!dict || state.explorer?.gamma == null) return;
      await mutateDictionary(dict.terms, state.explorer.gamma);
      break;
    }
    case "load-metrics": {
      if (!sid) return;
      const scheme = target.dataset.scheme;
      if (!scheme) return;
      try {
        const resp = await client.metrics(sid, scheme);
        store.update((s) => ({ ...s, metrics: { ...s.metrics, [scheme]: resp } }));
      } catch (error) {
        notify(error);
      }
      break;
    }
    case "load-blindness":
      if (!sid) return;
      try {
        const resp = await client.blindness(sid);
        store.update((s) => ({ ...s, blindness: resp }));
      } catch (error) {
        notify(error);
      }
      break;
    case "jump-to-doc": {
      const docId = target.dataset.docId;
      if (docId) await loadDoc(docId);
      break;
    }
    default:
      break;
  }
}

function attach(): void {
  document.body.addEventListener("click", (evt) => {
    const el = (evt.target as HTMLElement).closest<HTMLElement>("[data-action]");
    if (!el) return;
    const action = el.dataset.action;
    if (!action || el.tagName === "SELECT" || el.tagName === "INPUT") return;
    evt.preventDefault();
    void handleAction(action, el);
  });
  document.body.addEventListener("change", (evt) => {
    const el = evt.target as HTMLElement;
    const action = el.dataset.action;
    if (action === "strategy") {
      store.update((s) => ({ ...s, strategy: (el as HTMLSelectElement).value as Strategy }));
    } else if (action === "select-dictionary") {
      void handleAction(action, el);
    }
  });
  document.body.addEventListener("input", (evt) => {
    const el = evt.target as HTMLElement;
    if (el.dataset.action === "slider") {
      void moveSlider(Number((el as HTMLInputElement).value));
    }
  });
  store.subscribe(renderAll);
}

async function boot(): Promise<void> {
  attach();
  const { sessions } = await client.listSessions();
  const session = sessions.length > 0
    ? await client.getSession(sessions[0].id)
    : await client.createSession("teaching session");
  store.update((s) => withSession(s, session));
}

if (typeof document !== "undefined" && document.getElementById("status-bar")) {
  void boot().catch((error) => notify(error));
}
