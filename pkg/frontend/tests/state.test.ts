import { describe, expect, it } from "vitest";

import type { ContextsResponse, SessionView } from "../src/api.js";
import {
  Store, addTerm, afterLabelSubmit, initialState, removeTerm, sliderGamma,
  withExplorer, withQueue, withSession,
} from "../src/state.js";

function sessionView(overrides: Partial<SessionView> = {}): SessionView {
  return {
    id: "s1", task: "demo", epsilon: 0.01, labels: 10, positive_labels: 5,
    negative_labels: 5, dictionaries: [], current_scheme: null,
    model_trained: false, model_stale: false, bow_trained: false,
    bow_stale: false, events: 1, ...overrides,
  };
}

describe("session state", () => {
  it("selects the first dictionary when one appears", () => {
    const state = withSession(initialState(), sessionView({
      dictionaries: [{ id: "months", name: "months", terms: [["may"]],
        gamma: null, context_model_trained: false, context_model_stale: true }],
    }));
    expect(state.selectedDictionary).toBe("months");
  });

  it("drops the selection when the dictionary disappears", () => {
    let state = withSession(initialState(), sessionView({
      dictionaries: [{ id: "months", name: "months", terms: [["may"]],
        gamma: null, context_model_trained: false, context_model_stale: true }],
    }));
    state = withSession(state, sessionView({ dictionaries: [] }));
    expect(state.selectedDictionary).toBeNull();
    expect(state.explorer).toBeNull();
  });

  it("optimistically bumps the label count and advances the queue", () => {
    let state = withSession(initialState(), sessionView({ labels: 10 }));
    state = withQueue(state, ["d1", "d2"]);
    state = afterLabelSubmit(state);
    expect(state.session?.labels).toBe(11);
    expect(state.session?.model_stale).toBe(true);
    expect(state.queue).toEqual(["d2"]);
    expect(state.currentDoc).toBeNull();
  });

  it("shows an empty-state notice when sampling returns nothing", () => {
    const state = withQueue(initialState(), []);
    expect(state.notice).toMatch(/No unlabeled documents/);
  });

  it("store notifies subscribers on update", () => {
    const store = new Store(initialState());
    let seen = 0;
    store.subscribe(() => { seen += 1; });
    store.update((s) => ({ ...s, keywordQuery: "x" }));
    expect(seen).toBe(1);
    expect(store.state.keywordQuery).toBe("x");
  });
});

describe("explorer state", () => {
  const rows = [
    { percentile: 0, probability: 0.9, before: "", target: "may", after: "", doc_id: "a", start: 0 },
    { percentile: 25, probability: 0.5, before: "", target: "may", after: "", doc_id: "b", start: 0 },
    { percentile: 50, probability: 0.1, before: "", target: "may", after: "", doc_id: "c", start: 0 },
    { percentile: 75, probability: 0.05, before: "", target: "may", after: "", doc_id: "d", start: 0 },
  ];

  it("maps slider positions onto row probabilities", () => {
    expect(sliderGamma(rows, 0)).toBe(0.9);
    expect(sliderGamma(rows, 2)).toBe(0.1);
    expect(sliderGamma(rows, 99)).toBe(0.05); // clamped
    expect(sliderGamma([], 0)).toBeNull();
  });

  it("stores the service-computed trigger percent verbatim", () => {
    const resp: ContextsResponse = {
      term: "may", occurrences: 4, rows, gamma: 0.5, trigger_percent: 50.0,
    };
    const state = withExplorer(initialState(), resp, 1);
    expect(state.explorer?.triggerPercent).toBe(50.0);
    expect(state.explorer?.sliderIndex).toBe(1);
  });
});

describe("dictionary editing", () => {
  it("rejects duplicate terms", () => {
    const result = addTerm([["may"]], "May");
    expect(result.error).toMatch(/duplicate/);
    expect(result.terms).toEqual([["may"]]);
  });

  it("tokenizes new terms to lowercase word lists", () => {
    const result = addTerm([["may"]], "Kettle Drum");
    expect(result.error).toBeNull();
    expect(result.terms).toEqual([["may"], ["kettle", "drum"]]);
  });

  it("blocks removing the last term", () => {
    const result = removeTerm([["may"]], 0);
    expect(result.error).toBe("dictionary must be nonempty");
    expect(result.terms).toEqual([["may"]]);
  });

  it("removes by index otherwise", () => {
    const result = removeTerm([["may"], ["june"]], 0);
    expect(result.error).toBeNull();
    expect(result.terms).toEqual([["june"]]);
  });
});
