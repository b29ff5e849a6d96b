import { describe, expect, it } from "vitest";

import type { SessionView } from "../src/api.js";
import {
  contextExplorer, dictionaryEditor, escapeHtml, highlight, labelingPane,
  metricsPanel, prCurveSvg,
} from "../src/render.js";
import { initialState, withExplorer, withSession } from "../src/state.js";

function session(overrides: Partial<SessionView> = {}): SessionView {
  return {
    id: "s1", task: "demo", epsilon: 0.01, labels: 0, positive_labels: 0,
    negative_labels: 0, dictionaries: [], current_scheme: null,
    model_trained: false, model_stale: false, bow_trained: false,
    bow_stale: false, events: 1, ...overrides,
  };
}

const monthsDict = {
  id: "months", name: "months", terms: [["may"], ["june"]], gamma: 0.5,
  context_model_trained: true, context_model_stale: false,
};

describe("escaping and highlighting", () => {
  it("escapes markup in document text", () => {
    expect(escapeHtml("<script>alert(1)</script>")).not.toContain("<script>");
  });

  it("marks keyword hits and escapes the rest", () => {
    const html = highlight("May I <b>help</b> you", "may help");
    expect(html).toContain("<mark>May</mark>");
    expect(html).toContain("<mark>help</mark>");
    expect(html).not.toContain("<b>");
  });
});

describe("labeling pane", () => {
  it("shows the empty state before sampling", () => {
    const html = labelingPane(initialState());
    expect(html).toContain("Sample a document");
  });

  it("renders the notice when sampling is blocked", () => {
    const html = labelingPane({ ...initialState(), notice: "Train first: no model" });
    expect(html).toContain("Train first");
  });

  it("renders label controls around the current document", () => {
    const state = {
      ...initialState(),
      currentDoc: { id: "d1", text: "may i help you", tokens: [], label: null },
    };
    const html = labelingPane(state);
    expect(html).toContain('data-action="label-positive"');
    expect(html).toContain('data-action="label-negative"');
    expect(html).toContain("d1");
  });

  it("highlights keyword hits in keyword mode", () => {
    const state = {
      ...initialState(),
      strategy: "keyword" as const,
      keywordQuery: "may",
      currentDoc: { id: "d1", text: "may i help you", tokens: [], label: null },
    };
    expect(labelingPane(state)).toContain("<mark>may</mark>");
  });
});

describe("context explorer", () => {
  it("prompts to train when no context model exists", () => {
    const state = withSession(initialState(), session({
      dictionaries: [{ ...monthsDict, context_model_trained: false }],
    }));
    const html = contextExplorer(state);
    expect(html).toContain("No context model yet");
    expect(html).toContain('data-action="train-context"');
  });

  it("renders the trigger percentage straight from the service", () => {
    let state = withSession(initialState(), session({ dictionaries: [monthsDict] }));
    state = withExplorer(state, {
      term: "may", occurrences: 40, gamma: 0.01, trigger_percent: 7.5,
      rows: [{ percentile: 0, probability: 1.0, before: "b", target: "may",
               after: "a", doc_id: "d", start: 0 }],
    }, 0);
    const html = contextExplorer(state);
    expect(html).toContain("7.5% trigger");
    expect(html).toContain('data-action="slider"');
    expect(html).toContain('data-action="apply-gamma"');
  });

  it("sorts rows as given and marks the cut row", () => {
    let state = withSession(initialState(), session({ dictionaries: [monthsDict] }));
    state = withExplorer(state, {
      term: "may", occurrences: 2, gamma: null, trigger_percent: null,
      rows: [
        { percentile: 0, probability: 0.9, before: "", target: "may", after: "", doc_id: "d", start: 0 },
        { percentile: 50, probability: 0.1, before: "", target: "may", after: "", doc_id: "e", start: 1 },
      ],
    }, 1);
    const html = contextExplorer(state);
    expect(html.indexOf("9.000e-1")).toBeLessThan(html.indexOf("1.000e-1"));
    expect(html).toContain('class="cut"');
  });
});

describe("dictionary editor", () => {
  it("shows a stale badge when the context model is stale", () => {
    const state = withSession(initialState(), session({
      dictionaries: [{ ...monthsDict, context_model_stale: true }],
    }));
    expect(dictionaryEditor(state)).toContain("stale");
  });

  it("renders inline validation errors", () => {
    const state = {
      ...withSession(initialState(), session({ dictionaries: [monthsDict] })),
      dictError: 'duplicate term "may"',
    };
    const html = dictionaryEditor(state);
    expect(html).toContain('data-role="dict-error"');
    expect(html).toContain("duplicate term");
  });

  it("lists suggestions with accept buttons", () => {
    const state = {
      ...withSession(initialState(), session({ dictionaries: [monthsDict] })),
      suggestions: [{ term: ["saxophone"], mean_probability: 0.81, occurrences: 12 }],
    };
    const html = dictionaryEditor(state);
    expect(html).toContain("saxophone");
    expect(html).toContain('data-action="accept-suggestion"');
  });
});

describe("metrics panel", () => {
  const metrics = {
    scheme: "bow-tfidf", auroc: 0.93, accuracy: 0.97,
    pr_curve: [{ recall: 0.5, precision: 1.0 }, { recall: 1.0, precision: 0.5 }],
    positives: 10, negatives: 10, nonzero_weights: 42, eval_docs: 20,
  };

  it("shows the placeholder before any evaluation", () => {
    expect(metricsPanel(initialState())).toContain("No metrics yet");
  });

  it("overlays one polyline per evaluated scheme", () => {
    const state = {
      ...initialState(),
      metrics: {
        "bow-tfidf": metrics,
        "dictionaries-literal": { ...metrics, scheme: "dictionaries-literal" },
        "dictionaries-smoothed": { ...metrics, scheme: "dictionaries-smoothed" },
      },
    };
    const html = metricsPanel(state);
    expect(html.match(/<polyline/g)).toHaveLength(3);
    expect(html).toContain("0.9300");
  });

  it("links blindness rows to the offending document", () => {
    const state = {
      ...initialState(),
      blindness: {
        disagreements: [{ doc_id: "d7", teacher_label: 1, model_score: 0.2 }],
        training_error_rate: 0.1,
      },
    };
    const html = metricsPanel(state);
    expect(html).toContain('data-action="jump-to-doc"');
    expect(html).toContain('data-doc-id="d7"');
  });

  it("pr curve svg stays inside the viewbox", () => {
    const svg = prCurveSvg({ "bow-tfidf": metrics.pr_curve }, 360, 240);
    expect(svg).toContain("<svg");
    expect(svg).toContain("polyline");
  });
});
