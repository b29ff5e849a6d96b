// HTML renderers for the four panes. Pure string-in/string-out so they are
// testable without a DOM; main.ts owns attachment and event delegation.

import type { MetricsResponse, PrPoint } from "./api.js";
import type { ViewState } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Wrap occurrences of the query tokens in <mark>, escaping everything. */
export function highlight(text: string, query: string): string {
  const tokens = query.toLowerCase().split(/\s+/).filter((t) => t.length > 0);
  if (tokens.length === 0) return escapeHtml(text);
  const pattern = tokens.map((t) => t.replace(/[.*+?^${}()|[\]\\]/g, "\\$&")).join("|");
  const re = new RegExp(`(${pattern})`, "gi");
  return text
    .split(re)
    .map((part, i) => (i % 2 === 1 ? `<mark>${escapeHtml(part)}</mark>` : escapeHtml(part)))
    .join("");
}

function staleBadge(stale: boolean): string {
  return stale ? '<span class="badge stale">stale</span>' : "";
}

export function statusBar(state: ViewState): string {
  const s = state.session;
  if (!s) return '<span class="muted">no session</span>';
  return [
    `<strong>${escapeHtml(s.task)}</strong>`,
    `<span data-role="label-count">${s.labels} labels</span>`,
    `<span>${s.positive_labels}+ / ${s.negative_labels}-</span>`,
    s.current_scheme
      ? `<span>model: ${escapeHtml(s.current_scheme)}${staleBadge(s.model_stale)}</span>`
      : '<span class="muted">model: none</span>',
  ].join(" · ");
}

export function labelingPane(state: ViewState): string {
  const parts: string[] = ['<h2>Label</h2>'];
  parts.push(`
    <div class="controls">
      <select data-action="strategy">
        ${["uncertainty", "disagreement", "keyword"].map((s) =>
          `<option value="${s}"${s === state.strategy ? " selected" : ""}>${s}</option>`).join("")}
      </select>
      <input data-role="keyword-query" placeholder="keyword query"
             value="${escapeHtml(state.keywordQuery)}"
             ${state.strategy === "keyword" ? "" : "hidden"}>
      <button data-action="sample">next document</button>
    </div>`);
  if (state.notice) {
    parts.push(`<p class="notice">${escapeHtml(state.notice)}</p>`);
  }
  if (state.currentDoc) {
    const doc = state.currentDoc;
    const body = state.strategy === "keyword" && state.keywordQuery
      ? highlight(doc.text, state.keywordQuery)
      : escapeHtml(doc.text);
    parts.push(`
      <article class="doc" data-doc-id="${escapeHtml(doc.id)}">
        <header>${escapeHtml(doc.id)}</header>
        <p>${body}</p>
      </article>
      <div class="controls">
        <button data-action="label-positive">positive</button>
        <button data-action="label-negative">negative</button>
        <button data-action="skip">skip</button>
      </div>`);
  } else if (!state.notice) {
    parts.push('<p class="muted">Sample a document to start labeling.</p>');
  }
  return parts.join("\n");
}

export function contextExplorer(state: ViewState): string {
  const parts: string[] = ["<h2>Context explorer</h2>"];
  const dict = state.session?.dictionaries.find((d) => d.id === state.selectedDictionary);
  if (!dict) {
    return parts.concat('<p class="muted">Select a dictionary first.</p>').join("\n");
  }
  if (!dict.context_model_trained) {
    return parts.concat(`
      <p class="notice">No context model yet for <strong>${escapeHtml(dict.name)}</strong>.</p>
      <button data-action="train-context">train context model</button>`).join("\n");
  }
  parts.push(`
    <div class="controls">
      <input data-role="explorer-term" placeholder="term, e.g. may"
             value="${state.explorer ? escapeHtml(state.explorer.term) : ""}">
      <button data-action="explore">rank contexts</button>
      <button data-action="train-context">retrain${staleBadge(dict.context_model_stale)}</button>
    </div>`);
  const ex = state.explorer;
  if (!ex) return parts.join("\n");
  if (ex.rows.length === 0) {
    parts.push('<p class="muted">Term not found in the corpus.</p>');
    return parts.join("\n");
  }
  const trigger = ex.triggerPercent == null
    ? '<span class="muted">move the slider to pick a threshold</span>'
    : `<span data-role="trigger-percent">${ex.triggerPercent.toFixed(1)}% trigger</span>`;
  parts.push(`
    <div class="controls">
      <input type="range" data-action="slider" min="0" max="${ex.rows.length - 1}"
             value="${ex.sliderIndex}">
      ${trigger}
      <button data-action="apply-gamma"${ex.gamma == null ? " disabled" : ""}>
        apply γ=${ex.gamma == null ? "?" : ex.gamma.toExponential(3)}
      </button>
    </div>
    <table class="contexts">
      <thead><tr><th>perc.</th><th>prob.</th><th>before</th><th>target</th><th>after</th></tr></thead>
      <tbody>
        ${ex.rows.map((r, i) => `
          <tr class="${i === ex.sliderIndex ? "cut" : ""}">
            <td>${r.percentile.toFixed(1)}</td>
            <td>${r.probability.toExponential(3)}</td>
            <td class="before">${escapeHtml(r.before)}</td>
            <td class="target">${escapeHtml(r.target)}</td>
            <td class="after">${escapeHtml(r.after)}</td>
          </tr>`).join("")}
      </tbody>
    </table>`);
  return parts.join("\n");
}

export function dictionaryEditor(state: ViewState): string {
  const parts: string[] = ["<h2>Dictionaries</h2>"];
  const session = state.session;
  if (!session) return parts.concat('<p class="muted">No session.</p>').join("\n");
  parts.push(`
    <div class="controls">
      <select data-action="select-dictionary">
        ${session.dictionaries.map((d) =>
          `<option value="${escapeHtml(d.id)}"${d.id === state.selectedDictionary ? " selected" : ""}>
             ${escapeHtml(d.name)}</option>`).join("")}
      </select>
      <input data-role="new-dict-name" placeholder="new dictionary name">
      <button data-action="create-dictionary">create</button>
    </div>`);
  const dict = session.dictionaries.find((d) => d.id === state.selectedDictionary);
  if (!dict) return parts.concat('<p class="muted">No dictionary selected.</p>').join("\n");
  parts.push(`
    <h3>${escapeHtml(dict.name)} ${staleBadge(dict.context_model_stale)}
        ${dict.gamma != null ? `<span class="badge">γ=${dict.gamma.toExponential(2)}</span>` : ""}
    </h3>
    <ul class="terms">
      ${dict.terms.map((t, i) => `
        <li>${escapeHtml(t.join(" "))}
            <button data-action="remove-term" data-index="${i}">×</button></li>`).join("")}
    </ul>
    <div class="controls">
      <input data-role="new-term" placeholder="add term">
      <button data-action="add-term">add</button>
      <button data-action="delete-dictionary">delete dictionary</button>
    </div>`);
  if (state.dictError) {
    parts.push(`<p class="error" data-role="dict-error">${escapeHtml(state.dictError)}</p>`);
  }
  parts.push(`
    <h3>Suggestions</h3>
    <div class="controls"><button data-action="load-suggestions">suggest terms</button></div>
    <ul class="suggestions">
      ${state.suggestions.map((s) => `
        <li>${escapeHtml(s.term.join(" "))}
            <span class="muted">p̄=${s.mean_probability.toFixed(4)} · ${s.occurrences}×</span>
            <button data-action="accept-suggestion" data-term="${escapeHtml(s.term.join(" "))}">accept</button>
        </li>`).join("")}
    </ul>`);
  return parts.join("\n");
}

const SCHEME_COLORS: Record<string, string> = {
  "bow-tfidf": "#3366cc",
  "dictionaries-literal": "#ff8800",
  "dictionaries-smoothed": "#22aa44",
};

export function prCurveSvg(curves: Record<string, PrPoint[]>, width = 360, height = 240): string {
  const pad = 30;
  const sx = (r: number) => pad + r * (width - 2 * pad);
  const sy = (p: number) => height - pad - p * (height - 2 * pad);
  const lines = Object.entries(curves).map(([scheme, points]) => {
    const path = points.map((pt) => `${sx(pt.recall).toFixed(1)},${sy(pt.precision).toFixed(1)}`).join(" ");
    return `<polyline fill="none" stroke="${SCHEME_COLORS[scheme] ?? "#888"}"
              stroke-width="2" points="${path}"><title>${escapeHtml(scheme)}</title></polyline>`;
  });
  return `
    <svg viewBox="0 0 ${width} ${height}" role="img" aria-label="precision-recall curves">
      <rect x="${pad}" y="${pad}" width="${width - 2 * pad}" height="${height - 2 * pad}"
            fill="none" stroke="#ccc"/>
      <text x="${width / 2}" y="${height - 6}" text-anchor="middle" class="axis">recall</text>
      <text x="10" y="${height / 2}" transform="rotate(-90 10 ${height / 2})"
            text-anchor="middle" class="axis">precision</text>
      ${lines.join("\n")}
    </svg>`;
}

export function metricsPanel(state: ViewState): string {
  const parts: string[] = ["<h2>Metrics</h2>"];
  parts.push(`
    <div class="controls">
      ${Object.keys(SCHEME_COLORS).map((scheme) =>
        `<button data-action="load-metrics" data-scheme="${scheme}">
           <span class="dot" style="background:${SCHEME_COLORS[scheme]}"></span>${scheme}</button>`).join("")}
      <button data-action="load-blindness">training errors</button>
    </div>`);
  const schemes = Object.keys(state.metrics);
  if (schemes.length === 0 && !state.blindness) {
    parts.push('<p class="muted">No metrics yet. Evaluate a scheme to see PR curves.</p>');
    return parts.join("\n");
  }
  if (schemes.length > 0) {
    parts.push(`
      <table class="metrics">
        <thead><tr><th>scheme</th><th>AUROC</th><th>accuracy</th><th>weights</th></tr></thead>
        <tbody>
          ${schemes.map((s) => {
            const m = state.metrics[s] as MetricsResponse;
            return `<tr><td>${escapeHtml(s)}</td><td>${m.auroc.toFixed(4)}</td>
                    <td>${m.accuracy.toFixed(4)}</td><td>${m.nonzero_weights}</td></tr>`;
          }).join("")}
        </tbody>
      </table>`);
    const curves: Record<string, PrPoint[]> = {};
    for (const s of schemes) curves[s] = state.metrics[s].pr_curve;
    parts.push(prCurveSvg(curves));
  }
  if (state.blindness) {
    const b = state.blindness;
    parts.push(`<h3>Training errors (rate ${b.training_error_rate.toFixed(3)})</h3>`);
    if (b.disagreements.length === 0) {
      parts.push('<p class="muted">The model agrees with every teacher label.</p>');
    } else {
      parts.push(`
        <ul class="blindness">
          ${b.disagreements.map((d) => `
            <li><a href="#" data-action="jump-to-doc" data-doc-id="${escapeHtml(d.doc_id)}">
                 ${escapeHtml(d.doc_id)}</a>
                teacher=${d.teacher_label} score=${d.model_score.toFixed(3)}</li>`).join("")}
        </ul>`);
    }
  }
  return parts.join("\n");
}
