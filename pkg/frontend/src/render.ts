// Pure HTML renderers: every view is a function of plain data, so the
// rendering rules are testable without a browser.

import { SentencePrediction, Task } from "./api.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

const DISCOURSE_COLORS = [
  "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1",
  "#76b7b2", "#edc948", "#9c755f",
];

function labelColor(label: string): string {
  let hash = 0;
  for (const ch of label) hash = (hash * 31 + ch.charCodeAt(0)) >>> 0;
  return DISCOURSE_COLORS[hash % DISCOURSE_COLORS.length];
}

function argmaxLabel(dist: Record<string, number>): string {
  let best = "";
  let bestP = -1;
  for (const [label, p] of Object.entries(dist)) {
    if (p > bestP) {
      best = label;
      bestP = p;
    }
  }
  return best;
}

/** A sentence is highlighted as a claim exactly when claim_prob > 0.5. */
export function isHighlighted(sentence: SentencePrediction): boolean {
  return sentence.claim_prob !== null && sentence.claim_prob > 0.5;
}

export function renderPrediction(title: string, sentences: SentencePrediction[]): string {
  const rows = sentences.map((s) => {
    const prob = s.claim_prob === null ? "" : s.claim_prob.toFixed(3);
    const highlighted = isHighlighted(s);
    const intensity = s.claim_prob === null ? 0 : Math.round(s.claim_prob * 100);
    const classes = highlighted ? "sentence claim-highlight" : "sentence";
    const style = highlighted
      ? ` style="background: rgba(255, 196, 0, ${(intensity / 100) * 0.6})"`
      : "";
    let badge = "";
    if (s.discourse_dist) {
      const label = argmaxLabel(s.discourse_dist);
      badge = `<span class="discourse" style="background:${labelColor(label)}">` +
        `${escapeHtml(label)}</span> `;
    }
    const claimBadge = s.claim ? `<span class="claim-badge">claim</span> ` : "";
    return (
      `<li class="${classes}"${style} data-index="${s.index}" title="claim p=${prob}">` +
      `${badge}${claimBadge}<span class="text">${escapeHtml(s.text)}</span>` +
      `<span class="prob">${prob}</span></li>`
    );
  });
  const heading = title ? `<h2>${escapeHtml(title)}</h2>` : "";
  return `${heading}<ol class="prediction">${rows.join("")}</ol>`;
}

/** Sentences exactly as the server split them; the UI never re-splits. */
export function renderTask(task: Task, selected: readonly boolean[]): string {
  const rows = task.sentences.map((text, i) => {
    const cls = selected[i] ? "sentence selectable selected" : "sentence selectable";
    return (
      `<li class="${cls}" data-index="${i}">` +
      `<span class="text">${escapeHtml(text)}</span></li>`
    );
  });
  return (
    `<h2>${escapeHtml(task.title)}</h2>` +
    `<p class="hint">Select every sentence that states a claim. ` +
    `Selecting none is a valid answer.</p>` +
    `<ol class="task">${rows.join("")}</ol>`
  );
}

export function renderError(status: number | null, message: string): string {
  const text = status === 503 ? "model unavailable" : message;
  const label = status === null ? "network error" : `error ${status}`;
  return `<div class="error" role="alert"><strong>${escapeHtml(label)}:</strong> ` +
    `${escapeHtml(text)}</div>`;
}

export function renderCompletion(count: number): string {
  return `<div class="done"><h2>All tasks annotated</h2>` +
    `<p>${count} submissions recorded. Thank you.</p></div>`;
}

export function renderInstructions(): string {
  return `
<section class="instructions">
  <h2>Annotation guide</h2>
  <p>You will see the title and abstract of a publication, one sentence per
  line. Mark every sentence that states a claim.</p>
  <h3>What counts as a claim</h3>
  <p>A sentence is a claim when it does at least one of the following:</p>
  <ul>
    <li>states that something is better than something else,</li>
    <li>proposes something new, or</li>
    <li>reports a new finding or a cause-and-effect relationship.</li>
  </ul>
  <p>An abstract can contain several claims, one claim, or none at all.</p>
  <h3>Worked examples</h3>
  <p class="example is-claim">"These results demonstrate that early treatment
  halves the relapse rate." &mdash; <em>claim</em> (new finding, causal).</p>
  <p class="example is-claim">"We introduce a faster protocol for genome-wide
  screening." &mdash; <em>claim</em> (proposes something new).</p>
  <p class="example not-claim">"Patients were randomized into two groups."
  &mdash; <em>not a claim</em> (describes method).</p>
  <p class="example not-claim">"Cardiovascular disease is a leading cause of
  death." &mdash; <em>not a claim</em> (background knowledge).</p>
  <p>Start annotating from the <a href="#/annotate">annotation page</a>.</p>
</section>`;
}
