// HTML renderers for the console. All pure string functions so they can be
// exercised without a browser. Every number shown in text also rides along
// in a data attribute at full precision, straight from the server response.

import {
  ApiError,
  BudgetStatus,
  HistogramResult,
  MeanResult,
  QuantileResult,
  QuerySuccess,
  RegressionResult,
} from "./api.js";
import { HistoryEntry, PreviewState } from "./session.js";

function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Exact decimal form for data attributes; survives Number() round trips. */
function raw(x: number): string {
  return String(x);
}

/** Short human form for visible text. Display only. */
function fmt(x: number): string {
  if (x === 0) return "0";
  return String(Number(x.toPrecision(6)));
}

function pct(part: number, whole: number): string {
  if (!(whole > 0)) return "0";
  return (Math.max(0, Math.min(1, part / whole)) * 100).toFixed(2);
}

export function renderGauge(budget: BudgetStatus | null): string {
  if (budget === null) {
    return `<div class="gauge gauge-empty">no dataset selected</div>`;
  }
  const { total, spent, remaining } = budget;
  const deltaLine =
    total.delta > 0
      ? `<div class="gauge-line">&delta; remaining ${fmt(remaining.delta)} of ${fmt(total.delta)}</div>`
      : `<div class="gauge-line">&delta; budget 0 (pure)</div>`;
  return (
    `<div class="gauge" data-dataset="${esc(budget.dataset_id)}"` +
    ` data-total-epsilon="${raw(total.epsilon)}" data-total-delta="${raw(total.delta)}"` +
    ` data-spent-epsilon="${raw(spent.epsilon)}" data-spent-delta="${raw(spent.delta)}"` +
    ` data-remaining-epsilon="${raw(remaining.epsilon)}" data-remaining-delta="${raw(remaining.delta)}"` +
    ` data-n-charges="${budget.n_charges}">` +
    `<div class="gauge-bar"><div class="gauge-fill" style="width:${pct(remaining.epsilon, total.epsilon)}%"></div></div>` +
    `<div class="gauge-line">&epsilon; remaining ${fmt(remaining.epsilon)} of ${fmt(total.epsilon)}` +
    ` (spent ${fmt(spent.epsilon)}, ${budget.n_charges} charge${budget.n_charges === 1 ? "" : "s"})</div>` +
    deltaLine +
    `</div>`
  );
}

export function renderPreview(state: PreviewState | null, budget: BudgetStatus | null): string {
  if (state === null) {
    return `<div class="preview preview-empty">move the budget sliders to see the charge</div>`;
  }
  if (state.kind === "zero-charge") {
    const after =
      budget === null
        ? ""
        : ` data-after-epsilon="${raw(budget.remaining.epsilon)}"` +
          ` data-after-delta="${raw(budget.remaining.delta)}"`;
    const text =
      budget === null
        ? "nothing to charge"
        : `remaining stays at &epsilon; ${fmt(budget.remaining.epsilon)}`;
    return `<div class="preview preview-zero" data-preview="zero-charge"${after}>zero-&epsilon; draft charges nothing; ${text}</div>`;
  }
  const o = state.outcome;
  const attrs =
    ` data-preview="server" data-accepted="${o.accepted}"` +
    ` data-charge-epsilon="${raw(state.charge.epsilon)}" data-charge-delta="${raw(state.charge.delta)}"` +
    ` data-after-epsilon="${raw(o.remaining_after.epsilon)}" data-after-delta="${raw(o.remaining_after.delta)}"` +
    ` data-spent-after-epsilon="${raw(o.spent_after.epsilon)}" data-spent-after-delta="${raw(o.spent_after.delta)}"`;
  if (!o.accepted) {
    return (
      `<div class="preview preview-rejected"${attrs}>` +
      `this charge would exceed the budget; remaining would need &epsilon; ${fmt(o.spent_after.epsilon)}` +
      ` against ${budget === null ? "?" : fmt(budget.total.epsilon)} total</div>`
    );
  }
  return (
    `<div class="preview preview-accepted"${attrs}>` +
    `after this charge: &epsilon; ${fmt(o.remaining_after.epsilon)} remaining` +
    (state.charge.delta > 0 ? `, &delta; ${fmt(o.remaining_after.delta)}` : "") +
    `</div>`
  );
}

function renderHistogram(r: HistogramResult): string {
  const peak = Math.max(...r.counts.map((c) => Math.abs(c)), 1e-300);
  const rows = r.counts
    .map((c, i) => {
      const lo = r.edges[i];
      const hi = r.edges[i + 1];
      return (
        `<tr data-bin="${i}" data-count="${raw(c)}">` +
        `<td class="edge">[${fmt(lo ?? NaN)}, ${fmt(hi ?? NaN)})</td>` +
        `<td class="bar-cell"><div class="bar" style="width:${pct(Math.max(0, c), peak)}%"></div></td>` +
        `<td class="count">${fmt(c)}</td></tr>`
      );
    })
    .join("");
  return (
    `<div class="result result-histogram" data-column="${esc(r.column)}"` +
    ` data-mechanism="${esc(r.mechanism)}" data-noise-scale="${raw(r.noise_scale)}">` +
    `<table class="bins"><tbody>${rows}</tbody></table>` +
    `<div class="result-meta">${esc(r.mechanism)} noise, scale ${fmt(r.noise_scale)}` +
    (r.renyi_alpha !== null ? `, order ${fmt(r.renyi_alpha)}` : "") +
    `</div></div>`
  );
}

function renderMean(r: MeanResult): string {
  return (
    `<div class="result result-mean" data-column="${esc(r.column)}" data-method="${esc(r.method)}"` +
    ` data-point="${raw(r.point)}" data-ci-lower="${raw(r.ci_lower)}" data-ci-upper="${raw(r.ci_upper)}"` +
    ` data-confidence="${raw(r.confidence)}">` +
    `<span class="point">${fmt(r.point)}</span>` +
    ` <span class="interval">[${fmt(r.ci_lower)}, ${fmt(r.ci_upper)}]</span>` +
    ` <span class="result-meta">${esc(r.method)}, ${fmt(r.confidence * 100)}% interval</span>` +
    `</div>`
  );
}

function renderQuantiles(r: QuantileResult): string {
  const rows = r.probabilities
    .map(
      (q, i) =>
        `<tr data-probability="${raw(q)}" data-value="${raw(r.values[i] ?? NaN)}">` +
        `<td>${fmt(q)}</td><td>${fmt(r.values[i] ?? NaN)}</td></tr>`,
    )
    .join("");
  return (
    `<div class="result result-quantile" data-column="${esc(r.column)}" data-mode="${esc(r.mode)}">` +
    `<table class="quantiles"><thead><tr><th>probability</th><th>value</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>` +
    `<div class="result-meta">${esc(r.mode)}, &epsilon; ${fmt(r.per_quantile_epsilon)} per quantile</div></div>`
  );
}

function renderRegression(r: RegressionResult): string {
  const rows = r.coefficients
    .map((c) => {
      const boot = c.ci_bootstrap;
      return (
        `<tr data-name="${esc(c.name)}" data-estimate="${raw(c.estimate)}"` +
        ` data-asym-lower="${raw(c.ci_asymptotic[0])}" data-asym-upper="${raw(c.ci_asymptotic[1])}"` +
        (boot ? ` data-boot-lower="${raw(boot[0])}" data-boot-upper="${raw(boot[1])}"` : "") +
        `><td>${esc(c.name)}</td><td>${fmt(c.estimate)}</td>` +
        `<td>[${fmt(c.ci_asymptotic[0])}, ${fmt(c.ci_asymptotic[1])}]</td>` +
        `<td>${boot ? `[${fmt(boot[0])}, ${fmt(boot[1])}]` : "n/a"}</td></tr>`
      );
    })
    .join("");
  return (
    `<div class="result result-regression" data-method="${esc(r.method)}" data-n-hat="${raw(r.n_hat)}">` +
    `<table class="coefficients"><thead>` +
    `<tr><th>coefficient</th><th>estimate</th><th>asymptotic CI</th><th>bootstrap CI</th></tr>` +
    `</thead><tbody>${rows}</tbody></table>` +
    `<div class="result-meta">${esc(r.method)}, ${fmt(r.confidence * 100)}% intervals</div></div>`
  );
}

export function renderError(e: ApiError): string {
  const remaining = e.remaining
    ? ` data-remaining-epsilon="${raw(e.remaining.epsilon)}" data-remaining-delta="${raw(e.remaining.delta)}"`
    : "";
  return (
    `<div class="result result-error" data-code="${esc(e.code)}"${remaining}>` +
    `<span class="code">${esc(e.code)}</span> ${esc(e.message)}` +
    (e.remaining ? `<div class="result-meta">remaining &epsilon; ${fmt(e.remaining.epsilon)}</div>` : "") +
    `</div>`
  );
}

export function renderResult(entry: HistoryEntry): string {
  if (!entry.ok) return renderError(entry.response as ApiError);
  const resp = entry.response as QuerySuccess;
  switch (resp.kind) {
    case "histogram":
      return renderHistogram(resp.result as HistogramResult);
    case "mean":
      return renderMean(resp.result as MeanResult);
    case "quantile":
      return renderQuantiles(resp.result as QuantileResult);
    case "regression":
      return renderRegression(resp.result as RegressionResult);
  }
}

export function renderHistory(history: readonly HistoryEntry[]): string {
  if (history.length === 0) {
    return `<div class="history history-empty">no queries yet</div>`;
  }
  const items = history
    .map((entry, i) => {
      const label = entry.ok
        ? (entry.response as QuerySuccess).query_id
        : `${(entry.response as ApiError).code}`;
      const kind = String(entry.request.kind ?? "?");
      return (
        `<li class="history-item ${entry.ok ? "ok" : "failed"}" data-index="${i}">` +
        `<span class="label">${esc(label)}</span> <span class="kind">${esc(kind)}</span>` +
        renderResult(entry) +
        `</li>`
      );
    })
    .join("");
  return `<ol class="history">${items}</ol>`;
}
