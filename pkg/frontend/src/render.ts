// HTML renderers. Pure string-in string-out so ordering and layout are
// snapshot-testable without a browser.

import { MedicResponse, ResultItem } from "./api.js";

export const CONFIDENCE_BAR_WIDTH_PX = 100;

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function confidenceBarWidth(score: number): number {
  const clamped = Math.min(1, Math.max(0, score));
  return Math.round(clamped * CONFIDENCE_BAR_WIDTH_PX);
}

export function renderConfidence(score: number): string {
  const width = confidenceBarWidth(score);
  return (
    `<span class="confidence">` +
    `<span class="confidence-value">${score.toFixed(3)}</span>` +
    `<span class="confidence-track" style="width: ${CONFIDENCE_BAR_WIDTH_PX}px">` +
    `<span class="confidence-fill" style="width: ${width}px"></span>` +
    `</span></span>`
  );
}

export function sourceLabel(item: ResultItem): string {
  const repo = item.source.repository;
  const where = repo === null ? "pasted text" : repo;
  return `${where} #${item.source.index + 1}`;
}

export function renderResultCard(item: ResultItem): string {
  const before = item.context_before
    ? `<p class="context context-before">${escapeHtml(item.context_before)}</p>`
    : "";
  const after = item.context_after
    ? `<p class="context context-after">${escapeHtml(item.context_after)}</p>`
    : "";
  return (
    `<article class="result-card">` +
    `<header class="card-header">${renderConfidence(item.score)}` +
    `<span class="source-label">${escapeHtml(sourceLabel(item))}</span></header>` +
    before +
    `<p class="highlighted">${escapeHtml(item.sentence)}</p>` +
    after +
    `</article>`
  );
}

export function renderResults(response: MedicResponse): string {
  if (response.items.length === 0) {
    return `<p class="empty">No matching sentences.</p>`;
  }
  // Cards render strictly in response order; the API owns the ranking.
  return response.items.map(renderResultCard).join("\n");
}

export function renderError(message: string): string {
  return `<div class="error-banner" role="alert">${escapeHtml(message)}</div>`;
}

export function renderRepositoryOptions(names: string[], selected: string): string {
  return names
    .map((name) => {
      const sel = name === selected ? ` selected` : "";
      return `<option value="${escapeHtml(name)}"${sel}>${escapeHtml(name)}</option>`;
    })
    .join("");
}
