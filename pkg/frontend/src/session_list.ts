// Session list rendering helpers (pure HTML string builders) and the unfold
// cache: a session's detail is fetched once and reused on re-unfold.

import type { SessionDetail, SessionSummary } from "./types.js";
import { label } from "./types.js";

export function formatTimestamp(ms: number): string {
  return new Date(ms).toISOString().replace("T", " ").slice(0, 19) + " UTC";
}

export function formatDuration(ms: number | null): string {
  if (ms === null) return "–";
  if (ms < 1000) return `${ms} ms`;
  const s = Math.round(ms / 1000);
  if (s < 60) return `${s} s`;
  const m = Math.floor(s / 60);
  return `${m} min ${s % 60} s`;
}

function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function summaryRowHtml(s: SessionSummary): string {
  return (
    `<tr class="session-row" data-session-id="${escapeHtml(s.session_id)}">` +
    `<td class="unfold-cell">▸</td>` +
    `<td>${formatTimestamp(s.start_ts)}</td>` +
    `<td>${escapeHtml(s.session_id)}</td>` +
    `<td>${s.logged_in ? "yes" : "no"}</td>` +
    `<td>${s.action_count}</td>` +
    `<td>${formatDuration(s.duration_ms)}</td>` +
    `</tr>`
  );
}

export function entityHtml(entities: Record<string, string[]>): string {
  const parts: string[] = [];
  for (const [name, values] of Object.entries(entities)) {
    for (const value of values) {
      parts.push(
        `<span class="entity"><span class="entity-name">${escapeHtml(name)}</span>` +
          `=${escapeHtml(value)}</span>`,
      );
    }
  }
  return parts.join(" ");
}

export function detailHtml(detail: SessionDetail): string {
  const rows = detail.actions
    .map(
      (a) =>
        `<tr class="action-row">` +
        `<td>${a.step_index}</td>` +
        `<td>${escapeHtml(label(a.labels, a.action_id))}</td>` +
        `<td>${entityHtml(a.entities)}</td>` +
        `<td>${formatDuration(a.duration_ms)}</td>` +
        `<td class="url">${escapeHtml(a.url)}</td>` +
        `</tr>`,
    )
    .join("");
  return (
    `<table class="detail-table"><thead><tr>` +
    `<th>step</th><th>action</th><th>entities</th><th>duration</th><th>url</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

export class UnfoldCache {
  private cache = new Map<string, Promise<SessionDetail>>();

  constructor(private fetcher: (id: string) => Promise<SessionDetail>) {}

  get(id: string): Promise<SessionDetail> {
    let hit = this.cache.get(id);
    if (!hit) {
      hit = this.fetcher(id).catch((err) => {
        this.cache.delete(id); // do not cache failures
        throw err;
      });
      this.cache.set(id, hit);
    }
    return hit;
  }

  clear(): void {
    this.cache.clear();
  }
}
