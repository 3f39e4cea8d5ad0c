// Thin fetch client for the analysis API (same-origin).

import type {
  ActionCatalogEntry,
  FilterSpecJson,
  FlowGraph,
  SessionDetail,
  SessionsPage,
  TimeRangeJson,
} from "./types.js";

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let message = `${resp.status}`;
    try {
      const body = await resp.json();
      message = body.message ?? message;
    } catch {
      // keep the status text
    }
    throw new Error(message);
  }
  return (await resp.json()) as T;
}

export async function getActions(): Promise<ActionCatalogEntry[]> {
  return asJson(await fetch("/api/actions"));
}

export interface QueryBody {
  time_range?: TimeRangeJson;
  filter?: FilterSpecJson;
  page?: { offset?: number; limit?: number };
  max_steps?: number;
}

function post(path: string, body: QueryBody): Promise<Response> {
  return fetch(path, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
}

export async function querySessions(body: QueryBody): Promise<SessionsPage> {
  return asJson(await post("/api/sessions", body));
}

export async function queryFlow(body: QueryBody): Promise<FlowGraph> {
  return asJson(await post("/api/flow", body));
}

export async function getSessionDetail(id: string): Promise<SessionDetail> {
  return asJson(await fetch(`/api/sessions/${encodeURIComponent(id)}`));
}
