// Wire types mirroring the server's canonical JSON encodings.

export interface ActionCatalogEntry {
  action_id: string;
  labels: Record<string, string>;
}

export interface FlowNode {
  step: number;
  action_id: string;
  count: number;
}

export interface FlowEdge {
  step: number;
  from_action_id: string;
  to_action_id: string;
  count: number;
}

export interface FlowGraph {
  max_steps: number;
  session_total: number;
  action_order: string[];
  nodes: FlowNode[];
  edges: FlowEdge[];
  endings: Record<string, number>;
}

export interface FilterSpecJson {
  contains_text?: string;
  session_duration?: { min_ms?: number; max_ms?: number };
  logged_in_only?: boolean;
  user_id?: string;
  min_actions_exclusive?: number;
  contains_action?: string;
  action_duration?: { action_id?: string; min_ms: number };
}

export interface TimeRangeJson {
  preset: "all" | "last_7_days" | "last_30_days" | "custom";
  start_ts?: number;
  end_ts?: number;
  now?: number;
}

export interface SessionSummary {
  session_id: string;
  logged_in: boolean;
  start_ts: number;
  duration_ms: number;
  action_count: number;
}

export interface SessionsPage {
  total: number;
  sessions: SessionSummary[];
}

export interface SessionDetailAction {
  step_index: number;
  action_id: string;
  labels: Record<string, string>;
  timestamp: number;
  duration_ms: number | null;
  entities: Record<string, string[]>;
  url: string;
}

export interface SessionDetail {
  session_id: string;
  user_id: string | null;
  start_ts: number;
  end_ts: number;
  duration_ms: number;
  action_count: number;
  actions: SessionDetailAction[];
}

export function label(labels: Record<string, string>, actionId: string): string {
  return labels.en ?? Object.values(labels)[0] ?? actionId;
}
