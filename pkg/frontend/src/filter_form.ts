// Form state -> canonical query JSON. Only fields the user actually filled
// end up on the wire, so the serialized spec round-trips through the server's
// strict validator unchanged.

import type { FilterSpecJson, TimeRangeJson } from "./types.js";

export interface FormState {
  preset: "all" | "last_7_days" | "last_30_days" | "custom";
  customStart: string; // yyyy-mm-dd from a date input
  customEnd: string;
  containsText: string;
  durationMinS: string; // seconds in the form, milliseconds on the wire
  durationMaxS: string;
  loggedInOnly: boolean;
  userId: string;
  minActions: string;
  containsAction: string;
  dwellAction: string;
  dwellMinS: string;
}

export function emptyFormState(): FormState {
  return {
    preset: "all",
    customStart: "",
    customEnd: "",
    containsText: "",
    durationMinS: "",
    durationMaxS: "",
    loggedInOnly: false,
    userId: "",
    minActions: "",
    containsAction: "",
    dwellAction: "",
    dwellMinS: "",
  };
}

const DAY_MS = 86_400_000;

function seconds(text: string): number | undefined {
  const trimmed = text.trim();
  if (trimmed === "") return undefined;
  const value = Number(trimmed);
  if (!Number.isFinite(value) || value < 0) return undefined;
  return Math.round(value * 1000);
}

function integer(text: string): number | undefined {
  const trimmed = text.trim();
  if (trimmed === "") return undefined;
  const value = Number(trimmed);
  if (!Number.isInteger(value) || value < 0) return undefined;
  return value;
}

export function buildFilterSpec(state: FormState): FilterSpecJson {
  const spec: FilterSpecJson = {};
  if (state.containsText.trim() !== "") {
    spec.contains_text = state.containsText.trim();
  }
  const minMs = seconds(state.durationMinS);
  const maxMs = seconds(state.durationMaxS);
  if (minMs !== undefined || maxMs !== undefined) {
    spec.session_duration = {};
    if (minMs !== undefined) spec.session_duration.min_ms = minMs;
    if (maxMs !== undefined) spec.session_duration.max_ms = maxMs;
  }
  if (state.loggedInOnly) {
    spec.logged_in_only = true;
  }
  if (state.userId.trim() !== "") {
    spec.user_id = state.userId.trim();
  }
  const minActions = integer(state.minActions);
  if (minActions !== undefined) {
    spec.min_actions_exclusive = minActions;
  }
  if (state.containsAction !== "") {
    spec.contains_action = state.containsAction;
  }
  const dwellMs = seconds(state.dwellMinS);
  if (dwellMs !== undefined) {
    spec.action_duration =
      state.dwellAction !== ""
        ? { action_id: state.dwellAction, min_ms: dwellMs }
        : { min_ms: dwellMs };
  }
  return spec;
}

export function buildTimeRange(state: FormState): TimeRangeJson {
  if (state.preset === "custom") {
    const range: TimeRangeJson = { preset: "custom" };
    const start = Date.parse(state.customStart); // yyyy-mm-dd parses as UTC midnight
    const end = Date.parse(state.customEnd);
    if (!Number.isNaN(start)) range.start_ts = start;
    if (!Number.isNaN(end)) range.end_ts = end + DAY_MS - 1; // inclusive end of day
    return range;
  }
  return { preset: state.preset };
}
