import { describe, expect, it } from "vitest";

import { buildFilterSpec, buildTimeRange, emptyFormState } from "../src/filter_form.js";
import loggedInFilter from "./fixtures/filter_logged_in.json";
import longDwellFilter from "./fixtures/filter_long_dwell.json";

describe("buildFilterSpec", () => {
  it("serializes an empty form to an empty spec", () => {
    expect(buildFilterSpec(emptyFormState())).toEqual({});
  });

  it("reproduces the logged-in-only scenario exactly", () => {
    const state = emptyFormState();
    state.loggedInOnly = true;
    expect(buildFilterSpec(state)).toEqual(loggedInFilter);
  });

  it("reproduces the 30s-dwell scenario exactly", () => {
    const state = emptyFormState();
    state.dwellAction = "view_record";
    state.dwellMinS = "30";
    expect(buildFilterSpec(state)).toEqual(longDwellFilter);
  });

  it("converts duration seconds to milliseconds", () => {
    const state = emptyFormState();
    state.durationMinS = "1";
    state.durationMaxS = "600";
    expect(buildFilterSpec(state)).toEqual({
      session_duration: { min_ms: 1000, max_ms: 600000 },
    });
  });

  it("keeps only filled fields", () => {
    const state = emptyFormState();
    state.containsText = "  religion  ";
    state.userId = "u7";
    state.minActions = "5";
    state.containsAction = "view_record";
    expect(buildFilterSpec(state)).toEqual({
      contains_text: "religion",
      user_id: "u7",
      min_actions_exclusive: 5,
      contains_action: "view_record",
    });
  });

  it("ignores unparseable numbers", () => {
    const state = emptyFormState();
    state.durationMinS = "soon";
    state.minActions = "-3";
    expect(buildFilterSpec(state)).toEqual({});
  });

  it("supports an untargeted dwell filter", () => {
    const state = emptyFormState();
    state.dwellMinS = "30";
    expect(buildFilterSpec(state)).toEqual({ action_duration: { min_ms: 30000 } });
  });
});

describe("buildTimeRange", () => {
  it("passes presets through", () => {
    const state = emptyFormState();
    expect(buildTimeRange(state)).toEqual({ preset: "all" });
    state.preset = "last_7_days";
    expect(buildTimeRange(state)).toEqual({ preset: "last_7_days" });
  });

  it("builds inclusive custom ranges in UTC", () => {
    const state = emptyFormState();
    state.preset = "custom";
    state.customStart = "2014-04-01";
    state.customEnd = "2014-08-31";
    expect(buildTimeRange(state)).toEqual({
      preset: "custom",
      start_ts: Date.UTC(2014, 3, 1),
      end_ts: Date.UTC(2014, 7, 31, 23, 59, 59, 999),
    });
  });
});
