import { describe, expect, it } from "vitest";

import { RequestGate } from "../src/state.js";

describe("RequestGate", () => {
  it("marks only the newest request as current", () => {
    const gate = new RequestGate();
    const first = gate.begin();
    const second = gate.begin();
    expect(gate.isCurrent(first)).toBe(false);
    expect(gate.isCurrent(second)).toBe(true);
  });

  it("drops a late response for superseded filters", async () => {
    const gate = new RequestGate();
    const applied: string[] = [];

    async function submit(name: string, delayMs: number): Promise<void> {
      const id = gate.begin();
      await new Promise((resolve) => setTimeout(resolve, delayMs));
      if (!gate.isCurrent(id)) return; // stale
      applied.push(name);
    }

    // the first submit resolves after the second: its response must be dropped
    await Promise.all([submit("slow-old", 30), submit("fast-new", 1)]);
    expect(applied).toEqual(["fast-new"]);
  });
});
