import { describe, expect, it } from "vitest";

import {
  UnfoldCache,
  detailHtml,
  formatDuration,
  formatTimestamp,
  summaryRowHtml,
} from "../src/session_list.js";
import type { SessionDetail } from "../src/types.js";
import detailFixture from "./fixtures/session_detail_religion.json";

const detail = detailFixture as SessionDetail;

describe("detailHtml", () => {
  it("shows the extracted search term of an unfolded session", () => {
    const html = detailHtml(detail);
    expect(html).toContain("religion");
    expect(html).toContain("search_term");
    expect(html).toContain("Simple search from the homepage");
  });

  it("renders one row per action with step indices", () => {
    const html = detailHtml(detail);
    expect(html.match(/class="action-row"/g)).toHaveLength(2);
    expect(html).toContain("<td>1</td>");
    expect(html).toContain("<td>2</td>");
  });

  it("shows an absent duration as a dash", () => {
    expect(formatDuration(null)).toBe("–");
    const html = detailHtml(detail);
    expect(html).toContain("<td>–</td>"); // the final view_record has no duration
  });

  it("escapes markup in urls and entities", () => {
    const vicious: SessionDetail = {
      ...detail,
      actions: [
        {
          ...detail.actions[0],
          url: "/x?<script>alert(1)</script>",
          entities: { term: ['<img src="x">'] },
        },
      ],
    };
    const html = detailHtml(vicious);
    expect(html).not.toContain("<script>");
    expect(html).not.toContain('<img src="x">');
  });
});

describe("summaryRowHtml", () => {
  it("carries the fields of a summary", () => {
    const html = summaryRowHtml({
      session_id: "s1",
      logged_in: true,
      start_ts: 1398938400000,
      duration_ms: 61000,
      action_count: 4,
    });
    expect(html).toContain('data-session-id="s1"');
    expect(html).toContain("yes");
    expect(html).toContain("<td>4</td>");
    expect(html).toContain("1 min 1 s");
  });
});

describe("formatters", () => {
  it("formats timestamps as UTC", () => {
    expect(formatTimestamp(1398938400000)).toBe("2014-05-01 10:00:00 UTC");
  });

  it("formats durations humanely", () => {
    expect(formatDuration(450)).toBe("450 ms");
    expect(formatDuration(30000)).toBe("30 s");
    expect(formatDuration(600000)).toBe("10 min 0 s");
  });
});

describe("UnfoldCache", () => {
  it("fetches each session once", async () => {
    let calls = 0;
    const cache = new UnfoldCache(async (id) => {
      calls += 1;
      return { ...detail, session_id: id };
    });
    const first = await cache.get("s1");
    const second = await cache.get("s1");
    expect(first).toBe(second);
    expect(calls).toBe(1);
    await cache.get("s2");
    expect(calls).toBe(2);
  });

  it("does not cache failures", async () => {
    let calls = 0;
    const cache = new UnfoldCache(async () => {
      calls += 1;
      if (calls === 1) throw new Error("boom");
      return detail;
    });
    await expect(cache.get("s1")).rejects.toThrow("boom");
    await expect(cache.get("s1")).resolves.toBe(detail);
    expect(calls).toBe(2);
  });
});
