import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient, parseSse } from "../src/api.js";
import type { ExecutionEvent } from "../src/api.js";
import { ExecutionMonitor } from "../src/monitor.js";

const TREE_XML =
  '<Root><Sequence name="s">' +
  '<Retry num_attempts="3"><Action name="insert banana"/></Retry>' +
  '<Condition name="lid closed"/>' +
  "</Sequence></Root>";

function makeMonitor(): { monitor: ExecutionMonitor; tree: HTMLElement; banner: HTMLElement } {
  const tree = document.createElement("div");
  const banner = document.createElement("div");
  return { monitor: new ExecutionMonitor(tree, banner, TREE_XML), tree, banner };
}

const ev = (partial: Partial<ExecutionEvent>, index = 0): ExecutionEvent => ({
  index,
  kind: "Enter",
  ...partial,
});

describe("ExecutionMonitor", () => {
  afterEach(() => vi.unstubAllGlobals());

  it("highlights nodes in trace order", () => {
    const { monitor } = makeMonitor();
    monitor.apply(ev({ kind: "Enter", path: "root" }, 0));
    monitor.apply(ev({ kind: "Enter", path: "root.0" }, 1));
    monitor.apply(ev({ kind: "PolicyInvoked", path: "root.0.0", payload: "p" }, 2));
    expect(monitor.touchedPaths).toEqual(["root", "root.0", "root.0.0"]);
  });

  it("shows retry attempt counters like 2/3", () => {
    const { monitor, tree } = makeMonitor();
    monitor.apply(ev({ kind: "PolicyInvoked", path: "root.0.0", payload: "p" }, 0));
    monitor.apply(ev({ kind: "PolicyInvoked", path: "root.0.0", payload: "p" }, 1));
    expect(monitor.attemptsFor("root.0.0")).toBe(2);
    const badge = tree.querySelector('[data-path="root.0.0"] .badge-status');
    expect(badge?.textContent).toBe("attempt 2/3");
  });

  it("shows condition verdicts", () => {
    const { monitor, tree } = makeMonitor();
    monitor.apply(ev({ kind: "ConditionJudged", path: "root.1", payload: "False" }, 0));
    const badge = tree.querySelector('[data-path="root.1"] .badge-status');
    expect(badge?.textContent).toBe("verdict: False");
  });

  it("renders a terminal banner with statistics", () => {
    const { monitor, banner } = makeMonitor();
    monitor.apply(
      ev({ kind: "Terminal", status: "Success", statistics: { runs: 5 } }, 0),
    );
    expect(banner.classList.contains("banner-success")).toBe(true);
    expect(banner.textContent).toContain("Success");
    expect(banner.textContent).toContain('"runs":5');
  });
});

describe("event delivery", () => {
  afterEach(() => vi.unstubAllGlobals());

  const sseBody = (events: ExecutionEvent[]): string =>
    events.map((e) => `id: ${e.index}\ndata: ${JSON.stringify(e)}\n\n`).join("");

  it("parses server-sent events", () => {
    const events = [
      ev({ kind: "Enter", path: "root" }, 0),
      ev({ kind: "Terminal", status: "Success" }, 1),
    ];
    expect(parseSse(sseBody(events))).toEqual(events);
  });

  it("falls back to polling when the stream request fails, resuming by index", async () => {
    const events = [
      ev({ kind: "Enter", path: "root" }, 0),
      ev({ kind: "Result", path: "root", payload: "Success" }, 1),
      ev({ kind: "Terminal", status: "Success", statistics: {} }, 2),
    ];
    let call = 0;
    const requestedIndexes: string[] = [];
    vi.stubGlobal("fetch", async (url: string) => {
      call += 1;
      requestedIndexes.push(new URL(url, "http://x").searchParams.get("from_index")!);
      if (call === 1) throw new Error("stream unavailable");
      if (call === 2) {
        return new Response(sseBody(events.slice(0, 1)), { status: 200 });
      }
      return new Response(sseBody(events.slice(1)), { status: 200 });
    });

    const seen: ExecutionEvent[] = [];
    const api = new ApiClient("http://service");
    await api.subscribeExecution("e1", (event) => seen.push(event), 5);
    expect(seen).toEqual(events);
    // the second poll resumed from the last delivered index
    expect(requestedIndexes).toEqual(["0", "0", "1"]);
  });
});
