/** Execution monitor: projects the event stream onto the rendered tree —
 * active-node highlight, retry attempt counters, condition verdicts — and
 * shows a terminal banner with the run statistics. */

import type { ApiClient, ExecutionEvent } from "./api.js";
import type { TreeNode } from "./tree.js";
import { parseTreeXml, renderTree, setNodeStatus } from "./tree.js";

export class ExecutionMonitor {
  private attempts = new Map<string, number>();
  /** child path -> num_attempts of its Retry parent */
  private retryMax = new Map<string, number>();
  /** paths in the order they were touched by events, for tests/inspection */
  readonly touchedPaths: string[] = [];

  constructor(
    private treeContainer: HTMLElement,
    private banner: HTMLElement,
    treeXml: string,
  ) {
    const tree = parseTreeXml(treeXml);
    renderTree(this.treeContainer, tree);
    this.indexRetries(tree);
    this.banner.textContent = "";
    this.banner.className = "terminal-banner";
  }

  private indexRetries(node: TreeNode): void {
    if (node.kind === "Retry" && node.children.length === 1) {
      const max = Number(node.attributes["num_attempts"] ?? "1");
      this.retryMax.set(node.children[0].path, max);
    }
    for (const child of node.children) this.indexRetries(child);
  }

  apply(event: ExecutionEvent): void {
    if (event.kind === "Terminal") {
      this.banner.classList.add(
        event.status === "Success" ? "banner-success" : "banner-failure",
      );
      const stats = event.statistics ?? {};
      this.banner.textContent = `${event.status} — ${JSON.stringify(stats)}`;
      return;
    }
    const path = event.path;
    if (!path) return;
    this.touchedPaths.push(path);

    if (event.kind === "PolicyInvoked") {
      const seen = (this.attempts.get(path) ?? 0) + 1;
      this.attempts.set(path, seen);
      const max = this.retryMax.get(path);
      const label = max ? `attempt ${seen}/${max}` : `attempt ${seen}`;
      setNodeStatus(this.treeContainer, path, label, true);
    } else if (event.kind === "ConditionJudged") {
      setNodeStatus(this.treeContainer, path, `verdict: ${event.payload}`, true);
    } else if (event.kind === "Result") {
      setNodeStatus(this.treeContainer, path, event.payload ?? "", false);
    } else if (event.kind === "Enter") {
      setNodeStatus(this.treeContainer, path, "…", true);
    } else {
      // Warning / BudgetExhausted and any future kinds
      setNodeStatus(this.treeContainer, path, `${event.kind}: ${event.payload}`, true);
    }
  }

  /** Subscribe to the execution's event stream (polling fallback inside). */
  async follow(api: ApiClient, executionId: string, pollMs = 2000): Promise<void> {
    await api.subscribeExecution(executionId, (event) => this.apply(event), pollMs);
  }

  attemptsFor(path: string): number {
    return this.attempts.get(path) ?? 0;
  }
}
