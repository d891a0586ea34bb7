/** Single-page console wiring: dashboard -> session view (tree + question
 * cards) -> execution monitor. All state is a projection of service
 * responses; every refresh re-reads from the API. */

import { ApiClient, ApiError } from "./api.js";
import type { AnswerItem, ExecutionRequest } from "./api.js";
import { renderQuestionCards } from "./cards.js";
import { renderDashboard } from "./dashboard.js";
import { ExecutionMonitor } from "./monitor.js";
import { parseTreeXml, renderTree } from "./tree.js";

export class ConsoleApp {
  readonly api: ApiClient;

  constructor(
    private root: HTMLElement,
    baseUrl: string,
  ) {
    this.api = new ApiClient(baseUrl);
  }

  private section(className: string): HTMLElement {
    const el = document.createElement("div");
    el.className = className;
    this.root.appendChild(el);
    return el;
  }

  async showDashboard(): Promise<void> {
    this.root.textContent = "";
    const container = this.section("dashboard");
    await renderDashboard(container, this.api, {
      onOpenSession: (sessionId) => void this.showSession(sessionId),
      onCreated: (session) => void this.showSession(session.session_id),
    });
  }

  /** Drive one session screen: advance if needed, render the current draft
   * tree and any pending question cards. */
  async showSession(sessionId: string): Promise<void> {
    this.root.textContent = "";
    let summary = await this.api.getSession(sessionId);

    const header = this.section("session-header");
    const treeContainer = this.section("tree-view");
    const cardsContainer = this.section("answer-flow");
    const footer = this.section("session-footer");

    if (summary.status === "AwaitingModel") {
      header.textContent = `${summary.instruction} — thinking…`;
      summary = await this.api.advance(sessionId);
    }
    header.textContent = `${summary.instruction} — ${summary.status} (turn ${summary.turn_count})`;
    header.dataset.status = summary.status;

    if (summary.turn_count > 0) {
      renderTree(treeContainer, parseTreeXml(await this.api.currentTree(sessionId)));
    }

    if (summary.status === "AwaitingHuman") {
      const questions = await this.api.pendingQuestions(sessionId);
      const cards = renderQuestionCards(cardsContainer, questions, (answers) =>
        void this.submitAnswers(sessionId, answers, cards.setCardError),
      );
    } else if (summary.status === "Converged") {
      const done = document.createElement("p");
      done.className = "converged-note";
      done.textContent = "Plan converged.";
      cardsContainer.appendChild(done);

      const runButton = document.createElement("button");
      runButton.type = "button";
      runButton.className = "run-button";
      runButton.textContent = "Run plan";
      footer.appendChild(runButton);
    }

    const back = document.createElement("button");
    back.type = "button";
    back.className = "back-button";
    back.textContent = "Back to dashboard";
    back.addEventListener("click", () => void this.showDashboard());
    footer.appendChild(back);
  }

  private async submitAnswers(
    sessionId: string,
    answers: AnswerItem[],
    setCardError: (label: string, message: string) => void,
  ): Promise<void> {
    try {
      await this.api.postAnswers(sessionId, answers);
    } catch (error) {
      if (error instanceof ApiError) {
        // surface IncompleteAnswers inline on the missing card(s)
        const match = /missing: \[(.*)\]/.exec(error.detail);
        if (match) {
          for (const raw of match[1].split(",")) {
            setCardError(raw.trim().replace(/^'|'$/g, ""), error.detail);
          }
          return;
        }
      }
      throw error;
    }
    await this.showSession(sessionId); // triggers the next advance + re-render
  }

  /** Open the execution monitor for a finished plan. */
  async monitorExecution(
    sessionId: string,
    request: Omit<ExecutionRequest, "session_id" | "tree_xml">,
    pollMs = 2000,
  ): Promise<ExecutionMonitor> {
    const treeXml = await this.api.finalize(sessionId);
    this.root.textContent = "";
    const treeContainer = this.section("tree-view monitor");
    const banner = this.section("terminal-banner");
    const monitor = new ExecutionMonitor(treeContainer, banner, treeXml);
    const started = await this.api.startExecution({ tree_xml: treeXml, ...request });
    await monitor.follow(this.api, started.execution_id, pollMs);
    return monitor;
  }
}

/** Browser entry point (tests construct ConsoleApp directly instead). */
export function mount(): void {
  const root = document.getElementById("app");
  if (root) void new ConsoleApp(root, "").showDashboard();
}
