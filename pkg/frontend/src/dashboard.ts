/** Session dashboard: list existing sessions with status chips and a
 * create-session form seeded with example instructions. */

import type { ApiClient, SessionSummary } from "./api.js";

export const EXAMPLE_INSTRUCTIONS = [
  "Make a cocktail.",
  "Make a smoothie.",
  "Set the table for two.",
];

export interface DashboardCallbacks {
  onOpenSession(sessionId: string): void;
  onCreated(session: SessionSummary): void;
}

export async function renderDashboard(
  container: HTMLElement,
  api: ApiClient,
  callbacks: DashboardCallbacks,
): Promise<void> {
  const sessions = await api.listSessions();
  container.textContent = "";

  const form = document.createElement("form");
  form.className = "create-session";
  const input = document.createElement("input");
  input.type = "text";
  input.name = "instruction";
  input.placeholder = "What should the robot do?";
  form.appendChild(input);

  const picker = document.createElement("select");
  picker.className = "example-picker";
  const blank = document.createElement("option");
  blank.value = "";
  blank.textContent = "examples…";
  picker.appendChild(blank);
  for (const example of EXAMPLE_INSTRUCTIONS) {
    const option = document.createElement("option");
    option.value = example;
    option.textContent = example;
    picker.appendChild(option);
  }
  picker.addEventListener("change", () => {
    if (picker.value) input.value = picker.value;
  });
  form.appendChild(picker);

  const create = document.createElement("button");
  create.type = "submit";
  create.textContent = "Start session";
  form.appendChild(create);

  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    if (!input.value.trim()) return;
    const session = await api.createSession(input.value.trim());
    callbacks.onCreated(session);
  });
  container.appendChild(form);

  const list = document.createElement("ul");
  list.className = "session-list";
  for (const session of sessions) {
    const row = document.createElement("li");
    row.className = "session-row";
    row.dataset.sessionId = session.session_id;

    const chip = document.createElement("span");
    chip.className = `status-chip status-${session.status.toLowerCase()}`;
    chip.textContent = session.status;
    row.appendChild(chip);

    const text = document.createElement("span");
    text.className = "session-instruction";
    text.textContent = session.instruction;
    row.appendChild(text);

    const open = document.createElement("button");
    open.type = "button";
    open.textContent = "Open";
    open.addEventListener("click", () => callbacks.onOpenSession(session.session_id));
    row.appendChild(open);

    list.appendChild(row);
  }
  container.appendChild(list);
}
