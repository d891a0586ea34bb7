/** Question cards for the answer flow: one card per pending question with the
 * agents' analyses; the submit button stays disabled until every card is
 * filled, and server-side validation errors surface inline on their card. */

import type { AnswerItem, PendingQuestion } from "./api.js";

export interface QuestionCardList {
  root: HTMLElement;
  collectAnswers(): AnswerItem[];
  setCardError(label: string, message: string): void;
  clearErrors(): void;
  readonly submitButton: HTMLButtonElement;
}

export function renderQuestionCards(
  container: HTMLElement,
  questions: PendingQuestion[],
  onSubmit: (answers: AnswerItem[]) => void,
): QuestionCardList {
  container.textContent = "";
  const form = document.createElement("form");
  form.className = "question-cards";

  const inputs = new Map<string, HTMLInputElement>();
  const errors = new Map<string, HTMLElement>();

  for (const question of questions) {
    const card = document.createElement("section");
    card.className = "question-card";
    card.dataset.label = question.label;

    const heading = document.createElement("h3");
    heading.textContent = `${question.label}: ${question.text}`;
    card.appendChild(heading);

    const analyses = document.createElement("ul");
    analyses.className = "agent-analyses";
    for (const [agentId, analysis] of Object.entries(question.agent_analyses)) {
      const li = document.createElement("li");
      li.dataset.agent = agentId;
      li.textContent = `${agentId}: ${analysis}`;
      analyses.appendChild(li);
    }
    card.appendChild(analyses);

    const input = document.createElement("input");
    input.type = "text";
    input.name = question.label;
    input.placeholder = "your answer";
    input.addEventListener("input", updateSubmitState);
    card.appendChild(input);
    inputs.set(question.label, input);

    const error = document.createElement("p");
    error.className = "card-error";
    error.hidden = true;
    card.appendChild(error);
    errors.set(question.label, error);

    form.appendChild(card);
  }

  const submit = document.createElement("button");
  submit.type = "submit";
  submit.textContent = "Submit answers";
  submit.disabled = questions.length > 0;
  form.appendChild(submit);

  function updateSubmitState(): void {
    submit.disabled = Array.from(inputs.values()).some(
      (input) => input.value.trim() === "",
    );
  }

  function collectAnswers(): AnswerItem[] {
    return Array.from(inputs.entries()).map(([label, input]) => ({
      label,
      text: input.value.trim(),
    }));
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    if (!submit.disabled) onSubmit(collectAnswers());
  });

  container.appendChild(form);

  return {
    root: form,
    collectAnswers,
    setCardError(label, message) {
      const el = errors.get(label);
      if (el) {
        el.textContent = message;
        el.hidden = false;
      }
    },
    clearErrors() {
      for (const el of errors.values()) {
        el.textContent = "";
        el.hidden = true;
      }
    },
    submitButton: submit,
  };
}
