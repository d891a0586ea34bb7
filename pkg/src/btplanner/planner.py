"""Interactive planning loop: draft a behavior tree, analyze its
uncertainty into clarification questions, route them through the agent
chain and then the human, fold the answers into the prerequisites, and
redraft until no questions remain or the turn budget runs out.

Each turn is a pure function of (instruction, prerequisites): the drafting
prompt carries the full prerequisites ledger rather than a conversational
history, so sessions replay exactly.
"""

from __future__ import annotations

import re
import uuid
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Callable, Protocol, Sequence

from . import bt
from .agents import (
    AgentRegistry,
    Answer,
    AnswerSource,
    ChainRunResult,
    ChainStrategy,
    ClarificationQuestion,
    DEFAULT_AGENTS,
    run_chain,
)
from .providers import ChatProvider, ChatRequest


class PlannerError(Exception):
    pass


class DraftParseFailure(PlannerError):
    pass


class QuestionParseFailure(PlannerError):
    pass


class NotConverged(PlannerError):
    pass


class UnknownLabel(PlannerError):
    pass


class IncompleteAnswers(PlannerError):
    def __init__(self, missing: Sequence[str]) -> None:
        self.missing = list(missing)
        super().__init__(f"missing answers for labels: {', '.join(self.missing)}")


class SessionStatus(str, Enum):
    AWAITING_MODEL = "AwaitingModel"
    AWAITING_HUMAN = "AwaitingHuman"
    CONVERGED = "Converged"
    ABORTED = "Aborted"


@dataclass(frozen=True)
class PlannerConfig:
    max_turns: int = 5
    temperature: float = 0.0
    moa_enabled: bool = True
    strategy: ChainStrategy = ChainStrategy.SEQUENTIAL_CHAIN

    def __post_init__(self) -> None:
        if self.max_turns < 1:
            raise ValueError("max_turns must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass
class Turn:
    index: int
    bt_draft: bt.BehaviorTree
    questions: list[ClarificationQuestion]
    answers: list[Answer]
    residual_for_human: list[ClarificationQuestion]
    agent_verdicts: ChainRunResult | None = None


@dataclass
class PlanningSession:
    session_id: str
    instruction: str
    config: PlannerConfig
    prerequisites: list[tuple[str, str, str]] = field(default_factory=list)  # (label, answer, source)
    turns: list[Turn] = field(default_factory=list)
    status: SessionStatus = SessionStatus.AWAITING_MODEL
    question_counter: int = 0
    abort_reason: str = ""
    raw_transcript: list[str] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    on_event: Callable[[dict], None] | None = None

    def all_questions(self) -> list[ClarificationQuestion]:
        return [q for turn in self.turns for q in turn.questions]

    def all_answers(self) -> list[Answer]:
        return [a for turn in self.turns for a in turn.answers]

    def record(self, event: dict) -> None:
        self.events.append(event)
        if self.on_event is not None:
            self.on_event(event)


class HumanAnswerSource(Protocol):
    def answer(self, questions: Sequence[ClarificationQuestion]) -> list[Answer]: ...


@dataclass
class ScriptedHuman:
    """Answers from a label -> text mapping; used by fixtures and tests."""

    responses: dict[str, str]

    def answer(self, questions: Sequence[ClarificationQuestion]) -> list[Answer]:
        return [
            Answer(q.label, self.responses.get(q.label, "yes"), AnswerSource.HUMAN)
            for q in questions
        ]


# ---------------------------------------------------------------------------
# Prompt assets

def _load_prompt(name: str) -> str:
    return resources.files("btplanner.prompts").joinpath(name).read_text(encoding="utf-8")


def render_prerequisites(prerequisites: Sequence[tuple[str, str, str]]) -> str:
    if not prerequisites:
        return "(none)"
    return "\n".join(f"{label}: {text}" for label, text, _ in prerequisites)


def render_draft_prompt(instruction: str, prerequisites: Sequence[tuple[str, str, str]]) -> str:
    return _load_prompt("draft.txt").format(
        instruction=instruction, prerequisites=render_prerequisites(prerequisites)
    )


def render_uncertainty_prompt(
    instruction: str,
    bt_xml: str,
    prerequisites: Sequence[tuple[str, str, str]],
) -> str:
    return _load_prompt("uncertainty.txt").format(
        instruction=instruction,
        bt_xml=bt_xml,
        prerequisites=render_prerequisites(prerequisites),
    )


_FENCE_RE = re.compile(r"^```[a-zA-Z]*\n(.*)\n```$", re.DOTALL)
_QUESTION_LINE_RE = re.compile(r"^\s*(?:Q\d+\s*[:.)]\s*|[-*]\s+|\d+[.)]\s+)?(.*\S)\s*$")


def strip_code_fence(text: str) -> str:
    match = _FENCE_RE.match(text.strip())
    return match.group(1) if match else text.strip()


def parse_question_lines(raw: str) -> list[str]:
    """One question per nonempty line; leading bullet/label markers are
    stripped. The literal NONE means zero questions."""
    stripped = raw.strip()
    if not stripped:
        raise QuestionParseFailure("empty uncertainty-analysis response")
    if stripped.upper() == "NONE":
        return []
    questions = []
    for line in stripped.splitlines():
        match = _QUESTION_LINE_RE.match(line)
        if match:
            questions.append(match.group(1))
    if not questions:
        raise QuestionParseFailure(f"no questions recognized in {raw!r}")
    return questions


# ---------------------------------------------------------------------------
# Session operations

def start_session(
    instruction: str,
    config: PlannerConfig | None = None,
    session_id: str | None = None,
) -> PlanningSession:
    if not instruction.strip():
        raise ValueError("instruction must be nonempty")
    session = PlanningSession(
        session_id=session_id or uuid.uuid4().hex[:12],
        instruction=instruction,
        config=config or PlannerConfig(),
    )
    session.record({"event": "session_started", "instruction": instruction})
    return session


def draft_turn(
    session: PlanningSession,
    chat: ChatProvider,
    registry: AgentRegistry = DEFAULT_AGENTS,
) -> Turn:
    if session.status is not SessionStatus.AWAITING_MODEL:
        raise PlannerError(f"cannot draft in status {session.status.value}")
    if len(session.turns) >= session.config.max_turns:
        raise PlannerError("turn budget exhausted")

    tree = _request_draft(session, chat)
    bt_xml = bt.serialize_bt(tree)
    question_texts = _request_questions(session, chat, bt_xml)

    questions = []
    for text in question_texts:
        session.question_counter += 1
        questions.append(
            ClarificationQuestion(
                label=f"Q{session.question_counter}",
                text=text,
                origin_turn=len(session.turns) + 1,
            )
        )

    answers: list[Answer] = []
    residual = list(questions)
    chain_result: ChainRunResult | None = None
    if session.config.moa_enabled and questions:
        chain_result = run_chain(
            questions,
            registry,
            chat,
            strategy=session.config.strategy,
            prerequisites=render_prerequisites(session.prerequisites),
        )
        answers = list(chain_result.answers)
        residual = list(chain_result.residual)
        for answer in answers:
            session.prerequisites.append(
                (answer.question_label, answer.text, f"Agent({answer.agent_id})")
            )

    turn = Turn(
        index=len(session.turns) + 1,
        bt_draft=tree,
        questions=questions,
        answers=answers,
        residual_for_human=residual,
        agent_verdicts=chain_result,
    )
    session.turns.append(turn)

    if not questions:
        session.status = SessionStatus.CONVERGED
    elif residual:
        session.status = SessionStatus.AWAITING_HUMAN
    else:
        session.status = SessionStatus.AWAITING_MODEL

    session.record(
        {
            "event": "turn_drafted",
            "turn": turn.index,
            "bt_xml": bt_xml,
            "questions": [(q.label, q.text) for q in questions],
            "agent_answers": [
                (a.question_label, a.text, a.agent_id or "") for a in answers
            ],
            "residual": [q.label for q in residual],
            "status": session.status.value,
        }
    )
    return turn


def _request_draft(session: PlanningSession, chat: ChatProvider) -> bt.BehaviorTree:
    prompt = render_draft_prompt(session.instruction, session.prerequisites)
    last_error: Exception | None = None
    for attempt in range(2):  # one automatic reprompt on malformed output
        raw = chat.complete(
            ChatRequest(prompt=prompt, temperature=session.config.temperature)
        ).text
        session.raw_transcript.append(raw)
        try:
            return bt.parse_bt_xml(
                strip_code_fence(raw),
                tree_id=f"{session.session_id}-t{len(session.turns) + 1}",
                source=bt.TreeSource.DRAFTED,
            )
        except bt.BtError as exc:
            last_error = exc
            prompt = (
                f"{prompt}\n\nYour previous output was not a valid behavior tree "
                f"({exc}). Output only the corrected XML document."
            )
    session.status = SessionStatus.ABORTED
    session.abort_reason = f"DraftParseFailure: {last_error}"
    raise DraftParseFailure(str(last_error))


def _request_questions(
    session: PlanningSession, chat: ChatProvider, bt_xml: str
) -> list[str]:
    prompt = render_uncertainty_prompt(session.instruction, bt_xml, session.prerequisites)
    raw = chat.complete(
        ChatRequest(prompt=prompt, temperature=session.config.temperature)
    ).text
    session.raw_transcript.append(raw)
    try:
        return parse_question_lines(raw)
    except QuestionParseFailure:
        session.status = SessionStatus.ABORTED
        session.abort_reason = f"QuestionParseFailure: {raw!r}"
        raise


def submit_human_answers(session: PlanningSession, answers: Sequence[Answer]) -> PlanningSession:
    if session.status is not SessionStatus.AWAITING_HUMAN:
        raise PlannerError(f"cannot submit answers in status {session.status.value}")
    turn = session.turns[-1]
    expected = {q.label for q in turn.residual_for_human}
    provided = {a.question_label for a in answers}
    unknown = provided - expected
    if unknown:
        raise UnknownLabel(f"labels not pending for this turn: {sorted(unknown)}")
    missing = expected - provided
    if missing:
        raise IncompleteAnswers(sorted(missing))

    by_label = {a.question_label: a for a in answers}
    for q in turn.residual_for_human:
        answer = Answer(q.label, by_label[q.label].text, AnswerSource.HUMAN)
        turn.answers.append(answer)
        session.prerequisites.append((q.label, answer.text, "Human"))
    session.status = SessionStatus.AWAITING_MODEL
    session.record(
        {
            "event": "answers_submitted",
            "turn": turn.index,
            "answers": [(a.question_label, a.text) for a in answers],
            "status": session.status.value,
        }
    )
    return session


def run_to_convergence(
    session: PlanningSession,
    chat: ChatProvider,
    human: HumanAnswerSource,
    registry: AgentRegistry = DEFAULT_AGENTS,
) -> PlanningSession:
    """Alternate drafting and answer collection until convergence or the
    turn budget; a budget-exhausted session converges on its last draft."""
    while session.status in (SessionStatus.AWAITING_MODEL, SessionStatus.AWAITING_HUMAN):
        if session.status is SessionStatus.AWAITING_HUMAN:
            turn = session.turns[-1]
            submit_human_answers(session, human.answer(turn.residual_for_human))
            continue
        if len(session.turns) >= session.config.max_turns:
            session.status = SessionStatus.CONVERGED
            session.record({"event": "budget_converged", "turns": len(session.turns)})
            break
        draft_turn(session, chat, registry)
    return session


def finalize(session: PlanningSession) -> bt.BehaviorTree:
    if session.status is not SessionStatus.CONVERGED:
        raise NotConverged(f"session status is {session.status.value}")
    draft = session.turns[-1].bt_draft
    final = bt.BehaviorTree(
        root=draft.root, tree_id=draft.tree_id, source=bt.TreeSource.FINAL
    )
    report = bt.validate(final)
    if not report.ok:
        raise PlannerError(f"final tree is invalid: {report.issues}")
    return final
