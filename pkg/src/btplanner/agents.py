"""Proxy answering of clarification questions by a set of expert agents.

Every agent receives the same structured response template (answerability
analysis, labeled answers, unanswered questions echoed as-is). Questions no
agent answers fall through to the human queue.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

from .providers import ChatProvider, ChatRequest, TransportError


class UnparseableResponse(Exception):
    pass


@dataclass(frozen=True)
class ClarificationQuestion:
    label: str
    text: str
    origin_turn: int = 1


@dataclass(frozen=True)
class AgentConfig:
    agent_id: str
    persona: str
    scope_rules: str
    chain_rank: int


@dataclass(frozen=True)
class QuestionOutcome:
    analysis: str
    answered: bool
    text: str  # answer text if answered, verbatim question text otherwise


@dataclass(frozen=True)
class AgentVerdict:
    agent_id: str
    per_question: dict[str, QuestionOutcome]
    discarded: tuple[tuple[str, str], ...] = ()  # (label, text) not in expected


class AnswerSource(str, Enum):
    HUMAN = "Human"
    AGENT = "Agent"


@dataclass(frozen=True)
class Answer:
    question_label: str
    text: str
    source: AnswerSource
    agent_id: str | None = None


class ChainStrategy(str, Enum):
    SEQUENTIAL_CHAIN = "SequentialChain"
    FAN_OUT_AGGREGATE = "FanOutAggregate"


# ---------------------------------------------------------------------------
# Prompt rendering

PROCESS_TEMPLATE = """\
# Process
1. Generate three sections based on the given questions and Prerequisites.
a) Analysis of answerability (Analyze and output whether the given question is answerable or not.)
b) Answer (Please answer only those questions you are able to answer. Please prefix your answer with a question label.)
c) Output of questions not answered (Please output the text you did not answer as is.)"""


def render_agent_prompt(
    agent: AgentConfig,
    questions: Sequence[ClarificationQuestion],
    prerequisites: str,
) -> str:
    if not questions:
        raise ValueError("questions must be nonempty")
    lines = [
        PROCESS_TEMPLATE,
        "",
        "# Role",
        agent.persona,
        "",
        "# Scope",
        agent.scope_rules,
        "",
        "# Prerequisites",
        prerequisites if prerequisites else "(none)",
        "",
        "# Questions",
    ]
    for q in questions:
        lines.append(f"{q.label}: {q.text}")
    return "\n".join(lines)


def render_agent_response(
    questions: Sequence[ClarificationQuestion],
    answers: dict[str, str],
    analysis: dict[str, str] | None = None,
) -> str:
    """Canonical three-section response text; scripted agents and fixture
    transcripts are built with this."""
    analysis = analysis or {}
    lines = ["a) Analysis of answerability"]
    for q in questions:
        note = analysis.get(
            q.label, "answerable" if q.label in answers else "not answerable"
        )
        lines.append(f"{q.label}: {note}")
    lines.append("b) Answer")
    for q in questions:
        if q.label in answers:
            lines.append(f"{q.label}: {answers[q.label]}")
    lines.append("c) Output of questions not answered")
    for q in questions:
        if q.label not in answers:
            lines.append(f"{q.label}: {q.text}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Response parsing

_SECTION_RE = re.compile(r"^\s*(?:\d\.\s*)?([abc])\)", re.IGNORECASE)
_LABELED_RE = re.compile(r"^\s*(Q\d+)\s*[:.)-]\s*(.*)$")


def parse_agent_response(
    agent_id: str,
    raw: str,
    expected: Sequence[ClarificationQuestion],
) -> AgentVerdict:
    """Split the response into its three sections and classify each expected
    question. Labels missing from both the answer and unanswered sections are
    recovered as unanswered; labels present in both resolve to answered."""
    sections: dict[str, list[str]] = {"a": [], "b": [], "c": []}
    current: str | None = None
    for line in raw.splitlines():
        match = _SECTION_RE.match(line)
        if match and match.group(1).lower() in sections:
            current = match.group(1).lower()
            continue
        if current is not None:
            sections[current].append(line)
    if current is None:
        raise UnparseableResponse("no a)/b)/c) section structure detected")

    answers = _labeled_entries(sections["b"])
    unanswered_labels = {label for label, _ in _labeled_entries(sections["c"])}
    # the unanswered section may echo question text without a label
    unanswered_text = "\n".join(sections["c"])
    analysis = _analysis_by_label(sections["a"])

    expected_by_label = {q.label: q for q in expected}
    per_question: dict[str, QuestionOutcome] = {}
    discarded: list[tuple[str, str]] = []
    answered_by_label: dict[str, str] = {}
    for label, text in answers:
        if label in expected_by_label:
            answered_by_label[label] = text
        else:
            discarded.append((label, text))

    for q in expected:
        note = analysis.get(q.label, "")
        if q.label in answered_by_label:
            per_question[q.label] = QuestionOutcome(note, True, answered_by_label[q.label])
        elif q.label in unanswered_labels or q.text in unanswered_text:
            per_question[q.label] = QuestionOutcome(note, False, q.text)
        else:
            # lenient recovery: unmentioned questions stay unanswered
            per_question[q.label] = QuestionOutcome(note, False, q.text)

    return AgentVerdict(
        agent_id=agent_id, per_question=per_question, discarded=tuple(discarded)
    )


def _labeled_entries(lines: Sequence[str]) -> list[tuple[str, str]]:
    entries: list[tuple[str, str]] = []
    for line in lines:
        match = _LABELED_RE.match(line)
        if match:
            entries.append((match.group(1), match.group(2).strip()))
        elif entries and line.strip():
            label, text = entries[-1]
            entries[-1] = (label, f"{text}\n{line.strip()}" if text else line.strip())
    return entries


def _analysis_by_label(lines: Sequence[str]) -> dict[str, str]:
    return dict(_labeled_entries(lines))


# ---------------------------------------------------------------------------
# Registry

@dataclass
class AgentRegistry:
    agents: list[AgentConfig] = field(default_factory=list)

    def __post_init__(self) -> None:
        ids = [a.agent_id for a in self.agents]
        ranks = [a.chain_rank for a in self.agents]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate agent ids: {ids}")
        if len(set(ranks)) != len(ranks):
            raise ValueError(f"duplicate chain ranks: {ranks}")

    def in_chain_order(self) -> list[AgentConfig]:
        return sorted(self.agents, key=lambda a: a.chain_rank)

    @classmethod
    def from_file(cls, path: str | Path) -> "AgentRegistry":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls([AgentConfig(**entry) for entry in data["agents"]])


DEFAULT_AGENTS = AgentRegistry(
    [
        AgentConfig(
            agent_id="robot_expert",
            persona=(
                "You are a robot operations expert who knows the robot's motion "
                "capabilities, executable actions, and sensor configuration."
            ),
            scope_rules=(
                "Answer only questions strictly about the robot's functional "
                "specifications; leave anything uncertain or out of scope unanswered."
            ),
            chain_rank=1,
        ),
        AgentConfig(
            agent_id="task_domain_expert",
            persona=(
                "You are a task-domain expert who supplies procedural knowledge "
                "for the target task (for example, bartending operations for "
                "beverage preparation)."
            ),
            scope_rules=(
                "Answer only questions about standard procedures and recipes in "
                "the task domain; leave preference questions unanswered."
            ),
            chain_rank=2,
        ),
        AgentConfig(
            agent_id="commonsense_expert",
            persona=(
                "You are a commonsense expert who handles questions answerable "
                "from general everyday knowledge."
            ),
            scope_rules=(
                "Answer only questions with an uncontroversial commonsense answer; "
                "leave context-dependent or subjective questions unanswered."
            ),
            chain_rank=3,
        ),
    ]
)


# ---------------------------------------------------------------------------
# Delegation

@dataclass
class ChainRunResult:
    answers: list[Answer]
    residual: list[ClarificationQuestion]
    verdicts: list[AgentVerdict]


def run_chain(
    questions: Sequence[ClarificationQuestion],
    registry: AgentRegistry,
    chat: ChatProvider,
    strategy: ChainStrategy = ChainStrategy.SEQUENTIAL_CHAIN,
    prerequisites: str = "",
    temperature: float = 0.0,
) -> ChainRunResult:
    """Route questions through the agents; unanswered ones become residual
    for the human queue. A failing agent degrades to all-unanswered."""
    if not registry.agents:
        raise ValueError("registry must contain at least one agent")
    if not questions:
        return ChainRunResult(answers=[], residual=[], verdicts=[])

    if strategy is ChainStrategy.SEQUENTIAL_CHAIN:
        return _run_sequential(questions, registry, chat, prerequisites, temperature)
    return _run_fan_out(questions, registry, chat, prerequisites, temperature)


def _ask_agent(
    agent: AgentConfig,
    pending: Sequence[ClarificationQuestion],
    chat: ChatProvider,
    prerequisites: str,
    temperature: float,
) -> AgentVerdict:
    prompt = render_agent_prompt(agent, pending, prerequisites)
    try:
        raw = chat.complete(ChatRequest(prompt=prompt, temperature=temperature)).text
        return parse_agent_response(agent.agent_id, raw, pending)
    except (TransportError, UnparseableResponse):
        outcomes = {q.label: QuestionOutcome("", False, q.text) for q in pending}
        return AgentVerdict(agent_id=agent.agent_id, per_question=outcomes)


def _run_sequential(
    questions: Sequence[ClarificationQuestion],
    registry: AgentRegistry,
    chat: ChatProvider,
    prerequisites: str,
    temperature: float,
) -> ChainRunResult:
    answered: dict[str, Answer] = {}
    pending = list(questions)
    verdicts: list[AgentVerdict] = []
    for agent in registry.in_chain_order():
        if not pending:
            break
        verdict = _ask_agent(agent, pending, chat, prerequisites, temperature)
        verdicts.append(verdict)
        still_pending = []
        for q in pending:
            outcome = verdict.per_question[q.label]
            if outcome.answered:
                answered[q.label] = Answer(
                    q.label, outcome.text, AnswerSource.AGENT, agent.agent_id
                )
            else:
                still_pending.append(q)
        pending = still_pending
    answers = [answered[q.label] for q in questions if q.label in answered]
    return ChainRunResult(answers=answers, residual=pending, verdicts=verdicts)


def _run_fan_out(
    questions: Sequence[ClarificationQuestion],
    registry: AgentRegistry,
    chat: ChatProvider,
    prerequisites: str,
    temperature: float,
) -> ChainRunResult:
    # every agent sees every question; conflicts resolve to the lowest rank
    ordered = registry.in_chain_order()
    verdicts = [
        _ask_agent(agent, questions, chat, prerequisites, temperature)
        for agent in ordered
    ]
    answers: list[Answer] = []
    residual: list[ClarificationQuestion] = []
    for q in questions:
        winner: Answer | None = None
        for agent, verdict in zip(ordered, verdicts):
            outcome = verdict.per_question[q.label]
            if outcome.answered:
                winner = Answer(q.label, outcome.text, AnswerSource.AGENT, agent.agent_id)
                break
        if winner is None:
            residual.append(q)
        else:
            answers.append(winner)
    return ChainRunResult(answers=answers, residual=residual, verdicts=verdicts)


def proxy_rate(answers: Sequence[Answer]) -> float:
    """Fraction of resolved questions answered by an agent rather than a
    human."""
    if not answers:
        raise ValueError("session has no questions")
    agent_count = sum(1 for a in answers if a.source is AnswerSource.AGENT)
    return agent_count / len(answers)
