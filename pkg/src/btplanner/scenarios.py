"""Replayable end-to-end planning scenarios.

A scenario bundles a recorded chat transcript, the human answers that drive
the dialogue, and the artifacts the replay must reproduce (question totals,
proxy-answer counts, convergence turn, final tree). Scenario runs are fully
offline: every model response comes from the transcript.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import bt
from .agents import AnswerSource, DEFAULT_AGENTS
from .planner import (
    PlannerConfig,
    PlanningSession,
    ScriptedHuman,
    finalize,
    run_to_convergence,
    start_session,
)
from .providers import ReplayChatProvider, Transcript


class AssertionFailure(Exception):
    pass


@dataclass
class ScenarioReport:
    name: str
    total_questions: int
    agent_answered: int
    human_answered: int
    proxy_rate: float
    convergence_turn: int
    final_bt_xml: str
    checks: list[tuple[str, bool, str]]

    @property
    def ok(self) -> bool:
        return all(passed for _, passed, _ in self.checks)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "total_questions": self.total_questions,
            "agent_answered": self.agent_answered,
            "human_answered": self.human_answered,
            "proxy_rate": self.proxy_rate,
            "convergence_turn": self.convergence_turn,
            "ok": self.ok,
            "checks": [
                {"check": name, "passed": passed, "detail": detail}
                for name, passed, detail in self.checks
            ],
        }


def scenario_dir(name: str) -> Path:
    base = resources.files("btplanner").joinpath("scenarios_data")
    path = Path(str(base)) / name
    if not path.is_dir():
        raise FileNotFoundError(f"no scenario named {name!r} under {base}")
    return path


def available_scenarios() -> list[str]:
    base = Path(str(resources.files("btplanner").joinpath("scenarios_data")))
    return sorted(p.name for p in base.iterdir() if (p / "manifest.json").exists())


def replay_session(name: str) -> tuple[PlanningSession, dict]:
    """Run the scenario's full planning dialogue offline from its
    transcript; returns the finished session and the manifest."""
    directory = scenario_dir(name)
    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))

    chat = ReplayChatProvider(Transcript(directory / manifest["transcript"]))
    human = ScriptedHuman(manifest["human_answers"])
    config = PlannerConfig(
        max_turns=manifest.get("max_turns", 5),
        temperature=manifest.get("temperature", 0.0),
        moa_enabled=manifest.get("moa_enabled", True),
    )
    session = start_session(
        manifest["instruction"], config, session_id=manifest.get("session_id", name)
    )
    run_to_convergence(session, chat, human, DEFAULT_AGENTS)
    return session, manifest


def run_scenario(name: str) -> ScenarioReport:
    session, manifest = replay_session(name)
    expected = manifest["expected"]

    answers = session.all_answers()
    agent_answered = sum(1 for a in answers if a.source is AnswerSource.AGENT)
    human_answered = sum(1 for a in answers if a.source is AnswerSource.HUMAN)
    total = len(session.all_questions())
    final = finalize(session)
    final_xml = bt.serialize_bt(final)

    checks: list[tuple[str, bool, str]] = []

    def check(name: str, got, want) -> None:
        checks.append((name, got == want, f"got {got!r}, expected {want!r}"))

    check("total_questions", total, expected["total_questions"])
    check("agent_answered", agent_answered, expected["agent_answered"])
    check("human_answered", human_answered, expected["human_answered"])
    check("convergence_turn", len(session.turns), expected["convergence_turn"])
    if "final_bt" in manifest:
        want_xml = (scenario_dir(name) / manifest["final_bt"]).read_text(encoding="utf-8")
        check("final_bt", final_xml, want_xml)
    if "agent_answer_sources" in expected:
        by_agent: dict[str, int] = {}
        for a in answers:
            if a.source is AnswerSource.AGENT:
                by_agent[a.agent_id] = by_agent.get(a.agent_id, 0) + 1
        check("agent_answer_sources", by_agent, expected["agent_answer_sources"])

    rate = agent_answered / total if total else 0.0
    return ScenarioReport(
        name=name,
        total_questions=total,
        agent_answered=agent_answered,
        human_answered=human_answered,
        proxy_rate=rate,
        convergence_turn=len(session.turns),
        final_bt_xml=final_xml,
        checks=checks,
    )
