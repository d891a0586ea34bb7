#!/usr/bin/env python3
"""Regenerate the scenario fixtures under src/btplanner/scenarios_data/.

Each scenario is defined here as a scripted dialogue (draft trees per turn,
question lists per turn, per-agent answers, human answers). The script runs
the real planning loop against the scripted responses with the recording
wrapper attached, freezing the resulting transcript; replaying it must
reproduce the expected artifacts exactly, which is verified at the end.
"""

from __future__ import annotations

import json
import shutil
import sys
from dataclasses import dataclass, field
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from btplanner import bt
from btplanner.agents import (
    ClarificationQuestion,
    DEFAULT_AGENTS,
    render_agent_response,
)
from btplanner.planner import (
    PlannerConfig,
    ScriptedHuman,
    finalize,
    run_to_convergence,
    start_session,
)
from btplanner.providers import (
    ChatRequest,
    RecordingChatProvider,
    ScriptedChatProvider,
    Transcript,
)
from btplanner.scenarios import run_scenario

DATA_DIR = ROOT / "src" / "btplanner" / "scenarios_data"


@dataclass
class TurnScript:
    bt_xml: str
    questions: list[str]


@dataclass
class Scenario:
    name: str
    instruction: str
    moa_enabled: bool
    turns: list[TurnScript]
    agent_answers: dict[str, dict[str, str]]  # agent_id -> label -> answer
    human_answers: dict[str, str]
    max_turns: int = 5
    temperature: float = 0.0
    extra_files: dict[str, dict] = field(default_factory=dict)


def scripted_chat(scenario: Scenario) -> ScriptedChatProvider:
    state = {"draft": 0, "uncertainty": 0}

    def respond(request: ChatRequest) -> str:
        prompt = request.prompt
        if prompt.startswith("You are a task planner"):
            turn = scenario.turns[state["draft"]]
            state["draft"] += 1
            return turn.bt_xml
        if prompt.startswith("Review the behavior tree"):
            turn = scenario.turns[state["uncertainty"]]
            state["uncertainty"] += 1
            return "\n".join(turn.questions) if turn.questions else "NONE"
        for agent in DEFAULT_AGENTS.agents:
            if agent.persona in prompt:
                questions = _questions_from_prompt(prompt)
                answers = {
                    q.label: scenario.agent_answers.get(agent.agent_id, {})[q.label]
                    for q in questions
                    if q.label in scenario.agent_answers.get(agent.agent_id, {})
                }
                return render_agent_response(questions, answers)
        raise AssertionError(f"unrecognized prompt:\n{prompt[:200]}")

    return ScriptedChatProvider(respond)


def _questions_from_prompt(prompt: str) -> list[ClarificationQuestion]:
    lines = prompt.split("# Questions\n")[1].splitlines()
    out = []
    for line in lines:
        label, _, text = line.partition(": ")
        out.append(ClarificationQuestion(label=label, text=text))
    return out


def build(scenario: Scenario) -> None:
    directory = DATA_DIR / scenario.name
    if directory.exists():
        shutil.rmtree(directory)
    directory.mkdir(parents=True)

    transcript = Transcript(directory / "transcript.jsonl")
    chat = RecordingChatProvider(scripted_chat(scenario), transcript)
    config = PlannerConfig(
        max_turns=scenario.max_turns,
        temperature=scenario.temperature,
        moa_enabled=scenario.moa_enabled,
    )
    session = start_session(scenario.instruction, config, session_id=scenario.name)
    run_to_convergence(session, chat, ScriptedHuman(scenario.human_answers), DEFAULT_AGENTS)
    final = finalize(session)
    final_xml = bt.serialize_bt(final)
    (directory / "final.bt.xml").write_text(final_xml, encoding="utf-8")

    from btplanner.agents import AnswerSource

    answers = session.all_answers()
    agent_answered = sum(1 for a in answers if a.source is AnswerSource.AGENT)
    by_agent: dict[str, int] = {}
    for a in answers:
        if a.source is AnswerSource.AGENT:
            by_agent[a.agent_id] = by_agent.get(a.agent_id, 0) + 1

    manifest = {
        "name": scenario.name,
        "instruction": scenario.instruction,
        "session_id": scenario.name,
        "transcript": "transcript.jsonl",
        "final_bt": "final.bt.xml",
        "moa_enabled": scenario.moa_enabled,
        "max_turns": scenario.max_turns,
        "temperature": scenario.temperature,
        "human_answers": scenario.human_answers,
        "expected": {
            "total_questions": len(session.all_questions()),
            "agent_answered": agent_answered,
            "human_answered": len(answers) - agent_answered,
            "convergence_turn": len(session.turns),
            "agent_answer_sources": by_agent,
        },
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    for filename, payload in scenario.extra_files.items():
        (directory / filename).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    print(f"built {scenario.name}: {manifest['expected']}")


# ---------------------------------------------------------------------------
# Margarita scenarios (cocktail planning, dialogue-heavy)

MARGARITA_T1 = """\
<Root>
  <Sequence name="make cocktail">
    <Action name="gather ingredients"/>
    <Action name="mix drink"/>
    <Action name="serve drink"/>
  </Sequence>
</Root>
"""

MARGARITA_T2 = """\
<Root>
  <Sequence name="make margarita">
    <Action name="measure tequila" amount="50ml"/>
    <Action name="measure lime juice" amount="25ml"/>
    <Action name="measure orange liqueur" amount="20ml"/>
    <Sequence name="mix">
      <Action name="add ice to shaker"/>
      <Action name="shake" duration="15"/>
    </Sequence>
    <Action name="serve drink"/>
  </Sequence>
</Root>
"""

MARGARITA_T3 = """\
<Root>
  <Sequence name="make margarita">
    <Action name="salt the rim"/>
    <Action name="measure tequila" amount="50ml"/>
    <Action name="measure lime juice" amount="25ml"/>
    <Action name="measure orange liqueur" amount="20ml"/>
    <Sequence name="mix">
      <Action name="add ice to shaker"/>
      <Retry num_attempts="3"><Action name="shake" duration="15"/></Retry>
    </Sequence>
    <Fallback name="ensure glass ready">
      <Condition name="glass chilled"/>
      <Action name="chill glass" duration="120"/>
    </Fallback>
    <Action name="strain into glass"/>
    <Action name="garnish with lime wheel"/>
  </Sequence>
</Root>
"""

MARGARITA_Q1 = [
    "Which cocktail should be prepared?",
    "How many servings are required?",
    "Can the robot gripper hold a standard cocktail shaker?",
    "Should the drink be shaken or stirred?",
    "What are the classic ingredients of a margarita?",
    "Is fresh lime juice available, or should bottled juice be used?",
    "What is the maximum payload of the robot arm?",
    "Which type of glass should the drink be served in?",
    "Should the glass be chilled before serving?",
    "Is ice available in the workspace?",
    "Does the robot have a tool for measuring liquids?",
    "What strength should the drink be?",
    "Should the rim of the glass be salted?",
    "What is the standard ratio of tequila to lime juice in a margarita?",
    "Are there any allergy constraints to consider?",
    "Where are the bottles located on the table?",
    "Should a garnish be added to the drink?",
    "Is a cocktail strainer a common bar tool?",
    "How long should the drink be shaken?",
    "Should leftover ingredients be put away after serving?",
]

MARGARITA_Q2 = [
    "Which brand of tequila should be used?",
    "Can the robot pour from a 700ml bottle without spilling?",
    "Should the orange liqueur be triple sec or curacao?",
    "How much ice should go into the shaker?",
    "What is the preferred sweetness level?",
    "Should the shaker be sealed before shaking?",
    "Where should the finished drink be placed?",
    "Is a backup glass available in case of breakage?",
    "Should the pour be measured with a jigger?",
    "What room temperature is the workspace?",
    "Should the lime be cut before juicing?",
    "How full should the serving glass be?",
]

MARGARITA_Q3 = [
    "Should the rim salt cover the full rim or half?",
    "Is a second shake needed if the first is too short?",
    "What is the usual garnish for a margarita?",
    "Should the glass chilling step come before mixing?",
    "How many ice cubes fit the shaker comfortably?",
]

MARGARITA_MOA = Scenario(
    name="margarita-moa",
    instruction="Make a cocktail.",
    moa_enabled=True,
    turns=[
        TurnScript(MARGARITA_T1, MARGARITA_Q1),
        TurnScript(MARGARITA_T2, MARGARITA_Q2),
        TurnScript(MARGARITA_T3, MARGARITA_Q3),
        TurnScript(MARGARITA_T3, []),
    ],
    agent_answers={
        "robot_expert": {
            "Q3": "Yes, the gripper can hold a standard 500ml cocktail shaker.",
            "Q7": "The arm payload limit is 1.5kg, enough for any bottle here.",
            "Q11": "Yes, a jigger tool is mounted on the left fixture.",
            "Q22": "Yes, pouring from a 700ml bottle is within tested tolerances.",
        },
        "task_domain_expert": {
            "Q5": "A margarita uses tequila, lime juice, and orange liqueur.",
            "Q14": "The classic ratio is 2:1:1 tequila to lime juice to liqueur.",
            "Q26": "Seal the shaker firmly before shaking to avoid spills.",
            "Q35": "A lime wheel on the rim is the usual margarita garnish.",
        },
        "commonsense_expert": {
            "Q18": "Yes, a cocktail strainer is a standard bar tool.",
            "Q31": "Yes, cutting the lime in half first makes juicing easier.",
        },
    },
    human_answers={
        "Q1": "A margarita, please.",
        "Q2": "One serving.",
        "Q4": "Shaken.",
        "Q6": "Use fresh lime juice.",
        "Q8": "A coupe glass.",
        "Q9": "Yes, chill the glass.",
        "Q10": "Yes, there is an ice bucket on the right.",
        "Q12": "Standard strength.",
        "Q13": "Yes, salt the rim.",
        "Q15": "No allergy constraints.",
        "Q16": "All bottles are on the back shelf.",
        "Q17": "Yes, add a garnish.",
        "Q19": "About fifteen seconds.",
        "Q20": "Yes, tidy up afterwards.",
        "Q21": "Any silver tequila is fine.",
        "Q23": "Triple sec.",
        "Q24": "Four cubes.",
        "Q25": "Not too sweet.",
        "Q27": "On the serving coaster at the front.",
        "Q28": "Yes, a spare glass is in the cabinet.",
        "Q29": "Yes, measure with the jigger.",
        "Q30": "About 22 degrees Celsius.",
        "Q32": "Leave a finger of headroom.",
        "Q33": "Half rim only.",
        "Q34": "Yes, shake again briefly if needed.",
        "Q36": "Yes, chill the glass first.",
        "Q37": "Four cubes fit comfortably.",
    },
)

MARGARITA_NOMOA = Scenario(
    name="margarita-nomoa",
    instruction="Make a cocktail.",
    moa_enabled=False,
    turns=[
        TurnScript(MARGARITA_T1, MARGARITA_Q1[:8]),
        TurnScript(MARGARITA_T2, []),
    ],
    agent_answers={},
    human_answers={
        "Q1": "A margarita, please.",
        "Q2": "One serving.",
        "Q3": "Yes, the shaker fits the gripper.",
        "Q4": "Shaken.",
        "Q5": "Tequila, lime juice, and orange liqueur.",
        "Q6": "Use fresh lime juice.",
        "Q7": "The payload is 1.5kg.",
        "Q8": "A coupe glass.",
    },
)


# ---------------------------------------------------------------------------
# Smoothie scenario (execution-bound, converges on turn 2)

SMOOTHIE_T1 = """\
<Root>
  <Sequence name="make smoothie">
    <Action name="insert fruit"/>
    <Action name="close lid"/>
    <Action name="switch on"/>
    <Action name="wait" duration="60"/>
    <Action name="switch off"/>
  </Sequence>
</Root>
"""

SMOOTHIE_FINAL = """\
<Root>
  <Sequence name="make smoothie">
    <Retry num_attempts="3"><Action name="insert strawberry" count="2"/></Retry>
    <Retry num_attempts="3"><Action name="insert banana" count="1"/></Retry>
    <Retry num_attempts="3"><Action name="insert kiwi" count="1"/></Retry>
    <Fallback name="ensure lid closed">
      <Condition name="lid closed"/>
      <Retry num_attempts="3"><Action name="close lid"/></Retry>
    </Fallback>
    <Retry num_attempts="3"><Action name="switch on"/></Retry>
    <Action name="wait" duration="60"/>
    <Retry num_attempts="3"><Action name="switch off"/></Retry>
  </Sequence>
</Root>
"""

SMOOTHIE_Q1 = [
    "Which fruits should go into the smoothie, and how many of each?",
    "Can the robot arms reach the blender lid from its mounted position?",
    "How long should the blender run?",
    "Does the robot have a policy for flipping the blender switch?",
    "Should failed fruit grasps be retried automatically?",
]

SMOOTHIE = Scenario(
    name="smoothie",
    instruction="Make a smoothie.",
    moa_enabled=True,
    turns=[
        TurnScript(SMOOTHIE_T1, SMOOTHIE_Q1),
        TurnScript(SMOOTHIE_FINAL, []),
    ],
    agent_answers={
        "robot_expert": {
            "Q2": "Yes, both arms reach the lid; the left arm has the better approach angle.",
            "Q4": "Yes, a trained switch-flip policy is available for on and off.",
        },
    },
    human_answers={
        "Q1": "Two strawberries, one banana, and one kiwi.",
        "Q3": "Run the blender for sixty seconds.",
        "Q5": "Yes, retry each failed action up to three times.",
    },
    extra_files={
        # success rates measured over 10 trials per action with the
        # best-performing policy assignment (fruit insertion on the
        # vision-language-action model, the rest on diffusion models)
        "table_v_profile.json": {
            "insert strawberry": 0.3,
            "insert banana": 0.6,
            "insert kiwi": 0.6,
            "close lid": 0.7,
            "switch on": 1.0,
            "switch off": 1.0,
        },
        "bindings.json": {
            "insert strawberry": {"kind": "External", "policy_id": "pi05-fruit", "prompt": "insert the strawberry into the blender"},
            "insert banana": {"kind": "External", "policy_id": "pi05-fruit", "prompt": "insert the banana into the blender"},
            "insert kiwi": {"kind": "External", "policy_id": "pi05-fruit", "prompt": "insert the kiwi into the blender"},
            "close lid": {"kind": "External", "policy_id": "diffusion-lid", "prompt": "close the blender lid"},
            "switch on": {"kind": "External", "policy_id": "diffusion-switch", "prompt": "turn on the blender switch"},
            "switch off": {"kind": "External", "policy_id": "diffusion-switch", "prompt": "turn off the blender switch"},
            "wait": {"kind": "Wait", "wait_s": 60.0},
        },
    },
)


def main() -> None:
    for scenario in (MARGARITA_MOA, MARGARITA_NOMOA, SMOOTHIE):
        build(scenario)
    # verify replay fidelity immediately
    for name in ("margarita-moa", "margarita-nomoa", "smoothie"):
        report = run_scenario(name)
        status = "ok" if report.ok else "FAILED"
        print(f"replay {name}: {status} (proxy_rate={report.proxy_rate:.4f})")
        if not report.ok:
            for check, passed, detail in report.checks:
                if not passed:
                    print(f"  {check}: {detail}")
            raise SystemExit(1)


if __name__ == "__main__":
    main()
