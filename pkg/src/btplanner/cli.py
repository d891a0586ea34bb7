"""Command-line interface: plan interactively, answer pending questions on
a running service, execute or simulate trees, compare trees with both
metrics, replay scenarios, and serve the HTTP API."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import bt
from .agents import DEFAULT_AGENTS, AgentRegistry, Answer, AnswerSource
from .executor import (
    HttpPolicyRuntime,
    ScriptedActionRuntime,
    ScriptedConditionEvaluator,
    bind_policies,
    load_bindings,
    load_profile,
    run_to_completion,
    simulate,
)
from .planner import (
    PlannerConfig,
    ScriptedHuman,
    finalize,
    run_to_convergence,
    start_session,
)
from .providers import (
    ChatProvider,
    HashedBagOfWordsEmbedder,
    LiveChatProvider,
    RecordingChatProvider,
    ReplayChatProvider,
    Transcript,
)
from .similarity import semantic_similarity
from .ted import EditCosts, normalized_ted


def make_chat_provider(spec: str) -> ChatProvider:
    """--provider live | replay:<path> | record:<path>"""
    if spec == "live":
        return LiveChatProvider()
    mode, _, path = spec.partition(":")
    if mode == "replay" and path:
        return ReplayChatProvider(Transcript(path))
    if mode == "record" and path:
        return RecordingChatProvider(LiveChatProvider(), Transcript(path))
    raise click.BadParameter(f"unknown provider spec {spec!r}")


provider_option = click.option(
    "--provider",
    default="live",
    show_default=True,
    help="model access mode: live, replay:<transcript>, record:<transcript>",
)


def echo_json(payload) -> None:
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


@click.group()
def main() -> None:
    """Interactive behavior-tree planning, execution, and comparison."""


# ---------------------------------------------------------------------------
# Planning

class InteractiveHuman:
    def answer(self, questions):
        answers = []
        for q in questions:
            text = click.prompt(f"{q.label}: {q.text}")
            answers.append(Answer(q.label, text, AnswerSource.HUMAN))
        return answers


@main.command()
@click.argument("instruction")
@provider_option
@click.option("--no-moa", is_flag=True, help="answer every question yourself")
@click.option("--max-turns", default=5, show_default=True)
@click.option("--temperature", default=0.0, show_default=True)
@click.option("--answers-file", type=click.Path(exists=True), help="label->text JSON instead of interactive prompts")
@click.option("--agents-file", type=click.Path(exists=True), help="agent registry JSON")
@click.option("--out", type=click.Path(), help="write the final tree here (.bt.xml)")
def plan(instruction, provider, no_moa, max_turns, temperature, answers_file, agents_file, out):
    """Run the full planning dialogue for INSTRUCTION."""
    chat = make_chat_provider(provider)
    registry = AgentRegistry.from_file(agents_file) if agents_file else DEFAULT_AGENTS
    human = (
        ScriptedHuman(json.loads(Path(answers_file).read_text()))
        if answers_file
        else InteractiveHuman()
    )
    config = PlannerConfig(
        max_turns=max_turns, temperature=temperature, moa_enabled=not no_moa
    )
    session = start_session(instruction, config)
    run_to_convergence(session, chat, human, registry)
    tree = finalize(session)
    xml = bt.serialize_bt(tree)
    if out:
        Path(out).write_text(xml, encoding="utf-8")
        click.echo(f"final tree written to {out}", err=True)
    else:
        click.echo(xml, nl=False)
    agent_answered = sum(
        1 for a in session.all_answers() if a.source is AnswerSource.AGENT
    )
    total = len(session.all_questions())
    click.echo(
        f"converged after {len(session.turns)} turn(s); "
        f"{total} question(s), {agent_answered} proxy-answered",
        err=True,
    )


@main.command()
@click.option("--server", default="http://127.0.0.1:8000", show_default=True)
@click.option("--session", "session_id", required=True)
@click.argument("answers", nargs=-1)
def answer(server, session_id, answers):
    """Post ANSWERS (label=text pairs) to a session on a running service."""
    import httpx

    payload = []
    for item in answers:
        label, _, text = item.partition("=")
        if not text:
            raise click.BadParameter(f"expected label=text, got {item!r}")
        payload.append({"label": label, "text": text})
    resp = httpx.post(
        f"{server}/sessions/{session_id}/answers", json={"answers": payload}
    )
    echo_json(resp.json())
    if resp.status_code >= 400:
        sys.exit(1)


# ---------------------------------------------------------------------------
# Execution

@main.command()
@click.option("--tree", "tree_path", required=True, type=click.Path(exists=True))
@click.option("--bindings", "bindings_path", required=True, type=click.Path(exists=True))
@click.option("--policy-server", help="HTTP policy server endpoint; omit for a dry run where every action succeeds")
@click.option("--conditions", "conditions_path", type=click.Path(exists=True), help="condition name -> verdict JSON")
@click.option("--max-ticks", default=100, show_default=True)
@click.option("--trace-out", type=click.Path(), help="write trace JSONL here")
def run(tree_path, bindings_path, policy_server, conditions_path, max_ticks, trace_out):
    """Execute a tree once against a policy server or a dry-run runtime."""
    tree = bt.parse_bt_xml(Path(tree_path).read_text(), tree_id=tree_path)
    bindings = load_bindings(bindings_path)
    verdicts = (
        json.loads(Path(conditions_path).read_text()) if conditions_path else {}
    )
    plan_obj = bind_policies(tree, bindings, ScriptedConditionEvaluator(verdicts))
    runtime = (
        HttpPolicyRuntime(policy_server) if policy_server else ScriptedActionRuntime()
    )
    status, trace = run_to_completion(plan_obj, runtime, max_ticks=max_ticks)
    if trace_out:
        Path(trace_out).write_text(trace.to_jsonl(), encoding="utf-8")
    echo_json({"status": status.value, "events": len(trace.events)})
    if status.value != "Success":
        sys.exit(1)


@main.command("simulate")
@click.option("--tree", "tree_path", required=True, type=click.Path(exists=True))
@click.option("--bindings", "bindings_path", required=True, type=click.Path(exists=True))
@click.option("--profile", "profile_path", required=True, type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True)
@click.option("--runs", default=1000, show_default=True)
@click.option("--conditions", "conditions_path", type=click.Path(exists=True))
@click.option("--max-ticks", default=100, show_default=True)
def simulate_cmd(tree_path, bindings_path, profile_path, seed, runs, conditions_path, max_ticks):
    """Monte-Carlo completion statistics under a success-rate profile."""
    tree = bt.parse_bt_xml(Path(tree_path).read_text(), tree_id=tree_path)
    bindings = load_bindings(bindings_path)
    profile = load_profile(profile_path)
    verdicts = (
        json.loads(Path(conditions_path).read_text()) if conditions_path else {}
    )
    plan_obj = bind_policies(tree, bindings, ScriptedConditionEvaluator(verdicts))
    stats = simulate(plan_obj, profile, seed=seed, runs=runs, max_ticks=max_ticks)
    echo_json(stats.to_dict())


# ---------------------------------------------------------------------------
# Metrics

@main.group()
def eval() -> None:
    """Tree comparison metrics."""


def _load_tree(path: str) -> bt.BehaviorTree:
    return bt.parse_bt_xml(Path(path).read_text(), tree_id=path)


@eval.command()
@click.option("--a", "a_path", required=True, type=click.Path(exists=True))
@click.option("--b", "b_path", required=True, type=click.Path(exists=True))
@click.option("--costs", default="1,1,1", show_default=True, help="insert,delete,relabel")
def ted(a_path, b_path, costs):
    """Normalized tree edit distance between two .bt.xml files."""
    insert, delete, relabel = (float(x) for x in costs.split(","))
    result = normalized_ted(
        _load_tree(a_path), _load_tree(b_path), EditCosts(insert, delete, relabel)
    )
    echo_json(
        {
            "raw": result.raw,
            "normalized": result.normalized,
            "n1": result.n1,
            "n2": result.n2,
            "alpha": result.alpha,
        }
    )


@eval.command()
@click.option("--source", "source_path", required=True, type=click.Path(exists=True))
@click.option("--target", "target_path", required=True, type=click.Path(exists=True))
@click.option(
    "--embedder",
    default="hashed-bow",
    show_default=True,
    type=click.Choice(["hashed-bow"]),
)
def sim(source_path, target_path, embedder):
    """Directional mean-max node similarity (source against target)."""
    result = semantic_similarity(
        _load_tree(source_path), _load_tree(target_path), HashedBagOfWordsEmbedder()
    )
    echo_json(
        {
            "mean_max": result.mean_max,
            "per_node": [
                {
                    "source_sentence": m.source_sentence,
                    "best_target_sentence": m.best_target_sentence,
                    "max_cosine": m.max_cosine,
                }
                for m in result.per_node
            ],
        }
    )


@main.command()
@click.option("--a", "a_path", required=True, type=click.Path(exists=True))
@click.option("--b", "b_path", required=True, type=click.Path(exists=True))
def compare(a_path, b_path):
    """Both metrics between two trees, in both directions for similarity."""
    t1, t2 = _load_tree(a_path), _load_tree(b_path)
    embedder = HashedBagOfWordsEmbedder()
    ted_result = normalized_ted(t1, t2)
    echo_json(
        {
            "ted": {"raw": ted_result.raw, "normalized": ted_result.normalized},
            "similarity_a_to_b": semantic_similarity(t1, t2, embedder).mean_max,
            "similarity_b_to_a": semantic_similarity(t2, t1, embedder).mean_max,
        }
    )


# ---------------------------------------------------------------------------
# Scenarios and service

@main.group()
def scenario() -> None:
    """Replayable end-to-end fixtures."""


@scenario.command("list")
def scenario_list():
    from .scenarios import available_scenarios

    for name in available_scenarios():
        click.echo(name)


@scenario.command("run")
@click.argument("name")
def scenario_run(name):
    from .scenarios import run_scenario

    report = run_scenario(name)
    echo_json(report.to_dict())
    if not report.ok:
        sys.exit(1)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--data-dir", default="data", show_default=True)
@provider_option
@click.option("--agents-file", type=click.Path(exists=True))
@click.option("--static-dir", type=click.Path(), help="serve a built UI from here")
def serve(host, port, data_dir, provider, agents_file, static_dir):
    """Start the HTTP service (loopback by default)."""
    import uvicorn

    from .service import create_app

    registry = AgentRegistry.from_file(agents_file) if agents_file else DEFAULT_AGENTS
    app = create_app(
        data_dir=data_dir,
        chat=make_chat_provider(provider),
        registry=registry,
        static_dir=static_dir,
    )
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
