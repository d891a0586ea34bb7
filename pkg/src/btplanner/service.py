"""Session-oriented HTTP API and event stream over the planner, agent
chain, executor, and metrics.

Sessions persist as append-only JSONL event files under a data directory,
one file per session, so a crashed service can replay its state. Execution
traces are buffered per execution and served as a server-sent event stream;
every subscriber sees the identical ordered sequence. State-changing
endpoints accept an Idempotency-Key header and return the cached response
on retry. Intended as a local/lab tool: no authentication, loopback bind.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

from fastapi import FastAPI, HTTPException, Header, Request
from fastapi.responses import PlainTextResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import bt
from .agents import AgentRegistry, Answer, AnswerSource, ChainStrategy, DEFAULT_AGENTS
from .executor import (
    Binding,
    BindingKind,
    MissingProfile,
    ScriptedConditionEvaluator,
    SimProfile,
    UnboundAction,
    bind_policies,
    simulate,
)
from .planner import (
    IncompleteAnswers,
    NotConverged,
    PlannerConfig,
    PlannerError,
    PlanningSession,
    SessionStatus,
    UnknownLabel,
    draft_turn,
    finalize,
    start_session,
    submit_human_answers,
)
from .providers import ChatProvider, HashedBagOfWordsEmbedder
from .similarity import semantic_similarity
from .ted import EditCosts, normalized_ted


class CreateSessionRequest(BaseModel):
    instruction: str
    moa_enabled: bool = True
    max_turns: int = 5
    temperature: float = 0.0
    strategy: str = "SequentialChain"


class AnswerItem(BaseModel):
    label: str
    text: str


class PostAnswersRequest(BaseModel):
    answers: list[AnswerItem]


class StartExecutionRequest(BaseModel):
    session_id: str | None = None
    tree_xml: str | None = None
    bindings: dict[str, dict] = {}
    profile: dict[str, float] = {}
    seed: int = 0
    runs: int = 1
    max_ticks: int = 100
    conditions: dict[str, bool] = {}


class EvalTedRequest(BaseModel):
    a_xml: str
    b_xml: str
    insert: float = 1.0
    delete: float = 1.0
    relabel: float = 1.0


class EvalSimRequest(BaseModel):
    source_xml: str
    target_xml: str


@dataclass
class ExecutionRecord:
    execution_id: str
    events: list[dict] = field(default_factory=list)
    done: bool = False


@dataclass
class ServiceState:
    data_dir: Path
    chat: ChatProvider
    registry: AgentRegistry
    clock: Callable[[], float]
    sessions: dict[str, PlanningSession] = field(default_factory=dict)
    executions: dict[str, ExecutionRecord] = field(default_factory=dict)
    idempotency: dict[str, dict] = field(default_factory=dict)
    locks: dict[str, threading.Lock] = field(default_factory=dict)

    def lock_for(self, session_id: str) -> threading.Lock:
        return self.locks.setdefault(session_id, threading.Lock())

    def persist_event(self, session_id: str, event: dict) -> None:
        path = self.data_dir / f"{session_id}.events.jsonl"
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True, ensure_ascii=False) + "\n")


def summarize(session: PlanningSession, state: ServiceState) -> dict:
    pending = (
        len(session.turns[-1].residual_for_human)
        if session.turns and session.status is SessionStatus.AWAITING_HUMAN
        else 0
    )
    return {
        "session_id": session.session_id,
        "instruction": session.instruction,
        "status": session.status.value,
        "turn_count": len(session.turns),
        "pending_questions": pending,
        "created_at": getattr(session, "_created_at", 0.0),
        "updated_at": state.clock(),
    }


def create_app(
    data_dir: str | Path = "data",
    chat: ChatProvider | None = None,
    registry: AgentRegistry = DEFAULT_AGENTS,
    clock: Callable[[], float] = time.time,
    static_dir: str | Path | None = None,
) -> FastAPI:
    if chat is None:
        from .providers import LiveChatProvider

        chat = LiveChatProvider()

    state = ServiceState(
        data_dir=Path(data_dir), chat=chat, registry=registry, clock=clock
    )
    app = FastAPI(title="btplanner service")
    app.state.service = state

    def get_session(session_id: str) -> PlanningSession:
        session = state.sessions.get(session_id)
        if session is None:
            raise HTTPException(404, f"no session {session_id}")
        return session

    def idempotent(key: str | None, compute: Callable[[], dict]) -> dict:
        if key is None:
            return compute()
        if key in state.idempotency:
            return state.idempotency[key]
        response = compute()
        state.idempotency[key] = response
        return response

    # ------------------------------------------------------------------ sessions

    @app.post("/sessions")
    def create_session_endpoint(
        body: CreateSessionRequest,
        idempotency_key: str | None = Header(default=None),
    ):
        if not body.instruction.strip():
            raise HTTPException(422, "instruction must be nonempty")

        def compute() -> dict:
            config = PlannerConfig(
                max_turns=body.max_turns,
                temperature=body.temperature,
                moa_enabled=body.moa_enabled,
                strategy=ChainStrategy(body.strategy),
            )
            session = start_session(body.instruction, config)
            session._created_at = state.clock()
            session.on_event = lambda ev: state.persist_event(session.session_id, ev)
            for event in session.events:  # persist the start event
                state.persist_event(session.session_id, event)
            state.sessions[session.session_id] = session
            return summarize(session, state)

        return idempotent(idempotency_key, compute)

    @app.get("/sessions")
    def list_sessions():
        return [summarize(s, state) for s in state.sessions.values()]

    @app.get("/sessions/{session_id}")
    def get_session_endpoint(session_id: str):
        return summarize(get_session(session_id), state)

    @app.post("/sessions/{session_id}/advance")
    def advance_session(
        session_id: str, idempotency_key: str | None = Header(default=None)
    ):
        session = get_session(session_id)

        def compute() -> dict:
            with state.lock_for(session_id):
                if session.status is not SessionStatus.AWAITING_MODEL:
                    raise HTTPException(
                        409, f"wrong state: {session.status.value}"
                    )
                try:
                    draft_turn(session, state.chat, state.registry)
                except PlannerError as exc:
                    raise HTTPException(502, f"planner error: {exc}")
                return summarize(session, state)

        return idempotent(idempotency_key, compute)

    @app.get("/sessions/{session_id}/questions")
    def list_pending_questions(session_id: str):
        session = get_session(session_id)
        if not session.turns or session.status is not SessionStatus.AWAITING_HUMAN:
            return []
        turn = session.turns[-1]
        verdicts = turn.agent_verdicts.verdicts if turn.agent_verdicts else []
        out = []
        for q in turn.residual_for_human:
            analyses = {
                v.agent_id: v.per_question[q.label].analysis
                for v in verdicts
                if q.label in v.per_question
            }
            out.append({"label": q.label, "text": q.text, "agent_analyses": analyses})
        return out

    @app.post("/sessions/{session_id}/answers")
    def post_answers(
        session_id: str,
        body: PostAnswersRequest,
        idempotency_key: str | None = Header(default=None),
    ):
        session = get_session(session_id)

        def compute() -> dict:
            with state.lock_for(session_id):
                answers = [
                    Answer(a.label, a.text, AnswerSource.HUMAN) for a in body.answers
                ]
                try:
                    submit_human_answers(session, answers)
                except UnknownLabel as exc:
                    raise HTTPException(422, str(exc))
                except IncompleteAnswers as exc:
                    raise HTTPException(
                        422, f"incomplete answers, missing: {exc.missing}"
                    )
                except PlannerError as exc:
                    raise HTTPException(409, str(exc))
                return summarize(session, state)

        return idempotent(idempotency_key, compute)

    @app.post("/sessions/{session_id}/finalize", response_class=PlainTextResponse)
    def finalize_session(session_id: str):
        session = get_session(session_id)
        try:
            tree = finalize(session)
        except NotConverged as exc:
            raise HTTPException(409, str(exc))
        return PlainTextResponse(bt.serialize_bt(tree), media_type="application/xml")

    @app.get("/sessions/{session_id}/tree", response_class=PlainTextResponse)
    def current_tree(session_id: str):
        session = get_session(session_id)
        if not session.turns:
            raise HTTPException(404, "no draft yet")
        return PlainTextResponse(
            bt.serialize_bt(session.turns[-1].bt_draft), media_type="application/xml"
        )

    # ---------------------------------------------------------------- executions

    @app.post("/executions")
    def start_execution(
        body: StartExecutionRequest,
        idempotency_key: str | None = Header(default=None),
    ):
        def compute() -> dict:
            if body.tree_xml:
                tree = bt.parse_bt_xml(body.tree_xml)
            elif body.session_id:
                session = get_session(body.session_id)
                try:
                    tree = finalize(session)
                except NotConverged as exc:
                    raise HTTPException(409, str(exc))
            else:
                raise HTTPException(422, "session_id or tree_xml required")

            bindings = {
                name: Binding(
                    kind=BindingKind(spec.get("kind", "External")),
                    policy_id=spec.get("policy_id", ""),
                    prompt=spec.get("prompt", ""),
                    wait_s=spec.get("wait_s", 0.0),
                )
                for name, spec in body.bindings.items()
            }
            evaluator = ScriptedConditionEvaluator(dict(body.conditions))
            try:
                plan = bind_policies(tree, bindings, evaluator)
                stats = simulate(
                    plan,
                    SimProfile({k: float(v) for k, v in body.profile.items()}),
                    seed=body.seed,
                    runs=body.runs,
                    max_ticks=body.max_ticks,
                )
            except UnboundAction as exc:
                raise HTTPException(422, str(exc))
            except MissingProfile as exc:
                raise HTTPException(422, str(exc))

            # re-run a single traced episode for the event stream
            from .executor import _BernoulliRuntime, run_to_completion

            runtime = _BernoulliRuntime(
                SimProfile({k: float(v) for k, v in body.profile.items()}), body.seed
            )
            status, trace = run_to_completion(plan, runtime, max_ticks=body.max_ticks)

            execution_id = uuid.uuid4().hex[:12]
            record = ExecutionRecord(execution_id=execution_id)
            for i, event in enumerate(trace.events):
                record.events.append(
                    {
                        "index": i,
                        "tick": event.tick,
                        "path": event.path,
                        "kind": event.kind,
                        "payload": event.payload,
                    }
                )
            record.events.append(
                {
                    "index": len(record.events),
                    "kind": "Terminal",
                    "status": status.value,
                    "statistics": stats.to_dict(),
                }
            )
            record.done = True
            state.executions[execution_id] = record
            return {
                "execution_id": execution_id,
                "status": status.value,
                "statistics": stats.to_dict(),
            }

        return idempotent(idempotency_key, compute)

    @app.get("/executions/{execution_id}/events")
    def stream_events(execution_id: str, from_index: int = 0):
        record = state.executions.get(execution_id)
        if record is None:
            raise HTTPException(404, f"no execution {execution_id}")

        def generate() -> Iterator[str]:
            for event in record.events[from_index:]:
                yield f"id: {event['index']}\ndata: {json.dumps(event, sort_keys=True)}\n\n"

        return StreamingResponse(generate(), media_type="text/event-stream")

    # -------------------------------------------------------------------- eval

    @app.post("/eval/ted")
    def eval_ted(body: EvalTedRequest):
        try:
            t1 = bt.parse_bt_xml(body.a_xml, tree_id="a")
            t2 = bt.parse_bt_xml(body.b_xml, tree_id="b")
        except bt.BtError as exc:
            raise HTTPException(422, str(exc))
        result = normalized_ted(
            t1, t2, EditCosts(body.insert, body.delete, body.relabel)
        )
        return {
            "raw": result.raw,
            "normalized": result.normalized,
            "n1": result.n1,
            "n2": result.n2,
            "alpha": result.alpha,
        }

    @app.post("/eval/sim")
    def eval_sim(body: EvalSimRequest):
        try:
            source = bt.parse_bt_xml(body.source_xml, tree_id="source")
            target = bt.parse_bt_xml(body.target_xml, tree_id="target")
        except bt.BtError as exc:
            raise HTTPException(422, str(exc))
        result = semantic_similarity(source, target, HashedBagOfWordsEmbedder())
        return {
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

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
