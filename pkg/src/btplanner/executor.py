"""Tick-based behavior-tree interpreter with per-action policy bindings,
retry semantics, adapter-based condition evaluation, and a Monte-Carlo
simulation harness driven by per-action Bernoulli success rates.

Ticks are stateless: composites derive status from their children on every
pass (Sequence fail-fast/succeed-all, Fallback succeed-fast/fail-all), and
a Retry decorator re-ticks its child on Failure up to num_attempts times
within a single tick. Actions are atomic per tick.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Protocol, Sequence

import numpy as np

from .bt import BehaviorTree, BTNode, NodeKind, iter_nodes
from .providers import VerdictUnparseable, VlmProvider


class UnboundAction(Exception):
    def __init__(self, missing: Sequence[str]) -> None:
        self.missing = sorted(set(missing))
        super().__init__(f"actions without bindings: {', '.join(self.missing)}")


class MissingProfile(Exception):
    pass


class TickStatus(str, Enum):
    SUCCESS = "Success"
    FAILURE = "Failure"
    RUNNING = "Running"


class BindingKind(str, Enum):
    EXTERNAL = "External"
    NOOP = "NoOp"
    WAIT = "Wait"


@dataclass(frozen=True)
class Binding:
    kind: BindingKind
    policy_id: str = ""
    prompt: str = ""
    wait_s: float = 0.0

    def __post_init__(self) -> None:
        if self.kind is BindingKind.WAIT and self.wait_s <= 0:
            raise ValueError("Wait binding requires a positive duration")


@dataclass(frozen=True)
class ExecutablePlan:
    tree: BehaviorTree
    bindings: dict[str, Binding]
    condition_evaluator: "ConditionEvaluator"


@dataclass(frozen=True)
class TraceEvent:
    tick: int
    path: str
    kind: str  # Enter | PolicyInvoked | ConditionJudged | Result | Warning | BudgetExhausted
    payload: str = ""


@dataclass
class ExecutionTrace:
    events: list[TraceEvent] = field(default_factory=list)

    def add(self, tick: int, path: str, kind: str, payload: str = "") -> None:
        self.events.append(TraceEvent(tick, path, kind, payload))

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(
                {"tick": e.tick, "path": e.path, "kind": e.kind, "payload": e.payload},
                sort_keys=True,
            )
            + "\n"
            for e in self.events
        )


class ConditionEvaluator(Protocol):
    def evaluate(self, condition_text: str) -> bool: ...


@dataclass
class ScriptedConditionEvaluator:
    verdicts: dict[str, bool] = field(default_factory=dict)
    default: bool = False

    def evaluate(self, condition_text: str) -> bool:
        return self.verdicts.get(condition_text, self.default)


class VlmConditionEvaluator:
    """Judges conditions from before/after images through a vision-language
    provider; image references are supplied by a camera callback."""

    def __init__(
        self,
        vlm: VlmProvider,
        capture: Callable[[], str | None] = lambda: None,
    ) -> None:
        self.vlm = vlm
        self.capture = capture
        self._last_image: str | None = None

    def evaluate(self, condition_text: str) -> bool:
        before, self._last_image = self._last_image, self.capture()
        return judge_condition(self.vlm, condition_text, before, self._last_image)


def judge_condition(
    evaluator: VlmProvider,
    condition_text: str,
    before: str | None = None,
    after: str | None = None,
) -> bool:
    """Unparseable verdicts default to False: a failed check routes execution
    into retry/fallback paths instead of skipping verification."""
    try:
        verdict, _ = evaluator.judge(condition_text, before, after)
        return verdict
    except VerdictUnparseable:
        return False


class ActionRuntime(Protocol):
    def invoke(self, action_name: str, binding: Binding) -> bool: ...


@dataclass
class ScriptedActionRuntime:
    """Pops scripted outcomes per action name; exhausted scripts succeed."""

    outcomes: dict[str, list[bool]] = field(default_factory=dict)
    invocations: list[str] = field(default_factory=list)

    def invoke(self, action_name: str, binding: Binding) -> bool:
        self.invocations.append(action_name)
        queue = self.outcomes.get(action_name)
        if queue:
            return queue.pop(0)
        return True


class HttpPolicyRuntime:
    """Adapter for a policy server: POST the action name, prompt, and policy
    id; the response status field decides success."""

    def __init__(self, endpoint: str, timeout_s: float = 60.0) -> None:
        self.endpoint = endpoint
        self.timeout_s = timeout_s

    def invoke(self, action_name: str, binding: Binding) -> bool:
        import httpx

        if binding.kind is BindingKind.NOOP:
            return True
        if binding.kind is BindingKind.WAIT:
            time.sleep(binding.wait_s)
            return True
        try:
            resp = httpx.post(
                self.endpoint,
                json={
                    "action": action_name,
                    "policy_id": binding.policy_id,
                    "prompt": binding.prompt,
                    "timeout_s": self.timeout_s,
                },
                timeout=self.timeout_s,
            )
            return resp.status_code < 400 and resp.json().get("status") == "success"
        except httpx.HTTPError:
            return False


# ---------------------------------------------------------------------------
# Binding and ticking

def action_names(tree: BehaviorTree) -> list[str]:
    return [n.name for _, n in iter_nodes(tree) if n.kind is NodeKind.ACTION]


def bind_policies(
    tree: BehaviorTree,
    bindings: dict[str, Binding],
    evaluator: ConditionEvaluator,
) -> ExecutablePlan:
    """Every action, including non-physical ones, must be explicitly bound
    (NoOp and Wait included); silent unbinding is forbidden."""
    missing = [name for name in action_names(tree) if name not in bindings]
    if missing:
        raise UnboundAction(missing)
    return ExecutablePlan(tree=tree, bindings=dict(bindings), condition_evaluator=evaluator)


def tick(
    plan: ExecutablePlan,
    runtime: ActionRuntime,
    trace: ExecutionTrace | None = None,
    tick_index: int = 0,
) -> TickStatus:
    trace = trace if trace is not None else ExecutionTrace()
    return _tick_node(plan.tree.root, "root", plan, runtime, trace, tick_index)


def _tick_node(
    node: BTNode,
    path: str,
    plan: ExecutablePlan,
    runtime: ActionRuntime,
    trace: ExecutionTrace,
    tick_index: int,
) -> TickStatus:
    trace.add(tick_index, path, "Enter")
    status = _dispatch(node, path, plan, runtime, trace, tick_index)
    trace.add(tick_index, path, "Result", status.value)
    return status


def _dispatch(
    node: BTNode,
    path: str,
    plan: ExecutablePlan,
    runtime: ActionRuntime,
    trace: ExecutionTrace,
    tick_index: int,
) -> TickStatus:
    if node.kind is NodeKind.SEQUENCE:
        for i, child in enumerate(node.children):
            status = _tick_node(child, f"{path}.{i}", plan, runtime, trace, tick_index)
            if status is not TickStatus.SUCCESS:
                return status
        return TickStatus.SUCCESS

    if node.kind is NodeKind.FALLBACK:
        for i, child in enumerate(node.children):
            status = _tick_node(child, f"{path}.{i}", plan, runtime, trace, tick_index)
            if status is not TickStatus.FAILURE:
                return status
        return TickStatus.FAILURE

    if node.kind is NodeKind.RETRY:
        attempts = int(node.attributes.get("num_attempts", "3"))
        status = TickStatus.FAILURE
        for _ in range(attempts):
            status = _tick_node(node.children[0], f"{path}.0", plan, runtime, trace, tick_index)
            if status is not TickStatus.FAILURE:
                return status
        return status

    if node.kind is NodeKind.CONDITION:
        try:
            verdict = plan.condition_evaluator.evaluate(node.name)
        except Exception as exc:  # transport failures surface as Failure
            trace.add(tick_index, path, "Warning", f"condition error: {exc}")
            verdict = False
        trace.add(tick_index, path, "ConditionJudged", str(verdict))
        return TickStatus.SUCCESS if verdict else TickStatus.FAILURE

    # Action
    binding = plan.bindings[node.name]
    trace.add(tick_index, path, "PolicyInvoked", binding.policy_id or binding.kind.value)
    try:
        outcome = runtime.invoke(node.name, binding)
    except Exception as exc:
        trace.add(tick_index, path, "Warning", f"policy error: {exc}")
        outcome = False
    if isinstance(outcome, TickStatus):
        return outcome
    return TickStatus.SUCCESS if outcome else TickStatus.FAILURE


def run_to_completion(
    plan: ExecutablePlan,
    runtime: ActionRuntime,
    max_ticks: int = 100,
) -> tuple[TickStatus, ExecutionTrace]:
    if max_ticks < 1:
        raise ValueError("max_ticks must be >= 1")
    trace = ExecutionTrace()
    status = TickStatus.RUNNING
    for i in range(max_ticks):
        status = tick(plan, runtime, trace, tick_index=i)
        if status is not TickStatus.RUNNING:
            return status, trace
    trace.add(max_ticks - 1, "root", "BudgetExhausted", str(max_ticks))
    return TickStatus.FAILURE, trace


# ---------------------------------------------------------------------------
# Stochastic simulation

@dataclass(frozen=True)
class SimProfile:
    success_probs: dict[str, float]

    def __post_init__(self) -> None:
        for name, p in self.success_probs.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"success_prob for {name} must be in [0,1], got {p}")


@dataclass
class SimStats:
    runs: int
    completions: int
    completion_rate: float
    attempts: dict[str, int]
    mean_attempts_per_run: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "runs": self.runs,
            "completions": self.completions,
            "completion_rate": self.completion_rate,
            "attempts": dict(sorted(self.attempts.items())),
            "mean_attempts_per_run": dict(sorted(self.mean_attempts_per_run.items())),
        }


class _BernoulliRuntime:
    """Per-action independent RNG streams derived from (seed, action name)."""

    def __init__(self, profile: SimProfile, seed: int) -> None:
        self._probs = profile.success_probs
        self._rngs = {
            name: np.random.default_rng([seed, _stable_stream_id(name)])
            for name in profile.success_probs
        }
        self.attempts: dict[str, int] = {name: 0 for name in profile.success_probs}

    def invoke(self, action_name: str, binding: Binding) -> bool:
        if binding.kind is not BindingKind.EXTERNAL:
            return True  # NoOp and Wait always succeed; Wait is one sim tick
        self.attempts[action_name] += 1
        return bool(self._rngs[action_name].random() < self._probs[action_name])


def _stable_stream_id(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "big")


def simulate(
    plan: ExecutablePlan,
    profile: SimProfile,
    seed: int = 0,
    runs: int = 1,
    max_ticks: int = 100,
) -> SimStats:
    """Monte-Carlo completion statistics; deterministic for a given seed."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    external = [
        name
        for name, binding in plan.bindings.items()
        if binding.kind is BindingKind.EXTERNAL and name in action_names(plan.tree)
    ]
    missing = [name for name in external if name not in profile.success_probs]
    if missing:
        raise MissingProfile(f"no success_prob for actions: {sorted(missing)}")

    runtime = _BernoulliRuntime(profile, seed)
    completions = 0
    for _ in range(runs):
        status, _ = run_to_completion(plan, runtime, max_ticks=max_ticks)
        if status is TickStatus.SUCCESS:
            completions += 1
    return SimStats(
        runs=runs,
        completions=completions,
        completion_rate=completions / runs,
        attempts=dict(runtime.attempts),
        mean_attempts_per_run={
            name: count / runs for name, count in runtime.attempts.items()
        },
    )


# ---------------------------------------------------------------------------
# Configuration files

def load_bindings(path) -> dict[str, Binding]:
    data = json.loads(open(path, encoding="utf-8").read())
    bindings = {}
    for name, spec in data.items():
        bindings[name] = Binding(
            kind=BindingKind(spec["kind"]),
            policy_id=spec.get("policy_id", ""),
            prompt=spec.get("prompt", ""),
            wait_s=spec.get("wait_s", 0.0),
        )
    return bindings


def load_profile(path) -> SimProfile:
    data = json.loads(open(path, encoding="utf-8").read())
    return SimProfile(success_probs={k: float(v) for k, v in data.items()})
