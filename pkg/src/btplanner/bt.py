"""Behavior tree data model, XML serialization, validation, and traversal.

Trees are built from five node kinds: Sequence and Fallback composites, a
Retry decorator, and Condition/Action leaves. Values are immutable after
construction; every operation here is pure.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator


class NodeKind(str, Enum):
    SEQUENCE = "Sequence"
    FALLBACK = "Fallback"
    RETRY = "Retry"
    CONDITION = "Condition"
    ACTION = "Action"


LEAF_KINDS = frozenset({NodeKind.CONDITION, NodeKind.ACTION})
COMPOSITE_KINDS = frozenset({NodeKind.SEQUENCE, NodeKind.FALLBACK})

RETRY_DEFAULT_NAME = "retry"


class BtError(Exception):
    """Base class for behavior-tree errors."""


class MalformedXml(BtError):
    pass


class UnknownNodeKind(BtError):
    pass


class ArityViolation(BtError):
    pass


class MissingAttribute(BtError):
    pass


@dataclass(frozen=True)
class BTNode:
    kind: NodeKind
    name: str
    # excluded from hash (dicts are unhashable) but still part of equality
    attributes: dict[str, str] = field(default_factory=dict, hash=False)
    children: tuple["BTNode", ...] = ()

    @property
    def label(self) -> tuple[str, str]:
        """Label used for equality in edit-distance comparisons: (kind, name)."""
        return (self.kind.value, self.name)

    def canonical_attrs(self) -> list[tuple[str, str]]:
        """Attributes in canonical order (sorted by key)."""
        return sorted(self.attributes.items())


class TreeSource(str, Enum):
    DRAFTED = "Drafted"
    FINAL = "Final"
    LOADED = "Loaded"


@dataclass(frozen=True)
class BehaviorTree:
    root: BTNode
    tree_id: str = ""
    source: TreeSource = TreeSource.LOADED


@dataclass(frozen=True)
class Issue:
    path: str
    severity: str  # "error" | "warning"
    message: str


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    issues: tuple[Issue, ...]


# ---------------------------------------------------------------------------
# Construction helpers

def sequence(name: str, *children: BTNode, **attrs: str) -> BTNode:
    return BTNode(NodeKind.SEQUENCE, name, dict(attrs), tuple(children))


def fallback(name: str, *children: BTNode, **attrs: str) -> BTNode:
    return BTNode(NodeKind.FALLBACK, name, dict(attrs), tuple(children))


def retry(child: BTNode, num_attempts: int = 3) -> BTNode:
    return BTNode(
        NodeKind.RETRY,
        RETRY_DEFAULT_NAME,
        {"num_attempts": str(num_attempts)},
        (child,),
    )


def action(name: str, **attrs: str) -> BTNode:
    return BTNode(NodeKind.ACTION, name, dict(attrs), ())


def condition(name: str, **attrs: str) -> BTNode:
    return BTNode(NodeKind.CONDITION, name, dict(attrs), ())


# ---------------------------------------------------------------------------
# Parsing

_KIND_BY_TAG = {k.value: k for k in NodeKind}


def parse_bt_xml(text: str, tree_id: str = "", source: TreeSource = TreeSource.LOADED) -> BehaviorTree:
    """Parse a BT XML document into a validated BehaviorTree.

    A top-level ``<Root>`` wrapper is transparent: its single child becomes
    the tree root. Child order in the document is preserved.
    """
    try:
        elem = ET.fromstring(text)
    except ET.ParseError as exc:
        raise MalformedXml(f"unparseable XML: {exc}") from exc

    if elem.tag == "Root":
        kids = list(elem)
        if len(kids) != 1:
            raise ArityViolation(
                f"Root must wrap exactly one node, found {len(kids)}"
            )
        elem = kids[0]

    root = _parse_element(elem, path="root")
    return BehaviorTree(root=root, tree_id=tree_id, source=source)


def _parse_element(elem: ET.Element, path: str) -> BTNode:
    kind = _KIND_BY_TAG.get(elem.tag)
    if kind is None:
        raise UnknownNodeKind(f"unknown element <{elem.tag}> at {path}")

    attrs = dict(elem.attrib)
    if kind is NodeKind.RETRY:
        name = RETRY_DEFAULT_NAME
        attrs.pop("name", None)
        if "num_attempts" not in attrs:
            raise MissingAttribute(f"Retry at {path} lacks num_attempts")
        _parse_num_attempts(attrs["num_attempts"], path)
    else:
        name = attrs.pop("name", "")
        if not name:
            raise MissingAttribute(f"<{elem.tag}> at {path} lacks a name")

    children = tuple(
        _parse_element(child, f"{path}.{i}") for i, child in enumerate(elem)
    )
    _check_arity(kind, len(children), path)
    return BTNode(kind, name, attrs, children)


def _parse_num_attempts(raw: str, path: str) -> int:
    try:
        n = int(raw)
    except ValueError:
        raise MissingAttribute(
            f"Retry at {path}: num_attempts {raw!r} is not an integer"
        ) from None
    if n < 1:
        raise ArityViolation(f"Retry at {path}: num_attempts must be >= 1, got {n}")
    return n


def _check_arity(kind: NodeKind, n_children: int, path: str) -> None:
    if kind in LEAF_KINDS and n_children != 0:
        raise ArityViolation(f"{kind.value} at {path} must be a leaf, has {n_children} children")
    if kind is NodeKind.RETRY and n_children != 1:
        raise ArityViolation(f"Retry at {path} must have exactly 1 child, has {n_children}")
    if kind in COMPOSITE_KINDS and n_children < 1:
        raise ArityViolation(f"{kind.value} at {path} must have >= 1 child")


# ---------------------------------------------------------------------------
# Serialization

def serialize_bt(tree: BehaviorTree) -> str:
    """Canonical XML: 2-space indentation, name attribute first, the rest
    sorted by key. parse_bt_xml(serialize_bt(t)) is structurally equal to t,
    and structurally equal trees serialize to byte-identical documents.
    """
    lines = ["<Root>"]
    _serialize_node(tree.root, lines, depth=1)
    lines.append("</Root>")
    return "\n".join(lines) + "\n"


def _serialize_node(node: BTNode, lines: list[str], depth: int) -> None:
    indent = "  " * depth
    parts = [node.kind.value]
    if node.kind is not NodeKind.RETRY:
        parts.append(f'name="{_escape(node.name)}"')
    for key, value in node.canonical_attrs():
        parts.append(f'{key}="{_escape(value)}"')
    open_tag = " ".join(parts)
    if node.children:
        lines.append(f"{indent}<{open_tag}>")
        for child in node.children:
            _serialize_node(child, lines, depth + 1)
        lines.append(f"{indent}</{node.kind.value}>")
    else:
        lines.append(f"{indent}<{open_tag}/>")


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


# ---------------------------------------------------------------------------
# Validation

def validate(tree: BehaviorTree) -> ValidationReport:
    """Enumerate every invariant violation with its node path."""
    issues: list[Issue] = []
    _validate_node(tree.root, "root", issues)
    ok = not any(i.severity == "error" for i in issues)
    return ValidationReport(ok=ok, issues=tuple(issues))


def _validate_node(node: BTNode, path: str, issues: list[Issue]) -> None:
    n = len(node.children)
    if node.kind in LEAF_KINDS and n != 0:
        issues.append(Issue(path, "error", f"{node.kind.value} must have no children, has {n}"))
    if node.kind is NodeKind.RETRY:
        if n != 1:
            issues.append(Issue(path, "error", f"Retry must have exactly 1 child, has {n}"))
        raw = node.attributes.get("num_attempts")
        if raw is None:
            issues.append(Issue(path, "error", "Retry lacks num_attempts"))
        else:
            try:
                if int(raw) < 1:
                    issues.append(Issue(path, "error", "num_attempts must be ≥ 1"))
            except ValueError:
                issues.append(Issue(path, "error", f"num_attempts {raw!r} is not an integer"))
    if node.kind in COMPOSITE_KINDS and n < 1:
        issues.append(Issue(path, "error", f"{node.kind.value} must have ≥ 1 child, has 0"))
    if not node.name:
        issues.append(Issue(path, "error", "node name is empty"))
    for i, child in enumerate(node.children):
        _validate_node(child, f"{path}.{i}", issues)


# ---------------------------------------------------------------------------
# Traversal

def iter_nodes(tree: BehaviorTree) -> Iterator[tuple[str, BTNode]]:
    """Preorder traversal yielding (path, node)."""

    def walk(node: BTNode, path: str) -> Iterator[tuple[str, BTNode]]:
        yield path, node
        for i, child in enumerate(node.children):
            yield from walk(child, f"{path}.{i}")

    yield from walk(tree.root, "root")


def node_count(tree: BehaviorTree) -> int:
    """Number of nodes, counting composites and decorators."""
    return sum(1 for _ in iter_nodes(tree))


def postorder(tree: BehaviorTree) -> list[tuple[BTNode, tuple[str, str]]]:
    """Left-to-right postorder listing of (node, label)."""
    out: list[tuple[BTNode, tuple[str, str]]] = []

    def walk(node: BTNode) -> None:
        for child in node.children:
            walk(child)
        out.append((node, node.label))

    walk(tree.root)
    return out


def extract_node_sentences(tree: BehaviorTree) -> list[str]:
    """Render one natural-language sentence per node, in postorder."""
    sentences = []
    for node, _ in postorder(tree):
        parts = [f"{node.kind.value} node: {node.name}"]
        for key, value in node.canonical_attrs():
            parts.append(f"{key}={value}")
        sentences.append("; ".join(parts))
    return sentences


def structurally_equal(a: BTNode, b: BTNode) -> bool:
    return (
        a.kind == b.kind
        and a.name == b.name
        and dict(a.attributes) == dict(b.attributes)
        and len(a.children) == len(b.children)
        and all(structurally_equal(x, y) for x, y in zip(a.children, b.children))
    )
