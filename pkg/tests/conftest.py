import random

import pytest
from hypothesis import strategies as st

from btplanner import bt
from btplanner.bt import BehaviorTree, BTNode, NodeKind


SMOOTHIE_XML = """\
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


@pytest.fixture
def smoothie_tree() -> BehaviorTree:
    return bt.parse_bt_xml(SMOOTHIE_XML, tree_id="smoothie")


# ---------------------------------------------------------------------------
# Random tree generation (seeded, for oracle grids)

LABELS = ["a", "b", "c"]


def random_tree(rng: random.Random, max_nodes: int, labels=LABELS) -> BehaviorTree:
    """Random valid tree with at most max_nodes nodes; internal nodes are
    Sequence/Fallback, leaves Action/Condition."""
    budget = rng.randint(1, max_nodes)

    def build(budget: int) -> tuple[BTNode, int]:
        if budget <= 1 or rng.random() < 0.4:
            kind = rng.choice([NodeKind.ACTION, NodeKind.CONDITION])
            return BTNode(kind, rng.choice(labels)), 1
        kind = rng.choice([NodeKind.SEQUENCE, NodeKind.FALLBACK])
        used = 1
        children = []
        n_children = rng.randint(1, min(4, budget - 1))
        for _ in range(n_children):
            if used >= budget:
                break
            child, n = build(budget - used)
            children.append(child)
            used += n
        if not children:
            return BTNode(rng.choice([NodeKind.ACTION, NodeKind.CONDITION]), rng.choice(labels)), 1
        return BTNode(kind, rng.choice(labels), {}, tuple(children)), used

    root, _ = build(budget)
    return BehaviorTree(root=root)


# ---------------------------------------------------------------------------
# Hypothesis strategies

label_st = st.sampled_from(["a", "b", "c", "wait", "close lid", "pour"])
attrs_st = st.dictionaries(
    st.sampled_from(["count", "duration", "target"]),
    st.sampled_from(["1", "2", "60", "x"]),
    max_size=2,
)


def node_strategy(depth: int = 0) -> st.SearchStrategy[BTNode]:
    leaf = st.builds(
        BTNode,
        st.sampled_from([NodeKind.ACTION, NodeKind.CONDITION]),
        label_st,
        attrs_st,
        st.just(()),
    )
    if depth >= 5:
        return leaf
    children = st.lists(st.deferred(lambda: node_strategy(depth + 1)), min_size=1, max_size=4)
    composite = st.builds(
        lambda kind, name, attrs, kids: BTNode(kind, name, attrs, tuple(kids)),
        st.sampled_from([NodeKind.SEQUENCE, NodeKind.FALLBACK]),
        label_st,
        attrs_st,
        children,
    )
    retry_node = st.builds(
        lambda attempts, child: BTNode(
            NodeKind.RETRY, "retry", {"num_attempts": str(attempts)}, (child,)
        ),
        st.integers(min_value=1, max_value=4),
        st.deferred(lambda: node_strategy(depth + 1)),
    )
    return st.one_of(leaf, composite, retry_node)


tree_st = st.builds(lambda root: BehaviorTree(root=root), node_strategy())
