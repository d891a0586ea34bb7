"""Tree edit distance between behavior trees.

The fast path is the Zhang-Shasha dynamic program over postorder keyroots.
A memoized exhaustive forest-distance computation serves as an independent
oracle for small trees. Distances are normalized into [0, 1] via
2*d / (alpha*(|T1|+|T2|) + d), where alpha is the maximum edit-operation
cost.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .bt import BehaviorTree, BTNode, node_count, postorder


class TreeTooLarge(Exception):
    pass


@dataclass(frozen=True)
class EditCosts:
    insert: float = 1.0
    delete: float = 1.0
    relabel: float = 1.0

    def __post_init__(self) -> None:
        if min(self.insert, self.delete, self.relabel) < 0:
            raise ValueError("edit costs must be nonnegative")
        if max(self.insert, self.delete, self.relabel) <= 0:
            raise ValueError("at least one edit cost must be positive")

    @property
    def alpha(self) -> float:
        return max(self.insert, self.delete, self.relabel)


UNIT_COSTS = EditCosts()


@dataclass(frozen=True)
class TedResult:
    raw: float
    normalized: float
    n1: int
    n2: int
    alpha: float


# ---------------------------------------------------------------------------
# Zhang-Shasha

class _Annotated:
    """Postorder node list, leftmost-leaf-descendant indices, and keyroots."""

    def __init__(self, tree: BehaviorTree) -> None:
        nodes = postorder(tree)
        self.labels = [label for _, label in nodes]
        index_of = {id(node): i for i, (node, _) in enumerate(nodes)}

        def leftmost(node: BTNode) -> BTNode:
            while node.children:
                node = node.children[0]
            return node

        self.lld = [index_of[id(leftmost(node))] for node, _ in nodes]
        n = len(nodes)
        # keyroots: nodes with no left sibling on their root path (largest
        # postorder index per distinct leftmost-leaf)
        seen: dict[int, int] = {}
        for i in range(n):
            seen[self.lld[i]] = i
        self.keyroots = sorted(seen.values())
        self.size = n


def tree_edit_distance(
    t1: BehaviorTree, t2: BehaviorTree, costs: EditCosts = UNIT_COSTS
) -> float:
    """Minimum total cost of insertions, deletions, and relabels turning
    t1 into t2 (Zhang-Shasha)."""
    a, b = _Annotated(t1), _Annotated(t2)
    treedist = [[0.0] * b.size for _ in range(a.size)]

    for i in a.keyroots:
        for j in b.keyroots:
            _treedist(a, b, i, j, costs, treedist)
    return treedist[a.size - 1][b.size - 1]


def _treedist(
    a: _Annotated,
    b: _Annotated,
    i: int,
    j: int,
    costs: EditCosts,
    treedist: list[list[float]],
) -> None:
    li, lj = a.lld[i], b.lld[j]
    m, n = i - li + 2, j - lj + 2
    fd = [[0.0] * n for _ in range(m)]

    for x in range(1, m):
        fd[x][0] = fd[x - 1][0] + costs.delete
    for y in range(1, n):
        fd[0][y] = fd[0][y - 1] + costs.insert

    for x in range(1, m):
        for y in range(1, n):
            ni, nj = li + x - 1, lj + y - 1
            if a.lld[ni] == li and b.lld[nj] == lj:
                # both prefixes are whole trees rooted at ni / nj
                rel = 0.0 if a.labels[ni] == b.labels[nj] else costs.relabel
                fd[x][y] = min(
                    fd[x - 1][y] + costs.delete,
                    fd[x][y - 1] + costs.insert,
                    fd[x - 1][y - 1] + rel,
                )
                treedist[ni][nj] = fd[x][y]
            else:
                p, q = a.lld[ni] - li, b.lld[nj] - lj
                fd[x][y] = min(
                    fd[x - 1][y] + costs.delete,
                    fd[x][y - 1] + costs.insert,
                    fd[p][q] + treedist[ni][nj],
                )


# ---------------------------------------------------------------------------
# Brute-force oracle

BRUTE_FORCE_MAX_NODES = 8


def brute_force_ted(
    t1: BehaviorTree, t2: BehaviorTree, costs: EditCosts = UNIT_COSTS
) -> float:
    """Exhaustive recursive forest distance; exact, no keyroot optimization.

    Guarded to small trees: the recursion is exponential in spirit (memoized
    on forest identity) and exists purely to cross-check the fast path.
    """
    for t in (t1, t2):
        n = node_count(t)
        if n > BRUTE_FORCE_MAX_NODES:
            raise TreeTooLarge(f"{n} nodes exceeds oracle guard {BRUTE_FORCE_MAX_NODES}")
    return _forest_dist((t1.root,), (t2.root,), costs)


@lru_cache(maxsize=None)
def _forest_size(forest: tuple[BTNode, ...]) -> int:
    return sum(1 + _forest_size(t.children) for t in forest)


# cache shared across calls: subforests recur heavily over exhaustive grids
@lru_cache(maxsize=2_000_000)
def _forest_dist(
    f1: tuple[BTNode, ...], f2: tuple[BTNode, ...], costs: EditCosts
) -> float:
    if not f1 and not f2:
        return 0.0
    if not f1:
        return costs.insert * _forest_size(f2)
    if not f2:
        return costs.delete * _forest_size(f1)
    v, w = f1[-1], f2[-1]
    rel = 0.0 if v.label == w.label else costs.relabel
    return min(
        costs.delete + _forest_dist(f1[:-1] + v.children, f2, costs),
        costs.insert + _forest_dist(f1, f2[:-1] + w.children, costs),
        _forest_dist(f1[:-1], f2[:-1], costs)
        + _forest_dist(v.children, w.children, costs)
        + rel,
    )


# ---------------------------------------------------------------------------
# Normalization

def normalized_ted(
    t1: BehaviorTree, t2: BehaviorTree, costs: EditCosts = UNIT_COSTS
) -> TedResult:
    raw = tree_edit_distance(t1, t2, costs)
    n1, n2 = node_count(t1), node_count(t2)
    alpha = costs.alpha
    normalized = 2.0 * raw / (alpha * (n1 + n2) + raw)
    return TedResult(raw=raw, normalized=normalized, n1=n1, n2=n2, alpha=alpha)
