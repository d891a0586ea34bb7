import random

import pytest
from hypothesis import given, settings

from btplanner.bt import BehaviorTree, action, parse_bt_xml, sequence
from btplanner.ted import (
    EditCosts,
    TreeTooLarge,
    UNIT_COSTS,
    brute_force_ted,
    normalized_ted,
    tree_edit_distance,
)

from conftest import random_tree, tree_st


def seq_tree(xml: str) -> BehaviorTree:
    return parse_bt_xml(xml)


A_BC = seq_tree('<Root><Sequence name="A"><Action name="B"/><Action name="C"/></Sequence></Root>')
A_BD = seq_tree('<Root><Sequence name="A"><Action name="B"/><Action name="D"/></Sequence></Root>')
A_ = seq_tree('<Root><Action name="A"/></Root>')
A_B = seq_tree('<Root><Sequence name="A"><Action name="B"/></Sequence></Root>')


class TestTreeEditDistance:
    def test_identical_trees_zero(self, smoothie_tree):
        assert tree_edit_distance(smoothie_tree, smoothie_tree) == 0.0

    def test_single_relabel(self):
        # brute-force oracle confirms a single relabel is optimal
        assert brute_force_ted(A_BC, A_BD) == 1.0
        assert tree_edit_distance(A_BC, A_BD) == 1.0

    def test_single_insertion(self):
        # A as a bare Action leaf vs Sequence(A)(B): relabel + insert is not
        # needed; the single-node tree uses the same label only via the
        # Sequence kind, so compare Sequence-rooted shapes
        t1 = seq_tree('<Root><Sequence name="A"><Action name="B"/></Sequence></Root>')
        t2 = seq_tree(
            '<Root><Sequence name="A"><Action name="B"/><Action name="C"/></Sequence></Root>'
        )
        assert brute_force_ted(t1, t2) == 1.0
        assert tree_edit_distance(t1, t2) == 1.0

    def test_asymmetric_costs(self):
        costs = EditCosts(insert=2.0, delete=1.0, relabel=5.0)
        t1 = seq_tree('<Root><Sequence name="A"><Action name="B"/></Sequence></Root>')
        t2 = seq_tree(
            '<Root><Sequence name="A"><Action name="B"/><Action name="C"/></Sequence></Root>'
        )
        assert tree_edit_distance(t1, t2, costs) == brute_force_ted(t1, t2, costs) == 2.0
        assert tree_edit_distance(t2, t1, costs) == brute_force_ted(t2, t1, costs) == 1.0

    def test_agrees_with_oracle_on_random_pairs(self):
        rng = random.Random(7)
        for _ in range(200):
            t1, t2 = random_tree(rng, 6), random_tree(rng, 6)
            assert tree_edit_distance(t1, t2) == brute_force_ted(t1, t2)

    @given(tree_st, tree_st)
    @settings(max_examples=100, deadline=None)
    def test_symmetric_under_unit_costs(self, t1, t2):
        assert tree_edit_distance(t1, t2) == tree_edit_distance(t2, t1)

    @given(tree_st)
    @settings(max_examples=50, deadline=None)
    def test_self_distance_zero(self, tree):
        assert tree_edit_distance(tree, tree) == 0.0


class TestBruteForce:
    def test_identical_trees_zero(self):
        assert brute_force_ted(A_BC, A_BC) == 0.0

    def test_guard_enforced(self, smoothie_tree):
        with pytest.raises(TreeTooLarge):
            brute_force_ted(smoothie_tree, A_BC)


class TestNormalized:
    def test_identical_trees(self, smoothie_tree):
        result = normalized_ted(smoothie_tree, smoothie_tree)
        assert result.raw == 0.0
        assert result.normalized == 0.0

    def test_single_relabel_case(self):
        result = normalized_ted(A_BC, A_BD)
        assert result.raw == 1.0
        assert abs(result.normalized - 2.0 / 7.0) < 1e-12
        assert result.n1 == result.n2 == 3
        assert result.alpha == 1.0

    def test_single_insert_case(self):
        t1 = seq_tree('<Root><Sequence name="A"><Action name="B"/></Sequence></Root>')
        # Sequence(A)(B) has 2 nodes; adding a node gives raw 1, sizes 2+3
        t2 = seq_tree(
            '<Root><Sequence name="A"><Action name="B"/><Action name="C"/></Sequence></Root>'
        )
        result = normalized_ted(t1, t2)
        assert result.raw == 1.0
        assert abs(result.normalized - 2.0 / 6.0) < 1e-12

    def test_two_node_insert_case(self):
        # |T1|=1, |T2|=2, raw=1: normalized = 2/(3+1) = 0.5
        t1 = seq_tree('<Root><Sequence name="A"><Action name="B"/></Sequence></Root>')
        t2 = seq_tree('<Root><Sequence name="A"><Sequence name="B"><Action name="C"/></Sequence></Sequence></Root>')
        single = seq_tree('<Root><Condition name="A"/></Root>')
        pair = seq_tree('<Root><Sequence name="X"><Condition name="A"/></Sequence></Root>')
        # relabel-free embedding: raw = 1 insertion
        result = normalized_ted(single, pair)
        assert result.raw == brute_force_ted(single, pair) == 1.0
        assert abs(result.normalized - 0.5) < 1e-12

    @given(tree_st, tree_st)
    @settings(max_examples=100, deadline=None)
    def test_normalized_in_unit_interval(self, t1, t2):
        result = normalized_ted(t1, t2)
        assert 0.0 <= result.normalized <= 1.0

    def test_costs_validation(self):
        with pytest.raises(ValueError):
            EditCosts(insert=-1.0)
        with pytest.raises(ValueError):
            EditCosts(insert=0.0, delete=0.0, relabel=0.0)
