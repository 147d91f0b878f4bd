"""Tree reading, oracle conversion, and bracket-symbol emission."""

import numpy as np
import pytest

from wordsync.treebank import (
    GEN, NT, REDUCE, Action, ActionSequenceError, Tree, TreeParseError,
    actions_to_tree, bracket_symbols, parse_bracketed, random_tree,
    tree_to_actions,
)

CAT_SENTENCE = "(S (NP the hungry cat) (VP meows))"


class TestParseBracketed:
    def test_cat_sentence_shape(self):
        tree = parse_bracketed(CAT_SENTENCE)
        assert tree.label == "S"
        assert len(tree.children) == 2
        assert tree.children[0].label == "NP"
        assert tree.children[0].terminals() == ["the", "hungry", "cat"]
        assert tree.children[1].terminals() == ["meows"]

    def test_single_terminal(self):
        tree = parse_bracketed("(X a)")
        assert tree.label == "X"
        assert tree.children[0].is_terminal

    def test_unbalanced_reports_offset(self):
        with pytest.raises(TreeParseError, match="character"):
            parse_bracketed("(S (NP a")

    def test_empty_constituent(self):
        with pytest.raises(TreeParseError, match="empty constituent"):
            parse_bracketed("(S (NP) a)")

    def test_outer_wrapper_unwrapped(self):
        tree = parse_bracketed("( (S (NP a) (VP b)) )")
        assert tree.label == "S"

    def test_trailing_material(self):
        with pytest.raises(TreeParseError, match="trailing"):
            parse_bracketed("(X a) (Y b)")

    def test_render_round_trip(self):
        assert parse_bracketed(CAT_SENTENCE).render() == CAT_SENTENCE


class TestOracle:
    def test_hand_traversal_of_cat_sentence(self):
        expected = [Action(NT, "S"), Action(NT, "NP"), Action(GEN, "the"),
                    Action(GEN, "hungry"), Action(GEN, "cat"), Action(REDUCE),
                    Action(NT, "VP"), Action(GEN, "meows"), Action(REDUCE),
                    Action(REDUCE)]
        assert tree_to_actions(parse_bracketed(CAT_SENTENCE)) == expected

    def test_minimal_tree(self):
        assert tree_to_actions(parse_bracketed("(X a)")) == [
            Action(NT, "X"), Action(GEN, "a"), Action(REDUCE)]

    def test_inverse_of_hand_traversal(self):
        actions = tree_to_actions(parse_bracketed(CAT_SENTENCE))
        assert actions_to_tree(actions) == parse_bracketed(CAT_SENTENCE)

    def test_action_counts(self):
        tree = parse_bracketed(CAT_SENTENCE)
        actions = tree_to_actions(tree)
        n_nt = sum(1 for a in actions if a.kind == NT)
        n_red = sum(1 for a in actions if a.kind == REDUCE)
        n_gen = sum(1 for a in actions if a.kind == GEN)
        assert n_nt == n_red == tree.nonterminal_count()
        assert n_gen == len(tree.terminals())

    def test_round_trip_on_random_trees(self):
        rng = np.random.default_rng(77)
        nts = ["S", "NP", "VP", "PP", "X"]
        words = ["a", "b", "c", "d", "e", "f"]
        for _ in range(1000):
            tree = random_tree(rng, nts, words, max_depth=6)
            assert actions_to_tree(tree_to_actions(tree)) == tree

    def test_action_sequence_length_identity(self):
        rng = np.random.default_rng(78)
        for _ in range(200):
            tree = random_tree(rng, ["A", "B"], ["x", "y", "z"], max_depth=5)
            actions = tree_to_actions(tree)
            assert len(actions) == 2 * tree.nonterminal_count() + len(tree.terminals())


class TestActionsToTreeErrors:
    def test_empty_constituent_rejected(self):
        with pytest.raises(ActionSequenceError, match="index 1"):
            actions_to_tree([Action(NT, "X"), Action(REDUCE)])

    def test_reduce_without_open(self):
        with pytest.raises(ActionSequenceError, match="index 0"):
            actions_to_tree([Action(REDUCE)])

    def test_gen_outside_constituent(self):
        with pytest.raises(ActionSequenceError, match="index 0"):
            actions_to_tree([Action(GEN, "a")])

    def test_incomplete_derivation(self):
        with pytest.raises(ActionSequenceError, match="did not complete"):
            actions_to_tree([Action(NT, "X"), Action(GEN, "a")])

    def test_action_after_root_closed(self):
        actions = [Action(NT, "X"), Action(GEN, "a"), Action(REDUCE), Action(GEN, "b")]
        with pytest.raises(ActionSequenceError, match="index 3"):
            actions_to_tree(actions)


class TestBracketSymbols:
    def test_length_seven_prefix(self):
        tree = parse_bracketed(CAT_SENTENCE)
        symbols = bracket_symbols(tree)
        assert symbols[:7] == ["(S", "(NP", "the", "hungry", "cat", ")NP", "(VP"]
        assert len(symbols[:7]) == 7

    def test_minimal_tree(self):
        assert bracket_symbols(parse_bracketed("(X a)")) == ["(X", "a", ")X"]

    def test_symbol_count_identity(self):
        rng = np.random.default_rng(79)
        for _ in range(200):
            tree = random_tree(rng, ["A", "B", "C"], ["x", "y"], max_depth=5)
            symbols = bracket_symbols(tree)
            assert len(symbols) == 2 * tree.nonterminal_count() + len(tree.terminals())
