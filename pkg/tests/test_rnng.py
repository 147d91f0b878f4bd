"""Generative model: state transitions, scoring, composition, training."""

import math

import numpy as np
import pytest

from helpers import (
    enumerate_complete_derivations, replay, state_candidates, tiny_params,
)
from wordsync import rnng
from wordsync.optim import OptimizerState
from wordsync.treebank import (
    GEN, NT, REDUCE, Action, parse_bracketed, tree_to_actions,
)
from wordsync.vocab import build_vocab

CAT = parse_bracketed("(S (NP the hungry cat) (VP meows))")


def cat_params(variant=rnng.FULL, seed=3):
    cfg = rnng.RnngConfig(hidden_size=8, embedding_size=6, variant=variant, max_open=6)
    return rnng.RnngParams(build_vocab([CAT], min_count=1), cfg, np.random.default_rng(seed))


class TestInitState:
    def test_empty(self):
        params = tiny_params()
        state = rnng.init_state(params)
        assert state.open_count == 0
        assert state.log_prob == 0.0
        assert state.words_emitted == 0
        assert state.stack_entries() == []

    def test_deterministic_summary(self):
        params = tiny_params()
        a = rnng.init_state(params)
        b = rnng.init_state(params)
        assert np.array_equal(a.stack_summary, b.stack_summary)


class TestValidActions:
    def test_initial_state_only_nt(self):
        params = tiny_params()
        state = rnng.init_state(params)
        assert rnng.valid_actions(state, limits=params.limits) == {NT}

    def test_after_nt_gen_all_three(self):
        params = tiny_params()
        state = replay(params, [Action(NT, "S"), Action(GEN, "the")])
        assert rnng.valid_actions(state, limits=params.limits) == {NT, GEN, REDUCE}

    def test_empty_constituent_cannot_close(self):
        params = tiny_params()
        state = replay(params, [Action(NT, "S")])
        assert REDUCE not in rnng.valid_actions(state, limits=params.limits)

    def test_root_closure_blocked_mid_sentence(self):
        params = tiny_params()
        state = replay(params, [Action(NT, "S"), Action(GEN, "the")])
        kinds = rnng.valid_actions(state, sentence_done=False, limits=params.limits)
        assert REDUCE not in kinds
        nested = rnng.apply_action(state, Action(NT, "NP"), params)
        nested = rnng.apply_action(nested, Action(GEN, "cat"), params)
        kinds = rnng.valid_actions(nested, sentence_done=False, limits=params.limits)
        assert REDUCE in kinds  # not the last open constituent

    def test_max_open_caps_nt(self):
        params = tiny_params(max_open=2)
        state = replay(params, [Action(NT, "S"), Action(NT, "NP")])
        assert NT not in rnng.valid_actions(state, limits=params.limits)

    def test_finished_state_has_no_actions(self):
        params = tiny_params()
        state = replay(params, [Action(NT, "S"), Action(GEN, "the"), Action(REDUCE)])
        assert rnng.valid_actions(state, limits=params.limits) == set()


class TestScoring:
    def test_forced_move_probability_one(self):
        params = tiny_params()
        lp = rnng.score_actions(rnng.init_state(params), params)
        assert lp[rnng.ACTION_INDEX[NT]] == 0.0

    def test_uniform_logits_give_one_third(self):
        params = tiny_params()
        for w in params.action_mlp.weights + params.action_mlp.biases:
            w.values[...] = 0.0
        state = replay(params, [Action(NT, "S"), Action(GEN, "the")])
        lp = rnng.score_actions(state, params)
        np.testing.assert_allclose(lp, math.log(1.0 / 3.0), atol=1e-12)

    def test_action_normalization(self):
        params = tiny_params(seed=9)
        state = replay(params, [Action(NT, "S"), Action(GEN, "the")])
        lp = rnng.score_actions(state, params)
        assert abs(np.exp(lp).sum() - 1.0) < 1e-9

    def test_single_nonterminal_grammar_forced(self):
        params = tiny_params(lines=["(X a)", "(X b)"])
        state = rnng.init_state(params)
        assert rnng.score_nonterminal(state, params)[0] == 0.0

    def test_symbol_normalization(self):
        params = tiny_params(seed=5)
        state = replay(params, [Action(NT, "S")])
        assert abs(np.exp(rnng.score_nonterminal(state, params)).sum() - 1.0) < 1e-9
        assert abs(np.exp(rnng.score_word(state, params)).sum() - 1e0) < 1e-9

    def test_gen_chain_rule(self):
        params = tiny_params(seed=6)
        state = replay(params, [Action(NT, "S")])
        wid = params.vocab.map_token("cat")
        joint = rnng.score_actions(state, params)[1] + rnng.score_word(state, params)[wid]
        after = rnng.apply_action(state, Action(GEN, "cat"), params)
        np.testing.assert_allclose(after.log_prob - state.log_prob, joint, atol=1e-12)

    def test_full_completion_normalization(self):
        # sum over every (kind, symbol) completion of a state is 1
        params = tiny_params(seed=7)
        state = replay(params, [Action(NT, "S"), Action(GEN, "the")])
        action_lp = rnng.score_actions(state, params)
        total = (np.exp(action_lp[0]) * np.exp(rnng.score_nonterminal(state, params)).sum()
                 + np.exp(action_lp[1]) * np.exp(rnng.score_word(state, params)).sum()
                 + np.exp(action_lp[2]))
        assert abs(total - 1.0) < 1e-8

    def test_batch_scores_match_single_state_path(self):
        params = tiny_params(seed=11)
        states = [rnng.init_state(params),
                  replay(params, [Action(NT, "S")]),
                  replay(params, [Action(NT, "S"), Action(GEN, "the")])]
        wid = params.vocab.map_token("cat")
        action_lp, nt_lp, word_lp = rnng.batch_scores(states, params, wid)
        for i, s in enumerate(states):
            np.testing.assert_allclose(action_lp[i], rnng.score_actions(s, params),
                                       atol=1e-12)
            np.testing.assert_allclose(nt_lp[i], rnng.score_nonterminal(s, params),
                                       atol=1e-12)
            np.testing.assert_allclose(word_lp[i], rnng.score_word(s, params)[wid],
                                       atol=1e-12)


class TestCompose:
    def test_output_width_is_stack_entry_width(self):
        params = tiny_params(seed=13)
        daughters = [np.random.default_rng(i).normal(size=6) for i in range(3)]
        out = rnng.compose(0, daughters, params)
        assert out.shape == (params.config.embedding_size,)

    def test_order_sensitivity(self):
        params = tiny_params(seed=13)
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=6), rng.normal(size=6)
        assert not np.allclose(rnng.compose(0, [a, b], params),
                               rnng.compose(0, [b, a], params))

    def test_deterministic(self):
        params = tiny_params(seed=13)
        rng = np.random.default_rng(2)
        ds = [rng.normal(size=6) for _ in range(2)]
        assert np.array_equal(rnng.compose(1, ds, params), rnng.compose(1, ds, params))

    def test_empty_daughters_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            rnng.compose(0, [], tiny_params())


class TestApplyAction:
    NP_PREFIX = [Action(NT, "S"), Action(NT, "NP"), Action(GEN, "the"),
                 Action(GEN, "hungry"), Action(GEN, "cat")]

    def test_full_reduce_shrinks_stack_by_three(self):
        params = cat_params(rnng.FULL)
        state = replay(params, self.NP_PREFIX)
        assert len(state.stack_entries()) == 5
        reduced = rnng.apply_action(state, Action(REDUCE), params)
        assert len(reduced.stack_entries()) == 2
        closed = reduced.stack_entries()[-1]
        assert closed.daughter_symbols == ("the", "hungry", "cat")

    def test_nocomp_reduce_grows_stack_and_keeps_five_symbols(self):
        params = cat_params(rnng.NO_COMP)
        state = replay(params, self.NP_PREFIX)
        reduced = rnng.apply_action(state, Action(REDUCE), params)
        entries = reduced.stack_entries()
        assert len(entries) == 6
        assert [e.symbol for e in entries[1:]] == ["(NP", "the", "hungry", "cat", ")NP"]

    def test_gen_counts_word(self):
        params = cat_params()
        state = replay(params, [Action(NT, "S")])
        after = rnng.apply_action(state, Action(GEN, "meows"), params)
        assert after.words_emitted == state.words_emitted + 1
        assert after.open_count == state.open_count

    def test_invalid_action_rejected(self):
        params = cat_params()
        with pytest.raises(rnng.InvalidActionError):
            rnng.apply_action(rnng.init_state(params), Action(REDUCE), params)

    def test_source_state_not_mutated(self):
        params = cat_params(seed=8)
        state = replay(params, self.NP_PREFIX)
        fingerprint = (state.stack_summary.tobytes(), state.log_prob,
                       state.open_count, state.words_emitted)
        for action in (Action(REDUCE), Action(GEN, "cat"), Action(NT, "VP")):
            rnng.apply_action(state, action, params)
        assert fingerprint == (state.stack_summary.tobytes(), state.log_prob,
                               state.open_count, state.words_emitted)

    def test_popping_restores_prior_summary(self):
        # incremental summary after REDUCE equals a from-scratch rerun
        params = cat_params(seed=15)
        state = replay(params, self.NP_PREFIX + [Action(REDUCE)])
        h = params.h0.values.copy()
        c = params.c0.values.copy()
        from wordsync.nn import lstm_step_values
        for entry in state.stack_entries():
            h, c = lstm_step_values(entry.embedding, h, c, params.stack_cell)
        np.testing.assert_array_equal(state.stack_summary, h)


class TestTreeLogprob:
    def test_graph_path_matches_persistent_path(self):
        for variant in (rnng.FULL, rnng.NO_COMP):
            params = cat_params(variant, seed=21)
            actions = tree_to_actions(CAT)
            state = replay(params, actions)
            np.testing.assert_allclose(rnng.tree_logprob(CAT, params),
                                       state.log_prob, atol=1e-9)

    def test_nonpositive(self):
        params = cat_params(seed=22)
        assert rnng.tree_logprob(CAT, params) <= 0.0

    def test_exhaustive_mass_at_most_one(self):
        params = tiny_params(seed=23, max_open=2)
        derivations = enumerate_complete_derivations(params, max_words=2,
                                                     max_actions=10)
        assert derivations
        total = sum(math.exp(lp) for _, lp in derivations)
        assert total <= 1.0 + 1e-9
        # the bounded set must also carry the mass the model puts on it:
        # every enumerated derivation is distinct, so the sum is a partial
        # sum of a probability distribution
        assert total > 0.0

    def test_oracle_mismatch_reports_index(self):
        params = cat_params()
        bad = [Action(NT, "S"), Action(REDUCE)]
        with pytest.raises(rnng.OracleError, match="index 1"):
            rnng.oracle_logprob_terms(bad, params)


class TestTraining:
    def test_degenerate_corpus_loss_approaches_zero(self):
        tree = parse_bracketed("(X a)")
        vocab = build_vocab([tree], min_count=1)
        cfg = rnng.RnngConfig(hidden_size=6, embedding_size=5, max_open=1)
        params = rnng.RnngParams(vocab, cfg, np.random.default_rng(0))
        opt = OptimizerState(params.parameters().values(), learning_rate=0.02)
        loss = None
        for _ in range(250):
            loss = rnng.train_step([tree], params, opt)
        assert loss < 0.05

    def test_replay_without_update_is_identical(self):
        params = cat_params(seed=31)
        first, _ = rnng.sentence_nll(CAT, params)
        second, _ = rnng.sentence_nll(CAT, params)
        assert float(first.values) == float(second.values)

    def test_loss_decreases_on_small_corpus(self):
        trees = [parse_bracketed(l) for l in
                 ["(S (NP the cat) (VP sees (NP a dog)))",
                  "(S (NP a bird) (VP sleeps))",
                  "(S (NP the dog) (VP sees (NP the cat)))"]]
        vocab = build_vocab(trees, min_count=1)
        cfg = rnng.RnngConfig(hidden_size=10, embedding_size=8, max_open=4)
        params = rnng.RnngParams(vocab, cfg, np.random.default_rng(1))
        opt = OptimizerState(params.parameters().values(), learning_rate=5e-3)
        initial = rnng.train_step(trees, params, opt)
        final = None
        for _ in range(60):
            final = rnng.train_step(trees, params, opt)
        assert final < 0.7 * initial


class TestVariantSharing:
    def test_shared_components_identical_across_variants(self):
        full = cat_params(rnng.FULL, seed=40)
        nocomp = cat_params(rnng.NO_COMP, seed=40)
        np.testing.assert_array_equal(full.word_emb.values, nocomp.word_emb.values)
        np.testing.assert_array_equal(full.nt_emb.values, nocomp.nt_emb.values)
        np.testing.assert_array_equal(full.action_mlp.weights[0].values,
                                      nocomp.action_mlp.weights[0].values)

    def test_prefix_probabilities_agree_before_any_reduce(self):
        full = cat_params(rnng.FULL, seed=40)
        nocomp = cat_params(rnng.NO_COMP, seed=40)
        prefix = [Action(NT, "S"), Action(NT, "NP"), Action(GEN, "the"),
                  Action(GEN, "hungry")]
        sf = replay(full, prefix)
        sn = replay(nocomp, prefix)
        assert sf.log_prob == sn.log_prob
        np.testing.assert_array_equal(rnng.score_actions(sf, full),
                                      rnng.score_actions(sn, nocomp))


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        params = cat_params(seed=50)
        path = tmp_path / "model.npz"
        rnng.save_rnng(path, params)
        loaded = rnng.load_rnng(path)
        assert loaded.config.variant == rnng.FULL
        for name, tensor in params.parameters().items():
            np.testing.assert_array_equal(tensor.values,
                                          loaded.parameters()[name].values)
        np.testing.assert_allclose(rnng.tree_logprob(CAT, loaded),
                                   rnng.tree_logprob(CAT, params), atol=0)

    def test_unknown_version_rejected(self, tmp_path):
        import json
        params = cat_params()
        path = tmp_path / "model.npz"
        rnng.save_rnng(path, params)
        with np.load(path) as archive:
            payload = {k: archive[k] for k in archive.files}
        meta = json.loads(bytes(payload["__meta__"]).decode())
        meta["format_version"] = 99
        payload["__meta__"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
        np.savez(path, **payload)
        from wordsync.checkpoint import CheckpointError
        with pytest.raises(CheckpointError, match="version"):
            rnng.load_rnng(path)
