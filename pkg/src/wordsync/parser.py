"""Adapter that drives beam search with the generative stack model."""

from __future__ import annotations

from . import rnng
from .beam import BeamConfig, Candidate, ParseExhausted, parse_sentence
from .treebank import GEN, NT, REDUCE, Action, actions_to_tree


def _realizer(state, action, params, delta):
    return lambda: rnng._apply(state, action, params, delta)


class RnngSearchModel:
    """Search-model protocol over RnngParams.

    Lexical candidates are constrained to the observed next token; their
    scores carry the model's full generate-this-word probability.  Structural
    candidates fan out over every nonterminal label plus closing.  After the
    final word (target None) only closing actions are explored.
    """

    def __init__(self, params: rnng.RnngParams):
        self.params = params

    def initial_state(self):
        return rnng.init_state(self.params)

    def is_finished(self, state):
        return state.finished

    def extract_tree(self, state):
        return actions_to_tree(state.actions())

    def expand(self, states, target):
        p = self.params
        limits = p.limits
        out = []
        if target is None:
            action_lp, _, _ = rnng.batch_scores(states, p)
            for i, s in enumerate(states):
                cands = []
                if REDUCE in rnng.valid_actions(s, sentence_done=True, limits=limits):
                    delta = float(action_lp[i, 2])
                    cands.append(Candidate(s.log_prob + delta, False,
                                           _realizer(s, Action(REDUCE), p, delta)))
                out.append(cands)
            return out
        wid = p.vocab.map_token(target, sentence_initial=states[0].words_emitted == 0)
        action_lp, nt_lp, word_lp = rnng.batch_scores(states, p, wid)
        labels = p.vocab.nonterminals
        for i, s in enumerate(states):
            kinds = rnng.valid_actions(s, sentence_done=False, limits=limits)
            cands = []
            if NT in kinds:
                base = float(action_lp[i, 0])
                for j, label in enumerate(labels):
                    delta = base + float(nt_lp[i, j])
                    cands.append(Candidate(s.log_prob + delta, False,
                                           _realizer(s, Action(NT, label), p, delta)))
            if GEN in kinds:
                delta = float(action_lp[i, 1]) + float(word_lp[i])
                cands.append(Candidate(s.log_prob + delta, True,
                                       _realizer(s, Action(GEN, target), p, delta)))
            if REDUCE in kinds:
                delta = float(action_lp[i, 2])
                cands.append(Candidate(s.log_prob + delta, False,
                                       _realizer(s, Action(REDUCE), p, delta)))
            out.append(cands)
        return out


def parse_tokens(params, tokens, cfg: BeamConfig):
    """Best completed tree plus per-word search records for one sentence."""
    return parse_sentence(RnngSearchModel(params), tokens, cfg)


def parse_corpus(params, sentences, cfg: BeamConfig):
    """Parse many sentences, tolerating per-sentence exhaustion.

    Returns (results, exhausted_indices) where results[i] is (tree, records)
    or (None, partial records) for exhausted sentences.
    """
    model = RnngSearchModel(params)
    results = []
    exhausted = []
    for i, tokens in enumerate(sentences):
        try:
            results.append(parse_sentence(model, tokens, cfg))
        except ParseExhausted as err:
            results.append((None, err.records))
            exhausted.append(i)
    return results, exhausted


def beam_sweep(params, sentences, gold_trees, k_list, function_words=None,
               cfg_overrides=None):
    """Run the parser at each beam size; one metrics/F1 report per k."""
    from . import metrics

    overrides = cfg_overrides or {}
    reports = []
    for k in k_list:
        cfg = BeamConfig(k=k, **overrides)
        results, exhausted = parse_corpus(params, sentences, cfg)
        rows = []
        trees = []
        for i, (tree, records) in enumerate(results):
            rows.extend(metrics.records_to_rows(i, sentences[i], records,
                                                function_words=function_words))
            trees.append(tree)
        f1 = None
        if gold_trees is not None:
            pairs = [(g, t) for g, t in zip(gold_trees, trees) if t is not None]
            if pairs:
                f1 = metrics.bracket_f1([g for g, _ in pairs], [t for _, t in pairs])
        reports.append({
            "k": k,
            "k_word": cfg.k_word,
            "k_ft": cfg.k_ft,
            "rows": rows,
            "trees": trees,
            "f1": f1,
            "exhausted_sentences": exhausted,
        })
    return reports
