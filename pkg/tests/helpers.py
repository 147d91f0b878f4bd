"""Shared fixtures and independent oracles for the test suite.

The enumeration routines here walk the model's derivation space directly
through the persistent-state primitives, so they provide search-independent
reference values for beam probabilities.
"""

import math

import numpy as np

from wordsync import rnng
from wordsync.treebank import GEN, NT, REDUCE, Action, parse_bracketed
from wordsync.vocab import build_vocab

TINY_LINES = [
    "(S (NP the cat) (VP sees (NP a dog)))",
    "(S (NP a bird) (VP sleeps))",
    "(S (NP the dog) (VP sees (NP the bird)))",
]


def tiny_vocab(lines=None):
    return build_vocab([parse_bracketed(l) for l in (lines or TINY_LINES)], min_count=1)


def tiny_params(seed=0, variant=rnng.FULL, hidden=8, embedding=6, max_open=4,
                lines=None):
    cfg = rnng.RnngConfig(hidden_size=hidden, embedding_size=embedding,
                          variant=variant, max_open=max_open)
    return rnng.RnngParams(tiny_vocab(lines), cfg, np.random.default_rng(seed))


def replay(params, actions, sentence_done=True):
    """Chain apply_action over a sequence; returns the final state."""
    state = rnng.init_state(params)
    for a in actions:
        state = rnng.apply_action(state, a, params, sentence_done=sentence_done)
    return state


def state_candidates(state, params, next_word=None, mid_sentence=False):
    """(action, delta log-prob) pairs explored from a state.

    next_word constrains generation to one token; mid_sentence excludes
    closing the last open constituent, mirroring incremental search over a
    known sentence.  Scores always come from the full generative mask.
    """
    kinds = rnng.valid_actions(state, sentence_done=not mid_sentence,
                               limits=params.limits)
    action_lp = rnng.score_actions(state, params)
    out = []
    if NT in kinds:
        nt_lp = rnng.score_nonterminal(state, params)
        for j, label in enumerate(params.vocab.nonterminals):
            out.append((Action(NT, label), float(action_lp[0] + nt_lp[j])))
    if GEN in kinds and next_word is not None:
        wid = params.vocab.map_token(next_word, sentence_initial=state.words_emitted == 0)
        word_lp = rnng.score_word(state, params)
        out.append((Action(GEN, next_word), float(action_lp[1] + word_lp[wid])))
    if REDUCE in kinds:
        out.append((Action(REDUCE), float(action_lp[2])))
    return out


def enumerate_prefix_masses(params, tokens):
    """Forward probability of each prefix of a sentence by exhaustive search.

    masses[i] = total probability over all partial derivations whose last
    action generated token i (so the first i+1 tokens and nothing more).
    Returned in natural-log space.
    """
    tokens = list(tokens)
    masses = [0.0] * len(tokens)
    stack = [rnng.init_state(params)]
    while stack:
        state = stack.pop()
        i = state.words_emitted
        if i == len(tokens):
            continue
        for action, delta in state_candidates(state, params, next_word=tokens[i],
                                              mid_sentence=True):
            succ = rnng._apply(state, action, params, delta)
            if action.kind == GEN:
                masses[i] += math.exp(succ.log_prob)
            else:
                stack.append(succ)
    return [math.log(m) if m > 0 else -math.inf for m in masses]


def enumeration_surprisals(params, tokens):
    """-log2 P(w_i | w_1..w_{i-1}) marginalized over structures, per word."""
    log_masses = enumerate_prefix_masses(params, tokens)
    out = []
    prev = 0.0
    for lm in log_masses:
        out.append((prev - lm) / math.log(2.0))
        prev = lm
    return out


def enumerate_complete_derivations(params, max_words, max_actions=40):
    """All complete derivations up to the bounds, with their log-probs."""
    results = []
    agenda = [(rnng.init_state(params), [])]
    while agenda:
        state, history = agenda.pop()
        if state.finished:
            results.append((history, state.log_prob))
            continue
        if len(history) >= max_actions:
            continue
        kinds = rnng.valid_actions(state, limits=params.limits)
        action_lp = rnng.score_actions(state, params)
        if NT in kinds:
            nt_lp = rnng.score_nonterminal(state, params)
            for j, label in enumerate(params.vocab.nonterminals):
                a = Action(NT, label)
                succ = rnng._apply(state, a, params, float(action_lp[0] + nt_lp[j]))
                agenda.append((succ, history + [a]))
        if GEN in kinds and state.words_emitted < max_words:
            word_lp = rnng.score_word(state, params)
            for wid in range(params.vocab.word_count):
                a = Action(GEN, params.vocab.word_str(wid))
                succ = rnng._apply(state, a, params, float(action_lp[1] + word_lp[wid]))
                agenda.append((succ, history + [a]))
        if REDUCE in kinds:
            a = Action(REDUCE)
            succ = rnng._apply(state, a, params, float(action_lp[2]))
            agenda.append((succ, history + [a]))
    return results


def structural_expansion_counts(params, tokens):
    """Per word, how many structural partial derivations the exact search
    space contains between the previous word and this one."""
    tokens = list(tokens)
    counts = [0] * len(tokens)
    stack = [rnng.init_state(params)]
    while stack:
        state = stack.pop()
        i = state.words_emitted
        if i == len(tokens):
            continue
        for action, delta in state_candidates(state, params, next_word=tokens[i],
                                              mid_sentence=True):
            succ = rnng._apply(state, action, params, delta)
            if action.kind == GEN:
                continue
            counts[i] += 1
            stack.append(succ)
    return counts
