"""Word-synchronous beam search with fast-tracking.

Search advances one input word at a time.  Within a word it repeatedly
expands the current structural states, promotes a small number of the best
lexical successors straight into the next word's beam, prunes the remaining
fringe to the action beam k, and banks pruned lexical survivors while looping
on the structural ones until at least k analyses have generated the word.
The per-word trace (iteration count, beam masses, surviving analysis scores)
is recorded for the complexity metrics.

The search is generic over a model protocol:

    model.initial_state() -> state with log_prob 0.0 and words_emitted 0
    model.expand(states, target) -> one candidate list per state, where
        target is the observed next token, or None for the structure-only
        completion phase after the final word
    model.is_finished(state), model.extract_tree(state)

Candidates are (score, is_lexical, realize) triples; realize materializes the
successor state only if the candidate survives pruning.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class BeamError(RuntimeError):
    pass


class ParseExhausted(BeamError):
    """Search failed to synchronize; carries the word index and partial trace."""

    def __init__(self, word_index, records):
        super().__init__(f"beam search exhausted at word index {word_index}")
        self.word_index = word_index
        self.records = records


@dataclass(frozen=True)
class Candidate:
    score: float
    is_lexical: bool
    realize: object = field(compare=False)


@dataclass
class BeamConfig:
    """Action beam k, word beam, fast-track count, and the iteration cap.

    Defaults follow k_word = k // 10 and k_ft = k // 100, both floored at 1;
    the intended ordering k_ft < k_word < k is enforced except where the
    floor of 1 makes equality unavoidable at small k.
    """

    k: int
    k_word: int | None = None
    k_ft: int | None = None
    iteration_cap: int = 80

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("action beam k must be at least 1")
        if self.k_word is None:
            self.k_word = max(1, self.k // 10)
        if self.k_ft is None:
            self.k_ft = max(1, self.k // 100)
        if not (1 <= self.k_ft <= self.k_word <= self.k):
            raise ValueError(
                f"need 1 <= k_ft ({self.k_ft}) <= k_word ({self.k_word}) <= k ({self.k})")
        if (self.k_word >= self.k and self.k > 1) or (self.k_ft >= self.k_word > 1):
            raise ValueError(
                f"beam sizes must be strictly ordered: k_ft ({self.k_ft}) < "
                f"k_word ({self.k_word}) < k ({self.k})")
        if self.iteration_cap < 1:
            raise ValueError("iteration cap must be at least 1")


@dataclass
class SearchRecord:
    """Per-word trace of one advance_word call (all masses in natural log)."""

    word_index: int
    token: str
    iterations: int
    fringe_sizes: list
    nextword_size: int
    prior_beam_mass: float
    posterior_word_beam_mass: float
    nextword_logprobs: np.ndarray
    exhausted: bool = False
    fringe_drained: bool = False


def _logsumexp(scores):
    a = np.asarray(scores, dtype=np.float64)
    if a.size == 0:
        return -np.inf
    m = a.max()
    return float(m + np.log(np.exp(a - m).sum()))


def prune_top_k(states, k):
    """k highest-scoring states; ties broken by insertion order."""
    indexed = list(enumerate(states))
    indexed.sort(key=lambda pair: (-pair[1].log_prob, pair[0]))
    return [s for _, s in indexed[:k]]


def _prune_triples(triples, k):
    """triples are (score, order, payload); same rule as prune_top_k."""
    return sorted(triples, key=lambda t: (-t[0], t[1]))[:k]


def advance_word(model, states, target, cfg: BeamConfig, word_index=0):
    """Synchronize the beam at the next word of the sentence.

    Returns (word beam states, SearchRecord).  The record's nextword scores
    cover every analysis that generated the word before the final pruning to
    the word beam.
    """
    states = list(states)
    if not states:
        raise BeamError("advance_word: empty input beam")
    expected = states[0].words_emitted
    for s in states:
        if s.words_emitted != expected:
            raise BeamError("advance_word: input beam is not word-synchronized")
    prior_mass = _logsumexp([s.log_prob for s in states])

    thisword = states
    nextword = []  # (score, arrival order, candidate)
    arrival = 0
    iterations = 0
    fringe_sizes = []
    exhausted = False
    drained = False
    while len(nextword) < cfg.k:
        if not thisword:
            drained = True
            break
        if iterations >= cfg.iteration_cap:
            exhausted = True
            break
        iterations += 1
        fringe = []
        for cand_list in model.expand(thisword, target):
            for cand in cand_list:
                fringe.append((cand.score, len(fringe), cand))
        fringe_sizes.append(len(fringe))
        if not fringe:
            drained = True
            break
        lexical = [t for t in fringe if t[2].is_lexical]
        fast = set()
        for score, order, cand in _prune_triples(lexical, cfg.k_ft):
            nextword.append((score, arrival, cand))
            arrival += 1
            fast.add(order)
        remaining = [t for t in fringe if t[1] not in fast]
        pruned = _prune_triples(remaining, cfg.k)
        thisword = []
        for score, order, cand in pruned:
            if cand.is_lexical:
                nextword.append((score, arrival, cand))
                arrival += 1
            else:
                thisword.append(cand.realize())
    if not nextword:
        exhausted = True

    scores = np.array([t[0] for t in nextword], dtype=np.float64)
    word_beam = [cand.realize() for _, _, cand in _prune_triples(nextword, cfg.k_word)]
    posterior = _logsumexp([s.log_prob for s in word_beam]) if word_beam else -np.inf
    record = SearchRecord(
        word_index=word_index,
        token=target if target is not None else "",
        iterations=iterations,
        fringe_sizes=fringe_sizes,
        nextword_size=len(nextword),
        prior_beam_mass=prior_mass,
        posterior_word_beam_mass=posterior,
        nextword_logprobs=scores,
        exhausted=exhausted,
        fringe_drained=drained,
    )
    return word_beam, record


def complete_sentence(model, states, cfg: BeamConfig):
    """Drive structure-only actions after the final word until roots close.

    Returns completed states, best first (score, then arrival order).
    """
    agenda = list(states)
    completed = []  # (neg score, arrival, state)
    arrival = 0
    guard = 0
    while agenda:
        guard += 1
        if guard > cfg.iteration_cap:
            break
        successors = []
        for cand_list in model.expand(agenda, None):
            for cand in cand_list:
                successors.append((cand.score, len(successors), cand))
        agenda = []
        for score, order, cand in _prune_triples(successors, cfg.k):
            state = cand.realize()
            if model.is_finished(state):
                completed.append((-score, arrival, state))
                arrival += 1
            else:
                agenda.append(state)
    completed.sort(key=lambda t: (t[0], t[1]))
    return [state for _, _, state in completed]


def parse_sentence(model, tokens, cfg: BeamConfig):
    """Parse one token sequence; returns (best completed tree, records).

    Raises ParseExhausted with the offending word index if the search fails
    to synchronize at some word or no analysis completes.
    """
    tokens = list(tokens)
    if not tokens:
        raise BeamError("parse_sentence: empty token sequence")
    beam = [model.initial_state()]
    records = []
    for i, token in enumerate(tokens):
        beam, record = advance_word(model, beam, token, cfg, word_index=i)
        records.append(record)
        if record.exhausted:
            raise ParseExhausted(i, records)
    completed = complete_sentence(model, beam, cfg)
    if not completed:
        raise ParseExhausted(len(tokens), records)
    return model.extract_tree(completed[0]), records
