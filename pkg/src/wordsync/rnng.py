"""Generative stack-based parsing model.

The model maintains a neuralized stack: every stack entry carries a vector,
and the final hidden state of an RNN run over those vectors summarizes the
whole stack.  That summary feeds three perceptrons: a three-way choice among
opening a constituent, generating a word, or closing the latest constituent,
plus label and word distributions for the first two choices.  Closing a
constituent in the full variant runs a bidirectional-RNN composition over the
mother and daughter vectors; the composition-free variant instead pushes a
labeled close-bracket symbol and leaves the stack flat.

Two evaluation paths coexist: a graph path used for training and exact tree
scoring, and a graph-free numpy path used for search, where parser states are
persistent (applying an action never mutates its source state).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from . import nn
from .autograd import MASKED_LOGPROB
from .checkpoint import load_checkpoint, restore_parameters, save_checkpoint
from .treebank import GEN, NT, REDUCE, Action, tree_to_actions
from .vocab import Vocab

FULL = "full"
NO_COMP = "no-comp"

ACTION_KINDS = (NT, GEN, REDUCE)
ACTION_INDEX = {NT: 0, GEN: 1, REDUCE: 2}


class InvalidActionError(ValueError):
    pass


class OracleError(ValueError):
    """Oracle action invalid in its state; carries the action index."""

    def __init__(self, message, index):
        super().__init__(f"{message} (at action index {index})")
        self.index = index


@dataclass(frozen=True)
class Limits:
    """Search-termination guards; also bound the generative action space."""
    max_open: int = 40
    max_actions_per_word: int = 80
    allow_midsentence_root_closure: bool = False


@dataclass
class RnngConfig:
    hidden_size: int = 170
    embedding_size: int = 170
    scorer_hidden: int | None = None
    comp_hidden: int | None = None
    variant: str = FULL
    max_open: int = 40
    max_actions_per_word: int = 80
    dropout: float = 0.0

    def __post_init__(self):
        if self.variant not in (FULL, NO_COMP):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.scorer_hidden is None:
            self.scorer_hidden = self.hidden_size
        if self.comp_hidden is None:
            self.comp_hidden = self.embedding_size

    @property
    def limits(self):
        return Limits(self.max_open, self.max_actions_per_word)


class RnngParams:
    """All trainable tensors for one model variant.

    Shared components are drawn from the RNG before any variant-specific
    ones, so two variants built from the same seed agree exactly on
    everything except the closing mechanism.
    """

    def __init__(self, vocab: Vocab, config: RnngConfig, rng):
        self.vocab = vocab
        self.config = config
        e, h = config.embedding_size, config.hidden_size
        s = config.scorer_hidden
        v, n = vocab.word_count, vocab.nonterminal_count
        if n == 0:
            raise ValueError("RNNG needs at least one nonterminal")
        self.word_emb = nn.init_weight(rng, v, e, "word_emb")
        self.nt_emb = nn.init_weight(rng, n, e, "nt_emb")
        self.stack_cell = nn.RnnCellParams(e, h, rng, "stack")
        self.h0 = nn.init_zeros(h, "h0")
        self.c0 = nn.init_zeros(h, "c0")
        self.action_mlp = nn.MlpParams([h, s, 3], ["tanh", "linear"], rng, "action")
        self.nt_mlp = nn.MlpParams([h, s, n], ["tanh", "linear"], rng, "nt")
        self.word_mlp = nn.MlpParams([h, s, v], ["tanh", "linear"], rng, "word")
        if config.variant == FULL:
            c = config.comp_hidden
            self.comp_fwd = nn.RnnCellParams(e, c, rng, "comp_fwd")
            self.comp_bwd = nn.RnnCellParams(e, c, rng, "comp_bwd")
            self.comp_proj = nn.MlpParams([2 * c, e], ["tanh"], rng, "comp_proj")
            self.close_emb = None
        else:
            self.comp_fwd = self.comp_bwd = self.comp_proj = None
            self.close_emb = nn.init_weight(rng, n, e, "close_emb")

    def parameters(self):
        out = {}
        for t in (self.word_emb, self.nt_emb, self.h0, self.c0):
            out[t.name] = t
        out.update(self.stack_cell.parameters())
        out.update(self.action_mlp.parameters())
        out.update(self.nt_mlp.parameters())
        out.update(self.word_mlp.parameters())
        if self.config.variant == FULL:
            out.update(self.comp_fwd.parameters())
            out.update(self.comp_bwd.parameters())
            out.update(self.comp_proj.parameters())
        else:
            out[self.close_emb.name] = self.close_emb
        return out

    @property
    def limits(self):
        return self.config.limits


@dataclass(frozen=True)
class StackEntry:
    symbol: str
    embedding: np.ndarray = field(repr=False)
    is_open_nonterminal: bool = False
    daughter_symbols: tuple | None = None  # recorded for closed constituents


class _StackNode:
    __slots__ = ("entry", "h", "c", "parent", "depth")

    def __init__(self, entry, h, c, parent):
        self.entry = entry
        self.h = h
        self.c = c
        self.parent = parent
        self.depth = 0 if parent is None else parent.depth + 1


class _OpenNode:
    __slots__ = ("label_id", "node", "parent")

    def __init__(self, label_id, node, parent):
        self.label_id = label_id
        self.node = node
        self.parent = parent


class ParserState:
    """Immutable snapshot of one partial derivation.

    States form a tree via parent links, so beam branches share their common
    prefix; popping on close restores the retained RNN state of the node
    below in O(1).
    """

    __slots__ = ("top", "open_top", "open_count", "words_emitted", "log_prob",
                 "parent", "last_action")

    def __init__(self, top, open_top, open_count, words_emitted, log_prob,
                 parent=None, last_action=None):
        self.top = top
        self.open_top = open_top
        self.open_count = open_count
        self.words_emitted = words_emitted
        self.log_prob = log_prob
        self.parent = parent
        self.last_action = last_action

    @property
    def stack_summary(self):
        return self.top.h

    @property
    def finished(self):
        return self.open_count == 0 and self.top.entry is not None

    def stack_entries(self):
        out = []
        node = self.top
        while node is not None and node.entry is not None:
            out.append(node.entry)
            node = node.parent
        out.reverse()
        return out

    def actions(self):
        out = []
        state = self
        while state.last_action is not None:
            out.append(state.last_action)
            state = state.parent
        out.reverse()
        return out

    def __repr__(self):
        return (f"ParserState(words={self.words_emitted}, open={self.open_count}, "
                f"log_prob={self.log_prob:.4f})")


def init_state(params: RnngParams) -> ParserState:
    base = _StackNode(None, params.h0.values.copy(), params.c0.values.copy(), None)
    return ParserState(base, None, 0, 0, 0.0)


def valid_actions(state: ParserState, sentence_done=True, limits: Limits | None = None):
    """Action kinds available in this state.

    With sentence_done=True this is the unconstrained generative action set
    (the normalization support for scoring).  With sentence_done=False the
    word-synchronous constraint applies: the last open constituent may not be
    closed while input words remain, unless limits permits it.
    """
    if limits is None:
        limits = Limits()
    if state.finished:
        return set()
    kinds = set()
    if state.open_count < limits.max_open:
        kinds.add(NT)
    if state.open_count >= 1:
        kinds.add(GEN)
        top_is_fresh = state.top.entry is not None and state.top.entry.is_open_nonterminal
        root_closure_ok = (state.open_count > 1 or sentence_done
                           or limits.allow_midsentence_root_closure)
        if not top_is_fresh and root_closure_ok:
            kinds.add(REDUCE)
    return kinds


def _generative_mask(state, limits):
    return valid_actions(state, sentence_done=True, limits=limits)


def score_actions(state: ParserState, params: RnngParams):
    """Masked log-probabilities over [NT, GEN, REDUCE] (graph-free)."""
    mask = _generative_mask(state, params.limits)
    logits = nn.mlp_apply_values(state.stack_summary, params.action_mlp)
    return _masked_log_softmax_values(logits, [ACTION_INDEX[k] for k in mask])


def score_nonterminal(state: ParserState, params: RnngParams):
    logits = nn.mlp_apply_values(state.stack_summary, params.nt_mlp)
    return _log_softmax_values(logits)


def score_word(state: ParserState, params: RnngParams):
    logits = nn.mlp_apply_values(state.stack_summary, params.word_mlp)
    return _log_softmax_values(logits)


def _log_softmax_values(logits):
    m = logits.max(axis=-1, keepdims=True)
    lse = m + np.log(np.exp(logits - m).sum(axis=-1, keepdims=True))
    return logits - lse


def _masked_log_softmax_values(logits, allowed):
    if not allowed:
        raise ValueError("no valid actions to normalize over")
    idx = np.asarray(sorted(allowed), dtype=np.intp)
    a = logits[idx]
    m = a.max()
    lse = m + np.log(np.exp(a - m).sum())
    out = np.full(logits.shape, MASKED_LOGPROB)
    out[idx] = a - lse
    return out


def compose(mother_label_id, daughters, params: RnngParams):
    """Single vector for a closed constituent (graph-free numpy path)."""
    if not daughters:
        raise ValueError("compose: empty daughter list")
    if params.config.variant != FULL:
        raise InvalidActionError("composition is absent in the no-comp variant")
    seq = [params.nt_emb.values[mother_label_id]] + list(daughters)
    return _bilstm_encode_values(seq, params.comp_fwd, params.comp_bwd, params.comp_proj)


def _bilstm_encode_values(seq, fwd, bwd, proj):
    h = np.zeros(fwd.hidden_size)
    c = np.zeros(fwd.hidden_size)
    for x in seq:
        h, c = nn.lstm_step_values(x, h, c, fwd)
    hb = np.zeros(bwd.hidden_size)
    cb = np.zeros(bwd.hidden_size)
    for x in reversed(seq):
        hb, cb = nn.lstm_step_values(x, hb, cb, bwd)
    return nn.mlp_apply_values(np.concatenate([h, hb]), proj)


def _push_node(parent_node, entry, params):
    h, c = nn.lstm_step_values(entry.embedding, parent_node.h, parent_node.c,
                               params.stack_cell)
    return _StackNode(entry, h, c, parent_node)


def _apply(state, action, params, delta_logprob):
    """Build the successor state; scoring is supplied by the caller."""
    if action.kind == NT:
        label_id = params.vocab.nt_id(action.symbol)
        entry = StackEntry("(" + action.symbol, params.nt_emb.values[label_id], True)
        node = _push_node(state.top, entry, params)
        open_top = _OpenNode(label_id, node, state.open_top)
        return ParserState(node, open_top, state.open_count + 1, state.words_emitted,
                           state.log_prob + delta_logprob, state, action)
    if action.kind == GEN:
        wid = params.vocab.map_token(action.symbol, sentence_initial=state.words_emitted == 0)
        entry = StackEntry(action.symbol, params.word_emb.values[wid], False)
        node = _push_node(state.top, entry, params)
        return ParserState(node, state.open_top, state.open_count, state.words_emitted + 1,
                           state.log_prob + delta_logprob, state, action)
    # REDUCE
    open_node = state.open_top
    label = params.vocab.nt_str(open_node.label_id)
    if params.config.variant == FULL:
        daughters = []
        node = state.top
        while node is not open_node.node:
            daughters.append(node.entry)
            node = node.parent
        daughters.reverse()
        emb = compose(open_node.label_id, [d.embedding for d in daughters], params)
        entry = StackEntry(label, emb, False,
                           daughter_symbols=tuple(d.symbol for d in daughters))
        new_node = _push_node(open_node.node.parent, entry, params)
    else:
        entry = StackEntry(")" + label, params.close_emb.values[open_node.label_id], False)
        new_node = _push_node(state.top, entry, params)
    return ParserState(new_node, open_node.parent, state.open_count - 1,
                       state.words_emitted, state.log_prob + delta_logprob, state, action)


def apply_action(state: ParserState, action: Action, params: RnngParams,
                 sentence_done=True) -> ParserState:
    """Successor state with log_prob increased by the action's log-probability."""
    kinds = valid_actions(state, sentence_done=sentence_done, limits=params.limits)
    if action.kind not in kinds:
        raise InvalidActionError(f"action {action} invalid here (valid: {sorted(kinds)})")
    delta = float(score_actions(state, params)[ACTION_INDEX[action.kind]])
    if action.kind == NT:
        delta += float(score_nonterminal(state, params)[params.vocab.nt_id(action.symbol)])
    elif action.kind == GEN:
        wid = params.vocab.map_token(action.symbol, sentence_initial=state.words_emitted == 0)
        delta += float(score_word(state, params)[wid])
    return _apply(state, action, params, delta)


def batch_scores(states, params: RnngParams, target_wid=None):
    """Vectorized scoring for a list of states (search path).

    Returns (action_lp (B,3) masked per state, nt_lp (B,N), word_lp (B,) for
    the target id or None).
    """
    summaries = np.stack([s.stack_summary for s in states])
    action_logits = nn.mlp_apply_values(summaries, params.action_mlp)
    masks = np.zeros(action_logits.shape, dtype=bool)
    for i, s in enumerate(states):
        for k in _generative_mask(s, params.limits):
            masks[i, ACTION_INDEX[k]] = True
    if not masks.any(axis=1).all():
        raise InvalidActionError("cannot score a finished derivation")
    shifted = np.where(masks, action_logits, -np.inf)
    m = shifted.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(shifted - m).sum(axis=1, keepdims=True))
    action_lp = np.where(masks, action_logits - lse, MASKED_LOGPROB)
    nt_lp = _log_softmax_values(nn.mlp_apply_values(summaries, params.nt_mlp))
    word_lp = None
    if target_wid is not None:
        word_logits = nn.mlp_apply_values(summaries, params.word_mlp)
        m = word_logits.max(axis=1)
        lse = m + np.log(np.exp(word_logits - m[:, None]).sum(axis=1))
        word_lp = word_logits[:, target_wid] - lse
    return action_lp, nt_lp, word_lp


# --- graph path: teacher-forced oracle replay ------------------------------

class _GraphStack:
    """Mutable stack over graph tensors for one oracle replay."""

    def __init__(self, params):
        self.params = params
        self.entries = []  # (kind, symbol_id, embedding Tensor, is_open)
        self.rnn = [(params.h0, params.c0)]
        self.open_idx = []  # indices into entries of open nonterminals
        self.words_emitted = 0

    @property
    def open_count(self):
        return len(self.open_idx)

    @property
    def summary(self):
        return self.rnn[-1][0]

    @property
    def top_is_fresh_open(self):
        return bool(self.entries) and self.entries[-1][3]

    @property
    def finished(self):
        return bool(self.entries) and not self.open_idx

    def push(self, kind, symbol_id, emb, is_open):
        h, c = self.rnn[-1]
        h2, c2 = nn.lstm_step(emb, h, c, self.params.stack_cell)
        self.entries.append((kind, symbol_id, emb, is_open))
        self.rnn.append((h2, c2))

    def reduce(self):
        p = self.params
        start = self.open_idx.pop()
        label_id = self.entries[start][1]
        daughters = [e[2] for e in self.entries[start + 1:]]
        if p.config.variant == FULL:
            mother = ag.take_row(p.nt_emb, label_id)
            emb = nn.bilstm_encode([mother] + daughters, p.comp_fwd, p.comp_bwd, p.comp_proj)
            del self.entries[start:]
            del self.rnn[start + 1:]
            self.push("closed", label_id, emb, False)
        else:
            emb = ag.take_row(p.close_emb, label_id)
            self.push("close_sym", label_id, emb, False)


def _mask_for(stack, limits):
    kinds = []
    if not stack.finished:
        if stack.open_count < limits.max_open:
            kinds.append(ACTION_INDEX[NT])
        if stack.open_count >= 1:
            kinds.append(ACTION_INDEX[GEN])
            if not stack.top_is_fresh_open:
                kinds.append(ACTION_INDEX[REDUCE])
    return kinds


def oracle_logprob_terms(actions, params: RnngParams, dropout_rng=None):
    """Per-action log-probability tensors for a teacher-forced derivation."""
    p = params
    stack = _GraphStack(p)
    rate = p.config.dropout
    terms = []
    for i, action in enumerate(actions):
        mask = _mask_for(stack, p.limits)
        if ACTION_INDEX[action.kind] not in mask:
            raise OracleError(f"oracle action {action} invalid in its state", i)
        summary = stack.summary
        if rate > 0.0 and dropout_rng is not None:
            summary = ag.dropout(summary, rate, dropout_rng)
        action_lp = ag.log_softmax(nn.mlp_apply(summary, p.action_mlp), mask)
        term = ag.pick(action_lp, ACTION_INDEX[action.kind])
        if action.kind == NT:
            label_id = p.vocab.nt_id(action.symbol)
            nt_lp = ag.log_softmax(nn.mlp_apply(summary, p.nt_mlp))
            term = ag.add(term, ag.pick(nt_lp, label_id))
            stack.push("open", label_id, ag.take_row(p.nt_emb, label_id), True)
            stack.open_idx.append(len(stack.entries) - 1)
        elif action.kind == GEN:
            wid = p.vocab.map_token(action.symbol, sentence_initial=stack.words_emitted == 0)
            word_lp = ag.log_softmax(nn.mlp_apply(summary, p.word_mlp))
            term = ag.add(term, ag.pick(word_lp, wid))
            stack.push("word", wid, ag.take_row(p.word_emb, wid), False)
            stack.words_emitted += 1
        else:
            stack.reduce()
        terms.append(term)
    return terms


def tree_logprob(tree, params: RnngParams) -> float:
    """Joint log-probability of (tree, its yield) along the oracle derivation."""
    with ag.no_grad():
        terms = oracle_logprob_terms(tree_to_actions(tree), params)
        return float(sum(t.values for t in terms))


def sentence_nll(tree, params: RnngParams, dropout_rng=None):
    """(negative-log-likelihood Tensor, action count) for one tree."""
    terms = oracle_logprob_terms(tree_to_actions(tree), params, dropout_rng)
    return ag.scale(ag.add_n(terms), -1.0), len(terms)


def train_step(batch, params: RnngParams, opt, dropout_rng=None) -> float:
    """One teacher-forced update; returns the mean per-action loss."""
    nlls = []
    total_actions = 0
    for tree in batch:
        nll, n = sentence_nll(tree, params, dropout_rng)
        nlls.append(nll)
        total_actions += n
    loss = ag.scale(ag.add_n(nlls), 1.0 / total_actions)
    ag.backward(loss)
    opt.step()
    return float(loss.values)


def corpus_action_nll(trees, params: RnngParams):
    """(total NLL in nats, total actions, total words) over a treebank."""
    total = 0.0
    actions = 0
    words = 0
    with ag.no_grad():
        for tree in trees:
            terms = oracle_logprob_terms(tree_to_actions(tree), params)
            total -= float(sum(t.values for t in terms))
            actions += len(terms)
            words += len(tree.terminals())
    return total, actions, words


# --- checkpointing ----------------------------------------------------------

def save_rnng(path, params: RnngParams):
    cfg = params.config
    meta = {
        "model": "rnng",
        "variant": cfg.variant,
        "hidden_size": cfg.hidden_size,
        "embedding_size": cfg.embedding_size,
        "scorer_hidden": cfg.scorer_hidden,
        "comp_hidden": cfg.comp_hidden,
        "max_open": cfg.max_open,
        "max_actions_per_word": cfg.max_actions_per_word,
        "vocab": params.vocab.to_dict(),
        "vocab_sha256": params.vocab.digest(),
    }
    save_checkpoint(path, params.parameters(), meta)


def load_rnng(path) -> RnngParams:
    arrays, meta = load_checkpoint(path)
    if meta.get("model") != "rnng":
        raise ValueError(f"{path}: checkpoint is not an RNNG model")
    vocab = Vocab.from_dict(meta["vocab"])
    if vocab.digest() != meta["vocab_sha256"]:
        raise ValueError(f"{path}: vocabulary hash mismatch")
    cfg = RnngConfig(
        hidden_size=meta["hidden_size"], embedding_size=meta["embedding_size"],
        scorer_hidden=meta["scorer_hidden"], comp_hidden=meta["comp_hidden"],
        variant=meta["variant"], max_open=meta["max_open"],
        max_actions_per_word=meta["max_actions_per_word"])
    params = RnngParams(vocab, cfg, np.random.default_rng(0))
    restore_parameters(params.parameters(), arrays, str(path))
    return params
