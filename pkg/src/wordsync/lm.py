"""Word-level LSTM language model: the non-syntactic surprisal baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from . import nn
from .checkpoint import load_checkpoint, restore_parameters, save_checkpoint
from .vocab import Vocab

LN2 = math.log(2.0)


@dataclass
class LmConfig:
    hidden_size: int = 256
    embedding_size: int | None = None
    dropout: float = 0.0

    def __post_init__(self):
        if self.embedding_size is None:
            self.embedding_size = self.hidden_size


class LmParams:
    def __init__(self, vocab: Vocab, config: LmConfig, rng):
        self.vocab = vocab
        self.config = config
        e, h = config.embedding_size, config.hidden_size
        v = vocab.word_count
        self.word_emb = nn.init_weight(rng, v, e, "lm_word_emb")
        self.cell = nn.RnnCellParams(e, h, rng, "lm_cell")
        self.out_mlp = nn.MlpParams([h, v], ["linear"], rng, "lm_out")

    def parameters(self):
        out = {self.word_emb.name: self.word_emb}
        out.update(self.cell.parameters())
        out.update(self.out_mlp.parameters())
        return out


def _map_sentence(tokens, vocab):
    return [vocab.map_token(t, sentence_initial=i == 0) for i, t in enumerate(tokens)]


def sequence_logprob_terms(tokens, params: LmParams, dropout_rng=None):
    """Per-event log-probability tensors for w1..wn plus the end marker."""
    p = params
    vocab = p.vocab
    ids = _map_sentence(tokens, vocab)
    targets = ids + [vocab.eos_id]
    inputs = [vocab.bos_id] + ids
    h = ag.constant(np.zeros(p.config.hidden_size))
    c = ag.constant(np.zeros(p.config.hidden_size))
    rate = p.config.dropout
    terms = []
    for wid_in, wid_target in zip(inputs, targets):
        h, c = nn.lstm_step(ag.take_row(p.word_emb, wid_in), h, c, p.cell)
        hidden = h
        if rate > 0.0 and dropout_rng is not None:
            hidden = ag.dropout(hidden, rate, dropout_rng)
        lp = ag.log_softmax(nn.mlp_apply(hidden, p.out_mlp))
        terms.append(ag.pick(lp, wid_target))
    return terms


def lm_train_step(batch, params: LmParams, opt, dropout_rng=None) -> float:
    """One update over a batch of token sequences; mean NLL per event.

    Every real token and each sentence's end marker counts as one predicted
    event.  Raises VocabError only for tokens the unknown classes cannot
    absorb (which cannot happen for ordinary strings).
    """
    nlls = []
    n_events = 0
    for tokens in batch:
        terms = sequence_logprob_terms(tokens, params, dropout_rng)
        nlls.append(ag.scale(ag.add_n(terms), -1.0))
        n_events += len(terms)
    loss = ag.scale(ag.add_n(nlls), 1.0 / n_events)
    ag.backward(loss)
    opt.step()
    return float(loss.values)


def sequence_logprob(tokens, params: LmParams, include_eos=True) -> float:
    """Total natural-log probability of a sentence under the model."""
    with ag.no_grad():
        terms = sequence_logprob_terms(tokens, params)
    values = [float(t.values) for t in terms]
    if not include_eos:
        values = values[:-1]
    return sum(values)


def lm_surprisal_series(tokens, params: LmParams):
    """Per-token surprisal -log2 P(w_i | w_1..w_{i-1}), one value per token."""
    with ag.no_grad():
        terms = sequence_logprob_terms(tokens, params)
    return [-float(t.values) / LN2 for t in terms[:-1]]


def perplexity(sentences, params: LmParams) -> float:
    """exp of the mean per-event negative log-likelihood over a corpus."""
    sentences = list(sentences)
    if not sentences:
        raise ValueError("perplexity of an empty corpus")
    total = 0.0
    events = 0
    with ag.no_grad():
        for tokens in sentences:
            terms = sequence_logprob_terms(tokens, params)
            total -= sum(float(t.values) for t in terms)
            events += len(terms)
    return math.exp(total / events)


def save_lm(path, params: LmParams):
    meta = {
        "model": "lstm-lm",
        "hidden_size": params.config.hidden_size,
        "embedding_size": params.config.embedding_size,
        "vocab": params.vocab.to_dict(),
        "vocab_sha256": params.vocab.digest(),
    }
    save_checkpoint(path, params.parameters(), meta)


def load_lm(path) -> LmParams:
    arrays, meta = load_checkpoint(path)
    if meta.get("model") != "lstm-lm":
        raise ValueError(f"{path}: checkpoint is not a language model")
    vocab = Vocab.from_dict(meta["vocab"])
    if vocab.digest() != meta["vocab_sha256"]:
        raise ValueError(f"{path}: vocabulary hash mismatch")
    cfg = LmConfig(hidden_size=meta["hidden_size"], embedding_size=meta["embedding_size"])
    params = LmParams(vocab, cfg, np.random.default_rng(0))
    restore_parameters(params.parameters(), arrays, str(path))
    return params
