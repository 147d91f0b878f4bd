"""Per-word incremental complexity metrics and parse evaluation utilities.

Four quantities are computed from the per-word search traces: the number of
search iterations needed to synchronize at the word (distance), the log-ratio
of beam probability masses across consecutive words (surprisal), the Shannon
entropy of the renormalized analysis distribution (entropy), and its
word-to-word change.  All information values are reported in bits.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

LN2 = math.log(2.0)

# Default content/function split; override per corpus as needed.
FUNCTION_WORDS = frozenset("""
a an the this that these those some any no every each
and or but nor so yet if then because while although though
of in on at by for with from to into onto under over near upon about
he she it they them him her his hers its their theirs we us our you your
i me my mine who whom whose which what
is are was were be been being am do does did has have had will would
shall should may might must can could
not n't as than too very there here when where how why all both
""".split())

METRICS_HEADER = ("sent", "idx", "token", "distance", "surprisal",
                  "entropy", "entropy_delta", "content", "exhausted")


class MetricError(ValueError):
    pass


@dataclass
class MetricRow:
    sent: int
    idx: int
    token: str
    distance: float
    surprisal: float
    entropy: float
    entropy_delta: float
    content: bool
    exhausted: bool


def distance(record) -> int:
    """Iterations of the synchronization loop for one word."""
    if record.exhausted:
        raise MetricError("distance undefined for an exhausted record")
    return int(record.iterations)


def surprisal(prior_log_mass, posterior_log_mass) -> float:
    """Bits of surprise: log-ratio of summed analysis probabilities."""
    if posterior_log_mass > prior_log_mass + 1e-9:
        raise MetricError(
            f"word-beam mass {posterior_log_mass} exceeds prior beam mass "
            f"{prior_log_mass}; beam bookkeeping is inconsistent")
    return max(0.0, (prior_log_mass - posterior_log_mass) / LN2)


def entropy(logprobs) -> float:
    """Shannon entropy in bits of the renormalized score distribution."""
    a = np.asarray(logprobs, dtype=np.float64)
    if a.size == 0:
        raise MetricError("entropy of an empty analysis set")
    m = a.max()
    lp = a - (m + np.log(np.exp(a - m).sum()))
    p = np.exp(lp)
    return float(-(p * lp).sum() / LN2)


def entropy_delta(prev, cur) -> float:
    return cur - prev


def records_to_rows(sent_index, tokens, records, function_words=None):
    """Assemble per-word metric rows for one sentence.

    Entropy at sentence start is defined as 0, so the first word's delta is
    its full entropy.  An exhausted record yields one flagged row with NaN
    metrics; words beyond it are absent.
    """
    words = function_words if function_words is not None else FUNCTION_WORDS
    rows = []
    prev_entropy = 0.0
    for record in records:
        token = tokens[record.word_index]
        content = token.lower() not in words
        if record.exhausted:
            rows.append(MetricRow(sent_index, record.word_index, token,
                                  math.nan, math.nan, math.nan, math.nan,
                                  content, True))
            break
        h = entropy(record.nextword_logprobs)
        rows.append(MetricRow(
            sent_index, record.word_index, token,
            distance(record),
            surprisal(record.prior_beam_mass, record.posterior_word_beam_mass),
            h, entropy_delta(prev_entropy, h), content, False))
        prev_entropy = h
    return rows


# --- bracket scoring ---------------------------------------------------------

def _bracket_counts(tree):
    counts = Counter()

    def walk(node, start):
        if node.is_terminal:
            return start + 1
        end = start
        for child in node.children:
            end = walk(child, end)
        counts[(node.label, start, end)] += 1
        return end

    walk(tree, 0)
    return counts


def bracket_f1(gold_trees, predicted_trees):
    """Corpus-level labeled bracketing (precision, recall, F1), in percent.

    Every nonterminal node counts as one labeled span, root included, with
    multiplicity; scores are micro-averaged over the corpus.
    """
    if len(gold_trees) != len(predicted_trees):
        raise MetricError(f"sentence counts differ: {len(gold_trees)} gold "
                          f"vs {len(predicted_trees)} predicted")
    match = gold_total = pred_total = 0
    for i, (gold, pred) in enumerate(zip(gold_trees, predicted_trees)):
        if gold.terminals() != pred.terminals():
            raise MetricError(f"terminal yields differ at sentence {i}")
        g = _bracket_counts(gold)
        p = _bracket_counts(pred)
        gold_total += sum(g.values())
        pred_total += sum(p.values())
        match += sum(min(count, g[span]) for span, count in p.items())
    precision = 100.0 * match / pred_total if pred_total else 0.0
    recall = 100.0 * match / gold_total if gold_total else 0.0
    f1 = (2 * precision * recall / (precision + recall)) if match else 0.0
    return precision, recall, f1


def action_perplexity(trees, params) -> float:
    """exp of total action NLL per word: joint tree+string perplexity.

    This is a per-word average over *all* parser actions and is not
    comparable to a plain word-level language-model perplexity; keep the two
    under their distinct column names.
    """
    from .rnng import corpus_action_nll

    nll, _, words = corpus_action_nll(trees, params)
    return math.exp(nll / words)


# --- tabular emission --------------------------------------------------------

def _fmt(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metrics_tsv(rows, path):
    """Fixed 9-column TSV; floats use shortest round-trip formatting."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(METRICS_HEADER) + "\n")
        for r in rows:
            fh.write("\t".join([
                str(r.sent), str(r.idx), r.token, _fmt(r.distance),
                _fmt(r.surprisal), _fmt(r.entropy), _fmt(r.entropy_delta),
                _fmt(r.content), _fmt(r.exhausted)]) + "\n")


def read_metrics_tsv(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = tuple(fh.readline().rstrip("\n").split("\t"))
        if header != METRICS_HEADER:
            raise MetricError(f"{path}: unexpected header {header}")
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            rows.append(MetricRow(
                sent=int(parts[0]), idx=int(parts[1]), token=parts[2],
                distance=float(parts[3]), surprisal=float(parts[4]),
                entropy=float(parts[5]), entropy_delta=float(parts[6]),
                content=parts[7] == "1", exhausted=parts[8] == "1"))
    return rows
