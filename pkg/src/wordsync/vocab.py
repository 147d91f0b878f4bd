"""Word and nonterminal tables with orthography-keyed unknown classes.

Out-of-vocabulary words map to one of a fixed inventory of unknown classes
derived from surface features (capitalization, digits, suffix), so the word
generator can always assign mass to unseen tokens.  Capitalization is
neutralized in sentence-initial position.
"""

from __future__ import annotations

import hashlib
from collections import Counter

BOS = "<s>"
EOS = "</s>"

_UNK_SUFFIXES = ("ing", "ion", "ed", "er", "ly", "s")
_UNK_BASES = ("num",) + _UNK_SUFFIXES + ("",)


def unknown_classes():
    """The full fixed inventory of unknown-class tokens."""
    names = []
    for cap in ("", "-cap"):
        for base in _UNK_BASES:
            tail = f"-{base}" if base else ""
            names.append(f"<unk{cap}{tail}>")
    return names


def classify_unknown(word, sentence_initial=False):
    """Deterministic unknown-class token for an OOV word."""
    cap = "-cap" if (word[:1].isupper() and not sentence_initial) else ""
    if any(ch.isdigit() for ch in word):
        return f"<unk{cap}-num>"
    lowered = word.lower()
    for suffix in _UNK_SUFFIXES:
        if len(lowered) > len(suffix) + 1 and lowered.endswith(suffix):
            return f"<unk{cap}-{suffix}>"
    return f"<unk{cap}>"


class VocabError(ValueError):
    pass


class Vocab:
    """Dense word and nonterminal id tables."""

    def __init__(self, words_with_counts, nonterminals, min_count):
        self.min_count = min_count
        self.unk_inventory = unknown_classes()
        self._words = list(self.unk_inventory) + [BOS, EOS]
        self._counts = {w: 0 for w in self._words}
        for word, count in words_with_counts:
            if word in self._counts:
                raise VocabError(f"reserved token {word!r} appears in the corpus")
            self._words.append(word)
            self._counts[word] = count
        self._word_to_id = {w: i for i, w in enumerate(self._words)}
        self._nts = list(nonterminals)
        self._nt_to_id = {s: i for i, s in enumerate(self._nts)}
        if len(self._nt_to_id) != len(self._nts):
            raise VocabError("duplicate nonterminal labels")

    @property
    def word_count(self):
        return len(self._words)

    @property
    def nonterminal_count(self):
        return len(self._nts)

    @property
    def bos_id(self):
        return self._word_to_id[BOS]

    @property
    def eos_id(self):
        return self._word_to_id[EOS]

    def __contains__(self, word):
        return word in self._word_to_id

    def map_token(self, word, sentence_initial=False):
        """In-vocabulary id, or the id of the word's unknown class."""
        wid = self._word_to_id.get(word)
        if wid is not None:
            return wid
        return self._word_to_id[classify_unknown(word, sentence_initial)]

    def word_str(self, wid):
        return self._words[wid]

    def nt_id(self, label):
        nid = self._nt_to_id.get(label)
        if nid is None:
            raise VocabError(f"unknown nonterminal {label!r}")
        return nid

    def nt_str(self, nid):
        return self._nts[nid]

    @property
    def nonterminals(self):
        return list(self._nts)

    def export_text(self):
        lines = [f"{w}\t{i}\t{self._counts[w]}" for i, w in enumerate(self._words)]
        lines += [f"#NT\t{i}\t{s}" for i, s in enumerate(self._nts)]
        return "\n".join(lines) + "\n"

    def digest(self):
        return hashlib.sha256(self.export_text().encode()).hexdigest()

    def to_dict(self):
        return {
            "min_count": self.min_count,
            "words": [[w, self._counts[w]] for w in self._words[len(self.unk_inventory) + 2:]],
            "nonterminals": list(self._nts),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(data["words"], data["nonterminals"], data["min_count"])


def build_vocab(trees, min_count=2):
    """Count terminals over a treebank and keep words at or above min_count.

    Id assignment is stable under re-runs: kept words are ordered by
    descending frequency, ties broken lexicographically.
    """
    if not trees:
        raise VocabError("cannot build a vocabulary from an empty corpus")
    word_counts = Counter()
    nonterminals = set()

    def walk(node):
        if node.is_terminal:
            word_counts[node.label] += 1
            return
        nonterminals.add(node.label)
        for child in node.children:
            walk(child)

    for tree in trees:
        walk(tree)
    kept = sorted((w for w, c in word_counts.items() if c >= min_count),
                  key=lambda w: (-word_counts[w], w))
    return Vocab([(w, word_counts[w]) for w in kept], sorted(nonterminals), min_count)


def vocab_from_sentences(sentences, min_count=1):
    """Vocabulary over plain token sequences (language-model corpora)."""
    if not sentences:
        raise VocabError("cannot build a vocabulary from an empty corpus")
    word_counts = Counter()
    for sent in sentences:
        word_counts.update(sent)
    kept = sorted((w for w, c in word_counts.items() if c >= min_count),
                  key=lambda w: (-word_counts[w], w))
    return Vocab([(w, word_counts[w]) for w in kept], [], min_count)


def write_vocab(vocab, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(vocab.export_text())
