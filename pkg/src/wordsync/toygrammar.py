"""Deterministic desk-scale grammar for training runs and benchmarks.

Five nonterminals (S, NP, VP, PP, ADJP) over a 20-word vocabulary.  Every
word belongs to exactly one class and every rule shape is a deterministic
function of the word classes present, so the gold tree is recoverable from
the token string alone; a trained parser can approach perfect bracketing.
"""

from __future__ import annotations

import numpy as np

from .treebank import Tree

DETERMINERS = ("the", "a")
NOUNS = ("cat", "dog", "bird", "king", "queen", "garden", "book")
ADJECTIVES = ("old", "big")
V_INTRANS = ("sleeps", "smiles")
V_TRANS = ("sees", "likes", "finds")
V_PREP = ("looks", "goes")
PREPOSITIONS = ("at", "into")

ALL_WORDS = (DETERMINERS + NOUNS + ADJECTIVES + V_INTRANS + V_TRANS
             + V_PREP + PREPOSITIONS)

NONTERMINALS = ("S", "NP", "VP", "PP", "ADJP")


def _choice(rng, items):
    return items[rng.integers(len(items))]


def _sample_np(rng, adj_prob=0.25):
    det = Tree(_choice(rng, DETERMINERS))
    noun = Tree(_choice(rng, NOUNS))
    if rng.random() < adj_prob:
        adjp = Tree("ADJP", [Tree(_choice(rng, ADJECTIVES))])
        return Tree("NP", [det, adjp, noun])
    return Tree("NP", [det, noun])


def _sample_vp(rng):
    r = rng.random()
    if r < 0.3:
        return Tree("VP", [Tree(_choice(rng, V_INTRANS))])
    if r < 0.8:
        return Tree("VP", [Tree(_choice(rng, V_TRANS)), _sample_np(rng)])
    pp = Tree("PP", [Tree(_choice(rng, PREPOSITIONS)), _sample_np(rng, adj_prob=0.0)])
    return Tree("VP", [Tree(_choice(rng, V_PREP)), pp])


def sample_tree(rng) -> Tree:
    return Tree("S", [_sample_np(rng), _sample_vp(rng)])


def generate_treebank(n_sentences, seed=0):
    rng = np.random.default_rng(seed)
    return [sample_tree(rng) for _ in range(n_sentences)]


def main(argv=None):
    """Regenerate the bundled treebank files: toygrammar OUTDIR."""
    import sys
    from pathlib import Path

    from .treebank import write_treebank

    args = argv if argv is not None else sys.argv[1:]
    outdir = Path(args[0]) if args else Path("data")
    outdir.mkdir(parents=True, exist_ok=True)
    write_treebank(generate_treebank(200, seed=1), outdir / "toy_train.mrg")
    write_treebank(generate_treebank(40, seed=2), outdir / "toy_dev.mrg")
    with open(outdir / "toy_dev.tok", "w", encoding="utf-8") as fh:
        for tree in generate_treebank(40, seed=2):
            fh.write(" ".join(tree.terminals()) + "\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
