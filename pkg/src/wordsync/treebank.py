"""Bracketed phrase-structure trees and their derivational action sequences.

Trees are read from one-per-line bracket expressions in the usual treebank
style.  A depth-first traversal converts a tree to the open/generate/close
action alphabet that drives the generative parser, and back.
"""

from __future__ import annotations

from dataclasses import dataclass

NT = "NT"
GEN = "GEN"
REDUCE = "REDUCE"


class TreeParseError(ValueError):
    """Malformed bracket expression; carries the character offset."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at character {offset})")
        self.offset = offset


class ActionSequenceError(ValueError):
    """Ill-formed action sequence; carries the first offending index."""

    def __init__(self, message, index):
        super().__init__(f"{message} (at action index {index})")
        self.index = index


@dataclass(frozen=True)
class Action:
    kind: str  # NT, GEN, or REDUCE
    symbol: str | None = None  # nonterminal for NT, word for GEN, None for REDUCE

    def __post_init__(self):
        if self.kind == REDUCE:
            if self.symbol is not None:
                raise ValueError("REDUCE carries no symbol")
        elif self.kind in (NT, GEN):
            if not self.symbol:
                raise ValueError(f"{self.kind} requires a symbol")
        else:
            raise ValueError(f"unknown action kind {self.kind!r}")

    def __str__(self):
        return self.kind if self.kind == REDUCE else f"{self.kind}({self.symbol})"


class Tree:
    """Nonterminal node with ordered children, or a terminal leaf."""

    __slots__ = ("label", "children")

    def __init__(self, label, children=()):
        self.label = label
        self.children = list(children)

    @property
    def is_terminal(self):
        return not self.children

    def terminals(self):
        if self.is_terminal:
            return [self.label]
        out = []
        for child in self.children:
            out.extend(child.terminals())
        return out

    def nonterminal_count(self):
        if self.is_terminal:
            return 0
        return 1 + sum(c.nonterminal_count() for c in self.children)

    def render(self):
        if self.is_terminal:
            return self.label
        return "(" + self.label + " " + " ".join(c.render() for c in self.children) + ")"

    def __eq__(self, other):
        return (isinstance(other, Tree) and self.label == other.label
                and self.children == other.children)

    def __hash__(self):
        return hash((self.label, tuple(self.children)))

    def __repr__(self):
        return f"Tree({self.render()!r})"


def _tokenize(line):
    tokens = []
    i = 0
    n = len(line)
    while i < n:
        ch = line[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            tokens.append((ch, i))
            i += 1
        else:
            j = i
            while j < n and not line[j].isspace() and line[j] not in "()":
                j += 1
            tokens.append((line[i:j], i))
            i = j
    return tokens


def parse_bracketed(line):
    """Parse one bracket expression into a Tree.

    A bare extra outer bracket with no label, as in "( (S ...) )", is
    unwrapped.  Unbalanced brackets and empty constituents raise
    TreeParseError with the character offset.
    """
    tokens = _tokenize(line)
    if not tokens:
        raise TreeParseError("empty input", 0)
    pos = 0

    def parse_node():
        nonlocal pos
        tok, off = tokens[pos]
        if tok == ")":
            raise TreeParseError("unexpected ')'", off)
        if tok != "(":
            pos += 1
            return Tree(tok)
        pos += 1
        if pos >= len(tokens):
            raise TreeParseError("unbalanced brackets", len(line))
        label_tok, label_off = tokens[pos]
        if label_tok == "(":  # unlabeled wrapper: "( (S ...) )"
            label = None
        elif label_tok == ")":
            raise TreeParseError("empty constituent", label_off)
        else:
            label = label_tok
            pos += 1
        children = []
        while True:
            if pos >= len(tokens):
                raise TreeParseError("unbalanced brackets", len(line))
            tok, off = tokens[pos]
            if tok == ")":
                pos += 1
                break
            children.append(parse_node())
        if not children:
            raise TreeParseError("empty constituent", off)
        if label is None:
            if len(children) == 1 and not children[0].is_terminal:
                return children[0]
            raise TreeParseError("unlabeled constituent", label_off)
        return Tree(label, children)

    root = parse_node()
    if pos != len(tokens):
        raise TreeParseError("trailing material after tree", tokens[pos][1])
    if root.is_terminal:
        raise TreeParseError("root must be a nonterminal", 0)
    return root


def read_treebank(path):
    """One tree per non-blank line, UTF-8."""
    trees = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                trees.append(parse_bracketed(line))
    return trees


def write_treebank(trees, path):
    with open(path, "w", encoding="utf-8") as fh:
        for t in trees:
            fh.write(t.render() + "\n")


def tree_to_actions(tree):
    """Depth-first traversal of the tree as NT/GEN/REDUCE actions."""
    actions = []

    def walk(node):
        if node.is_terminal:
            actions.append(Action(GEN, node.label))
            return
        actions.append(Action(NT, node.label))
        for child in node.children:
            walk(child)
        actions.append(Action(REDUCE))

    walk(tree)
    return actions


def actions_to_tree(actions):
    """Exact inverse of tree_to_actions; rejects ill-formed sequences."""
    stack = []  # (label, children) for open constituents
    root = None
    for i, a in enumerate(actions):
        if root is not None:
            raise ActionSequenceError("action after derivation completed", i)
        if a.kind == NT:
            stack.append((a.symbol, []))
        elif a.kind == GEN:
            if not stack:
                raise ActionSequenceError("word generated outside any constituent", i)
            stack[-1][1].append(Tree(a.symbol))
        elif a.kind == REDUCE:
            if not stack:
                raise ActionSequenceError("REDUCE with no open constituent", i)
            label, children = stack.pop()
            if not children:
                raise ActionSequenceError("REDUCE of an empty constituent", i)
            node = Tree(label, children)
            if stack:
                stack[-1][1].append(node)
            else:
                root = node
        else:  # pragma: no cover - Action constructor forbids this
            raise ActionSequenceError(f"unknown action kind {a.kind!r}", i)
    if root is None:
        raise ActionSequenceError("derivation did not complete a root", len(actions))
    return root


def bracket_symbols(tree):
    """In-order open-bracket, terminal, and labeled close-bracket symbols.

    The length-n prefix of this sequence is the symbolic stack content after
    n derivational actions, which is exactly what the composition-free model
    variant keeps on its stack.
    """
    symbols = []

    def walk(node):
        if node.is_terminal:
            symbols.append(node.label)
            return
        symbols.append("(" + node.label)
        for child in node.children:
            walk(child)
        symbols.append(")" + node.label)

    walk(tree)
    return symbols


def random_tree(rng, nonterminals, words, max_depth=6, max_children=4):
    """Random well-formed tree for round-trip property tests."""
    def build(depth):
        if depth >= max_depth or (depth > 0 and rng.random() < 0.4):
            return Tree(words[rng.integers(len(words))])
        n = int(rng.integers(1, max_children + 1))
        label = nonterminals[rng.integers(len(nonterminals))]
        return Tree(label, [build(depth + 1) for _ in range(n)])

    label = nonterminals[rng.integers(len(nonterminals))]
    n = int(rng.integers(1, max_children + 1))
    return Tree(label, [build(1) for _ in range(n)])
