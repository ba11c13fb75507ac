"""Sentiment treebank reader.

Files hold one tree per line, e.g. ``(3 (2 A) (4 B))``.  Every node carries a
fine-grained label 0..4; leaves carry a token.
"""
import enum
import os
from dataclasses import dataclass, field
from typing import Optional

DEFAULT_FILES = {"train": "train.txt", "dev": "dev.txt", "test": "test.txt"}


class ParseError(ValueError):
    def __init__(self, message, line, offset, source=None):
        self.message = message
        self.line = line
        self.offset = offset
        self.source = source
        where = f"{source}:" if source else "line "
        super().__init__(f"{where}{line}:{offset}: {message}")


class DataError(ValueError):
    """Corpus-level problems: missing files, empty splits."""


class Sentiment(enum.IntEnum):
    NEGATIVE = 0
    POSITIVE = 1
    DROP = 2


@dataclass(frozen=True)
class SentimentTree:
    label: int
    children: tuple = ()
    token: Optional[str] = None

    def __post_init__(self):
        if self.label not in (0, 1, 2, 3, 4):
            raise ValueError(f"label outside 0..4: {self.label!r}")
        if (self.token is None) == (not self.children):
            raise ValueError("a node needs exactly one of: token, children")

    @property
    def is_leaf(self):
        return self.token is not None

    def leaves(self):
        stack = [self]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                yield node.token
            else:
                stack.extend(reversed(node.children))

    def subtrees(self):
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def serialize(self):
        if self.is_leaf:
            return f"({self.label} {self.token})"
        return f"({self.label} " + " ".join(c.serialize() for c in self.children) + ")"

    __str__ = serialize


@dataclass(frozen=True)
class Sentence:
    tokens: tuple
    label: Sentiment
    id: int
    # (tokens, label) for every non-neutral subtree; filled only for phrase-level training
    phrases: tuple = field(default=(), compare=False, repr=False)


@dataclass(frozen=True)
class Corpus:
    train: list
    dev: list
    test: list
    # raw tree counts per split before neutral filtering
    tree_counts: dict = field(default_factory=dict, compare=False)

    def split(self, name):
        return {"train": self.train, "dev": self.dev, "test": self.test}[name]


def _is_space(ch):
    return ch.isspace()


def _parse_line(line, lineno):
    n = len(line)
    i = 0

    def err(msg, pos):
        raise ParseError(msg, lineno, pos)

    while i < n and _is_space(line[i]):
        i += 1
    if i >= n or line[i] != "(":
        err("expected '('", i)

    # stack entries: [label, children list, token or None, open offset]
    stack = []
    root = None
    while i < n:
        ch = line[i]
        if _is_space(ch):
            i += 1
        elif ch == "(":
            if root is not None:
                err("trailing content after tree", i)
            if stack and stack[-1][2] is not None:
                err("node mixes a token and child nodes", i)
            start = i
            i += 1
            j = i
            while j < n and not _is_space(line[j]) and line[j] not in "()":
                j += 1
            text = line[i:j]
            if not text:
                err("missing label", i)
            if not (len(text) == 1 and text in "01234"):
                err(f"label outside 0..4: {text!r}", i)
            stack.append([int(text), [], None, start])
            i = j
        elif ch == ")":
            if not stack:
                err("unbalanced ')'", i)
            label, children, token, start = stack.pop()
            if token is None and not children:
                err("empty node", start)
            node = SentimentTree(label, tuple(children), token)
            if stack:
                stack[-1][1].append(node)
            else:
                root = node
            i += 1
        else:
            if not stack:
                err("token outside any node", i)
            j = i
            while j < n and not _is_space(line[j]) and line[j] not in "()":
                j += 1
            top = stack[-1]
            if top[2] is not None or top[1]:
                err("node has more than one token or mixes token and children", i)
            top[2] = line[i:j]
            i = j
    if stack:
        err("unbalanced '(': tree not closed", stack[-1][3])
    return root


def parse_trees(text):
    """Parse every nonempty line of ``text`` into a :class:`SentimentTree`."""
    trees = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            trees.append(_parse_line(line, lineno))
    return trees


def normalize(token):
    return token.lower()


def sentence_of(tree):
    """Return (normalized leaf tokens, root label)."""
    return [normalize(t) for t in tree.leaves()], tree.label


def binarize(root_label):
    if root_label in (0, 1):
        return Sentiment.NEGATIVE
    if root_label in (3, 4):
        return Sentiment.POSITIVE
    if root_label == 2:
        return Sentiment.DROP
    raise ValueError(f"label outside 0..4: {root_label!r}")


def sentences_from_trees(trees, with_phrases=False):
    out = []
    for tree in trees:
        tokens, root = sentence_of(tree)
        label = binarize(root)
        if label is Sentiment.DROP:
            continue
        phrases = ()
        if with_phrases:
            phrases = tuple(
                (tuple(toks), lab)
                for toks, lab in (
                    (tuple(normalize(t) for t in sub.leaves()), binarize(sub.label))
                    for sub in tree.subtrees()
                )
                if lab is not Sentiment.DROP
            )
        out.append(Sentence(tuple(tokens), label, len(out), phrases))
    return out


def load_corpus(directory, files=None, train_granularity="sentence"):
    """Read the three splits under ``directory`` and drop neutral sentences.

    ``train_granularity="phrase"`` additionally keeps the labeled phrases of
    each training tree on ``Sentence.phrases``; partitioning stays sentence level.
    """
    if train_granularity not in ("sentence", "phrase"):
        raise ValueError(f"unknown train_granularity {train_granularity!r}")
    files = {**DEFAULT_FILES, **(files or {})}
    splits = {}
    counts = {}
    for name in ("train", "dev", "test"):
        path = os.path.join(directory, files[name])
        if not os.path.isfile(path):
            raise DataError(f"missing {name} split file: {path}")
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        try:
            trees = parse_trees(text)
        except ParseError as e:
            raise ParseError(e.message, e.line, e.offset, source=path) from None
        counts[name] = len(trees)
        splits[name] = sentences_from_trees(
            trees, with_phrases=(name == "train" and train_granularity == "phrase"))
        if not splits[name]:
            raise DataError(f"empty split after neutral filtering: {name} ({path})")
    return Corpus(splits["train"], splits["dev"], splits["test"], counts)


def write_trees(path, trees):
    with open(path, "w", encoding="utf-8") as fh:
        for t in trees:
            fh.write(t.serialize() + "\n")
