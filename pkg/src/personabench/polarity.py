"""Polar word lexicon from a bag-of-words logistic regression.

The regression is an experimenter-side tool: it reads the whole training split
to decide which words define the simulated users, and is never a user model.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .rng import Rng
from .text import build_vocab, encode


@dataclass
class LogRegModel:
    weights: np.ndarray
    bias: float


@dataclass(frozen=True)
class PolarLexicon:
    positive_words: tuple
    negative_words: tuple

    def __post_init__(self):
        if len(self.positive_words) != len(self.negative_words):
            raise ValueError("positive and negative lists differ in length")
        if set(self.positive_words) & set(self.negative_words):
            raise ValueError("a word cannot be both positive and negative")

    @property
    def k(self):
        return len(self.positive_words)

    @property
    def words(self):
        return self.positive_words + self.negative_words


def presence_matrix(sentences, vocab):
    """Binary sentence x word presence matrix (CSR)."""
    indptr = [0]
    cols = []
    for s in sentences:
        row = sorted(set(encode(vocab, s.tokens)))
        cols.extend(row)
        indptr.append(len(cols))
    data = np.ones(len(cols), dtype=np.float64)
    return sp.csr_matrix((data, np.asarray(cols, dtype=np.int64), np.asarray(indptr)),
                         shape=(len(sentences), vocab.size))


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def train_logreg(sentences, vocab, l2=1e-4, epochs=100, lr=0.1, rng_seed=0, init_scale=1e-3):
    """Full-batch gradient descent on L2-regularized mean binary cross-entropy."""
    sentences = list(sentences)
    if not sentences:
        raise ValueError("no training sentences")
    y = np.array([int(s.label) for s in sentences], dtype=np.float64)
    if y.min() == y.max():
        raise ValueError("logistic regression needs both classes in the training data")
    X = presence_matrix(sentences, vocab)
    Xt = X.T.tocsr()
    n = len(sentences)
    w = (Rng(rng_seed).uniform_array(vocab.size) * 2.0 - 1.0) * init_scale
    b = 0.0
    for _ in range(epochs):
        r = _sigmoid(X @ w + b) - y
        gw = (Xt @ r) / n + l2 * w
        gb = r.sum() / n
        w -= lr * gw
        b -= lr * gb
    if not np.all(np.isfinite(w)) or not np.isfinite(b):
        raise FloatingPointError("logistic regression diverged")
    return LogRegModel(w, float(b))


def top_polar_words(model, vocab, k=200):
    """k largest- and k smallest-weight words, ties broken by lower vocab index."""
    if vocab.size < 2 * k:
        raise ValueError(f"vocab of {vocab.size} words is smaller than 2k = {2 * k}")
    w = np.asarray(model.weights)
    idx = np.arange(len(w))
    # lexsort sorts by the last key first
    pos = np.lexsort((idx, -w))[:k]
    neg = np.lexsort((idx, w))[:k]
    return PolarLexicon(tuple(vocab.words[i] for i in pos), tuple(vocab.words[i] for i in neg))


def write_lexicon(path, lexicon):
    with open(path, "w", encoding="utf-8") as fh:
        for w in lexicon.positive_words:
            fh.write(f"+\t{w}\n")
        for w in lexicon.negative_words:
            fh.write(f"-\t{w}\n")


def read_lexicon(path):
    pos, neg = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            sign, _, word = line.partition("\t")
            if sign == "+":
                pos.append(word)
            elif sign == "-":
                neg.append(word)
            else:
                raise ValueError(f"{path}:{lineno}: expected '+' or '-' prefix")
    return PolarLexicon(tuple(pos), tuple(neg))


def build_lexicon(train_sentences, k=200, l2=1e-4, epochs=100, lr=0.1, rng_seed=0):
    vocab = build_vocab(train_sentences)
    model = train_logreg(train_sentences, vocab, l2=l2, epochs=epochs, lr=lr, rng_seed=rng_seed)
    return top_polar_words(model, vocab, k)
