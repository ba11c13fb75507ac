"""Small synthetic treebanks in the same file format as the real corpus.

Sentences mix neutral filler words with a few sentiment-bearing words, so a
polar lexicon, user partitions and the classifier all have something to find.
"""
import os

from .rng import Rng
from .treebank import SentimentTree, write_trees


def _branch(leaves, label):
    # right-branching binary tree over the leaf nodes
    node = leaves[-1]
    for leaf in reversed(leaves[:-1]):
        node = SentimentTree(label, (leaf, node))
    return node


def make_trees(n, rng, n_polar=60, n_neutral=300, min_len=4, max_len=12,
               neutral_rate=0.15, noise=0.1):
    """``n`` random trees.  Polar words are ``pos{i}`` / ``neg{i}``."""
    trees = []
    for _ in range(n):
        if rng.next_uniform() < neutral_rate:
            root = 2
        else:
            root = (0, 1, 3, 4)[rng.next_below(4)]
        positive = root >= 3
        length = min_len + rng.next_below(max_len - min_len + 1)
        n_pol = 0 if root == 2 else 1 + rng.next_below(3)
        leaves = []
        for _ in range(length - n_pol):
            # squared uniform skews filler words toward low indices, like real text
            w = int(n_neutral * rng.next_uniform() ** 2)
            leaves.append(SentimentTree(2, token=f"w{w}"))
        for _ in range(n_pol):
            side = positive if rng.next_uniform() >= noise else not positive
            w = rng.next_below(n_polar)
            tok = f"pos{w}" if side else f"neg{w}"
            pos = rng.next_below(len(leaves) + 1)
            leaves.insert(pos, SentimentTree(3 if side else 1, token=tok))
        trees.append(_branch(leaves, root))
    return trees


def write_corpus(directory, n_train=600, n_dev=150, n_test=300, seed=0, **kwargs):
    """Write ``train.txt``/``dev.txt``/``test.txt`` under ``directory``."""
    os.makedirs(directory, exist_ok=True)
    rng = Rng(seed)
    for name, n in (("train", n_train), ("dev", n_dev), ("test", n_test)):
        write_trees(os.path.join(directory, f"{name}.txt"), make_trees(n, rng.split(name), **kwargs))
    return directory
