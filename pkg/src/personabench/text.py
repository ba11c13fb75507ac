"""Vocabulary and token encoding."""
from dataclasses import dataclass, field

UNK = "<unk>"
OOV_POLICIES = ("omit", "unk")


@dataclass
class Vocab:
    words: list
    oov_policy: str = "omit"
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        if self.oov_policy not in OOV_POLICIES:
            raise ValueError(f"unknown oov_policy {self.oov_policy!r}")
        self.index = {w: i for i, w in enumerate(self.words)}
        if len(self.index) != len(self.words):
            raise ValueError("duplicate words in vocab")
        if self.oov_policy == "unk" and self.index.get(UNK) != 0:
            raise ValueError("unk policy requires the UNK token at index 0")

    @property
    def size(self):
        return len(self.words)

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index

    def __eq__(self, other):
        return (isinstance(other, Vocab) and self.words == other.words
                and self.oov_policy == other.oov_policy)


def build_vocab(sentences, oov_policy="omit"):
    """Distinct tokens in first-occurrence order.

    ``sentences`` may hold :class:`~personabench.treebank.Sentence` objects or
    plain token sequences.
    """
    sentences = list(sentences)
    if not sentences:
        raise ValueError("cannot build a vocab from no sentences")
    words = [UNK] if oov_policy == "unk" else []
    seen = set(words)
    for s in sentences:
        for tok in getattr(s, "tokens", s):
            if tok not in seen:
                seen.add(tok)
                words.append(tok)
    return Vocab(words, oov_policy)


def encode(vocab, tokens):
    index = vocab.index
    if vocab.oov_policy == "unk":
        return [index.get(t, 0) for t in tokens]
    return [index[t] for t in tokens if t in index]


def decode(vocab, indices):
    return [vocab.words[i] for i in indices]
