"""Inference-time combination of frozen per-user models."""
import enum
from dataclasses import dataclass

import numpy as np

from . import neural
from .text import encode


class Strategy(str, enum.Enum):
    AVERAGE = "average"
    CONFIDENCE = "confidence"


@dataclass
class Ensemble:
    members: list
    strategy: Strategy = Strategy.AVERAGE

    def __post_init__(self):
        if not self.members:
            raise ValueError("an ensemble needs at least one member")
        self.strategy = Strategy(self.strategy)


def member_probs(members, batch_tokens):
    """members x sentences matrix; each member encodes with its own vocab."""
    if not members:
        raise ValueError("no ensemble members")
    return np.stack([
        neural.predict_proba(m, [encode(m.vocab, toks) for toks in batch_tokens])
        for m in members
    ]) if batch_tokens else np.zeros((len(members), 0))


def combine_average(probs):
    return probs.mean(axis=0)


def combine_confident(probs):
    # argmax returns the first maximum, i.e. the lowest member index on ties
    pick = np.argmax(np.abs(probs - 0.5), axis=0)
    return probs[pick, np.arange(probs.shape[1])]


_COMBINE = {Strategy.AVERAGE: combine_average, Strategy.CONFIDENCE: combine_confident}


def predict_average(members, sentence_tokens):
    return float(combine_average(member_probs(members, [list(sentence_tokens)]))[0])


def predict_confident(members, sentence_tokens):
    return float(combine_confident(member_probs(members, [list(sentence_tokens)]))[0])


def predict_proba(ensemble, batch_tokens):
    return _COMBINE[ensemble.strategy](member_probs(ensemble.members, batch_tokens))


def evaluate(ensemble, sentences):
    sentences = list(sentences)
    if not sentences:
        return neural.EvalSummary(0, 0)
    p = predict_proba(ensemble, [s.tokens for s in sentences])
    y = np.array([int(s.label) for s in sentences])
    return neural.EvalSummary(int(np.sum((p >= 0.5) == (y == 1))), len(sentences))


def ensemble_to_bytes(ensemble):
    blobs = [neural.model_to_bytes(m) for m in ensemble.members]
    header = {"format": neural.MODEL_FORMAT, "version": neural.MODEL_VERSION,
              "kind": "ensemble", "strategy": ensemble.strategy.value}
    return neural.pack(header, blobs)


def ensemble_from_bytes(data):
    header, blobs = neural.unpack(data)
    if header.get("kind") != "ensemble":
        raise ValueError("artifact is not an ensemble")
    return Ensemble([neural.model_from_bytes(b) for b in blobs], Strategy(header["strategy"]))
