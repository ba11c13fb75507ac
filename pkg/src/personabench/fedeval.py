"""Simulated privacy-preserving evaluation.

Each :class:`UserNode` keeps its shard private.  Other parties can only send it
a serialized model (or ensemble) and get back a ``(correct, total)`` count.
Messages are plain values, so a network transport could sit at the boundary.
"""
import itertools
import threading
from dataclasses import dataclass, field

from . import ensemble as ens
from . import neural
from .neural import EvalSummary

NODE_SPLITS = ("test", "dev", "pure_test")


@dataclass(frozen=True)
class EvaluateRequest:
    artifact: bytes
    split: str
    request_id: int


@dataclass(frozen=True)
class EvaluateResponse:
    correct: int
    total: int
    request_id: int


@dataclass
class AuditLog:
    """Record of every message crossing a node boundary."""
    entries: list = field(default_factory=list)

    def record(self, direction, node, message):
        self.entries.append((direction, node, message))

    def payload_types(self):
        return {type(m) for _, _, m in self.entries}


def to_artifact(obj):
    if isinstance(obj, (bytes, bytearray)):
        return bytes(obj)
    if isinstance(obj, neural.ModelParams):
        return neural.model_to_bytes(obj)
    if isinstance(obj, ens.Ensemble):
        return ens.ensemble_to_bytes(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__} as a model artifact")


def load_artifact(data):
    header, _ = neural.unpack(data)
    if header.get("kind") == "ensemble":
        return ens.ensemble_from_bytes(data)
    return neural.model_from_bytes(data)


class UserNode:
    """One simulated user.  Its shard never leaves the object."""

    def __init__(self, user, shard=None, model=None):
        self.user = user
        self._shard = shard
        self._model = model
        self._lock = threading.Lock()

    @property
    def initialized(self):
        return self._shard is not None

    def export_model(self):
        if self._model is None:
            raise RuntimeError(f"node {self.user} has no local model")
        return neural.model_to_bytes(self._model)

    def handle(self, request):
        if not self.initialized:
            raise RuntimeError(f"node {self.user} is not initialized with a shard")
        if request.split not in NODE_SPLITS:
            raise ValueError(f"unknown split {request.split!r}")
        model = load_artifact(request.artifact)
        with self._lock:
            sentences = self._shard.split(request.split)
            if isinstance(model, ens.Ensemble):
                s = ens.evaluate(model, sentences)
            else:
                s = neural.evaluate(model, sentences)
        return EvaluateResponse(s.correct, s.total, request.request_id)


_request_ids = itertools.count(1)


def node_evaluate(node, foreign, split="test", log=None):
    """Ask ``node`` to score ``foreign`` on one of its private splits."""
    req = EvaluateRequest(to_artifact(foreign), split, next(_request_ids))
    if log is not None:
        log.record("request", node.user, req)
    resp = node.handle(req)
    if log is not None:
        log.record("response", node.user, resp)
    if resp.request_id != req.request_id:
        raise RuntimeError("response does not match request")
    return EvalSummary(resp.correct, resp.total)


@dataclass(frozen=True)
class GlobalEvalReport:
    per_node: tuple
    total: EvalSummary

    @property
    def aggregate(self):
        """Micro-averaged accuracy: summed correct over summed total."""
        return self.total.accuracy


def aggregate_summaries(summaries):
    summaries = tuple(summaries)
    total = EvalSummary(0, 0)
    for s in summaries:
        total = total + s
    return GlobalEvalReport(summaries, total)


def global_accuracy(model, nodes, split="test", log=None):
    if not nodes:
        raise ValueError("global evaluation needs at least one node")
    artifact = to_artifact(model)
    return aggregate_summaries(node_evaluate(n, artifact, split, log) for n in nodes)
