"""Per-user sentence classifier: mean of word embeddings -> tanh layer -> sigmoid.

Training is Adam on binary cross-entropy with dropout, learning-rate decay on a
validation plateau, and early stopping that returns the best snapshot.
"""
import dataclasses
import json
import math
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .rng import Rng
from .text import Vocab, build_vocab, encode

MODEL_FORMAT = "personabench.model"
MODEL_VERSION = 1
_MAGIC = b"PBART1\n"


@dataclass(frozen=True)
class Hyperparams:
    dim: int = 35
    hidden: int = 50
    dropout_keep: float = 0.5
    dropout_on: str = "hidden"  # or "input": the pooled embedding
    lr0: float = 0.001
    lr_decay: float = 0.95
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    eval_every_batches: int = 100
    patience_batches: Optional[int] = None  # None: 5 epochs of the global train split
    max_batches: int = 100_000
    init_embedding: float = 0.05
    oov_policy: str = "omit"
    train_granularity: str = "sentence"
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.lr_decay < 1:
            raise ValueError("lr_decay must be in (0, 1)")
        if not 0 < self.dropout_keep <= 1:
            raise ValueError("dropout_keep must be in (0, 1]")
        if self.dropout_on not in ("hidden", "input"):
            raise ValueError(f"dropout_on must be 'hidden' or 'input', got {self.dropout_on!r}")
        if self.batch_size < 1 or self.eval_every_batches < 1:
            raise ValueError("batch_size and eval_every_batches must be >= 1")
        if self.patience_batches is not None and self.patience_batches < 0:
            raise ValueError("patience_batches must be >= 0")


def default_patience(n_global_train, batch_size):
    """Batches equivalent to 5 epochs over the global train split."""
    return math.ceil(5 * n_global_train / batch_size)


@dataclass
class ModelParams:
    embeddings: np.ndarray  # vocab_size x dim
    W1: np.ndarray          # dim x hidden
    b1: np.ndarray          # hidden
    W2: np.ndarray          # hidden
    b2: float
    vocab: Vocab
    hyper: Hyperparams = field(default_factory=Hyperparams)

    def copy(self):
        return dataclasses.replace(
            self, embeddings=self.embeddings.copy(), W1=self.W1.copy(),
            b1=self.b1.copy(), W2=self.W2.copy())

    def arrays(self):
        return {"embeddings": self.embeddings, "W1": self.W1, "b1": self.b1,
                "W2": self.W2, "b2": np.array([self.b2])}


@dataclass
class Grads:
    """Gradient shaped like ModelParams; embedding rows stored sparsely."""
    emb_rows: np.ndarray
    emb_values: np.ndarray
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float
    vocab_size: int

    @property
    def embeddings(self):
        dense = np.zeros((self.vocab_size, self.emb_values.shape[1]))
        dense[self.emb_rows] = self.emb_values
        return dense


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0
    scratch: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @classmethod
    def zeros_like(cls, params):
        arrs = params.arrays()
        return cls({k: np.zeros_like(a) for k, a in arrs.items()},
                   {k: np.zeros_like(a) for k, a in arrs.items()})

    def copy(self):
        return AdamState({k: a.copy() for k, a in self.m.items()},
                         {k: a.copy() for k, a in self.v.items()}, self.t)


@dataclass(frozen=True)
class EvalSummary:
    correct: int = 0
    total: int = 0

    def __post_init__(self):
        if not 0 <= self.correct <= self.total:
            raise ValueError(f"invalid summary {self.correct}/{self.total}")

    def __add__(self, other):
        return EvalSummary(self.correct + other.correct, self.total + other.total)

    @property
    def accuracy(self):
        return self.correct / self.total if self.total else float("nan")


def init_params(vocab, hyper, rng):
    d, h = hyper.dim, hyper.hidden

    def glorot(shape, fan_in, fan_out):
        a = math.sqrt(6.0 / (fan_in + fan_out))
        return (rng.uniform_array(shape) * 2.0 - 1.0) * a

    emb = (rng.uniform_array((vocab.size, d)) * 2.0 - 1.0) * hyper.init_embedding
    W1 = glorot((d, h), d, h)
    W2 = glorot((h,), h, 1)
    return ModelParams(emb, W1, np.zeros(h), W2, 0.0, vocab, hyper)


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def _pooling(batch, vocab_size):
    """Averaging matrix over the distinct rows used by ``batch``.

    Returns (rows, A, nonempty) with A of shape len(batch) x len(rows) so that
    ``A @ E[rows]`` is the per-sentence mean embedding.
    """
    arrays = [np.asarray(x, dtype=np.int64) for x in batch]
    lengths = np.array([a.size for a in arrays], dtype=np.int64)
    flat = np.concatenate(arrays) if arrays else np.zeros(0, dtype=np.int64)
    if flat.size and (flat.min() < 0 or flat.max() >= vocab_size):
        raise IndexError(f"token index out of range for vocab of size {vocab_size}")
    rows, cols = np.unique(flat, return_inverse=True)
    data = np.repeat(1.0 / np.maximum(lengths, 1), lengths)
    indptr = np.concatenate(([0], np.cumsum(lengths)))
    A = sp.csr_matrix((data, cols.ravel(), indptr), shape=(len(batch), len(rows)))
    A.sum_duplicates()
    return rows, A, lengths > 0


def _dropout_masks(params, n, rng):
    hyper = params.hyper
    if rng is None or hyper.dropout_keep >= 1.0:
        return None, None
    keep = hyper.dropout_keep
    if hyper.dropout_on == "hidden":
        shape = (n, params.W1.shape[1])
    else:
        shape = (n, params.W1.shape[0])
    mask = (rng.uniform_array(shape) < keep) / keep
    return (mask, None) if hyper.dropout_on == "hidden" else (None, mask)


def _forward_batch(params, batch, rng=None):
    rows, A, nonempty = _pooling(batch, params.embeddings.shape[0])
    pooled = A @ params.embeddings[rows]
    hmask, imask = _dropout_masks(params, len(batch), rng)
    x = pooled if imask is None else pooled * imask
    h = np.tanh(x @ params.W1 + params.b1)
    hd = h if hmask is None else h * hmask
    z = hd @ params.W2 + params.b2
    z = np.where(nonempty, z, 0.0)
    return {"rows": rows, "A": A, "nonempty": nonempty, "pooled": pooled, "x": x,
            "imask": imask, "h": h, "hmask": hmask, "hd": hd, "z": z}


def predict_proba(params, batch, rng=None):
    """Positive-class probability for each index list in ``batch``."""
    if len(batch) == 0:
        return np.zeros(0)
    c = _forward_batch(params, batch, rng)
    return np.where(c["nonempty"], _sigmoid(c["z"]), 0.5)


def forward(params, token_indices, rng=None):
    """Probability for one sentence.  ``rng`` given means train mode (dropout on)."""
    return float(predict_proba(params, [list(token_indices)], rng)[0])


def loss_and_grads(params, batch, labels, rng=None):
    """Mean binary cross-entropy over ``batch`` and its exact gradient."""
    c = _forward_batch(params, batch, rng)
    y = np.asarray(labels, dtype=np.float64)
    n = len(batch)
    ne = c["nonempty"]
    z = c["z"]
    # empty sentences are pinned at p = 0.5 and carry no gradient
    loss = float(np.sum(np.where(ne, np.logaddexp(0.0, z) - y * z, math.log(2.0))) / n)
    dz = np.where(ne, _sigmoid(z) - y, 0.0) / n
    dW2 = c["hd"].T @ dz
    db2 = float(dz.sum())
    dh = np.outer(dz, params.W2)
    if c["hmask"] is not None:
        dh *= c["hmask"]
    da = dh * (1.0 - c["h"] ** 2)
    dW1 = c["x"].T @ da
    db1 = da.sum(axis=0)
    dx = da @ params.W1.T
    if c["imask"] is not None:
        dx *= c["imask"]
    demb = c["A"].T @ dx
    g = Grads(c["rows"], np.asarray(demb), dW1, db1, dW2, db2, params.embeddings.shape[0])
    return loss, g


def grad(params, token_indices, label, rng=None):
    """Gradient of the single-sentence cross-entropy.  Dropout active iff ``rng``."""
    return loss_and_grads(params, [list(token_indices)], [label], rng)[1]


def _adam_inplace(params, grads, state, lr, hyper):
    b1, b2, eps = hyper.beta1, hyper.beta2, hyper.eps
    state.t += 1
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t

    def upd(name, p, g):
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)

    upd("W1", params.W1, grads.W1)
    upd("b1", params.b1, grads.b1)
    upd("W2", params.W2, grads.W2)
    b2arr = np.array([params.b2])
    upd("b2", b2arr, np.array([grads.b2]))
    params.b2 = float(b2arr[0])
    # dense Adam on the embedding table; absent rows still move with their moments
    m, v = state.m["embeddings"], state.v["embeddings"]
    m *= b1
    v *= b2
    if len(grads.emb_rows):
        m[grads.emb_rows] += (1.0 - b1) * grads.emb_values
        v[grads.emb_rows] += (1.0 - b2) * grads.emb_values ** 2
    if state.scratch is None or state.scratch.shape != m.shape:
        state.scratch = np.empty_like(m)
    tmp = state.scratch
    np.divide(v, c2, out=tmp)
    np.sqrt(tmp, out=tmp)
    np.add(tmp, eps, out=tmp)
    np.divide(m, tmp, out=tmp)
    np.multiply(tmp, lr / c1, out=tmp)
    np.subtract(params.embeddings, tmp, out=params.embeddings)


def adam_step(params, grads, state, lr):
    """One bias-corrected Adam update.  Returns new (params, state)."""
    for name, arr in params.arrays().items():
        if name == "embeddings":
            ok = (grads.vocab_size == arr.shape[0]
                  and grads.emb_values.shape[1:] == arr.shape[1:])
        elif name == "b2":
            ok = np.ndim(grads.b2) == 0
        else:
            ok = np.shape(getattr(grads, name)) == arr.shape
        if not ok or state.m[name].shape != arr.shape:
            raise ValueError(f"shape mismatch for {name}")
    params, state = params.copy(), state.copy()
    _adam_inplace(params, grads, state, lr, params.hyper)
    return params, state


def _examples(sentences, vocab, granularity):
    idx, labels = [], []
    for s in sentences:
        pairs = s.phrases if granularity == "phrase" and s.phrases else ((s.tokens, s.label),)
        for toks, lab in pairs:
            idx.append(np.asarray(encode(vocab, toks), dtype=np.int64))
            labels.append(int(lab))
    return idx, np.asarray(labels, dtype=np.float64)


def _accuracy_fn(sentences, vocab):
    batch = [encode(vocab, s.tokens) for s in sentences]
    y = np.array([int(s.label) for s in sentences])
    rows, A, nonempty = _pooling(batch, vocab.size)

    def acc(params):
        pooled = A @ params.embeddings[rows]
        z = np.tanh(pooled @ params.W1 + params.b1) @ params.W2 + params.b2
        pred = np.where(nonempty, _sigmoid(z) >= 0.5, True)
        return float(np.mean(pred == (y == 1)))
    return acc


def train(shard, hyper, history=None):
    """Train one private model on ``shard.train``, early-stopped on ``shard.dev``.

    Returns the snapshot with the best dev accuracy.  ``history``, if given,
    receives one dict per evaluation.
    """
    if not shard.train or not shard.dev:
        raise ValueError(f"user {getattr(shard, 'user', '?')}: empty train or dev shard")
    rng = Rng(hyper.seed)
    vocab = build_vocab(shard.train, hyper.oov_policy)
    xs, ys = _examples(shard.train, vocab, hyper.train_granularity)
    dev_acc = _accuracy_fn(shard.dev, vocab)
    patience = hyper.patience_batches
    if patience is None:
        patience = default_patience(len(shard.train), hyper.batch_size)

    params = init_params(vocab, hyper, rng.split("init"))
    shuffle_rng = rng.split("shuffle")
    dropout_rng = rng.split("dropout")
    state = AdamState.zeros_like(params)
    best, best_acc = params.copy(), dev_acc(params)
    lr = hyper.lr0
    if history is not None:
        history.append({"batch": 0, "dev_acc": best_acc, "lr": lr})
    if patience == 0:
        return best

    batches = since_best = 0
    bs = hyper.batch_size
    while True:
        order = shuffle_rng.shuffle(range(len(xs)))
        for start in range(0, len(order), bs):
            sel = order[start:start + bs]
            _, g = loss_and_grads(params, [xs[i] for i in sel], ys[sel], dropout_rng)
            _adam_inplace(params, g, state, lr, hyper)
            batches += 1
            since_best += 1
            if batches % hyper.eval_every_batches == 0:
                acc = dev_acc(params)
                if acc > best_acc:
                    best, best_acc, since_best = params.copy(), acc, 0
                else:
                    lr *= hyper.lr_decay
                if history is not None:
                    history.append({"batch": batches, "dev_acc": acc, "lr": lr})
                if since_best >= patience:
                    return best
            if batches >= hyper.max_batches:
                return best


def evaluate(params, sentences):
    """Count sentences whose thresholded prediction (p >= 0.5 is positive) is right."""
    sentences = list(sentences)
    if not sentences:
        return EvalSummary(0, 0)
    p = predict_proba(params, [encode(params.vocab, s.tokens) for s in sentences])
    y = np.array([int(s.label) for s in sentences])
    return EvalSummary(int(np.sum((p >= 0.5) == (y == 1))), len(sentences))


# -- artifacts ---------------------------------------------------------------

def pack(header, blobs):
    """Deterministic container: magic, JSON header, then raw byte blobs."""
    header = dict(header, blob_sizes=[len(b) for b in blobs])
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _MAGIC + struct.pack("<Q", len(head)) + head + b"".join(blobs)


def unpack(data):
    if not data.startswith(_MAGIC):
        raise ValueError("not a personabench artifact")
    off = len(_MAGIC)
    (n,) = struct.unpack_from("<Q", data, off)
    off += 8
    header = json.loads(data[off:off + n].decode("utf-8"))
    off += n
    blobs = []
    for size in header["blob_sizes"]:
        blobs.append(data[off:off + size])
        off += size
    if off != len(data):
        raise ValueError("trailing bytes in artifact")
    return header, blobs


def model_to_bytes(params):
    arrays = params.arrays()
    header = {
        "format": MODEL_FORMAT, "version": MODEL_VERSION, "kind": "model",
        "hyper": dataclasses.asdict(params.hyper),
        "vocab": params.vocab.words, "oov_policy": params.vocab.oov_policy,
        "arrays": [{"name": k, "shape": list(a.shape)} for k, a in arrays.items()],
    }
    blobs = [np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays.values()]
    return pack(header, blobs)


def model_from_bytes(data):
    header, blobs = unpack(data)
    if header.get("format") != MODEL_FORMAT or header.get("kind") != "model":
        raise ValueError("artifact is not a model")
    if header["version"] != MODEL_VERSION:
        raise ValueError(f"unsupported model version {header['version']}")
    arrs = {spec["name"]: np.frombuffer(b, dtype="<f8").reshape(spec["shape"]).astype(np.float64)
            for spec, b in zip(header["arrays"], blobs)}
    vocab = Vocab(list(header["vocab"]), header["oov_policy"])
    return ModelParams(arrs["embeddings"], arrs["W1"], arrs["b1"], arrs["W2"],
                       float(arrs["b2"][0]), vocab, Hyperparams(**header["hyper"]))


def save_model(path, params):
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(params))


def load_model(path):
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())
