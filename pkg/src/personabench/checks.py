"""Self-checks run by ``personabench selfcheck``."""
import numpy as np

from . import fedeval, neural, partition, synthetic, treebank
from .rng import Rng
from .text import build_vocab


def random_model(rng, vocab_size=12, dim=5, hidden=4, scale=0.5):
    words = [f"t{i}" for i in range(vocab_size)]
    hyper = neural.Hyperparams(dim=dim, hidden=hidden)
    u = lambda shape: (rng.uniform_array(shape) * 2 - 1) * scale
    return neural.ModelParams(u((vocab_size, dim)), u((dim, hidden)), u(hidden), u(hidden),
                              float(u(1)[0]), build_vocab([words]), hyper)


def _loss(params, idx, label):
    p = neural.forward(params, idx)
    return -(label * np.log(p) + (1 - label) * np.log(1 - p))


def gradient_check(n_configs=100, step=1e-5, seed=0):
    """Max relative error between analytic and central-difference gradients."""
    rng = Rng(seed)
    worst = 0.0
    for c in range(n_configs):
        r = rng.split(c)
        params = random_model(r, vocab_size=3 + r.next_below(10), dim=1 + r.next_below(6),
                              hidden=1 + r.next_below(6))
        idx = [r.next_below(params.vocab.size) for _ in range(1 + r.next_below(6))]
        label = r.next_below(2)
        g = neural.grad(params, idx, label)
        analytic = {"embeddings": g.embeddings, "W1": g.W1, "b1": g.b1, "W2": g.W2,
                    "b2": np.array([g.b2])}
        for name, arr in params.arrays().items():
            num = np.zeros(arr.shape)
            for i in np.ndindex(arr.shape):
                vals = []
                for sign in (1, -1):
                    p = params.copy()
                    if name == "b2":
                        p.b2 = params.b2 + sign * step
                    else:
                        getattr(p, name)[i] += sign * step
                    vals.append(_loss(p, idx, label))
                num[i] = (vals[0] - vals[1]) / (2 * step)
            a = analytic[name]
            # per-tensor relative error; tiny entries make per-element ratios meaningless
            err = np.linalg.norm(a - num) / max(np.linalg.norm(a), np.linalg.norm(num), 1e-8)
            worst = max(worst, float(err))
    return worst


def fedeval_equivalence(n_rounds=5, seed=0):
    """True if summed node summaries equal centralized evaluation every round."""
    rng = Rng(seed)
    for r in range(n_rounds):
        rr = rng.split(r)
        trees = synthetic.make_trees(500, rr.split("trees"), neutral_rate=0.0)
        sents = treebank.sentences_from_trees(trees)
        params = neural.init_params(build_vocab(sents[:250]), neural.Hyperparams(), rr.split("init"))
        n = 2 + rr.next_below(7)
        shards = [partition.UserShard(u) for u in range(n)]
        for s in sents:
            shards[rr.next_below(n)].test.append(s)
        nodes = [fedeval.UserNode(sh.user, sh) for sh in shards]
        fed = fedeval.global_accuracy(params, nodes).total
        central = neural.evaluate(params, sents)
        if (fed.correct, fed.total) != (central.correct, central.total):
            return False
    return True
