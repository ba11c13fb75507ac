import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from personabench import neural
from personabench.neural import AdamState, EvalSummary, Hyperparams, ModelParams
from personabench.partition import UserShard
from personabench.rng import Rng
from personabench.text import build_vocab
from personabench.treebank import Sentence, Sentiment


def small_model(seed=0, vocab_size=6, dim=3, hidden=4, scale=0.7, keep=0.5):
    r = np.random.default_rng(seed)
    u = lambda *shape: r.uniform(-scale, scale, size=shape)
    vocab = build_vocab([[f"w{i}" for i in range(vocab_size)]])
    hyper = Hyperparams(dim=dim, hidden=hidden, dropout_keep=keep)
    return ModelParams(u(vocab_size, dim), u(dim, hidden), u(hidden), u(hidden),
                       float(u(1)[0]), vocab, hyper)


def zero_model(vocab_size=4, dim=3, hidden=2):
    vocab = build_vocab([[f"w{i}" for i in range(vocab_size)]])
    return ModelParams(np.zeros((vocab_size, dim)), np.zeros((dim, hidden)), np.zeros(hidden),
                       np.zeros(hidden), 0.0, vocab, Hyperparams(dim=dim, hidden=hidden))


def hand_forward(params, idx):
    """Scalar arithmetic, written out loop by loop."""
    E, W1, b1, W2, b2 = (params.embeddings.tolist(), params.W1.tolist(), params.b1.tolist(),
                         params.W2.tolist(), params.b2)
    d, h = len(W1), len(b1)
    pooled = [sum(E[i][k] for i in idx) / len(idx) for k in range(d)]
    hid = [math.tanh(sum(pooled[k] * W1[k][j] for k in range(d)) + b1[j]) for j in range(h)]
    z = sum(W2[j] * hid[j] for j in range(h)) + b2
    return 1.0 / (1.0 + math.exp(-z))


class TestForward:
    def test_zero_params_half(self):
        assert neural.forward(zero_model(), [0, 1, 3]) == 0.5

    def test_empty_input_half(self):
        assert neural.forward(small_model(), []) == 0.5

    def test_matches_hand_arithmetic(self):
        m = small_model(3)
        for idx in ([0], [1, 2], [5, 5, 0, 3]):
            assert abs(neural.forward(m, idx) - hand_forward(m, idx)) < 1e-12

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            neural.forward(small_model(), [99])

    @given(st.lists(st.integers(0, 5), min_size=1, max_size=8), st.randoms())
    def test_permutation_invariant(self, idx, rnd):
        m = small_model(1)
        shuffled = list(idx)
        rnd.shuffle(shuffled)
        assert abs(neural.forward(m, idx) - neural.forward(m, shuffled)) < 1e-14

    @given(st.lists(st.integers(0, 5), min_size=1, max_size=8), st.integers(0, 100))
    def test_strictly_inside_unit_interval(self, idx, seed):
        p = neural.forward(small_model(seed), idx)
        assert 0.0 < p < 1.0

    def test_dropout_changes_train_mode_only(self):
        m = small_model(2)
        infer = neural.forward(m, [0, 1])
        assert neural.forward(m, [0, 1]) == infer
        trained = {neural.forward(m, [0, 1], Rng(s)) for s in range(20)}
        assert len(trained) > 1

    def test_keep_one_disables_dropout(self):
        m = small_model(2, keep=1.0)
        assert neural.forward(m, [0, 1], Rng(3)) == neural.forward(m, [0, 1])


def bce(p, y):
    return -(y * math.log(p) + (1 - y) * math.log(1 - p))


def central_differences(params, idx, label, step=1e-5, rng_seed=None):
    def loss(p):
        rng = None if rng_seed is None else Rng(rng_seed)
        return bce(neural.forward(p, idx, rng), label)
    out = {}
    for name in ("embeddings", "W1", "b1", "W2"):
        arr = getattr(params, name)
        g = np.zeros_like(arr)
        for i in np.ndindex(arr.shape):
            plus, minus = params.copy(), params.copy()
            getattr(plus, name)[i] += step
            getattr(minus, name)[i] -= step
            g[i] = (loss(plus) - loss(minus)) / (2 * step)
        out[name] = g
    plus, minus = params.copy(), params.copy()
    plus.b2 += step
    minus.b2 -= step
    out["b2"] = np.array([(loss(plus) - loss(minus)) / (2 * step)])
    return out


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-8)


def analytic(g):
    return {"embeddings": g.embeddings, "W1": g.W1, "b1": g.b1, "W2": g.W2, "b2": np.array([g.b2])}


class TestGrad:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.lists(st.integers(0, 5), min_size=1, max_size=6),
           st.integers(0, 1))
    def test_finite_differences_no_dropout(self, seed, idx, label):
        m = small_model(seed)
        g = analytic(neural.grad(m, idx, label))
        num = central_differences(m, idx, label)
        for name in g:
            assert rel_err(g[name], num[name]) < 1e-4, name

    @pytest.mark.parametrize("placement", ["hidden", "input"])
    def test_finite_differences_fixed_dropout_mask(self, placement):
        import dataclasses
        m = small_model(4)
        m.hyper = dataclasses.replace(m.hyper, dropout_on=placement)
        g = analytic(neural.grad(m, [0, 2, 2], 1, Rng(17)))
        num = central_differences(m, [0, 2, 2], 1, rng_seed=17)
        for name in g:
            assert rel_err(g[name], num[name]) < 1e-4, name

    def test_output_bias_stationary_at_label(self):
        m = zero_model()
        # p = 0.5 for the zero model; a soft label of 0.5 is exactly matched
        g = neural.grad(m, [1], 0.5)
        assert g.b2 == 0.0

    def test_absent_rows_zero(self):
        m = small_model(5)
        g = neural.grad(m, [1, 3], 1)
        dense = g.embeddings
        assert np.all(dense[[0, 2, 4, 5]] == 0)
        assert np.any(dense[1] != 0) and np.any(dense[3] != 0)

    def test_empty_sentence_no_gradient(self):
        g = neural.grad(small_model(), [], 1)
        assert g.b2 == 0 and not g.W1.any() and not g.embeddings.any()

    def test_batch_gradient_is_mean_of_single(self):
        m = small_model(6)
        batch, labels = [[0, 1], [2], [3, 3, 4]], [1, 0, 1]
        _, gb = neural.loss_and_grads(m, batch, labels)
        singles = [neural.grad(m, x, y) for x, y in zip(batch, labels)]
        assert np.allclose(gb.W1, sum(s.W1 for s in singles) / 3, atol=1e-15)
        assert np.allclose(gb.embeddings, sum(s.embeddings for s in singles) / 3, atol=1e-15)


def reference_adam(theta, grads_seq, lr=0.001, b1=0.9, b2=0.999, eps=1e-8):
    """Scalar-by-scalar Adam with bias correction."""
    m = [0.0] * len(theta)
    v = [0.0] * len(theta)
    theta = list(theta)
    for t, g in enumerate(grads_seq, start=1):
        for i in range(len(theta)):
            m[i] = b1 * m[i] + (1 - b1) * g[i]
            v[i] = b2 * v[i] + (1 - b2) * g[i] ** 2
            mhat = m[i] / (1 - b1 ** t)
            vhat = v[i] / (1 - b2 ** t)
            theta[i] -= lr * mhat / (math.sqrt(vhat) + eps)
    return theta


def grads_like(params, fill):
    V, d = params.embeddings.shape
    return neural.Grads(np.arange(V), np.full((V, d), fill), np.full(params.W1.shape, fill),
                        np.full(params.b1.shape, fill), np.full(params.W2.shape, fill),
                        float(fill), V)


def flat(params):
    return np.concatenate([params.embeddings.ravel(), params.W1.ravel(), params.b1,
                           params.W2, [params.b2]])


class TestAdam:
    def test_first_step_is_minus_lr(self):
        m = zero_model()
        new, state = neural.adam_step(m, grads_like(m, 1.0), AdamState.zeros_like(m), 0.001)
        assert np.allclose(flat(new), -0.001 / (1 + 1e-8), atol=1e-9, rtol=0)
        assert state.t == 1

    def test_zero_grad_leaves_params(self):
        m = small_model()
        new, state = neural.adam_step(m, grads_like(m, 0.0), AdamState.zeros_like(m), 0.001)
        assert np.array_equal(flat(new), flat(m))
        assert state.t == 1

    def test_does_not_mutate_inputs(self):
        m = small_model()
        before = flat(m).copy()
        st0 = AdamState.zeros_like(m)
        neural.adam_step(m, grads_like(m, 0.3), st0, 0.01)
        assert np.array_equal(flat(m), before) and st0.t == 0

    def test_two_steps_match_reference(self):
        m = small_model(7)
        g1 = neural.grad(m, [0, 1], 1)
        g2 = neural.grad(m, [2, 4, 4], 0)
        p, st_ = neural.adam_step(m, g1, AdamState.zeros_like(m), 0.001)
        p, st_ = neural.adam_step(p, g2, st_, 0.001)
        ref = reference_adam(flat(m).tolist(), [flat_grad(g1), flat_grad(g2)])
        assert np.max(np.abs(flat(p) - np.array(ref))) < 1e-12

    def test_shape_mismatch(self):
        m = small_model()
        bad = grads_like(small_model(hidden=5), 1.0)
        with pytest.raises(ValueError):
            neural.adam_step(m, bad, AdamState.zeros_like(m), 0.001)


def flat_grad(g):
    return np.concatenate([g.embeddings.ravel(), g.W1.ravel(), g.b1, g.W2, [g.b2]]).tolist()


def toy_shard():
    pos = [f"good{i}" for i in range(5)]
    neg = [f"bad{i}" for i in range(5)]
    sents = []
    for i in range(20):
        label = Sentiment.POSITIVE if i % 2 == 0 else Sentiment.NEGATIVE
        word = (pos if label else neg)[i % 5]
        sents.append(Sentence(("the", word, "movie"), label, i))
    return UserShard(0, train=sents, dev=list(sents), test=list(sents))


class TestTrain:
    hyper = Hyperparams(eval_every_batches=5, patience_batches=200, lr0=0.01)

    def test_fits_separable_toy(self):
        shard = toy_shard()
        model = neural.train(shard, self.hyper)
        s = neural.evaluate(model, shard.train)
        assert s.correct == s.total == 20

    def test_zero_patience_returns_initial(self):
        import dataclasses
        shard = toy_shard()
        h = dataclasses.replace(self.hyper, patience_batches=0)
        model = neural.train(shard, h)
        init = neural.init_params(build_vocab(shard.train), h, Rng(h.seed).split("init"))
        assert np.array_equal(model.embeddings, init.embeddings)
        assert np.array_equal(model.W1, init.W1)

    def test_bit_identical_given_seed(self):
        a = neural.train(toy_shard(), self.hyper)
        b = neural.train(toy_shard(), self.hyper)
        assert neural.model_to_bytes(a) == neural.model_to_bytes(b)

    def test_seed_matters(self):
        import dataclasses
        a = neural.train(toy_shard(), self.hyper)
        b = neural.train(toy_shard(), dataclasses.replace(self.hyper, seed=1))
        assert not np.array_equal(a.W1, b.W1)

    def test_history_and_decay(self):
        history = []
        neural.train(toy_shard(), self.hyper, history)
        assert history[0]["batch"] == 0
        lrs = [e["lr"] for e in history]
        assert all(b <= a for a, b in zip(lrs, lrs[1:]))
        assert lrs[-1] < self.hyper.lr0

    def test_empty_shards_rejected(self):
        with pytest.raises(ValueError):
            neural.train(UserShard(0, train=[], dev=toy_shard().dev), self.hyper)
        with pytest.raises(ValueError):
            neural.train(UserShard(0, train=toy_shard().train, dev=[]), self.hyper)

    def test_trained_beats_zero_model(self, synthetic_corpus):
        shard = UserShard(0, train=synthetic_corpus.train, dev=synthetic_corpus.dev)
        model = neural.train(shard, Hyperparams(eval_every_batches=10, patience_batches=100))
        zero = zero_model()
        zero.vocab = model.vocab
        zero.embeddings = np.zeros((model.vocab.size, 3))
        assert (neural.evaluate(model, synthetic_corpus.train).correct
                >= neural.evaluate(zero, synthetic_corpus.train).correct)

    def test_phrase_granularity_uses_phrases(self, tmp_path):
        from personabench import treebank
        for name in ("train", "dev", "test"):
            (tmp_path / f"{name}.txt").write_text("(3 (2 a) (4 b))\n(1 (2 a) (0 c))\n")
        c = treebank.load_corpus(str(tmp_path), train_granularity="phrase")
        xs, ys = neural._examples(c.train, build_vocab(c.train), "phrase")
        assert len(xs) == 4 and ys.tolist() == [1, 1, 0, 0]


class TestEvaluate:
    def test_zero_model_counts_positives(self):
        sents = [Sentence(("w0",), Sentiment.POSITIVE, 0), Sentence(("w1",), Sentiment.NEGATIVE, 1),
                 Sentence(("w2",), Sentiment.POSITIVE, 2)]
        assert neural.evaluate(zero_model(), sents) == EvalSummary(2, 3)

    def test_empty(self):
        assert neural.evaluate(small_model(), []) == EvalSummary(0, 0)

    def test_additive_over_disjoint_sets(self, synthetic_corpus):
        m = neural.init_params(build_vocab(synthetic_corpus.train), Hyperparams(), Rng(1))
        a, b = synthetic_corpus.test[:100], synthetic_corpus.test[100:]
        assert neural.evaluate(m, a + b) == neural.evaluate(m, a) + neural.evaluate(m, b)

    def test_summary_invariant(self):
        with pytest.raises(ValueError):
            EvalSummary(3, 2)


class TestArtifacts:
    def test_round_trip_bit_exact(self, tmp_path):
        m = small_model(9)
        path = tmp_path / "m.bin"
        neural.save_model(path, m)
        back = neural.load_model(path)
        assert back.vocab == m.vocab and back.hyper == m.hyper
        for name, arr in m.arrays().items():
            assert arr.tobytes() == back.arrays()[name].tobytes()
        assert neural.model_to_bytes(back) == path.read_bytes()

    def test_rejects_garbage(self):
        with pytest.raises(ValueError):
            neural.model_from_bytes(b"not a model")

    def test_rejects_unknown_version(self):
        header, blobs = neural.unpack(neural.model_to_bytes(small_model()))
        header["version"] = 99
        header.pop("blob_sizes")
        with pytest.raises(ValueError):
            neural.model_from_bytes(neural.pack(header, blobs))


def test_default_patience():
    assert neural.default_patience(6920, 32) == math.ceil(5 * 6920 / 32)


@pytest.mark.parametrize("kw", [{"lr_decay": 1.0}, {"lr_decay": 0.0}, {"dropout_keep": 0.0},
                                {"dropout_on": "both"}, {"patience_batches": -1}])
def test_hyperparam_validation(kw):
    with pytest.raises(ValueError):
        Hyperparams(**kw)
