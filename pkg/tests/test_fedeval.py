import numpy as np
import pytest

from personabench import fedeval, neural, partition
from personabench.ensemble import Ensemble
from personabench.fedeval import (AuditLog, EvaluateRequest, EvaluateResponse, UserNode,
                                  global_accuracy, node_evaluate)
from personabench.neural import EvalSummary, Hyperparams
from personabench.rng import Rng
from personabench.text import build_vocab


@pytest.fixture(scope="module")
def model(synthetic_corpus):
    return neural.init_params(build_vocab(synthetic_corpus.train), Hyperparams(), Rng(2))


def random_nodes(corpus, n, seed):
    r = Rng(seed)
    shards = [partition.UserShard(u) for u in range(n)]
    for s in corpus.test:
        shards[r.next_below(n)].test.append(s)
    return [UserNode(sh.user, sh) for sh in shards], shards


def test_empty_test_shard(model):
    node = UserNode(0, partition.UserShard(0))
    assert node_evaluate(node, model) == EvalSummary(0, 0)


def test_own_model_matches_direct(synthetic_corpus, model):
    nodes, shards = random_nodes(synthetic_corpus, 3, 1)
    for node, sh in zip(nodes, shards):
        assert node_evaluate(node, model) == neural.evaluate(model, sh.test)


@pytest.mark.parametrize("n", range(2, 9))
def test_summed_summaries_equal_centralized(synthetic_corpus, model, n):
    nodes, _ = random_nodes(synthetic_corpus, n, n)
    report = global_accuracy(model, nodes)
    central = neural.evaluate(model, synthetic_corpus.test)
    assert (report.total.correct, report.total.total) == (central.correct, central.total)
    assert report.aggregate == central.accuracy


def test_aggregate_arithmetic():
    r = fedeval.aggregate_summaries([EvalSummary(3, 4), EvalSummary(1, 2)])
    assert r.aggregate == 4 / 6


def test_single_node(synthetic_corpus, model):
    nodes, shards = random_nodes(synthetic_corpus, 1, 0)
    assert global_accuracy(model, nodes).aggregate == neural.evaluate(model, shards[0].test).accuracy


def test_no_nodes():
    with pytest.raises(ValueError):
        global_accuracy(b"", [])


def test_uninitialized_node(model):
    with pytest.raises(RuntimeError):
        node_evaluate(UserNode(0), model)


def test_ensemble_artifact(synthetic_corpus, model):
    nodes, _ = random_nodes(synthetic_corpus, 4, 3)
    e = Ensemble([model, model], "average")
    assert global_accuracy(e, nodes).total == global_accuracy(model, nodes).total


def test_audit_log_carries_only_artifacts_and_counts(synthetic_corpus, model):
    nodes, _ = random_nodes(synthetic_corpus, 3, 4)
    log = AuditLog()
    global_accuracy(model, nodes, log=log)
    assert log.payload_types() == {EvaluateRequest, EvaluateResponse}
    for direction, _, msg in log.entries:
        if direction == "request":
            assert isinstance(msg.artifact, bytes)
        else:
            assert isinstance(msg.correct, int) and isinstance(msg.total, int)
    assert len(log.entries) == 6


def test_node_evaluation_idempotent_and_side_effect_free(synthetic_corpus, model):
    nodes, shards = random_nodes(synthetic_corpus, 2, 5)
    before = [list(sh.test) for sh in shards]
    first = [node_evaluate(n, model) for n in nodes]
    second = [node_evaluate(n, model) for n in nodes]
    assert first == second
    assert [list(sh.test) for sh in shards] == before


def test_public_node_surface_exposes_no_sentences():
    node = UserNode(0, partition.UserShard(0))
    public = [name for name in dir(node) if not name.startswith("_")]
    assert set(public) == {"user", "initialized", "export_model", "handle"}


def test_unknown_split(synthetic_corpus, model):
    nodes, _ = random_nodes(synthetic_corpus, 2, 6)
    with pytest.raises(ValueError):
        node_evaluate(nodes[0], model, split="train")


def test_export_model_round_trip(model):
    node = UserNode(0, partition.UserShard(0), model)
    back = neural.model_from_bytes(node.export_model())
    assert np.array_equal(back.W1, model.W1)
