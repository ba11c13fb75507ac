"""Scoring a model on data you cannot see.

Each user node keeps its sentences private.  A model travels to a node as an
opaque byte artifact; the node answers with only (correct, total).  Summing
those counts gives exactly the accuracy a central evaluator would compute.
"""
from personabench import fedeval, neural, partition, synthetic, treebank
from personabench.rng import Rng
from personabench.text import build_vocab

sentences = treebank.sentences_from_trees(synthetic.make_trees(500, Rng(4)))
shard = partition.UserShard(0, train=sentences[:300], dev=sentences[300:350])
model = neural.train(shard, neural.Hyperparams(max_batches=300, seed=4))

# Spread the held-out sentences over three nodes.
held_out = sentences[350:]
nodes = []
for u in range(3):
    nodes.append(fedeval.UserNode(u, partition.UserShard(u, test=held_out[u::3])))

log = fedeval.AuditLog()
report = fedeval.global_accuracy(model, nodes, log=log)
for node_id, summary in enumerate(report.per_node):
    print(f"node {node_id}: {summary.correct}/{summary.total}")
central = neural.evaluate(model, held_out)
print(f"federated {report.total.correct}/{report.total.total} "
      f"= {report.total.accuracy:.3f}; central {central.accuracy:.3f}")
print("message types seen:", sorted(t.__name__ for t in log.payload_types()))
print("artifact size:", len(fedeval.to_artifact(model)), "bytes")
