"""A miniature version of the full experiment.

Words carrying sentiment are handed out to users, sentences follow their
words, and every user trains a private model.  We then compare each user's
own model against ensembles of everyone's models, on the user's own data and
on the pooled test set.
"""
import tempfile

from personabench import runner, synthetic
from personabench.neural import Hyperparams

with tempfile.TemporaryDirectory() as data_dir:
    synthetic.write_corpus(data_dir, n_train=600, n_dev=150, n_test=300, seed=2)
    config = runner.ExperimentConfig(
        data_dir=data_dir, users=(2, 4), trials=2, seed=2, k=30,
        hyper=Hyperparams(max_batches=600))
    report, trials = runner.run_experiment(config)

print(runner.report_markdown(report, alpha=0.5))
for n in config.users:
    for alpha in (0.0, 0.5, 1.0):
        print(f"{n} users, alpha={alpha}: choose {runner.choose_strategy(report, n, alpha)}")
