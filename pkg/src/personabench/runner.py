"""Experiment orchestration: seeded trials over user counts, averaged reports."""
import concurrent.futures
import csv
import dataclasses
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field
import numpy as np

from . import ensemble as ens
from . import fedeval, metric, neural, partition, polarity, treebank
from .rng import Rng, derive_seed

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
SINGLE = "single"
ENSEMBLE_STRATEGIES = tuple(s.value for s in ens.Strategy)
METRICS = ("pure_test_accuracy", "global_accuracy")

NOTES = (
    "Binary labels: fine-grained 0,1 -> negative; 3,4 -> positive; 2 dropped.",
    "Pure-test cells: per-user accuracy combined within a trial per `user_weighting`, "
    "then an unweighted mean over trials; users with an empty pure test set are skipped "
    "and counted in `n_empty`.",
    "Global cells are micro-averaged over node summaries (sum correct / sum total).",
    "Difference tables are single-user accuracy minus ensemble accuracy, computed from "
    "the trial-averaged cells.",
    "Break-even alpha compares single (first) against each ensemble (second) using "
    "accuracies, so higher is better.",
    "Sign convention: every difference is single minus ensemble.  Worked examples "
    "elsewhere that quote p_single - p_average with the opposite sign will produce a "
    "different cutoff from the same tables; no sign is flipped here to reconcile them.",
)


class TrialError(RuntimeError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial or []


def _parse_grid(text):
    """``"0:1:0.05"`` -> (0.0, 0.05, ..., 1.0); ``"0.1,0.9"`` -> (0.1, 0.9)."""
    text = str(text).strip()
    if ":" in text:
        lo, hi, step = (float(x) for x in text.split(":"))
        n = int(round((hi - lo) / step))
        return tuple(round(lo + i * step, 12) for i in range(n + 1))
    return tuple(float(x) for x in text.split(",") if x.strip())


def _parse_ints(text):
    return tuple(int(x) for x in str(text).split(",") if x.strip())


def _parse_strs(text):
    return tuple(x.strip() for x in str(text).split(",") if x.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    data_dir: str = ""
    users: tuple = (2, 3, 5, 8)
    trials: int = 15
    seed: int = 0
    k: int = 200
    strategies: tuple = (SINGLE,) + ENSEMBLE_STRATEGIES
    alpha_grid: tuple = tuple(round(0.05 * i, 12) for i in range(21))
    word_partition: str = "iid"
    pure_requires_owned: bool = False
    user_weighting: str = "uniform"
    logreg_l2: float = 1e-4
    logreg_epochs: int = 100
    logreg_lr: float = 0.1
    logreg_seed: int = 0
    hyper: neural.Hyperparams = field(default_factory=neural.Hyperparams)
    # execution-only settings; never part of a report's data body
    workers: int = 1
    lexicon_path: str = ""

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.users or any(u < 1 for u in self.users):
            raise ValueError("user counts must be >= 1")
        if any(not 0.0 <= a <= 1.0 for a in self.alpha_grid):
            raise ValueError("alpha grid must lie in [0, 1]")
        unknown = set(self.strategies) - {SINGLE, *ENSEMBLE_STRATEGIES}
        if unknown or SINGLE not in self.strategies:
            raise ValueError(f"strategies must include 'single'; unknown: {sorted(unknown)}")
        if self.user_weighting not in ("uniform", "by_count"):
            raise ValueError(f"unknown user_weighting {self.user_weighting!r}")
        if self.word_partition not in ("iid", "balanced"):
            raise ValueError(f"unknown word_partition {self.word_partition!r}")

    EXECUTION_KEYS = ("data_dir", "workers", "lexicon_path")

    def to_flat(self, include_execution=True):
        out = {}
        for f in dataclasses.fields(self):
            if f.name == "hyper":
                continue
            if not include_execution and f.name in self.EXECUTION_KEYS:
                continue
            v = getattr(self, f.name)
            out[f.name] = ",".join(str(x) for x in v) if isinstance(v, tuple) else v
        for f in dataclasses.fields(self.hyper):
            if f.name == "seed":
                continue
            out[f.name] = getattr(self.hyper, f.name)
        return out

    @classmethod
    def from_flat(cls, mapping):
        """Build from string-valued (or typed) key/value pairs, e.g. a config file."""
        top = {f.name: f for f in dataclasses.fields(cls)}
        hyp = {f.name: f for f in dataclasses.fields(neural.Hyperparams)}
        kw, hkw = {}, {}
        for key, value in mapping.items():
            key = key.replace("-", "_")
            if key in top and key != "hyper":
                kw[key] = _coerce(top[key], value)
            elif key in hyp:
                hkw[key] = _coerce(hyp[key], value)
            else:
                raise ValueError(f"unknown config key {key!r}")
        return cls(hyper=neural.Hyperparams(**hkw), **kw)


def _coerce(f, value):
    if not isinstance(value, str):
        return tuple(value) if isinstance(value, list) else value
    name = f.name
    if name in ("users",):
        return _parse_ints(value)
    if name == "strategies":
        return _parse_strs(value)
    if name == "alpha_grid":
        return _parse_grid(value)
    if name == "patience_batches":
        return None if value.lower() in ("", "none", "auto") else int(value)
    default = f.default
    if isinstance(default, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


def read_config_file(path):
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def write_config_file(path, config):
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in config.to_flat().items():
            fh.write(f"{k} = {'none' if v is None else v}\n")


# -- trials --------------------------------------------------------------------

@dataclass
class TrialResult:
    """Raw counts of one trial.  Accuracy lists hold ``[correct, total]`` pairs.

    ``pure[s]`` has one pair per user.  ``global_[s]`` has one pair per user for
    the single strategy and a single pair for an ensemble (shared by all users).
    """
    n_users: int
    trial_index: int
    seed: int
    shard_sizes: list
    pure: dict
    global_: dict
    training: list = field(default_factory=list)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["global"] = d.pop("global_")
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["global_"] = d.pop("global")
        return cls(**d)


def prepare_lexicon(corpus, config):
    path = config.lexicon_path
    if path and os.path.isfile(path):
        lex = polarity.read_lexicon(path)
        if lex.k != config.k:
            raise ValueError(f"cached lexicon {path} has k={lex.k}, config wants {config.k}")
        return lex
    lex = polarity.build_lexicon(corpus.train, k=config.k, l2=config.logreg_l2,
                                 epochs=config.logreg_epochs, lr=config.logreg_lr,
                                 rng_seed=config.logreg_seed)
    if path:
        polarity.write_lexicon(path, lex)
    return lex


def run_trial(config, n_users, trial_index, corpus, lexicon):
    seed = derive_seed(config.seed, "trial", n_users, trial_index)
    rng = Rng(seed)
    ownership = partition.assign_words(lexicon, n_users, rng.split("words"), config.word_partition)
    shards = partition.assign_sentences(corpus, ownership, rng.split("sentences"),
                                        require_owned=config.pure_requires_owned)
    hyper = config.hyper
    patience = hyper.patience_batches
    if patience is None:
        patience = neural.default_patience(len(corpus.train), hyper.batch_size)

    models, training = [], []
    for shard in shards:
        h = dataclasses.replace(hyper, patience_batches=patience,
                                seed=rng.split(f"model:{shard.user}").state)
        history = []
        models.append(neural.train(shard, h, history))
        training.append({"batches": history[-1]["batch"],
                         "best_dev_acc": max(e["dev_acc"] for e in history)})

    nodes = [fedeval.UserNode(sh.user, sh, m) for sh, m in zip(shards, models)]
    exported = [n.export_model() for n in nodes]
    pure, glob = {}, {}
    if SINGLE in config.strategies:
        pure[SINGLE] = [list(astuple(fedeval.node_evaluate(n, exported[n.user], "pure_test")))
                        for n in nodes]
        glob[SINGLE] = [list(astuple(fedeval.global_accuracy(art, nodes).total))
                        for art in exported]
    for s in config.strategies:
        if s == SINGLE:
            continue
        members = [neural.model_from_bytes(a) for a in exported]
        artifact = ens.ensemble_to_bytes(ens.Ensemble(members, s))
        pure[s] = [list(astuple(fedeval.node_evaluate(n, artifact, "pure_test"))) for n in nodes]
        glob[s] = [list(astuple(fedeval.global_accuracy(artifact, nodes).total))]

    sizes = [{name: len(sh.split(name)) for name in partition.SPLITS + ("pure_test",)}
             for sh in shards]
    return TrialResult(n_users, trial_index, seed, sizes, pure, glob, training)


def astuple(summary):
    return summary.correct, summary.total


_WORKER = {}


def _init_worker(config, corpus, lexicon):
    _WORKER.update(config=config, corpus=corpus, lexicon=lexicon)


def _worker_trial(key):
    n, t = key
    return run_trial(_WORKER["config"], n, t, _WORKER["corpus"], _WORKER["lexicon"])


def run_trials(config, corpus, lexicon):
    """All (n_users, trial) cells, sorted by key.  Raises TrialError with partial results."""
    keys = [(n, t) for n in config.users for t in range(config.trials)]
    done = {}
    try:
        if config.workers > 1:
            with concurrent.futures.ProcessPoolExecutor(
                    config.workers, initializer=_init_worker,
                    initargs=(config, corpus, lexicon)) as pool:
                futures = {pool.submit(_worker_trial, k): k for k in keys}
                for fut in concurrent.futures.as_completed(futures):
                    k = futures[fut]
                    try:
                        done[k] = fut.result()
                    except Exception as e:
                        raise TrialError(f"trial n_users={k[0]} trial={k[1]} failed: {e}") from e
                    log.info("finished n_users=%d trial=%d", *k)
        else:
            for k in keys:
                try:
                    done[k] = run_trial(config, k[0], k[1], corpus, lexicon)
                except Exception as e:
                    raise TrialError(f"trial n_users={k[0]} trial={k[1]} failed: {e}") from e
                log.info("finished n_users=%d trial=%d", *k)
    except TrialError as e:
        e.partial = [done[k] for k in sorted(done)]
        raise
    return [done[k] for k in sorted(done)]


# -- reports -------------------------------------------------------------------

def _combine(pairs, weighting):
    """Accuracy from ``[correct, total]`` pairs; empty pairs are skipped."""
    pairs = [(c, t) for c, t in pairs if t > 0]
    if not pairs:
        return None
    if weighting == "by_count":
        return sum(c for c, _ in pairs) / sum(t for _, t in pairs)
    return float(np.mean([c / t for c, t in pairs]))


def _cell(trials, strategy, kind, weighting):
    values, n_sent, n_empty = [], 0, 0
    for tr in trials:
        pairs = (tr.pure if kind == "pure" else tr.global_)[strategy]
        n_sent += sum(t for _, t in pairs)
        n_empty += sum(1 for _, t in pairs if t == 0)
        v = _combine(pairs, weighting)
        if v is not None:
            values.append(v)
    if not values:
        return {"mean": None, "std": None, "n_trials": 0, "n_sentences": n_sent, "n_empty": n_empty}
    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return {"mean": float(np.mean(values)), "std": std, "n_trials": len(values),
            "n_sentences": n_sent, "n_empty": n_empty}


def _sub(a, b):
    return None if a is None or b is None else a - b


@dataclass
class ExperimentReport:
    config: dict
    cells: dict
    table1: list
    table2: list
    table3: list
    breakeven: list
    alpha_scores: list
    alpha_choice: list
    notes: list
    schema_version: int = REPORT_SCHEMA_VERSION

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _pref_name(pref, first, second):
    return {metric.Preference.FIRST: first, metric.Preference.SECOND: second,
            metric.Preference.INDIFFERENT: "indifferent"}[pref]


def make_report(trials, config):
    """Trial-averaged tables, differences and break-even weightings."""
    strategies = list(config.strategies)
    ensembles = [s for s in strategies if s != SINGLE]
    weighting = config.user_weighting
    cells, t1, t2, t3, be, scores, choice = {}, [], [], [], [], [], []
    for n in config.users:
        group = [t for t in trials if t.n_users == n]
        cn = {s: {"pure": _cell(group, s, "pure", weighting),
                  "global": _cell(group, s, "global", weighting)} for s in strategies}
        cells[str(n)] = cn
        sp, sg = cn[SINGLE]["pure"]["mean"], cn[SINGLE]["global"]["mean"]
        row = {"n_users": n, "single_pure": sp, "single_global": sg}
        for s in ensembles:
            row[f"{s}_global"] = cn[s]["global"]["mean"]
        t1.append(row)
        if ensembles:
            t2.append({"n_users": n, **{s: _sub(sp, cn[s]["pure"]["mean"]) for s in ensembles}})
            t3.append({"n_users": n, **{s: _sub(sg, cn[s]["global"]["mean"]) for s in ensembles}})
        for s in ensembles:
            ep, eg = cn[s]["pure"]["mean"], cn[s]["global"]["mean"]
            if None in (sp, sg, ep, eg):
                be.append({"n_users": n, "first": SINGLE, "second": s, "alpha": None,
                           "preferred_above": None, "preferred_below": None})
                continue
            cut = metric.breakeven_alpha(metric.PerfPair(sp, sg), metric.PerfPair(ep, eg))
            be.append({"n_users": n, "first": SINGLE, "second": s, "alpha": cut.value,
                       "preferred_above": _pref_name(cut.preferred_above, SINGLE, s),
                       "preferred_below": _pref_name(cut.preferred_below, SINGLE, s)})
        perf = {s: metric.PerfPair(cn[s]["pure"]["mean"], cn[s]["global"]["mean"])
                for s in strategies
                if cn[s]["pure"]["mean"] is not None and cn[s]["global"]["mean"] is not None}
        for a in config.alpha_grid:
            sc = {s: metric.personalization_score(a, p) for s, p in perf.items()}
            scores.append({"n_users": n, "alpha": a, **sc})
            best = max(sc.values()) if sc else None
            winners = [s for s in strategies if s in sc and best - sc[s] < metric.INDIFFERENCE_TOL]
            choice.append({"n_users": n, "alpha": a, "best": winners[0] if winners else None,
                           "tied": winners[1:]})
    return ExperimentReport(config.to_flat(include_execution=False), cells, t1, t2, t3, be,
                            scores, choice, list(NOTES))


def run_experiment(config, corpus=None, lexicon=None):
    if corpus is None:
        corpus = treebank.load_corpus(config.data_dir,
                                      train_granularity=config.hyper.train_granularity)
    if lexicon is None:
        lexicon = prepare_lexicon(corpus, config)
    trials = run_trials(config, corpus, lexicon)
    return make_report(trials, config), trials


# -- output --------------------------------------------------------------------

def report_data_json(report):
    """Canonical JSON of the data body only (bit-stable for equal reports)."""
    return json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n"


def report_json(report, header=None):
    doc = {"header": header or {}, "data": report.to_dict()}
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def read_report_json(text):
    return ExperimentReport.from_dict(json.loads(text)["data"])


def report_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n_users", "strategy", "metric", "mean", "std", "n_trials",
                "n_sentences", "n_empty"])
    for n, by_strategy in report.cells.items():
        for s, kinds in by_strategy.items():
            for m, kind in zip(METRICS, ("pure", "global")):
                c = kinds[kind]
                w.writerow([n, s, m, _fmt(c["mean"], 6), _fmt(c["std"], 6), c["n_trials"],
                            c["n_sentences"], c["n_empty"]])
    return buf.getvalue()


def _fmt(x, digits=3):
    if x is None:
        return ""
    return f"{x:.{digits}f}"


def _md_table(headers, rows):
    lines = ["| " + " | ".join(headers) + " |", "|" + "---|" * len(headers)]
    lines += ["| " + " | ".join(str(c) for c in r) + " |" for r in rows]
    return "\n".join(lines)


def report_markdown(report, alpha=None):
    ens_names = [s for s in report.config["strategies"].split(",") if s != SINGLE]
    out = ["## Accuracy by number of users", ""]
    heads = ["Num. users", "Single (user-specific)", "Single (global)"]
    heads += [f"{s.capitalize()} aggregation (global)" for s in ens_names]
    rows = []
    for r in report.table1:
        rows.append([r["n_users"], _fmt(r["single_pure"]), _fmt(r["single_global"])]
                    + [_fmt(r[f"{s}_global"]) for s in ens_names])
    out += [_md_table(heads, rows), ""]
    if ens_names:
        for title, table in (("Single minus ensemble, user-specific data", report.table2),
                             ("Single minus ensemble, global data", report.table3)):
            out += [f"## {title}", ""]
            out += [_md_table(["Num. users"] + [f"Difference ({s})" for s in ens_names],
                              [[r["n_users"]] + [_fmt(r[s]) for s in ens_names] for r in table]),
                    ""]
        out += ["## Break-even alpha (single vs ensemble)", ""]
        out += [_md_table(["Num. users", "Ensemble", "alpha", "Preferred above", "Preferred below"],
                          [[b["n_users"], b["second"],
                            "none" if b["alpha"] is None else _fmt(b["alpha"], 4),
                            b["preferred_above"], b["preferred_below"]] for b in report.breakeven]),
                ""]
    if alpha is not None:
        out += [f"## Preferred strategy at alpha = {alpha:g}", ""]
        rows = []
        for n in sorted({c["n_users"] for c in report.alpha_choice}):
            rows.append([n, choose_strategy(report, n, alpha)])
        out += [_md_table(["Num. users", "Best strategy"], rows), ""]
    out += ["## Notes", ""] + [f"- {note}" for note in report.notes] + [""]
    return "\n".join(out)


def choose_strategy(report, n_users, alpha):
    """Best-scoring strategy at ``alpha`` from the trial-averaged cells."""
    cn = report.cells[str(n_users)]
    best, best_score = None, -math.inf
    for s in report.config["strategies"].split(","):
        p, g = cn[s]["pure"]["mean"], cn[s]["global"]["mean"]
        if p is None or g is None:
            continue
        sc = metric.personalization_score(alpha, metric.PerfPair(p, g))
        if sc > best_score + metric.INDIFFERENCE_TOL:
            best, best_score = s, sc
    return best


def emit_report(report, out_dir, formats=("json", "csv", "md"), header=None, alpha=None):
    """Write report files into ``out_dir``; returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    writers = {"json": ("report.json", lambda: report_json(report, header)),
               "csv": ("report.csv", lambda: report_csv(report)),
               "md": ("report.md", lambda: report_markdown(report, alpha))}
    paths = []
    for fmt in formats:
        if fmt not in writers:
            raise ValueError(f"unknown report format {fmt!r}")
        name, render = writers[fmt]
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(render())
        paths.append(path)
    return paths


def write_trials(path, trials):
    with open(path, "w", encoding="utf-8") as fh:
        for t in trials:
            fh.write(json.dumps(t.to_dict(), sort_keys=True) + "\n")


def read_trials(path):
    with open(path, encoding="utf-8") as fh:
        return [TrialResult.from_dict(json.loads(line)) for line in fh if line.strip()]
