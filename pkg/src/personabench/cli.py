"""Command line entry point: ``personabench prepare|run|report|selfcheck``."""
import argparse
import datetime
import logging
import os
import sys

from . import __version__, polarity, runner, treebank
from .rng import ALGORITHM

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRIAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _lexicon_default(data_dir, k):
    return os.path.join(data_dir, f"polar_lexicon_k{k}.txt")


def build_parser():
    p = _Parser(prog="personabench", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    prep = sub.add_parser("prepare", help="parse the corpus and cache the polar lexicon")
    prep.add_argument("--data-dir", required=True)
    prep.add_argument("--k", type=int, default=200)
    prep.add_argument("--lexicon", help="lexicon cache path (default: inside data dir)")

    run = sub.add_parser("run", help="run seeded trials and write reports")
    run.add_argument("--config", help="flat key = value file; flags override it")
    run.add_argument("--data-dir")
    run.add_argument("--users", help="comma separated user counts, e.g. 2,3,5,8")
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--k", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--lexicon")
    run.add_argument("--out", required=True)
    run.add_argument("--format", default="json,csv,md",
                     help="comma separated subset of json,csv,md")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override any config key, e.g. --set hidden=64")

    rep = sub.add_parser("report", help="recompute tables from stored trial results")
    rep.add_argument("--in", dest="in_dir", required=True)
    rep.add_argument("--alpha", type=float)
    rep.add_argument("--alpha-grid")
    rep.add_argument("--format", default="json,csv,md")

    chk = sub.add_parser("selfcheck", help="gradient and federated-evaluation checks")
    chk.add_argument("--configs", type=int, default=100)
    return p


def _formats(text):
    fmts = tuple(f.strip() for f in text.split(",") if f.strip())
    bad = set(fmts) - {"json", "csv", "md"}
    if bad:
        raise ValueError(f"unknown format(s): {', '.join(sorted(bad))}")
    return fmts


def _header(config, command):
    return {"tool": "personabench", "version": __version__, "command": command,
            "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "data_dir": config.data_dir, "lexicon_path": config.lexicon_path,
            "workers": config.workers, "rng": ALGORITHM, "seed": config.seed}


def cmd_prepare(args):
    corpus = treebank.load_corpus(args.data_dir)
    path = args.lexicon or _lexicon_default(args.data_dir, args.k)
    lex = polarity.build_lexicon(corpus.train, k=args.k)
    polarity.write_lexicon(path, lex)
    print(f"trees: " + ", ".join(f"{k}={v}" for k, v in corpus.tree_counts.items()))
    print(f"sentences: train={len(corpus.train)} dev={len(corpus.dev)} test={len(corpus.test)}")
    print(f"lexicon: {path} ({lex.k} positive, {lex.k} negative)")
    return EXIT_OK


def _run_config(args):
    flat = runner.read_config_file(args.config) if args.config else {}
    for item in args.set:
        if "=" not in item:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        flat[k.strip()] = v.strip()
    for key in ("data_dir", "users", "trials", "seed", "k", "workers"):
        v = getattr(args, key)
        if v is not None:
            flat[key] = str(v)
    if args.lexicon:
        flat["lexicon_path"] = args.lexicon
    config = runner.ExperimentConfig.from_flat(flat)
    if not config.data_dir:
        raise ValueError("--data-dir is required (flag or config file)")
    if not config.lexicon_path:
        lex = _lexicon_default(config.data_dir, config.k)
        if os.path.isfile(lex):
            config = runner.dataclasses.replace(config, lexicon_path=lex)
    return config


def cmd_run(args):
    try:
        config = _run_config(args)
        formats = _formats(args.format)
    except ValueError as e:
        print(f"personabench: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        corpus = treebank.load_corpus(config.data_dir,
                                      train_granularity=config.hyper.train_granularity)
        lexicon = runner.prepare_lexicon(corpus, config)
    except (OSError, ValueError) as e:
        print(f"personabench: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    os.makedirs(args.out, exist_ok=True)
    runner.write_config_file(os.path.join(args.out, "config.txt"), config)
    trials_path = os.path.join(args.out, "trials.jsonl")
    try:
        trials = runner.run_trials(config, corpus, lexicon)
    except runner.TrialError as e:
        runner.write_trials(trials_path + ".partial", e.partial)
        print(f"personabench: {e}; partial results in {trials_path}.partial", file=sys.stderr)
        return EXIT_TRIAL
    runner.write_trials(trials_path, trials)
    report = runner.make_report(trials, config)
    for path in runner.emit_report(report, args.out, formats, _header(config, "run")):
        print(path)
    return EXIT_OK


def cmd_report(args):
    try:
        flat = runner.read_config_file(os.path.join(args.in_dir, "config.txt"))
        if args.alpha_grid:
            flat["alpha_grid"] = args.alpha_grid
        config = runner.ExperimentConfig.from_flat(flat)
        formats = _formats(args.format)
        if args.alpha is not None and not 0.0 <= args.alpha <= 1.0:
            raise ValueError("--alpha must be in [0, 1]")
    except (OSError, ValueError) as e:
        print(f"personabench: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        trials = runner.read_trials(os.path.join(args.in_dir, "trials.jsonl"))
    except (OSError, ValueError) as e:
        print(f"personabench: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    report = runner.make_report(trials, config)
    runner.emit_report(report, args.in_dir, formats, _header(config, "report"), args.alpha)
    print(runner.report_markdown(report, args.alpha))
    return EXIT_OK


def cmd_selfcheck(args):
    from . import checks
    err = checks.gradient_check(args.configs)
    grad_ok = err < 1e-4
    print(f"gradient check: max relative error {err:.2e} over {args.configs} configs: "
          f"{'PASS' if grad_ok else 'FAIL'}")
    fed_ok = checks.fedeval_equivalence()
    print(f"federated evaluation equals centralized: {'PASS' if fed_ok else 'FAIL'}")
    return EXIT_OK if grad_ok and fed_ok else EXIT_TRIAL


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"prepare": cmd_prepare, "run": cmd_run, "report": cmd_report,
                "selfcheck": cmd_selfcheck}
    try:
        return handlers[args.command](args)
    except (treebank.DataError, treebank.ParseError, OSError) as e:
        print(f"personabench: data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
