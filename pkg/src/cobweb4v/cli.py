"""Command-line entry point: ``cobweb4v {fit,predict,sweep,exp1,exp2,summarize}``.

Exit codes: 1 usage error, 2 I/O error, 3 malformed data.
Settings resolve as command-line flag, then ``C4V_*`` environment variable,
then built-in default.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from cobweb4v import __version__
from cobweb4v.data import IdxError, load_dataset, load_mnist
from cobweb4v.experiments import (
    LEARNERS,
    RecordWriter,
    parse_schedule,
    read_records,
    run_exp1,
    run_exp2,
    run_nmax_sweep,
    summarize,
    write_summary,
)
from cobweb4v.mlp import Hyper
from cobweb4v.predict import predict_many
from cobweb4v.stats import DEFAULT_SIGMA_FLOOR
from cobweb4v.tree import CobwebTree, TreeConfig

EXIT_USAGE, EXIT_IO, EXIT_DATA = 1, 2, 3

ENV_PREFIX = "C4V_"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def env(name: str, default, cast=str):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError as exc:
        raise UsageError(f"bad value for {ENV_PREFIX}{name}: {raw!r}") from exc


def int_list(text: str) -> list[int]:
    """``"0..9"``, ``"0,3,7"`` or ``"10,50,100"``."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _int_list_arg(text):
    try:
        return int_list(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _schedule_arg(text):
    try:
        parse_schedule(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad schedule {text!r}") from exc
    return text


def learner_list(text: str) -> list[str]:
    names = [s.strip() for s in text.split(",") if s.strip()]
    bad = [n for n in names if n not in LEARNERS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown learner(s) {bad}; choose from {LEARNERS}")
    return names


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cobweb4v", description="Cobweb/4V concept formation and MNIST experiments")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, data=True, out=True):
        sp.add_argument("--sigma-floor", type=float, default=env("SIGMA_FLOOR", DEFAULT_SIGMA_FLOOR, float))
        if data:
            sp.add_argument("--data-dir", default=env("MNIST_DIR", None),
                            help="directory holding the four MNIST IDX files")
        if out:
            sp.add_argument("--out", default=env("OUT", None), help="CSV records path")
            sp.add_argument("--jsonl", default=None, help="JSON-lines records path")
            sp.add_argument("--jobs", type=int, default=env("JOBS", 1, int))

    f = sub.add_parser("fit", help="train a tree and write a JSON snapshot")
    f.add_argument("--train", required=True, help="IDX images")
    f.add_argument("--labels", required=True, help="IDX labels")
    f.add_argument("--out", required=True)
    f.add_argument("--limit", type=int, default=None)
    f.add_argument("--seed", type=int, default=env("SEED", None, int))
    common(f, data=False, out=False)

    pr = sub.add_parser("predict", help="score a tree snapshot on labeled images")
    pr.add_argument("--tree", required=True)
    pr.add_argument("--images", required=True)
    pr.add_argument("--labels", required=True)
    pr.add_argument("--nmax", type=int, default=env("NMAX", 300, int))
    pr.add_argument("--limit", type=int, default=None)

    sw = sub.add_parser("sweep", help="N_max sweep")
    sw.add_argument("--nmax", type=_int_list_arg, default=int_list("10,50,100,300,600"))
    sw.add_argument("--seeds", type=int, default=env("SEEDS", 10, int))
    sw.add_argument("--limit", type=int, default=None, help="train on this many shuffled images")
    common(sw)

    e1 = sub.add_parser("exp1", help="learning with modest data")
    e1.add_argument("--seeds", type=int, default=env("SEEDS", 10, int))
    e1.add_argument("--learners", type=learner_list, default=["cobweb", "fc"])
    e1.add_argument("--eval-every", type=_schedule_arg, default="1:100,100:6000",
                    help="STEP:UPTO segments, e.g. 1:100,100:6000")
    e1.add_argument("--splits", type=int, default=None, help="stop after this many splits")
    e1.add_argument("--nmax", type=int, default=env("NMAX", 300, int))
    e1.add_argument("--batch-size", type=int, default=5)
    common(e1)

    e2 = sub.add_parser("exp2", help="learning without forgetting")
    e2.add_argument("--digits", type=_int_list_arg, default=int_list("0..2"))
    e2.add_argument("--seeds", type=int, default=env("SEEDS", 3, int))
    e2.add_argument("--learners", type=learner_list, default=list(LEARNERS))
    e2.add_argument("--nmax", type=int, default=env("NMAX", 300, int))
    e2.add_argument("--batch-size", type=int, default=64)
    e2.add_argument("--per-digit", type=int, default=600,
                    help="images of each non-chosen digit placed in D1")
    common(e2)

    sm = sub.add_parser("summarize", help="mean / sd / 95%% CI per learner and split")
    sm.add_argument("--in", dest="inp", required=True)
    return p


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("verbose",)}
    if args.command in ("exp1", "exp2", "sweep", "fit"):
        h = Hyper()
        cfg["hyper"] = {"lr": h.lr, "momentum": h.momentum, "epochs": h.epochs}
    return cfg


def _writer(args, config):
    return RecordWriter(args.out, args.jsonl, config)


def cmd_fit(args) -> None:
    data = load_dataset(args.train, args.labels)
    order = np.arange(len(data))
    if args.limit:
        order = order[:args.limit]
    if args.seed is not None:
        order = np.random.default_rng(args.seed).permutation(order)
    tree = CobwebTree(TreeConfig(sigma_floor=args.sigma_floor,
                                 seed=args.seed if args.seed is not None else 0))
    for i in order:
        tree.ifit(data.instance(int(i)))
    tree.save(args.out)
    print(f"learned {tree.n} instances into {sum(1 for _ in tree.nodes())} nodes -> {args.out}")


def cmd_predict(args) -> None:
    tree = CobwebTree.load(args.tree)
    data = load_dataset(args.images, args.labels)
    if args.limit:
        data = data.subset(np.arange(min(args.limit, len(data))))
    pred = predict_many(tree, data.images, [args.nmax])[:, 0]
    acc = float(np.mean(pred == data.labels))
    n_labels = tree.config.n_labels
    confusion = np.zeros((n_labels, n_labels), dtype=np.int64)
    np.add.at(confusion, (data.labels, pred), 1)
    print(f"accuracy {acc:.4f} ({int((pred == data.labels).sum())}/{len(data)}) nmax={args.nmax}")
    print("true\\pred " + " ".join(f"{j:>5d}" for j in range(n_labels)))
    for i in range(n_labels):
        print(f"{i:>9d} " + " ".join(f"{c:>5d}" for c in confusion[i]))


def cmd_sweep(args, config) -> None:
    train, test = load_mnist(args.data_dir)
    with _writer(args, config) as w:
        run_nmax_sweep(train, test, args.nmax, range(args.seeds), args.limit, args.sigma_floor, w,
                       args.jobs)
        _print_summary(w.records)


def cmd_exp1(args, config) -> None:
    train, test = load_mnist(args.data_dir)
    with _writer(args, config) as w:
        run_exp1(train, test, range(args.seeds), args.learners, args.eval_every,
                 n_splits=args.splits, n_max=args.nmax, sigma_floor=args.sigma_floor,
                 batch_size=args.batch_size, writer=w, jobs=args.jobs)
        _print_summary(w.records)


def cmd_exp2(args, config) -> None:
    train, test = load_mnist(args.data_dir)
    with _writer(args, config) as w:
        run_exp2(train, test, args.digits, range(args.seeds), args.learners, n_max=args.nmax,
                 sigma_floor=args.sigma_floor, batch_size=args.batch_size,
                 per_digit=args.per_digit, writer=w, jobs=args.jobs)
        _print_summary(w.records)


def _print_summary(records) -> None:
    write_summary(summarize(records), sys.stdout)


def cmd_summarize(args) -> None:
    write_summary(summarize(read_records(args.inp)), sys.stdout)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"cobweb4v: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s")
    config = _config(args)
    print(json.dumps(config, sort_keys=True, default=str), flush=True)
    try:
        if args.command == "fit":
            cmd_fit(args)
        elif args.command == "predict":
            cmd_predict(args)
        elif args.command == "sweep":
            cmd_sweep(args, config)
        elif args.command == "exp1":
            cmd_exp1(args, config)
        elif args.command == "exp2":
            cmd_exp2(args, config)
        elif args.command == "summarize":
            cmd_summarize(args)
    except (IdxError, json.JSONDecodeError, KeyError) as exc:
        print(f"cobweb4v: malformed data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"cobweb4v: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"cobweb4v: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
