"""The N_max sweep and the two continual-learning experiments.

Every run produces ``ExperimentRecord`` rows. Rows are written to CSV and
JSON-lines as they are produced so partial runs can be inspected.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy import stats as st

from cobweb4v.data import Dataset, make_exp1_splits, make_exp2_splits
from cobweb4v.mlp import Hyper, MlpModel, ReplayBuffer, mlp_predict, train_on_split, train_with_replay
from cobweb4v.predict import predict_many
from cobweb4v.stats import DEFAULT_SIGMA_FLOOR
from cobweb4v.tree import CobwebTree, Instance, TreeConfig

log = logging.getLogger(__name__)

CSV_HEADER = ["experiment", "learner", "seed", "chosen_digit", "split_index", "metric", "value"]
LEARNERS = ("cobweb", "fc", "fc-replay")


@dataclass
class ExperimentRecord:
    experiment: str
    learner: str
    seed: int
    chosen_digit: Optional[int]
    split_index: int
    metric: str
    value: float

    def row(self) -> list:
        return [self.experiment, self.learner, self.seed,
                "" if self.chosen_digit is None else self.chosen_digit,
                self.split_index, self.metric, repr(float(self.value))]


class RecordWriter:
    """Append-only CSV (+ optional JSONL) sink, flushed after every record."""

    def __init__(self, csv_path=None, jsonl_path=None, config: Optional[dict] = None):
        self.records: list[ExperimentRecord] = []
        self._csv = self._jsonl = None
        if csv_path:
            self._csv = open(csv_path, "w", newline="")
            if config is not None:
                self._csv.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
            self._writer = csv.writer(self._csv)
            self._writer.writerow(CSV_HEADER)
            self._csv.flush()
        if jsonl_path:
            self._jsonl = open(jsonl_path, "w")

    def add(self, record: ExperimentRecord) -> None:
        self.records.append(record)
        if self._csv:
            self._writer.writerow(record.row())
            self._csv.flush()
        if self._jsonl:
            self._jsonl.write(json.dumps(dataclasses.asdict(record)) + "\n")
            self._jsonl.flush()

    def extend(self, records: Iterable[ExperimentRecord]) -> None:
        for r in records:
            self.add(r)

    def close(self) -> None:
        for fh in (self._csv, self._jsonl):
            if fh:
                fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_records(path) -> list[ExperimentRecord]:
    with open(path, newline="") as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        if rows.fieldnames != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {rows.fieldnames}")
        return [ExperimentRecord(r["experiment"], r["learner"], int(r["seed"]),
                                 int(r["chosen_digit"]) if r["chosen_digit"] != "" else None,
                                 int(r["split_index"]), r["metric"], float(r["value"]))
                for r in rows]


def derive_seed(master: int, *stream) -> int:
    """Independent child seed for a named stream of a master seed."""
    words = [master] + [zlib.crc32(s.encode()) if isinstance(s, str) else int(s) for s in stream]
    return int(np.random.SeedSequence(words).generate_state(1, np.uint64)[0] >> 1)


# ---------------------------------------------------------------- learners

class CobwebLearner:
    name = "cobweb"

    def __init__(self, seed: int = 0, n_max: int = 300, sigma_floor: float = DEFAULT_SIGMA_FLOOR):
        self.n_max = n_max
        self.tree = CobwebTree(TreeConfig(sigma_floor=sigma_floor, n_max_default=n_max, seed=seed))

    def train(self, x: np.ndarray, y: np.ndarray) -> None:
        for xi, yi in zip(x, y):
            self.tree.ifit(Instance(xi, int(yi)))

    def predict(self, x: np.ndarray) -> np.ndarray:
        return predict_many(self.tree, x, [self.n_max])[:, 0]


class FcLearner:
    name = "fc"

    def __init__(self, seed: int = 0, hyper: Optional[Hyper] = None, n_in: int = 784):
        self.seed = seed
        self.hyper = hyper or Hyper()
        self.model = MlpModel.init(n_in=n_in, seed=derive_seed(seed, "init"))
        self.steps = 0

    def _next_seed(self) -> int:
        self.steps += 1
        return derive_seed(self.seed, "shuffle", self.steps)

    def train(self, x: np.ndarray, y: np.ndarray) -> None:
        train_on_split(self.model, x, y, self.hyper, self._next_seed())

    def predict(self, x: np.ndarray) -> np.ndarray:
        return mlp_predict(self.model, x)


class FcReplayLearner(FcLearner):
    name = "fc-replay"

    def __init__(self, seed: int = 0, hyper: Optional[Hyper] = None, n_in: int = 784,
                 capacity: int = 1000):
        super().__init__(seed, hyper, n_in)
        self.buffer = ReplayBuffer.empty(n_in, capacity)

    def train(self, x: np.ndarray, y: np.ndarray) -> None:
        self.model, self.buffer = train_with_replay(self.model, self.buffer, x, y, self.hyper,
                                                    self._next_seed())


def make_learner(name: str, seed: int, n_max: int = 300, sigma_floor: float = DEFAULT_SIGMA_FLOOR,
                 hyper: Optional[Hyper] = None, n_in: int = 784):
    if name == "cobweb":
        return CobwebLearner(seed, n_max, sigma_floor)
    if name == "fc":
        return FcLearner(seed, hyper, n_in)
    if name == "fc-replay":
        return FcReplayLearner(seed, hyper, n_in)
    raise ValueError(f"unknown learner {name!r}; expected one of {', '.join(LEARNERS)}")


def accuracy(pred: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(np.asarray(pred) == np.asarray(y))) if len(y) else math.nan


# ---------------------------------------------------------------- schedules

def parse_schedule(text: str) -> list[tuple[int, int]]:
    """``"1:100,100:6000"`` -> [(step 1 up to 100), (step 100 up to 6000)]."""
    out = []
    for part in text.split(","):
        step, upto = part.split(":")
        step, upto = int(step), int(upto)
        if step < 1 or upto < 1:
            raise ValueError(f"bad schedule segment {part!r}")
        out.append((step, upto))
    return out


def eval_points(schedule: Sequence[tuple[int, int]], n_splits: int) -> list[int]:
    """Split indices (1-based) after which to evaluate; always includes the last split."""
    points, start = set(), 0
    for step, upto in schedule:
        k = start + step
        while k <= min(upto, n_splits):
            points.add(k)
            k += step
        start = max(start, upto)
    points.add(n_splits)
    return sorted(points)


# ---------------------------------------------------------------- experiments

def _pool_map(fn: Callable, cells: list, jobs: int) -> Iterable:
    if jobs <= 1 or len(cells) <= 1:
        for c in cells:
            yield fn(c)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(fn, cells)


def _sweep_cell(args) -> list[ExperimentRecord]:
    train, test, nmax_values, seed, limit, sigma_floor = args
    order = np.random.default_rng(seed).permutation(len(train))
    if limit:
        order = order[:limit]
    tree = CobwebTree(TreeConfig(sigma_floor=sigma_floor, seed=seed))
    for i, idx in enumerate(order):
        tree.ifit(train.instance(int(idx)))
        if (i + 1) % 5000 == 0:
            log.info("sweep seed %d: learned %d/%d", seed, i + 1, len(order))
    preds = predict_many(tree, test.images, nmax_values)
    return [ExperimentRecord("sweep", "cobweb", seed, None, k, "accuracy",
                             accuracy(preds[:, col], test.labels))
            for col, k in enumerate(nmax_values)]


def run_nmax_sweep(train: Dataset, test: Dataset, nmax_values: Sequence[int], seeds: Sequence[int],
                   limit: Optional[int] = None, sigma_floor: float = DEFAULT_SIGMA_FLOOR,
                   writer: Optional[RecordWriter] = None, jobs: int = 1) -> list[ExperimentRecord]:
    """Fit one tree per seed, then score the test set at every N_max.

    ``split_index`` of each record holds the N_max value.
    """
    writer = writer or RecordWriter()
    cells = [(train, test, list(nmax_values), s, limit, sigma_floor) for s in seeds]
    for records in _pool_map(_sweep_cell, cells, jobs):
        writer.extend(records)
    return writer.records


def _exp1_cell(args) -> list[ExperimentRecord]:
    (train, test, seed, learner_name, points, split_size, n_splits, n_max, sigma_floor,
     batch_size) = args
    splits = make_exp1_splits(train, seed, split_size)[:n_splits]
    learner = make_learner(learner_name, seed, n_max, sigma_floor,
                           Hyper(batch_size=batch_size), train.images.shape[1])
    want = set(points)
    records = []
    for k, idx in enumerate(splits, start=1):
        learner.train(train.images[idx], train.labels[idx])
        if k in want:
            acc = accuracy(learner.predict(test.images), test.labels)
            log.info("exp1 %s seed %d split %d: %.4f", learner_name, seed, k, acc)
            records.append(ExperimentRecord("exp1", learner_name, seed, None, k, "accuracy", acc))
    return records


def run_exp1(train: Dataset, test: Dataset, seeds: Sequence[int], learners: Sequence[str],
             eval_every: str = "1:100,100:6000", split_size: int = 10,
             n_splits: Optional[int] = None, n_max: int = 300,
             sigma_floor: float = DEFAULT_SIGMA_FLOOR, batch_size: int = 5,
             writer: Optional[RecordWriter] = None, jobs: int = 1) -> list[ExperimentRecord]:
    """Sequential training on splits of ``split_size``; full-test accuracy at scheduled splits."""
    writer = writer or RecordWriter()
    total = math.ceil(len(train) / split_size)
    n_splits = min(n_splits or total, total)
    points = eval_points(parse_schedule(eval_every), n_splits)
    cells = [(train, test, s, name, points, split_size, n_splits, n_max, sigma_floor, batch_size)
             for s in seeds for name in learners]
    for records in _pool_map(_exp1_cell, cells, jobs):
        writer.extend(records)
    return writer.records


def _exp2_cell(args) -> list[ExperimentRecord]:
    train, test, digit, seed, learner_name, n_max, sigma_floor, batch_size, per_digit = args
    splits = make_exp2_splits(train, digit, seed, per_digit)
    learner = make_learner(learner_name, derive_seed(seed, digit), n_max, sigma_floor,
                           Hyper(batch_size=batch_size), train.images.shape[1])
    mask = test.labels == digit
    tx, ty = test.images[mask], test.labels[mask]
    records = []
    for k, idx in enumerate(splits, start=1):
        learner.train(train.images[idx], train.labels[idx])
        acc = accuracy(learner.predict(tx), ty)
        log.info("exp2 %s digit %d seed %d D%d: %.4f", learner_name, digit, seed, k, acc)
        records.append(ExperimentRecord("exp2", learner_name, seed, digit, k, "accuracy", acc))
    return records


def run_exp2(train: Dataset, test: Dataset, chosen_digits: Sequence[int], seeds: Sequence[int],
             learners: Sequence[str], n_max: int = 300, sigma_floor: float = DEFAULT_SIGMA_FLOOR,
             batch_size: int = 64, per_digit: int = 600, writer: Optional[RecordWriter] = None,
             jobs: int = 1) -> list[ExperimentRecord]:
    """Train on D1..D10 in order; after each split score the chosen-digit test images."""
    writer = writer or RecordWriter()
    cells = [(train, test, d, s, name, n_max, sigma_floor, batch_size, per_digit)
             for d in chosen_digits for s in seeds for name in learners]
    for records in _pool_map(_exp2_cell, cells, jobs):
        writer.extend(records)
    return writer.records


# ---------------------------------------------------------------- summary

@dataclass
class SummaryRow:
    experiment: str
    learner: str
    split_index: int
    metric: str
    n: int
    mean: float
    sd: float
    ci95: float


def summarize(records: Sequence[ExperimentRecord]) -> list[SummaryRow]:
    """Mean, sample sd and 95% t-interval half-width per (experiment, learner, split, metric)."""
    groups: dict[tuple, list[float]] = {}
    for r in records:
        groups.setdefault((r.experiment, r.learner, r.split_index, r.metric), []).append(r.value)
    rows = []
    for key in sorted(groups):
        values = np.asarray(groups[key])
        n = len(values)
        mean = float(values.mean())
        sd = float(values.std(ddof=1)) if n > 1 else math.nan
        ci = float(st.t.ppf(0.975, n - 1) * sd / math.sqrt(n)) if n > 1 else math.nan
        rows.append(SummaryRow(*key, n, mean, sd, ci))
    return rows


def write_summary(rows: Sequence[SummaryRow], fh) -> None:
    writer = csv.writer(fh)
    writer.writerow([f.name for f in dataclasses.fields(SummaryRow)])
    for r in rows:
        writer.writerow(dataclasses.astuple(r))
