"""Acceptance criteria, one PASS/FAIL line each (see the "acceptance criteria" section
of the pytest summary).

Criteria 1-4 need the real MNIST files in ``$C4V_MNIST_DIR`` and take hours; they fail
with an explicit message when the data is missing. Deselect them with ``-m "not mnist"``.
``C4V_ACCEPT_PREFIX=15000`` switches criterion 1 to its reduced-data fallback.
Criterion 5 re-runs compact versions of the property suites.
"""
import contextlib
import os

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from cobweb4v.data import load_mnist
from cobweb4v.experiments import run_exp1, run_exp2, run_nmax_sweep
from cobweb4v.stats import AttrStats
from cobweb4v.tree import CobwebTree
from cobweb4v.utility import cu_info

NMAX = [10, 50, 100, 300]
JOBS = int(os.environ.get("C4V_JOBS", "1"))


@contextlib.contextmanager
def criterion(label):
    """Record one PASS/FAIL line for the block, re-raising any failure."""
    notes = []
    try:
        yield notes
    except BaseException as exc:
        reason = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
        ACCEPTANCE_LINES.append(f"FAIL  {label}: {reason}")
        raise
    ACCEPTANCE_LINES.append(f"PASS  {label}" + (f": {'; '.join(notes)}" if notes else ""))


@pytest.fixture(scope="session")
def mnist():
    try:
        return load_mnist()
    except (FileNotFoundError, OSError) as exc:
        return exc


def need(mnist):
    if isinstance(mnist, Exception):
        pytest.fail(f"MNIST unavailable ({mnist}); set C4V_MNIST_DIR to the IDX directory",
                    pytrace=False)
    return mnist


@pytest.fixture(scope="session")
def sweep(mnist):
    """Seed-0 tree on the full (or prefix) training set, scored at every N_max.

    The seed-0 shuffle is the same permutation exp1 uses, so the N_max=300 score is also
    the exp1 cobweb endpoint.
    """
    if isinstance(mnist, Exception):
        return mnist
    train, test = mnist
    prefix = int(os.environ.get("C4V_ACCEPT_PREFIX", "0")) or None
    recs = run_nmax_sweep(train, test, NMAX, seeds=[0], limit=prefix)
    return prefix, {r.split_index: r.value for r in recs}


def mean_curve(records, learner, split):
    return float(np.mean([r.value for r in records if r.learner == learner and r.split_index == split]))


@pytest.mark.mnist
def test_criterion_1_nmax_sweep(mnist, sweep):
    with criterion("1 N_max sweep shape") as notes:
        need(mnist)
        prefix, acc = sweep
        notes.append(", ".join(f"N={k}: {acc[k]:.4f}" for k in NMAX))
        steps = np.diff([acc[k] for k in NMAX])
        assert np.all(steps >= -0.005), f"non-monotone steps {steps}"
        if prefix:
            notes.append(f"fallback on {prefix}-image prefix")
            assert acc[300] >= 0.90, f"acc@300 {acc[300]:.4f} < 0.90 (prefix fallback)"
        else:
            assert abs(acc[300] - 0.951) <= 0.02, f"acc@300 {acc[300]:.4f} not 0.951 +/- 0.02"


@pytest.mark.mnist
def test_criterion_2_data_efficiency(mnist):
    with criterion("2 data efficiency at 1000 examples") as notes:
        train, test = need(mnist)
        recs = run_exp1(train, test, [0, 1, 2], ["cobweb", "fc"], eval_every="100:100",
                        n_splits=100, jobs=JOBS)
        cob, fc = mean_curve(recs, "cobweb", 100), mean_curve(recs, "fc", 100)
        notes.append(f"cobweb {cob:.4f}, fc {fc:.4f}")
        assert abs(cob - 0.802) <= 0.03, f"cobweb {cob:.4f} not 0.802 +/- 0.03"
        assert cob > fc, f"cobweb {cob:.4f} does not beat fc {fc:.4f}"


@pytest.mark.mnist
def test_criterion_3_forgetting(mnist):
    with criterion("3 forgetting, 3 digits x 3 seeds") as notes:
        train, test = need(mnist)
        recs = run_exp2(train, test, [0, 1, 2], [0, 1, 2], ["cobweb", "fc", "fc-replay"],
                        jobs=JOBS)
        m = {(name, k): mean_curve(recs, name, k)
             for name in ("cobweb", "fc", "fc-replay") for k in (1, 5, 10)}
        notes.append(", ".join(f"{n} D1/D5/D10 {m[n, 1]:.3f}/{m[n, 5]:.3f}/{m[n, 10]:.3f}"
                               for n in ("cobweb", "fc", "fc-replay")))
        assert m["cobweb", 10] >= 0.90, f"cobweb D10 {m['cobweb', 10]:.4f} < 0.90"
        assert m["fc", 10] <= 0.10, f"fc D10 {m['fc', 10]:.4f} > 0.10"
        assert m["fc", 5] < m["fc-replay", 5] < m["cobweb", 5], "fc-replay not strictly between at D5"
        assert m["fc-replay", 1] - m["fc-replay", 10] >= 0.10, "fc-replay declined < 0.10 by D10"


@pytest.mark.mnist
def test_criterion_4_exp1_endpoint(mnist, sweep):
    with criterion("4 exp1 endpoint after 60000 examples") as notes:
        train, test = need(mnist)
        prefix, acc = sweep
        assert not prefix, "sweep ran on a prefix; the endpoint needs the full training set"
        recs = run_exp1(train, test, [0], ["fc"], eval_every=f"{len(train)}:{len(train)}")
        fc = recs[-1].value
        notes.append(f"fc {fc:.4f}, cobweb {acc[300]:.4f}")
        assert abs(fc - 0.9513) <= 0.015, f"fc {fc:.4f} not 0.9513 +/- 0.015"
        assert abs(acc[300] - 0.9514) <= 0.02, f"cobweb {acc[300]:.4f} not 0.9514 +/- 0.02"


class TestCriterion5:
    """Compact re-runs of the property suites, each reported as its own line."""

    def test_statistics_equivalence(self):
        with criterion("5a streaming/merge statistics equal batch at 1e-9"):
            for seed in range(20):
                rng = np.random.default_rng(seed)
                data = rng.random((int(rng.integers(2, 300)), 8))
                s = AttrStats.empty(8)
                for row in data:
                    s.add(row)
                cut = int(rng.integers(1, len(data)))
                merged = AttrStats.from_batch(data[:cut])
                merged.absorb(AttrStats.from_batch(data[cut:]))
                m2 = ((data - data.mean(0)) ** 2).sum(0)
                for got in (s, merged):
                    np.testing.assert_allclose(got.mean, data.mean(0), atol=1e-9, rtol=0)
                    np.testing.assert_allclose(got.m2, m2, atol=1e-9, rtol=0)

    def test_reconstruction(self, digits_dataset):
        from test_learner import check_invariants, fit_with_log

        with criterion("5b count conservation and reconstruction on 500 instances"):
            tree, held = fit_with_log(digits_dataset.instances(range(500)))
            check_invariants(tree, held)

    def test_cu_oracle(self):
        from test_utility import brute_cu_info, part

        with criterion("5c cu_info equals the brute-force evaluator at 1e-9"):
            for seed in range(50):
                rng = np.random.default_rng(seed)
                n = int(rng.integers(2, 15))
                x, y = rng.random((n, 4)), rng.integers(0, 5, n)
                k = int(rng.integers(1, min(n, 4) + 1))
                assign = rng.permutation(np.concatenate([np.arange(k), rng.integers(0, k, n - k)]))
                groups = [np.flatnonzero(assign == g) for g in range(k)]
                ps, pt = part(x, y)
                got = cu_info(ps, pt, [part(x[g], y[g]) for g in groups])
                assert abs(got - brute_cu_info(x, y, groups)) <= 1e-9

    def test_predict_oracle(self):
        from cobweb4v.predict import predict
        from cobweb4v.tree import Instance
        from test_predict import hand_tree, oracle_predict

        with criterion("5d predict equals the mixture oracle at 1e-9, normalized to 1 +/- 1e-9"):
            for seed in range(10):
                rng = np.random.default_rng(seed)
                root, tree = hand_tree(rng)
                for n_max in range(1, 8):
                    px = rng.random(6)
                    out = predict(tree, Instance(px), n_max)
                    probs, _ = oracle_predict(root, px, n_max)
                    np.testing.assert_allclose(out.label_probs, probs, atol=1e-9, rtol=0)
                    assert abs(out.label_probs.sum() - 1) <= 1e-9
                    assert abs(out.weights.sum() - 1) <= 1e-9

    def test_predict_mutation_free(self, digits_dataset):
        from cobweb4v.predict import predict, predict_many

        with criterion("5e prediction leaves the snapshot byte-identical"):
            tree = CobwebTree()
            tree.fit(digits_dataset.instances(range(300)))
            before = tree.dumps()
            for i in range(1400, 1450):
                predict(tree, digits_dataset.instance(i), 300)
            predict_many(tree, digits_dataset.images[1400:1500], NMAX)
            assert tree.dumps() == before

    def test_gradient_check(self):
        from cobweb4v.mlp import PARAMS, MlpModel, loss_and_grads
        from test_mlp import numeric_grads

        with criterion("5f MLP gradients match central differences within 1e-4 relative"):
            rng = np.random.default_rng(0)
            model = MlpModel.init(10, 4, 3, seed=0)
            x, y = rng.random((3, 10)), np.array([1, 0, 2])
            _, analytic = loss_and_grads(model, x, y)
            numeric = numeric_grads(model, x, y)
            for name in PARAMS:
                a, n = analytic[name], numeric[name]
                assert np.linalg.norm(a - n) / (np.linalg.norm(a) + np.linalg.norm(n)) <= 1e-4
