import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats as sst

from cobweb4v.stats import (
    AttrStats,
    ContractError,
    LabelTable,
    categorical_entropy,
    gaussian_entropy,
    merge,
    update,
)


def batch(data):
    """Independent oracle: two-pass mean and sum of squared deviations."""
    data = np.asarray(data, dtype=float)
    mean = data.mean(axis=0)
    return len(data), mean, ((data - mean) ** 2).sum(axis=0)


def assert_stats(s, n, mean, m2, atol=1e-9):
    assert s.n == n
    np.testing.assert_allclose(s.mean, mean, atol=atol, rtol=0)
    np.testing.assert_allclose(s.m2, m2, atol=atol, rtol=0)


class TestUpdate:
    def test_second_value(self):
        s = update(AttrStats(1, np.array([5.0]), np.array([0.0])), [7.0])
        assert_stats(s, 2, [6.0], [2.0])

    def test_first_value(self):
        s = update(AttrStats.empty(1), [0.3])
        assert_stats(s, 1, [0.3], [0.0])

    def test_constant_stream(self):
        s = AttrStats.empty(1)
        for _ in range(4):
            s = update(s, [1.0])
        assert_stats(s, 4, [1.0], [0.0])

    def test_update_is_pure(self):
        s = AttrStats(1, np.array([5.0]), np.array([0.0]))
        update(s, [7.0])
        assert s.n == 1 and s.mean[0] == 5.0

    def test_dimension_mismatch(self):
        with pytest.raises(ContractError):
            update(AttrStats.empty(3), [1.0, 2.0])

    @pytest.mark.parametrize("n", [1, 2, 17, 10_000])
    def test_streaming_matches_batch(self, rng, n):
        data = rng.random((n, 12))
        s = AttrStats.empty(12)
        for row in data:
            s.add(row)
        assert_stats(s, *batch(data))

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 60), st.integers(1, 5)),
                  elements=st.floats(0, 1)))
    def test_streaming_matches_batch_property(self, data):
        s = AttrStats.empty(data.shape[1])
        for row in data:
            s.add(row)
        assert_stats(s, *batch(data))
        assert np.all(s.m2 >= 0)

    def test_variance_is_population(self, rng):
        data = rng.random((9, 3))
        s = AttrStats.from_batch(data)
        np.testing.assert_allclose(s.var, data.var(axis=0), atol=1e-12)


class TestMerge:
    def test_example(self):
        a = AttrStats(2, np.array([0.0]), np.array([2.0]))
        b = AttrStats(2, np.array([2.0]), np.array([2.0]))
        assert_stats(merge(a, b), *batch([[-1.0], [1.0], [1.0], [3.0]]))
        assert_stats(merge(a, b), 4, [1.0], [8.0])

    def test_empty_is_identity(self, rng):
        s = AttrStats.from_batch(rng.random((5, 4)))
        for m in (merge(s, AttrStats.empty(4)), merge(AttrStats.empty(4), s)):
            assert_stats(m, s.n, s.mean, s.m2, atol=0)

    def test_symmetric(self, rng):
        a = AttrStats.from_batch(rng.random((3, 6)))
        b = AttrStats.from_batch(rng.random((8, 6)))
        ab, ba = merge(a, b), merge(b, a)
        assert_stats(ab, ba.n, ba.mean, ba.m2, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ContractError):
            merge(AttrStats.empty(2), AttrStats.empty(3))

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(2, 80), st.integers(1, 6)),
                  elements=st.floats(0, 1)), st.data())
    def test_merge_matches_union(self, data, draw):
        cut = draw.draw(st.integers(0, len(data)))
        parts = [data[:cut], data[cut:]]
        stats = [AttrStats.from_batch(p) if len(p) else AttrStats.empty(data.shape[1])
                 for p in parts]
        assert_stats(merge(*stats), *batch(data))


class TestEntropy:
    def test_zero_at_unit_scale(self):
        sigma = 1 / math.sqrt(2 * math.pi * math.e)
        assert gaussian_entropy(sigma, 1e-6) == pytest.approx(0.0, abs=1e-12)

    def test_floor_clamps_zero(self):
        assert gaussian_entropy(0.0, 0.3) == gaussian_entropy(0.3, 0.3)

    def test_unit_sigma(self):
        # scipy's normal entropy as the oracle
        assert gaussian_entropy(1.0, 1e-6) == pytest.approx(sst.norm(scale=1.0).entropy(), abs=1e-12)
        assert gaussian_entropy(1.0, 1e-6) == pytest.approx(1.4189385332, abs=1e-9)

    def test_monotone(self):
        sig = np.linspace(0, 3, 301)
        h = gaussian_entropy(sig, 0.25)
        assert np.all(np.diff(h) >= 0)
        assert np.all(np.diff(h[sig > 0.25]) > 0)

    def test_bad_floor(self):
        with pytest.raises(ContractError):
            gaussian_entropy(1.0, 0.0)

    def test_categorical_examples(self):
        assert categorical_entropy({0: 5}) == 0.0
        assert categorical_entropy({}) == 0.0
        assert categorical_entropy({0: 1, 1: 1}) == pytest.approx(math.log(2), abs=1e-12)
        expected = -(0.25 * math.log(0.25) * 2 + 0.5 * math.log(0.5))
        assert categorical_entropy({0: 1, 1: 1, 2: 2}) == pytest.approx(expected, abs=1e-12)
        assert categorical_entropy(LabelTable.from_dict({0: 1, 1: 1, 2: 2})) == pytest.approx(expected)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(1, 50), min_size=1, max_size=10))
    def test_uniform_is_maximal(self, counts):
        k = len(counts)
        assert categorical_entropy(counts) <= math.log(k) + 1e-12
        assert categorical_entropy([7] * k) == pytest.approx(math.log(k), abs=1e-12)
        assert categorical_entropy(counts) == pytest.approx(sst.entropy(counts), abs=1e-12)
