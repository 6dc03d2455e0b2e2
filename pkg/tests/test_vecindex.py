import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logtmpl.vecindex import (DEFAULT_FEATURES, DIM, Standardizer, VectorIndex,
                              check_features, embed, recall)

from oracles import brute_topk


def test_feature_set_shape():
    assert check_features(DEFAULT_FEATURES) == DEFAULT_FEATURES
    with pytest.raises(ValueError):
        check_features("abc")
    with pytest.raises(ValueError):
        check_features("a" * 39)


class TestEmbed:
    def test_direct_count(self):
        feats = '=,;' + DEFAULT_FEATURES.replace("=", "").replace(",", "").replace(";", "")
        v = embed("a=1,b=2;", feats)
        assert list(v[:4]) == [2, 1, 1, 0] and v[-1] == 8

    def test_empty(self):
        v = embed("")
        assert v.shape == (DIM,) and not v.any()

    def test_layout(self):
        v = embed("[a] (b) {c}: 用户，登录")
        assert v.shape == (40,)
        assert v[-1] == len("[a] (b) {c}: 用户，登录")
        assert v[DEFAULT_FEATURES.index("[")] == 1
        assert v[DEFAULT_FEATURES.index("，")] == 1
        assert (v[:-1] <= v[-1]).all()

    @given(st.text(alphabet="ab:,.;[]=x", max_size=30), st.randoms())
    def test_anagrams_share_vectors(self, text, rnd):
        chars = list(text)
        rnd.shuffle(chars)
        assert np.array_equal(embed(text), embed("".join(chars)))


class TestStandardizer:
    def test_first_vector_maps_to_zero(self):
        s = Standardizer()
        v = embed("a:b,c")
        s.update(v)
        assert not s.transform(v).any()

    def test_two_point_population(self):
        s = Standardizer(dim=1)
        s.update([0.0])
        s.update([2.0])
        assert list(s.transform(np.array([[0.0], [2.0]])).ravel()) == [-1.0, 1.0]

    def test_constant_dimension_is_zero(self):
        s = Standardizer(dim=2)
        for x in range(5):
            s.update([3.0, float(x)])
        out = s.transform(np.array([[3.0, 1.0], [3.0, 4.0]]))
        assert (out[:, 0] == 0).all()

    def test_matches_numpy_population_stats(self):
        rng = np.random.default_rng(0)
        data = rng.integers(0, 50, size=(200, DIM)).astype(float)
        s = Standardizer()
        for row in data:
            s.update(row)
        np.testing.assert_allclose(s.mean, data.mean(axis=0), rtol=1e-12)
        np.testing.assert_allclose(s.variance, data.var(axis=0), rtol=1e-9)
        assert (s.variance >= 0).all()


class TestRecall:
    def test_empty(self):
        assert recall(VectorIndex(), np.zeros(DIM), 5, 0.5) == []

    def test_exact_hit(self):
        idx = VectorIndex()
        idx.add(4, embed("x: y"))
        idx.add(9, embed("a, b, c, d"))
        hits = recall(idx, embed("x: y"), 3, 0.0)
        assert hits[0] == (4, 1.0)

    def test_against_full_sort(self):
        rng = np.random.default_rng(11)
        idx = VectorIndex()
        vecs = rng.integers(0, 6, size=(10, DIM))
        for i, v in enumerate(vecs):
            idx.add(100 + i, v)
        q = rng.integers(0, 6, size=DIM)
        assert recall(idx, q, 5, 0.0) == brute_topk(idx.ids, vecs, q, 5, 0.0)

    def test_tie_order_by_id(self):
        idx = VectorIndex()
        for tid in (8, 2, 5):
            idx.add(tid, np.ones(DIM, dtype=np.int64))
        assert [t for t, _ in recall(idx, np.zeros(DIM), 3, 0.0)] == [2, 5, 8]

    def test_duplicate_id_rejected(self):
        idx = VectorIndex()
        idx.add(1, np.zeros(DIM))
        with pytest.raises(ValueError):
            idx.add(1, np.zeros(DIM))

    def test_argument_checks(self):
        with pytest.raises(ValueError):
            recall(VectorIndex(), np.zeros(DIM), 0, 0.5)
        with pytest.raises(ValueError):
            recall(VectorIndex(), np.zeros(DIM), 1, 1.5)

    def test_standardized_entries(self):
        s = Standardizer(dim=DIM)
        idx = VectorIndex()
        for tid, text in enumerate(["a b", "a: b: c: d", "a"]):
            v = embed(text)
            s.update(v)
            idx.add(tid, v)
        q = s.transform(embed("a: b: c: d"))
        assert recall(idx, q, 1, 0.0, s)[0] == (1, 1.0)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.floats(0, 1), st.floats(0, 1))
    def test_properties(self, seed, k, tau_a, tau_b):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(0, 40))
        idx = VectorIndex()
        vecs = rng.normal(size=(n, DIM))
        for i, v in enumerate(vecs):
            idx.add(int(rng.integers(0, 10**6)) * 64 + i, v)
        q = rng.normal(size=DIM)
        lo, hi = sorted((tau_a, tau_b))
        loose, strict = recall(idx, q, k, lo), recall(idx, q, k, hi)
        assert strict == loose[:len(strict)]
        sims = [s for _, s in loose]
        assert all(0 < s <= 1 for s in sims) and sims == sorted(sims, reverse=True)
