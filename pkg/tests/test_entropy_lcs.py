import math
import random
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logtmpl.core import Template
from logtmpl.entropy_lcs import (COVERAGE_FIRST, WILDCARD, MatchDecision, accept, is_variable,
                                 lcs, position_entropy, score_candidates)

from oracles import entropy_direct, is_common_subsequence, lcs_length, lcs_length_dp

tokens = st.lists(st.sampled_from("abcdefg"), max_size=12)
templates = st.lists(st.sampled_from(list("abcdefg") + [WILDCARD]), max_size=12)


def tmpl(tid, toks):
    return Template(tid, list(toks), [Counter({t: 1}) for t in toks])


class TestLcs:
    def test_hand_table(self):
        al = lcs(list("abcd"), list("axcd"))
        assert al.lcs_tokens == ["a", "c", "d"]
        assert al.pairs == [(0, 0), (2, 2), (3, 3)]
        assert al.divergent_template_positions == {1}

    def test_identity(self):
        seq = ["open", "file", "x", "y"]
        assert lcs(seq, seq).lcs_tokens == seq

    def test_disjoint(self):
        al = lcs(["a", "b"], ["c", "d"])
        assert al.lcs_tokens == [] and al.divergent_template_positions == {0, 1}

    def test_empty_inputs(self):
        assert len(lcs([], ["a"])) == 0
        assert len(lcs(["a"], [])) == 0

    def test_wildcard_matches_any_token(self):
        al = lcs(["a", "b", "c"], ["a", WILDCARD, "c"])
        assert al.pairs == [(0, 0), (1, 1), (2, 2)]

    def test_prefers_constants_among_equal_lengths(self):
        # both alignments have length 1; the constant one must win
        al = lcs(["a"], ["a", WILDCARD])
        assert al.pairs == [(0, 0)]
        al = lcs(["a"], [WILDCARD, "a"])
        assert al.pairs == [(0, 1)]

    @settings(max_examples=300, deadline=None)
    @given(tokens, templates)
    def test_length_matches_oracle(self, a, b):
        al = lcs(a, b)
        assert len(al) == lcs_length(a, b, wildcard=WILDCARD)
        assert is_common_subsequence(al.pairs, a, b, wildcard=WILDCARD)
        covered = {j for _, j in al.pairs}
        assert covered | al.divergent_template_positions == set(range(len(b)))
        assert not covered & al.divergent_template_positions

    @settings(max_examples=200, deadline=None)
    @given(tokens, tokens)
    def test_symmetric_without_wildcards(self, a, b):
        assert len(lcs(a, b)) == len(lcs(b, a))

    @settings(max_examples=200, deadline=None)
    @given(tokens, st.lists(st.sampled_from("abcdefg"), min_size=1, max_size=12), st.data())
    def test_wildcards_never_shorten(self, a, b, data):
        p = data.draw(st.integers(0, len(b) - 1))
        generalized = b[:p] + [WILDCARD] + b[p + 1:]
        assert len(lcs(a, generalized)) >= len(lcs(a, b))


class TestCoverageFirst:
    def test_constants_beat_wildcard_matches(self):
        log, tmpl_tokens = ["x", "y", "c"], [WILDCARD, "c", WILDCARD, WILDCARD]
        assert len(lcs(log, tmpl_tokens)) == 3
        al = lcs(log, tmpl_tokens, COVERAGE_FIRST)
        assert (2, 1) in al.pairs and len(al) == 2
        (d,) = score_candidates(log, [tmpl(0, tmpl_tokens)])
        assert d.score == 1.0

    @settings(max_examples=300, deadline=None)
    @given(tokens, templates)
    def test_covers_every_coverable_constant(self, a, b):
        al = lcs(a, b, COVERAGE_FIRST)
        assert is_common_subsequence(al.pairs, a, b, wildcard=WILDCARD)
        covered = sum(1 for _, j in al.pairs if b[j] != WILDCARD)
        assert covered == lcs_length_dp(a, [t for t in b if t != WILDCARD])
        standard = lcs(a, b)
        assert covered >= sum(1 for _, j in standard.pairs if b[j] != WILDCARD)


class TestScoring:
    def test_hand_example(self):
        t1, t2 = tmpl(1, ["a", WILDCARD, "c"]), tmpl(2, ["x", "y", "z"])
        ranked = score_candidates(["a", "b", "c"], [t2, t1])
        assert [d.template_id for d in ranked] == [1, 2]
        assert ranked[0].score == 1.0 and ranked[1].score == 0.0

    def test_identical_candidate(self):
        (d,) = score_candidates(["p", "q"], [tmpl(0, ["p", "q"])])
        assert d.score == 1.0

    def test_tie_goes_to_lower_id(self):
        ranked = score_candidates(["a", "b"], [tmpl(7, ["a", "b"]), tmpl(3, ["a", "b"])])
        assert [d.template_id for d in ranked] == [3, 7]

    def test_tie_prefers_more_constants(self):
        ranked = score_candidates(["a", "b", "c"],
                                  [tmpl(0, ["a", WILDCARD, WILDCARD]), tmpl(5, ["a", "b", "c"])])
        assert [d.template_id for d in ranked] == [5, 0]

    def test_empty(self):
        assert score_candidates(["a"], []) == []

    def test_deterministic_order(self):
        rng = random.Random(3)
        cands = [tmpl(i, rng.choices("abc*", k=rng.randint(1, 6))) for i in range(30)]
        seq = rng.choices("abc", k=8)
        first = [d.template_id for d in score_candidates(seq, cands)]
        rng.shuffle(cands)
        assert [d.template_id for d in score_candidates(seq, cands)] == first

    @pytest.mark.parametrize("score,expected", [(1.0, True), (0.0, False), (0.5, True),
                                                (0.4999, False)])
    def test_accept_boundary(self, score, expected):
        assert accept(MatchDecision(0, None, score)) is expected

    def test_accept_none(self):
        assert accept(None) is False


class TestEntropy:
    def test_single_token(self):
        assert position_entropy({"foo": 10}, 10) == 0.0

    def test_two_even(self):
        assert position_entropy({"a": 1, "b": 1}, 2) == 1.0

    def test_uniform_32(self):
        stats = {f"t{i}": 1 for i in range(32)}
        assert position_entropy(stats, 32) == 5.0
        assert is_variable(stats, 32, 4.5)

    def test_strict_boundary(self):
        # H = 2 bits exactly for four equiprobable tokens
        stats = {c: 3 for c in "abcd"}
        assert position_entropy(stats, 12) == 2.0
        assert not is_variable(stats, 12, 2.0)

    def test_zero_total(self):
        assert position_entropy({}, 0) == 0.0
        assert not is_variable({}, 0, 0.1)

    def test_theta_must_be_positive(self):
        with pytest.raises(ValueError):
            is_variable({"a": 1}, 1, 0)

    @settings(max_examples=200)
    @given(st.lists(st.integers(1, 50), min_size=1, max_size=40))
    def test_bounds_and_direct_sum(self, counts):
        stats = {i: c for i, c in enumerate(counts)}
        h = position_entropy(stats, sum(counts))
        assert h == pytest.approx(entropy_direct(counts), abs=1e-9)
        assert -1e-12 <= h <= math.log2(len(counts)) + 1e-12

    @pytest.mark.parametrize("n", [1, 2, 3, 7, 64])
    def test_uniform_is_maximal(self, n):
        assert position_entropy({i: 5 for i in range(n)}, 5 * n) == pytest.approx(math.log2(n))
        skewed = {i: 5 for i in range(n)}
        skewed[0] += 3
        if n > 1:
            assert position_entropy(skewed, 5 * n + 3) < math.log2(n)
