"""Token LCS with wildcard templates, candidate scoring and the entropy gate.

The DP kernels operate on int32-encoded token arrays.  Code 0 is the wildcard
and matches any log token; the kernels are compiled with numba when it is
available and run as plain Python otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn

WILDCARD = "<*>"
WILD_CODE = 0
ACCEPT_THRESHOLD = 0.5

# Alignment weights (wildcard match, constant match).  LENGTH_FIRST maximizes
# the LCS length and, among equally long alignments, the constants covered.
# COVERAGE_FIRST maximizes the constants covered, then wildcard matches; the
# matcher uses it so a wildcard-rich template cannot trade its constants for
# wildcard matches.
_SCALE = 1 << 20
LENGTH_FIRST = (_SCALE, _SCALE + 1)
COVERAGE_FIRST = (1, _SCALE)


@njit(cache=True)
def _weight_table(a, b, w_wild, w_const):
    n = a.shape[0]
    m = b.shape[0]
    table = np.zeros((n + 1, m + 1), dtype=np.int64)
    for i in range(1, n + 1):
        ai = a[i - 1]
        for j in range(1, m + 1):
            bj = b[j - 1]
            best = table[i - 1, j]
            if table[i, j - 1] > best:
                best = table[i, j - 1]
            if bj == 0:
                cand = table[i - 1, j - 1] + w_wild
                if cand > best:
                    best = cand
            elif ai == bj:
                cand = table[i - 1, j - 1] + w_const
                if cand > best:
                    best = cand
            table[i, j] = best
    return table


@njit(cache=True)
def _backtrack(a, b, table, w_wild, w_const):
    i = a.shape[0]
    j = b.shape[0]
    pairs = np.empty((min(i, j), 2), dtype=np.int64)
    k = pairs.shape[0]
    while i > 0 and j > 0:
        bj = b[j - 1]
        if bj == 0:
            w = w_wild
        elif a[i - 1] == bj:
            w = w_const
        else:
            w = -1
        if w > 0 and table[i, j] == table[i - 1, j - 1] + w:
            k -= 1
            pairs[k, 0] = i - 1
            pairs[k, 1] = j - 1
            i -= 1
            j -= 1
        elif table[i - 1, j] == table[i, j]:
            i -= 1
        else:
            j -= 1
    return pairs[k:]


@njit(cache=True)
def _bulk_weights(a, flat, offsets, which, out, w_wild, w_const):
    """Final alignment weight of ``a`` against each selected template."""
    n = a.shape[0]
    longest = 0
    for c in range(which.shape[0]):
        t = which[c]
        if offsets[t + 1] - offsets[t] > longest:
            longest = offsets[t + 1] - offsets[t]
    prev = np.zeros(longest + 1, dtype=np.int64)
    cur = np.zeros(longest + 1, dtype=np.int64)
    for c in range(which.shape[0]):
        t = which[c]
        start = offsets[t]
        m = offsets[t + 1] - start
        for j in range(m + 1):
            prev[j] = 0
        cur[0] = 0
        for i in range(n):
            ai = a[i]
            for j in range(1, m + 1):
                bj = flat[start + j - 1]
                best = prev[j]
                left = cur[j - 1]
                if left > best:
                    best = left
                if bj == 0:
                    diag = prev[j - 1] + w_wild
                elif ai == bj:
                    diag = prev[j - 1] + w_const
                else:
                    diag = -1
                if diag > best:
                    best = diag
                cur[j] = best
            prev, cur = cur, prev
        out[c] = prev[m]


def constants_in_weight(weights, order=COVERAGE_FIRST):
    """Constants matched, decoded from final alignment weights."""
    return weights // _SCALE if order == COVERAGE_FIRST else weights % _SCALE


@dataclass
class LcsAlignment:
    lcs_tokens: list
    pairs: list  # (log_position, template_position), increasing in both
    divergent_template_positions: set = field(default_factory=set)

    def __len__(self):
        return len(self.pairs)


def encode_pair(a, b):
    """Encode two token lists on a shared local alphabet; ``<*>`` in b is the wildcard."""
    codes = {}
    enc_a = np.array([codes.setdefault(t, len(codes) + 1) for t in a], dtype=np.int32)
    enc_b = np.array([WILD_CODE if t == WILDCARD else codes.setdefault(t, len(codes) + 1)
                      for t in b], dtype=np.int32)
    return enc_a, enc_b


def align_codes(a: np.ndarray, b: np.ndarray, order=LENGTH_FIRST) -> np.ndarray:
    """Aligned ``(i, j)`` index pairs for encoded sequences."""
    return _backtrack(a, b, _weight_table(a, b, *order), *order)


def lcs(a, b, order=LENGTH_FIRST) -> LcsAlignment:
    """Longest common subsequence of log tokens ``a`` and template tokens ``b``.

    A wildcard in ``b`` matches any single token of ``a``.  Among alignments
    of maximal length, the one covering the most constant template tokens is
    chosen; remaining ties resolve by backtracking from the end preferring the
    diagonal, then the log axis, then the template axis.  ``COVERAGE_FIRST``
    instead maximizes the constants covered before the length.
    """
    enc_a, enc_b = encode_pair(a, b)
    pairs = [(int(i), int(j)) for i, j in align_codes(enc_a, enc_b, order)]
    return alignment_from_pairs(a, b, pairs)


def alignment_from_pairs(a, b, pairs) -> LcsAlignment:
    covered = {j for _, j in pairs}
    return LcsAlignment(
        lcs_tokens=[a[i] for i, _ in pairs],
        pairs=pairs,
        divergent_template_positions=set(range(len(b))) - covered,
    )


def constant_count(tokens) -> int:
    return sum(1 for t in tokens if t != WILDCARD)


def coverage_score(constants_matched: int, n_constants: int) -> float:
    return min(1.0, max(0.0, constants_matched / max(1, n_constants)))


@dataclass
class MatchDecision:
    template_id: int | None
    alignment: LcsAlignment | None
    score: float
    n_constants: int = 0
    constants_matched: int = 0

    def rank_key(self):
        return (-self.score, -self.n_constants, self.template_id)


def score_candidates(seq, candidates) -> list:
    """Score each candidate template against ``seq`` and sort best-first.

    The score is the fraction of a template's constant tokens covered by the
    alignment that covers the most of them.  Ties prefer templates with more
    constants, then lower ids.
    """
    tokens = getattr(seq, "tokens", seq)
    decisions = []
    for t in candidates:
        align = lcs(tokens, t.tokens, COVERAGE_FIRST)
        n_const = constant_count(t.tokens)
        matched = sum(1 for _, j in align.pairs if t.tokens[j] != WILDCARD)
        decisions.append(MatchDecision(t.id, align, coverage_score(matched, n_const),
                                       n_const, matched))
    decisions.sort(key=MatchDecision.rank_key)
    return decisions


def accept(best: MatchDecision | None, threshold: float = ACCEPT_THRESHOLD) -> bool:
    return best is not None and best.score >= threshold


def position_entropy(stats, n_total: int) -> float:
    """Shannon entropy in bits of the token distribution at one position."""
    if n_total <= 0:
        return 0.0
    h = 0.0
    for count in stats.values():
        if count > 0:
            p = count / n_total
            h -= p * math.log2(p)
    return h + 0.0


def is_variable(stats, n_total: int, theta: float) -> bool:
    """True iff the position's entropy strictly exceeds ``theta``."""
    if theta <= 0:
        raise ValueError("theta must be > 0")
    return position_entropy(stats, n_total) > theta
