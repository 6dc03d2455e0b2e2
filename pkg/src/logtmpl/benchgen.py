"""Synthetic log corpora with known ground truth, and a timing harness.

Templates are random token skeletons over a pseudo-word vocabulary.  Each
template carries one or two event keywords drawn from a shared pool (the
pool doubles as the keyword library for the corpus), a share of variable
positions, and a JSON-like payload slot.  Template frequencies follow a
truncated Zipf law with every template guaranteed to occur at least once.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .keywords import KeywordLibrary
from .pipeline import ParseConfig, Parser

ZIPF_EXPONENT = 1.1
PRESET_SCALES = (3000, 30000, 300000)
PAYLOAD_TOKENS = (5, 50)

_ONSETS = ["b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t",
           "v", "w", "z", "st", "tr", "cl", "pr", "sh", "ch", "gr"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ou", "io"]
_CODAS = ["", "", "n", "r", "s", "t", "l", "x", "m", "ck"]
_DECORATIONS = ["[{}]", "({})", "{}.", "'{}'", "#{}", "{}:", "<{}>", "{}/"]
_VARIABLE_KINDS = ["int", "id", "hex", "ip", "path", "float", "word", "bignum"]


@dataclass(frozen=True)
class CorpusSpec:
    n_templates: int = 50
    n_logs: int = 10000
    seed: int = 1
    variable_rate: float = 0.2
    length_jitter: float = 0.0
    vocab: int = 2000

    def __post_init__(self):
        if self.n_templates < 1:
            raise ValueError("n_templates must be >= 1")
        if self.n_logs < 0:
            raise ValueError("n_logs must be >= 0")
        if not 0.0 <= self.variable_rate <= 1.0:
            raise ValueError("variable_rate must be in [0, 1]")
        if not 0.0 <= self.length_jitter <= 1.0:
            raise ValueError("length_jitter must be in [0, 1]")
        if self.vocab < 10:
            raise ValueError("vocab must be >= 10")


class Corpus(NamedTuple):
    lines: list
    truth: dict  # line_no -> template label
    keywords: KeywordLibrary


@dataclass
class _Skeleton:
    tokens: list          # constant tokens; None marks a variable slot
    kinds: list           # variable kind per slot (None for constants)
    payload_at: int       # token index the payload is inserted before
    payload_keys: list


def _words(rng, n, taken=()):
    out, seen = [], set(taken)
    while len(out) < n:
        syllables = rng.integers(1, 4)
        w = "".join(_ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))]
                    for _ in range(syllables))
        w += _CODAS[rng.integers(len(_CODAS))]
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


def _skeletons(rng, spec, vocab, keywords):
    out, seen = [], set()
    while len(out) < spec.n_templates:
        length = int(rng.integers(6, 15))
        tokens = [vocab[rng.integers(len(vocab))] for _ in range(length)]
        for i in range(length):
            if rng.random() < 0.2:
                tokens[i] = _DECORATIONS[rng.integers(len(_DECORATIONS))].format(tokens[i])
        kw_slots = rng.choice(length, size=int(rng.integers(1, 3)), replace=False)
        for slot in sorted(kw_slots):
            tokens[slot] = keywords[rng.integers(len(keywords))]
        free = [i for i in range(length) if i not in set(kw_slots)]
        n_var = min(len(free), int(round(spec.variable_rate * length)))
        kinds = [None] * length
        for slot in rng.choice(free, size=n_var, replace=False):
            tokens[slot] = None
            kinds[slot] = _VARIABLE_KINDS[rng.integers(len(_VARIABLE_KINDS))]
        if rng.random() < 0.3:
            tokens[0] = tokens[0].capitalize() if tokens[0] else None
        sig = tuple(t if t is not None else "\0" for t in tokens)
        if sig in seen:
            continue
        seen.add(sig)
        n_keys = PAYLOAD_TOKENS[1] // 2 + 1
        keys = [f'"{k}"' for k in _words(rng, n_keys)]
        out.append(_Skeleton(tokens, kinds, int(rng.integers(1, length + 1)), keys))
    return out


def _value(rng, kind, vocab):
    if kind == "int":
        return str(rng.integers(0, 10000))
    if kind == "id":
        return f"blk_{rng.integers(0, 10**9)}"
    if kind == "hex":
        return f"0x{rng.integers(0, 2**32):08x}"
    if kind == "ip":
        return ".".join(str(x) for x in rng.integers(0, 256, size=4))
    if kind == "path":
        return "/" + "/".join(vocab[i] for i in rng.integers(len(vocab), size=3))
    if kind == "float":
        return f"{rng.random() * 1000:.2f}"
    if kind == "bignum":
        return str(rng.integers(10**5, 10**12))
    return f"{vocab[rng.integers(len(vocab))]}{rng.integers(0, 1000)}"


def _payload(rng, skel, vocab):
    n = int(rng.integers(PAYLOAD_TOKENS[0], PAYLOAD_TOKENS[1] + 1))
    pieces = []
    for i in range(n):
        if i % 2 == 0:
            pieces.append(skel.payload_keys[i // 2] + ":")
        else:
            pieces.append(_value(rng, _VARIABLE_KINDS[rng.integers(len(_VARIABLE_KINDS))],
                                 vocab) + ",")
    pieces[0] = "{" + pieces[0]
    pieces[-1] = pieces[-1].rstrip(",") + "}"
    return pieces


def generate(spec: CorpusSpec) -> Corpus:
    """Deterministic corpus for ``spec``: lines, ground truth and keyword pool."""
    rng = np.random.default_rng(spec.seed)
    n_kw = max(1, spec.n_templates // 4)
    keywords = _words(rng, n_kw)
    vocab = _words(rng, spec.vocab, taken=keywords)
    skeletons = _skeletons(rng, spec, vocab, keywords)

    ranks = np.arange(1, spec.n_templates + 1, dtype=np.float64)
    probs = ranks ** -ZIPF_EXPONENT
    probs /= probs.sum()
    # every template appears once when there is room, the rest follow Zipf
    covered = np.arange(min(spec.n_templates, spec.n_logs))
    extra = rng.choice(spec.n_templates, size=spec.n_logs - len(covered), p=probs)
    labels = rng.permutation(np.concatenate([covered, extra]))

    lines, truth = [], {}
    for line_no, t in enumerate(labels):
        skel = skeletons[t]
        tokens = [tok if tok is not None else _value(rng, kind, vocab)
                  for tok, kind in zip(skel.tokens, skel.kinds)]
        if spec.length_jitter and rng.random() < spec.length_jitter:
            tokens[skel.payload_at:skel.payload_at] = _payload(rng, skel, vocab)
        lines.append(" ".join(tokens))
        truth[line_no] = f"T{int(t)}"
    return Corpus(lines, truth, KeywordLibrary(keywords))


def time_run(config: ParseConfig, corpus: Corpus, repetitions: int = 5,
             keywords: KeywordLibrary | None = None) -> dict:
    """Wall-clock seconds of parsing ``corpus`` from a cold library, per repetition."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    lines = list(corpus.lines)
    if keywords is None:
        keywords = corpus.keywords
    # compile the DP kernels outside the timed region
    _consume(Parser(config, keywords).parse_lines(["warm up a", "warm up b"]))
    reps = []
    for _ in range(repetitions):
        parser = Parser(config, keywords)
        start = time.perf_counter()
        _consume(parser.parse_lines(lines))
        reps.append(time.perf_counter() - start)
    return {"mean_seconds": sum(reps) / len(reps), "reps": reps,
            "n_templates": len(parser.library)}


def _consume(it):
    for _ in it:
        pass
