"""Streaming parser: mask, tokenize, key, recall, match and update per log line."""
from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from . import core
from .core import LogRecord, Template, TemplateLibrary, insert_template, new_library
from .entropy_lcs import (ACCEPT_THRESHOLD, COVERAGE_FIRST, WILDCARD, LcsAlignment,
                          _bulk_weights, align_codes, constants_in_weight, position_entropy)
from .keywords import NOKEY, KeywordLibrary
from .preprocess import DEFAULT_DELIMITERS, DEFAULT_RULES, mask, tokenizer
from .vecindex import DEFAULT_FEATURES, Standardizer, check_features, embed, recall

log = logging.getLogger(__name__)

# A rejected best candidate is still taken when its LCS covers this share of
# the log's own tokens (the template is the longer side, e.g. created from a
# line carrying a large payload).
CONTAINMENT_THRESHOLD = 0.5


class ParseAborted(OSError):
    def __init__(self, last_line_no, cause):
        super().__init__(f"input error after line {last_line_no}: {cause}")
        self.last_line_no = last_line_no


@dataclass(frozen=True)
class ParseConfig:
    k: int = 5
    tau: float = 0.5
    theta: float = 4.5
    rules: tuple = DEFAULT_RULES
    keyword_library_path: str | None = None
    punct_features: str = DEFAULT_FEATURES
    delimiters: str = DEFAULT_DELIMITERS
    disable_keywords: bool = False
    disable_index: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must be in [0, 1]")
        if self.theta <= 0:
            raise ValueError("theta must be > 0")
        check_features(self.punct_features)
        object.__setattr__(self, "rules", tuple(self.rules))

    def with_(self, **changes) -> "ParseConfig":
        return replace(self, **changes)


@dataclass
class ParseResult:
    line_no: int
    template_id: int
    template_string: str
    parameters: list = field(default_factory=list)

    def reconstruct(self) -> str:
        """Splice parameters back into the template's wildcards."""
        params = iter(self.parameters)
        out = []
        for tok in self.template_string.split(" "):
            out.append(next(params) if tok == WILDCARD else tok)
        return " ".join(p for p in out if p)


def _merged_stats(counters, prior: int) -> Counter:
    if len(counters) == 1:
        return counters[0]
    if all(len(c) <= 1 for c in counters):
        # every position had a single history: the joined run is exact
        return Counter({" ".join(k for c in counters for k in c if k): prior})
    # independent variable histories cannot be re-joined; keep the most varied
    return Counter(max(counters, key=lambda c: position_entropy(c, prior)))


def update_template(template: Template, tokens, alignment) -> list:
    """Fold one matched log into ``template`` and return its parameters.

    Aligned positions keep their token; template positions outside the
    alignment become wildcards, and adjacent wildcards collapse into one.  Log
    tokens outside the alignment fill the wildcard of their gap, joining a
    neighbouring wildcard or a new one when the gap has none.  Position
    statistics record the observed token (or joined run) at each position.
    """
    pairs = alignment.pairs if isinstance(alignment, LcsAlignment) else alignment
    if hasattr(pairs, "tolist"):
        pairs = pairs.tolist()
    old, stats = template.tokens, template.position_stats
    prior = template.match_count
    template.match_count = prior + 1

    if len(pairs) == len(old) == len(tokens):
        params = []
        for tok, mine, counter in zip(tokens, old, stats):
            counter[tok] += 1
            if mine == WILDCARD:
                params.append(tok)
        return params

    # entries: [token, counters to merge, run]
    out = []

    def emit(tok, counters, run):
        if tok == WILDCARD and out and out[-1][0] == WILDCARD:
            out[-1][1].extend(counters)
            out[-1][2].extend(run)
        else:
            out.append([tok, counters, run])

    pi = pj = -1
    for i, j in pairs + [(len(tokens), len(old))]:
        log_gap = list(tokens[pi + 1:i])
        prefix = []
        if j - pj > 1:
            emit(WILDCARD, stats[pj + 1:j], log_gap)
        elif log_gap:
            if out and out[-1][0] == WILDCARD:
                out[-1][2].extend(log_gap)
            elif j < len(old) and old[j] == WILDCARD:
                prefix = log_gap
            else:
                emit(WILDCARD, [Counter({"": prior})], log_gap)
        if j < len(old):
            emit(old[j], [stats[j]], prefix + [tokens[i]])
        pi, pj = i, j

    params = []
    new_tokens, new_stats = [], []
    for tok, counters, run in out:
        counter = _merged_stats(counters, prior)
        observed = " ".join(run)
        counter[observed] += 1
        new_tokens.append(tok)
        new_stats.append(counter)
        if tok == WILDCARD:
            params.append(observed)
    template.tokens = new_tokens
    template.position_stats = new_stats
    return params


class Parser:
    """One online parsing session over a single template library."""

    def __init__(self, config: ParseConfig | None = None,
                 keywords: KeywordLibrary | None = None,
                 library: TemplateLibrary | None = None):
        self.config = config or ParseConfig()
        self.keywords = keywords if keywords is not None else KeywordLibrary()
        self.library = library if library is not None else new_library()
        self.standardizer = Standardizer()
        self.diagnostics = []
        self._tokenize = tokenizer(self.config.delimiters)
        self._last_line_no = -1

    # -- steps -----------------------------------------------------------

    def preprocess(self, raw: str):
        masked = mask(raw, self.config.rules)
        return masked, self._tokenize(masked)

    def key_for(self, tokens) -> str:
        if self.config.disable_keywords:
            return NOKEY
        return self.keywords.extract_key(tokens)

    def _rank(self, bucket, codes, positions):
        flat, offsets, n_const, ids = bucket.packed()
        which = np.asarray(positions, dtype=np.int64)
        weights = np.empty(len(which), dtype=np.int64)
        _bulk_weights(codes, flat, offsets, which, weights, *COVERAGE_FIRST)
        matched = constants_in_weight(weights)
        nc = n_const[which]
        scores = np.minimum(1.0, matched / np.maximum(nc, 1))
        ids = ids[which]
        order = np.lexsort((ids, -nc, -scores))
        return which[order], scores[order], matched[order]

    def _select(self, bucket, codes, query):
        """Position of the matching template in ``bucket`` or None."""
        n = len(bucket)
        if self.config.disable_index:
            first = np.arange(n)
        else:
            hits = recall(bucket.index, query, self.config.k, self.config.tau,
                          self.standardizer)
            first = [self.library.locate(tid)[1] for tid, _ in hits]
        seen = []
        for positions in (first, None):
            if positions is None:
                if self.config.disable_index or len(first) == n:
                    break
                # nothing recalled was acceptable: fall back to the whole bucket
                rest = np.ones(n, dtype=bool)
                rest[first] = False
                positions = np.flatnonzero(rest)
            if len(positions) == 0:
                continue
            ranked = self._rank(bucket, codes, positions)
            if ranked[1][0] >= ACCEPT_THRESHOLD:
                return int(ranked[0][0])
            seen.append(ranked)
        if not seen:
            return None
        which = np.concatenate([r[0] for r in seen])
        matched = np.concatenate([r[2] for r in seen])
        best = int(np.argmax(matched))
        if matched[best] / len(codes) >= CONTAINMENT_THRESHOLD:
            return int(which[best])
        return None

    # -- public API --------------------------------------------------------

    def parse_one(self, record: LogRecord) -> ParseResult | None:
        masked, tokens = self.preprocess(record.raw)
        if not tokens:
            self.diagnostics.append((record.line_no, "empty line skipped"))
            log.debug("line %d: empty after tokenization, skipped", record.line_no)
            return None
        key = self.key_for(tokens)
        vector = embed(masked, self.config.punct_features)
        self.standardizer.update(vector)
        lib = self.library
        bucket = lib.buckets.get(key)
        if bucket is not None:
            codes = lib.encode_log(tokens)
            query = self.standardizer.transform(vector)
            pos = self._select(bucket, codes, query)
            if pos is not None:
                template = bucket.templates[pos]
                pairs = align_codes(codes, bucket._codes[pos], COVERAGE_FIRST)
                before = template.tokens
                params = update_template(template, tokens, pairs)
                if template.tokens != before:
                    lib.refresh(template.id)
                return ParseResult(record.line_no, template.id,
                                   template.template_string, params)
        template = insert_new(lib, key, tokens, vector)
        return ParseResult(record.line_no, template.id, template.template_string, [])

    def match(self, raw: str) -> int | None:
        """Template id ``raw`` would be assigned to, without changing any state."""
        masked, tokens = self.preprocess(raw)
        if not tokens:
            return None
        bucket = self.library.buckets.get(self.key_for(tokens))
        if bucket is None:
            return None
        query = self.standardizer.transform(embed(masked, self.config.punct_features))
        pos = self._select(bucket, self.library.encode_log(tokens), query)
        return None if pos is None else bucket.templates[pos].id

    def parse_lines(self, lines, start: int = 0):
        """Parse raw lines in order, yielding one result per non-empty line."""
        it = iter(lines)
        line_no = start
        while True:
            try:
                raw = next(it)
            except StopIteration:
                return
            except OSError as exc:
                raise ParseAborted(self._last_line_no, exc) from exc
            res = self.parse_one(LogRecord(line_no, raw.rstrip("\r\n")))
            self._last_line_no = line_no
            line_no += 1
            if res is not None:
                yield res

    def catalog(self) -> list:
        return core.catalog(self.library, self.config.theta)


def insert_new(lib: TemplateLibrary, key: str, tokens, vector) -> Template:
    return insert_template(lib, key, tokens, vector)


def parse_one(lib, config, std, record, keywords=None) -> ParseResult | None:
    parser = Parser(config, keywords, lib)
    parser.standardizer = std
    return parser.parse_one(record)


def parse_stream(lines, config: ParseConfig | None = None,
                 keywords: KeywordLibrary | None = None):
    """Parse all ``lines``; return ``(results, library)``."""
    parser = Parser(config, keywords)
    results = list(parser.parse_lines(lines))
    return results, parser.library


# -- file formats ------------------------------------------------------------

def read_raw(path):
    """Yield ``(line_id, content)``; line ids are 1-based physical line numbers."""
    with open(path, encoding="utf-8", newline="") as fh:
        for n, line in enumerate(fh, 1):
            yield str(n), line.rstrip("\r\n")


def read_loghub_csv(path):
    """Yield ``(LineId, Content)`` from a LogHub structured CSV."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or "Content" not in reader.fieldnames:
            raise ValueError(f"{path}: no Content column (columns: {reader.fieldnames})")
        for n, row in enumerate(reader, 1):
            content = (row["Content"] or "").replace("\r", " ").replace("\n", " ")
            yield row.get("LineId") or str(n), content


STRUCTURED_COLUMNS = ["LineId", "EventId", "EventTemplate", "ParameterList"]


def event_id(template_id: int) -> str:
    return f"E{template_id}"


def write_structured(results, line_ids, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STRUCTURED_COLUMNS)
        for r in results:
            w.writerow([line_ids[r.line_no], event_id(r.template_id), r.template_string,
                        json.dumps(r.parameters, ensure_ascii=False)])
