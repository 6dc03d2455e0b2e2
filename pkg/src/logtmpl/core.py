"""Domain types, the keyword-partitioned template library and its snapshots."""
from __future__ import annotations

import io
import json
import struct
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .entropy_lcs import WILD_CODE, WILDCARD, constant_count, is_variable
from .keywords import NOKEY
from .vecindex import DIM, VectorIndex

MAGIC = b"ECLP"
VERSION = 1


class DegenerateInputError(ValueError):
    pass


class SnapshotFormatError(ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class LogRecord:
    line_no: int
    raw: str

    def __post_init__(self):
        if "\n" in self.raw or "\r" in self.raw:
            raise ValueError("log record must not contain newlines")


@dataclass
class TokenSequence:
    tokens: list
    source_line_no: int = -1

    def __len__(self):
        return len(self.tokens)


@dataclass
class Template:
    id: int
    tokens: list
    position_stats: list  # one Counter per position: observed token -> count
    match_count: int = 1
    keyword_key: str = NOKEY

    @property
    def template_string(self) -> str:
        return " ".join(self.tokens)

    @property
    def n_constants(self) -> int:
        return constant_count(self.tokens)

    def position_total(self, p: int) -> int:
        return sum(self.position_stats[p].values())

    def variable_positions(self, theta: float) -> list:
        """Wildcard positions whose token entropy exceeds ``theta``."""
        return [p for p, tok in enumerate(self.tokens)
                if tok == WILDCARD
                and is_variable(self.position_stats[p], self.position_total(p), theta)]


@dataclass
class Bucket:
    templates: list = field(default_factory=list)
    index: VectorIndex = field(default_factory=VectorIndex)
    # int32 codes of every template, packed lazily for the DP kernels
    _codes: list = field(default_factory=list, compare=False, repr=False)
    _packed: tuple | None = field(default=None, compare=False, repr=False)

    def __len__(self):
        return len(self.templates)

    def set_codes(self, pos: int, codes: np.ndarray) -> None:
        if pos == len(self._codes):
            self._codes.append(codes)
            self._packed = None
            return
        same_shape = len(self._codes[pos]) == len(codes)
        self._codes[pos] = codes
        if self._packed is not None and same_shape:
            flat, offsets, n_const, ids = self._packed
            flat[offsets[pos]:offsets[pos + 1]] = codes
            n_const[pos] = np.count_nonzero(codes)
        else:
            self._packed = None

    def packed(self):
        """``(flat codes, offsets, constants per template, ids)``."""
        if self._packed is None:
            lengths = np.fromiter((len(c) for c in self._codes), dtype=np.int64,
                                  count=len(self._codes))
            offsets = np.zeros(len(self._codes) + 1, dtype=np.int64)
            np.cumsum(lengths, out=offsets[1:])
            flat = (np.concatenate(self._codes) if self._codes
                    else np.zeros(0, dtype=np.int32))
            # wildcards encode as 0, every constant as a positive code
            n_const = np.zeros(len(self._codes), dtype=np.int64)
            if len(flat):
                n_const = np.add.reduceat((flat != WILD_CODE).astype(np.int64), offsets[:-1])
            ids = np.array(self.index.ids, dtype=np.int64)
            self._packed = (flat, offsets, n_const, ids)
        return self._packed


@dataclass
class TemplateLibrary:
    buckets: dict = field(default_factory=dict)
    next_id: int = 0
    _vocab: dict = field(default_factory=dict, compare=False, repr=False)
    _where: dict = field(default_factory=dict, compare=False, repr=False)

    def __len__(self):
        return sum(len(b) for b in self.buckets.values())

    def templates(self):
        """All templates in id order."""
        return sorted((t for b in self.buckets.values() for t in b.templates),
                      key=lambda t: t.id)

    def get(self, template_id: int) -> Template:
        key, pos = self._where[template_id]
        return self.buckets[key].templates[pos]

    def locate(self, template_id: int) -> tuple:
        return self._where[template_id]

    def encode_template(self, tokens) -> np.ndarray:
        vocab = self._vocab
        return np.array([WILD_CODE if t == WILDCARD else vocab.setdefault(t, len(vocab) + 1)
                         for t in tokens], dtype=np.int32)

    def encode_log(self, tokens) -> np.ndarray:
        # tokens unseen in any template can never match a constant
        get = self._vocab.get
        return np.array([get(t, -1) for t in tokens], dtype=np.int32)

    def add(self, key: str, template: Template, vector) -> None:
        bucket = self.buckets.setdefault(key, Bucket())
        self._where[template.id] = (key, len(bucket.templates))
        bucket.templates.append(template)
        bucket.index.add(template.id, vector)
        bucket.set_codes(len(bucket.templates) - 1, self.encode_template(template.tokens))
        self.next_id = max(self.next_id, template.id + 1)

    def refresh(self, template_id: int) -> None:
        """Re-encode a template after its tokens changed."""
        key, pos = self._where[template_id]
        bucket = self.buckets[key]
        bucket.set_codes(pos, self.encode_template(bucket.templates[pos].tokens))


def new_library() -> TemplateLibrary:
    return TemplateLibrary()


def insert_template(lib: TemplateLibrary, key: str, tokens, vector=None) -> Template:
    """Add ``tokens`` as a new all-constant template under ``key``."""
    tokens = list(getattr(tokens, "tokens", tokens))
    if not tokens:
        raise DegenerateInputError("cannot create a template from an empty token sequence")
    if vector is None:
        from .vecindex import embed
        vector = embed(" ".join(tokens))
    template = Template(
        id=lib.next_id,
        tokens=tokens,
        position_stats=[Counter({t: 1}) for t in tokens],
        match_count=1,
        keyword_key=key,
    )
    lib.add(key, template, vector)
    return template


def catalog(lib: TemplateLibrary, theta: float | None = None) -> list:
    out = []
    for t in lib.templates():
        entry = {"id": t.id, "template": t.template_string,
                 "match_count": t.match_count, "keyword_key": t.keyword_key}
        if theta is not None:
            entry["variable_positions"] = t.variable_positions(theta)
        out.append(entry)
    return out


def catalog_json(lib: TemplateLibrary, theta: float | None = None) -> str:
    return json.dumps(catalog(lib, theta), ensure_ascii=False, indent=2) + "\n"


# -- snapshots ---------------------------------------------------------------
#
# layout: MAGIC, u8 version, u64 next_id, u32 n_buckets, then per bucket:
#   str key, u32 n_templates, per template:
#     u64 id, u64 match_count, str keyword_key, u32 n_tokens,
#     per position: str token, u32 n_stats, (str token, u64 count) * n_stats
#     40 x u64 raw index vector
# strings are u32 byte length + UTF-8.

def _put_str(buf, s: str) -> None:
    b = s.encode("utf-8")
    buf.write(struct.pack("<I", len(b)))
    buf.write(b)


def snapshot(lib: TemplateLibrary) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<BQI", VERSION, lib.next_id, len(lib.buckets)))
    for key, bucket in lib.buckets.items():
        _put_str(buf, key)
        buf.write(struct.pack("<I", len(bucket.templates)))
        vectors = bucket.index.vectors
        for pos, t in enumerate(bucket.templates):
            buf.write(struct.pack("<QQ", t.id, t.match_count))
            _put_str(buf, t.keyword_key)
            buf.write(struct.pack("<I", len(t.tokens)))
            for tok, stats in zip(t.tokens, t.position_stats):
                _put_str(buf, tok)
                buf.write(struct.pack("<I", len(stats)))
                for obs, count in stats.items():
                    _put_str(buf, obs)
                    buf.write(struct.pack("<Q", count))
            buf.write(struct.pack(f"<{DIM}Q", *(int(x) for x in vectors[pos])))
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise SnapshotFormatError(
                f"truncated snapshot: need {n} bytes, {len(self.data) - self.pos} left",
                self.pos)
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        start = self.pos
        (n,) = self.unpack("<I")
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError:
            raise SnapshotFormatError("invalid UTF-8 string", start) from None


def restore(data: bytes) -> TemplateLibrary:
    r = _Reader(bytes(data))
    if r.take(len(MAGIC)) != MAGIC:
        raise SnapshotFormatError("bad magic, not a template library snapshot", 0)
    version, next_id, n_buckets = r.unpack("<BQI")
    if version != VERSION:
        raise SnapshotFormatError(f"unsupported snapshot version {version}", len(MAGIC))
    lib = TemplateLibrary()
    for _ in range(n_buckets):
        key = r.string()
        (n_templates,) = r.unpack("<I")
        for _ in range(n_templates):
            at = r.pos
            tid, match_count = r.unpack("<QQ")
            kw = r.string()
            (n_tokens,) = r.unpack("<I")
            tokens, stats = [], []
            for _ in range(n_tokens):
                tokens.append(r.string())
                (n_stats,) = r.unpack("<I")
                counter = Counter()
                for _ in range(n_stats):
                    obs = r.string()
                    (counter[obs],) = r.unpack("<Q")
                stats.append(counter)
            vector = np.array(r.unpack(f"<{DIM}Q"), dtype=np.int64)
            if tid in lib._where:
                raise SnapshotFormatError(f"duplicate template id {tid}", at)
            lib.add(key, Template(tid, tokens, stats, match_count, kw), vector)
    if r.pos != len(r.data):
        raise SnapshotFormatError("trailing bytes after snapshot", r.pos)
    if lib._where and next_id <= max(lib._where):
        raise SnapshotFormatError("next_id does not exceed every template id", len(MAGIC) + 1)
    lib.next_id = next_id
    return lib
