"""Masking of volatile objects and delimiter tokenization."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .entropy_lcs import WILDCARD

ESCAPED_WILDCARD = "<\\*>"
DEFAULT_DELIMITERS = " \t:,;="

_NAME_RE = re.compile(r"[a-z0-9_]+")


@dataclass(frozen=True)
class MaskRule:
    name: str
    pattern: str
    priority: int
    regex: re.Pattern = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not _NAME_RE.fullmatch(self.name):
            raise ValueError(f"rule name must be lowercase [a-z0-9_]+, got {self.name!r}")
        try:
            compiled = re.compile(self.pattern)
        except re.error as exc:
            raise ValueError(f"rule {self.name!r}: bad pattern: {exc}") from None
        object.__setattr__(self, "regex", compiled)

    @property
    def tag(self) -> str:
        return f"<{self.name}>"


_TIME = r"\d{1,2}:\d{2}:\d{2}(?:[.,]\d+)?"
DEFAULT_RULES = (
    MaskRule("url", r"\b[A-Za-z][A-Za-z0-9+.-]*://[^\s]+", 10),
    MaskRule("time",
             r"(?<![\w.])(?:\d{4}-\d{2}-\d{2}(?:[T ]" + _TIME + r"(?:Z|[+-]\d{2}:?\d{2})?)?"
             r"|" + _TIME + r")(?!\w|\.\d)", 20),
    MaskRule("ip", r"(?<![\w.])(?:\d{1,3}\.){3}\d{1,3}(?::\d{1,5})?(?!\w|\.\d)", 30),
    MaskRule("hex", r"(?<![\w.])0[xX][0-9a-fA-F]{4,}(?!\w|\.\d)", 40),
    MaskRule("num", r"(?<![\w.])\d{5,}(?!\w|\.\d)", 50),
)


def check_rules(rules) -> list:
    rules = sorted(rules, key=lambda r: r.priority)
    seen = set()
    for r in rules:
        if r.priority in seen:
            raise ValueError(f"duplicate rule priority {r.priority}")
        seen.add(r.priority)
    return rules


def load_rules(path) -> list:
    """Read a JSON array of ``{name, pattern, priority}`` objects."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, list):
        raise ValueError("rule file must hold a JSON array")
    try:
        rules = [MaskRule(r["name"], r["pattern"], int(r["priority"])) for r in raw]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed rule entry: {exc}") from None
    return check_rules(rules)


def mask(raw: str, rules=DEFAULT_RULES) -> str:
    """Replace matches of each rule, in priority order, by ``<name>``.

    Text produced by an earlier rule is never re-matched by a later one.
    """
    # alternating free text / tag pieces; odd indexes hold tags
    pieces = [raw]
    for rule in rules:
        search = rule.regex.search
        if not any(search(p) for p in pieces[::2]):
            continue
        rebuilt = [""]
        for is_tag, text in _split_matches(pieces, rule):
            if is_tag:
                rebuilt.append(text)
                rebuilt.append("")
            else:
                rebuilt[-1] += text
        pieces = rebuilt
    return "".join(pieces)


def _split_matches(pieces, rule):
    for idx, piece in enumerate(pieces):
        if idx % 2:
            yield True, piece
            continue
        last = 0
        for m in rule.regex.finditer(piece):
            if m.end() == m.start():
                continue
            yield False, piece[last:m.start()]
            yield True, rule.tag
            last = m.end()
        yield False, piece[last:]


def tokenizer(delimiters: str = DEFAULT_DELIMITERS):
    if not delimiters:
        raise ValueError("delimiter set must not be empty")
    splitter = re.compile("[^" + re.escape(delimiters) + "]+")

    def tokenize(masked: str) -> list:
        return [ESCAPED_WILDCARD if t == WILDCARD else t for t in splitter.findall(masked)]

    return tokenize


_default_tokenize = tokenizer()


def tokenize(masked: str, delimiters: str = DEFAULT_DELIMITERS) -> list:
    """Split on the delimiter set; runs of delimiters yield no empty tokens."""
    if delimiters == DEFAULT_DELIMITERS:
        return _default_tokenize(masked)
    return tokenizer(delimiters)(masked)
