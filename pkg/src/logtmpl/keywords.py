"""Keyword library, dictionary-key extraction and keyword providers.

The keyword library is built offline (from a static file, or by asking an
extraction service once and persisting its answer) and is immutable while
parsing.  ``extract_key`` turns a token sequence into the key of its bucket.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from .entropy_lcs import WILDCARD
from .preprocess import tokenize

log = logging.getLogger(__name__)

NOKEY = "<nokey>"
MAX_PHRASE_TOKENS = 4
ENDPOINT_ENV = "ECLIPSE_KW_ENDPOINT"
TOKEN_ENV = "ECLIPSE_KW_TOKEN"

PROMPT_VERSION = "kw-extract/1"
PROMPT = (
    "You are given a sample of log messages from one or more software systems. "
    "List the words and short expressions (1 to 4 words) that name the event or "
    "operation a log message reports, such as 'access denied', 'connection "
    "closed' or 'open'. Prefer terms shared by many messages. Do not list "
    "identifiers, numbers, paths, hostnames or other values that change between "
    "messages. Answer with one expression per line and nothing else, most "
    "important first."
)


class KeywordError(Exception):
    pass


class KeywordFormatError(KeywordError):
    pass


class KeywordTransportError(KeywordError):
    pass


def normalize_phrase(text: str) -> tuple:
    return tuple(t.lower() for t in tokenize(text.strip()))


def _validate(phrase: tuple) -> str | None:
    if not phrase:
        return "empty phrase"
    if len(phrase) > MAX_PHRASE_TOKENS:
        return f"more than {MAX_PHRASE_TOKENS} tokens"
    if any(WILDCARD in t or t == "<\\*>" for t in phrase):
        return "contains the wildcard symbol"
    return None


class KeywordLibrary:
    """Ordered, deduplicated set of lowercase keyword phrases."""

    def __init__(self, phrases=()):
        ordered = {}
        for p in phrases:
            p = normalize_phrase(p) if isinstance(p, str) else tuple(t.lower() for t in p)
            problem = _validate(p)
            if problem:
                raise KeywordFormatError(f"invalid keyword phrase {' '.join(p)!r}: {problem}")
            ordered.setdefault(p, None)
        self.phrases = tuple(ordered)
        self._set = frozenset(self.phrases)
        # first token -> candidate phrase lengths, longest first
        by_first = {}
        for p in self.phrases:
            by_first.setdefault(p[0], set()).add(len(p))
        self._lengths = {k: sorted(v, reverse=True) for k, v in by_first.items()}

    def __len__(self):
        return len(self.phrases)

    def __contains__(self, phrase):
        if isinstance(phrase, str):
            phrase = normalize_phrase(phrase)
        return tuple(phrase) in self._set

    def __eq__(self, other):
        return isinstance(other, KeywordLibrary) and self.phrases == other.phrases

    def __repr__(self):
        return f"KeywordLibrary({len(self)} phrases)"

    def truncated(self, budget: int) -> "KeywordLibrary":
        return KeywordLibrary(self.phrases[:budget])

    def extract_key(self, tokens) -> str:
        lowered = [t.lower() for t in tokens]
        n = len(lowered)
        found = []
        i = 0
        while i < n:
            for length in self._lengths.get(lowered[i], ()):
                if i + length <= n and tuple(lowered[i:i + length]) in self._set:
                    found.extend(lowered[i:i + length])
                    i += length
                    break
            else:
                i += 1
        return " ".join(found) if found else NOKEY


def extract_key(seq, lib: KeywordLibrary) -> str:
    """Concatenate the longest library phrases found left to right, or ``<nokey>``."""
    return lib.extract_key(getattr(seq, "tokens", seq))


def parse_phrases(text: str) -> list:
    return [line.strip() for line in text.splitlines()
            if line.strip() and not line.lstrip().startswith("#")]


def load_static(path) -> KeywordLibrary:
    """One phrase per line; ``#`` lines are comments."""
    text = Path(path).read_text(encoding="utf-8")
    lib = KeywordLibrary(parse_phrases(text))
    if not len(lib):
        log.warning("keyword file %s holds no usable phrases", path)
    return lib


def save_static(lib: KeywordLibrary, path, header: str | None = None) -> None:
    lines = [f"# {h}" for h in header.splitlines()] if header else []
    lines += [" ".join(p) for p in lib.phrases]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _request_hash(endpoint, sample_logs, budget) -> str:
    h = hashlib.sha256()
    h.update(json.dumps([endpoint, PROMPT_VERSION, budget, list(sample_logs)],
                        ensure_ascii=False).encode("utf-8"))
    return h.hexdigest()


def _phrases_from_response(resp) -> list:
    body = resp.text
    if not body.strip():
        raise KeywordFormatError("extraction service returned an empty body")
    try:
        payload = json.loads(body)
    except ValueError:
        return parse_phrases(body)
    if isinstance(payload, dict) and "phrases" in payload:
        phrases = payload["phrases"]
        if isinstance(phrases, str):
            return parse_phrases(phrases)
        if isinstance(phrases, list) and all(isinstance(p, str) for p in phrases):
            return [p.strip() for p in phrases if p.strip()]
    raise KeywordFormatError(f"unexpected response shape: {body[:200]!r}")


def fetch_from_service(endpoint: str, sample_logs, budget: int, token: str | None = None,
                       cache_dir=None, timeout: float = 30.0, retries: int = 3,
                       backoff: float = 1.0) -> KeywordLibrary:
    """Ask an extraction service for keyword phrases.

    POSTs ``{"logs", "max_phrases", "instruction", "prompt_version"}`` and
    accepts either JSON ``{"phrases": [...]}`` or a newline-separated body.
    Connection errors and 5xx answers are retried; any other failure raises.
    With ``cache_dir`` the answer is stored in the static-file format keyed by
    a hash of the request and reused on later calls.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    sample_logs = list(sample_logs)
    cached = None
    if cache_dir is not None:
        cached = Path(cache_dir) / f"{_request_hash(endpoint, sample_logs, budget)}.txt"
        if cached.exists():
            return load_static(cached).truncated(budget)

    headers = {"Content-Type": "application/json"}
    if token:
        headers["Authorization"] = f"Bearer {token}"
    body = {"logs": sample_logs, "max_phrases": budget,
            "instruction": PROMPT, "prompt_version": PROMPT_VERSION}
    resp = None
    for attempt in range(retries):
        try:
            resp = requests.post(endpoint, json=body, headers=headers, timeout=timeout)
        except requests.RequestException as exc:
            if attempt == retries - 1:
                raise KeywordTransportError(f"cannot reach {endpoint}: {exc}") from exc
        else:
            if resp.status_code < 500 or attempt == retries - 1:
                break
        time.sleep(backoff * 2 ** attempt)
    if not 200 <= resp.status_code < 300:
        raise KeywordTransportError(f"{endpoint} answered HTTP {resp.status_code}")

    phrases = _phrases_from_response(resp)
    if not phrases:
        raise KeywordFormatError("extraction service returned no phrases")
    lib = KeywordLibrary(phrases).truncated(budget)
    if cached is not None:
        cached.parent.mkdir(parents=True, exist_ok=True)
        save_static(lib, cached, header=f"{PROMPT_VERSION} {endpoint}")
    return lib


@dataclass
class StaticFileProvider:
    path: str
    kind: str = "static-file"

    def load(self) -> KeywordLibrary:
        return load_static(self.path)


@dataclass
class HttpProvider:
    endpoint: str
    token: str | None = None
    cache_dir: str | None = None
    kind: str = "http-service"

    @classmethod
    def from_env(cls, cache_dir=None) -> "HttpProvider":
        endpoint = os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise KeywordTransportError(
                f"{ENDPOINT_ENV} is not set; export the extraction service URL")
        return cls(endpoint, os.environ.get(TOKEN_ENV), cache_dir)

    def load(self, sample_logs, budget: int) -> KeywordLibrary:
        return fetch_from_service(self.endpoint, sample_logs, budget,
                                  token=self.token, cache_dir=self.cache_dir)
