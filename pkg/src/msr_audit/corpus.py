"""Loading, validation, tokenization and trimming of cohort-labeled corpora.

A corpus file is UTF-8 JSON lines, one document per line with required fields
"id", "text" and "cohort" ("pre" | "post"), plus optional "source" and
"published_at" (ISO-8601 date).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from datetime import date
from pathlib import Path

COHORTS = ("pre", "post")

_WORD_RE = re.compile(r"\S+")


class CorpusError(Exception):
    """Raised for unreadable or malformed corpus data."""


@dataclass(frozen=True)
class Document:
    """One source text labeled with its cohort."""

    id: str
    cohort: str
    text: str
    source: str | None = None
    published_at: date | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise CorpusError("document id must be non-empty")
        if self.cohort not in COHORTS:
            raise CorpusError(f"cohort must be one of {COHORTS}, got {self.cohort!r}")
        if not self.text:
            raise CorpusError(f"document {self.id!r}: text must be non-empty")


@dataclass(frozen=True)
class Token:
    """A word token with its half-open character span into the source text."""

    text: str
    start: int
    end: int


@dataclass(frozen=True)
class TokenizedDocument:
    """Word-token view of a document; spans index into ``text``."""

    id: str
    cohort: str
    text: str
    tokens: tuple[Token, ...]

    @property
    def token_texts(self) -> tuple[str, ...]:
        return tuple(t.text for t in self.tokens)


def tokenize(text: str) -> list[Token]:
    """Split ``text`` into maximal runs of non-whitespace characters.

    Case is preserved and punctuation stays attached to its word, so matching
    downstream is strictly verbatim. Empty text yields an empty list.
    """
    return [Token(m.group(), m.start(), m.end()) for m in _WORD_RE.finditer(text)]


def tokenize_document(doc: Document, lowercase: bool = False) -> TokenizedDocument:
    """Tokenize a document, optionally lowercasing the text first.

    Lowercasing is applied to the whole text before splitting so token spans
    stay consistent with the stored text.
    """
    text = doc.text.lower() if lowercase else doc.text
    tokens = tuple(tokenize(text))
    if not tokens:
        raise CorpusError(f"document {doc.id!r} contains no word tokens")
    return TokenizedDocument(id=doc.id, cohort=doc.cohort, text=text, tokens=tokens)


def _parse_record(raw: dict, lineno: int, cohort_override: str | None) -> Document:
    if not isinstance(raw, dict):
        raise CorpusError(f"line {lineno}: expected a JSON object")
    for field in ("id", "text"):
        if field not in raw:
            raise CorpusError(f"line {lineno}: missing required field {field!r}")
        if not isinstance(raw[field], str):
            raise CorpusError(f"line {lineno}: field {field!r} must be a string")
    if cohort_override is None and "cohort" not in raw:
        raise CorpusError(f"line {lineno}: missing required field 'cohort'")
    cohort = cohort_override if cohort_override is not None else raw["cohort"]
    source = raw.get("source")
    if source is not None and not isinstance(source, str):
        raise CorpusError(f"line {lineno}: field 'source' must be a string")
    published_at = None
    if raw.get("published_at") is not None:
        try:
            published_at = date.fromisoformat(raw["published_at"])
        except (TypeError, ValueError) as exc:
            raise CorpusError(f"line {lineno}: bad 'published_at': {exc}") from exc
    try:
        return Document(
            id=raw["id"],
            cohort=cohort,
            text=raw["text"],
            source=source,
            published_at=published_at,
        )
    except CorpusError as exc:
        raise CorpusError(f"line {lineno}: {exc}") from exc


def load_corpus(path: str | Path, cohort_override: str | None = None) -> list[Document]:
    """Load all documents from a JSON-lines corpus file, in file order.

    Args:
        path: corpus file path.
        cohort_override: if given, assigns this cohort to every record instead
            of reading the per-record "cohort" field.

    Raises:
        CorpusError: unreadable file, malformed line (reported with its line
            number), duplicate id, or missing required field.
    """
    if cohort_override is not None and cohort_override not in COHORTS:
        raise CorpusError(f"cohort_override must be one of {COHORTS}, got {cohort_override!r}")
    path = Path(path)
    try:
        raw_lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CorpusError(f"cannot read corpus file {path}: {exc}") from exc

    docs: list[Document] = []
    seen: set[str] = set()
    for lineno, line in enumerate(raw_lines, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
        try:
            doc = _parse_record(raw, lineno, cohort_override)
        except CorpusError as exc:
            raise CorpusError(f"{path}: {exc}") from exc
        if doc.id in seen:
            raise CorpusError(f"{path}: line {lineno}: duplicate document id {doc.id!r}")
        seen.add(doc.id)
        docs.append(doc)
    return docs


def filter_by_length(docs: list[TokenizedDocument], min_words: int) -> list[TokenizedDocument]:
    """Keep documents with strictly more than ``min_words`` tokens, in order."""
    if min_words < 0:
        raise ValueError(f"min_words must be >= 0, got {min_words}")
    return [d for d in docs if len(d.tokens) > min_words]


def truncate(doc: TokenizedDocument, length: int) -> TokenizedDocument:
    """Keep the first ``length`` tokens (original spans); no-op if already shorter."""
    if length < 1:
        raise ValueError(f"truncation length must be >= 1, got {length}")
    if len(doc.tokens) <= length:
        return doc
    return replace(doc, tokens=doc.tokens[:length])
