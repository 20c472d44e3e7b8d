from __future__ import annotations

import json
from datetime import date

import pytest
from hypothesis import given
from hypothesis import strategies as st

from msr_audit.corpus import (
    CorpusError,
    Document,
    Token,
    filter_by_length,
    load_corpus,
    tokenize,
    tokenize_document,
    truncate,
)


def test_tokenize_basic_spans():
    tokens = tokenize("the  cat\tsat\n on the mat.")
    assert [t.text for t in tokens] == ["the", "cat", "sat", "on", "the", "mat."]
    assert tokens[0] == Token("the", 0, 3)
    assert tokens[1] == Token("cat", 5, 8)


def test_tokenize_empty_and_whitespace_only():
    assert tokenize("") == []
    assert tokenize("  \t\n ") == []


def test_tokenize_keeps_punctuation_attached():
    assert [t.text for t in tokenize("don't stop, (ever)!")] == ["don't", "stop,", "(ever)!"]


@given(st.text(max_size=200))
def test_tokenize_spans_recover_token_text(text):
    tokens = tokenize(text)
    for tok in tokens:
        assert text[tok.start : tok.end] == tok.text
        assert not any(c.isspace() for c in tok.text)
    # tokens appear left to right without overlap
    for left, right in zip(tokens, tokens[1:]):
        assert left.end <= right.start


@given(st.text(max_size=200))
def test_tokenize_is_stable_under_respacing(text):
    texts = [t.text for t in tokenize(text)]
    assert [t.text for t in tokenize(" ".join(texts))] == texts


def test_document_validation():
    with pytest.raises(CorpusError):
        Document(id="", cohort="pre", text="x")
    with pytest.raises(CorpusError, match="cohort"):
        Document(id="a", cohort="during", text="x")
    with pytest.raises(CorpusError, match="non-empty"):
        Document(id="a", cohort="post", text="")


def test_tokenize_document_lowercase_flag():
    doc = Document(id="a", cohort="pre", text="The CAT Sat")
    assert tokenize_document(doc).token_texts == ("The", "CAT", "Sat")
    lowered = tokenize_document(doc, lowercase=True)
    assert lowered.token_texts == ("the", "cat", "sat")
    assert lowered.text == "the cat sat"


def test_tokenize_document_rejects_empty():
    doc = Document(id="a", cohort="pre", text="   ")
    with pytest.raises(CorpusError, match="no word tokens"):
        tokenize_document(doc)


def _write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_load_corpus_round_trip(tmp_path):
    records = [
        {"id": "a", "cohort": "pre", "text": "one two three"},
        {"id": "b", "cohort": "post", "text": "x y", "source": "feed", "published_at": "2024-05-01"},
    ]
    path = _write_lines(tmp_path / "c.jsonl", [json.dumps(r) for r in records])
    docs = load_corpus(path)
    assert [d.id for d in docs] == ["a", "b"]
    assert docs[0].cohort == "pre" and docs[0].source is None and docs[0].published_at is None
    assert docs[1].source == "feed"
    assert docs[1].published_at == date(2024, 5, 1)


def test_load_corpus_skips_blank_lines(tmp_path):
    path = _write_lines(
        tmp_path / "c.jsonl",
        ['{"id": "a", "cohort": "pre", "text": "t"}', "", "   ", '{"id": "b", "cohort": "post", "text": "t"}'],
    )
    assert [d.id for d in load_corpus(path)] == ["a", "b"]


def test_load_corpus_reports_line_numbers(tmp_path):
    path = _write_lines(
        tmp_path / "c.jsonl",
        ['{"id": "a", "cohort": "pre", "text": "t"}', "{not json"],
    )
    with pytest.raises(CorpusError, match="line 2"):
        load_corpus(path)


@pytest.mark.parametrize(
    "record, message",
    [
        ('{"cohort": "pre", "text": "t"}', "missing required field 'id'"),
        ('{"id": "a", "text": "t"}', "missing required field 'cohort'"),
        ('{"id": "a", "cohort": "pre"}', "missing required field 'text'"),
        ('{"id": 5, "cohort": "pre", "text": "t"}', "must be a string"),
        ('{"id": "a", "cohort": "mid", "text": "t"}', "cohort"),
        ('{"id": "a", "cohort": "pre", "text": "t", "source": 3}', "source"),
        ('{"id": "a", "cohort": "pre", "text": "t", "published_at": "05/01/24"}', "published_at"),
        ("[1, 2]", "expected a JSON object"),
    ],
)
def test_load_corpus_rejects_malformed_records(tmp_path, record, message):
    path = _write_lines(tmp_path / "c.jsonl", [record])
    with pytest.raises(CorpusError, match=message):
        load_corpus(path)


def test_load_corpus_rejects_duplicate_ids(tmp_path):
    path = _write_lines(
        tmp_path / "c.jsonl",
        ['{"id": "a", "cohort": "pre", "text": "t"}', '{"id": "a", "cohort": "post", "text": "u"}'],
    )
    with pytest.raises(CorpusError, match="duplicate document id"):
        load_corpus(path)


def test_load_corpus_missing_file():
    with pytest.raises(CorpusError, match="cannot read"):
        load_corpus("/nonexistent/corpus.jsonl")


def test_load_corpus_cohort_override(tmp_path):
    # with an override the per-record cohort field becomes optional
    path = _write_lines(
        tmp_path / "c.jsonl",
        ['{"id": "a", "text": "t"}', '{"id": "b", "cohort": "pre", "text": "t"}'],
    )
    docs = load_corpus(path, cohort_override="post")
    assert [d.cohort for d in docs] == ["post", "post"]
    with pytest.raises(CorpusError, match="cohort_override"):
        load_corpus(path, cohort_override="neither")


def _tok(n):
    return tokenize_document(Document(id="d", cohort="pre", text=" ".join(f"w{i}" for i in range(n))))


def test_filter_by_length_is_strict():
    docs = [_tok(9), _tok(10), _tok(11)]
    kept = filter_by_length(docs, 10)
    assert [len(d.tokens) for d in kept] == [11]
    assert [len(d.tokens) for d in filter_by_length(docs, 0)] == [9, 10, 11]
    with pytest.raises(ValueError):
        filter_by_length(docs, -1)


def test_truncate():
    doc = _tok(10)
    cut = truncate(doc, 4)
    assert len(cut.tokens) == 4
    assert cut.token_texts == ("w0", "w1", "w2", "w3")
    assert cut.text == doc.text  # spans still index the original text
    assert truncate(doc, 10) is doc
    assert truncate(doc, 99) is doc
    with pytest.raises(ValueError):
        truncate(doc, 0)
