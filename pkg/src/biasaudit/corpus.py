"""Corpus ingestion and cleaning for social-media text snippets.

The pipeline order is: load -> clean -> split/limit -> language filter.
Cleaning happens before sentence splitting so that split children inherit
already-cleaned text.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Sequence

from .errors import ValidationError

PLATFORMS = ("twitter", "youtube", "facebook", "other")

LINK_SENTINEL = "_link_"
USER_SENTINEL = "_user_"

LINK_RE = re.compile(r"(?:https?://|www\.)\S*", re.IGNORECASE)
USER_RE = re.compile(r"@\w+")
# Scrape artifacts: a leading date stamp such as "2023-10-12" or
# "2023-10-12 08:15" glued to the front of the text.
DEFAULT_DATE_PREFIX = r"^\s*\d{4}-\d{2}-\d{2}(?:[ T]\d{2}:\d{2}(?::\d{2})?)?\s*"

SENTENCE_TERMINATORS = ".!?"


@dataclass(frozen=True)
class TextSnippet:
    """One social-media text with its provenance and cleaned form."""

    id: str
    platform: str
    raw_text: str
    clean_text: str

    @property
    def char_len(self) -> int:
        return len(self.clean_text)


@dataclass
class Corpus:
    snippets: list[TextSnippet]
    provenance: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.snippets)

    def __iter__(self) -> Iterator[TextSnippet]:
        return iter(self.snippets)

    def ids(self) -> list[str]:
        return [s.id for s in self.snippets]


def _check_unique_ids(snippets: Sequence[TextSnippet]) -> None:
    seen: set[str] = set()
    for s in snippets:
        if s.id in seen:
            raise ValidationError(f"duplicate snippet id {s.id!r}")
        seen.add(s.id)


def _make_snippet(record: dict, where: str) -> TextSnippet:
    for key in ("id", "platform", "text"):
        if key not in record or record[key] is None:
            raise ValidationError(f"{where}: missing field {key!r}")
    platform = str(record["platform"]).strip().lower()
    if platform not in PLATFORMS:
        raise ValidationError(f"{where}: unknown platform {record['platform']!r}")
    text = str(record["text"])
    return TextSnippet(id=str(record["id"]), platform=platform, raw_text=text, clean_text=text)


def load_corpus(path: str | Path, format: str | None = None) -> Corpus:
    """Load a corpus from CSV (header id,platform,text) or JSONL.

    ``format`` defaults to the file suffix; clean_text starts equal to
    raw_text. Duplicate ids and malformed records are reported with the
    offending record number.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"corpus file not found: {path}")
    if format is None:
        format = "jsonl" if path.suffix.lower() in (".jsonl", ".ndjson") else "csv"
    if format not in ("csv", "jsonl"):
        raise ValidationError(f"unknown corpus format {format!r}")

    snippets: list[TextSnippet] = []
    if format == "csv":
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"id", "platform", "text"} <= set(reader.fieldnames):
                raise ValidationError(f"{path}: CSV header must contain id,platform,text")
            for i, row in enumerate(reader, start=1):
                snippets.append(_make_snippet(row, f"{path.name} record {i}"))
    else:
        with path.open(encoding="utf-8") as fh:
            for i, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValidationError(f"{path.name} record {i}: invalid JSON ({exc})") from exc
                if not isinstance(record, dict):
                    raise ValidationError(f"{path.name} record {i}: expected an object")
                snippets.append(_make_snippet(record, f"{path.name} record {i}"))

    _check_unique_ids(snippets)
    return Corpus(snippets, provenance={"source": str(path), "format": format, "filters": []})


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus as CSV with the input schema plus clean_text."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "platform", "text", "clean_text"])
        for s in corpus:
            writer.writerow([s.id, s.platform, s.raw_text, s.clean_text])


def clean_text(text: str, date_prefix: str | None = DEFAULT_DATE_PREFIX) -> str:
    """Replace links/usernames with sentinels and strip date artifacts.

    Total and idempotent: substitutions are re-applied until the text is a
    fixed point (the sentinels themselves never match the patterns).
    """
    date_re = re.compile(date_prefix) if date_prefix else None
    current = text
    while True:
        step = LINK_RE.sub(LINK_SENTINEL, current)
        step = USER_RE.sub(USER_SENTINEL, step)
        if date_re is not None:
            step = date_re.sub("", step)
        if step == current:
            return current
        current = step


def split_sentences(text: str, terminators: str = SENTENCE_TERMINATORS) -> list[tuple[str, str]]:
    """Split on terminator-followed-by-whitespace into (sentence, trailing_ws).

    Concatenating sentence + trailing_ws over all parts reconstructs the
    input exactly.
    """
    parts: list[tuple[str, str]] = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        if text[i] in terminators and (i + 1 == n or text[i + 1].isspace()):
            end = i + 1
            ws_end = end
            while ws_end < n and text[ws_end].isspace():
                ws_end += 1
            parts.append((text[start:end], text[end:ws_end]))
            start = ws_end
            i = ws_end
        else:
            i += 1
    if start < n:
        parts.append((text[start:], ""))
    return parts


def split_and_limit(snippet: TextSnippet, max_len: int = 280,
                    terminators: str = SENTENCE_TERMINATORS) -> list[TextSnippet]:
    """Split facebook snippets into sentences, then drop over-length texts.

    Children get ids ``parent_id#k`` (1-based); a facebook snippet that is a
    single sentence keeps its id. Over-length snippets are dropped, not
    truncated.
    """
    if max_len <= 0:
        raise ValidationError("max_len must be positive")
    if snippet.platform == "facebook":
        sentences = [s for s, _ in split_sentences(snippet.clean_text, terminators) if s]
        if len(sentences) > 1:
            children = [
                TextSnippet(id=f"{snippet.id}#{k}", platform=snippet.platform,
                            raw_text=s, clean_text=s)
                for k, s in enumerate(sentences, start=1)
            ]
            return [c for c in children if c.char_len <= max_len]
    return [snippet] if snippet.char_len <= max_len else []


def clean_corpus(corpus: Corpus, date_prefix: str | None = DEFAULT_DATE_PREFIX) -> Corpus:
    snippets = [
        TextSnippet(id=s.id, platform=s.platform, raw_text=s.raw_text,
                    clean_text=clean_text(s.raw_text, date_prefix))
        for s in corpus
    ]
    provenance = dict(corpus.provenance)
    provenance["filters"] = list(provenance.get("filters", [])) + [{"step": "clean"}]
    return Corpus(snippets, provenance)


def split_corpus(corpus: Corpus, max_len: int = 280,
                 terminators: str = SENTENCE_TERMINATORS) -> Corpus:
    snippets: list[TextSnippet] = []
    for s in corpus:
        snippets.extend(split_and_limit(s, max_len, terminators))
    _check_unique_ids(snippets)
    provenance = dict(corpus.provenance)
    provenance["filters"] = list(provenance.get("filters", [])) + [
        {"step": "split_and_limit", "max_len": max_len,
         "before": len(corpus), "after": len(snippets)}
    ]
    return Corpus(snippets, provenance)


def filter_language(corpus: Corpus, is_target_language: Callable[[str], bool]) -> Corpus:
    """Keep snippets for which the language predicate holds."""
    kept = [s for s in corpus if is_target_language(s.clean_text)]
    provenance = dict(corpus.provenance)
    provenance["filters"] = list(provenance.get("filters", [])) + [
        {"step": "filter_language", "before": len(corpus), "after": len(kept)}
    ]
    return Corpus(kept, provenance)
