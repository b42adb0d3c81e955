"""Entity-mention detection, review, and corpus pruning.

Polish surnames inflect ("Tusk" -> "Tuska", "Tuskowi"), so the default
matcher accepts any token that begins with the surname stem. Matches start
as candidates; only confirmed mentions are pruned, with a CSV round trip
for human review or an auto-confirm shortcut for headless runs.
"""

from __future__ import annotations

import csv
import re
import statistics
import unicodedata
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .corpus import Corpus
from .errors import ValidationError
from .stimuli import Entity

# Tokens may contain hyphens so double-barrelled surnames stay whole.
MATCH_TOKEN_RE = re.compile(r"\w+(?:-\w+)*")

STATUSES = ("candidate", "confirmed", "rejected")


@dataclass(frozen=True)
class MatcherConfig:
    """Surname matching rule.

    suffix_trim removes that many trailing characters from the surname to
    form the stem (0 keeps the full surname); exact=True requires the whole
    token to equal the surname instead of a prefix match.
    """

    suffix_trim: int = 0
    exact: bool = False
    case_insensitive: bool = True
    unicode_normalize: bool = True

    def fold(self, text: str) -> str:
        if self.unicode_normalize:
            text = unicodedata.normalize("NFC", text)
        if self.case_insensitive:
            text = text.casefold()
        return text

    def stem(self, surname: str) -> str:
        if self.suffix_trim < 0:
            raise ValidationError("suffix_trim must be non-negative")
        stem = surname[: len(surname) - self.suffix_trim] if self.suffix_trim else surname
        if not stem:
            raise ValidationError(f"suffix_trim {self.suffix_trim} consumes surname {surname!r}")
        return self.fold(stem)

    def token_matches(self, token: str, surname: str) -> bool:
        folded = self.fold(token)
        if self.exact:
            return folded == self.fold(surname)
        return folded.startswith(self.stem(surname))


@dataclass(frozen=True)
class Mention:
    entity_id: str
    snippet_id: str
    matched_token: str
    byte_span: tuple[int, int]
    status: str = "candidate"


@dataclass
class MentionIndex:
    """Per-entity mention lists over one corpus."""

    by_entity: dict[str, list[Mention]]

    def entity_ids(self) -> list[str]:
        return list(self.by_entity.keys())

    def all_mentions(self) -> list[Mention]:
        return [m for mentions in self.by_entity.values() for m in mentions]

    def confirmed_snippet_ids(self) -> set[str]:
        return {m.snippet_id for m in self.all_mentions() if m.status == "confirmed"}


@dataclass
class MentionStats:
    per_entity: dict[str, int]
    total: int
    min: int
    max: int
    median: float

    def to_dict(self) -> dict:
        return {"per_entity": dict(self.per_entity), "total": self.total,
                "min": self.min, "max": self.max, "median": self.median}


def _byte_span(text: str, start: int, end: int) -> tuple[int, int]:
    start_b = len(text[:start].encode("utf-8"))
    return (start_b, start_b + len(text[start:end].encode("utf-8")))


def detect_mentions(corpus: Corpus, entities: Sequence[Entity],
                    matcher: MatcherConfig = MatcherConfig()) -> MentionIndex:
    """Scan clean_text tokens for surname matches; all hits are candidates."""
    for entity in entities:
        if not entity.surname:
            raise ValidationError(f"entity {entity.id!r} has an empty surname")
    by_entity: dict[str, list[Mention]] = {e.id: [] for e in entities}
    stems = [(e, matcher.stem(e.surname) if not matcher.exact else None) for e in entities]
    for snippet in corpus:
        text = snippet.clean_text
        for token_match in MATCH_TOKEN_RE.finditer(text):
            token = token_match.group(0)
            folded = matcher.fold(token)
            for entity, stem in stems:
                hit = (folded == matcher.fold(entity.surname)) if matcher.exact \
                    else folded.startswith(stem)
                if hit:
                    by_entity[entity.id].append(Mention(
                        entity_id=entity.id,
                        snippet_id=snippet.id,
                        matched_token=token,
                        byte_span=_byte_span(text, token_match.start(), token_match.end()),
                    ))
    return MentionIndex(by_entity)


def auto_confirm(index: MentionIndex) -> MentionIndex:
    """Promote every candidate to confirmed (for headless runs and tests)."""
    return MentionIndex({
        entity_id: [replace(m, status="confirmed") if m.status == "candidate" else m
                    for m in mentions]
        for entity_id, mentions in index.by_entity.items()
    })


def _context(corpus_texts: dict[str, str], mention: Mention, width: int = 40) -> str:
    text = corpus_texts.get(mention.snippet_id, "")
    raw = text.encode("utf-8")
    start, end = mention.byte_span
    lo = max(0, start - width)
    hi = min(len(raw), end + width)
    return raw[lo:hi].decode("utf-8", errors="ignore")


def export_review(index: MentionIndex, corpus: Corpus, path: str | Path) -> None:
    """Write the review CSV: entity_id,snippet_id,matched_token,context,status."""
    texts = {s.id: s.clean_text for s in corpus}
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity_id", "snippet_id", "matched_token", "context", "status"])
        for entity_id in index.by_entity:
            for m in index.by_entity[entity_id]:
                writer.writerow([m.entity_id, m.snippet_id, m.matched_token,
                                 _context(texts, m), m.status])


def import_review(index: MentionIndex, path: str | Path) -> MentionIndex:
    """Apply statuses from an edited review CSV.

    Rows are keyed by (entity_id, snippet_id, matched_token); a status
    applies to every mention with that key. Unknown entities, snippets, or
    statuses are rejected.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"review file not found: {path}")
    known = {(m.entity_id, m.snippet_id, m.matched_token) for m in index.all_mentions()}
    updates: dict[tuple[str, str, str], str] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"entity_id", "snippet_id", "matched_token", "status"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValidationError(f"{path}: review header must contain {sorted(required)}")
        for i, row in enumerate(reader, start=1):
            status = (row["status"] or "").strip()
            if status not in STATUSES:
                raise ValidationError(f"{path.name} row {i}: unknown status {status!r}")
            key = (row["entity_id"], row["snippet_id"], row["matched_token"])
            if key not in known:
                raise ValidationError(
                    f"{path.name} row {i}: no mention of entity {key[0]!r} in snippet {key[1]!r} "
                    f"with token {key[2]!r}")
            updates[key] = status
    return MentionIndex({
        entity_id: [
            replace(m, status=updates.get((m.entity_id, m.snippet_id, m.matched_token), m.status))
            for m in mentions
        ]
        for entity_id, mentions in index.by_entity.items()
    })


def prune(corpus: Corpus, index: MentionIndex) -> Corpus:
    """Drop every snippet that has at least one confirmed mention."""
    confirmed = index.confirmed_snippet_ids()
    kept = [s for s in corpus if s.id not in confirmed]
    removed = len(corpus) - len(kept)
    provenance = dict(corpus.provenance)
    provenance["filters"] = list(provenance.get("filters", [])) + [
        {"step": "prune", "removed": removed,
         "fraction": removed / len(corpus) if len(corpus) else 0.0}
    ]
    return Corpus(kept, provenance)


def mention_stats(index: MentionIndex) -> MentionStats:
    """Confirmed-mention counts per entity plus min/max/median aggregates.

    The aggregate total counts distinct snippets (a snippet naming two
    entities is one pruned text); per-entity counts may overlap.
    """
    per_entity = {
        entity_id: sum(1 for m in mentions if m.status == "confirmed")
        for entity_id, mentions in index.by_entity.items()
    }
    counts = list(per_entity.values())
    if not counts:
        return MentionStats({}, 0, 0, 0, 0.0)
    return MentionStats(
        per_entity=per_entity,
        total=len(index.confirmed_snippet_ids()),
        min=min(counts),
        max=max(counts),
        median=float(statistics.median(counts)),
    )


def mean_mention_valence(annotations: dict[str, float], index: MentionIndex,
                         scale_max: float = 4.0) -> dict[str, float]:
    """Per-entity mean annotated valence of confirmed snippets, on 0-100.

    ``annotations`` maps snippet id to its mean rating on the 0..scale_max
    annotation scale. Entities with no confirmed mentions are omitted.
    """
    result: dict[str, float] = {}
    for entity_id, mentions in index.by_entity.items():
        snippet_ids = sorted({m.snippet_id for m in mentions if m.status == "confirmed"})
        if not snippet_ids:
            continue
        values = []
        for sid in snippet_ids:
            if sid not in annotations:
                raise ValidationError(
                    f"confirmed snippet {sid!r} (entity {entity_id!r}) lacks an annotation")
            rating = annotations[sid]
            if not 0 <= rating <= scale_max:
                raise ValidationError(
                    f"annotation for snippet {sid!r} outside [0, {scale_max}]")
            values.append(rating / scale_max * 100.0)
        result[entity_id] = sum(values) / len(values)
    return result
