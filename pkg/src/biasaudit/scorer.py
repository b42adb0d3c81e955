"""Uniform valence-scorer contract plus built-in scorers.

A scorer maps texts to unit-interval valence scores. Built-ins cover
offline use (lexicon scorer), testing (constant, keyed-noise, synthetic
biased wrapper), and remote black-box models behind a thin HTTP contract.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

from .errors import ScorerError, ValidationError
from .lexicon import AffectiveLexicon, score_text_vad
from .pruning import MATCH_TOKEN_RE, MatcherConfig
from .stimuli import CONDITIONS


class Scorer(Protocol):
    def score(self, texts: Sequence[str]) -> list[float]: ...


def score_batch(scorer: Scorer, texts: Sequence[str]) -> list[float]:
    """Score texts through the uniform contract.

    Order-preserving, one score per text; enforces the [0, 1] range and the
    count contract on whatever backend sits behind ``scorer``.
    """
    if not texts:
        raise ValidationError("score_batch: texts must be non-empty")
    scores = scorer.score(list(texts))
    if len(scores) != len(texts):
        raise ScorerError(f"scorer returned {len(scores)} scores for {len(texts)} texts")
    for i, value in enumerate(scores):
        if not 0.0 <= value <= 1.0:
            raise ScorerError(f"score {value!r} at index {i} outside [0, 1]")
    return [float(v) for v in scores]


def rescale(value: float) -> float:
    """Map a unit-interval valence onto the 0-100 reporting scale."""
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"unit valence {value!r} outside [0, 1]")
    return value * 100.0


@dataclass(frozen=True)
class ConstantScorer:
    value: float = 0.5

    def score(self, texts: Sequence[str]) -> list[float]:
        return [self.value] * len(texts)


@dataclass(frozen=True)
class HashNoiseScorer:
    """Deterministic per-text noise around a center value.

    The text (plus key) is hashed, so a given text always gets the same
    score and scores are independent of evaluation order. Used as a
    party-agnostic base in synthetic end-to-end tests.
    """

    amplitude: float = 0.01
    key: int = 0
    center: float = 0.5

    def _unit(self, text: str) -> float:
        digest = hashlib.blake2b(text.encode("utf-8"),
                                 key=self.key.to_bytes(8, "big"),
                                 digest_size=8).digest()
        return int.from_bytes(digest, "big") / 2.0 ** 64

    def score(self, texts: Sequence[str]) -> list[float]:
        return [
            min(1.0, max(0.0, self.center + self.amplitude * (2.0 * self._unit(t) - 1.0)))
            for t in texts
        ]


class LexiconScorer:
    """Mean matched-word valence, mapped from the lexicon scale to [0, 1].

    Texts with no lexicon matches score the 0.5 midpoint ("no evidence").
    """

    def __init__(self, lexicon: AffectiveLexicon, stem=None):
        self.lexicon = lexicon
        self.stem = stem

    def score(self, texts: Sequence[str]) -> list[float]:
        lo, hi = self.lexicon.scale_min, self.lexicon.scale_max
        scores = []
        for text in texts:
            vad = score_text_vad(text, self.lexicon, self.stem)
            if vad.is_absent:
                scores.append(0.5)
            else:
                scores.append((vad.valence - lo) / (hi - lo))
        return scores


class SyntheticBiasedScorer:
    """Wrap a base scorer and shift scores for texts naming biased entities.

    Surname matching uses the same token rule as mention pruning; the shift
    is the sum of deltas for all distinct matched surnames, clamped to [0, 1].
    """

    def __init__(self, base: Scorer, bias: dict[str, float],
                 matcher: MatcherConfig = MatcherConfig()):
        for surname, delta in bias.items():
            if not -1.0 <= delta <= 1.0:
                raise ValidationError(f"bias delta for {surname!r} outside [-1, 1]")
        self.base = base
        self.bias = dict(bias)
        self.matcher = matcher

    def _delta(self, text: str) -> float:
        matched: set[str] = set()
        for token_match in MATCH_TOKEN_RE.finditer(text):
            token = token_match.group(0)
            for surname in self.bias:
                if surname not in matched and self.matcher.token_matches(token, surname):
                    matched.add(surname)
        return sum(self.bias[s] for s in matched)

    def score(self, texts: Sequence[str]) -> list[float]:
        base_scores = self.base.score(texts)
        return [
            min(1.0, max(0.0, s + self._delta(t)))
            for s, t in zip(base_scores, texts)
        ]


class RemoteScorer:
    """HTTP scorer: POST {"texts": [...]} to <endpoint>/score.

    Expects {"valence": [...]} with unit-interval floats, one per text.
    Requests go out in batches of at most ``batch_size``; transient HTTP
    failures are retried up to ``max_retries`` times per batch.
    """

    def __init__(self, endpoint: str, batch_size: int = 1000, timeout: float = 30.0,
                 max_retries: int = 2, retry_wait: float = 0.5):
        if batch_size <= 0:
            raise ValidationError("batch_size must be positive")
        self.endpoint = endpoint.rstrip("/")
        self.batch_size = batch_size
        self.timeout = timeout
        self.max_retries = max_retries
        self.retry_wait = retry_wait

    def _post(self, batch: list[str]) -> list[float]:
        payload = json.dumps({"texts": batch}).encode("utf-8")
        request = urllib.request.Request(
            f"{self.endpoint}/score", data=payload,
            headers={"Content-Type": "application/json"})
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                with urllib.request.urlopen(request, timeout=self.timeout) as response:
                    body = json.loads(response.read().decode("utf-8"))
                break
            except (urllib.error.URLError, OSError) as exc:
                last_error = exc
                if attempt < self.max_retries:
                    time.sleep(self.retry_wait)
        else:
            raise ScorerError(f"scorer backend unreachable after "
                              f"{self.max_retries + 1} attempts: {last_error}")
        if not isinstance(body, dict) or "valence" not in body:
            raise ScorerError('scorer response missing "valence" key')
        values = body["valence"]
        if not isinstance(values, list) or len(values) != len(batch):
            raise ScorerError(
                f"scorer returned {len(values) if isinstance(values, list) else 'non-list'} "
                f"values for {len(batch)} texts")
        out = []
        for i, v in enumerate(values):
            if not isinstance(v, (int, float)) or not 0.0 <= float(v) <= 1.0:
                raise ScorerError(f"remote score {v!r} at index {i} outside [0, 1]")
            out.append(float(v))
        return out

    def score(self, texts: Sequence[str]) -> list[float]:
        scores: list[float] = []
        for start in range(0, len(texts), self.batch_size):
            scores.extend(self._post(list(texts[start:start + self.batch_size])))
        return scores


@dataclass(frozen=True)
class ScoreRow:
    entity_id: str
    condition: str
    template_id: str | None
    valence100: float


@dataclass
class ScoreTable:
    """Per-stimulus valence rows with per-(entity, condition) aggregation."""

    rows: list[ScoreRow]

    def aggregate(self) -> dict[tuple[str, str], float]:
        sums: dict[tuple[str, str], list[float]] = {}
        for row in self.rows:
            sums.setdefault((row.entity_id, row.condition), []).append(row.valence100)
        return {key: sum(vals) / len(vals) for key, vals in sums.items()}

    def conditions(self) -> list[str]:
        present = {row.condition for row in self.rows}
        return [c for c in CONDITIONS if c in present]

    def entity_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for row in self.rows:
            seen.setdefault(row.entity_id, None)
        return list(seen)


def aggregate_scores(rows: Sequence[ScoreRow]) -> ScoreTable:
    """Validate coverage and wrap rows into a ScoreTable.

    Every entity present must have at least one row for every condition
    present; the per-(entity, condition) value is the plain template mean.
    """
    table = ScoreTable(list(rows))
    if not table.rows:
        raise ValidationError("aggregate_scores: no rows")
    covered = {(row.entity_id, row.condition) for row in table.rows}
    for entity_id in table.entity_ids():
        for condition in table.conditions():
            if (entity_id, condition) not in covered:
                raise ValidationError(
                    f"entity {entity_id!r} has no rows for condition {condition!r}")
    return table


def write_score_table(table: ScoreTable, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity_id", "condition", "template_id", "valence100"])
        for row in table.rows:
            writer.writerow([row.entity_id, row.condition, row.template_id or "",
                             repr(row.valence100)])


def read_score_table(path: str | Path) -> ScoreTable:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"score table not found: {path}")
    rows: list[ScoreRow] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"entity_id", "condition", "template_id", "valence100"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValidationError(f"{path}: score table header must contain {sorted(required)}")
        for i, row in enumerate(reader, start=1):
            condition = (row["condition"] or "").strip()
            if condition not in CONDITIONS:
                raise ValidationError(f"{path.name} row {i}: unknown condition {condition!r}")
            try:
                valence = float(row["valence100"])
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{path.name} row {i}: bad valence100") from exc
            rows.append(ScoreRow(
                entity_id=row["entity_id"],
                condition=condition,
                template_id=(row["template_id"] or None),
                valence100=valence,
            ))
    return aggregate_scores(rows)
