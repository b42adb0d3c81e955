"""Affective-norms lexicon scoring and emotion-weighted corpus sampling."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import Corpus
from .errors import ValidationError

TOKEN_RE = re.compile(r"\w+")


@dataclass
class AffectiveLexicon:
    """word -> (valence, arousal, dominance) on the lexicon's native scale."""

    entries: dict[str, tuple[float, float, float]]
    scale_min: float = 1.0
    scale_max: float = 9.0

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class VadScore:
    valence: float | None
    arousal: float | None
    dominance: float | None
    matched_words: int

    @property
    def is_absent(self) -> bool:
        return self.matched_words == 0


def load_lexicon(path: str | Path, scale_min: float = 1.0, scale_max: float = 9.0) -> AffectiveLexicon:
    """Load a CSV lexicon with header word,valence,arousal,dominance.

    Word keys are case-folded; duplicates and out-of-range norms are
    rejected with the offending row number.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"lexicon file not found: {path}")
    entries: dict[str, tuple[float, float, float]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"word", "valence", "arousal", "dominance"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValidationError(f"{path}: lexicon header must contain word,valence,arousal,dominance")
        for i, row in enumerate(reader, start=1):
            word = (row["word"] or "").strip().casefold()
            if not word:
                raise ValidationError(f"{path.name} row {i}: empty word")
            if word in entries:
                raise ValidationError(f"{path.name} row {i}: duplicate word {word!r}")
            dims = []
            for key in ("valence", "arousal", "dominance"):
                try:
                    value = float(row[key])
                except (TypeError, ValueError) as exc:
                    raise ValidationError(f"{path.name} row {i}: cannot parse {key}={row[key]!r}") from exc
                if not scale_min <= value <= scale_max:
                    raise ValidationError(
                        f"{path.name} row {i}: {key}={value} outside [{scale_min}, {scale_max}]")
                dims.append(value)
            entries[word] = (dims[0], dims[1], dims[2])
    return AffectiveLexicon(entries, scale_min, scale_max)


def tokenize(text: str) -> list[str]:
    return [t.casefold() for t in TOKEN_RE.findall(text)]


def score_text_vad(text: str, lexicon: AffectiveLexicon,
                   stem: Callable[[str], str] | None = None) -> VadScore:
    """Mean valence/arousal/dominance over lexicon-matched tokens.

    Bag-of-words: token order is irrelevant, repeated tokens count each
    time. No matches yields an absent score, never a silent zero.
    """
    matched: list[tuple[float, float, float]] = []
    for token in tokenize(text):
        if stem is not None:
            token = stem(token)
        norms = lexicon.entries.get(token)
        if norms is not None:
            matched.append(norms)
    if not matched:
        return VadScore(None, None, None, 0)
    k = len(matched)
    return VadScore(
        valence=sum(m[0] for m in matched) / k,
        arousal=sum(m[1] for m in matched) / k,
        dominance=sum(m[2] for m in matched) / k,
        matched_words=k,
    )


def emotional_weight(score: VadScore) -> float:
    """Sampling weight: valence + arousal + dominance, 0 for absent scores."""
    if score.is_absent:
        return 0.0
    return score.valence + score.arousal + score.dominance


def weighted_sample(corpus: Corpus, weights: Sequence[float], n_weighted: int,
                    n_unweighted: int, seed: int, top_k: bool = False) -> Corpus:
    """Two-stage sample: weight-proportional draws, then uniform draws.

    Stage one draws n_weighted snippets without replacement with probability
    proportional to weight (exponential-keys method); stage two draws
    n_unweighted uniformly from the remainder. ``top_k=True`` replaces stage
    one with the deterministic top-n_weighted by weight. Output preserves
    corpus order; a fixed seed gives an identical sample.
    """
    n = len(corpus)
    if len(weights) != n:
        raise ValidationError(f"weights length {len(weights)} != corpus size {n}")
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValidationError("weights must be non-negative")
    if n_weighted < 0 or n_unweighted < 0:
        raise ValidationError("sample sizes must be non-negative")
    if n_weighted + n_unweighted > n:
        raise ValidationError(f"requested {n_weighted}+{n_unweighted} from corpus of {n}")
    positive = int(np.count_nonzero(w))
    if n_weighted > 0 and positive == 0:
        raise ValidationError("all weights are zero but n_weighted > 0")
    if n_weighted > positive:
        raise ValidationError(f"only {positive} positive weights for n_weighted={n_weighted}")

    rng = np.random.default_rng(seed)
    if top_k:
        order = np.lexsort((np.arange(n), -w))
        weighted_idx = np.sort(order[:n_weighted])
    else:
        keys = np.full(n, np.inf)
        draws = rng.exponential(size=n)
        nz = w > 0
        keys[nz] = draws[nz] / w[nz]
        order = np.lexsort((np.arange(n), keys))
        weighted_idx = np.sort(order[:n_weighted])

    chosen = set(weighted_idx.tolist())
    remaining = np.array([i for i in range(n) if i not in chosen], dtype=int)
    if n_unweighted > 0:
        uniform_idx = rng.choice(remaining, size=n_unweighted, replace=False)
    else:
        uniform_idx = np.array([], dtype=int)
    chosen_uniform = set(int(i) for i in uniform_idx)

    snippets = []
    stages = {}
    for i, s in enumerate(corpus):
        if i in chosen:
            snippets.append(s)
            stages[s.id] = "weighted"
        elif i in chosen_uniform:
            snippets.append(s)
            stages[s.id] = "unweighted"
    provenance = dict(corpus.provenance)
    provenance["filters"] = list(provenance.get("filters", [])) + [
        {"step": "weighted_sample", "n_weighted": n_weighted,
         "n_unweighted": n_unweighted, "seed": seed, "top_k": top_k}
    ]
    provenance["sample_stages"] = stages
    return Corpus(snippets, provenance)


def write_sample_manifest(corpus: Corpus, weights_by_id: dict[str, float],
                          path: str | Path) -> None:
    """Manifest CSV ``id,weight,stage`` for a sampled corpus."""
    stages = corpus.provenance.get("sample_stages", {})
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "weight", "stage"])
        for s in corpus:
            writer.writerow([s.id, repr(weights_by_id.get(s.id, 0.0)), stages.get(s.id, "")])
