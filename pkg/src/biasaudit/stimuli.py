"""Probe entities and counterfactual stimulus templates.

A stimulus is either a bare full name (raw_name condition) or a template
sentence with the ``[Name]`` placeholder substituted (neutral / political
conditions). A default dataset of 20 politicians and 16 sentence templates
ships with the package (see ``default_entities_path``).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

from .errors import ValidationError

DEFAULT_PARTIES = ("ZP", "TD", "K", "KO", "Left")
GENDER_MAN = 0
GENDER_WOMAN = 1

PLACEHOLDER = "[Name]"
TEMPLATE_KINDS = ("neutral", "political")
CONDITIONS = ("raw_name", "neutral", "political")


@dataclass
class Entity:
    """A probed politician with affiliation, trust, and mention statistics."""

    id: str
    full_name: str
    surname: str
    party: str
    gender: int
    mention_count: int
    trust_raw: list[tuple[int, float]] = field(default_factory=list)
    mean_mention_valence: float | None = None

    def __post_init__(self) -> None:
        if not self.surname or self.surname not in self.full_name:
            raise ValidationError(
                f"entity {self.id!r}: surname {self.surname!r} must be a substring of "
                f"full_name {self.full_name!r}")
        if self.gender not in (GENDER_MAN, GENDER_WOMAN):
            raise ValidationError(f"entity {self.id!r}: gender must be 0 (man) or 1 (woman)")
        if self.mention_count < 0:
            raise ValidationError(f"entity {self.id!r}: negative mention_count")
        if self.mean_mention_valence is not None and not 0 <= self.mean_mention_valence <= 100:
            raise ValidationError(f"entity {self.id!r}: mean_mention_valence outside [0, 100]")

    @property
    def trust(self) -> float | None:
        """Normalized trust in [0, 1], present iff survey responses exist."""
        if not self.trust_raw:
            return None
        return normalize_trust(self.trust_raw)


@dataclass(frozen=True)
class Template:
    id: str
    kind: str
    text: str

    def __post_init__(self) -> None:
        if self.kind not in TEMPLATE_KINDS:
            raise ValidationError(f"template {self.id!r}: kind must be one of {TEMPLATE_KINDS}")
        if self.text.count(PLACEHOLDER) != 1:
            raise ValidationError(
                f"template {self.id!r}: must contain exactly one {PLACEHOLDER} placeholder")


@dataclass(frozen=True)
class Stimulus:
    entity_id: str
    condition: str
    template_id: str | None
    text: str


def normalize_trust(responses: Sequence[tuple[int, float]]) -> float:
    """Mean of per-survey min-max normalized responses.

    Each response is (scale_size, value) with value already neutral-recoded
    (don't-know answers sit at the scale midpoint). The scale minimum maps
    to 0 and the maximum to 1, so 3- and 5-point surveys are comparable.
    """
    if not responses:
        raise ValidationError("normalize_trust: empty response list")
    normalized = []
    for scale_size, value in responses:
        if scale_size not in (3, 5):
            raise ValidationError(f"normalize_trust: unsupported scale size {scale_size}")
        if not 1 <= value <= scale_size:
            raise ValidationError(
                f"normalize_trust: value {value} outside 1..{scale_size}")
        normalized.append((value - 1) / (scale_size - 1))
    return sum(normalized) / len(normalized)


def parse_trust_surveys(raw: str) -> list[tuple[int, float]]:
    """Parse the entities-CSV trust column: ``scale:value`` pairs joined by ';'."""
    responses = []
    for part in raw.split(";"):
        part = part.strip()
        if not part:
            continue
        try:
            scale_str, value_str = part.split(":")
            responses.append((int(scale_str), float(value_str)))
        except ValueError as exc:
            raise ValidationError(f"cannot parse trust survey entry {part!r}") from exc
    return responses


def load_entities(path: str | Path, parties: Sequence[str] = DEFAULT_PARTIES) -> list[Entity]:
    """Load entities from CSV.

    Header: id,full_name,surname,party,gender,mention_count with optional
    trust_surveys and mean_mention_valence columns. Party labels outside
    ``parties`` are rejected.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"entities file not found: {path}")
    entities: list[Entity] = []
    seen: set[str] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"id", "full_name", "surname", "party", "gender", "mention_count"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValidationError(f"{path}: entities header must contain {sorted(required)}")
        for i, row in enumerate(reader, start=1):
            where = f"{path.name} row {i}"
            party = (row["party"] or "").strip()
            if party not in parties:
                raise ValidationError(f"{where}: unknown party {party!r} (declared: {list(parties)})")
            try:
                gender = int(row["gender"])
                mention_count = int(row["mention_count"])
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{where}: gender/mention_count must be integers") from exc
            trust_raw = parse_trust_surveys(row.get("trust_surveys") or "")
            mmv_raw = (row.get("mean_mention_valence") or "").strip()
            mean_mention_valence = float(mmv_raw) if mmv_raw else None
            entity = Entity(
                id=str(row["id"]).strip(),
                full_name=str(row["full_name"]).strip(),
                surname=str(row["surname"]).strip(),
                party=party,
                gender=gender,
                mention_count=mention_count,
                trust_raw=trust_raw,
                mean_mention_valence=mean_mention_valence,
            )
            if entity.id in seen:
                raise ValidationError(f"{where}: duplicate entity id {entity.id!r}")
            seen.add(entity.id)
            entities.append(entity)
    return entities


def load_templates(path: str | Path) -> list[Template]:
    """Load templates from CSV with header id,kind,text."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"templates file not found: {path}")
    templates: list[Template] = []
    seen: set[str] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"id", "kind", "text"} <= set(reader.fieldnames):
            raise ValidationError(f"{path}: templates header must contain id,kind,text")
        for i, row in enumerate(reader, start=1):
            template = Template(id=str(row["id"]).strip(), kind=(row["kind"] or "").strip(),
                                text=row["text"] or "")
            if template.id in seen:
                raise ValidationError(f"{path.name} row {i}: duplicate template id {template.id!r}")
            seen.add(template.id)
            templates.append(template)
    return templates


def default_entities_path() -> Path:
    return Path(str(resources.files("biasaudit").joinpath("data/entities.csv")))


def default_templates_path() -> Path:
    return Path(str(resources.files("biasaudit").joinpath("data/templates.csv")))


def render_stimulus(template: Template, entity: Entity) -> Stimulus:
    """Substitute the placeholder with the entity's full name."""
    if template.text.count(PLACEHOLDER) != 1:
        raise ValidationError(
            f"template {template.id!r}: must contain exactly one {PLACEHOLDER} placeholder")
    return Stimulus(
        entity_id=entity.id,
        condition=template.kind,
        template_id=template.id,
        text=template.text.replace(PLACEHOLDER, entity.full_name),
    )


def raw_name_stimulus(entity: Entity) -> Stimulus:
    return Stimulus(entity_id=entity.id, condition="raw_name", template_id=None,
                    text=entity.full_name)


def build_stimulus_matrix(entities: Sequence[Entity],
                          templates: Sequence[Template]) -> list[Stimulus]:
    """One raw-name stimulus per entity plus every entity x template pair.

    Order is deterministic: entities outer, raw name first, templates inner
    in input order. Count = len(entities) * (1 + len(templates)).
    """
    stimuli: list[Stimulus] = []
    for entity in entities:
        stimuli.append(raw_name_stimulus(entity))
        for template in templates:
            stimuli.append(render_stimulus(template, entity))
    return stimuli
