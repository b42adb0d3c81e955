"""End-to-end audit orchestration.

Probes one or two scorers with the stimulus matrix, fits the configured
regression battery per condition (weighted by mention counts, permutation
tested), and assembles a deterministic report: descriptives, score tables,
fitted models with QQ data, effect sizes, per-entity original-modified
differences, and the raw-name scatter figure.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .errors import ValidationError
from .lexicon import load_lexicon
from .pruning import MatcherConfig
from .report import figure_scatter
from .scorer import (ConstantScorer, HashNoiseScorer, LexiconScorer, RemoteScorer,
                     Scorer, ScoreRow, ScoreTable, SyntheticBiasedScorer,
                     aggregate_scores, rescale, score_batch)
from .seeding import derive_seed
from .stats import (DesignSpec, RatingsMatrix, RegressionResult, cohens_d,
                    descriptives, design_matrix, permutation_test, pooled_sd,
                    qq_data, wls_fit)
from .stimuli import (CONDITIONS, DEFAULT_PARTIES, Entity, build_stimulus_matrix,
                      default_entities_path, default_templates_path, load_entities,
                      load_templates)

SCORER_ORDER = ("original", "modified")

# The confound-comparison battery: adjusted R^2 picks the working model.
SELECTION_GROUP = (
    "affiliation",
    "affiliation_gender",
    "affiliation_gender_trust",
    "affiliation_gender_mentions",
    "affiliation_gender_trust_mentions",
)

PREDICTOR_FLAGS = ("affiliation", "gender", "trust", "mentions")


@dataclass(frozen=True)
class ModelSpec:
    name: str
    design: DesignSpec
    conditions: tuple[str, ...]


def default_battery(parties: Sequence[str] = DEFAULT_PARTIES,
                    reference_party: str = "ZP") -> list[ModelSpec]:
    """The shipped model battery.

    The affiliation+gender model runs on every condition; the confound
    variants and the confound-only models run on raw names.
    """
    def spec(**flags) -> DesignSpec:
        base = {"affiliation": False, "gender": False, "trust": False, "mentions": False}
        base.update(flags)
        return DesignSpec(reference_party=reference_party, parties=tuple(parties), **base)

    raw = ("raw_name",)
    return [
        ModelSpec("affiliation_gender", spec(affiliation=True, gender=True),
                  ("raw_name", "neutral", "political")),
        ModelSpec("affiliation", spec(affiliation=True), raw),
        ModelSpec("affiliation_gender_trust",
                  spec(affiliation=True, gender=True, trust=True), raw),
        ModelSpec("affiliation_gender_mentions",
                  spec(affiliation=True, gender=True, mentions=True), raw),
        ModelSpec("affiliation_gender_trust_mentions",
                  spec(affiliation=True, gender=True, trust=True, mentions=True), raw),
        ModelSpec("gender_only", spec(gender=True), raw),
        ModelSpec("trust_only", spec(trust=True), raw),
        ModelSpec("mentions_only", spec(mentions=True), raw),
    ]


@dataclass(frozen=True)
class ScorerSpec:
    kind: str
    params: dict

    def describe(self) -> dict:
        safe = {k: v for k, v in self.params.items() if k != "base"}
        if "base" in self.params:
            safe["base"] = self.params["base"].describe()
        return {"kind": self.kind, **safe}


def build_scorer(spec: ScorerSpec) -> Scorer:
    kind = spec.kind
    params = spec.params
    if kind == "constant":
        return ConstantScorer(value=float(params.get("value", 0.5)))
    if kind == "hash":
        return HashNoiseScorer(amplitude=float(params.get("amplitude", 0.01)),
                               key=int(params.get("key", 0)),
                               center=float(params.get("center", 0.5)))
    if kind == "lexicon":
        if "path" not in params:
            raise ValidationError("lexicon scorer needs a 'path'")
        lex = load_lexicon(params["path"],
                           scale_min=float(params.get("scale_min", 1.0)),
                           scale_max=float(params.get("scale_max", 9.0)))
        return LexiconScorer(lex)
    if kind == "biased":
        if "base" not in params or "bias" not in params:
            raise ValidationError("biased scorer needs 'base' and 'bias'")
        base = build_scorer(params["base"])
        bias = {str(k): float(v) for k, v in params["bias"].items()}
        matcher = MatcherConfig(suffix_trim=int(params.get("suffix_trim", 0)))
        return SyntheticBiasedScorer(base, bias, matcher)
    if kind == "remote":
        if "endpoint" not in params:
            raise ValidationError("remote scorer needs an 'endpoint'")
        return RemoteScorer(endpoint=str(params["endpoint"]),
                            batch_size=int(params.get("batch_size", 1000)),
                            timeout=float(params.get("timeout", 30.0)),
                            max_retries=int(params.get("max_retries", 2)))
    raise ValidationError(f"unknown scorer kind {kind!r}")


@dataclass
class AuditConfig:
    seed: int
    entities_path: Path = field(default_factory=default_entities_path)
    templates_path: Path = field(default_factory=default_templates_path)
    scorers: dict[str, ScorerSpec] = field(default_factory=dict)
    models: list[ModelSpec] | None = None
    n_perm: int = 100_000
    exhaustive: bool = False
    outdir: Path = Path("audit_out")
    parties: tuple[str, ...] = DEFAULT_PARTIES
    reference_party: str = "ZP"

    def __post_init__(self) -> None:
        if "original" not in self.scorers:
            raise ValidationError("audit needs at least an 'original' scorer")
        unknown = set(self.scorers) - set(SCORER_ORDER)
        if unknown:
            raise ValidationError(f"unknown scorer roles {sorted(unknown)}; "
                                  f"use {list(SCORER_ORDER)}")
        if self.reference_party not in self.parties:
            raise ValidationError(
                f"reference party {self.reference_party!r} not in parties {list(self.parties)}")
        if self.models is None:
            self.models = default_battery(self.parties, self.reference_party)


def _parse_scorer_table(table: dict, where: str) -> ScorerSpec:
    if "kind" not in table:
        raise ValidationError(f"{where}: scorer spec needs a 'kind'")
    params = {k: v for k, v in table.items() if k != "kind"}
    if "base" in params:
        if not isinstance(params["base"], dict):
            raise ValidationError(f"{where}: 'base' must be a scorer table")
        params["base"] = _parse_scorer_table(params["base"], f"{where}.base")
    return ScorerSpec(kind=str(table["kind"]), params=params)


def _parse_model_table(table: dict, parties: tuple[str, ...], reference: str,
                       where: str) -> ModelSpec:
    name = table.get("name")
    if not name:
        raise ValidationError(f"{where}: model needs a 'name'")
    predictors = table.get("predictors", [])
    unknown = [p for p in predictors if p not in PREDICTOR_FLAGS]
    if unknown:
        raise ValidationError(f"{where}: unknown predictors {unknown}; "
                              f"valid: {list(PREDICTOR_FLAGS)}")
    conditions = tuple(table.get("conditions", ["raw_name"]))
    bad = [c for c in conditions if c not in CONDITIONS]
    if bad:
        raise ValidationError(f"{where}: unknown conditions {bad}; valid: {list(CONDITIONS)}")
    design = DesignSpec(
        reference_party=reference, parties=parties,
        affiliation="affiliation" in predictors,
        gender="gender" in predictors,
        trust="trust" in predictors,
        mentions="mentions" in predictors,
    )
    return ModelSpec(name=str(name), design=design, conditions=conditions)


def load_audit_config(path: str | Path, seed: int, outdir: str | None = None,
                      n_perm: int | None = None) -> AuditConfig:
    """Load a TOML config file; CLI flags override file values."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: invalid TOML ({exc})") from exc

    audit_table = raw.get("audit", {})
    parties = tuple(audit_table.get("parties", DEFAULT_PARTIES))
    reference = str(audit_table.get("reference_party", "ZP"))

    scorers = {}
    for role, table in raw.get("scorers", {}).items():
        if not isinstance(table, dict):
            raise ValidationError(f"scorers.{role}: expected a table")
        scorers[role] = _parse_scorer_table(table, f"scorers.{role}")

    models = None
    if "models" in raw:
        models = [_parse_model_table(t, parties, reference, f"models[{i}]")
                  for i, t in enumerate(raw["models"])]

    base_dir = path.parent

    def resolve(p: str | None, default: Path) -> Path:
        if p is None:
            return default
        candidate = Path(p)
        return candidate if candidate.is_absolute() else base_dir / candidate

    return AuditConfig(
        seed=seed,
        entities_path=resolve(audit_table.get("entities"), default_entities_path()),
        templates_path=resolve(audit_table.get("templates"), default_templates_path()),
        scorers=scorers,
        models=models,
        n_perm=int(n_perm if n_perm is not None else audit_table.get("n_perm", 100_000)),
        exhaustive=bool(audit_table.get("exhaustive", False)),
        outdir=Path(outdir if outdir is not None else audit_table.get("outdir", "audit_out")),
        parties=parties,
        reference_party=reference,
    )


def probe_scorer(entities: Sequence[Entity], templates, scorer: Scorer) -> ScoreTable:
    """Score the full stimulus matrix and return the per-stimulus table."""
    stimuli = build_stimulus_matrix(entities, templates)
    unit_scores = score_batch(scorer, [s.text for s in stimuli])
    rows = [
        ScoreRow(entity_id=s.entity_id, condition=s.condition,
                 template_id=s.template_id, valence100=rescale(v))
        for s, v in zip(stimuli, unit_scores)
    ]
    return aggregate_scores(rows)


def valence_diff(original: ScoreTable, modified: ScoreTable) -> dict[tuple[str, str], float]:
    """Per-(entity, condition) original minus modified valence (0-100)."""
    agg_orig = original.aggregate()
    agg_mod = modified.aggregate()
    if set(agg_orig) != set(agg_mod):
        only_orig = sorted(set(agg_orig) - set(agg_mod))
        only_mod = sorted(set(agg_mod) - set(agg_orig))
        raise ValidationError(
            f"score tables cover different (entity, condition) sets; "
            f"only in original: {only_orig[:5]}, only in modified: {only_mod[:5]}")
    return {key: agg_orig[key] - agg_mod[key] for key in agg_orig}


def select_model(results: Sequence[RegressionResult]) -> RegressionResult:
    """Pick the result with maximal adjusted R^2.

    Ties break toward fewer columns, then earlier position.
    """
    if not results:
        raise ValidationError("select_model: empty result list")
    best = results[0]
    for candidate in results[1:]:
        if candidate.adj_r2 > best.adj_r2 or (
                candidate.adj_r2 == best.adj_r2 and len(candidate.columns) < len(best.columns)):
            best = candidate
    return best


@dataclass
class AuditReport:
    """Full audit output; to_dict() is the report.json payload."""

    config: dict
    entities: list[dict]
    descriptives: dict
    score_rows: dict[str, list]
    aggregated: dict
    models: list[dict]
    effect_sizes: dict
    diffs: dict | None
    figure1: list[dict]
    selected_model: str | None

    def to_dict(self) -> dict:
        return {
            "tool": {"name": "biasaudit", "version": __version__},
            "config": self.config,
            "entities": self.entities,
            "descriptives": self.descriptives,
            "score_rows": self.score_rows,
            "aggregated": self.aggregated,
            "models": self.models,
            "effect_sizes": self.effect_sizes,
            "valence_diff": self.diffs,
            "figure1": self.figure1,
            "selected_model": self.selected_model,
        }


def _effect_size(entities: Sequence[Entity], values: dict[str, float],
                 reference_party: str) -> dict | None:
    """Cohen's d for non-reference vs reference entities on one condition."""
    ref = [values[e.id] for e in entities if e.party == reference_party and e.id in values]
    rest = [values[e.id] for e in entities if e.party != reference_party and e.id in values]
    if len(ref) < 2 or len(rest) < 2:
        return None
    difference = sum(rest) / len(rest) - sum(ref) / len(ref)
    sd = pooled_sd(ref, rest)
    if sd == 0:
        return {"difference": difference, "pooled_sd": 0.0, "cohens_d": None}
    return {"difference": difference, "pooled_sd": sd,
            "cohens_d": cohens_d(difference, sd)}


def run_audit(config: AuditConfig) -> AuditReport:
    """Run the full audit pipeline; deterministic for a fixed config and seed."""
    entities = load_entities(config.entities_path, parties=config.parties)
    templates = load_templates(config.templates_path)

    tables: dict[str, ScoreTable] = {}
    for role in SCORER_ORDER:
        if role in config.scorers:
            scorer = build_scorer(config.scorers[role])
            tables[role] = probe_scorer(entities, templates, scorer)

    conditions = tables["original"].conditions()
    aggregated = {role: table.aggregate() for role, table in tables.items()}

    value_maps: dict[str, dict[tuple[str, str], float]] = dict(aggregated)
    diffs = None
    if "modified" in tables:
        diffs = valence_diff(tables["original"], tables["modified"])
        value_maps["diff"] = diffs

    desc = {}
    for role, values in value_maps.items():
        desc[role] = {}
        for condition in conditions:
            condition_values = [values[(e.id, condition)] for e in entities]
            desc[role][condition] = descriptives(condition_values).to_dict()

    model_entries: list[dict] = []
    fitted: dict[tuple[str, str, str], RegressionResult] = {}
    for spec in config.models:
        missing = [c for c in spec.conditions if c not in conditions]
        if missing:
            raise ValidationError(
                f"model {spec.name!r} requests conditions {missing} absent from the "
                f"template set (available: {conditions})")
        dm = design_matrix(entities, spec.design)
        for condition in spec.conditions:
            for role in value_maps:
                values = value_maps[role]
                y = [values[(eid, condition)] for eid in dm.entity_ids]
                entry = {"model": spec.name, "condition": condition, "scorer": role}
                if len(set(y)) == 1:
                    entry.update({"degenerate": True,
                                  "reason": "constant response across entities",
                                  "n": len(y)})
                    model_entries.append(entry)
                    continue
                fit = wls_fit(dm.X, y, dm.weights, dm.columns)
                fit.permutation_p = permutation_test(
                    dm.X, y, dm.weights, n_perm=config.n_perm,
                    seed=derive_seed(config.seed, "perm", role, spec.name, condition),
                    exhaustive=config.exhaustive)
                entry.update(fit.to_dict())
                entry["qq"] = ([[t, o] for t, o in qq_data(fit.residuals, fit.residual_se)]
                               if fit.residual_se > 0 else None)
                model_entries.append(entry)
                fitted[(spec.name, condition, role)] = fit

    selected_name = None
    candidates = [(spec.name, fitted[(spec.name, "raw_name", "original")])
                  for spec in config.models
                  if spec.name in SELECTION_GROUP
                  and (spec.name, "raw_name", "original") in fitted]
    if candidates:
        best = select_model([fit for _, fit in candidates])
        selected_name = next(name for name, fit in candidates if fit is best)

    effect_sizes = {}
    for role, values in value_maps.items():
        effect_sizes[role] = {}
        for condition in conditions:
            per_entity = {e.id: values[(e.id, condition)] for e in entities}
            effect_sizes[role][condition] = _effect_size(
                entities, per_entity, config.reference_party)

    figure = figure_scatter(
        {e.id: aggregated["original"][(e.id, "raw_name")] for e in entities},
        entities, config.parties)

    config_echo = {
        "entities": str(config.entities_path),
        "templates": str(config.templates_path),
        "scorers": {role: spec.describe() for role, spec in config.scorers.items()},
        "models": [{"name": m.name, "columns": m.design.columns(),
                    "conditions": list(m.conditions)} for m in config.models],
        "n_perm": config.n_perm,
        "exhaustive": config.exhaustive,
        "seed": config.seed,
        "parties": list(config.parties),
        "reference_party": config.reference_party,
    }
    entities_echo = [{
        "id": e.id, "full_name": e.full_name, "surname": e.surname, "party": e.party,
        "gender": e.gender, "mention_count": e.mention_count,
        "trust": e.trust, "mean_mention_valence": e.mean_mention_valence,
    } for e in entities]
    score_rows = {
        role: [[r.entity_id, r.condition, r.template_id, r.valence100] for r in table.rows]
        for role, table in tables.items()
    }
    aggregated_echo = {
        role: {condition: {e.id: values[(e.id, condition)] for e in entities}
               for condition in conditions}
        for role, values in value_maps.items()
    }
    diffs_echo = None
    if diffs is not None:
        diffs_echo = {condition: {e.id: diffs[(e.id, condition)] for e in entities}
                      for condition in conditions}

    return AuditReport(
        config=config_echo,
        entities=entities_echo,
        descriptives=desc,
        score_rows=score_rows,
        aggregated=aggregated_echo,
        models=model_entries,
        effect_sizes=effect_sizes,
        diffs=diffs_echo,
        figure1=figure,
        selected_model=selected_name,
    )


def load_annotations_csv(path: str | Path) -> RatingsMatrix:
    """Annotations CSV ``text_id,rater_id,valence`` -> per-text rating groups."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"annotations file not found: {path}")
    records: list[tuple[str, float]] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"text_id", "rater_id", "valence"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValidationError(f"{path}: annotations header must contain {sorted(required)}")
        for i, row in enumerate(reader, start=1):
            try:
                rating = float(row["valence"])
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{path.name} row {i}: bad valence {row['valence']!r}") from exc
            records.append((str(row["text_id"]), rating))
    if not records:
        raise ValidationError(f"{path}: no annotation records")
    return RatingsMatrix.from_long(records)
