"""Domain types for scientific IE records and the schema / factual constraint checks.

Records are immutable after construction and all functions here are pure, so
everything in this module is safe to share across threads or processes.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any

from .errors import UnknownTypeError

_WS_RUN = re.compile(r"\s+")


def normalize_span(raw: str) -> str:
    """Trim and collapse internal whitespace runs to single spaces.

    Case is preserved: abbreviations such as "20NG" are case-meaningful, so
    matching stays case-sensitive by default. Determiners and other tokens are
    never stripped; only whitespace is touched.
    """
    return _WS_RUN.sub(" ", raw.strip())


class EntityType(str, Enum):
    """Closed vocabulary of entity types."""

    DATASET = "Dataset"
    TASK = "Task"
    METHOD = "Method"

    @classmethod
    def parse(cls, raw: str) -> "EntityType":
        try:
            return cls(raw)
        except ValueError:
            raise UnknownTypeError(f"unknown entity type: {raw!r}") from None

    def render(self) -> str:
        return self.value


class RelationType(str, Enum):
    """Closed vocabulary of relation types (9 members)."""

    PART_OF = "Part-Of"
    SUBCLASS_OF = "SubClass-Of"
    SUBTASK_OF = "SubTask-Of"
    BENCHMARK_FOR = "Benchmark-For"
    TRAINED_WITH = "Trained-With"
    EVALUATED_WITH = "Evaluated-With"
    SYNONYM_OF = "Synonym-Of"
    USED_FOR = "Used-For"
    COMPARE_WITH = "Compare-With"

    @classmethod
    def parse(cls, raw: str) -> "RelationType":
        try:
            return cls(raw)
        except ValueError:
            raise UnknownTypeError(f"unknown relation type: {raw!r}") from None

    def render(self) -> str:
        return self.value


@dataclass(frozen=True)
class EntityMention:
    """A typed entity span; the surface is normalized at construction."""

    surface: str
    etype: EntityType

    def __post_init__(self):
        norm = normalize_span(self.surface)
        if not norm:
            raise ValueError("entity surface is empty after normalization")
        object.__setattr__(self, "surface", norm)


@dataclass(frozen=True)
class RelationTriple:
    """A directed relation between two surfaces.

    Argument entity types are present on gold triples (resolved from the gold
    entity list at load time) and optional on predictions.
    """

    subject: str
    relation: RelationType
    object: str
    subject_type: EntityType | None = None
    object_type: EntityType | None = None

    def __post_init__(self):
        subj = normalize_span(self.subject)
        obj = normalize_span(self.object)
        if not subj or not obj:
            raise ValueError("relation subject/object must be non-empty")
        object.__setattr__(self, "subject", subj)
        object.__setattr__(self, "object", obj)

    def core(self) -> tuple[str, RelationType, str]:
        """The untyped (subject, relation, object) key used for boundary scoring."""
        return (self.subject, self.relation, self.object)


@dataclass(frozen=True)
class ExtractionRecord:
    """One sentence with its entity mentions and relation triples.

    Duplicates are removed at construction (set semantics), so repeated
    predictions cannot inflate recall.
    """

    id: str
    sentence: str
    entities: frozenset[EntityMention] = field(default_factory=frozenset)
    relations: frozenset[RelationTriple] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "entities", frozenset(self.entities))
        object.__setattr__(self, "relations", frozenset(self.relations))

    def sorted_entities(self) -> list[EntityMention]:
        """Entities in the canonical (surface, type) order used for serialization."""
        return sorted(self.entities, key=lambda e: (e.surface, e.etype.value))

    def sorted_relations(self) -> list[RelationTriple]:
        """Relations in the canonical (subject, relation, object) order."""
        return sorted(self.relations, key=lambda t: (t.subject, t.relation.value, t.object))


def resolve_triple_types(
    triples: Iterable[RelationTriple], entities: Iterable[EntityMention]
) -> frozenset[RelationTriple]:
    """Fill triple argument types by surface lookup in an entity list.

    A surface carried by entities of more than one type resolves to None
    (ambiguous), as does a surface absent from the list. The same resolution
    runs on gold records at load time and on predictions at parse time, so
    rendered gold round-trips to an identical record.
    """
    by_surface: dict[str, EntityType | None] = {}
    for ent in entities:
        if ent.surface in by_surface and by_surface[ent.surface] != ent.etype:
            by_surface[ent.surface] = None
        else:
            by_surface[ent.surface] = ent.etype
    return frozenset(
        replace(
            t,
            subject_type=by_surface.get(t.subject),
            object_type=by_surface.get(t.object),
        )
        for t in triples
    )


@dataclass(frozen=True)
class ConstraintVerdict:
    """Outcome of the schema + factual constraint checks."""

    schema_ok: bool
    factual_ok: bool
    violations: tuple[str, ...] = ()

    def __post_init__(self):
        if (self.schema_ok and self.factual_ok) != (len(self.violations) == 0):
            raise ValueError("verdict flags inconsistent with violation list")

    @property
    def ok(self) -> bool:
        return self.schema_ok and self.factual_ok


def check_constraints(
    pred: "ExtractionRecord | Mapping[str, Any]", source: ExtractionRecord
) -> ConstraintVerdict:
    """Check a prediction against the schema and factual constraints.

    `pred` is either an ExtractionRecord or a raw answer payload of the form
    {"ner": [[surface, type], ...], "rel": [[subject, relation, object], ...]}.
    The raw form is what an unvalidated completion carries; type strings
    outside the closed vocabularies fail the schema check there. Factual
    checking is substring containment of every predicted surface in the
    (whitespace-normalized) source sentence.
    """
    schema_violations: list[str] = []
    factual_violations: list[str] = []
    sentence = normalize_span(source.sentence)

    surfaces: list[str] = []
    arg_surfaces: list[str] = []

    if isinstance(pred, ExtractionRecord):
        surfaces = [e.surface for e in pred.sorted_entities()]
        for t in pred.sorted_relations():
            arg_surfaces.extend((t.subject, t.object))
    else:
        ner_items = pred.get("ner", [])
        rel_items = pred.get("rel", [])
        if not isinstance(ner_items, list):
            schema_violations.append('"ner" is not a list')
            ner_items = []
        if not isinstance(rel_items, list):
            schema_violations.append('"rel" is not a list')
            rel_items = []
        for item in ner_items:
            if not (isinstance(item, (list, tuple)) and len(item) == 2
                    and all(isinstance(x, str) for x in item)):
                schema_violations.append(f"malformed ner item: {item!r}")
                continue
            surface, etype = item
            try:
                EntityType.parse(etype)
            except UnknownTypeError as exc:
                schema_violations.append(str(exc))
            if not normalize_span(surface):
                schema_violations.append("empty entity surface")
            else:
                surfaces.append(normalize_span(surface))
        for item in rel_items:
            if not (isinstance(item, (list, tuple)) and len(item) == 3
                    and all(isinstance(x, str) for x in item)):
                schema_violations.append(f"malformed rel item: {item!r}")
                continue
            subj, rel, obj = item
            try:
                RelationType.parse(rel)
            except UnknownTypeError as exc:
                schema_violations.append(str(exc))
            if not normalize_span(subj) or not normalize_span(obj):
                schema_violations.append("empty relation argument")
            else:
                arg_surfaces.extend((normalize_span(subj), normalize_span(obj)))

    for surface in surfaces:
        if surface not in sentence:
            factual_violations.append(f"entity {surface!r} not found in sentence")
    for surface in arg_surfaces:
        if surface not in sentence:
            factual_violations.append(f"relation argument {surface!r} not found in sentence")

    return ConstraintVerdict(
        schema_ok=not schema_violations,
        factual_ok=not factual_violations,
        violations=tuple(schema_violations + factual_violations),
    )
