"""Dataset ingestion, prompt assembly, SFT target generation, curriculum
bucketing, and distribution-preserving subset selection.

The wire format is one JSON object per line:

    {"id": "...", "sentence": "...",
     "ner": [[surface, type], ...],
     "rel": [[subject, relation, object], ...]}

Gold records are validated on load: every entity surface must occur in the
sentence and every relation argument must match an entity surface.
"""

from __future__ import annotations

import json
import math
import random
from bisect import bisect_left
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

from . import prompts
from .errors import SchemaError, SizeTooLarge, UnknownTypeError
from .model import (
    EntityMention,
    EntityType,
    ExtractionRecord,
    RelationTriple,
    RelationType,
    normalize_span,
    resolve_triple_types,
)
from .parsing import render_target, serialize_answer


class TaskKind(str, Enum):
    """The four extraction task variants used for multi-task supervision."""

    NER_ONLY = "ner_only"
    RE_GOLD_ENTITIES = "re_gold"
    RE_ONLY = "re_only"
    END_TO_END = "end2end"

    @classmethod
    def parse(cls, raw: str) -> "TaskKind":
        try:
            return cls(raw)
        except ValueError:
            raise ValueError(f"unknown task kind: {raw!r}") from None


_TYPE_LIST = ", ".join(t.value for t in EntityType)


@dataclass(frozen=True)
class ReasoningTemplate:
    """Ordered reasoning steps with {entity_count} and {entity_types} slots."""

    steps: tuple[str, ...]

    def render(self, record: ExtractionRecord) -> str:
        values = {"entity_count": len(record.entities), "entity_types": _TYPE_LIST}
        return "\n".join(step.format(**values) for step in self.steps)


DEFAULT_TEMPLATE = ReasoningTemplate(
    steps=(
        "1. Identify candidate entity spans and their types ({entity_types}).",
        "2. Consider pairwise relations among identified entities against the relation definitions.",
        "3. Formulate the final extraction.",
    )
)


def _parse_record(data: Any, line_no: int) -> ExtractionRecord:
    if not isinstance(data, dict):
        raise SchemaError("record is not a JSON object", line_no)
    for key in ("id", "sentence", "ner", "rel"):
        if key not in data:
            raise SchemaError(f"missing field {key!r}", line_no)
    record_id = data["id"]
    if isinstance(record_id, int):
        record_id = str(record_id)
    if not isinstance(record_id, str) or not record_id:
        raise SchemaError('"id" must be a non-empty string', line_no)
    sentence = data["sentence"]
    if not isinstance(sentence, str) or not normalize_span(sentence):
        raise SchemaError('"sentence" must be a non-empty string', line_no)
    if not isinstance(data["ner"], list) or not isinstance(data["rel"], list):
        raise SchemaError('"ner" and "rel" must be lists', line_no)

    norm_sentence = normalize_span(sentence)
    entities: set[EntityMention] = set()
    for item in data["ner"]:
        if not (isinstance(item, list) and len(item) == 2 and all(isinstance(x, str) for x in item)):
            raise SchemaError(f"malformed ner item: {item!r}", line_no)
        surface, etype_raw = item
        try:
            etype = EntityType.parse(etype_raw)
        except UnknownTypeError as exc:
            raise UnknownTypeError(str(exc), line_no) from None
        if not normalize_span(surface):
            raise SchemaError("empty entity surface", line_no)
        mention = EntityMention(surface, etype)
        if mention.surface not in norm_sentence:
            raise SchemaError(f"entity {mention.surface!r} not found in sentence", line_no)
        entities.add(mention)

    surfaces = {e.surface for e in entities}
    triples: list[RelationTriple] = []
    for item in data["rel"]:
        if not (isinstance(item, list) and len(item) == 3 and all(isinstance(x, str) for x in item)):
            raise SchemaError(f"malformed rel item: {item!r}", line_no)
        subj, rel_raw, obj = item
        try:
            relation = RelationType.parse(rel_raw)
        except UnknownTypeError as exc:
            raise UnknownTypeError(str(exc), line_no) from None
        triple = RelationTriple(subj, relation, obj)
        for surface in (triple.subject, triple.object):
            if surface not in surfaces:
                raise SchemaError(
                    f"relation argument {surface!r} matches no entity surface", line_no
                )
        triples.append(triple)

    return ExtractionRecord(
        id=record_id,
        sentence=sentence,
        entities=frozenset(entities),
        relations=resolve_triple_types(triples, entities),
    )


def load_dataset(path: str | Path, split: str | None = None) -> list[ExtractionRecord]:
    """Load line-delimited records; `split` selects "<split>.jsonl" inside a directory."""
    path = Path(path)
    if path.is_dir():
        if split is None:
            raise SchemaError(f"{path} is a directory; a split name is required")
        path = path / f"{split}.jsonl"
    records: list[ExtractionRecord] = []
    seen_ids: set[str] = set()
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except ValueError:
                raise SchemaError("invalid JSON", line_no) from None
            record = _parse_record(data, line_no)
            if record.id in seen_ids:
                raise SchemaError(f"duplicate record id {record.id!r}", line_no)
            seen_ids.add(record.id)
            records.append(record)
    return records


def record_to_dict(record: ExtractionRecord) -> dict[str, Any]:
    return {
        "id": record.id,
        "sentence": record.sentence,
        "ner": [[e.surface, e.etype.value] for e in record.sorted_entities()],
        "rel": [[t.subject, t.relation.value, t.object] for t in record.sorted_relations()],
    }


def save_dataset(records: Iterable[ExtractionRecord], path: str | Path):
    with Path(path).open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record_to_dict(record), ensure_ascii=False, sort_keys=True))
            handle.write("\n")


def corpus_stats(records: Sequence[ExtractionRecord]) -> dict[str, Any]:
    """Per-type mention counts, for cross-checking against release statistics."""
    entity_counts = Counter()
    relation_counts = Counter()
    for record in records:
        for entity in record.entities:
            entity_counts[entity.etype.value] += 1
        for triple in record.relations:
            relation_counts[triple.relation.value] += 1
    entities = {t.value: entity_counts.get(t.value, 0) for t in EntityType}
    entities["total"] = sum(entity_counts.values())
    relations = {t.value: relation_counts.get(t.value, 0) for t in RelationType}
    relations["total"] = sum(relation_counts.values())
    return {"n_records": len(records), "entities": entities, "relations": relations}


def render_prompt(record: ExtractionRecord, task: TaskKind) -> str:
    """Assemble the full prompt for one record and task variant."""
    sentence = record.sentence
    parts = [prompts.SYSTEM_PROMPT]
    if task in (TaskKind.NER_ONLY, TaskKind.END_TO_END):
        parts.append(prompts.NER_BACKGROUND)
    if task in (TaskKind.RE_GOLD_ENTITIES, TaskKind.RE_ONLY, TaskKind.END_TO_END):
        parts.append(prompts.REL_BACKGROUND)
    if task is TaskKind.NER_ONLY:
        parts.append(prompts.ner_instruction(sentence))
    elif task is TaskKind.RE_GOLD_ENTITIES:
        entities_json = json.dumps(
            [[e.surface, e.etype.value] for e in record.sorted_entities()], ensure_ascii=False
        )
        parts.append(prompts.re_gold_instruction(sentence, entities_json))
    elif task is TaskKind.RE_ONLY:
        parts.append(prompts.re_only_instruction(sentence))
    else:
        parts.append(prompts.end_to_end_instruction(sentence))
    return "\n\n".join(parts)


def task_projection(record: ExtractionRecord, task: TaskKind) -> ExtractionRecord:
    """The part of the gold annotation a task variant is supervised on.

    Triple argument types are re-resolved against the projected entity list,
    keeping the resolution rule uniform with loading and parsing.
    """
    if task is TaskKind.NER_ONLY:
        return replace(record, relations=frozenset())
    if task in (TaskKind.RE_GOLD_ENTITIES, TaskKind.RE_ONLY):
        return replace(
            record,
            entities=frozenset(),
            relations=resolve_triple_types(record.relations, ()),
        )
    return record


@dataclass(frozen=True)
class SftExample:
    record_id: str
    task: TaskKind
    prompt: str
    target: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "record_id": self.record_id,
            "task": self.task.value,
            "prompt": self.prompt,
            "target": self.target,
        }


def make_sft_dataset(
    records: Sequence[ExtractionRecord],
    tasks: Iterable[TaskKind],
    mimic: bool = False,
    template: ReasoningTemplate = DEFAULT_TEMPLATE,
) -> list[SftExample]:
    """Cross-product of records and task variants.

    Plain targets are the serialized answer payload alone; mimic targets
    prepend the templated reasoning block.
    """
    ordered_tasks = [t for t in TaskKind if t in set(tasks)]
    examples = []
    for record in records:
        for task in ordered_tasks:
            projected = task_projection(record, task)
            if mimic:
                target = render_target(projected, template)
            else:
                target = serialize_answer(projected)
            examples.append(
                SftExample(
                    record_id=record.id,
                    task=task,
                    prompt=render_prompt(record, task),
                    target=target,
                )
            )
    return examples


def difficulty(record: ExtractionRecord) -> int:
    """Annotation load of a record: entity count plus relation count."""
    return len(record.entities) + len(record.relations)


@dataclass(frozen=True)
class CurriculumBucket:
    lo: int
    hi: int
    record_ids: tuple[str, ...]


@dataclass(frozen=True)
class CurriculumPlan:
    buckets: tuple[CurriculumBucket, ...]
    schedule: tuple[str, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "buckets": [
                {"lo": b.lo, "hi": b.hi, "record_ids": list(b.record_ids)} for b in self.buckets
            ],
            "schedule": list(self.schedule),
        }


def _bucket_cuts(difficulties: Sequence[int], n_buckets: int) -> list[float]:
    if n_buckets < 1:
        raise ValueError("n_buckets must be >= 1")
    qs = [j / n_buckets for j in range(1, n_buckets)]
    return [float(q) for q in np.quantile(difficulties, qs)] if qs else []


def _bucket_index(value: int, cuts: Sequence[float]) -> int:
    return bisect_left(cuts, value)


def build_curriculum(records: Sequence[ExtractionRecord], n_buckets: int = 4) -> CurriculumPlan:
    """Quantile-bucket records by difficulty and order them easiest first.

    Bucket ranges never overlap (equal difficulties always share a bucket);
    ties inside a bucket break by record id, so the plan is deterministic.
    """
    if not records:
        return CurriculumPlan(buckets=(), schedule=())
    diffs = {r.id: difficulty(r) for r in records}
    cuts = _bucket_cuts(sorted(diffs.values()), n_buckets)
    grouped: dict[int, list[ExtractionRecord]] = {}
    for record in records:
        grouped.setdefault(_bucket_index(diffs[record.id], cuts), []).append(record)

    buckets = []
    schedule: list[str] = []
    for idx in sorted(grouped):
        members = sorted(grouped[idx], key=lambda r: (diffs[r.id], r.id))
        ids = tuple(r.id for r in members)
        buckets.append(
            CurriculumBucket(lo=diffs[ids[0]], hi=max(diffs[i] for i in ids), record_ids=ids)
        )
        schedule.extend(ids)
    return CurriculumPlan(buckets=tuple(buckets), schedule=tuple(schedule))


def _dominant_type(record: ExtractionRecord) -> EntityType | None:
    if not record.entities:
        return None
    counts = Counter(e.etype for e in record.entities)
    best = max(counts.values())
    # Ties break by declaration order of the type enum.
    for etype in EntityType:
        if counts.get(etype) == best:
            return etype
    return None


def _largest_remainder(weights: Sequence[int], total: int) -> list[int]:
    """Apportion `total` across cells proportionally to integer weights."""
    denom = sum(weights)
    if denom == 0:
        return [0] * len(weights)
    exact = [total * w / denom for w in weights]
    floors = [math.floor(x) for x in exact]
    remainder = total - sum(floors)
    order = sorted(range(len(weights)), key=lambda i: (-(exact[i] - floors[i]), i))
    for i in order[:remainder]:
        floors[i] += 1
    return floors


@dataclass(frozen=True)
class SelectionReport:
    """Chosen subset plus the distribution it achieved."""

    chosen_ids: tuple[str, ...]
    entity_type_counts: dict[str, int]
    relation_type_counts: dict[str, int]
    bucket_counts: dict[str, int]
    max_abs_proportion_deviation: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "chosen_ids": list(self.chosen_ids),
            "entity_type_counts": dict(self.entity_type_counts),
            "relation_type_counts": dict(self.relation_type_counts),
            "bucket_counts": dict(self.bucket_counts),
            "max_abs_proportion_deviation": self.max_abs_proportion_deviation,
        }


def _type_proportions(records: Sequence[ExtractionRecord]) -> dict[str, float]:
    stats = corpus_stats(records)
    props = {}
    for section in ("entities", "relations"):
        total = stats[section]["total"]
        for key, count in stats[section].items():
            if key == "total":
                continue
            props[f"{section}.{key}"] = count / total if total else 0.0
    return props


def select_subset(
    records: Sequence[ExtractionRecord],
    size: int,
    hardness_scores: Mapping[str, float] | None = None,
    seed: int = 0,
    n_buckets: int = 4,
) -> SelectionReport:
    """Stratified subset selection preserving the corpus distribution.

    Records are stratified into (dominant entity type x difficulty bucket)
    cells; each cell gets a quota proportional to its corpus frequency
    (largest-remainder rounding). Within a cell the hardest records (highest
    externally supplied hardness) come first; without scores the pick is
    uniform under the seeded RNG. Deterministic given (records, size, scores,
    seed).
    """
    if size > len(records):
        raise SizeTooLarge(f"requested {size} records from a corpus of {len(records)}")
    diffs = [difficulty(r) for r in records]
    cuts = _bucket_cuts(sorted(diffs), n_buckets) if records else []

    cells: dict[tuple[str, int], list[ExtractionRecord]] = {}
    for record, diff in zip(records, diffs):
        dom = _dominant_type(record)
        key = (dom.value if dom else "", _bucket_index(diff, cuts))
        cells.setdefault(key, []).append(record)

    cell_keys = sorted(cells)
    quotas = _largest_remainder([len(cells[k]) for k in cell_keys], size)

    rng = random.Random(seed)
    chosen: list[ExtractionRecord] = []
    bucket_counts: Counter = Counter()
    for key, quota in zip(cell_keys, quotas):
        members = cells[key]
        if hardness_scores is not None:
            picked = sorted(
                members, key=lambda r: (-hardness_scores.get(r.id, 0.0), r.id)
            )[:quota]
        else:
            ordered = sorted(members, key=lambda r: r.id)
            picked = rng.sample(ordered, quota)
        picked = sorted(picked, key=lambda r: r.id)
        chosen.extend(picked)
        bucket_counts[f"bucket_{key[1]}"] += len(picked)

    corpus_props = _type_proportions(records)
    subset_props = _type_proportions(chosen)
    max_dev = max(
        (abs(subset_props[k] - corpus_props[k]) for k in corpus_props), default=0.0
    )

    subset_stats = corpus_stats(chosen)
    return SelectionReport(
        chosen_ids=tuple(r.id for r in chosen),
        entity_type_counts={
            k: v for k, v in subset_stats["entities"].items() if k != "total"
        },
        relation_type_counts={
            k: v for k, v in subset_stats["relations"].items() if k != "total"
        },
        bucket_counts=dict(sorted(bucket_counts.items())),
        max_abs_proportion_deviation=max_dev,
    )
