"""Seeded synthetic corpora shaped like the SciER release.

Used for fixtures, demos, and distribution tests when the real release is not
on disk. Relation types are apportioned to a target count table (largest
remainder), so corpus-level proportions track the target almost exactly; the
sentences are synthetic but satisfy every gold invariant (entity surfaces are
verbatim substrings, relation arguments name annotated entities).
"""

from __future__ import annotations

import random

from .model import (
    EntityMention,
    EntityType,
    ExtractionRecord,
    RelationTriple,
    RelationType,
    resolve_triple_types,
)

# Per-type totals of the SciER train split, used as the default shape target.
SCIER_TRAIN_ENTITY_COUNTS = {
    EntityType.METHOD: 11424,
    EntityType.DATASET: 3220,
    EntityType.TASK: 3397,
}
SCIER_TRAIN_RELATION_COUNTS = {
    RelationType.PART_OF: 1865,
    RelationType.USED_FOR: 2398,
    RelationType.EVALUATED_WITH: 863,
    RelationType.SYNONYM_OF: 880,
    RelationType.COMPARE_WITH: 875,
    RelationType.SUBCLASS_OF: 697,
    RelationType.BENCHMARK_FOR: 551,
    RelationType.SUBTASK_OF: 210,
    RelationType.TRAINED_WITH: 404,
}

# (subject type, object type, clause) per relation; clauses embed the
# surfaces verbatim so the factual constraint holds by construction.
_RELATION_SHAPE = {
    RelationType.PART_OF: (EntityType.METHOD, EntityType.METHOD, "{a} is built into {b}"),
    RelationType.SUBCLASS_OF: (
        EntityType.METHOD, EntityType.METHOD, "{a} is a specialized variant of {b}",
    ),
    RelationType.SUBTASK_OF: (EntityType.TASK, EntityType.TASK, "{a} is a subtask of {b}"),
    RelationType.BENCHMARK_FOR: (
        EntityType.DATASET, EntityType.TASK, "{a} serves as a benchmark for {b}",
    ),
    RelationType.TRAINED_WITH: (EntityType.METHOD, EntityType.DATASET, "{a} is trained on {b}"),
    RelationType.EVALUATED_WITH: (
        EntityType.METHOD, EntityType.DATASET, "{a} is evaluated on {b}",
    ),
    RelationType.SYNONYM_OF: (EntityType.METHOD, EntityType.METHOD, "{a} is also known as {b}"),
    RelationType.USED_FOR: (EntityType.METHOD, EntityType.TASK, "{a} is used for {b}"),
    RelationType.COMPARE_WITH: (
        EntityType.METHOD, EntityType.METHOD, "{a} is compared with {b}",
    ),
}

_METHOD_PARTS = (
    ("Hyper", "Deep", "Sparse", "Gated", "Neuro", "Meta", "Dual", "Fast", "Poly", "Star"),
    ("Former", "Net", "GNN", "Rank", "Mixer", "Parser", "Tagger", "Span", "Flow", "Coder"),
)
_DATASET_PARTS = (
    ("Wiki", "Bio", "Sci", "News", "Web", "Med", "Geo", "Law", "Chem", "Astro"),
    ("Graph", "Rel", "IE", "QA", "Sum", "NER", "Bank", "Corp", "Text", "Doc"),
)
_TASK_PARTS = (
    (
        "nested", "cross-lingual", "few-shot", "open-domain", "scientific",
        "biomedical", "low-resource", "multi-hop", "zero-shot", "document-level",
    ),
    (
        "entity tagging", "relation typing", "citation classification", "event linking",
        "span detection", "coreference resolution", "argument mining",
        "claim verification", "query parsing", "text normalization",
    ),
)

_INTROS = (
    "In this work ,",
    "In this study ,",
    "Recent results show that",
    "We find that",
    "Experiments indicate that",
)


def _fresh_name(rng: random.Random, etype: EntityType, used: set[str]) -> str:
    for _ in range(64):
        if etype is EntityType.METHOD:
            pre, stem = _METHOD_PARTS
            name = f"{rng.choice(pre)}{rng.choice(stem)}-{rng.randint(1, 99)}"
        elif etype is EntityType.DATASET:
            pre, stem = _DATASET_PARTS
            name = f"{rng.choice(pre)}{rng.choice(stem)}-{rng.randint(1, 30)}"
        else:
            adj, noun = _TASK_PARTS
            name = f"{rng.choice(adj)} {rng.choice(noun)}"
        if name not in used:
            used.add(name)
            return name
    raise RuntimeError("could not draw a fresh entity name")


def _apportion(counts: dict, total: int) -> dict:
    keys = list(counts)
    denom = sum(counts.values())
    exact = [total * counts[k] / denom for k in keys]
    floors = [int(x) for x in exact]
    order = sorted(range(len(keys)), key=lambda i: (-(exact[i] - floors[i]), i))
    for i in order[: total - sum(floors)]:
        floors[i] += 1
    return dict(zip(keys, floors))


def make_corpus(
    n_records: int,
    seed: int,
    mean_relations: float = 2.5,
    min_relations: int = 0,
    max_relations: int = 6,
    relation_counts: dict | None = None,
    entity_weights: dict | None = None,
    id_prefix: str = "synth-",
) -> list[ExtractionRecord]:
    """Generate a deterministic corpus of n_records synthetic sentences."""
    rng = random.Random(seed)
    relation_counts = relation_counts or SCIER_TRAIN_RELATION_COUNTS
    entity_weights = entity_weights or SCIER_TRAIN_ENTITY_COUNTS

    total_relations = max(round(mean_relations * n_records), min_relations * n_records)
    tokens: list[RelationType] = []
    for rtype, count in _apportion(relation_counts, total_relations).items():
        tokens.extend([rtype] * count)
    rng.shuffle(tokens)

    per_record = [min_relations] * n_records
    remaining = len(tokens) - sum(per_record)
    while remaining > 0:
        idx = rng.randrange(n_records)
        if per_record[idx] < max_relations:
            per_record[idx] += 1
            remaining -= 1

    etype_choices = list(entity_weights)
    etype_weights = [entity_weights[t] for t in etype_choices]

    records = []
    cursor = 0
    for i in range(n_records):
        used: set[str] = set()
        by_type: dict[EntityType, list[str]] = {t: [] for t in EntityType}
        clauses: list[str] = []
        triples: list[RelationTriple] = []

        for rtype in tokens[cursor:cursor + per_record[i]]:
            subj_t, obj_t, clause = _RELATION_SHAPE[rtype]
            # Occasionally reuse a previous same-type entity so some entities
            # participate in several relations.
            if by_type[subj_t] and rng.random() < 0.25:
                subj = rng.choice(by_type[subj_t])
            else:
                subj = _fresh_name(rng, subj_t, used)
                by_type[subj_t].append(subj)
            obj = _fresh_name(rng, obj_t, used)
            by_type[obj_t].append(obj)
            clauses.append(clause.format(a=subj, b=obj))
            triples.append(RelationTriple(subj, rtype, obj))
        cursor += per_record[i]

        n_extra = rng.choice((0, 0, 1, 1, 2))
        if not clauses and n_extra == 0:
            n_extra = 1
        extras = []
        for _ in range(n_extra):
            etype = rng.choices(etype_choices, weights=etype_weights, k=1)[0]
            name = _fresh_name(rng, etype, used)
            by_type[etype].append(name)
            extras.append(name)

        sentence_parts = []
        if clauses:
            sentence_parts.append(" , and ".join(clauses))
        if extras:
            sentence_parts.append("we also discuss " + " and ".join(extras))
        sentence = f"{rng.choice(_INTROS)} " + " ; ".join(sentence_parts) + " ."

        entities = frozenset(
            EntityMention(name, etype) for etype, names in by_type.items() for name in names
        )
        records.append(
            ExtractionRecord(
                id=f"{id_prefix}{i:04d}",
                sentence=sentence,
                entities=entities,
                relations=resolve_triple_types(triples, entities),
            )
        )
    return records
