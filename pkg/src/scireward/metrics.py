"""Evaluation protocol: NER and relation micro-F1 plus Best F1@K / Avg@K.

NER counts a prediction correct when surface and type match exactly. Relation
scoring has two modes: boundaries ("rel") matches (subject, relation, object)
with direction respected, and strict ("rel+") additionally requires both
argument entity types to match gold. Corpus numbers are micro-averaged, i.e.
tp/fp/fn are summed before precision/recall/F1 are formed; Best@K uses the
per-record harmonic-mean F1.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Any

from .errors import GroupTooSmall
from .model import EntityMention, EntityType, ExtractionRecord, RelationTriple, RelationType
from .parsing import ParsedCompletion

TASKS = ("ner", "rel", "rel_plus")


@dataclass(frozen=True)
class PRF:
    """Precision/recall/F1 with the raw counts they were formed from.

    0/0 ratios collapse to 0 by convention.
    """

    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def __add__(self, other: "PRF") -> "PRF":
        return PRF(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def to_dict(self) -> dict[str, Any]:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def score_ner(pred: Iterable[EntityMention], gold: Iterable[EntityMention]) -> PRF:
    """Exact (surface, type) matching between deduplicated mention sets."""
    pred_set, gold_set = frozenset(pred), frozenset(gold)
    tp = len(pred_set & gold_set)
    return PRF(tp=tp, fp=len(pred_set) - tp, fn=len(gold_set) - tp)


def _core_types(
    triples: Iterable[RelationTriple],
) -> dict[tuple[str, RelationType, str], tuple[EntityType | None, EntityType | None]]:
    """Triples keyed by their untyped core; a prediction repeating a core counts once."""
    out: dict = {}
    for t in sorted(triples, key=lambda t: (t.subject, t.relation.value, t.object)):
        out.setdefault(t.core(), (t.subject_type, t.object_type))
    return out


def score_rel(
    pred: Iterable[RelationTriple], gold: Iterable[RelationTriple], strict: bool = False
) -> PRF:
    """Relation scoring under boundaries (strict=False) or strict typing (strict=True).

    A predicted triple matches at most one gold triple and vice versa; in
    strict mode a prediction lacking either argument type is never a true
    positive.
    """
    pred_cores = _core_types(pred)
    gold_cores = _core_types(gold)
    tp = 0
    for core, ptypes in pred_cores.items():
        if core not in gold_cores:
            continue
        if not strict:
            tp += 1
        elif None not in ptypes and ptypes == gold_cores[core]:
            tp += 1
    return PRF(tp=tp, fp=len(pred_cores) - tp, fn=len(gold_cores) - tp)


@dataclass(frozen=True)
class EvalReport:
    """Corpus-level micro scores with per-type breakdowns."""

    ner: PRF
    rel: PRF
    rel_plus: PRF
    ner_by_type: dict[EntityType, PRF]
    rel_by_type: dict[RelationType, PRF]
    rel_plus_by_type: dict[RelationType, PRF]
    n_records: int
    format_valid_rate: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "ner": self.ner.to_dict(),
            "rel": self.rel.to_dict(),
            "rel_plus": self.rel_plus.to_dict(),
            "ner_by_type": {t.value: prf.to_dict() for t, prf in self.ner_by_type.items()},
            "rel_by_type": {t.value: prf.to_dict() for t, prf in self.rel_by_type.items()},
            "rel_plus_by_type": {
                t.value: prf.to_dict() for t, prf in self.rel_plus_by_type.items()
            },
            "n_records": self.n_records,
            "format_valid_rate": self.format_valid_rate,
        }


def _ner_by_type(pred: frozenset[EntityMention], gold: frozenset[EntityMention]) -> dict[EntityType, PRF]:
    out = {}
    for etype in EntityType:
        p = {e for e in pred if e.etype is etype}
        g = {e for e in gold if e.etype is etype}
        out[etype] = score_ner(p, g)
    return out


def _rel_by_type(
    pred: Iterable[RelationTriple], gold: Iterable[RelationTriple], strict: bool
) -> dict[RelationType, PRF]:
    out = {}
    for rtype in RelationType:
        p = [t for t in pred if t.relation is rtype]
        g = [t for t in gold if t.relation is rtype]
        out[rtype] = score_rel(p, g, strict=strict)
    return out


def evaluate_pairs(
    pairs: Sequence[tuple[ExtractionRecord, ExtractionRecord | None]]
) -> EvalReport:
    """Micro-aggregate (gold, prediction) pairs into an EvalReport.

    A None prediction stands for a completion whose answer failed to parse: it
    contributes only false negatives and lowers the format-valid rate.
    """
    ner_acc = {t: PRF(0, 0, 0) for t in EntityType}
    rel_acc = {t: PRF(0, 0, 0) for t in RelationType}
    rel_plus_acc = {t: PRF(0, 0, 0) for t in RelationType}
    n_valid = 0
    empty: frozenset = frozenset()

    for gold, pred in pairs:
        if pred is not None:
            n_valid += 1
        pred_entities = pred.entities if pred is not None else empty
        pred_relations = pred.relations if pred is not None else empty
        for etype, prf in _ner_by_type(pred_entities, gold.entities).items():
            ner_acc[etype] += prf
        for rtype, prf in _rel_by_type(pred_relations, gold.relations, strict=False).items():
            rel_acc[rtype] += prf
        for rtype, prf in _rel_by_type(pred_relations, gold.relations, strict=True).items():
            rel_plus_acc[rtype] += prf

    def total(acc: dict) -> PRF:
        out = PRF(0, 0, 0)
        for key in acc:
            out += acc[key]
        return out

    n = len(pairs)
    return EvalReport(
        ner=total(ner_acc),
        rel=total(rel_acc),
        rel_plus=total(rel_plus_acc),
        ner_by_type=ner_acc,
        rel_by_type=rel_acc,
        rel_plus_by_type=rel_plus_acc,
        n_records=n,
        format_valid_rate=n_valid / n if n else 0.0,
    )


def record_f1(pred: ExtractionRecord | None, gold: ExtractionRecord, task: str) -> float:
    """Per-record harmonic-mean F1 for one task; unparseable predictions score 0."""
    if pred is None:
        return 0.0
    if task == "ner":
        return score_ner(pred.entities, gold.entities).f1
    if task == "rel":
        return score_rel(pred.relations, gold.relations, strict=False).f1
    if task == "rel_plus":
        return score_rel(pred.relations, gold.relations, strict=True).f1
    raise ValueError(f"unknown task: {task!r}")


@dataclass(frozen=True)
class AtKReport:
    """Best F1@K and Avg@K per task, averaged over records."""

    k: int
    best_f1_at_k: dict[str, float]
    avg_at_k: dict[str, float]

    def to_dict(self) -> dict[str, Any]:
        return {"k": self.k, "best_f1_at_k": dict(self.best_f1_at_k), "avg_at_k": dict(self.avg_at_k)}


def score_at_k(
    groups: Sequence[tuple[ExtractionRecord, Sequence[ParsedCompletion]]], k: int
) -> AtKReport:
    """Best/average per-record F1 over the first k completions of each group.

    Raises GroupTooSmall if any record has fewer than k completions.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    for record, completions in groups:
        if len(completions) < k:
            raise GroupTooSmall(
                f"record {record.id!r} has {len(completions)} completions, need {k}"
            )

    best = {task: [] for task in TASKS}
    avg = {task: [] for task in TASKS}
    for record, completions in groups:
        for task in TASKS:
            scores = [record_f1(c.extraction, record, task) for c in completions[:k]]
            best[task].append(max(scores))
            avg[task].append(math.fsum(scores) / k)

    n = len(groups)
    return AtKReport(
        k=k,
        best_f1_at_k={task: (math.fsum(vals) / n if n else 0.0) for task, vals in best.items()},
        avg_at_k={task: (math.fsum(vals) / n if n else 0.0) for task, vals in avg.items()},
    )
