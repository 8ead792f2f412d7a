import math
import random

import pytest

from _oracles import brute_force_ner, brute_force_rel
from conftest import make_completion
from scireward.errors import GroupTooSmall
from scireward.metrics import PRF, evaluate_pairs, record_f1, score_at_k, score_ner, score_rel
from scireward.model import (
    EntityMention,
    EntityType,
    ExtractionRecord,
    RelationTriple,
    RelationType,
    resolve_triple_types,
)
from scireward.parsing import parse_completion


def ent(surface, etype="Method"):
    return EntityMention(surface, EntityType(etype))


def rel(subj, rtype, obj, st=None, ot=None):
    return RelationTriple(
        subj, RelationType(rtype), obj,
        subject_type=EntityType(st) if st else None,
        object_type=EntityType(ot) if ot else None,
    )


class TestPRF:
    def test_zero_counts(self):
        prf = PRF(0, 0, 0)
        assert prf.precision == prf.recall == prf.f1 == 0.0

    def test_formula(self):
        prf = PRF(tp=1, fp=1, fn=2)
        assert prf.precision == 0.5
        assert prf.recall == pytest.approx(1 / 3)
        assert prf.f1 == pytest.approx(0.4)


class TestScoreNer:
    def test_identity(self):
        gold = {ent("BERT")}
        prf = score_ner(gold, gold)
        assert (prf.precision, prf.recall, prf.f1) == (1.0, 1.0, 1.0)

    def test_empty_prediction(self):
        assert score_ner(set(), {ent("BERT")}).f1 == 0.0

    def test_partial_overlap(self):
        pred = {ent("A"), ent("B", "Task")}
        gold = {ent("A"), ent("C", "Dataset"), ent("D", "Task")}
        prf = score_ner(pred, gold)
        assert prf.precision == 0.5
        assert prf.recall == pytest.approx(1 / 3)
        assert prf.f1 == pytest.approx(0.4)

    def test_type_must_match(self):
        assert score_ner({ent("A", "Task")}, {ent("A", "Method")}).tp == 0

    def test_symmetry(self):
        a = {ent("A"), ent("B", "Task")}
        b = {ent("A"), ent("C", "Dataset")}
        assert score_ner(a, b).tp == score_ner(b, a).tp

    def test_monotonicity(self):
        gold = {ent("A"), ent("B")}
        base = score_ner({ent("A")}, gold)
        plus_correct = score_ner({ent("A"), ent("B")}, gold)
        plus_wrong = score_ner({ent("A"), ent("Z")}, gold)
        assert plus_correct.recall >= base.recall
        assert plus_wrong.precision <= base.precision


class TestScoreRel:
    GOLD = {rel("A", "Used-For", "B", "Method", "Task")}

    def test_identity_both_modes(self):
        assert score_rel(self.GOLD, self.GOLD, strict=False).f1 == 1.0
        assert score_rel(self.GOLD, self.GOLD, strict=True).f1 == 1.0

    def test_direction_matters(self):
        reversed_pred = {rel("B", "Used-For", "A", "Task", "Method")}
        prf = score_rel(reversed_pred, self.GOLD, strict=False)
        assert prf.tp == 0 and prf.fp == 1 and prf.fn == 1

    def test_type_mismatch_is_rel_tp_but_rel_plus_fp(self):
        pred = {rel("A", "Used-For", "B", "Task", "Task")}
        assert score_rel(pred, self.GOLD, strict=False).tp == 1
        strict = score_rel(pred, self.GOLD, strict=True)
        assert strict.tp == 0 and strict.fp == 1 and strict.fn == 1

    def test_untyped_prediction_never_strict_tp(self):
        pred = {rel("A", "Used-For", "B")}
        assert score_rel(pred, self.GOLD, strict=False).tp == 1
        assert score_rel(pred, self.GOLD, strict=True).tp == 0

    def test_strict_never_exceeds_boundary(self):
        rng = random.Random(5)
        surfaces = ["X", "Y", "Z", "W"]
        types = [t.value for t in EntityType]
        rels = [t.value for t in RelationType]
        for _ in range(200):
            def sample(n):
                out = []
                for _ in range(n):
                    out.append(rel(
                        rng.choice(surfaces), rng.choice(rels), rng.choice(surfaces),
                        rng.choice(types), rng.choice(types),
                    ))
                return out
            pred, gold = sample(rng.randint(0, 5)), sample(rng.randint(0, 5))
            assert score_rel(pred, gold, True).tp <= score_rel(pred, gold, False).tp


class TestOracleEquivalence:
    def test_randomized_against_brute_force(self):
        rng = random.Random(11)
        surfaces = ["alpha", "beta", "gamma", "delta", "eps"]
        types = [t.value for t in EntityType]
        rels = [t.value for t in RelationType]
        for _ in range(150):
            pred_e = [(rng.choice(surfaces), rng.choice(types)) for _ in range(rng.randint(0, 5))]
            gold_e = [(rng.choice(surfaces), rng.choice(types)) for _ in range(rng.randint(0, 5))]
            got = score_ner({ent(s, t) for s, t in pred_e}, {ent(s, t) for s, t in gold_e})
            # De-dup through set semantics matches the scan-based oracle.
            want = brute_force_ner(pred_e, gold_e)
            assert (got.tp, got.fp, got.fn) == want

            def typed_triples(mentions):
                ments = [ent(s, t) for s, t in mentions]
                raw = [RelationTriple(rng.choice(surfaces), RelationType(rng.choice(rels)),
                                      rng.choice(surfaces))
                       for _ in range(rng.randint(0, 5))]
                return resolve_triple_types(raw, ments)

            pred_t = typed_triples(pred_e)
            gold_t = typed_triples(gold_e)
            as_tuples = lambda ts: [
                (t.subject, t.subject_type.value if t.subject_type else None,
                 t.relation.value, t.object,
                 t.object_type.value if t.object_type else None)
                for t in ts
            ]
            for strict in (False, True):
                got = score_rel(pred_t, gold_t, strict=strict)
                want = brute_force_rel(as_tuples(pred_t), as_tuples(gold_t), strict)
                assert (got.tp, got.fp, got.fn) == want


class TestEvaluatePairs:
    def test_micro_equals_type_sums(self, fixture_corpus):
        pairs = []
        for i, record in enumerate(fixture_corpus):
            if i % 3 == 0:
                pairs.append((record, None))
            elif i % 3 == 1:
                pairs.append((record, record))
            else:
                pruned = ExtractionRecord(
                    id=record.id, sentence=record.sentence,
                    entities=frozenset(record.sorted_entities()[:-1]),
                    relations=frozenset(),
                )
                pairs.append((record, pruned))
        report = evaluate_pairs(pairs)
        for total, by_type in (
            (report.ner, report.ner_by_type),
            (report.rel, report.rel_by_type),
            (report.rel_plus, report.rel_plus_by_type),
        ):
            summed = (sum(p.tp for p in by_type.values()),
                      sum(p.fp for p in by_type.values()),
                      sum(p.fn for p in by_type.values()))
            assert (total.tp, total.fp, total.fn) == summed
        assert report.format_valid_rate == pytest.approx(
            sum(1 for _, p in pairs if p is not None) / len(pairs)
        )

    def test_self_evaluation_is_perfect(self, fixture_corpus):
        report = evaluate_pairs([(r, r) for r in fixture_corpus])
        assert report.ner.f1 == 1.0
        assert report.rel.f1 == 1.0
        assert report.rel_plus.f1 == 1.0


def _completions_with_ner_f1s(record):
    """Three completions whose per-record NER and Rel F1s are 0, 0.5, 1.0."""
    gold_e = [[e.surface, e.etype.value] for e in record.sorted_entities()]
    gold_r = [[t.subject, t.relation.value, t.object] for t in record.sorted_relations()]
    assert len(gold_e) == 2 and len(gold_r) == 2
    raws = [
        make_completion(ner=[], rel=[]),
        make_completion(ner=[gold_e[0], ["Bogus-1", "Method"]],
                        rel=[gold_r[0], ["Bogus-1", "Used-For", "Bogus-2"]]),
        make_completion(ner=gold_e, rel=gold_r),
    ]
    return [parse_completion(raw, record, "lenient") for raw in raws]


class TestScoreAtK:
    def record(self):
        record = ExtractionRecord(
            id="atk", sentence="AlphaNet and BetaNet are compared .",
            entities=[ent("AlphaNet"), ent("BetaNet")],
            relations=resolve_triple_types(
                [RelationTriple("AlphaNet", RelationType.COMPARE_WITH, "BetaNet"),
                 RelationTriple("BetaNet", RelationType.COMPARE_WITH, "AlphaNet")],
                [ent("AlphaNet"), ent("BetaNet")],
            ),
        )
        return record, _completions_with_ner_f1s(record)

    def test_known_f1_ladder(self):
        record, completions = self.record()
        f1s = [record_f1(c.extraction, record, "ner") for c in completions]
        assert f1s == [0.0, 0.5, 1.0]

    def test_best_and_avg_at_3(self):
        record, completions = self.record()
        report = score_at_k([(record, completions)], k=3)
        assert report.best_f1_at_k["ner"] == 1.0
        assert report.avg_at_k["ner"] == 0.5
        assert report.best_f1_at_k["rel"] == 1.0
        assert report.avg_at_k["rel"] == 0.5

    def test_k1_collapse(self):
        record, completions = self.record()
        report = score_at_k([(record, completions)], k=1)
        assert report.best_f1_at_k["ner"] == report.avg_at_k["ner"] == 0.0

    def test_identical_completions_degenerate(self):
        record, completions = self.record()
        same = [completions[1]] * 3
        report = score_at_k([(record, same)], k=3)
        assert report.best_f1_at_k["ner"] == report.avg_at_k["ner"] == 0.5

    def test_best_monotone_in_k(self):
        record, completions = self.record()
        prev = -1.0
        for k in (1, 2, 3):
            best = score_at_k([(record, completions)], k)
            assert best.best_f1_at_k["ner"] >= prev
            prev = best.best_f1_at_k["ner"]

    def test_best_at_least_avg(self):
        record, completions = self.record()
        report = score_at_k([(record, completions)], k=3)
        for task in ("ner", "rel", "rel_plus"):
            assert report.best_f1_at_k[task] >= report.avg_at_k[task]

    def test_group_too_small(self):
        record, completions = self.record()
        with pytest.raises(GroupTooSmall):
            score_at_k([(record, completions[:2])], k=3)
