# The evaluation protocol: NER micro-F1, relation scoring under boundaries
# (Rel) and strict typing (Rel+), and the Best F1@K / Avg@K aggregates.
#
# Run from the repo root:  python3 demos/02_scoring_extractions.py

import json

from scireward import (
    evaluate_pairs,
    parse_completion,
    render_target,
    score_at_k,
    score_ner,
)
from scireward.datasets import DEFAULT_TEMPLATE
from scireward.synth import make_corpus

corpus = make_corpus(20, seed=7, min_relations=1)

# Per-set scoring: exact (surface, type) matching.
gold = corpus[0].entities
partial = frozenset(list(gold)[: max(1, len(gold) // 2)])
prf = score_ner(partial, gold)
print(f"NER on a half prediction: P={prf.precision:.3f} R={prf.recall:.3f} F1={prf.f1:.3f}")
print()

# Corpus-level micro scores with a per-type breakdown. Rendering the gold
# answer and parsing it back is the identity case: everything scores 100.
pairs = []
for record in corpus:
    parsed = parse_completion(render_target(record, DEFAULT_TEMPLATE), record, "strict")
    pairs.append((record, parsed.extraction))
report = evaluate_pairs(pairs)
print("self-evaluation (gold vs rendered gold):")
print(f"  NER={report.ner.f1 * 100:.1f}  Rel={report.rel.f1 * 100:.1f}  "
      f"Rel+={report.rel_plus.f1 * 100:.1f}")
print("  per entity type:",
      {t.value: round(prf.f1, 3) for t, prf in report.ner_by_type.items()})
print()

# Best@K / Avg@K over sampled completions. Three samples per record: empty,
# half right, perfect - so the per-record F1 ladder is 0 / ~0.5 / 1.
groups = []
for record in corpus:
    gold_pairs = [[e.surface, e.etype.value] for e in record.sorted_entities()]
    half = gold_pairs[: max(1, len(gold_pairs) // 2)]
    samples = [
        '<answer>{"ner": [], "rel": []}</answer>',
        '<answer>' + json.dumps({"ner": half, "rel": []}) + "</answer>",
        render_target(record, DEFAULT_TEMPLATE),
    ]
    groups.append((record, [parse_completion(s, record, "lenient") for s in samples]))

for k in (1, 2, 3):
    at_k = score_at_k(groups, k)
    print(f"K={k}: Best NER F1 = {at_k.best_f1_at_k['ner']:.3f}, "
          f"Avg = {at_k.avg_at_k['ner']:.3f}")
print("\nBest@K grows with K while Avg@K tracks the mix of sample quality.")
