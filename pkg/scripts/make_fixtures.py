#!/usr/bin/env python3
"""Regenerate the committed synthetic fixture and its count table.

The count table is tallied here from the serialized lines with its own loop,
independently of the library's stats code, so the stats acceptance check is a
real cross-check rather than a tautology.
"""

import json
from collections import Counter
from pathlib import Path

from scireward.datasets import record_to_dict
from scireward.synth import make_corpus

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
SEED = 20240517

ENTITY_TYPES = ("Dataset", "Task", "Method")
RELATION_TYPES = (
    "Part-Of", "SubClass-Of", "SubTask-Of", "Benchmark-For", "Trained-With",
    "Evaluated-With", "Synonym-Of", "Used-For", "Compare-With",
)


def main():
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    records = make_corpus(50, seed=SEED, mean_relations=2.2, min_relations=1, id_prefix="fix-")

    lines = [json.dumps(record_to_dict(r), ensure_ascii=False, sort_keys=True) for r in records]
    (FIXTURE_DIR / "synthetic_50.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")

    entity_counts = Counter()
    relation_counts = Counter()
    n_records = 0
    for line in lines:
        data = json.loads(line)
        n_records += 1
        for _, etype in data["ner"]:
            entity_counts[etype] += 1
        for _, rtype, _ in data["rel"]:
            relation_counts[rtype] += 1

    stats = {
        "n_records": n_records,
        "entities": {
            **{t: entity_counts.get(t, 0) for t in ENTITY_TYPES},
            "total": sum(entity_counts.values()),
        },
        "relations": {
            **{t: relation_counts.get(t, 0) for t in RELATION_TYPES},
            "total": sum(relation_counts.values()),
        },
    }
    (FIXTURE_DIR / "synthetic_50.stats.json").write_text(
        json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote {n_records} records; entities={stats['entities']['total']} "
          f"relations={stats['relations']['total']}")


if __name__ == "__main__":
    main()
