# Dataset workflows: loading and stats, prompt assembly, supervision targets
# (plain and templated-reasoning), curriculum ordering, and subset selection.
#
# Run from the repo root:  python3 demos/05_dataset_pipelines.py

from pathlib import Path

from scireward import (
    TaskKind,
    build_curriculum,
    corpus_stats,
    difficulty,
    load_dataset,
    make_sft_dataset,
    render_prompt,
    select_subset,
)

fixture = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "synthetic_50.jsonl"
records = load_dataset(fixture)

stats = corpus_stats(records)
print(f"loaded {stats['n_records']} records: "
      f"{stats['entities']['total']} entity mentions, "
      f"{stats['relations']['total']} relation triples")
print("relation mix:", {k: v for k, v in sorted(stats["relations"].items()) if k != "total"})
print()

# Prompts are assembled per task variant from the instruction blocks.
prompt = render_prompt(records[0], TaskKind.NER_ONLY)
print("NER-only prompt (first and last lines):")
lines = prompt.splitlines()
print("  " + lines[0])
print("  ...")
print("  " + lines[-1])
print()

# Supervision pairs: the cross product of records and task variants. With
# mimic=True the target prepends the templated reasoning block.
examples = make_sft_dataset(records[:3], list(TaskKind), mimic=True)
print(f"{len(examples)} supervision pairs from 3 records x 4 tasks")
print("one mimic target:")
for line in examples[0].target.splitlines()[:5]:
    print("  " + line)
print("  ...")
print()

# Curriculum: quantile buckets over difficulty (= entities + relations),
# easiest first.
plan = build_curriculum(records, n_buckets=4)
for bucket in plan.buckets:
    print(f"difficulty {bucket.lo:>2}..{bucket.hi:<2}: {len(bucket.record_ids):>2} records")
first, last = plan.schedule[0], plan.schedule[-1]
by_id = {r.id: r for r in records}
print(f"schedule runs {first} (difficulty {difficulty(by_id[first])}) "
      f"-> {last} (difficulty {difficulty(by_id[last])})")
print()

# Subset selection keeps the per-type distribution of the full corpus.
report = select_subset(records, 20, seed=11)
print(f"selected {len(report.chosen_ids)} of {len(records)} records")
print(f"max |proportion deviation| vs corpus: {report.max_abs_proportion_deviation:.4f}")
print("bucket counts:", report.bucket_counts)
