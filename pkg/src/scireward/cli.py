"""Command-line surface for batch workflows over stable file interfaces.

File formats (all line-delimited JSON, UTF-8):

  dataset        {"id", "sentence", "ner": [[surface, type]], "rel": [[subj, relation, obj]]}
  completions    {"record_id", "sample_index", "text"}
  parsed         {"record_id", "sample_index", "reasoning", "think", "format": {...},
                  "extraction": {"ner": [...], "rel": [...]} | null}
                 (lines that failed strict parsing carry "error" instead)
  rewards        {"record_id", "sample_index", "r_f1", "r_span", "r_relevancy",
                  "r_rule", "total", "gated"}
  groups         {"group_id", "reward", "logp": [...], "logp_old": [...], "logp_ref": [...]}
                 (one line per output; lines sharing group_id form one group)
  objective      {"group_id", "advantages", "objective", "per_token"} per group,
                 then one {"mean_objective", "n_groups"} aggregate line

Every command is a pure function of (inputs, config, seed); re-runs are
byte-identical. A run manifest is written next to each output artifact.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import hashlib
import json
import math
import sys
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any

from . import __version__
from .datasets import (
    DEFAULT_TEMPLATE,
    TaskKind,
    build_curriculum,
    corpus_stats,
    load_dataset,
    make_sft_dataset,
    render_prompt,
    select_subset,
)
from .errors import ConfigError, GroupTooSmall, MissingRecord, ParseError, SciRewardError
from .grpo import GrpoConfig, GrpoGroup, objective
from .metrics import evaluate_pairs, score_at_k
from .model import EntityMention, EntityType, ExtractionRecord, RelationTriple, RelationType, resolve_triple_types
from .parsing import FormatReport, ParsedCompletion, parse_completion
from .rewards import RewardConfig, reward_total


def _dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def _write_lines(path: Path, lines: Iterable[str]):
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for line in lines:
            handle.write(line)
            handle.write("\n")


def _read_jsonl(path: Path) -> list[tuple[int, dict]]:
    rows = []
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                rows.append((line_no, json.loads(line)))
            except ValueError:
                raise SciRewardError(f"{path}: line {line_no} is not valid JSON") from None
    return rows


def _write_manifest(out: Path, command: str, inputs: Sequence[str], seed: int | None, config: Any):
    manifest = {
        "command": command,
        "tool_version": __version__,
        "inputs": [str(p) for p in inputs],
        "seed": seed,
        "config_hash": hashlib.sha256(_dumps(config).encode("utf-8")).hexdigest(),
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    out.with_name(out.name + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _map_ordered(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _load_record_map(path: str) -> dict[str, ExtractionRecord]:
    return {record.id: record for record in load_dataset(path)}


def _extraction_to_dict(record: ExtractionRecord) -> dict[str, Any]:
    return {
        "ner": [[e.surface, e.etype.value] for e in record.sorted_entities()],
        "rel": [[t.subject, t.relation.value, t.object] for t in record.sorted_relations()],
    }


def _extraction_from_dict(data: dict | None, source: ExtractionRecord) -> ExtractionRecord | None:
    if data is None:
        return None
    entities = frozenset(
        EntityMention(surface, EntityType.parse(etype)) for surface, etype in data.get("ner", [])
    )
    triples = [
        RelationTriple(subj, RelationType.parse(rel), obj)
        for subj, rel, obj in data.get("rel", [])
    ]
    return ExtractionRecord(
        id=source.id,
        sentence=source.sentence,
        entities=entities,
        relations=resolve_triple_types(triples, entities),
    )


def _parsed_from_row(row: dict, source: ExtractionRecord) -> ParsedCompletion:
    """Rebuild a ParsedCompletion from a parsed-file line (error lines become
    unparseable completions)."""
    if "error" in row:
        flags = FormatReport(False, False, False, False, False)
        return ParsedCompletion("", "", "", None, flags)
    fmt = row.get("format", {})
    report = FormatReport(
        has_reasoning=bool(fmt.get("has_reasoning")),
        has_think=bool(fmt.get("has_think")),
        has_answer=bool(fmt.get("has_answer")),
        answer_parses=bool(fmt.get("answer_parses")),
        blocks_in_order=bool(fmt.get("blocks_in_order")),
        dropped_items=int(fmt.get("dropped_items", 0)),
        notes=tuple(fmt.get("notes", ())),
    )
    return ParsedCompletion(
        reasoning=row.get("reasoning", ""),
        think=row.get("think", ""),
        answer_raw=row.get("answer_raw", ""),
        extraction=_extraction_from_dict(row.get("extraction"), source),
        format=report,
    )


# ---------------------------------------------------------------------------
# parse


def cmd_parse(args) -> int:
    records = _load_record_map(args.dataset)
    rows = _read_jsonl(Path(args.completions))

    def handle(item):
        line_no, row = item
        base = {
            "record_id": row.get("record_id"),
            "sample_index": row.get("sample_index"),
        }
        if not isinstance(row.get("record_id"), str) or not isinstance(row.get("text"), str):
            return line_no, {**base, "error": "completion line needs record_id and text"}
        source = records.get(row["record_id"])
        if source is None:
            return line_no, {**base, "error": f"unknown record id {row['record_id']!r}"}
        try:
            parsed = parse_completion(row["text"], source, args.mode)
        except ParseError as exc:
            return line_no, {**base, "error": str(exc)}
        out = {
            **base,
            "reasoning": parsed.reasoning,
            "think": parsed.think,
            "format": parsed.format.to_dict(),
            "extraction": (
                _extraction_to_dict(parsed.extraction) if parsed.extraction is not None else None
            ),
        }
        return line_no, out

    results = _map_ordered(handle, rows, args.workers)
    n_errors = sum(1 for _, out in results if "error" in out)
    if n_errors and args.strict:
        for line_no, out in results:
            if "error" in out:
                print(f"line {line_no}: {out['error']}", file=sys.stderr)
        return 1

    out_path = Path(args.out)
    _write_lines(out_path, (_dumps(out) for _, out in results))
    _write_manifest(out_path, "parse", [args.completions, args.dataset], None, {"mode": args.mode})

    n = len(results)
    n_valid = sum(
        1 for _, out in results if out.get("format", {}).get("answer_parses")
    )
    rate = n_valid / n if n else 0.0
    print(f"parsed {n} completions, {n_errors} errors, format_valid_rate={rate:.4f}")
    for line_no, out in results:
        if "error" in out:
            print(f"  line {line_no}: {out['error']}")
    return 0


# ---------------------------------------------------------------------------
# eval


def _group_parsed(
    rows: Sequence[tuple[int, dict]], records: dict[str, ExtractionRecord]
) -> list[tuple[ExtractionRecord, list[ParsedCompletion]]]:
    groups: dict[str, list[tuple[int, ParsedCompletion]]] = {}
    order: list[str] = []
    for _, row in rows:
        record_id = row.get("record_id")
        if record_id not in records:
            raise MissingRecord(f"parsed line references unknown record id {record_id!r}")
        source = records[record_id]
        sample_index = row.get("sample_index", 0)
        if record_id not in groups:
            groups[record_id] = []
            order.append(record_id)
        groups[record_id].append((sample_index, _parsed_from_row(row, source)))
    out = []
    for record_id in order:
        samples = sorted(groups[record_id], key=lambda pair: pair[0])
        out.append((records[record_id], [parsed for _, parsed in samples]))
    return out


def cmd_eval(args) -> int:
    records = _load_record_map(args.dataset)
    rows = _read_jsonl(Path(args.parsed))
    groups = _group_parsed(rows, records)

    # Headline scores use the first sample of each record; every sample feeds
    # the @K aggregates.
    pairs = [(record, completions[0].extraction) for record, completions in groups]
    report = evaluate_pairs(pairs)
    lines = [_dumps({"section": "eval", **report.to_dict()})]

    at_k = None
    if args.k is not None:
        at_k = score_at_k(groups, args.k)
        lines.append(_dumps({"section": "at_k", **at_k.to_dict()}))

    out_path = Path(args.out)
    _write_lines(out_path, lines)
    _write_manifest(out_path, "eval", [args.parsed, args.dataset], None, {"k": args.k})

    print(
        f"NER={report.ner.f1 * 100:.2f} Rel={report.rel.f1 * 100:.2f} "
        f"Rel+={report.rel_plus.f1 * 100:.2f} "
        f"(n={report.n_records}, format_valid_rate={report.format_valid_rate:.4f})"
    )
    if at_k is not None:
        best, avg = at_k.best_f1_at_k, at_k.avg_at_k
        print(
            f"Best@{at_k.k}: ner={best['ner'] * 100:.2f} rel={best['rel'] * 100:.2f} "
            f"rel+={best['rel_plus'] * 100:.2f} | "
            f"Avg@{at_k.k}: ner={avg['ner'] * 100:.2f} rel={avg['rel'] * 100:.2f} "
            f"rel+={avg['rel_plus'] * 100:.2f}"
        )
    return 0


# ---------------------------------------------------------------------------
# reward


def _reward_config_from_args(args) -> RewardConfig:
    cfg = RewardConfig.from_file(args.config) if args.config else RewardConfig()
    if args.weights:
        parts = args.weights.split(",")
        if len(parts) != 4:
            raise ConfigError("weights", "expected four comma-separated numbers")
        try:
            w1, w2, w3, w4 = (float(p) for p in parts)
        except ValueError:
            raise ConfigError("weights", "expected four comma-separated numbers") from None
        cfg = dataclasses.replace(cfg, w1=w1, w2=w2, w3=w3, w4=w4)
    return cfg.validate()


def cmd_reward(args) -> int:
    records = _load_record_map(args.dataset)
    cfg = _reward_config_from_args(args)
    rows = _read_jsonl(Path(args.parsed))

    def handle(item):
        _, row = item
        record_id = row.get("record_id")
        if record_id not in records:
            raise MissingRecord(f"parsed line references unknown record id {record_id!r}")
        source = records[record_id]
        parsed = _parsed_from_row(row, source)
        breakdown = reward_total(parsed, source, cfg, args.task)
        return {
            "record_id": record_id,
            "sample_index": row.get("sample_index"),
            **breakdown.to_dict(),
        }

    results = _map_ordered(handle, rows, args.workers)
    out_path = Path(args.out)
    _write_lines(out_path, (_dumps(out) for out in results))
    _write_manifest(
        out_path, "reward", [args.parsed, args.dataset], None,
        {"task": args.task, "config": cfg.to_dict()},
    )

    totals = [out["total"] for out in results]
    mean = math.fsum(totals) / len(totals) if totals else 0.0
    print(f"scored {len(totals)} completions, mean total={mean:.4f}")
    bins = [0] * 10
    for t in totals:
        bins[min(int(t * 10), 9)] += 1
    for i, count in enumerate(bins):
        print(f"  [{i / 10:.1f}, {(i + 1) / 10:.1f}{']' if i == 9 else ')'}: {count}")
    return 0


# ---------------------------------------------------------------------------
# grpo


def _grpo_config_from_args(args) -> GrpoConfig:
    values = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except ValueError as exc:
            raise ConfigError("<root>", f"invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        for key in data:
            if key not in ("epsilon", "beta", "std_floor"):
                raise ConfigError(key, "unknown field")
            if not isinstance(data[key], (int, float)):
                raise ConfigError(key, "must be a number")
        values.update(data)
    if args.epsilon is not None:
        values["epsilon"] = args.epsilon
    if args.beta is not None:
        values["beta"] = args.beta
    try:
        return GrpoConfig(**values)
    except ValueError as exc:
        raise ConfigError("epsilon" if "epsilon" in str(exc) else "beta", str(exc)) from None


def cmd_grpo(args) -> int:
    cfg = _grpo_config_from_args(args)
    rows = _read_jsonl(Path(args.groups))

    grouped: dict[str, list[dict]] = {}
    order: list[str] = []
    for line_no, row in rows:
        group_id = row.get("group_id")
        if not isinstance(group_id, str):
            raise SciRewardError(f"line {line_no}: groups file needs a group_id string")
        if group_id not in grouped:
            grouped[group_id] = []
            order.append(group_id)
        grouped[group_id].append(row)

    lines = []
    objectives = []
    for group_id in order:
        members = grouped[group_id]
        try:
            group = GrpoGroup(
                rewards=tuple(m["reward"] for m in members),
                logp_theta=tuple(m["logp"] for m in members),
                logp_old=tuple(m["logp_old"] for m in members),
                logp_ref=tuple(m["logp_ref"] for m in members),
            )
        except GroupTooSmall as exc:
            lines.append(_dumps({"group_id": group_id, "error": str(exc)}))
            continue
        result = objective(group, cfg)
        objectives.append(result.value)
        lines.append(
            _dumps(
                {
                    "group_id": group_id,
                    "advantages": result.advantages.tolist(),
                    "objective": result.value,
                    "per_token": [terms.tolist() for terms in result.per_token_terms],
                }
            )
        )
    mean_objective = math.fsum(objectives) / len(objectives) if objectives else 0.0
    lines.append(_dumps({"mean_objective": mean_objective, "n_groups": len(objectives)}))

    out_path = Path(args.out)
    _write_lines(out_path, lines)
    _write_manifest(
        out_path, "grpo", [args.groups], None,
        {"epsilon": cfg.epsilon, "beta": cfg.beta, "std_floor": cfg.std_floor},
    )
    print(f"processed {len(order)} groups, mean objective={mean_objective:.6f}")
    return 0


# ---------------------------------------------------------------------------
# dataset


def cmd_dataset_stats(args) -> int:
    records = load_dataset(args.dataset)
    stats = corpus_stats(records)
    text = json.dumps(stats, indent=2, sort_keys=True) + "\n"
    if args.out:
        out_path = Path(args.out)
        out_path.write_text(text, encoding="utf-8")
        _write_manifest(out_path, "dataset stats", [args.dataset], None, {})
    print(f"records: {stats['n_records']}")
    for section in ("entities", "relations"):
        print(f"{section}:")
        for key in sorted(stats[section]):
            if key != "total":
                print(f"  {key}: {stats[section][key]}")
        print(f"  total: {stats[section]['total']}")
    return 0


def _parse_tasks(raw: str) -> list[TaskKind]:
    if raw == "all":
        return list(TaskKind)
    return [TaskKind.parse(part) for part in raw.split(",") if part]


def cmd_dataset_sft(args) -> int:
    records = load_dataset(args.dataset)
    tasks = _parse_tasks(args.tasks)
    examples = make_sft_dataset(records, tasks, mimic=args.mimic, template=DEFAULT_TEMPLATE)
    out_path = Path(args.out)
    _write_lines(out_path, (_dumps(ex.to_dict()) for ex in examples))
    _write_manifest(
        out_path, "dataset sft", [args.dataset], None,
        {"tasks": [t.value for t in tasks], "mimic": args.mimic},
    )
    print(f"wrote {len(examples)} (prompt, target) pairs")
    return 0


def cmd_dataset_curriculum(args) -> int:
    records = load_dataset(args.dataset)
    plan = build_curriculum(records, args.buckets)
    out_path = Path(args.out)
    out_path.write_text(
        json.dumps(plan.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_manifest(out_path, "dataset curriculum", [args.dataset], None, {"buckets": args.buckets})
    print(f"{len(plan.buckets)} buckets over {len(plan.schedule)} records")
    for bucket in plan.buckets:
        print(f"  difficulty {bucket.lo}..{bucket.hi}: {len(bucket.record_ids)} records")
    return 0


def cmd_dataset_select(args) -> int:
    records = load_dataset(args.dataset)
    hardness = None
    if args.hardness:
        hardness = json.loads(Path(args.hardness).read_text(encoding="utf-8"))
        if not isinstance(hardness, dict):
            raise ConfigError("hardness", "must be a JSON object mapping record id to score")
    report = select_subset(
        records, args.size, hardness_scores=hardness, seed=args.seed, n_buckets=args.buckets
    )
    out_path = Path(args.out)
    out_path.write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_manifest(
        out_path, "dataset select", [args.dataset], args.seed,
        {"size": args.size, "buckets": args.buckets, "hardness": bool(hardness)},
    )
    print(
        f"selected {len(report.chosen_ids)} records, "
        f"max |proportion deviation|={report.max_abs_proportion_deviation:.4f}"
    )
    return 0


def cmd_dataset_prompt(args) -> int:
    records = _load_record_map(args.dataset)
    if args.id not in records:
        raise MissingRecord(f"no record with id {args.id!r}")
    prompt = render_prompt(records[args.id], TaskKind.parse(args.task))
    if args.out:
        Path(args.out).write_text(prompt + "\n", encoding="utf-8")
        _write_manifest(Path(args.out), "dataset prompt", [args.dataset], None, {"task": args.task})
    print(prompt)
    return 0


# ---------------------------------------------------------------------------
# argument wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scireward",
        description="Reward engineering and evaluation workflows for scientific IE.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse raw completions into structured predictions")
    p.add_argument("--completions", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--mode", choices=("strict", "lenient"), default="lenient")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--strict", action="store_true",
                   help="abort on the first per-line failure")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("eval", help="score parsed predictions against gold")
    p.add_argument("--parsed", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reward", help="compute composite rewards for parsed completions")
    p.add_argument("--parsed", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--weights", default=None, help="w1,w2,w3,w4 override")
    p.add_argument("--task", choices=("ner", "rel", "end2end"), default="end2end")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_reward)

    p = sub.add_parser("grpo", help="group-normalized advantages and objective values")
    p.add_argument("--groups", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grpo)

    p = sub.add_parser("dataset", help="dataset workflows")
    dsub = p.add_subparsers(dest="subcommand", required=True)

    d = dsub.add_parser("stats", help="per-type mention counts")
    d.add_argument("--dataset", required=True)
    d.add_argument("--out", default=None)
    d.set_defaults(func=cmd_dataset_stats)

    d = dsub.add_parser("sft", help="emit (prompt, target) supervision pairs")
    d.add_argument("--dataset", required=True)
    d.add_argument("--tasks", default="all")
    d.add_argument("--mimic", action="store_true")
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_dataset_sft)

    d = dsub.add_parser("curriculum", help="difficulty-ordered training plan")
    d.add_argument("--dataset", required=True)
    d.add_argument("--buckets", type=int, default=4)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_dataset_curriculum)

    d = dsub.add_parser("select", help="distribution-preserving subset selection")
    d.add_argument("--dataset", required=True)
    d.add_argument("--size", type=int, required=True)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--buckets", type=int, default=4)
    d.add_argument("--hardness", default=None)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_dataset_select)

    d = dsub.add_parser("prompt", help="render one record's prompt")
    d.add_argument("--dataset", required=True)
    d.add_argument("--id", required=True)
    d.add_argument("--task", default="end2end")
    d.add_argument("--out", default=None)
    d.set_defaults(func=cmd_dataset_prompt)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SciRewardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
