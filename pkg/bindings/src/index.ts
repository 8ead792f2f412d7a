/**
 * Thin bindings exposing batch reward computation and group-normalized
 * advantages to RL training loops.
 *
 * This layer is transport only: it marshals payloads into the engine's
 * documented file formats, invokes the `scireward` CLI, and marshals the
 * results back. No scoring logic is reimplemented here, so the outputs are
 * bit-identical to the engine's.
 *
 * Payload shapes mirror the engine's dataset and config file schemas
 * (snake_case field names included).
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export interface RecordPayload {
  id: string;
  sentence: string;
  /** [surface, entity type] pairs. */
  ner: [string, string][];
  /** [subject, relation type, object] triples. */
  rel: [string, string, string][];
}

export interface RulePatternPayload {
  terms: string[];
  weight: number;
}

export interface RewardConfigPayload {
  w1?: number;
  w2?: number;
  w3?: number;
  w4?: number;
  lambda_penalty?: number;
  length_threshold?: number;
  rule_patterns?: RulePatternPayload[];
  format_gate?: boolean;
  normalized?: boolean;
}

export type RewardTask = "ner" | "rel" | "end2end";

export interface BatchRewardRequest {
  /** Parallel to `completions`: the gold record each completion answers. */
  records: RecordPayload[];
  completions: string[];
  config?: RewardConfigPayload;
  task?: RewardTask;
}

export interface RewardBreakdown {
  r_f1: number;
  r_span: number;
  r_relevancy: number;
  r_rule: number;
  total: number;
  gated: boolean;
}

export type RewardResult =
  | { ok: true; breakdown: RewardBreakdown }
  | { ok: false; error: string };

export type AdvantagesResult =
  | { ok: true; advantages: number[] }
  | { ok: false; error: string };

/** The whole batch failed (bad invocation, engine unavailable, ...). */
export class BindingError extends Error {}

const PYTHON = process.env.SCIREWARD_PYTHON ?? "python3";

function runCli(args: string[]): { status: number; stderr: string } {
  const proc = spawnSync(PYTHON, ["-m", "scireward", ...args], {
    encoding: "utf8",
    maxBuffer: 256 * 1024 * 1024,
  });
  if (proc.error) {
    throw new BindingError(`failed to launch engine: ${proc.error.message}`);
  }
  return { status: proc.status ?? 1, stderr: proc.stderr ?? "" };
}

function readJsonl(path: string): any[] {
  return readFileSync(path, "utf8")
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line));
}

function writeJsonl(path: string, rows: unknown[]): void {
  writeFileSync(path, rows.map((r) => JSON.stringify(r) + "\n").join(""), "utf8");
}

function isStringPair(x: unknown): x is [string, string] {
  return Array.isArray(x) && x.length === 2 && x.every((v) => typeof v === "string");
}

function isStringTriple(x: unknown): x is [string, string, string] {
  return Array.isArray(x) && x.length === 3 && x.every((v) => typeof v === "string");
}

function validateElement(record: RecordPayload, completion: string): string | null {
  if (typeof completion !== "string") return "completion text must be a string";
  if (!record || typeof record !== "object") return "record payload must be an object";
  if (typeof record.id !== "string" || record.id.length === 0) {
    return "record id must be a non-empty string";
  }
  if (typeof record.sentence !== "string" || record.sentence.trim().length === 0) {
    return "record sentence must be a non-empty string";
  }
  if (!Array.isArray(record.ner) || !record.ner.every(isStringPair)) {
    return "record ner must be [surface, type] string pairs";
  }
  if (!Array.isArray(record.rel) || !record.rel.every(isStringTriple)) {
    return "record rel must be [subject, relation, object] string triples";
  }
  return null;
}

/**
 * Score a batch of (record, completion) pairs with the composite reward.
 *
 * Element i of the result corresponds to input i. Malformed elements come
 * back as structured errors; nothing is silently dropped. Well-formed
 * elements are scored exactly as the engine's `parse` (lenient) + `reward`
 * pipeline scores them.
 */
export function computeRewardsBatch(req: BatchRewardRequest): RewardResult[] {
  if (!Array.isArray(req.records) || !Array.isArray(req.completions)) {
    throw new BindingError("records and completions must be arrays");
  }
  if (req.records.length !== req.completions.length) {
    throw new BindingError(
      `records (${req.records.length}) and completions (${req.completions.length}) differ in length`,
    );
  }
  const n = req.records.length;
  const results: (RewardResult | null)[] = new Array(n).fill(null);
  let active: number[] = [];
  for (let i = 0; i < n; i++) {
    const problem = validateElement(req.records[i], req.completions[i]);
    if (problem !== null) {
      results[i] = { ok: false, error: problem };
    } else {
      active.push(i);
    }
  }

  const dir = mkdtempSync(join(tmpdir(), "scireward-bindings-"));
  try {
    const configPath = join(dir, "config.json");
    if (req.config !== undefined) {
      writeFileSync(configPath, JSON.stringify(req.config) + "\n", "utf8");
    }

    // Deeper validation (unknown types, fabricated spans in gold) happens in
    // the engine's dataset loader and names the offending line; peel such
    // elements off as structured errors and retry with the remainder.
    while (active.length > 0) {
      const datasetPath = join(dir, "dataset.jsonl");
      const completionsPath = join(dir, "completions.jsonl");
      const parsedPath = join(dir, "parsed.jsonl");
      const rewardsPath = join(dir, "rewards.jsonl");
      // Synthetic per-element ids keep the transport dataset collision-free
      // even when callers repeat a record for several completions.
      writeJsonl(
        datasetPath,
        active.map((i) => ({ ...req.records[i], id: `r${i}` })),
      );
      writeJsonl(
        completionsPath,
        active.map((i) => ({ record_id: `r${i}`, sample_index: i, text: req.completions[i] })),
      );

      const parse = runCli([
        "parse", "--completions", completionsPath, "--dataset", datasetPath,
        "--mode", "lenient", "--out", parsedPath,
      ]);
      if (parse.status !== 0) {
        const match = parse.stderr.match(/line (\d+)/);
        if (match) {
          const bad = active[Number(match[1]) - 1];
          results[bad] = { ok: false, error: parse.stderr.trim() };
          active = active.filter((i) => i !== bad);
          continue;
        }
        throw new BindingError(`engine parse failed: ${parse.stderr.trim()}`);
      }

      const rewardArgs = [
        "reward", "--parsed", parsedPath, "--dataset", datasetPath,
        "--task", req.task ?? "end2end", "--out", rewardsPath,
      ];
      if (req.config !== undefined) {
        rewardArgs.push("--config", configPath);
      }
      const reward = runCli(rewardArgs);
      if (reward.status !== 0) {
        throw new BindingError(`engine reward failed: ${reward.stderr.trim()}`);
      }

      const rows = readJsonl(rewardsPath);
      if (rows.length !== active.length) {
        throw new BindingError(
          `engine returned ${rows.length} rewards for ${active.length} completions`,
        );
      }
      rows.forEach((row, pos) => {
        results[active[pos]] = {
          ok: true,
          breakdown: {
            r_f1: row.r_f1,
            r_span: row.r_span,
            r_relevancy: row.r_relevancy,
            r_rule: row.r_rule,
            total: row.total,
            gated: row.gated,
          },
        };
      });
      active = [];
    }
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
  return results as RewardResult[];
}

/**
 * Group-normalized advantages for a batch of reward groups.
 *
 * Each inner list is one group of sequence rewards; element i of the result
 * corresponds to group i. Undersized groups come back as structured errors,
 * mirroring the engine's per-group handling.
 */
export function advantagesBatch(groups: number[][]): AdvantagesResult[] {
  if (!Array.isArray(groups)) {
    throw new BindingError("groups must be an array of reward lists");
  }
  const results: (AdvantagesResult | null)[] = new Array(groups.length).fill(null);
  const active: number[] = [];
  groups.forEach((group, i) => {
    if (!Array.isArray(group) || group.length === 0) {
      results[i] = { ok: false, error: "group must be a non-empty list of rewards" };
    } else if (!group.every((r) => typeof r === "number" && Number.isFinite(r))) {
      results[i] = { ok: false, error: "rewards must be finite numbers" };
    } else {
      active.push(i);
    }
  });

  if (active.length > 0) {
    const dir = mkdtempSync(join(tmpdir(), "scireward-bindings-"));
    try {
      const groupsPath = join(dir, "groups.jsonl");
      const outPath = join(dir, "objective.jsonl");
      const rows: unknown[] = [];
      for (const i of active) {
        for (const reward of groups[i]) {
          // Advantages depend only on rewards; single zero-logprob tokens
          // satisfy the groups-file shape.
          rows.push({ group_id: `g${i}`, reward, logp: [0], logp_old: [0], logp_ref: [0] });
        }
      }
      writeJsonl(groupsPath, rows);
      const run = runCli(["grpo", "--groups", groupsPath, "--beta", "0", "--out", outPath]);
      if (run.status !== 0) {
        throw new BindingError(`engine grpo failed: ${run.stderr.trim()}`);
      }
      for (const row of readJsonl(outPath)) {
        if (typeof row.group_id !== "string") {
          continue; // aggregate line
        }
        const i = Number(row.group_id.slice(1));
        results[i] = row.error !== undefined
          ? { ok: false, error: row.error }
          : { ok: true, advantages: row.advantages };
      }
    } finally {
      rmSync(dir, { recursive: true, force: true });
    }
  }
  return results.map(
    (r) => r ?? { ok: false, error: "engine returned no result for this group" },
  );
}
