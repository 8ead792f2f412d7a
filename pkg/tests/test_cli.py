import json
import math

import pytest

from conftest import make_completion
from scireward.cli import main
from scireward.datasets import DEFAULT_TEMPLATE, load_dataset, save_dataset
from scireward.model import EntityMention, EntityType, ExtractionRecord
from scireward.parsing import parse_completion, render_target
from scireward.rewards import RewardConfig, reward_total


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows),
                    encoding="utf-8")


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]


@pytest.fixture
def small_setup(tmp_path, fixture_corpus):
    """Three records with one perfect, one partial, one broken completion."""
    records = fixture_corpus[:3]
    dataset = tmp_path / "data.jsonl"
    save_dataset(records, dataset)
    texts = [
        render_target(records[0], DEFAULT_TEMPLATE),
        make_completion(ner=[[records[1].sorted_entities()[0].surface,
                              records[1].sorted_entities()[0].etype.value]],
                        think='because it "fits"'),
        "<answer>not json</answer>",
    ]
    completions = tmp_path / "completions.jsonl"
    write_jsonl(completions, [
        {"record_id": r.id, "sample_index": 0, "text": t}
        for r, t in zip(records, texts)
    ])
    return records, dataset, completions


class TestParse:
    def test_line_counts_and_rate(self, small_setup, tmp_path, capsys):
        _, dataset, completions = small_setup
        out = tmp_path / "parsed.jsonl"
        rc = main(["parse", "--completions", str(completions), "--dataset", str(dataset),
                   "--mode", "lenient", "--out", str(out)])
        assert rc == 0
        rows = read_jsonl(out)
        assert len(rows) == 3
        assert "format_valid_rate=0.6667" in capsys.readouterr().out

    def test_strict_mode_reports_line_numbers(self, small_setup, tmp_path, capsys):
        _, dataset, completions = small_setup
        out = tmp_path / "parsed.jsonl"
        rc = main(["parse", "--completions", str(completions), "--dataset", str(dataset),
                   "--mode", "strict", "--out", str(out)])
        assert rc == 0
        rows = read_jsonl(out)
        assert "error" not in rows[0]
        assert "error" in rows[2]
        assert "line 3" in capsys.readouterr().out

    def test_strict_flag_aborts(self, small_setup, tmp_path):
        _, dataset, completions = small_setup
        out = tmp_path / "parsed.jsonl"
        rc = main(["parse", "--completions", str(completions), "--dataset", str(dataset),
                   "--mode", "strict", "--out", str(out), "--strict"])
        assert rc == 1
        assert not out.exists()

    def test_rerun_byte_identical(self, small_setup, tmp_path):
        _, dataset, completions = small_setup
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for out in (a, b):
            assert main(["parse", "--completions", str(completions),
                         "--dataset", str(dataset), "--out", str(out)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_unknown_record_is_per_line_error(self, small_setup, tmp_path):
        _, dataset, completions = small_setup
        rows = read_jsonl(completions)
        rows.append({"record_id": "ghost", "sample_index": 0, "text": "x"})
        write_jsonl(completions, rows)
        out = tmp_path / "parsed.jsonl"
        assert main(["parse", "--completions", str(completions), "--dataset", str(dataset),
                     "--out", str(out)]) == 0
        assert "error" in read_jsonl(out)[-1]

    def test_workers_preserve_order(self, small_setup, tmp_path):
        _, dataset, completions = small_setup
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert main(["parse", "--completions", str(completions), "--dataset", str(dataset),
                     "--out", str(a)]) == 0
        assert main(["parse", "--completions", str(completions), "--dataset", str(dataset),
                     "--out", str(b), "--workers", "4"]) == 0
        assert a.read_bytes() == b.read_bytes()


def _parse_to(tmp_path, dataset, completions, name="parsed.jsonl", mode="lenient"):
    out = tmp_path / name
    assert main(["parse", "--completions", str(completions), "--dataset", str(dataset),
                 "--mode", mode, "--out", str(out)]) == 0
    return out


class TestEval:
    def test_self_evaluation_identity(self, tmp_path, fixture_corpus):
        dataset = tmp_path / "data.jsonl"
        save_dataset(fixture_corpus, dataset)
        completions = tmp_path / "completions.jsonl"
        write_jsonl(completions, [
            {"record_id": r.id, "sample_index": 0,
             "text": render_target(r, DEFAULT_TEMPLATE)}
            for r in fixture_corpus
        ])
        parsed = _parse_to(tmp_path, dataset, completions, mode="strict")
        out = tmp_path / "report.jsonl"
        assert main(["eval", "--parsed", str(parsed), "--dataset", str(dataset),
                     "--out", str(out)]) == 0
        report = read_jsonl(out)[0]
        assert report["ner"]["f1"] == 1.0
        assert report["rel"]["f1"] == 1.0
        assert report["rel_plus"]["f1"] == 1.0
        assert report["format_valid_rate"] == 1.0

    def test_ner_f1_two_of_five(self, tmp_path):
        gold = ExtractionRecord(
            id="g", sentence="A and C and D appear .",
            entities=[EntityMention("A", EntityType.METHOD),
                      EntityMention("C", EntityType.DATASET),
                      EntityMention("D", EntityType.TASK)],
        )
        dataset = tmp_path / "data.jsonl"
        save_dataset([gold], dataset)
        completions = tmp_path / "completions.jsonl"
        write_jsonl(completions, [{
            "record_id": "g", "sample_index": 0,
            "text": make_completion(ner=[["A", "Method"], ["B", "Task"]]),
        }])
        parsed = _parse_to(tmp_path, dataset, completions)
        out = tmp_path / "report.jsonl"
        assert main(["eval", "--parsed", str(parsed), "--dataset", str(dataset),
                     "--out", str(out)]) == 0
        report = read_jsonl(out)[0]
        assert report["ner"]["precision"] == 0.5
        assert report["ner"]["f1"] == pytest.approx(0.4)

    def test_at_k_best_geq_avg(self, tmp_path, fixture_corpus):
        records = fixture_corpus[:4]
        dataset = tmp_path / "data.jsonl"
        save_dataset(records, dataset)
        rows = []
        for record in records:
            perfect = render_target(record, DEFAULT_TEMPLATE)
            first = record.sorted_entities()[0]
            partial = make_completion(ner=[[first.surface, first.etype.value]])
            for i, text in enumerate([perfect, partial, "junk", perfect, partial]):
                rows.append({"record_id": record.id, "sample_index": i, "text": text})
        completions = tmp_path / "completions.jsonl"
        write_jsonl(completions, rows)
        parsed = _parse_to(tmp_path, dataset, completions)
        out = tmp_path / "report.jsonl"
        assert main(["eval", "--parsed", str(parsed), "--dataset", str(dataset),
                     "--k", "5", "--out", str(out)]) == 0
        sections = read_jsonl(out)
        at_k = next(s for s in sections if s["section"] == "at_k")
        for task in ("ner", "rel", "rel_plus"):
            assert at_k["best_f1_at_k"][task] >= at_k["avg_at_k"][task]

    def test_missing_record_is_fatal(self, small_setup, tmp_path):
        _, dataset, completions = small_setup
        parsed = _parse_to(tmp_path, dataset, completions)
        rows = read_jsonl(parsed)
        rows[0]["record_id"] = "ghost"
        write_jsonl(parsed, rows)
        out = tmp_path / "report.jsonl"
        assert main(["eval", "--parsed", str(parsed), "--dataset", str(dataset),
                     "--out", str(out)]) == 2


class TestReward:
    def test_totals_match_engine(self, small_setup, tmp_path):
        records, dataset, completions = small_setup
        parsed = _parse_to(tmp_path, dataset, completions)
        out = tmp_path / "rewards.jsonl"
        assert main(["reward", "--parsed", str(parsed), "--dataset", str(dataset),
                     "--out", str(out)]) == 0
        rows = read_jsonl(out)
        texts = {r["record_id"]: r["text"] for r in read_jsonl(completions)}
        by_id = {r.id: r for r in records}
        for row in rows:
            record = by_id[row["record_id"]]
            expected = reward_total(
                parse_completion(texts[record.id], record, "lenient"), record
            )
            assert row["total"] == expected.total
            assert row["gated"] == expected.gated

    def test_perfect_completion_scores_one(self, tmp_path, fixture_corpus):
        record = fixture_corpus[0]
        dataset = tmp_path / "data.jsonl"
        save_dataset([record], dataset)
        frag = " ".join(record.sentence.split()[:4])
        rendered = render_target(record, DEFAULT_TEMPLATE)
        head, answer = rendered.split("<answer>")
        think = (f'The span "{frag}" indicates the label because the syntax leads to it ; '
                 "therefore it implies a cause and suggests Used-For → done .")
        text = f"{head}<think>\n{think}\n</think>\n<answer>{answer}"
        completions = tmp_path / "completions.jsonl"
        write_jsonl(completions, [{"record_id": record.id, "sample_index": 0, "text": text}])
        parsed = _parse_to(tmp_path, dataset, completions)
        out = tmp_path / "rewards.jsonl"
        assert main(["reward", "--parsed", str(parsed), "--dataset", str(dataset),
                     "--out", str(out)]) == 0
        assert read_jsonl(out)[0]["total"] == 1.0

    def test_gated_completion_scores_zero(self, small_setup, tmp_path):
        _, dataset, completions = small_setup
        parsed = _parse_to(tmp_path, dataset, completions)
        out = tmp_path / "rewards.jsonl"
        assert main(["reward", "--parsed", str(parsed), "--dataset", str(dataset),
                     "--out", str(out)]) == 0
        broken = read_jsonl(out)[2]
        assert broken["gated"] is True and broken["total"] == 0.0

    def test_weights_override(self, small_setup, tmp_path):
        _, dataset, completions = small_setup
        parsed = _parse_to(tmp_path, dataset, completions)
        out = tmp_path / "rewards.jsonl"
        assert main(["reward", "--parsed", str(parsed), "--dataset", str(dataset),
                     "--weights", "1,0,0,0", "--task", "ner", "--out", str(out)]) == 0
        for row in read_jsonl(out):
            assert row["total"] == (0.0 if row["gated"] else row["r_f1"])

    def test_config_error_exit_code(self, small_setup, tmp_path):
        _, dataset, completions = small_setup
        parsed = _parse_to(tmp_path, dataset, completions)
        bad = tmp_path / "cfg.json"
        bad.write_text('{"w1": -1}', encoding="utf-8")
        assert main(["reward", "--parsed", str(parsed), "--dataset", str(dataset),
                     "--config", str(bad), "--out", str(tmp_path / "r.jsonl")]) == 2


class TestGrpo:
    def _groups_file(self, tmp_path, rows):
        path = tmp_path / "groups.jsonl"
        write_jsonl(path, rows)
        return path

    def test_identical_policy_objective_zero(self, tmp_path):
        logp = [-0.5, -1.5]
        rows = [
            {"group_id": "g", "reward": r, "logp": logp, "logp_old": logp, "logp_ref": logp}
            for r in (0.0, 1.0)
        ]
        out = tmp_path / "obj.jsonl"
        assert main(["grpo", "--groups", str(self._groups_file(tmp_path, rows)),
                     "--out", str(out)]) == 0
        assert read_jsonl(out)[0]["objective"] == 0.0

    def test_documented_advantages(self, tmp_path):
        rows = [
            {"group_id": "g", "reward": r, "logp": [-1.0], "logp_old": [-1.0],
             "logp_ref": [-1.0]}
            for r in (1.0, 2.0, 3.0)
        ]
        out = tmp_path / "obj.jsonl"
        assert main(["grpo", "--groups", str(self._groups_file(tmp_path, rows)),
                     "--out", str(out)]) == 0
        advs = read_jsonl(out)[0]["advantages"]
        assert advs == pytest.approx([-1.2247, 0.0, 1.2247], abs=1e-4)

    def test_permutation_invariant_objective(self, tmp_path):
        rows = [
            {"group_id": "g", "reward": r, "logp": lp, "logp_old": lo, "logp_ref": lp}
            for r, lp, lo in [
                (0.2, [-0.4, -0.6], [-0.5, -0.5]),
                (0.9, [-1.2], [-1.0]),
                (0.5, [-0.3, -0.2, -0.8], [-0.4, -0.1, -0.9]),
            ]
        ]
        out_a, out_b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert main(["grpo", "--groups", str(self._groups_file(tmp_path, rows)),
                     "--out", str(out_a)]) == 0
        write_jsonl(tmp_path / "groups.jsonl", rows[::-1])
        assert main(["grpo", "--groups", str(tmp_path / "groups.jsonl"),
                     "--out", str(out_b)]) == 0
        assert read_jsonl(out_a)[0]["objective"] == read_jsonl(out_b)[0]["objective"]

    def test_group_too_small_surfaced_per_group(self, tmp_path):
        rows = [
            {"group_id": "tiny", "reward": 0.5, "logp": [-1.0], "logp_old": [-1.0],
             "logp_ref": [-1.0]},
            {"group_id": "ok", "reward": 0.0, "logp": [-1.0], "logp_old": [-1.0],
             "logp_ref": [-1.0]},
            {"group_id": "ok", "reward": 1.0, "logp": [-1.0], "logp_old": [-1.0],
             "logp_ref": [-1.0]},
        ]
        out = tmp_path / "obj.jsonl"
        assert main(["grpo", "--groups", str(self._groups_file(tmp_path, rows)),
                     "--out", str(out)]) == 0
        lines = read_jsonl(out)
        assert "error" in lines[0]
        assert "objective" in lines[1]
        assert lines[-1]["n_groups"] == 1


class TestDataset:
    def test_stats_matches_committed(self, fixture_path, fixture_stats_path, tmp_path):
        out = tmp_path / "stats.json"
        assert main(["dataset", "stats", "--dataset", str(fixture_path),
                     "--out", str(out)]) == 0
        assert out.read_bytes() == fixture_stats_path.read_bytes()

    def test_sft_cross_product(self, fixture_path, tmp_path):
        small = tmp_path / "small.jsonl"
        save_dataset(load_dataset(fixture_path)[:10], small)
        out = tmp_path / "sft.jsonl"
        assert main(["dataset", "sft", "--dataset", str(small), "--tasks", "all",
                     "--out", str(out)]) == 0
        assert len(read_jsonl(out)) == 40

    def test_select_deterministic(self, fixture_path, tmp_path):
        out_a, out_b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (out_a, out_b):
            assert main(["dataset", "select", "--dataset", str(fixture_path),
                         "--size", "10", "--seed", "7", "--out", str(out)]) == 0
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_curriculum_output(self, fixture_path, tmp_path):
        out = tmp_path / "plan.json"
        assert main(["dataset", "curriculum", "--dataset", str(fixture_path),
                     "--buckets", "3", "--out", str(out)]) == 0
        plan = json.loads(out.read_text(encoding="utf-8"))
        assert len(plan["schedule"]) == 50

    def test_prompt_prints(self, fixture_path, capsys):
        assert main(["dataset", "prompt", "--dataset", str(fixture_path),
                     "--id", "fix-0000", "--task", "end2end"]) == 0
        out = capsys.readouterr().out
        assert "Entity Definitions" in out

    def test_prompt_unknown_id(self, fixture_path):
        assert main(["dataset", "prompt", "--dataset", str(fixture_path),
                     "--id", "nope"]) == 2


class TestManifest:
    def test_manifest_written(self, small_setup, tmp_path):
        _, dataset, completions = small_setup
        out = tmp_path / "parsed.jsonl"
        assert main(["parse", "--completions", str(completions), "--dataset", str(dataset),
                     "--out", str(out)]) == 0
        manifest = json.loads(
            (tmp_path / "parsed.jsonl.manifest.json").read_text(encoding="utf-8")
        )
        assert manifest["command"] == "parse"
        assert manifest["tool_version"]
        assert len(manifest["config_hash"]) == 64
