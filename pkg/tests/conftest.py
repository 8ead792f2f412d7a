import json
from pathlib import Path

import pytest

from scireward.datasets import load_dataset

FIXTURE_DIR = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixture_path() -> Path:
    return FIXTURE_DIR / "synthetic_50.jsonl"


@pytest.fixture(scope="session")
def fixture_stats_path() -> Path:
    return FIXTURE_DIR / "synthetic_50.stats.json"


@pytest.fixture(scope="session")
def fixture_corpus(fixture_path):
    return load_dataset(fixture_path)


def make_completion(ner=(), rel=(), reasoning="1. scan. 2. pair. 3. extract.",
                    think=None, answer=None) -> str:
    """Assemble a raw three-block completion for tests."""
    parts = [f"<reasoning>\n{reasoning}\n</reasoning>"]
    if think is not None:
        parts.append(f"<think>\n{think}\n</think>")
    if answer is None:
        answer = json.dumps({"ner": [list(e) for e in ner], "rel": [list(t) for t in rel]})
    parts.append(f"<answer>\n{answer}\n</answer>")
    return "\n".join(parts)


# Report one line per acceptance criterion at the end of the run.
_acceptance_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid and report.when == "call":
        _acceptance_outcomes[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in sorted(_acceptance_outcomes.items()):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status} {name}")
