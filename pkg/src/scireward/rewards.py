"""Composite reward for parsed completions: F1, span overlap, relevancy, rule patterns.

The total is a weighted sum of four components, each clamped to [0, 1]:

    total = w1 * r_f1 + w2 * r_span + w3 * r_relevancy + w4 * r_rule

With the format gate on (the default), a completion with no parseable answer
payload scores a hard 0 regardless of components — the standard convention for
verifiable-reward RL. Setting the weights to (1, 0, 0, 0) reduces the total to
the plain per-record F1 baseline.
"""

from __future__ import annotations

import json
import re
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

from .errors import ConfigError
from .metrics import score_ner, score_rel
from .model import EntityMention, ExtractionRecord, RelationType, normalize_span
from .parsing import ParsedCompletion

RewardTask = Literal["ner", "rel", "end2end"]

# Straight or curly double quotes delimit cited evidence in the think block.
_QUOTED = re.compile(r'"([^"]*)"|“([^“”]*)”')


@dataclass(frozen=True)
class RulePattern:
    """One reasoning-pattern matcher: fires if any term occurs in the think block.

    Terms containing word characters match whole words case-insensitively;
    purely symbolic terms (e.g. an arrow) match as substrings.
    """

    terms: tuple[str, ...]
    weight: float

    def matches(self, text: str) -> bool:
        lowered = text.lower()
        for term in self.terms:
            if re.search(r"\w", term):
                if re.search(rf"(?<!\w){re.escape(term.lower())}(?!\w)", lowered):
                    return True
            elif term in text:
                return True
        return False

    def to_dict(self) -> dict[str, Any]:
        return {"terms": list(self.terms), "weight": self.weight}


_CAUSAL_MARKERS = ("cause", "leads to", "implies", "because", "therefore", "→")


def default_rule_patterns() -> tuple[RulePattern, ...]:
    """Causal markers, relation-name citation, and pattern articulation."""
    causal = tuple(RulePattern((term,), 0.15) for term in _CAUSAL_MARKERS)
    relation_names = RulePattern(tuple(r.value for r in RelationType), 0.25)
    articulation = RulePattern(("suggests", "indicates"), 0.15)
    return causal + (relation_names, articulation)


@dataclass(frozen=True)
class RewardConfig:
    """Weights and knobs of the composite reward; serializable to JSON."""

    w1: float = 0.6            # F1
    w2: float = 0.1            # span overlap
    w3: float = 0.15           # relevancy
    w4: float = 0.15           # rule patterns
    lambda_penalty: float = 0.5
    length_threshold: float = 0.8   # fraction of sentence length, in words
    rule_patterns: tuple[RulePattern, ...] = field(default_factory=default_rule_patterns)
    format_gate: bool = True
    normalized: bool = True    # require w1..w4 to sum to 1

    def validate(self) -> "RewardConfig":
        for name in ("w1", "w2", "w3", "w4"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or value < 0:
                raise ConfigError(name, "must be a non-negative number")
        if self.normalized and abs(self.w1 + self.w2 + self.w3 + self.w4 - 1.0) > 1e-9:
            raise ConfigError("w1", "component weights must sum to 1 in normalized mode")
        if self.lambda_penalty < 0:
            raise ConfigError("lambda_penalty", "must be non-negative")
        if not 0 <= self.length_threshold:
            raise ConfigError("length_threshold", "must be non-negative")
        for i, pattern in enumerate(self.rule_patterns):
            if not pattern.terms:
                raise ConfigError(f"rule_patterns[{i}].terms", "must be non-empty")
            if not 0 <= pattern.weight <= 1:
                raise ConfigError(f"rule_patterns[{i}].weight", "must lie in [0, 1]")
        return self

    @property
    def weights(self) -> tuple[float, float, float, float]:
        return (self.w1, self.w2, self.w3, self.w4)

    def to_dict(self) -> dict[str, Any]:
        return {
            "w1": self.w1,
            "w2": self.w2,
            "w3": self.w3,
            "w4": self.w4,
            "lambda_penalty": self.lambda_penalty,
            "length_threshold": self.length_threshold,
            "rule_patterns": [p.to_dict() for p in self.rule_patterns],
            "format_gate": self.format_gate,
            "normalized": self.normalized,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RewardConfig":
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        known = {
            "w1", "w2", "w3", "w4", "lambda_penalty", "length_threshold",
            "rule_patterns", "format_gate", "normalized",
        }
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown field")
        kwargs = {k: v for k, v in data.items() if k != "rule_patterns"}
        if "rule_patterns" in data:
            raw = data["rule_patterns"]
            if not isinstance(raw, list):
                raise ConfigError("rule_patterns", "must be a list")
            patterns = []
            for i, item in enumerate(raw):
                if not isinstance(item, dict) or "terms" not in item or "weight" not in item:
                    raise ConfigError(f"rule_patterns[{i}]", 'expected {"terms": [...], "weight": w}')
                terms = item["terms"]
                if not isinstance(terms, list) or not all(isinstance(t, str) for t in terms):
                    raise ConfigError(f"rule_patterns[{i}].terms", "must be a list of strings")
                if not isinstance(item["weight"], (int, float)):
                    raise ConfigError(f"rule_patterns[{i}].weight", "must be a number")
                patterns.append(RulePattern(tuple(terms), float(item["weight"])))
            kwargs["rule_patterns"] = tuple(patterns)
        return cls(**kwargs).validate()

    @classmethod
    def from_file(cls, path: str | Path) -> "RewardConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except ValueError as exc:
            raise ConfigError("<root>", f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    def to_file(self, path: str | Path):
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


@dataclass(frozen=True)
class RewardBreakdown:
    """Per-component reward values for one completion."""

    r_f1: float
    r_span: float
    r_relevancy: float
    r_rule: float
    total: float
    gated: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "r_f1": self.r_f1,
            "r_span": self.r_span,
            "r_relevancy": self.r_relevancy,
            "r_rule": self.r_rule,
            "total": self.total,
            "gated": self.gated,
        }


def _clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else x


def reward_f1(pred: ParsedCompletion, gold: ExtractionRecord, task: RewardTask = "end2end") -> float:
    """Per-record F1 of the prediction; shares the scorers with the metrics module."""
    if pred.extraction is None:
        return 0.0
    ner = score_ner(pred.extraction.entities, gold.entities).f1
    rel = score_rel(pred.extraction.relations, gold.relations, strict=False).f1
    if task == "ner":
        return ner
    if task == "rel":
        return rel
    if task == "end2end":
        return (ner + rel) / 2.0
    raise ValueError(f"unknown task: {task!r}")


def _word_set(surface: str) -> frozenset[str]:
    return frozenset(surface.split())


def _jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    union = a | b
    return len(a & b) / len(union) if union else 0.0


def reward_span(pred: ParsedCompletion, gold: ExtractionRecord) -> float:
    """Mean word-level Jaccard over greedily matched same-type entity pairs.

    Each entity is used at most once; ties break by the gold entity's position
    in the sentence, then lexicographically. Returns 0 when nothing overlaps.
    """
    if pred.extraction is None or not pred.extraction.entities or not gold.entities:
        return 0.0
    sentence = normalize_span(gold.sentence)

    def order_of(entity: EntityMention) -> int:
        pos = sentence.find(entity.surface)
        return pos if pos >= 0 else len(sentence)

    pred_list = pred.extraction.sorted_entities()
    gold_list = gold.sorted_entities()
    candidates = []
    for gi, g in enumerate(gold_list):
        g_words = _word_set(g.surface)
        for pi, p in enumerate(pred_list):
            if p.etype is not g.etype:
                continue
            jac = _jaccard(_word_set(p.surface), g_words)
            if jac > 0.0:
                candidates.append((-jac, order_of(g), g.surface, p.surface, gi, pi))
    candidates.sort()

    used_gold: set[int] = set()
    used_pred: set[int] = set()
    total = 0.0
    matched = 0
    for neg_jac, _, _, _, gi, pi in candidates:
        if gi in used_gold or pi in used_pred:
            continue
        used_gold.add(gi)
        used_pred.add(pi)
        total += -neg_jac
        matched += 1
    return total / matched if matched else 0.0


def cited_segments(think: str) -> list[str]:
    """Maximal double-quoted segments of the think block, normalized, empty ones dropped."""
    segments = []
    for match in _QUOTED.finditer(think):
        inner = match.group(1) if match.group(1) is not None else match.group(2)
        norm = normalize_span(inner)
        if norm:
            segments.append(norm)
    return segments


def _longest_common_word_run(a: Sequence[str], b: Sequence[str]) -> int:
    """Length of the longest contiguous word sequence shared by a and b."""
    best = 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
                if cur[j] > best:
                    best = cur[j]
        prev = cur
    return best


def reward_relevancy(pred: ParsedCompletion, gold: ExtractionRecord, cfg: RewardConfig) -> float:
    """Reward evidence grounding: cited segments must occur in the source sentence.

    The grounding score is the fraction of quoted segments found verbatim in
    the (normalized) sentence; with no quotes at all, a shared contiguous run
    of at least 3 words counts as implicit grounding. Citing more than
    length_threshold of the sentence incurs the quadratic length penalty. The
    result is clamped to [0, 1].
    """
    sentence = normalize_span(gold.sentence)
    sentence_words = len(sentence.split())
    segments = cited_segments(pred.think)

    if segments:
        hits = sum(1 for seg in segments if seg in sentence)
        grounding = hits / len(segments)
        cited_words = sum(len(seg.split()) for seg in segments)
    else:
        think_words = normalize_span(pred.think).split()
        run = _longest_common_word_run(think_words, sentence.split())
        grounding = 1.0 if run >= 3 else 0.0
        cited_words = 0

    penalty = 0.0
    if sentence_words and cited_words > cfg.length_threshold * sentence_words:
        ratio = cited_words / sentence_words
        penalty = cfg.lambda_penalty * ratio * ratio
    return _clamp01(grounding - penalty)


def reward_rule(pred: ParsedCompletion, cfg: RewardConfig) -> float:
    """Weighted sum of reasoning patterns present in the think block, clipped to [0, 1]."""
    think = pred.think
    if not think:
        return 0.0
    score = sum(p.weight for p in cfg.rule_patterns if p.matches(think))
    return _clamp01(score)


def reward_total(
    pred: ParsedCompletion,
    gold: ExtractionRecord,
    cfg: RewardConfig | None = None,
    task: RewardTask = "end2end",
) -> RewardBreakdown:
    """All four components plus the weighted total.

    With the format gate on, a completion whose answer payload did not parse
    is scored 0 overall; the components are still reported for diagnostics.
    """
    cfg = cfg if cfg is not None else RewardConfig()
    r_f1 = reward_f1(pred, gold, task)
    r_span = reward_span(pred, gold)
    r_relevancy = reward_relevancy(pred, gold, cfg)
    r_rule = reward_rule(pred, cfg)
    gated = cfg.format_gate and not pred.format.answer_parses
    # Clamp only guards float dust; with normalized weights the exact sum
    # already lies in [0, 1].
    total = 0.0 if gated else _clamp01(
        cfg.w1 * r_f1 + cfg.w2 * r_span + cfg.w3 * r_relevancy + cfg.w4 * r_rule
    )
    return RewardBreakdown(
        r_f1=r_f1,
        r_span=r_span,
        r_relevancy=r_relevancy,
        r_rule=r_rule,
        total=total,
        gated=gated,
    )
