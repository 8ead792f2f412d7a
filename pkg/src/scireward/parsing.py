"""Parsing of three-block completions and rendering of supervision targets.

Completions follow the grammar the system prompt fixes:

    <reasoning> ... </reasoning>   templated reasoning steps
    <think> ... </think>           free-form evidence citation (optional for
                                   checkpoints trained without it)
    <answer> {"ner": [...], "rel": [...]} </answer>

Strict mode enforces the grammar and raises ParseError on the first violated
rule; lenient mode recovers whatever it can and records every deviation in
the FormatReport.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Literal

from .errors import ParseError, UnknownTypeError
from .model import (
    EntityMention,
    EntityType,
    ExtractionRecord,
    RelationTriple,
    RelationType,
    normalize_span,
    resolve_triple_types,
)

if TYPE_CHECKING:  # pragma: no cover - import cycle is type-only
    from .datasets import ReasoningTemplate

Mode = Literal["strict", "lenient"]

TAGS = ("reasoning", "think", "answer")


@dataclass(frozen=True)
class FormatReport:
    """Per-completion format diagnostics; every flag is testable from the raw text."""

    has_reasoning: bool
    has_think: bool
    has_answer: bool
    answer_parses: bool
    blocks_in_order: bool
    dropped_items: int = 0
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "has_reasoning": self.has_reasoning,
            "has_think": self.has_think,
            "has_answer": self.has_answer,
            "answer_parses": self.answer_parses,
            "blocks_in_order": self.blocks_in_order,
            "dropped_items": self.dropped_items,
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class ParsedCompletion:
    """A completion decomposed into its blocks plus the extracted prediction.

    `extraction` is present iff the answer payload parsed; it borrows id and
    sentence from the prompt record and never copies gold annotations.
    """

    reasoning: str
    think: str
    answer_raw: str
    extraction: ExtractionRecord | None
    format: FormatReport


@dataclass(frozen=True)
class _Block:
    inner: str
    start: int       # offset of the opening tag
    end: int         # offset one past the closing tag (or len(raw) if unclosed)
    closed: bool


def _find_block(raw: str, tag: str) -> _Block | None:
    """Outermost block for `tag`: first opening tag to its balance-matching close.

    Nested identical tags are swallowed into the block; a second sequential
    block is left alone (callers take the first). Unclosed blocks run to the
    end of the text.
    """
    open_tag, close_tag = f"<{tag}>", f"</{tag}>"
    first = raw.find(open_tag)
    if first == -1:
        return None
    events = sorted(
        [(m.start(), 1, m.end()) for m in re.finditer(re.escape(open_tag), raw)]
        + [(m.start(), -1, m.end()) for m in re.finditer(re.escape(close_tag), raw)]
    )
    depth = 0
    for pos, kind, end in events:
        if pos < first:
            continue
        depth += kind
        if kind == -1 and depth == 0:
            return _Block(inner=raw[first + len(open_tag):pos], start=first, end=end, closed=True)
    return _Block(inner=raw[first + len(open_tag):], start=first, end=len(raw), closed=False)


def _find_answer_object(text: str) -> dict[str, Any] | None:
    """First JSON object in `text` carrying a "ner" or "rel" key.

    Scans every brace candidate, so payloads inside code fences or surrounded
    by prose are recovered.
    """
    decoder = json.JSONDecoder()
    idx = 0
    while True:
        brace = text.find("{", idx)
        if brace == -1:
            return None
        try:
            obj, _ = decoder.raw_decode(text, brace)
        except ValueError:
            idx = brace + 1
            continue
        if isinstance(obj, dict) and ("ner" in obj or "rel" in obj):
            return obj
        idx = brace + 1


def _decode_payload(
    payload: dict[str, Any], strict: bool
) -> tuple[set[EntityMention], list[RelationTriple], int, list[str]]:
    """Turn an answer object into entities and triples.

    Strict mode accepts array items only and raises on the first bad item;
    lenient mode additionally accepts object items, drops anything invalid,
    and reports the drops.
    """
    entities: set[EntityMention] = set()
    triples: list[RelationTriple] = []
    dropped = 0
    notes: list[str] = []

    def fail_or_drop(message: str):
        nonlocal dropped
        if strict:
            raise ParseError(message)
        dropped += 1
        notes.append(message)

    ner_items = payload.get("ner", [])
    if not isinstance(ner_items, list):
        if strict:
            raise ParseError('"ner" must be a list')
        notes.append('"ner" is not a list')
        ner_items = []
    for item in ner_items:
        if isinstance(item, dict) and not strict:
            item = [item.get("entity"), item.get("type")]
        if not (isinstance(item, (list, tuple)) and len(item) == 2
                and all(isinstance(x, str) for x in item)):
            fail_or_drop(f"malformed ner item: {item!r}")
            continue
        surface, etype_raw = item
        try:
            etype = EntityType.parse(etype_raw)
        except UnknownTypeError as exc:
            fail_or_drop(str(exc))
            continue
        if not normalize_span(surface):
            fail_or_drop("empty entity surface")
            continue
        entities.add(EntityMention(surface, etype))

    rel_items = payload.get("rel", [])
    if not isinstance(rel_items, list):
        if strict:
            raise ParseError('"rel" must be a list')
        notes.append('"rel" is not a list')
        rel_items = []
    for item in rel_items:
        if isinstance(item, dict) and not strict:
            item = [item.get("subject"), item.get("relation"), item.get("object")]
        if not (isinstance(item, (list, tuple)) and len(item) == 3
                and all(isinstance(x, str) for x in item)):
            fail_or_drop(f"malformed rel item: {item!r}")
            continue
        subj, rel_raw, obj = item
        try:
            relation = RelationType.parse(rel_raw)
        except UnknownTypeError as exc:
            fail_or_drop(str(exc))
            continue
        if not normalize_span(subj) or not normalize_span(obj):
            fail_or_drop("empty relation argument")
            continue
        triples.append(RelationTriple(subj, relation, obj))

    return entities, triples, dropped, notes


def _build_extraction(
    source: ExtractionRecord, entities: set[EntityMention], triples: list[RelationTriple]
) -> ExtractionRecord:
    # Argument types are resolved from the prediction's own entity list, the
    # same rule the dataset loader applies to gold.
    return ExtractionRecord(
        id=source.id,
        sentence=source.sentence,
        entities=frozenset(entities),
        relations=resolve_triple_types(triples, entities),
    )


def _parse_strict(raw: str, source: ExtractionRecord) -> ParsedCompletion:
    opens = {tag: raw.count(f"<{tag}>") for tag in TAGS}
    closes = {tag: raw.count(f"</{tag}>") for tag in TAGS}

    for tag in ("reasoning", "answer"):
        if opens[tag] == 0:
            raise ParseError(f"missing {tag} block")
        if opens[tag] > 1 or closes[tag] > 1:
            raise ParseError(f"multiple {tag} blocks")
        if closes[tag] == 0:
            raise ParseError(f"unclosed {tag} block")
    # <think> is optional: checkpoints trained on reasoning-only targets emit
    # none, and rendered targets must round-trip through strict parsing.
    think_present = opens["think"] > 0 or closes["think"] > 0
    if think_present:
        if opens["think"] != 1 or closes["think"] != 1:
            raise ParseError("multiple think blocks")

    blocks = {tag: _find_block(raw, tag) for tag in TAGS}
    for tag in TAGS:
        block = blocks[tag]
        if block is not None and not block.closed:
            raise ParseError(f"unclosed {tag} block")

    present = [blocks[tag] for tag in TAGS if blocks[tag] is not None]
    for before, after in zip(present, present[1:]):
        if not before.end <= after.start:
            raise ParseError("blocks out of order")

    answer = blocks["answer"]
    assert answer is not None
    try:
        payload = json.loads(answer.inner.strip())
    except ValueError:
        raise ParseError("answer payload is not valid JSON") from None
    if not isinstance(payload, dict):
        raise ParseError("answer payload is not a JSON object")
    entities, triples, _, _ = _decode_payload(payload, strict=True)

    report = FormatReport(
        has_reasoning=True,
        has_think=think_present,
        has_answer=True,
        answer_parses=True,
        blocks_in_order=True,
    )
    return ParsedCompletion(
        reasoning=blocks["reasoning"].inner.strip(),
        think=blocks["think"].inner.strip() if blocks["think"] else "",
        answer_raw=answer.inner.strip(),
        extraction=_build_extraction(source, entities, triples),
        format=report,
    )


def _parse_lenient(raw: str, source: ExtractionRecord) -> ParsedCompletion:
    notes: list[str] = []
    blocks = {tag: _find_block(raw, tag) for tag in TAGS}
    for tag in TAGS:
        block = blocks[tag]
        if block is not None and not block.closed:
            notes.append(f"unclosed {tag} block")
        if raw.count(f"<{tag}>") > 1:
            notes.append(f"multiple {tag} blocks; using the first")

    present = [blocks[tag] for tag in TAGS if blocks[tag] is not None]
    in_order = all(a.start < b.start for a, b in zip(present, present[1:]))

    payload = None
    answer = blocks["answer"]
    if answer is not None:
        payload = _find_answer_object(answer.inner)
    if payload is None:
        payload = _find_answer_object(raw)
        if payload is not None and answer is not None:
            notes.append("answer payload recovered outside the answer block")

    extraction = None
    dropped = 0
    if payload is not None:
        entities, triples, dropped, item_notes = _decode_payload(payload, strict=False)
        notes.extend(item_notes)
        extraction = _build_extraction(source, entities, triples)
    else:
        notes.append("no answer payload found")

    for tag in TAGS:
        if blocks[tag] is None:
            notes.append(f"missing {tag} block")

    report = FormatReport(
        has_reasoning=blocks["reasoning"] is not None,
        has_think=blocks["think"] is not None,
        has_answer=answer is not None,
        answer_parses=extraction is not None,
        blocks_in_order=in_order,
        dropped_items=dropped,
        notes=tuple(notes),
    )
    return ParsedCompletion(
        reasoning=blocks["reasoning"].inner.strip() if blocks["reasoning"] else "",
        think=blocks["think"].inner.strip() if blocks["think"] else "",
        answer_raw=answer.inner.strip() if answer else "",
        extraction=extraction,
        format=report,
    )


def parse_completion(raw: str, source: ExtractionRecord, mode: Mode = "lenient") -> ParsedCompletion:
    """Parse a raw completion against the prompt record it answers.

    Only source.id and source.sentence are read; gold annotations never leak
    into the parsed prediction.
    """
    if mode == "strict":
        return _parse_strict(raw, source)
    if mode == "lenient":
        return _parse_lenient(raw, source)
    raise ValueError(f"unknown mode: {mode!r}")


def serialize_answer(record: ExtractionRecord) -> str:
    """Canonical answer payload: "ner" then "rel", entries in sorted order."""
    payload = {
        "ner": [[e.surface, e.etype.value] for e in record.sorted_entities()],
        "rel": [[t.subject, t.relation.value, t.object] for t in record.sorted_relations()],
    }
    return json.dumps(payload, ensure_ascii=False)


def render_target(record: ExtractionRecord, template: "ReasoningTemplate") -> str:
    """Render the supervision target: reasoning block followed by the answer block.

    The output strict-parses back to an extraction equal to `record`.
    """
    return (
        "<reasoning>\n"
        f"{template.render(record)}\n"
        "</reasoning>\n"
        "<answer>\n"
        f"{serialize_answer(record)}\n"
        "</answer>"
    )
