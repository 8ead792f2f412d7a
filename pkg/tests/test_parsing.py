import json

import pytest

from conftest import make_completion
from scireward.datasets import DEFAULT_TEMPLATE
from scireward.errors import ParseError
from scireward.model import EntityMention, EntityType, ExtractionRecord, RelationTriple, RelationType
from scireward.parsing import parse_completion, render_target, serialize_answer

SOURCE = ExtractionRecord(
    id="r1",
    sentence="BERT is used for question answering on SQuAD .",
    entities=[EntityMention("BERT", EntityType.METHOD),
              EntityMention("SQuAD", EntityType.DATASET),
              EntityMention("question answering", EntityType.TASK)],
    relations=[RelationTriple("BERT", RelationType.USED_FOR, "question answering")],
)


class TestStrict:
    def test_full_grammar(self):
        raw = ('<reasoning>s1</reasoning><think>t1</think>'
               '<answer>{"ner": [["BERT","Method"]], "rel": []}</answer>')
        parsed = parse_completion(raw, SOURCE, "strict")
        assert parsed.reasoning == "s1"
        assert parsed.think == "t1"
        assert parsed.extraction is not None
        assert parsed.extraction.entities == {EntityMention("BERT", EntityType.METHOD)}
        assert not parsed.extraction.relations
        fmt = parsed.format
        assert fmt.has_reasoning and fmt.has_think and fmt.has_answer
        assert fmt.answer_parses and fmt.blocks_in_order

    def test_missing_reasoning(self):
        with pytest.raises(ParseError, match="reasoning"):
            parse_completion('<answer>{"ner": []}</answer>', SOURCE, "strict")

    def test_missing_think_is_allowed(self):
        # Reasoning-only checkpoints emit no think block; their targets must
        # still round-trip through strict parsing.
        raw = make_completion(ner=[("BERT", "Method")])
        parsed = parse_completion(raw, SOURCE, "strict")
        assert parsed.think == ""
        assert not parsed.format.has_think

    def test_duplicate_answer_blocks(self):
        raw = ('<reasoning>s</reasoning><answer>{"ner": []}</answer>'
               '<answer>{"ner": []}</answer>')
        with pytest.raises(ParseError, match="multiple answer"):
            parse_completion(raw, SOURCE, "strict")

    def test_nested_tags_rejected(self):
        raw = '<reasoning>a<reasoning>b</reasoning></reasoning><answer>{"ner": []}</answer>'
        with pytest.raises(ParseError, match="multiple reasoning"):
            parse_completion(raw, SOURCE, "strict")

    def test_out_of_order(self):
        raw = '<answer>{"ner": []}</answer><reasoning>s</reasoning>'
        with pytest.raises(ParseError, match="out of order"):
            parse_completion(raw, SOURCE, "strict")

    def test_bad_json(self):
        raw = "<reasoning>s</reasoning><answer>{nope}</answer>"
        with pytest.raises(ParseError, match="not valid JSON"):
            parse_completion(raw, SOURCE, "strict")

    def test_unknown_type_fails(self):
        raw = make_completion(ner=[("X", "Gadget")])
        with pytest.raises(ParseError, match="Gadget"):
            parse_completion(raw, SOURCE, "strict")

    def test_object_items_rejected(self):
        raw = make_completion(answer='{"ner": [{"entity": "BERT", "type": "Method"}], "rel": []}')
        with pytest.raises(ParseError, match="malformed ner item"):
            parse_completion(raw, SOURCE, "strict")

    def test_unclosed_answer(self):
        raw = '<reasoning>s</reasoning><answer>{"ner": []}'
        with pytest.raises(ParseError, match="unclosed answer"):
            parse_completion(raw, SOURCE, "strict")


class TestLenient:
    def test_never_raises_on_garbage(self):
        parsed = parse_completion("complete nonsense", SOURCE, "lenient")
        assert parsed.extraction is None
        assert not parsed.format.answer_parses

    def test_unknown_type_dropped_and_counted(self):
        raw = make_completion(answer='{"ner": [["X","Gadget"]], "rel": []}')
        parsed = parse_completion(raw, SOURCE, "lenient")
        assert parsed.extraction is not None
        assert not parsed.extraction.entities
        assert parsed.format.dropped_items == 1

    def test_dict_form_items_accepted(self):
        raw = make_completion(
            answer='{"ner": [{"entity": "BERT", "type": "Method"}],'
                   ' "rel": [{"subject": "BERT", "relation": "Used-For",'
                   ' "object": "question answering"}]}'
        )
        parsed = parse_completion(raw, SOURCE, "lenient")
        assert parsed.extraction.entities == {EntityMention("BERT", EntityType.METHOD)}
        assert len(parsed.extraction.relations) == 1

    def test_code_fence_recovery(self):
        raw = ('Here you go:\n```json\n'
               '{"ner": [["BERT", "Method"]], "rel": []}\n```\n')
        parsed = parse_completion(raw, SOURCE, "lenient")
        assert parsed.format.answer_parses
        assert not parsed.format.has_answer
        assert parsed.extraction.entities == {EntityMention("BERT", EntityType.METHOD)}

    def test_first_answer_block_wins(self):
        raw = ('<answer>{"ner": [["BERT", "Method"]], "rel": []}</answer>'
               '<answer>{"ner": [["SQuAD", "Dataset"]], "rel": []}</answer>')
        parsed = parse_completion(raw, SOURCE, "lenient")
        assert parsed.extraction.entities == {EntityMention("BERT", EntityType.METHOD)}

    def test_outermost_pair_on_nested_tags(self):
        raw = "<think>outer <think>inner</think> tail</think><answer>{\"ner\": []}</answer>"
        parsed = parse_completion(raw, SOURCE, "lenient")
        assert parsed.think == "outer <think>inner</think> tail"

    def test_missing_blocks_noted(self):
        parsed = parse_completion('<answer>{"ner": []}</answer>', SOURCE, "lenient")
        assert not parsed.format.has_reasoning
        assert any("missing reasoning" in note for note in parsed.format.notes)

    def test_lenient_dominates_strict(self, fixture_corpus):
        for record in fixture_corpus[:10]:
            raw = render_target(record, DEFAULT_TEMPLATE)
            strict = parse_completion(raw, record, "strict")
            lenient = parse_completion(raw, record, "lenient")
            assert strict.extraction == lenient.extraction


class TestRenderTarget:
    def test_empty_record(self):
        record = ExtractionRecord(id="e", sentence="nothing here .")
        raw = render_target(record, DEFAULT_TEMPLATE)
        assert raw.startswith("<reasoning>")
        assert '{"ner": [], "rel": []}' in raw

    def test_single_entity_serialization(self):
        record = ExtractionRecord(
            id="one", sentence="BERT wins .",
            entities=[EntityMention("BERT", EntityType.METHOD)],
        )
        assert '["BERT", "Method"]' in render_target(record, DEFAULT_TEMPLATE)

    def test_answer_key_order(self):
        payload = serialize_answer(SOURCE)
        assert payload.index('"ner"') < payload.index('"rel"')

    def test_round_trip_over_fixture_corpus(self, fixture_corpus):
        for record in fixture_corpus:
            raw = render_target(record, DEFAULT_TEMPLATE)
            parsed = parse_completion(raw, record, "strict")
            assert parsed.extraction == record

    def test_round_trip_with_quotes_in_sentence(self):
        record = ExtractionRecord(
            id="q", sentence='The so-called "U-Net" model segments images .',
            entities=[EntityMention('"U-Net"', EntityType.METHOD)],
        )
        parsed = parse_completion(render_target(record, DEFAULT_TEMPLATE), record, "strict")
        assert parsed.extraction == record


class TestNoGoldLeak:
    def test_identical_output_for_different_gold(self):
        raw = make_completion(ner=[("BERT", "Method")], think='see "BERT"')
        variant = ExtractionRecord(
            id=SOURCE.id, sentence=SOURCE.sentence,
            entities=[EntityMention("SQuAD", EntityType.DATASET)],
        )
        assert parse_completion(raw, SOURCE, "lenient") == parse_completion(
            raw, variant, "lenient"
        )
        assert parse_completion(raw, SOURCE, "strict") == parse_completion(
            raw, variant, "strict"
        )
