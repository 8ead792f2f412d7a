# Parsing model completions: the three-block grammar, strict vs lenient mode,
# and the schema/factual constraint checks.
#
# Run from the repo root:  python3 demos/01_parsing_completions.py

from scireward import check_constraints, parse_completion
from scireward.errors import ParseError
from scireward.synth import make_corpus

record = make_corpus(1, seed=42, min_relations=1)[0]
print("source sentence:")
print(" ", record.sentence)
print()

# A well-formed completion. The answer payload is the JSON object the task
# prompt asks for; reasoning and think blocks wrap it.
good = """\
<reasoning>
1. Scan for entity spans. 2. Pair them against the relation definitions.
</reasoning>
<think>
The phrase "is trained on" suggests a Trained-With relation.
</think>
<answer>
{"ner": [["%s", "%s"]], "rel": []}
</answer>""" % (
    record.sorted_entities()[0].surface,
    record.sorted_entities()[0].etype.value,
)

parsed = parse_completion(good, record, "strict")
print("strict parse of a well-formed completion:")
print("  format flags:", parsed.format.to_dict())
print("  predicted entities:", [(e.surface, e.etype.value) for e in parsed.extraction.sorted_entities()])
print()

# Strict mode names the first violated rule...
try:
    parse_completion('<answer>{"ner": []}</answer>', record, "strict")
except ParseError as exc:
    print("strict parse of a tagless answer fails:", exc)

# ...while lenient mode recovers what it can and records every deviation.
sloppy = 'Sure! Here is the extraction:\n```json\n{"ner": [["Foo", "Gadget"]], "rel": []}\n```'
parsed = parse_completion(sloppy, record, "lenient")
print("\nlenient parse of a code-fenced, untagged answer:")
print("  answer_parses:", parsed.format.answer_parses)
print("  dropped items:", parsed.format.dropped_items, "(unknown type 'Gadget')")
print("  notes:", list(parsed.format.notes))
print()

# Constraint checking implements the constrained-generation view: predictions
# must use the closed type vocabularies and quote surfaces from the sentence.
verdict = check_constraints({"ner": [["NotInSentence", "Method"]], "rel": []}, record)
print("constraint verdict for a fabricated span:")
print("  schema_ok:", verdict.schema_ok, "| factual_ok:", verdict.factual_ok)
for violation in verdict.violations:
    print("  -", violation)
