"""Instruction templates for the four extraction task variants.

The entity and relation background texts follow the SciER annotation
guidelines; prompts are assembled from these blocks plus a per-task
instruction carrying the sentence. Assembly is byte-stable for fixed inputs.
"""

from __future__ import annotations

import json
import re

SYSTEM_PROMPT = """\
Respond in the following format:
<reasoning>
Provide step-by-step reasoning to solve the task based on the given instructions and sentence.
</reasoning>
<think>
Cite the specific sentence part (e.g., phrase, verb, or structure) supporting the relation.
Articulate a symbolic pattern you discovered (e.g., "The verb 'achieves' suggests a Method is applied to a Task, implying a relation").
Explain how this pattern leads to the predicted relation, referencing the relationship definition.
Use concise, logical chains (e.g., "X performs Y → relation Z because of definition").
</think>
<answer>
Provide the final answer in JSON format as specified in the instruction.
</answer>"""

NER_BACKGROUND = """\
Extract specific entities from the following sentence. The entities to be identified are: 'Dataset', 'Task', and 'Method'.

### Entity Definitions:

- 'Task': A task in machine learning refers to the specific problem or type of problem that a ML/AI model/method is designed to solve. Tasks can be broad, like classification, regression, or clustering, or they can be very specific, such as Pedestrian Detection, Autonomous Driving, Sentiment Analysis, Named Entity Recognition, and Relation Extraction.

- 'Method': A method entity refers to the approach, algorithm, or technique used to solve a specific task/problem. Methods encompass the computational algorithms, model architectures, and the training procedures that are employed to make predictions or decisions based on data. For example, Convolutional Neural Networks, Dropout, data augmentation, recurrent neural networks.

- 'Dataset': A realistic collection of data that is used for training, validating, or testing the algorithms. These datasets can consist of various forms of data such as text, images, videos, or structured data. For example, MNIST, COCO, AGNews, IMDb.

### Other Notes:

- Generics cannot be used independently to refer to any specific entities, e.g., 'This task', 'the dataset', and 'a public corpus' are not entities.

- The determiners should not be part of an entity span. For example, given span 'the SQuAD v1.1 dataset', where the determiner 'the' should be excluded from the entity span.

- If both the full name and the abbreviation are present in the sentence, annotate the abbreviation and its corresponding full name separately. For instance, '20-newsgroup (20NG)'.

- Only annotate "factual, content-bearing" entities. Task, dataset, and method entities normally have specific names and their meanings are consistent across different papers. For example, "CoNLL03", "SNLI" are factual entities. Annotators should annotate only the minimum necessary to represent the original meaning of task/dataset/method (e.g., "The", "dataset", "public", 'method', 'technique' are often omitted)."""

REL_BACKGROUND = """\
### Relationship Definitions:

- 'Part-Of': This relationship denotes that one entity (e.g., a Method) is a component or a part of another entity (e.g., another Method).

- 'SubClass-Of': Specifies that one entity is a subclass or a specialized version of another entity.

- 'SubTask-Of': Indicates that one Task is a subset or a specific aspect of another broader Task.

- 'Benchmark-For': Shows that a Dataset serves as a standard or benchmark for evaluating the performance of a Method on a Task.

- 'Trained-With': Indicates that a Method is trained using a Dataset.

- 'Evaluated-With': This relationship denotes that a Method is evaluated using a Dataset to test its performance or conduct experiments.

- 'Synonym-Of': Indicates that two entities are considered to have the same or very similar meaning, such as abbreviations.

- 'Used-For': Shows that one entity (e.g., a Method) is utilized for achieving or performing another entity (e.g., a Task). This relationship is highly flexible.

- 'Compare-With': This relationship is used when one entity is compared with another to highlight differences, similarities, or both.

### Notes:

- Determine the 'Relationship' that best describes how the subject and object are related, based on the sentence context.

- Please do not annotate negative relations (e.g., X is not used in Y).

- Annotate a relationship only if there is direct evidence or clear implication in the text. Avoid inferring relationships that are not explicitly mentioned or clearly implied."""

RELATION_CHOICES = (
    "The potential relations are: ['Part-Of', 'SubClass-Of', 'SubTask-Of', 'Benchmark-For', "
    "'Trained-With', 'Evaluated-With', 'Synonym-Of', 'Used-For', 'Compare-With']. "
    "If no relationship exists between a pair, do not include it in the output."
)

_SENTENCE_LINE = "Given the sentence: "


def _sentence_line(sentence: str) -> str:
    # JSON string quoting keeps sentences with embedded double quotes
    # recoverable from the prompt.
    return _SENTENCE_LINE + json.dumps(sentence, ensure_ascii=False)


def sentence_from_prompt(prompt: str) -> str:
    """Recover the sentence a prompt was rendered from (inverse of the task line)."""
    match = re.search(re.escape(_SENTENCE_LINE) + r'"', prompt)
    if match is None:
        raise ValueError("prompt carries no sentence line")
    value, _ = json.JSONDecoder().raw_decode(prompt, match.end() - 1)
    return value


def end_to_end_instruction(sentence: str) -> str:
    return f"""\
{_sentence_line(sentence)}

Extract entities and their relations.

### Instruction:

- Think step-by-step to identify entities ('Dataset', 'Task', 'Method') and their relationships.

- Return the results in JSON format with:

- "ner": a list of [entity, type] pairs.

- "rel": a list of [subject, relation, object] triples."""


def ner_instruction(sentence: str) -> str:
    return f"""\
{_sentence_line(sentence)}

Extract the entities.

### Instruction:

- Think step-by-step to identify entities ('Dataset', 'Task', 'Method').

- Return the results in JSON format with:

- "ner": a list of [entity, type] pairs."""


def re_gold_instruction(sentence: str, entities_json: str) -> str:
    return f"""\
{_sentence_line(sentence)}

The annotated entities are: {entities_json}

Based on the given sentence and the entities with their types, determine the relationship between each pair. {RELATION_CHOICES}

### Instruction:

- Think step-by-step to identify the relationships between the annotated entities.

- Return the results in JSON format with:

- "rel": a list of [subject, relation, object] triples."""


def re_only_instruction(sentence: str) -> str:
    return f"""\
{_sentence_line(sentence)}

Extract the relation triples. {RELATION_CHOICES}

### Instruction:

- Think step-by-step to identify entities ('Dataset', 'Task', 'Method') and the relationships between them.

- Return the results in JSON format with:

- "rel": a list of [subject, relation, object] triples."""
