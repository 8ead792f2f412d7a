"""Reward engineering and evaluation toolkit for verifiable-reward RL on
scientific information extraction.

The package covers the full loop around an external trainer: parsing
structured completions, scoring them with a composite verifiable reward,
computing group-relative policy objective quantities, evaluating under the
NER / Rel / Rel+ protocol with Best@K aggregates, and building supervision
datasets (multi-task, templated-reasoning, curriculum, and subset selection).
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    GroupTooSmall,
    MissingRecord,
    ParseError,
    SchemaError,
    SciRewardError,
    SizeTooLarge,
    UnknownTypeError,
)
from .model import (
    ConstraintVerdict,
    EntityMention,
    EntityType,
    ExtractionRecord,
    RelationTriple,
    RelationType,
    check_constraints,
    normalize_span,
    resolve_triple_types,
)
from .parsing import (
    FormatReport,
    ParsedCompletion,
    parse_completion,
    render_target,
    serialize_answer,
)
from .metrics import (
    AtKReport,
    EvalReport,
    PRF,
    evaluate_pairs,
    record_f1,
    score_at_k,
    score_ner,
    score_rel,
)
from .rewards import (
    RewardBreakdown,
    RewardConfig,
    RulePattern,
    default_rule_patterns,
    reward_f1,
    reward_relevancy,
    reward_rule,
    reward_span,
    reward_total,
)
from .grpo import (
    GrpoConfig,
    GrpoGroup,
    GrpoObjective,
    advantages,
    clipped_term,
    gradient_coefficient,
    kl_term,
    objective,
)
from .datasets import (
    CurriculumBucket,
    CurriculumPlan,
    DEFAULT_TEMPLATE,
    ReasoningTemplate,
    SelectionReport,
    SftExample,
    TaskKind,
    build_curriculum,
    corpus_stats,
    difficulty,
    load_dataset,
    make_sft_dataset,
    render_prompt,
    save_dataset,
    select_subset,
    task_projection,
)

__all__ = [name for name in dir() if not name.startswith("_")]
