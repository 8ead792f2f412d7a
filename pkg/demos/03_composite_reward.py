# The composite reward: F1 + span overlap + relevancy + rule patterns, with
# the format gate and the F1-only reduction.
#
# Run from the repo root:  python3 demos/03_composite_reward.py

from scireward import RewardConfig, parse_completion, render_target, reward_total
from scireward.datasets import DEFAULT_TEMPLATE
from scireward.synth import make_corpus

record = make_corpus(1, seed=3, min_relations=1)[0]
print("sentence:", record.sentence)
print()

frag = " ".join(record.sentence.split()[:4])
rendered = render_target(record, DEFAULT_TEMPLATE)
head, answer = rendered.split("<answer>")

completions = {
    # Perfect extraction, grounded citation, causal reasoning markers.
    "ideal": (
        f"{head}<think>\nThe span \"{frag}\" indicates the labels because the "
        "wording leads to them ; therefore it implies a cause and suggests "
        "Used-For → done .\n</think>\n<answer>" + answer
    ),
    # Right answer, but the think block cites text that is not in the sentence.
    "ungrounded": (
        f"{head}<think>\nI recall \"quantum blockchain synergies\" somewhere.\n"
        "</think>\n<answer>" + answer
    ),
    # No parseable answer: the format gate zeroes the reward.
    "malformed": "<reasoning>steps</reasoning><answer>oops, no json</answer>",
}

cfg = RewardConfig()
print(f"default weights: w1={cfg.w1} w2={cfg.w2} w3={cfg.w3} w4={cfg.w4}")
print(f"{'completion':<12} {'r_f1':>6} {'r_span':>7} {'r_rel':>6} {'r_rule':>7} "
      f"{'total':>6} gated")
for name, raw in completions.items():
    parsed = parse_completion(raw, record, "lenient")
    b = reward_total(parsed, record, cfg)
    print(f"{name:<12} {b.r_f1:>6.3f} {b.r_span:>7.3f} {b.r_relevancy:>6.3f} "
          f"{b.r_rule:>7.3f} {b.total:>6.3f} {b.gated}")

# Setting the weights to (1, 0, 0, 0) recovers the plain F1 baseline reward.
f1_only = RewardConfig(w1=1.0, w2=0.0, w3=0.0, w4=0.0).validate()
parsed = parse_completion(completions["ungrounded"], record, "lenient")
print("\nF1-only reduction on the ungrounded completion:",
      reward_total(parsed, record, f1_only).total)
