# The policy-objective math kernel: group-normalized advantages, ratio
# clipping, the KL estimator, the objective value, and gradient coefficients.
#
# Run from the repo root:  python3 demos/04_grpo_quantities.py

import numpy as np

from scireward import (
    GrpoConfig,
    GrpoGroup,
    advantages,
    clipped_term,
    gradient_coefficient,
    kl_term,
    objective,
)

# Advantages are the group-normalized rewards: mean 0, population std 1.
rewards = [0.0, 0.25, 0.5, 1.0]
adv = advantages(rewards)
print("rewards:   ", rewards)
print("advantages:", np.round(adv, 4).tolist())
print(f"mean={adv.mean():+.2e}  population std={adv.std():.6f}")
print()

# The clipped surrogate caps how far the probability ratio can push a token.
for ratio in (0.5, 1.0, 1.5):
    print(f"clipped_term(ratio={ratio}, advantage=+1, eps=0.2) = "
          f"{clipped_term(ratio, 1.0, 0.2):.2f}")
print()

# The per-token KL estimator is nonnegative and zero only at agreement.
print("kl_term at agreement:      ", kl_term(-1.0, -1.0))
print("kl_term at a log-2 gap:    ", round(kl_term(-np.log(2), 0.0), 4))
print()

# A small group: three completions with different token counts.
rng = np.random.default_rng(0)
lt = [rng.uniform(-2, 0, size=n) for n in (4, 2, 3)]
lo = [seq + rng.uniform(-0.2, 0.2, size=seq.shape) for seq in lt]
lr = [seq + rng.uniform(-0.2, 0.2, size=seq.shape) for seq in lt]
group = GrpoGroup(rewards=(0.1, 0.9, 0.4),
                  logp_theta=tuple(lt), logp_old=tuple(lo), logp_ref=tuple(lr))
result = objective(group, GrpoConfig(epsilon=0.2, beta=0.04))
print("objective value:", round(result.value, 6))
for i, terms in enumerate(result.per_token_terms):
    print(f"  output {i}: advantage={result.advantages[i]:+.3f}, "
          f"per-token terms={np.round(terms, 3).tolist()}")
print()

# Gradient coefficients: supervised targets weight every token by 1; the
# clipped objective weights by ratio*advantage until the clip deactivates it.
print("GC (sft):", gradient_coefficient("sft"))
print("GC (in band, on-policy):",
      gradient_coefficient("grpo", advantage=0.8, logp_theta=-1.0, logp_old=-1.0,
                           epsilon=0.2, beta=0.0))
print("GC (clipped out):",
      gradient_coefficient("grpo", advantage=0.8, logp_theta=-0.6, logp_old=-1.2,
                           epsilon=0.2, beta=0.0))
