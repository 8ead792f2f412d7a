"""Numerical core of the group-relative policy objective.

Computes group-normalized advantages, the clipped surrogate, the per-token KL
penalty, the objective value, and the per-token gradient coefficients. No
parameters are updated here; this is the verifiable math kernel an external
trainer can test against.

Reductions over group members use exactly-rounded summation (math.fsum), so
the objective is bit-identical under permutations of the group.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import GroupTooSmall

DEFAULT_EPSILON = 0.2
DEFAULT_BETA = 0.04
DEFAULT_STD_FLOOR = 1e-6


@dataclass(frozen=True)
class GrpoConfig:
    epsilon: float = DEFAULT_EPSILON    # clip radius
    beta: float = DEFAULT_BETA          # KL penalty weight
    std_floor: float = DEFAULT_STD_FLOOR

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.beta < 0.0:
            raise ValueError("beta must be non-negative")
        if self.std_floor <= 0.0:
            raise ValueError("std_floor must be positive")


@dataclass(frozen=True)
class GrpoGroup:
    """G sampled outputs for one prompt: sequence rewards plus aligned per-token
    log-probabilities under the policy, the behavior policy, and the reference."""

    rewards: tuple[float, ...]
    logp_theta: tuple[np.ndarray, ...]
    logp_old: tuple[np.ndarray, ...]
    logp_ref: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.rewards) < 2:
            raise GroupTooSmall(f"group has {len(self.rewards)} outputs, need at least 2")
        object.__setattr__(self, "rewards", tuple(float(r) for r in self.rewards))
        for name in ("logp_theta", "logp_old", "logp_ref"):
            arrays = tuple(np.asarray(a, dtype=float) for a in getattr(self, name))
            object.__setattr__(self, name, arrays)
        if not len(self.rewards) == len(self.logp_theta) == len(self.logp_old) == len(self.logp_ref):
            raise ValueError("rewards and log-prob sequences must have equal group size")
        for lt, lo, lr in zip(self.logp_theta, self.logp_old, self.logp_ref):
            if not len(lt) == len(lo) == len(lr):
                raise ValueError("per-output log-prob sequences must be aligned")
            if len(lt) == 0:
                raise ValueError("outputs must contain at least one token")

    @property
    def size(self) -> int:
        return len(self.rewards)


def advantages(rewards: Sequence[float], std_floor: float = DEFAULT_STD_FLOOR) -> np.ndarray:
    """Group-normalized advantages: (R_i - mean) / population std.

    Degenerate groups (std below the floor) get all-zero advantages rather
    than an error; they are common early in training when every completion
    fails the format gate. The advantage of output i is constant across its
    tokens. Summation is exactly rounded, so the result is invariant under
    permutation of the group.
    """
    values = [float(r) for r in rewards]
    n = len(values)
    if n < 2:
        raise GroupTooSmall(f"need at least 2 rewards, got {n}")
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    std = math.sqrt(var)
    if std < std_floor:
        return np.zeros(n)
    return np.array([(v - mean) / std for v in values])


def clipped_term(ratio, advantage, epsilon: float = DEFAULT_EPSILON):
    """min(ratio * A, clip(ratio, 1-eps, 1+eps) * A). Accepts scalars or arrays.

    Callers guarantee ratio > 0 (it is a probability ratio).
    """
    clipped = np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon)
    result = np.minimum(np.asarray(ratio) * advantage, clipped * advantage)
    return result if result.ndim else float(result)


def kl_term(logp_theta, logp_ref):
    """Nonnegative unbiased per-token KL estimator.

    exp(d) - d - 1 with d = logp_ref - logp_theta; zero exactly when the two
    log-probabilities agree. Accepts scalars or arrays.
    """
    d = np.asarray(logp_ref, dtype=float) - np.asarray(logp_theta, dtype=float)
    result = np.exp(d) - d - 1.0
    return result if result.ndim else float(result)


@dataclass(frozen=True)
class GrpoObjective:
    """Objective value with the intermediate quantities kept for inspection."""

    value: float
    advantages: np.ndarray
    per_token_terms: tuple[np.ndarray, ...]


def objective(group: GrpoGroup, cfg: GrpoConfig | None = None) -> GrpoObjective:
    """Average over outputs of the per-output mean of clipped-advantage minus
    beta-weighted KL terms."""
    cfg = cfg if cfg is not None else GrpoConfig()
    advs = advantages(group.rewards, std_floor=cfg.std_floor)
    per_token: list[np.ndarray] = []
    per_output_means: list[float] = []
    for adv, lt, lo, lr in zip(advs, group.logp_theta, group.logp_old, group.logp_ref):
        ratio = np.exp(lt - lo)
        terms = clipped_term(ratio, adv, cfg.epsilon) - cfg.beta * kl_term(lt, lr)
        terms = np.atleast_1d(terms)
        per_token.append(terms)
        per_output_means.append(math.fsum(terms.tolist()) / len(terms))
    value = math.fsum(per_output_means) / group.size
    return GrpoObjective(value=value, advantages=advs, per_token_terms=tuple(per_token))


def gradient_coefficient(
    source: Literal["sft", "grpo"],
    *,
    advantage: float | None = None,
    logp_theta=None,
    logp_old=None,
    logp_ref=None,
    epsilon: float = DEFAULT_EPSILON,
    beta: float = 0.0,
):
    """Weight multiplying the per-token score-function gradient.

    Supervised fine-tuning weights every target token by 1. For the clipped
    objective the coefficient is the exact derivative of the per-token term
    with respect to logp_theta: ratio * advantage while the unclipped branch
    is active, 0 once the clip constant is selected, plus the derivative of
    the beta-weighted KL estimator. Accepts scalars or arrays for the grpo
    branch.
    """
    if source == "sft":
        return 1.0
    if source != "grpo":
        raise ValueError(f"unknown gradient source: {source!r}")
    if advantage is None or logp_theta is None or logp_old is None:
        raise ValueError("grpo coefficients require advantage, logp_theta and logp_old")
    lt = np.asarray(logp_theta, dtype=float)
    lo = np.asarray(logp_old, dtype=float)
    ratio = np.exp(lt - lo)
    clipped = np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon)
    # The min selects the unclipped branch when ratio*A <= clip(ratio)*A;
    # ties keep the unclipped derivative.
    active = ratio * advantage <= clipped * advantage
    coeff = np.where(active, ratio * advantage, 0.0)
    if beta:
        if logp_ref is None:
            raise ValueError("beta > 0 requires logp_ref")
        lr = np.asarray(logp_ref, dtype=float)
        coeff = coeff + beta * (np.exp(lr - lt) - 1.0)
    coeff = np.asarray(coeff)
    return coeff if coeff.ndim else float(coeff)
