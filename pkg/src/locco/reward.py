"""Sample weights: raw value, group-normalized advantage, clipped surrogate."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

MODES = ("full", "cc_only", "prior_only", "unit")
SURROGATES = ("masked", "literal")


@dataclass(frozen=True)
class RewardConfig:
    epsilon: float = 0.2
    sigma_floor: float = 1e-8
    mode: str = "full"
    ratio_ceiling: float = 1e6
    surrogate: str = "masked"

    def __post_init__(self):
        if self.surrogate not in SURROGATES:
            raise ValueError(f"unknown surrogate {self.surrogate!r}; expected one of {SURROGATES}")
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.sigma_floor > 0:
            raise ValueError("sigma_floor must be positive")
        if self.mode not in MODES:
            raise ValueError(f"unknown reward mode {self.mode!r}; expected one of {MODES}")


def raw_value(log_px_given_z: float, log_pz: float, mode: str = "full") -> float:
    if mode == "full":
        return log_px_given_z + log_pz
    if mode == "cc_only":
        return log_px_given_z
    if mode == "prior_only":
        return log_pz
    if mode == "unit":
        return 1.0
    raise ValueError(f"unknown reward mode {mode!r}")


def normalize(values: Sequence[float], sigma_floor: float = 1e-8) -> list[float]:
    """Z-score within one sample group using the population standard deviation."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot normalize an empty group")
    mu = v.mean()
    sigma = math.sqrt(np.mean((v - mu) ** 2))
    if sigma < sigma_floor:
        return [0.0] * v.size
    return ((v - mu) / sigma).tolist()


def importance_ratio(logq_new: float, logq_old: float, ceiling: float = 1e6) -> float:
    delta = logq_new - logq_old
    if delta >= math.log(ceiling):
        return ceiling
    return math.exp(delta)


def clip(value: float, low: float, high: float) -> float:
    return min(max(value, low), high)


def clipped_weight(r: float, a: float, epsilon: float = 0.2) -> float:
    return min(r * a, clip(r, 1.0 - epsilon, 1.0 + epsilon) * a)


def gradient_weight(r: float, a: float, epsilon: float = 0.2, surrogate: str = "masked") -> float:
    """Coefficient on grad log q for one sample.

    ``literal`` uses R itself.  ``masked`` uses R only where the unclipped
    term r*a is the one selected by the min, else 0; since grad r = r grad log q
    this is the exact gradient of the clipped objective, which stops pushing
    a sample once its ratio has left the trust band in the advantage's
    direction.
    """
    weight = clipped_weight(r, a, epsilon)
    if surrogate == "literal":
        return weight
    return weight if weight == r * a else 0.0


def group_weights(values: Sequence[float], logq_new: Sequence[float], logq_old: Sequence[float],
                  config: RewardConfig) -> list[float]:
    """Per-sample weights R for one input's N samples.

    In ``unit`` mode every weight is exactly 1 (plain sampling self-learning):
    both normalization and clipping are bypassed.
    """
    if config.mode == "unit":
        return [1.0] * len(values)
    advantages = normalize(values, config.sigma_floor)
    return [
        gradient_weight(importance_ratio(new, old, config.ratio_ceiling), a, config.epsilon, config.surrogate)
        for a, new, old in zip(advantages, logq_new, logq_old)
    ]
