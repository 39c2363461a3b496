"""Scenario sampling and Monte Carlo estimation of expected recourse.

Travel times are drawn from N(c, (c/3)^2) and service durations from
N(t, (t/5)^2) by default; negative draws are clamped to zero.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .model import Chromosome, Instance
from .rng import stream
from .schedule import DEFAULT_PARAMS, DecodeParams, Variant, decode


class RecourseKind(enum.Enum):
    PENALTY = "penalty"
    SKIP = "skip"


class StopReason(enum.Enum):
    MAX_ITER = "max_iter"
    GAP = "gap"


@dataclass(frozen=True)
class StochasticConfig:
    travel_sd_ratio: float = 1 / 3
    service_sd_ratio: float = 1 / 5
    epsilon: float = 0.05
    max_iter: int = 100
    gap_window: int = 10
    alpha: float = 1.0
    gamma: float = 1.0
    seed: int = 0
    common_random_numbers: bool = False

    def __post_init__(self) -> None:
        if self.travel_sd_ratio < 0 or self.service_sd_ratio < 0:
            raise ValueError("standard deviation ratios must be nonnegative")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.max_iter < 1 or self.gap_window < 1:
            raise ValueError("max_iter and gap_window must be positive")


@dataclass(frozen=True)
class RecourseEstimate:
    mean: float
    iterations: int
    stop_reason: StopReason
    components: tuple[float, ...]
    std_error: float = 0.0


@dataclass(frozen=True)
class Scenario:
    travel: Sequence[Sequence[float]]
    durations: Mapping[tuple[int, int], float]


def sample_scenario(instance: Instance, config: StochasticConfig, rng: np.random.Generator) -> Scenario:
    """One realization of travel and service times."""
    mean = np.asarray(instance.travel, dtype=float)
    travel = np.maximum(rng.normal(mean, mean * config.travel_sd_ratio), 0.0)
    keys = sorted(instance.durations)
    base = np.array([instance.durations[k] for k in keys], dtype=float)
    dur = np.maximum(rng.normal(base, base * config.service_sd_ratio), 0.0)
    return Scenario(travel.tolist(), dict(zip(keys, dur.tolist())))


def simulate_penalty_recourse(instance: Instance, chromosome: Chromosome, scenario: Scenario,
                              params: DecodeParams = DEFAULT_PARAMS) -> tuple[float, float]:
    """Total tardiness and overtime of the plan replayed under ``scenario``.

    Synchronized starts are recomputed with the realized arrivals; a plan
    whose synchronization cannot settle returns infinite recourse.
    """
    sched = decode(instance, chromosome, Variant.SPR_PENALTY, params, scenario.travel, scenario.durations,
                   check=False)
    if not sched.sync_ok:
        return math.inf, math.inf
    return sched.total_tardiness, sched.total_overtime


def simulate_skip_recourse(instance: Instance, chromosome: Chromosome,
                           scenario: Scenario) -> tuple[int, frozenset[int]]:
    """Number of skipped visits and the skipped patients under ``scenario``."""
    sched = decode(instance, chromosome, Variant.SPR_SKIP, DEFAULT_PARAMS, scenario.travel, scenario.durations,
                   check=False)
    return sched.skipped_count, sched.skipped


def replication_value(instance: Instance, chromosome: Chromosome, kind: RecourseKind,
                      config: StochasticConfig, scenario: Scenario,
                      params: DecodeParams = DEFAULT_PARAMS) -> tuple[float, tuple[float, ...]]:
    """Weighted recourse of one scenario plus its raw components."""
    if kind is RecourseKind.PENALTY:
        tard, over = simulate_penalty_recourse(instance, chromosome, scenario, params)
        return config.alpha * tard + config.gamma * over, (tard, over)
    count, _ = simulate_skip_recourse(instance, chromosome, scenario)
    return config.alpha * count, (float(count),)


def estimate(instance: Instance, chromosome: Chromosome, kind: RecourseKind, config: StochasticConfig,
             call_id: int = 0, params: DecodeParams = DEFAULT_PARAMS) -> RecourseEstimate:
    """Running-mean estimate with the relative-gap stopping rule.

    Stops at ``max_iter`` replications, or once the relative change of the
    running mean has stayed below ``epsilon`` for ``gap_window``
    consecutive replications (any violation resets the count).
    """
    total = 0.0
    total_sq = 0.0
    comps: list[float] | None = None
    prev = None
    streak = 0
    reason = StopReason.MAX_ITER
    t = 0
    for t in range(1, config.max_iter + 1):
        scenario = sample_scenario(instance, config, stream(config.seed, "recourse", call_id, t))
        value, parts = replication_value(instance, chromosome, kind, config, scenario, params)
        if math.isinf(value):
            return RecourseEstimate(math.inf, t, StopReason.MAX_ITER, tuple(math.inf for _ in parts), math.inf)
        total += value
        total_sq += value * value
        comps = list(parts) if comps is None else [a + b for a, b in zip(comps, parts)]
        mean = total / t
        if prev is not None:
            if prev == 0:
                gap = 0.0 if mean == 0 else 1.0
            else:
                gap = abs(prev - mean) / prev
            streak = streak + 1 if gap < config.epsilon else 0
            if streak >= config.gap_window:
                reason = StopReason.GAP
                break
        prev = mean
    mean = total / t
    var = max(0.0, (total_sq - t * mean * mean) / (t - 1)) if t > 1 else 0.0
    return RecourseEstimate(mean, t, reason, tuple(c / t for c in comps or []), math.sqrt(var / t))


class Estimator:
    """Stateful wrapper handing each call its own replication streams.

    With common random numbers every call reuses call id 0, so candidate
    plans are compared on the same scenarios.
    """

    def __init__(self, kind: RecourseKind, config: StochasticConfig, params: DecodeParams = DEFAULT_PARAMS):
        self.kind, self.config, self.params = kind, config, params
        self.calls = 0

    def __call__(self, instance: Instance, chromosome: Chromosome) -> RecourseEstimate:
        call_id = 0 if self.config.common_random_numbers else self.calls
        self.calls += 1
        return estimate(instance, chromosome, self.kind, self.config, call_id, self.params)
