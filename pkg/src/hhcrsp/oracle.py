"""Exhaustive reference solvers for tiny instances."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .model import Chromosome, Instance, VisitGene
from .moea import constrained_dominates
from .recourse import RecourseKind, StochasticConfig, replication_value, sample_scenario
from .rng import stream
from .schedule import DEFAULT_PARAMS, DecodeParams, Variant, decode, objective, objective_vector


@dataclass(frozen=True)
class OracleLimits:
    max_genes: int = 7
    max_caregivers: int = 3
    max_windows: int = 3


class OracleLimitError(ValueError):
    pass


@dataclass
class OracleResult:
    """Best chromosome by penalized objective, plus the best feasible one.

    ``feasible`` tells whether any enumerated chromosome is feasible.
    For the multi-objective model ``pareto`` holds the exact front as
    ``(objective vector, penalty, chromosome)`` triples.
    """

    chromosome: Chromosome | None
    value: float
    feasible: bool
    best_feasible: Chromosome | None = None
    best_feasible_value: float = math.inf
    evaluated: int = 0
    pareto: list[tuple[tuple[float, ...], float, Chromosome]] = field(default_factory=list)


def _check_limits(instance: Instance, limits: OracleLimits) -> None:
    if instance.total_services > limits.max_genes:
        raise OracleLimitError(f"{instance.total_services} genes exceed the limit of {limits.max_genes}")
    if instance.c > limits.max_caregivers:
        raise OracleLimitError(f"{instance.c} caregivers exceed the limit of {limits.max_caregivers}")
    if any(len(p.windows) > limits.max_windows for p in instance.patients):
        raise OracleLimitError(f"a patient has more than {limits.max_windows} windows")


def _assignments(instance: Instance, genes: list[VisitGene]):
    """Qualified assignments with distinct caregivers per patient, lexicographic."""
    choice: list[int] = []

    def rec(i: int, used: dict[int, set[int]]):
        if i == len(genes):
            yield tuple(choice)
            return
        g = genes[i]
        taken = used.setdefault(g.patient, set())
        for k in instance.qualified[g.service]:
            if k in taken:
                continue
            taken.add(k)
            choice.append(k)
            yield from rec(i + 1, used)
            choice.pop()
            taken.discard(k)

    yield from rec(0, {})


def enumerate_chromosomes(instance: Instance):
    """Every distinct solution, one chromosome per set of caregiver routes.

    The decoder depends only on each caregiver's visit sequence, so the
    routes are laid out caregiver by caregiver in the gene list.
    """
    genes = instance.demanded_genes()
    for assign in _assignments(instance, genes):
        groups = [[g for g, a in zip(genes, assign) if a == k] for k in range(1, instance.c + 1)]
        for orders in itertools.product(*(itertools.permutations(grp) for grp in groups)):
            out_genes: list[VisitGene] = []
            out_assign: list[int] = []
            for k, route in enumerate(orders, start=1):
                out_genes.extend(route)
                out_assign.extend([k] * len(route))
            yield Chromosome(tuple(out_genes), tuple(out_assign))


def brute_force_solve(instance: Instance, variant: Variant, limits: OracleLimits = OracleLimits(),
                      params: DecodeParams = DEFAULT_PARAMS) -> OracleResult:
    """Exact optimum over all reachable solutions (ties: first enumerated)."""
    _check_limits(instance, limits)
    if variant is Variant.MULTIOBJ:
        return _pareto(instance, params)
    best = best_feasible = None
    best_v = best_feasible_v = math.inf
    count = 0
    for ch in enumerate_chromosomes(instance):
        count += 1
        sched = decode(instance, ch, variant, params, check=False)
        v = objective(sched, variant, params)
        if best is None or v < best_v:
            best, best_v = ch, v
        if sched.feasible and v < best_feasible_v:
            best_feasible, best_feasible_v = ch, v
    return OracleResult(best, best_v, best_feasible is not None, best_feasible, best_feasible_v, count)


def _pareto(instance: Instance, params: DecodeParams) -> OracleResult:
    front: list[tuple[tuple[float, ...], float, Chromosome]] = []
    count = 0
    for ch in enumerate_chromosomes(instance):
        count += 1
        sched = decode(instance, ch, Variant.MULTIOBJ, params, check=False)
        point = (tuple(objective_vector(sched)), sched.penalty)
        if any(constrained_dominates(m[:2], point) or m[:2] == point for m in front):
            continue
        front = [m for m in front if not constrained_dominates(point, m[:2])]
        front.append((point[0], point[1], ch))
    feasible = any(p == 0 for _, p, _ in front)
    first = front[0] if front else None
    return OracleResult(first[2] if first else None, math.nan, feasible, evaluated=count, pareto=front)


@dataclass(frozen=True)
class ReferenceEstimate:
    mean: float
    std_error: float
    replications: int


def reference_expected_recourse(instance: Instance, chromosome: Chromosome, kind: RecourseKind,
                                replications: int = 1_000_000, seed: int = 0,
                                config: StochasticConfig | None = None,
                                params: DecodeParams = DEFAULT_PARAMS) -> ReferenceEstimate:
    """Plain Monte Carlo mean and standard error, no stopping rule."""
    config = config or StochasticConfig(seed=seed)
    rng = stream(seed, "reference-recourse")
    total = total_sq = 0.0
    for _ in range(replications):
        value, _ = replication_value(instance, chromosome, kind, config, sample_scenario(instance, config, rng), params)
        total += value
        total_sq += value * value
    mean = total / replications
    var = max(0.0, (total_sq - replications * mean * mean) / (replications - 1)) if replications > 1 else 0.0
    return ReferenceEstimate(mean, math.sqrt(var / replications), replications)
