"""Genetic algorithm over the two-row encoding.

Crossovers and mutations act on the gene row and the caregiver row
independently; ``repair`` restores qualification and the
one-service-per-caregiver-per-patient rule afterwards.
"""

from __future__ import annotations

import enum
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .model import Chromosome, Instance, VisitGene, match_services
from .rng import stream
from .schedule import DEFAULT_PARAMS, DecodeParams, Variant, decode, objective


class FitnessKind(enum.Enum):
    DETERMINISTIC = "deterministic"
    SPR = "spr"
    LEX = "lex"


# -- encoding helpers ---------------------------------------------------------------


def repair(chromosome: Chromosome, instance: Instance, rng: np.random.Generator) -> Chromosome:
    """Fix unqualified caregivers and repeated (patient, caregiver) pairs.

    Valid genes keep their caregiver and no random numbers are drawn for
    them, so repairing a valid chromosome returns it unchanged.
    """
    genes = chromosome.genes
    assign = list(chromosome.assignment)
    by_patient: dict[int, list[int]] = {}
    for i, g in enumerate(genes):
        by_patient.setdefault(g.patient, []).append(i)
    changed = False
    for p, idxs in by_patient.items():
        used: set[int] = set()
        bad = []
        for i in idxs:
            k = assign[i]
            if k in instance.qualified[genes[i].service] and k not in used:
                used.add(k)
            else:
                bad.append(i)
        for pos, i in enumerate(bad):
            options = [k for k in instance.qualified[genes[i].service] if k not in used]
            if options:
                k = options[int(rng.integers(len(options)))]
                assign[i] = k
                used.add(k)
                changed = True
                continue
            # no free qualified caregiver: rematch the patient's services
            kept = {genes[j].service: assign[j] for j in idxs if j not in bad[pos:]}
            match = match_services([genes[j].service for j in idxs], instance.qualified, kept)
            if match is None:
                raise ValueError(f"patient {p} cannot be served by distinct qualified caregivers")
            for j in idxs:
                assign[j] = match[genes[j].service]
            changed = True
            break
    if not changed:
        return chromosome
    return Chromosome(genes, tuple(assign))


def random_chromosome(instance: Instance, rng: np.random.Generator) -> Chromosome:
    genes = instance.demanded_genes()
    order = rng.permutation(len(genes))
    genes = tuple(genes[i] for i in order)
    assign = tuple(
        int(instance.qualified[g.service][int(rng.integers(len(instance.qualified[g.service])))]) for g in genes
    )
    return repair(Chromosome(genes, assign), instance, rng)


def swap_genes(chromosome: Chromosome, i: int, j: int) -> Chromosome:
    """Exchange two gene positions; the caregiver row stays in place."""
    genes = list(chromosome.genes)
    genes[i], genes[j] = genes[j], genes[i]
    return Chromosome(tuple(genes), chromosome.assignment)


def reassign(chromosome: Chromosome, i: int, caregiver: int) -> Chromosome:
    assign = list(chromosome.assignment)
    assign[i] = caregiver
    return Chromosome(chromosome.genes, tuple(assign))


# -- crossovers ----------------------------------------------------------------------


def _fill(kept: Sequence[VisitGene | None], donor: Sequence[VisitGene]) -> tuple[VisitGene, ...]:
    present = {g for g in kept if g is not None}
    rest = iter(g for g in donor if g not in present)
    return tuple(g if g is not None else next(rest) for g in kept)


def uox_crossover(
    parent1: Chromosome,
    parent2: Chromosome,
    rng: np.random.Generator,
    instance: Instance | None = None,
    gene_mask: Sequence[int] | None = None,
    caregiver_mask: Sequence[int] | None = None,
) -> Chromosome:
    """Uniform order crossover producing one offspring.

    Mask positions set to 1 keep parent1's entry. Free gene positions take
    the missing genes in parent2's order; free caregiver positions copy
    parent2 positionally. The offspring is repaired when ``instance`` is given.
    """
    size = len(parent1)
    if gene_mask is None:
        gene_mask = rng.integers(0, 2, size=size)
    if caregiver_mask is None:
        caregiver_mask = rng.integers(0, 2, size=size)
    kept = [g if m else None for g, m in zip(parent1.genes, gene_mask)]
    genes = _fill(kept, parent2.genes)
    assign = tuple(a if m else b for a, b, m in zip(parent1.assignment, parent2.assignment, caregiver_mask))
    child = Chromosome(genes, assign)
    return repair(child, instance, rng) if instance is not None else child


def two_point_crossover(
    parent1: Chromosome,
    parent2: Chromosome,
    rng: np.random.Generator,
    instance: Instance | None = None,
    gene_points: tuple[int, int] | None = None,
    caregiver_points: tuple[int, int] | None = None,
) -> tuple[Chromosome, Chromosome]:
    """Two-point crossover producing two offspring.

    Points are 0-based ``(start, stop)`` slice bounds of the kept middle
    segment; each row draws its own points when not given.
    """
    size = len(parent1)

    def draw() -> tuple[int, int]:
        a, b = sorted(int(x) for x in rng.integers(0, size, size=2))
        return a, b + 1

    gs, ge = gene_points if gene_points is not None else draw()
    cs, ce = caregiver_points if caregiver_points is not None else draw()

    def child(first: Chromosome, second: Chromosome) -> Chromosome:
        kept = [g if gs <= i < ge else None for i, g in enumerate(first.genes)]
        genes = _fill(kept, second.genes)
        assign = tuple(
            first.assignment[i] if cs <= i < ce else second.assignment[i] for i in range(size)
        )
        out = Chromosome(genes, assign)
        return repair(out, instance, rng) if instance is not None else out

    return child(parent1, parent2), child(parent2, parent1)


def mutate(chromosome: Chromosome, rng: np.random.Generator, ps: float, instance: Instance) -> Chromosome:
    """Gene-position swap and caregiver reassignment, each with probability ``ps``."""
    size = len(chromosome)
    out = chromosome
    if size >= 2 and rng.random() < ps:
        i, j = (int(x) for x in rng.choice(size, size=2, replace=False))
        out = swap_genes(out, i, j)
    if size >= 1 and rng.random() < ps:
        i = int(rng.integers(size))
        options = instance.qualified[out.genes[i].service]
        out = reassign(out, i, int(options[int(rng.integers(len(options)))]))
    return repair(out, instance, rng)


# -- selection and fitness ---------------------------------------------------------------


def tournament_select(population: Sequence, size: int, key: Callable, rng: np.random.Generator):
    """Best of ``size`` members drawn without replacement (first wins ties)."""
    if not population:
        raise ValueError("empty population")
    if size < 1:
        raise ValueError("tournament size must be at least 1")
    picks = rng.choice(len(population), size=min(size, len(population)), replace=False)
    best = None
    for idx in picks:
        if best is None or key(population[int(idx)]) < key(population[best]):
            best = int(idx)
    return population[best]


@dataclass(frozen=True)
class GaParams:
    population_size: int = 20
    pc: float = 0.8
    ps: float = 0.01
    tournament_size: int = 2
    stop: int = 50
    kind: FitnessKind = FitnessKind.DETERMINISTIC
    beta: float = 100.0
    crossover: str = "uox"
    max_generations: int | None = None
    decode_params: DecodeParams = DEFAULT_PARAMS

    def __post_init__(self) -> None:
        if not (0.0 <= self.pc <= 1.0 and 0.0 <= self.ps <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.population_size < 2:
            raise ValueError("population must hold at least two individuals")
        if self.crossover not in ("uox", "two_point"):
            raise ValueError("crossover must be 'uox' or 'two_point'")

    @classmethod
    def defaults(cls, instance: Instance, kind: FitnessKind = FitnessKind.DETERMINISTIC) -> "GaParams":
        """Tuned defaults per fitness kind (s = total services, n = patients)."""
        s, n, c = instance.total_services, instance.n, instance.c
        if kind is FitnessKind.DETERMINISTIC:
            return cls(max(2, s * s), 0.8, 0.01, c + 1, max(1, 5 * s), kind)
        if kind is FitnessKind.SPR:
            return cls(100, 0.6, 0.08, c + 1, 50, kind)
        return cls(max(2, 20 * n), 0.4, 0.08, 2, max(1, 5 * n), kind, crossover="two_point")


def fitness(instance: Instance, chromosome: Chromosome, kind: FitnessKind, variant: Variant,
            params: GaParams, estimator=None) -> tuple[float, ...]:
    """Fitness as a tuple so scalar and lexicographic kinds compare alike."""
    dparams = replace(params.decode_params, penalty_weight=params.beta)
    sched = decode(instance, chromosome, variant, dparams, check=False)
    if kind is FitnessKind.DETERMINISTIC:
        return (objective(sched, variant, dparams),)
    if kind is FitnessKind.SPR:
        if estimator is None:
            raise ValueError("SPR fitness needs a recourse estimator")
        if not sched.sync_ok:
            return (math.inf,)
        return (sched.total_cost + estimator(instance, chromosome).mean,)
    over = float(sched.over_visits)
    if estimator is None:
        skipped = float(sched.skipped_count)
    else:
        skipped = estimator(instance, chromosome).mean
    return (over, skipped, sched.total_cost)


# -- generational loop ---------------------------------------------------------------


@dataclass
class GaResult:
    best: Chromosome
    fitness: tuple[float, ...]
    trace: list[tuple[int, tuple[float, ...], float]] = field(default_factory=list)
    generations: int = 0


def ga_solve(
    instance: Instance,
    variant: Variant,
    params: GaParams,
    seed: int,
    estimator=None,
    initial: Sequence[Chromosome] | None = None,
    threads: int = 1,
    time_limit_ms: float | None = None,
) -> GaResult:
    """Pure generational GA with the best-so-far kept outside the population.

    Every offspring slot draws from its own stream keyed by (generation,
    slot), so results do not depend on ``threads``.
    """
    started = time.perf_counter()
    cache: dict = {}

    def evaluate(ch: Chromosome) -> tuple[float, ...]:
        key = ch.key()
        if key not in cache:
            cache[key] = fitness(instance, ch, params.kind, variant, params, estimator)
        return cache[key]

    def evaluate_all(chs: list[Chromosome]) -> list[tuple[float, ...]]:
        fresh = list(dict.fromkeys(ch.key() for ch in chs if ch.key() not in cache))
        if threads > 1 and len(fresh) > 1 and estimator is None:
            lookup = {ch.key(): ch for ch in chs}
            with ThreadPoolExecutor(max_workers=threads) as pool:
                values = list(pool.map(lambda k: fitness(instance, lookup[k], params.kind, variant,
                                                         params, estimator), fresh))
            cache.update(zip(fresh, values))
        return [evaluate(ch) for ch in chs]

    if initial is not None:
        population = list(initial)
    else:
        init_rng = stream(seed, "ga-init")
        population = [random_chromosome(instance, init_rng) for _ in range(params.population_size)]
    values = evaluate_all(population)
    best_idx = min(range(len(population)), key=lambda i: values[i])
    best, best_fit = population[best_idx], values[best_idx]
    trace = [(0, best_fit, _mean(values))]
    stale = generation = 0
    while stale < params.stop:
        if params.max_generations is not None and generation >= params.max_generations:
            break
        if time_limit_ms is not None and (time.perf_counter() - started) * 1000 >= time_limit_ms:
            break
        generation += 1
        scored = list(zip(population, values))
        offspring = []
        for slot in range(params.population_size):
            rng = stream(seed, "ga-slot", generation, slot)
            p1 = tournament_select(scored, params.tournament_size, lambda x: x[1], rng)[0]
            p2 = tournament_select(scored, params.tournament_size, lambda x: x[1], rng)[0]
            if rng.random() < params.pc:
                if params.crossover == "uox":
                    child = uox_crossover(p1, p2, rng, instance)
                else:
                    child = two_point_crossover(p1, p2, rng, instance)[0]
            else:
                child = p1
            offspring.append(mutate(child, rng, params.ps, instance))
        population = offspring
        values = evaluate_all(population)
        gen_best = min(range(len(population)), key=lambda i: values[i])
        if values[gen_best] < best_fit:
            best, best_fit = population[gen_best], values[gen_best]
            stale = 0
        else:
            stale += 1
        trace.append((generation, best_fit, _mean(values)))
    return GaResult(best, best_fit, trace, generation)


def _mean(values: list[tuple[float, ...]]) -> float:
    finite = [v[-1] if len(v) > 1 else v[0] for v in values]
    finite = [v for v in finite if math.isfinite(v)]
    return sum(finite) / len(finite) if finite else math.inf
