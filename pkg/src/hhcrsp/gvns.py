"""General variable neighborhood search: shaking plus best-improvement VND."""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .ga import random_chromosome, repair
from .model import Chromosome, Instance
from .rng import stream
from .schedule import DEFAULT_PARAMS, DecodeParams, Schedule, Variant, decode, objective


class NeighborhoodKind(enum.Enum):
    SWITCH = "switch"
    INTER_SWAP = "inter-swap"
    INTRA_SHIFT = "shift"
    INTRA_SWAP = "intra-swap"


K = NeighborhoodKind


@dataclass(frozen=True)
class GvnsParams:
    shake_strength: int | None = None  # default c + 1
    stop: int = 100
    shake_order: tuple[NeighborhoodKind, ...] = (K.SWITCH, K.INTRA_SWAP, K.INTER_SWAP, K.INTRA_SHIFT)
    local_search_order: tuple[NeighborhoodKind, ...] = (K.INTER_SWAP, K.INTRA_SWAP, K.INTRA_SHIFT, K.SWITCH)
    decode_params: DecodeParams = DEFAULT_PARAMS
    max_iterations: int | None = None

    def __post_init__(self) -> None:
        for order in (self.shake_order, self.local_search_order):
            if sorted(k.value for k in order) != sorted(k.value for k in NeighborhoodKind):
                raise ValueError("neighborhood orders must list each kind exactly once")

    @property
    def gamma(self) -> float:
        return self.decode_params.penalty_weight

    def strength(self, instance: Instance) -> int:
        return self.shake_strength if self.shake_strength is not None else instance.c + 1


# -- neighborhoods ---------------------------------------------------------------


def _patient_caregivers(chromosome: Chromosome) -> dict[int, list[int]]:
    out: dict[int, list[int]] = {}
    for g, k in zip(chromosome.genes, chromosome.assignment):
        out.setdefault(g.patient, []).append(k)
    return out


def _switch_moves(instance: Instance, ch: Chromosome) -> list[tuple[int, int]]:
    serving = _patient_caregivers(ch)
    moves = []
    for i, (g, cur) in enumerate(zip(ch.genes, ch.assignment)):
        busy = set(serving[g.patient])
        for k in instance.qualified[g.service]:
            if k != cur and k not in busy:
                moves.append((i, k))
    return moves


def _inter_swap_ok(instance: Instance, ch: Chromosome, i: int, j: int) -> bool:
    gi, gj = ch.genes[i], ch.genes[j]
    ki, kj = ch.assignment[i], ch.assignment[j]
    if ki == kj:
        return True
    if kj not in instance.qualified[gi.service] or ki not in instance.qualified[gj.service]:
        return False
    if gi.patient == gj.patient:
        return True
    for idx, (g, k) in enumerate(zip(ch.genes, ch.assignment)):
        if idx in (i, j):
            continue
        if (g.patient == gi.patient and k == kj) or (g.patient == gj.patient and k == ki):
            return False
    return True


def _apply(ch: Chromosome, kind: NeighborhoodKind, move: tuple[int, int]) -> Chromosome:
    genes, assign = list(ch.genes), list(ch.assignment)
    i, j = move
    if kind is K.SWITCH:
        assign[i] = j
    elif kind is K.INTER_SWAP:
        assign[i], assign[j] = assign[j], assign[i]
    elif kind is K.INTRA_SWAP:
        genes[i], genes[j] = genes[j], genes[i]
        assign[i], assign[j] = assign[j], assign[i]
    else:
        g, k = genes.pop(i), assign.pop(i)
        genes.insert(j, g)
        assign.insert(j, k)
    return Chromosome(tuple(genes), tuple(assign))


def moves(instance: Instance, chromosome: Chromosome, kind: NeighborhoodKind) -> list[tuple[int, int]]:
    """Admissible moves of ``kind`` in lexicographic index order.

    SWITCH moves are ``(gene, new caregiver)``; the others are index pairs.
    INTRA_SHIFT ``(i, j)`` removes gene i and reinserts it at position j.
    """
    n = len(chromosome)
    if kind is K.SWITCH:
        return _switch_moves(instance, chromosome)
    if kind is K.INTER_SWAP:
        return [(i, j) for i in range(n) for j in range(i + 1, n) if _inter_swap_ok(instance, chromosome, i, j)]
    if kind is K.INTRA_SWAP:
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    return [(i, j) for i in range(n) for j in range(n) if i != j]


def neighbors(instance: Instance, chromosome: Chromosome, kind: NeighborhoodKind) -> list[Chromosome]:
    return [_apply(chromosome, kind, m) for m in moves(instance, chromosome, kind)]


def shake(instance: Instance, chromosome: Chromosome, kind: NeighborhoodKind, m2: int,
          rng: np.random.Generator) -> Chromosome:
    """Apply ``m2`` uniformly random admissible moves of ``kind``."""
    out = chromosome
    for _ in range(m2):
        options = moves(instance, out, kind)
        if not options:
            break
        out = _apply(out, kind, options[int(rng.integers(len(options)))])
    return out


# -- evaluation -------------------------------------------------------------------------


class Evaluator:
    """Penalized objective with a cache keyed by the per-caregiver routes.

    Decoding depends only on each caregiver's visit sequence, so chromosomes
    that interleave the same routes differently share one cache entry.
    """

    def __init__(self, instance: Instance, variant: Variant, params: DecodeParams = DEFAULT_PARAMS):
        self.instance, self.variant, self.params = instance, variant, params
        self.cache: dict = {}
        self.decodes = 0

    def route_key(self, ch: Chromosome) -> tuple:
        routes: list[list] = [[] for _ in range(self.instance.c)]
        for g, k in zip(ch.genes, ch.assignment):
            routes[k - 1].append(g)
        return tuple(tuple(r) for r in routes)

    def __call__(self, ch: Chromosome) -> float:
        key = self.route_key(ch)
        value = self.cache.get(key)
        if value is None:
            self.decodes += 1
            sched = decode(self.instance, ch, self.variant, self.params, check=False)
            value = objective(sched, self.variant, self.params)
            if math.isnan(value):
                value = math.inf
            self.cache[key] = value
        return value

    def schedule(self, ch: Chromosome) -> Schedule:
        return decode(self.instance, ch, self.variant, self.params)


def vnd(instance: Instance, chromosome: Chromosome, variant: Variant,
        order: tuple[NeighborhoodKind, ...], params: DecodeParams = DEFAULT_PARAMS,
        evaluator: Evaluator | None = None) -> Chromosome:
    """Best-improvement descent cycling ``order``; restart at the first on success."""
    f = evaluator or Evaluator(instance, variant, params)
    current, value = chromosome, f(chromosome)
    level = 0
    while level < len(order):
        kind = order[level]
        best_move, best_value = None, value
        for move in moves(instance, current, kind):
            v = f(_apply(current, kind, move))
            if v < best_value:
                best_move, best_value = move, v
        if best_move is not None:
            current, value = _apply(current, kind, best_move), best_value
            level = 0
        else:
            level += 1
    return current


# -- construction -------------------------------------------------------------------------


def initial_solution(instance: Instance, variant: Variant, rng: np.random.Generator,
                     params: DecodeParams = DEFAULT_PARAMS, retries: int = 50) -> Chromosome:
    """Variant-specific constructive start.

    Single-window soft model: genes by increasing window end, random
    qualified caregivers, redrawn while infeasible. Single-window timed
    models: genes by increasing window start, each given the qualified
    caregiver who can arrive first. Multi-window instances: random.
    """
    if not instance.patients:
        return Chromosome((), ())
    multi_window = any(len(p.windows) > 1 for p in instance.patients)
    if multi_window:
        return random_chromosome(instance, rng)
    genes = instance.demanded_genes()
    if variant is Variant.SOFT_MTW:
        genes.sort(key=lambda g: (instance.patient(g.patient).windows[0].b, g))
        best, best_v = None, math.inf
        for _ in range(max(1, retries)):
            assign = [instance.qualified[g.service][int(rng.integers(len(instance.qualified[g.service])))]
                      for g in genes]
            ch = repair(Chromosome(tuple(genes), tuple(assign)), instance, rng)
            sched = decode(instance, ch, variant, params, check=False)
            v = objective(sched, variant, params)
            if v < best_v or best is None:
                best, best_v = ch, v
            if sched.feasible:
                break
        return best
    genes.sort(key=lambda g: (instance.patient(g.patient).windows[0].a, g))
    clock = [k.duty.a for k in instance.caregivers]
    where = [0] * instance.c
    serving: dict[int, set[int]] = {}
    assign = []
    for g in genes:
        win = instance.patient(g.patient).windows[0]
        taken = serving.setdefault(g.patient, set())
        options = [k for k in instance.qualified[g.service] if k not in taken] or list(instance.qualified[g.service])
        k = min(options, key=lambda k: (clock[k - 1] + instance.travel[where[k - 1]][g.patient], k))
        arrival = clock[k - 1] + instance.travel[where[k - 1]][g.patient]
        clock[k - 1] = max(arrival, win.a) + instance.durations[g]
        where[k - 1] = g.patient
        taken.add(k)
        assign.append(k)
    return repair(Chromosome(tuple(genes), tuple(assign)), instance, rng)


# -- main loop -----------------------------------------------------------------------------


@dataclass
class GvnsResult:
    best: Chromosome
    schedule: Schedule
    value: float
    trace: list[tuple[int, float, float, float]] = field(default_factory=list)
    iterations: int = 0


def gvns_solve(instance: Instance, variant: Variant, params: GvnsParams, seed: int,
               time_limit_ms: float | None = None) -> GvnsResult:
    """Shake/VND loop; stops after ``params.stop`` non-improving outer iterations.

    An outer iteration runs the neighborhood index k from the first to the
    last shaking kind, resetting k on every strict improvement. Trace rows
    are (iteration, elapsed ms, best value, best penalty).
    """
    started = time.perf_counter()
    rng = stream(seed, "gvns")
    f = Evaluator(instance, variant, params.decode_params)
    x = initial_solution(instance, variant, rng, params.decode_params)
    x = vnd(instance, x, variant, params.local_search_order, params.decode_params, f)
    fx = f(x)
    strength = params.strength(instance)
    trace = [(0, (time.perf_counter() - started) * 1000, fx, f.schedule(x).penalty)]
    stale = iteration = 0
    while stale < params.stop:
        if params.max_iterations is not None and iteration >= params.max_iterations:
            break
        if time_limit_ms is not None and (time.perf_counter() - started) * 1000 >= time_limit_ms:
            break
        iteration += 1
        improved = False
        k = 0
        while k < len(params.shake_order):
            shaken = shake(instance, x, params.shake_order[k], strength, rng)
            candidate = vnd(instance, shaken, variant, params.local_search_order, params.decode_params, f)
            fc = f(candidate)
            if fc < fx:
                x, fx = candidate, fc
                improved = True
                k = 0
            else:
                k += 1
        stale = 0 if improved else stale + 1
        trace.append((iteration, (time.perf_counter() - started) * 1000, fx, f.schedule(x).penalty))
    return GvnsResult(x, f.schedule(x), fx, trace, iteration)
