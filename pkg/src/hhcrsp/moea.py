"""NSGA-II, MOEA/D with Tchebycheff decomposition, and their sequential hybrid.

Solutions are compared by constrained domination: feasible beats
infeasible, the smaller penalty wins between infeasible ones, and Pareto
dominance decides between feasible ones.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ga import random_chromosome, mutate, uox_crossover
from .model import Chromosome, Instance
from .rng import stream
from .schedule import DEFAULT_PARAMS, DecodeParams, Variant, decode, objective_vector

Point = tuple[Sequence[float], float]  # (objectives, penalty)


def pareto_dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    strict = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            strict = True
    return strict


def constrained_dominates(a: Point, b: Point) -> bool:
    fa, pa = a
    fb, pb = b
    if pa <= 0 and pb > 0:
        return True
    if pa > 0 and pb > 0:
        return pa < pb
    if pa > 0:
        return False
    return pareto_dominates(fa, fb)


def fast_nondominated_sort(points: Sequence[Point]) -> list[list[int]]:
    """Indices grouped into ranks (rank 1 first)."""
    n = len(points)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    count = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if constrained_dominates(points[i], points[j]):
                dominated_by[i].append(j)
                count[j] += 1
            elif constrained_dominates(points[j], points[i]):
                dominated_by[j].append(i)
                count[i] += 1
    fronts = [[i for i in range(n) if count[i] == 0]]
    while fronts[-1]:
        nxt = []
        for i in fronts[-1]:
            for j in dominated_by[i]:
                count[j] -= 1
                if count[j] == 0:
                    nxt.append(j)
        fronts.append(sorted(nxt))
    return fronts[:-1]


def crowding_distance(objectives: Sequence[Sequence[float]]) -> list[float]:
    """Crowding distance averaged over objectives; boundaries get +inf.

    Repeated objective vectors are measured once: the first copy gets the
    distance of its unique point, later copies get 0.
    """
    n = len(objectives)
    if n == 0:
        return []
    first: dict[tuple, int] = {}
    unique_idx = []
    for i, f in enumerate(objectives):
        key = tuple(f)
        if key not in first:
            first[key] = i
            unique_idx.append(i)
    out = [0.0] * n
    m = len(objectives[0])
    if len(unique_idx) <= 2:
        for i in unique_idx:
            out[i] = math.inf
        return out
    dist = {i: 0.0 for i in unique_idx}
    for obj in range(m):
        order = sorted(unique_idx, key=lambda i: (objectives[i][obj], i))
        lo, hi = objectives[order[0]][obj], objectives[order[-1]][obj]
        dist[order[0]] = dist[order[-1]] = math.inf
        span = hi - lo
        for pos in range(1, len(order) - 1):
            if span > 0:
                gap = objectives[order[pos + 1]][obj] - objectives[order[pos - 1]][obj]
                dist[order[pos]] += gap / span
    for i in unique_idx:
        out[i] = dist[i] / m if math.isfinite(dist[i]) else math.inf
    return out


# -- fronts --------------------------------------------------------------------------


@dataclass(frozen=True)
class Member:
    chromosome: Chromosome
    objectives: tuple[float, float, float]
    penalty: float

    @property
    def point(self) -> Point:
        return (self.objectives, self.penalty)

    @property
    def feasible(self) -> bool:
        return self.penalty <= 0


@dataclass
class Front:
    members: list[Member] = field(default_factory=list)
    capacity: int | None = None

    def __len__(self) -> int:
        return len(self.members)

    def feasible_points(self) -> list[tuple[float, ...]]:
        return [m.objectives for m in self.members if m.feasible]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["f1", "f2", "f3", "penalty", "chromosome"])
        for m in self.members:
            writer.writerow([_num(m.objectives[0]), _num(m.objectives[1]), _num(m.objectives[2]),
                             _num(m.penalty), m.chromosome.serialize()])
        return buf.getvalue()


def _num(x: float) -> str:
    if math.isinf(x):
        return "inf"
    r = round(x, 6)
    return str(int(r)) if r == int(r) else repr(r)


class Archive:
    """External population of mutually non-dominated members.

    Besides its current members it remembers every point it ever held, and
    rejects candidates dominated by (or equal to) any of them. A pruned
    member therefore still blocks worse newcomers, which keeps the archive
    improving monotonically.
    """

    def __init__(self, capacity: int | None = None):
        self.capacity = capacity
        self.members: list[Member] = []
        self._history: list[Point] = []

    def offer(self, member: Member) -> bool:
        point = member.point
        for old in itertools.chain((m.point for m in self.members), self._history):
            if constrained_dominates(old, point) or (tuple(old[0]) == tuple(point[0]) and old[1] == point[1]):
                return False
        self.members = [m for m in self.members if not constrained_dominates(point, m.point)]
        self.members.append(member)
        self._history = [p for p in self._history if not constrained_dominates(point, p)]
        self._history.append(point)
        if self.capacity is not None and len(self.members) > self.capacity:
            dist = crowding_distance([m.objectives for m in self.members])
            victim = min(range(len(self.members)), key=lambda i: (dist[i], i))
            del self.members[victim]
        return True

    def front(self) -> Front:
        return Front(list(self.members), self.capacity)


# -- shared evaluation ------------------------------------------------------------------


class _Evaluator:
    def __init__(self, instance: Instance, params: DecodeParams, threads: int):
        self.instance, self.params, self.threads = instance, params, threads
        self.cache: dict = {}
        self.evaluations = 0

    def _eval(self, ch: Chromosome) -> Member:
        sched = decode(self.instance, ch, Variant.MULTIOBJ, self.params, check=False)
        return Member(ch, tuple(objective_vector(sched)), sched.penalty)

    def many(self, chs: list[Chromosome]) -> list[Member]:
        self.evaluations += len(chs)
        fresh = list(dict.fromkeys(ch.key() for ch in chs if ch.key() not in self.cache))
        lookup = {ch.key(): ch for ch in chs}
        if self.threads > 1 and len(fresh) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                results = list(pool.map(lambda k: self._eval(lookup[k]), fresh))
        else:
            results = [self._eval(lookup[k]) for k in fresh]
        self.cache.update(zip(fresh, results))
        return [self.cache[ch.key()] for ch in chs]


# -- NSGA-II --------------------------------------------------------------------------------


@dataclass(frozen=True)
class NsgaParams:
    population_size: int = 40
    pc: float = 0.8
    pm: float = 0.08
    max_evaluations: int = 2000
    decode_params: DecodeParams = DEFAULT_PARAMS

    @classmethod
    def defaults(cls, instance: Instance, max_evaluations: int = 2000) -> "NsgaParams":
        return cls(population_size=max(4, 10 * instance.n), max_evaluations=max_evaluations)


def _rank_and_crowd(members: list[Member]) -> tuple[list[list[int]], list[int], list[float]]:
    fronts = fast_nondominated_sort([m.point for m in members])
    rank = [0] * len(members)
    crowd = [0.0] * len(members)
    for r, front in enumerate(fronts):
        dist = crowding_distance([members[i].objectives for i in front])
        for i, d in zip(front, dist):
            rank[i], crowd[i] = r, d
    return fronts, rank, crowd


def _nondominated(members: list[Member]) -> list[Member]:
    """Rank-1 members without repeated (objectives, penalty) points."""
    if not members:
        return []
    fronts = fast_nondominated_sort([m.point for m in members])
    out, seen = [], set()
    for i in fronts[0]:
        key = (members[i].objectives, members[i].penalty)
        if key not in seen:
            seen.add(key)
            out.append(members[i])
    return out


def nsga2_solve(instance: Instance, params: NsgaParams, seed: int, threads: int = 1,
                time_limit_ms: float | None = None) -> Front:
    """Generational NSGA-II; returns the rank-1 front of the final population."""
    if params.population_size < 4:
        raise ValueError("NSGA-II needs a population of at least 4")
    started = time.perf_counter()
    ev = _Evaluator(instance, params.decode_params, threads)
    init_rng = stream(seed, "nsga2-init")
    size = params.population_size
    pop = ev.many([random_chromosome(instance, init_rng) for _ in range(size)])
    _, rank, crowd = _rank_and_crowd(pop)
    generation = 0
    while ev.evaluations + size <= params.max_evaluations:
        if time_limit_ms is not None and (time.perf_counter() - started) * 1000 >= time_limit_ms:
            break
        generation += 1

        def better(i: int, j: int) -> int:
            if rank[i] != rank[j]:
                return i if rank[i] < rank[j] else j
            if crowd[i] != crowd[j]:
                return i if crowd[i] > crowd[j] else j
            return min(i, j)

        children = []
        for slot in range(size):
            rng = stream(seed, "nsga2-slot", generation, slot)
            a, b, c, d = (int(x) for x in rng.integers(0, size, size=4))
            p1, p2 = pop[better(a, b)].chromosome, pop[better(c, d)].chromosome
            child = uox_crossover(p1, p2, rng, instance) if rng.random() < params.pc else p1
            children.append(mutate(child, rng, params.pm, instance))
        merged = pop + ev.many(children)
        fronts, mrank, mcrowd = _rank_and_crowd(merged)
        chosen: list[int] = []
        for front in fronts:
            if len(chosen) + len(front) <= size:
                chosen.extend(front)
            else:
                rest = sorted(front, key=lambda i: (-mcrowd[i], i))
                chosen.extend(rest[: size - len(chosen)])
                break
        pop = [merged[i] for i in chosen]
        _, rank, crowd = _rank_and_crowd(pop)
    return Front(_nondominated(pop))


# -- MOEA/D ----------------------------------------------------------------------------------


def weight_vectors(count: int, m: int = 3, t: int | None = None) -> tuple[list[tuple[float, ...]], list[list[int]]]:
    """Simplex-lattice weights and their T-nearest neighborhoods.

    Uses the smallest granularity H giving at least ``count`` vectors,
    ordered by number of nonzero components and then lexicographically
    descending, and keeps the first ``count``.
    """
    if count < m:
        raise ValueError("need at least as many weight vectors as objectives")
    h = 1
    while math.comb(h + m - 1, m - 1) < count:
        h += 1
    lattice = [c for c in itertools.product(range(h + 1), repeat=m) if sum(c) == h]
    lattice.sort(key=lambda c: (sum(1 for x in c if x > 0), tuple(-x for x in c)))
    vectors = [tuple(x / h for x in c) for c in lattice[:count]]
    t = count if t is None else max(1, min(t, count))
    arr = np.asarray(vectors)
    neigh = []
    for i in range(count):
        d = np.linalg.norm(arr - arr[i], axis=1)
        neigh.append(sorted(range(count), key=lambda j: (d[j], j))[:t])
    return vectors, neigh


def tchebycheff(f: Sequence[float], weights: Sequence[float], reference: Sequence[float]) -> float:
    return max(w * abs(x - z) for x, w, z in zip(f, weights, reference))


@dataclass(frozen=True)
class MoeadParams:
    population_size: int = 40
    neighborhood: int = 10
    pc: float = 1.0
    pm: float = 0.08
    max_evaluations: int = 2000
    archive_capacity: int | None = None
    decode_params: DecodeParams = DEFAULT_PARAMS

    @classmethod
    def defaults(cls, instance: Instance, max_evaluations: int = 2000) -> "MoeadParams":
        size = max(3, 10 * instance.n)
        return cls(population_size=size, neighborhood=max(2, instance.n), max_evaluations=max_evaluations,
                   archive_capacity=size)


def _better_for(sub: Member, cand: Member, weights, z) -> bool:
    """Replacement test: smaller penalty first, then the Tchebycheff value."""
    if cand.penalty != sub.penalty:
        return cand.penalty < sub.penalty
    return tchebycheff(cand.objectives, weights, z) < tchebycheff(sub.objectives, weights, z)


def moead_solve(instance: Instance, params: MoeadParams, seed: int,
                initial: Sequence[Chromosome] | None = None, threads: int = 1,
                time_limit_ms: float | None = None, archive: Archive | None = None) -> Front:
    """MOEA/D; returns the external population."""
    started = time.perf_counter()
    size = params.population_size
    weights, neigh = weight_vectors(size, 3, params.neighborhood)
    ev = _Evaluator(instance, params.decode_params, threads)
    init_rng = stream(seed, "moead-init")
    chs = list(initial or [])[:size]
    while len(chs) < size:
        chs.append(random_chromosome(instance, init_rng))
    pop = ev.many(chs)
    ev.evaluations = 0
    z = [min(m.objectives[j] for m in pop) for j in range(3)]
    ep = archive if archive is not None else Archive(params.archive_capacity or size)
    for m in pop:
        ep.offer(m)
    generation = 0
    while ev.evaluations + 1 <= params.max_evaluations:
        generation += 1
        for i in range(size):
            if ev.evaluations >= params.max_evaluations:
                break
            if time_limit_ms is not None and (time.perf_counter() - started) * 1000 >= time_limit_ms:
                return ep.front()
            rng = stream(seed, "moead-slot", generation, i)
            k, l = (int(x) for x in rng.choice(len(neigh[i]), size=2, replace=len(neigh[i]) < 2))
            p1, p2 = pop[neigh[i][k]].chromosome, pop[neigh[i][l]].chromosome
            child = uox_crossover(p1, p2, rng, instance) if rng.random() < params.pc else p1
            child = mutate(child, rng, params.pm, instance)
            y = ev.many([child])[0]
            z = [min(zj, fj) for zj, fj in zip(z, y.objectives)]
            for j in neigh[i]:
                if _better_for(pop[j], y, weights[j], z):
                    pop[j] = y
            ep.offer(y)
    return ep.front()


# -- hybrid ------------------------------------------------------------------------------------


@dataclass
class HybridResult:
    front: Front
    nsga2_front: Front


def hybrid_solve(instance: Instance, nsga: NsgaParams, moead: MoeadParams, seed: int, threads: int = 1,
                 time_limit_ms: float | None = None) -> HybridResult:
    """NSGA-II, then MOEA/D seeded with its rank-1 front plus random fill."""
    first = nsga2_solve(instance, nsga, seed, threads, time_limit_ms)
    archive = Archive(max(moead.archive_capacity or moead.population_size, len(first)))
    for m in first.members:
        archive.offer(m)
    seeds = [m.chromosome for m in first.members]
    final = moead_solve(instance, moead, seed, seeds, threads, time_limit_ms, archive)
    return HybridResult(final, first)
