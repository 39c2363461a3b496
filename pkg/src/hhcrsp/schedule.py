"""Chromosome decoding, objectives and constraint validation.

One timing engine serves all five model variants. Routes are the
assignment-filtered subsequences of the gene list; every caregiver leaves
the center at the start of duty, and arrival = previous departure + travel.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

from .model import Chromosome, Instance, TimeWindow, Violation, validate_chromosome

EPS = 1e-9


class Variant(enum.Enum):
    SOFT_MTW = "soft-mtw"
    HARD_MSMTW = "hard-msmtw"
    SPR_PENALTY = "spr-penalty"
    SPR_SKIP = "spr-skip"
    MULTIOBJ = "multiobj"


@dataclass(frozen=True)
class DecodeParams:
    """Weights and limits used by decoding and the scalar objectives.

    ``soft_weights`` are the earliness, tardiness and waiting weights of the
    soft multi-window model; ``hard_weights`` weigh waiting and workload
    deviation in the hard-window model. ``penalty_weight`` multiplies the
    penalty of infeasible schedules. ``max_iter_syn`` defaults to 2c.
    """

    soft_weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    e_max: float = 0.0
    t_max: float = 15.0
    w_max: float = 90.0
    hard_weights: tuple[float, float] = (0.5, 0.5)
    penalty_weight: float = 100.0
    max_iter_syn: int | None = None

    def sync_budget(self, instance: Instance) -> int:
        return self.max_iter_syn if self.max_iter_syn is not None else 2 * instance.c


DEFAULT_PARAMS = DecodeParams()


@dataclass(frozen=True)
class Visit:
    caregiver: int
    patient: int
    service: int
    window: int
    arrival: float
    start: float
    completion: float
    wait: float = 0.0
    earliness: float = 0.0
    tardiness: float = 0.0
    skipped: bool = False


@dataclass(frozen=True)
class CaregiverTimes:
    caregiver: int
    route: tuple[int, ...]
    wait: float
    working: float
    overtime: float
    return_time: float
    deviation: float
    travel: float
    cost: float


@dataclass(frozen=True)
class Schedule:
    variant: Variant
    visits: tuple[Visit, ...]
    caregivers: tuple[CaregiverTimes, ...]
    selected_window: Mapping[int, int]
    earliness: Mapping[int, float]
    tardiness: Mapping[int, float]
    skipped: frozenset[int]
    feasible: bool
    penalty: float
    sync_ok: bool = True
    sync_iterations: int = 0
    limit_excess: float = 0.0
    over_visits: int = 0

    @property
    def total_travel(self) -> float:
        return sum(k.travel for k in self.caregivers)

    @property
    def total_cost(self) -> float:
        return sum(k.cost for k in self.caregivers)

    @property
    def total_wait(self) -> float:
        return sum(k.wait for k in self.caregivers)

    @property
    def total_deviation(self) -> float:
        return sum(k.deviation for k in self.caregivers)

    @property
    def total_tardiness(self) -> float:
        return sum(self.tardiness.values())

    @property
    def total_earliness(self) -> float:
        return sum(self.earliness.values())

    @property
    def total_overtime(self) -> float:
        return sum(k.overtime for k in self.caregivers)

    @property
    def skipped_count(self) -> int:
        return sum(1 for v in self.visits if v.skipped)


class ObjectiveVector(NamedTuple):
    f1: float
    f2: float
    f3: float


class SoftChoice(NamedTuple):
    window: int
    earliness: float
    tardiness: float
    added_wait: float


# -- soft multi-window rules ------------------------------------------------


def split_early_arrival(
    early: float, alpha: float, gamma: float, e_max: float, w_k: float, w_max: float
) -> tuple[float, float] | None:
    """Split an early arrival into earliness and waiting.

    Returns ``(earliness, new cumulative wait)`` or None when neither budget
    can absorb the remainder. The cheaper of the two absorbs first.
    """
    if alpha <= gamma:
        if early <= e_max:
            return early, w_k
        if w_k + early - e_max <= w_max:
            return e_max, w_k + early - e_max
        return None
    if early + w_k <= w_max:
        return 0.0, w_k + early
    if w_k + early - w_max <= e_max:
        return w_k + early - w_max, w_max
    return None


def _soft_candidate(
    window: TimeWindow, arrival: float, duration: float, weights, limits, wait_so_far: float
) -> tuple[float, float, float, float]:
    """(earliness, tardiness, added wait, limit excess) for one window."""
    alpha, _, gamma = weights
    e_max, t_max, w_max = limits
    excess = 0.0
    u = wait = 0.0
    if arrival < window.a:
        early = window.a - arrival
        split = split_early_arrival(early, alpha, gamma, e_max, wait_so_far, w_max)
        if split is None:
            # fall back to the capped split and book the overflow as excess
            if alpha <= gamma:
                u = min(early, e_max)
                wait = early - u
            else:
                wait = max(0.0, min(early, w_max - wait_so_far))
                u = early - wait
            excess += max(0.0, u - e_max) + max(0.0, wait_so_far + wait - w_max)
        else:
            u, new_w = split
            wait = new_w - wait_so_far
    start = arrival + wait
    v = max(0.0, start + duration - window.b)
    excess += max(0.0, v - t_max)
    return u, v, wait, excess


def select_period_soft(
    windows: Sequence[TimeWindow],
    arrival: float,
    weights: tuple[float, float, float],
    limits: tuple[float, float, float],
    duration: float,
    wait_so_far: float,
) -> SoftChoice | None:
    """Window minimizing weighted earliness + tardiness + wait, or None.

    ``limits`` is ``(E_max, T_max, W_max)``; ties go to the lowest index.
    """
    best = None
    best_score = math.inf
    for idx, w in enumerate(windows):
        u, v, wait, excess = _soft_candidate(w, arrival, duration, weights, limits, wait_so_far)
        if excess > 0:
            continue
        score = weights[0] * u + weights[1] * v + weights[2] * wait
        if score < best_score:
            best, best_score = SoftChoice(idx, u, v, wait), score
    return best


def _select_soft_fallback(windows, arrival, weights, limits, duration, wait_so_far):
    """Least-violating window when no window respects the limits."""
    best_key, best = None, None
    for idx, w in enumerate(windows):
        u, v, wait, excess = _soft_candidate(w, arrival, duration, weights, limits, wait_so_far)
        key = (excess, weights[0] * u + weights[1] * v + weights[2] * wait)
        if best_key is None or key < best_key:
            best_key, best = key, (SoftChoice(idx, u, v, wait), excess)
    return best


def min_tardiness_window(windows: Sequence[TimeWindow], arrival: float, duration: float) -> tuple[int, float]:
    """Earliest window with the smallest tardiness for a given arrival."""
    best_idx, best_t = 0, math.inf
    for idx, w in enumerate(windows):
        t = max(0.0, max(arrival, w.a) + duration - w.b)
        if t < best_t:
            best_idx, best_t = idx, t
    return best_idx, best_t


# -- decoding -----------------------------------------------------------------


def routes_of(instance: Instance, chromosome: Chromosome) -> list[list[int]]:
    """Gene indices per caregiver (list index k-1), in gene order."""
    routes: list[list[int]] = [[] for _ in range(instance.c)]
    for i, k in enumerate(chromosome.assignment):
        routes[k - 1].append(i)
    return routes


def decode(
    instance: Instance,
    chromosome: Chromosome,
    variant: Variant,
    params: DecodeParams = DEFAULT_PARAMS,
    travel: Sequence[Sequence[float]] | None = None,
    durations: Mapping[tuple[int, int], float] | None = None,
    check: bool = True,
) -> Schedule:
    """Timed schedule of ``chromosome`` under ``variant``.

    ``travel`` and ``durations`` override the nominal data, which is how
    the recourse simulator replays a realized scenario. Search loops that
    only produce valid chromosomes pass ``check=False``.
    """
    if check:
        problems = validate_chromosome(instance, chromosome)
        if problems:
            raise ValueError(f"invalid chromosome: {problems[0]}")
    travel = instance.travel if travel is None else travel
    durations = instance.durations if durations is None else durations
    routes = routes_of(instance, chromosome)
    if variant is Variant.SOFT_MTW:
        if any(len(p.demands) > 1 for p in instance.patients):
            raise ValueError("the soft multi-window model handles single-service patients only")
        return _decode_soft(instance, chromosome, routes, params, travel, durations)
    if variant is Variant.SPR_SKIP:
        if any(p.simultaneous for p in instance.patients):
            raise ValueError("the skip model has no synchronized services")
        return _decode_skip(instance, chromosome, routes, travel, durations)
    return _decode_timed(instance, chromosome, routes, variant, params, travel, durations)


def _finish_caregivers(instance, chromosome, routes, visits, travel, durations, last_departure, last_node):
    """Per-caregiver aggregates; deviations use the mean over all caregivers."""
    end = instance.end_node
    cost = instance.cost
    rows = []
    for k, route in enumerate(routes, start=1):
        duty = instance.caregiver(k).duty
        if not route:
            rows.append([k, (), 0.0, 0.0, 0.0, duty.a, 0.0, 0.0])
            continue
        node = 0
        trav = cst = served = wait = 0.0
        for gi in route:
            p = chromosome.genes[gi].patient
            trav += travel[node][p]
            cst += cost[node][p]
            v = visits[gi]
            if not v.skipped:
                served += v.completion - v.start
            wait += v.wait
            node = p
        trav += travel[node][end]
        cst += cost[node][end]
        ret = last_departure[k - 1] + travel[last_node[k - 1]][end]
        rows.append([k, tuple(route), wait, served + trav, max(0.0, ret - duty.b), ret, trav, cst])
    mean = sum(r[3] for r in rows) / len(rows) if rows else 0.0
    return tuple(
        CaregiverTimes(
            caregiver=r[0], route=r[1], wait=r[2], working=r[3], overtime=r[4],
            return_time=r[5], deviation=abs(r[3] - mean), travel=r[6], cost=r[7],
        )
        for r in rows
    )


def _decode_soft(instance, chromosome, routes, params, travel, durations) -> Schedule:
    weights = params.soft_weights
    limits = (params.e_max, params.t_max, params.w_max)
    visits: list[Visit | None] = [None] * len(chromosome)
    last_dep, last_node = [0.0] * instance.c, [0] * instance.c
    excess_total = 0.0
    for k, route in enumerate(routes, start=1):
        t = instance.caregiver(k).duty.a
        node = 0
        w_k = 0.0
        for gi in route:
            g = chromosome.genes[gi]
            dur = durations[(g.patient, g.service)]
            arrival = t + travel[node][g.patient]
            windows = instance.patient(g.patient).windows
            choice = select_period_soft(windows, arrival, weights, limits, dur, w_k)
            excess = 0.0
            if choice is None:
                choice, excess = _select_soft_fallback(windows, arrival, weights, limits, dur, w_k)
            excess_total += excess
            start = arrival + choice.added_wait
            w_k += choice.added_wait
            visits[gi] = Visit(k, g.patient, g.service, choice.window, arrival, start, start + dur,
                               choice.added_wait, choice.earliness, choice.tardiness)
            t, node = start + dur, g.patient
        last_dep[k - 1], last_node[k - 1] = t, node
    cares = _finish_caregivers(instance, chromosome, routes, visits, travel, durations, last_dep, last_node)
    overtime = sum(c.overtime for c in cares)
    penalty = excess_total + overtime
    earl: dict[int, float] = {}
    tard: dict[int, float] = {}
    sel: dict[int, int] = {}
    for v in visits:
        earl[v.patient] = earl.get(v.patient, 0.0) + v.earliness
        tard[v.patient] = tard.get(v.patient, 0.0) + v.tardiness
        sel[v.patient] = v.window
    return Schedule(Variant.SOFT_MTW, tuple(visits), cares, sel, earl, tard, frozenset(),
                    feasible=penalty <= EPS, penalty=penalty, limit_excess=excess_total)


def _decode_skip(instance, chromosome, routes, travel, durations) -> Schedule:
    visits: list[Visit | None] = [None] * len(chromosome)
    last_dep, last_node = [0.0] * instance.c, [0] * instance.c
    for k, route in enumerate(routes, start=1):
        t = instance.caregiver(k).duty.a
        node = 0
        for gi in route:
            g = chromosome.genes[gi]
            dur = durations[(g.patient, g.service)]
            arrival = t + travel[node][g.patient]
            windows = instance.patient(g.patient).windows
            idx, tard = min_tardiness_window(windows, arrival, dur)
            if tard > 0:
                # pass through: travel only, no service
                visits[gi] = Visit(k, g.patient, g.service, idx, arrival, arrival, arrival, skipped=True)
                t = arrival
            else:
                start = max(arrival, windows[idx].a)
                visits[gi] = Visit(k, g.patient, g.service, idx, arrival, start, start + dur, wait=start - arrival)
                t = start + dur
            node = g.patient
        last_dep[k - 1], last_node[k - 1] = t, node
    cares = _finish_caregivers(instance, chromosome, routes, visits, travel, durations, last_dep, last_node)
    over = 0
    for k, route in enumerate(routes, start=1):
        cap = instance.caregiver(k).max_visits
        if cap is not None:
            over += max(0, len(route) - cap)
    skipped = frozenset(v.patient for v in visits if v.skipped)
    sel = {v.patient: v.window for v in visits}
    zero = {p.id: 0.0 for p in instance.patients}
    return Schedule(Variant.SPR_SKIP, tuple(visits), cares, sel, zero, dict(zero), skipped,
                    feasible=over == 0, penalty=float(over), over_visits=over)


def _phase_one_windows(instance, chromosome, routes, travel, durations) -> dict[int, int]:
    """Window per patient, chosen for its first-arriving caregiver.

    A tentative pass without synchronization gives each visit an arrival
    and a minimal-tardiness window; the earliest arrival (ties: lower
    caregiver id) decides the patient's window.
    """
    chosen: dict[int, tuple[float, int, int]] = {}
    for k, route in enumerate(routes, start=1):
        t = instance.caregiver(k).duty.a
        node = 0
        for gi in route:
            g = chromosome.genes[gi]
            pat = instance.patient(g.patient)
            dur = durations[(g.patient, g.service)]
            arrival = t + travel[node][g.patient]
            idx, _ = min_tardiness_window(pat.windows, arrival, dur)
            key = (arrival, k, idx)
            if g.patient not in chosen or key < chosen[g.patient]:
                chosen[g.patient] = key
            t = max(arrival, pat.windows[idx].a) + dur
            node = g.patient
    return {p: key[2] for p, key in chosen.items()}


def _decode_timed(instance, chromosome, routes, variant, params, travel, durations) -> Schedule:
    genes = chromosome.genes
    sel = _phase_one_windows(instance, chromosome, routes, travel, durations)
    win = {p: instance.patient(p).windows[idx] for p, idx in sel.items()}
    sync = {p for p in sel if instance.patient(p).simultaneous}
    longest = {p: max(durations[(p, s)] for s in instance.patient(p).demands) for p in sync}
    ss = {p: win[p].a for p in sync}
    hard = variant in (Variant.HARD_MSMTW, Variant.MULTIOBJ)
    budget = params.sync_budget(instance)
    if hard:
        # hard windows end the iteration by themselves (SS only grows)
        budget = max(budget, 4 * len(genes) + 4)

    def one_pass():
        arrivals = [0.0] * len(genes)
        starts = [0.0] * len(genes)
        dep, last = [0.0] * instance.c, [0] * instance.c
        for k, route in enumerate(routes, start=1):
            t = instance.caregiver(k).duty.a
            node = 0
            for gi in route:
                p, s = genes[gi]
                a = t + travel[node][p]
                start = max(ss[p], a) if p in ss else max(win[p].a, a)
                arrivals[gi], starts[gi] = a, start
                t, node = start + durations[(p, s)], p
            dep[k - 1], last[k - 1] = t, node
        return arrivals, starts, dep, last

    iterations = 0
    sync_ok = True
    while True:
        arrivals, starts, dep, last = one_pass()
        iterations += 1
        if not sync:
            break
        new_ss = dict(ss)
        for gi, g in enumerate(genes):
            if g.patient in new_ss and arrivals[gi] > new_ss[g.patient]:
                new_ss[g.patient] = arrivals[gi]
        if new_ss == ss:
            break
        ss = new_ss
        if hard and any(ss[p] + longest[p] > win[p].b + EPS for p in sync):
            sync_ok = False
            arrivals, starts, dep, last = one_pass()
            break
        if iterations >= budget:
            sync_ok = False
            arrivals, starts, dep, last = one_pass()
            break

    visits = []
    tard: dict[int, float] = {p.id: 0.0 for p in instance.patients}
    for gi, g in enumerate(genes):
        dur = durations[g]
        w = win[g.patient]
        v = max(0.0, starts[gi] + dur - w.b)
        tard[g.patient] += v
        visits.append(Visit(chromosome.assignment[gi], g.patient, g.service, sel[g.patient],
                            arrivals[gi], starts[gi], starts[gi] + dur, starts[gi] - arrivals[gi], 0.0, v))
    cares = _finish_caregivers(instance, chromosome, routes, visits, travel, durations, dep, last)
    penalty = sum(tard.values()) + sum(c.overtime for c in cares)
    if not sync_ok:
        penalty = math.inf
    earl = {p.id: 0.0 for p in instance.patients}
    return Schedule(variant, tuple(visits), cares, sel, earl, tard, frozenset(),
                    feasible=sync_ok and penalty <= EPS, penalty=penalty,
                    sync_ok=sync_ok, sync_iterations=iterations)


# -- objectives -----------------------------------------------------------------


def objective(schedule: Schedule, variant: Variant, params: DecodeParams = DEFAULT_PARAMS,
              penalized: bool = True) -> float:
    """Scalar objective of a decoded schedule, plus the weighted penalty."""
    if schedule.variant is not variant:
        raise ValueError(f"schedule decoded under {schedule.variant.name}, not {variant.name}")
    if variant is Variant.SOFT_MTW:
        a, b, g = params.soft_weights
        z = a * schedule.total_earliness + b * schedule.total_tardiness + g * schedule.total_wait
    elif variant is Variant.HARD_MSMTW:
        a, b = params.hard_weights
        z = a * schedule.total_wait + b * schedule.total_deviation
    elif variant is Variant.SPR_PENALTY:
        z = schedule.total_cost
    elif variant is Variant.SPR_SKIP:
        z = schedule.total_cost + params.penalty_weight * schedule.skipped_count
    else:
        raise ValueError("the multi-objective model has no scalar objective; use objective_vector")
    if penalized and schedule.penalty > 0:
        z += params.penalty_weight * schedule.penalty
    return z


def objective_vector(schedule: Schedule) -> ObjectiveVector:
    return ObjectiveVector(schedule.total_travel, schedule.total_wait, schedule.total_deviation)


# -- constraint validation -----------------------------------------------------


@dataclass(frozen=True)
class CoverageViolation(Violation):
    pass


@dataclass(frozen=True)
class RouteViolation(Violation):
    caregiver: int = 0
    amount: float = 0.0


@dataclass(frozen=True)
class WindowViolation(Violation):
    patient: int = 0
    amount: float = 0.0


@dataclass(frozen=True)
class LimitViolation(Violation):
    limit: str = ""
    amount: float = 0.0


@dataclass(frozen=True)
class DutyViolation(Violation):
    caregiver: int = 0
    amount: float = 0.0


@dataclass(frozen=True)
class SyncViolation(Violation):
    patient: int = 0


@dataclass(frozen=True)
class EarlyStartViolation(Violation):
    pass


@dataclass(frozen=True)
class MaxVisitsViolation(Violation):
    caregiver: int = 0
    amount: int = 0


@dataclass(frozen=True)
class SkipViolation(Violation):
    pass


def duty_violation(k: int, amount: float) -> DutyViolation:
    return DutyViolation("duty", None, k, amount)


def sync_violation(p: int) -> SyncViolation:
    return SyncViolation("synchronization", None, p)


def feasibility_check(instance: Instance, chromosome: Chromosome, schedule: Schedule,
                      variant: Variant, params: DecodeParams = DEFAULT_PARAMS) -> list[Violation]:
    """Evaluate the model constraints as predicates on the recorded times."""
    out: list[Violation] = list(validate_chromosome(instance, chromosome))
    if out:
        return out
    if len(schedule.visits) != len(chromosome):
        return [CoverageViolation("coverage")]
    for i, (g, k, v) in enumerate(zip(chromosome.genes, chromosome.assignment, schedule.visits)):
        if (v.patient, v.service, v.caregiver) != (g.patient, g.service, k):
            out.append(CoverageViolation("coverage", i))
    if out:
        return out
    travel, end = instance.travel, instance.end_node
    soft = variant is Variant.SOFT_MTW
    skip = variant is Variant.SPR_SKIP
    served_by: dict[int, list[int]] = {}
    for k, route in enumerate(routes_of(instance, chromosome), start=1):
        care = instance.caregiver(k)
        t, node = care.duty.a, 0
        w_total = 0.0
        for gi in route:
            v = schedule.visits[gi]
            dur = instance.durations[(v.patient, v.service)]
            expected = t + travel[node][v.patient]
            if abs(v.arrival - expected) > 1e-6:
                out.append(RouteViolation("flow", gi, k, v.arrival - expected))
            if v.start < v.arrival - 1e-6:
                out.append(RouteViolation("start_before_arrival", gi, k, v.arrival - v.start))
            length = 0.0 if v.skipped else dur
            if abs(v.completion - (v.start + length)) > 1e-6:
                out.append(RouteViolation("completion", gi, k, v.completion - v.start - length))
            w_total += v.start - v.arrival
            if not v.skipped:
                served_by.setdefault(v.patient, []).append(gi)
            t, node = v.completion, v.patient
        ret = t + travel[node][end] if route else care.duty.a
        if not skip and ret > care.duty.b + 1e-6:
            out.append(duty_violation(k, ret - care.duty.b))
        if soft and w_total > params.w_max + 1e-6:
            out.append(LimitViolation("wait_budget", None, "w_max", w_total - params.w_max))
        if skip and care.max_visits is not None and len(route) > care.max_visits:
            out.append(MaxVisitsViolation("max_visits", None, k, len(route) - care.max_visits))
    for gi, v in enumerate(schedule.visits):
        pat = instance.patient(v.patient)
        if not 0 <= v.window < len(pat.windows):
            out.append(WindowViolation("window_index", gi, v.patient))
            continue
        w = pat.windows[schedule.selected_window.get(v.patient, v.window)] if not (soft or skip) else pat.windows[v.window]
        if skip:
            _, tard = min_tardiness_window(pat.windows, v.arrival, instance.durations[(v.patient, v.service)])
            if v.skipped != (tard > 0):
                out.append(SkipViolation("skip_rule", gi))
            if v.skipped:
                continue
        if soft:
            if v.start < w.a - v.earliness - 1e-6:
                out.append(WindowViolation("window_start", gi, v.patient, w.a - v.earliness - v.start))
            if v.completion > w.b + v.tardiness + 1e-6:
                out.append(WindowViolation("window_end", gi, v.patient, v.completion - w.b - v.tardiness))
            if v.earliness > params.e_max + 1e-6:
                out.append(LimitViolation("earliness", gi, "e_max", v.earliness - params.e_max))
            if v.tardiness > params.t_max + 1e-6:
                out.append(LimitViolation("tardiness", gi, "t_max", v.tardiness - params.t_max))
            if v.start > max(v.arrival, w.a) + 1e-6:
                out.append(EarlyStartViolation("earliest_start", gi))
            continue
        if v.start < w.a - 1e-6:
            out.append(WindowViolation("window_start", gi, v.patient, w.a - v.start))
        if v.completion > w.b + 1e-6:
            out.append(WindowViolation("window_end", gi, v.patient, v.completion - w.b))
        if not pat.simultaneous and abs(v.start - max(w.a, v.arrival)) > 1e-6:
            out.append(EarlyStartViolation("earliest_start", gi))
    if not (soft or skip):
        for p, idxs in served_by.items():
            pat = instance.patient(p)
            if not pat.simultaneous:
                continue
            starts = [schedule.visits[i].start for i in idxs]
            if max(starts) - min(starts) > 1e-6:
                out.append(sync_violation(p))
                continue
            w = pat.windows[schedule.selected_window[p]]
            earliest = max([w.a] + [schedule.visits[i].arrival for i in idxs])
            if abs(starts[0] - earliest) > 1e-6:
                out.append(EarlyStartViolation("earliest_start", idxs[0]))
    return out


# -- report --------------------------------------------------------------------


def schedule_csv(instance: Instance, schedule: Schedule) -> str:
    """One row per visit, grouped by caregiver in route order."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["caregiver", "patient", "service", "window", "arrival", "start", "completion", "slack", "skipped"])
    for care in schedule.caregivers:
        for gi in care.route:
            v = schedule.visits[gi]
            b = instance.patient(v.patient).windows[v.window].b
            writer.writerow([v.caregiver, v.patient, v.service, v.window + 1, _fmt(v.arrival), _fmt(v.start),
                             _fmt(v.completion), _fmt(b - v.completion), int(v.skipped)])
    return buf.getvalue()


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    r = round(x, 6)
    return str(int(r)) if r == int(r) else repr(r)
