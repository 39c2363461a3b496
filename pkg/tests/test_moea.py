import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import hhcrsp.moea as moea
from hhcrsp.instancegen import Recipe, generate
from hhcrsp.metrics import coverage, hypervolume, normalize
from hhcrsp.model import Chromosome
from hhcrsp.moea import (
    Archive,
    Member,
    MoeadParams,
    NsgaParams,
    constrained_dominates,
    crowding_distance,
    fast_nondominated_sort,
    hybrid_solve,
    moead_solve,
    nsga2_solve,
    tchebycheff,
    weight_vectors,
)
from hhcrsp.oracle import brute_force_solve
from hhcrsp.schedule import Variant

from factories import oracle_instances, single_visit, tiny_one


def feasible(*f):
    return (f, 0.0)


def naive_ranks(points):
    left = set(range(len(points)))
    out = []
    while left:
        front = sorted(i for i in left if not any(constrained_dominates(points[j], points[i]) for j in left))
        out.append(front)
        left -= set(front)
    return out


def _small_multi(seed=3, n=4):
    return generate(Recipe(n=n, c=2, multi_service_fraction=0.3, skill_grouping="random"), seed)


def test_constrained_domination_examples():
    assert constrained_dominates(feasible(5, 5, 5), ((1, 1, 1), 3.0))
    assert not constrained_dominates(feasible(1, 2, 3), feasible(1, 2, 3))
    assert constrained_dominates(feasible(1, 1, 1), feasible(2, 1, 1))
    assert constrained_dominates(((9, 9, 9), 1.0), ((1, 1, 1), 2.0))
    assert not constrained_dominates(((1, 1, 1), 2.0), ((9, 9, 9), 2.0))


def test_nondominated_sort_example():
    pts = [feasible(1, 1), feasible(2, 2), feasible(1, 2), feasible(2, 1)]
    assert fast_nondominated_sort(pts) == [[0], [2, 3], [1]]
    assert fast_nondominated_sort([feasible(1, 3), feasible(2, 2), feasible(3, 1)]) == [[0, 1, 2]]
    assert fast_nondominated_sort([]) == []


@settings(max_examples=60, deadline=None)
@given(size=st.integers(10, 200), m=st.integers(2, 4), seed=st.integers(0, 2**31), infeasible=st.booleans())
def test_nondominated_sort_matches_naive(size, m, seed, infeasible):
    rng = np.random.default_rng(seed)
    values = rng.integers(0, 8, size=(size, m))
    penalties = rng.integers(0, 3, size=size) if infeasible else np.zeros(size)
    pts = [(tuple(map(float, v)), float(p)) for v, p in zip(values, penalties)]
    assert [sorted(f) for f in fast_nondominated_sort(pts)] == naive_ranks(pts)


points3 = st.tuples(st.integers(0, 5), st.integers(0, 5), st.integers(0, 5)).map(lambda t: tuple(map(float, t)))
points_with_penalty = st.tuples(points3, st.sampled_from([0.0, 0.0, 1.0, 2.0]))


@settings(max_examples=200, deadline=None)
@given(a=points_with_penalty, b=points_with_penalty, c=points_with_penalty)
def test_constrained_domination_is_strict_partial_order(a, b, c):
    assert not constrained_dominates(a, a)
    assert not (constrained_dominates(a, b) and constrained_dominates(b, a))
    if constrained_dominates(a, b) and constrained_dominates(b, c):
        assert constrained_dominates(a, c)


def test_crowding_distance_examples():
    assert crowding_distance([(1, 2), (2, 1)]) == [math.inf, math.inf]
    assert crowding_distance([(0, 2), (1, 1), (2, 0)]) == [math.inf, 1.0, math.inf]
    dup = crowding_distance([(0, 4), (1, 3), (1, 3), (4, 0)])
    assert dup[2] == 0 and dup[1] > 0
    assert crowding_distance([]) == []


def test_weight_vectors_lattice():
    vectors, neigh = weight_vectors(6)
    assert vectors == [(1, 0, 0), (0, 1, 0), (0, 0, 1), (0.5, 0.5, 0), (0.5, 0, 0.5), (0, 0.5, 0.5)]
    assert all(sorted(b) == list(range(6)) for b in neigh)
    _, near = weight_vectors(6, t=2)
    assert near[0] == [0, 3]
    with pytest.raises(ValueError):
        weight_vectors(2)


@settings(max_examples=30, deadline=None)
@given(count=st.integers(3, 120), t=st.integers(1, 20))
def test_weight_vectors_sum_to_one(count, t):
    vectors, neigh = weight_vectors(count, t=t)
    assert len(vectors) == count == len(set(vectors))
    for i, (w, b) in enumerate(zip(vectors, neigh)):
        assert abs(sum(w) - 1) <= 1e-9 and min(w) >= 0
        assert b[0] == i and len(b) == min(t, count)


def test_tchebycheff_examples():
    third = (1 / 3, 1 / 3, 1 / 3)
    assert tchebycheff((2, 3, 4), third, (1, 1, 1)) == pytest.approx(1.0)
    assert tchebycheff((1, 1, 1), third, (1, 1, 1)) == 0
    assert tchebycheff((2, 3, 4), (2 / 3,) * 3, (1, 1, 1)) == pytest.approx(2.0)


def _member(f, p=0.0):
    return Member(Chromosome((), ()), tuple(map(float, f)), p)


def test_archive_keeps_nondominated_and_history():
    ar = Archive(capacity=2)
    assert ar.offer(_member((3, 3, 3)))
    assert ar.offer(_member((1, 4, 4)))
    assert not ar.offer(_member((3, 3, 3)))
    assert ar.offer(_member((2, 2, 2)))
    assert sorted(m.objectives for m in ar.members) == [(1, 4, 4), (2, 2, 2)]
    assert ar.offer(_member((4, 1, 1)))
    assert len(ar.members) == 2
    # an evicted point still rejects anything it dominates
    evicted = {(1, 4, 4), (2, 2, 2), (4, 1, 1)} - {m.objectives for m in ar.members}
    (gone,) = evicted
    assert not ar.offer(_member(tuple(x + 1 for x in gone)))


def test_archive_prefers_feasible():
    ar = Archive()
    ar.offer(_member((1, 1, 1), 5.0))
    ar.offer(_member((9, 9, 9)))
    assert [m.objectives for m in ar.members] == [(9, 9, 9)]
    assert not ar.offer(_member((0, 0, 0), 1.0))


def test_nsga2_one_patient():
    inst = single_visit(window=(0, 300))
    front = nsga2_solve(inst, NsgaParams(population_size=4, max_evaluations=40), seed=0)
    assert len(front) == 1
    assert front.members[0].objectives == (20, 0, 0) and front.members[0].feasible


def test_nsga2_rejects_tiny_population():
    with pytest.raises(ValueError):
        nsga2_solve(tiny_one(), NsgaParams(population_size=3), seed=0)


def _pairwise_nondominated(front):
    pts = [m.point for m in front.members]
    return not any(constrained_dominates(a, b) for a, b in itertools.permutations(pts, 2))


@pytest.mark.parametrize("inst", oracle_instances(4, base_seed=300, max_genes=6), ids=lambda _: "oracle")
def test_nsga2_covers_oracle_front(inst):
    exact = brute_force_solve(inst, Variant.MULTIOBJ)
    front = nsga2_solve(inst, NsgaParams(population_size=40, max_evaluations=20000), seed=1)
    assert _pairwise_nondominated(front)
    found = {(m.objectives, m.penalty) for m in front.members}
    assert {(f, p) for f, p, _ in exact.pareto} <= found


def test_moead_single_solution_space():
    inst = single_visit(window=(0, 300))
    for size in (3, 12):
        front = moead_solve(inst, MoeadParams(population_size=size, neighborhood=2, max_evaluations=50), seed=0)
        assert [m.objectives for m in front.members] == [(20, 0, 0)]


def test_moead_ideal_point_never_increases(monkeypatch):
    seen = []
    real = moea.tchebycheff

    def spy(f, w, z):
        seen.append(tuple(z))
        return real(f, w, z)

    monkeypatch.setattr(moea, "tchebycheff", spy)
    front = moead_solve(_small_multi(), MoeadParams(population_size=20, neighborhood=4, max_evaluations=300), seed=2)
    assert seen
    assert all(all(b <= a for a, b in zip(x, y)) for x, y in zip(seen, seen[1:]))
    assert _pairwise_nondominated(front)


def test_moead_archive_capacity():
    inst = generate(Recipe(n=6, c=3, windows_per_patient=2, multi_service_fraction=0.3, skill_grouping="random"), 5)
    front = moead_solve(inst, MoeadParams(population_size=10, neighborhood=3, max_evaluations=400, archive_capacity=4),
                        seed=3)
    assert 1 <= len(front) <= 4
    assert _pairwise_nondominated(front)


def test_moea_runs_are_deterministic_and_thread_independent():
    inst = _small_multi(seed=7, n=5)
    p = NsgaParams(population_size=12, max_evaluations=240)
    a = nsga2_solve(inst, p, seed=5, threads=1)
    b = nsga2_solve(inst, p, seed=5, threads=4)
    assert a.to_csv() == b.to_csv()
    q = MoeadParams(population_size=12, neighborhood=3, max_evaluations=240)
    assert moead_solve(inst, q, 5, threads=1).to_csv() == moead_solve(inst, q, 5, threads=4).to_csv()


def test_hybrid_zero_budget_keeps_seeds():
    inst = _small_multi(seed=11, n=5)
    res = hybrid_solve(inst, NsgaParams(population_size=12, max_evaluations=120),
                       MoeadParams(population_size=12, neighborhood=3, max_evaluations=0), seed=4)
    seeds = [m.point for m in res.nsga2_front.members]
    final = [m.point for m in res.front.members]
    for s in seeds:
        assert s in final or any(constrained_dominates(f, s) for f in final)
    for f in final:
        assert not any(constrained_dominates(s, f) for s in seeds)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_hybrid_improves_on_nsga2(seed):
    inst = generate(Recipe(n=6, c=3, windows_per_patient=2, multi_service_fraction=0.3, skill_grouping="random"),
                    20 + seed)
    res = hybrid_solve(inst, NsgaParams.defaults(inst, 600), MoeadParams.defaults(inst, 600), seed=seed)
    first, final = res.nsga2_front.feasible_points(), res.front.feasible_points()
    assert final
    if first:
        (a, b), _ = normalize([first, final])
        assert coverage(a, b) == 0
        assert hypervolume(b, (1.1,) * 3) >= hypervolume(a, (1.1,) * 3)
