"""Domain types for HHCRSP instances and solutions.

Nodes are numbered 0 (care center), 1..n (patients) and n+1 (the center
again, as the return depot). Times are minutes, stored as floats.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence


class InstanceError(ValueError):
    """Raised when an instance violates a structural invariant."""


@dataclass(frozen=True)
class TimeWindow:
    a: float
    b: float

    def __post_init__(self) -> None:
        if self.a < 0 or self.a > self.b:
            raise InstanceError(f"bad time window [{self.a}, {self.b}]")


@dataclass(frozen=True)
class Patient:
    id: int
    location: tuple[float, float]
    demands: frozenset[int]
    simultaneous: bool
    windows: tuple[TimeWindow, ...]

    def __post_init__(self) -> None:
        if not self.demands:
            raise InstanceError(f"patient {self.id} has no demanded service")
        if self.simultaneous and len(self.demands) < 2:
            raise InstanceError(f"patient {self.id} is simultaneous with a single service")
        if not self.windows:
            raise InstanceError(f"patient {self.id} has no time window")
        if len(set(self.windows)) != len(self.windows):
            raise InstanceError(f"patient {self.id} has identical windows")


@dataclass(frozen=True)
class Caregiver:
    id: int
    duty: TimeWindow
    skills: frozenset[int]
    max_visits: int | None = None

    def __post_init__(self) -> None:
        if not self.skills:
            raise InstanceError(f"caregiver {self.id} has no skill")
        if self.max_visits is not None and self.max_visits < 1:
            raise InstanceError(f"caregiver {self.id} has max_visits < 1")


class VisitGene(NamedTuple):
    patient: int
    service: int

    def __str__(self) -> str:
        return f"{self.patient}({self.service})"


@dataclass(frozen=True)
class Chromosome:
    """Ordered visit genes plus the caregiver serving each gene."""

    genes: tuple[VisitGene, ...]
    assignment: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.genes) != len(self.assignment):
            raise ValueError("genes and assignment differ in length")

    @classmethod
    def of(cls, genes: Iterable[Sequence[int]], assignment: Iterable[int]) -> "Chromosome":
        return cls(tuple(VisitGene(int(p), int(s)) for p, s in genes), tuple(int(k) for k in assignment))

    def __len__(self) -> int:
        return len(self.genes)

    def key(self) -> tuple:
        return (self.genes, self.assignment)

    def to_dict(self) -> dict:
        return {"genes": [[g.patient, g.service] for g in self.genes], "assignment": list(self.assignment)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Chromosome":
        return cls.of(data["genes"], data["assignment"])

    def serialize(self) -> str:
        """Compact text form, e.g. ``1(2)@3 4(1)@1``."""
        return " ".join(f"{g.patient}({g.service})@{k}" for g, k in zip(self.genes, self.assignment))


@dataclass(frozen=True, eq=False)
class Instance:
    patients: tuple[Patient, ...]
    caregivers: tuple[Caregiver, ...]
    durations: Mapping[tuple[int, int], float]
    travel: tuple[tuple[float, ...], ...]
    cost: tuple[tuple[float, ...], ...]
    horizon: float
    center: tuple[float, float] = (0.0, 0.0)
    # derived lookups, filled in __post_init__
    qualified: Mapping[int, tuple[int, ...]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        _check_instance(self)
        qualified: dict[int, tuple[int, ...]] = {}
        for s in sorted({s for p in self.patients for s in p.demands}):
            qualified[s] = tuple(k.id for k in self.caregivers if s in k.skills)
        object.__setattr__(self, "qualified", qualified)

    @property
    def n(self) -> int:
        return len(self.patients)

    @property
    def c(self) -> int:
        return len(self.caregivers)

    @property
    def end_node(self) -> int:
        return self.n + 1

    def patient(self, pid: int) -> Patient:
        return self.patients[pid - 1]

    def caregiver(self, kid: int) -> Caregiver:
        return self.caregivers[kid - 1]

    def demanded_genes(self) -> list[VisitGene]:
        """All demanded (patient, service) pairs in canonical order."""
        return [VisitGene(p.id, s) for p in self.patients for s in sorted(p.demands)]

    @property
    def total_services(self) -> int:
        return sum(len(p.demands) for p in self.patients)

    def to_dict(self) -> dict:
        data = {
            "horizon": self.horizon,
            "center": list(self.center),
            "patients": [
                {
                    "id": p.id,
                    "loc": list(p.location),
                    "demands": sorted(p.demands),
                    "simultaneous": p.simultaneous,
                    "windows": [[w.a, w.b] for w in p.windows],
                }
                for p in self.patients
            ],
            "caregivers": [],
            "durations": [
                {"patient": p, "service": s, "minutes": self.durations[(p, s)]}
                for p, s in sorted(self.durations)
            ],
            "travel": [list(row) for row in self.travel],
            "cost": [list(row) for row in self.cost],
        }
        for k in self.caregivers:
            entry = {"id": k.id, "duty": [k.duty.a, k.duty.b], "skills": sorted(k.skills)}
            if k.max_visits is not None:
                entry["max_visits"] = k.max_visits
            data["caregivers"].append(entry)
        return data


def _check_instance(inst: Instance) -> None:
    ids = [p.id for p in inst.patients]
    if len(set(ids)) != len(ids):
        raise InstanceError("duplicate patient ids")
    if ids != list(range(1, len(ids) + 1)):
        raise InstanceError("patient ids must be 1..n in order")
    kids = [k.id for k in inst.caregivers]
    if kids != list(range(1, len(kids) + 1)):
        raise InstanceError("caregiver ids must be 1..c in order")
    size = len(ids) + 2
    for name, mat in (("travel", inst.travel), ("cost", inst.cost)):
        if len(mat) != size or any(len(row) != size for row in mat):
            raise InstanceError(f"{name} matrix must be {size}x{size}")
        for i in range(size):
            if mat[i][i] != 0:
                raise InstanceError(f"{name} matrix has a nonzero diagonal")
            if any(v < 0 for v in mat[i]):
                raise InstanceError(f"{name} matrix has a negative entry")
        last = size - 1
        if list(mat[0][1:last]) != list(mat[last][1:last]) or [r[0] for r in mat[1:last]] != [
            r[last] for r in mat[1:last]
        ]:
            raise InstanceError(f"{name} matrix: end node must duplicate the center")
    skills = set().union(*(k.skills for k in inst.caregivers)) if inst.caregivers else set()
    expected = set()
    for p in inst.patients:
        for s in p.demands:
            if s not in skills:
                raise InstanceError(f"service {s} of patient {p.id} has no skilled caregiver")
            expected.add((p.id, s))
    if set(inst.durations) != expected:
        raise InstanceError("durations must cover exactly the demanded (patient, service) pairs")
    if any(v < 0 for v in inst.durations.values()):
        raise InstanceError("negative duration")


def euclidean_matrix(coords: Sequence[tuple[float, float]]) -> tuple[tuple[float, ...], ...]:
    """Truncated Euclidean distances; ``coords[0]`` is the center, duplicated as the last node."""
    pts = list(coords) + [coords[0]]
    return tuple(
        tuple(float(math.floor(math.dist(p, q))) for q in pts) for p in pts
    )


def build_instance(
    coords: Sequence[tuple[float, float]],
    patients: Sequence[Mapping],
    caregivers: Sequence[Mapping],
    durations: Mapping[tuple[int, int], float],
    horizon: float = 600.0,
    travel: Sequence[Sequence[float]] | None = None,
    cost: Sequence[Sequence[float]] | None = None,
) -> Instance:
    """Assemble an Instance from plain specs.

    ``patients`` entries carry ``id, demands, simultaneous, windows``;
    ``caregivers`` entries carry ``id, duty, skills`` and optionally
    ``max_visits``. ``coords[0]`` is the center and ``coords[i]`` patient i.
    """
    if len(coords) != len(patients) + 1:
        raise InstanceError("coords needs the center plus one entry per patient")
    ids = [int(p["id"]) for p in patients]
    if len(set(ids)) != len(ids):
        raise InstanceError("duplicate patient ids")
    pats = []
    for i, entry in enumerate(patients, start=1):
        demands = frozenset(int(s) for s in entry["demands"])
        if not demands:
            raise InstanceError(f"patient {entry['id']} has no demanded service")
        pats.append(
            Patient(
                id=int(entry["id"]),
                location=tuple(float(v) for v in coords[i]),
                demands=demands,
                simultaneous=bool(entry.get("simultaneous", False)),
                windows=tuple(TimeWindow(float(a), float(b)) for a, b in entry["windows"]),
            )
        )
    cares = [
        Caregiver(
            id=int(entry["id"]),
            duty=TimeWindow(float(entry["duty"][0]), float(entry["duty"][1])),
            skills=frozenset(int(s) for s in entry["skills"]),
            max_visits=None if entry.get("max_visits") is None else int(entry["max_visits"]),
        )
        for entry in caregivers
    ]
    if travel is None:
        travel_m = euclidean_matrix([tuple(map(float, c)) for c in coords])
    else:
        travel_m = tuple(tuple(float(v) for v in row) for row in travel)
    cost_m = travel_m if cost is None else tuple(tuple(float(v) for v in row) for row in cost)
    return Instance(
        patients=tuple(pats),
        caregivers=tuple(cares),
        durations={(int(p), int(s)): float(t) for (p, s), t in durations.items()},
        travel=travel_m,
        cost=cost_m,
        horizon=float(horizon),
        center=tuple(float(v) for v in coords[0]),
    )


def instance_from_dict(data: Mapping) -> Instance:
    coords = [tuple(data["center"])] + [tuple(p["loc"]) for p in data["patients"]]
    durations = {(d["patient"], d["service"]): d["minutes"] for d in data["durations"]}
    return build_instance(
        coords,
        data["patients"],
        data["caregivers"],
        durations,
        horizon=data["horizon"],
        travel=data.get("travel"),
        cost=data.get("cost"),
    )


def load_instance(path: str | Path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return instance_from_dict(json.load(fh))


def save_instance(instance: Instance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(instance.to_dict(), indent=1) + "\n", encoding="utf-8")


def load_chromosome(path: str | Path) -> Chromosome:
    with open(path, encoding="utf-8") as fh:
        return Chromosome.from_dict(json.load(fh))


def save_chromosome(chromosome: Chromosome, path: str | Path) -> None:
    Path(path).write_text(json.dumps(chromosome.to_dict()) + "\n", encoding="utf-8")


# -- chromosome validation -------------------------------------------------


@dataclass(frozen=True)
class Violation:
    rule: str
    index: int | None = None


@dataclass(frozen=True)
class MissingGene(Violation):
    patient: int = 0
    service: int = 0


@dataclass(frozen=True)
class UnexpectedGene(Violation):
    patient: int = 0
    service: int = 0


@dataclass(frozen=True)
class UnskilledAssignment(Violation):
    caregiver: int = 0


@dataclass(frozen=True)
class DuplicatePatientCaregiverPair(Violation):
    patient: int = 0
    caregiver: int = 0


def missing_gene(p: int, s: int) -> MissingGene:
    return MissingGene("missing_gene", None, p, s)


def validate_chromosome(instance: Instance, chromosome: Chromosome) -> list[Violation]:
    """Report every broken encoding rule; never raises."""
    out: list[Violation] = []
    expected = set(instance.demanded_genes())
    seen: set[VisitGene] = set()
    for i, g in enumerate(chromosome.genes):
        if g not in expected or g in seen:
            out.append(UnexpectedGene("unexpected_gene", i, g.patient, g.service))
        seen.add(g)
    for g in instance.demanded_genes():
        if g not in seen:
            out.append(missing_gene(g.patient, g.service))
    pairs: set[tuple[int, int]] = set()
    for i, (g, k) in enumerate(zip(chromosome.genes, chromosome.assignment)):
        if not 1 <= k <= instance.c or g.service not in instance.caregiver(k).skills:
            out.append(UnskilledAssignment("unskilled_assignment", i, k))
        if (g.patient, k) in pairs:
            out.append(DuplicatePatientCaregiverPair("duplicate_patient_caregiver", i, g.patient, k))
        pairs.add((g.patient, k))
    return out


def match_services(services: Sequence[int], qualified: Mapping[int, Sequence[int]],
                   fixed: Mapping[int, int] | None = None) -> dict[int, int] | None:
    """Assign distinct caregivers to ``services`` (augmenting paths).

    ``fixed`` pre-assigns some services; they are kept when possible. Returns
    service -> caregiver, or None when no distinct assignment exists.
    """
    owner: dict[int, int] = {}
    match: dict[int, int] = {}

    def augment(s: int, seen: set[int]) -> bool:
        for k in qualified.get(s, ()):
            if k in seen:
                continue
            seen.add(k)
            if k not in owner or augment(owner[k], seen):
                owner[k] = s
                match[s] = k
                return True
        return False

    for s, k in (fixed or {}).items():
        if k in qualified.get(s, ()) and k not in owner:
            owner[k] = s
            match[s] = k
    for s in services:
        if s not in match and not augment(s, set()):
            return None
    return match
