"""Random benchmark instances following the published generation recipes.

Each recipe draws from five named random streams (locations, durations,
windows, skills, demands), so changing how one field is drawn leaves the
others untouched.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass

import numpy as np

from .model import Instance, build_instance, instance_from_dict, match_services
from .rng import stream

SERVICES = (1, 2, 3, 4, 5, 6)
GROUP_ONE = (1, 2, 3)
GROUP_TWO = (4, 5, 6)
MAX_WINDOW_RETRIES = 10_000


@dataclass(frozen=True)
class Recipe:
    n: int
    c: int
    area: float = 100.0
    duration_range: tuple[int, int] = (10, 20)
    windows_per_patient: int = 1
    multi_service_fraction: float = 0.0
    simultaneous_fraction: float = 0.5
    horizon: float = 600.0
    tw_length: float = 120.0
    skill_grouping: str = "grouped"
    max_visits: int | None = None
    # exact number of patients requesting 1, 2 and 3 services; overrides the fraction
    service_counts: tuple[int, int, int] | None = None
    c_range: tuple[int, int] | None = None
    name: str = ""

    def __post_init__(self) -> None:
        for frac in (self.multi_service_fraction, self.simultaneous_fraction):
            if not 0.0 <= frac <= 1.0:
                raise ValueError("fractions must lie in [0, 1]")
        if self.tw_length > self.horizon:
            raise ValueError("tw_length exceeds the horizon")
        if self.skill_grouping not in ("grouped", "random"):
            raise ValueError("skill_grouping must be 'grouped' or 'random'")
        if not 1 <= self.windows_per_patient <= 3:
            raise ValueError("windows_per_patient must be 1, 2 or 3")
        if self.service_counts is not None and sum(self.service_counts) != self.n:
            raise ValueError("service_counts must sum to n")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Recipe":
        data = dict(data)
        for key in ("duration_range", "service_counts", "c_range"):
            if data.get(key) is not None:
                data[key] = tuple(data[key])
        return cls(**data)

    @property
    def total_services(self) -> int:
        if self.service_counts is not None:
            n1, n2, n3 = self.service_counts
            return n1 + 2 * n2 + 3 * n3
        return self.n + round_half_up(self.multi_service_fraction * self.n)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


# -- presets ----------------------------------------------------------------------

# (n, multi fraction, caregiver range, windows) for the mixed single/multi-service sets
_MIXED = {
    "A": (10, 0.0, (3, 4), 1),
    "B": (25, 0.0, (5, 7), 1),
    "C": (50, 0.0, (10, 12), 1),
    "D": (10, 0.3, (3, 4), 1),
    "E": (25, 0.3, (5, 7), 1),
    "F": (50, 0.3, (10, 13), 1),
    "G": (10, 0.0, (3, 3), 2),
    "H": (25, 0.0, (5, 7), 2),
    "I": (50, 0.0, (10, 10), 2),
    "J": (10, 0.3, (3, 4), 2),
    "K": (25, 0.3, (5, 8), 2),
    "L": (50, 0.3, (10, 14), 2),
}

# Small set: three groups of three instances; windows cycle 1, 2, 3 in each group
_SMALL = {1: (3, 0.2), 2: (3, 0.4), 3: (5, 0.6)}

_LARGE = {
    "N100s": (70, 20, (46, 18, 6)),
    "N100p": (100, 20, (100, 0, 0)),
    "N200s": (140, 40, (92, 36, 12)),
    "N200p": (200, 40, (200, 0, 0)),
}

_STOCHASTIC = {
    "A": (10, 3, 0.0),
    "B": (25, 5, 0.0),
    "C": (50, 10, 0.0),
    "D": (10, 3, 0.3),
    "E": (25, 5, 0.3),
    "F": (50, 10, 0.3),
}

_SKIP = {"A": (10, 3, 4), "B": (25, 5, 8), "C": (50, 10, 10)}

_SOFT = {1: (7, 2), 2: (10, 3), 3: (14, 4), 4: (20, 5), 5: (25, 6), 6: (30, 6), 7: (40, 8), 8: (50, 10)}


def preset(name: str) -> Recipe:
    """Recipe for a subset label such as ``A``, ``D4``, ``MSS-D``, ``Large-N100s``.

    Mixed-set labels take an optional instance index 1..9: 1-3 use
    durations [10,20] on a 100x100 area, 4-6 durations [20,40], 7-9 a
    200x200 area; the upper caregiver count is used from index 4 on.
    Skip-model labels (``STW-A``, ``MTW-B``) and soft multi-window labels
    (``Int3_1``, ``Int3_2``) follow their own tables.
    """
    label = name.strip()
    m = re.fullmatch(r"Int(\d)_([12])", label)
    if m and int(m.group(1)) in _SOFT:
        n, c = _SOFT[int(m.group(1))]
        return Recipe(n=n, c=c, windows_per_patient=int(m.group(2)), name=label)
    m = re.fullmatch(r"(SS|MSS)-([A-F])", label) or re.fullmatch(r"(SS|MSS)", label)
    if m:
        sub = m.group(2) if m.lastindex == 2 else ("A" if m.group(1) == "SS" else "D")
        if (m.group(1) == "SS") != (sub in "ABC"):
            raise ValueError(f"unknown preset {name!r}")
        n, c, frac = _STOCHASTIC[sub]
        return Recipe(n=n, c=c, multi_service_fraction=frac, name=f"{m.group(1)}-{sub}")
    m = re.fullmatch(r"(STW|MTW)(?:-([ABC]))?", label)
    if m:
        sub = m.group(2) or "A"
        n, c, maxv = _SKIP[sub]
        return Recipe(n=n, c=c, windows_per_patient=1 if m.group(1) == "STW" else 2,
                      max_visits=maxv, name=f"{m.group(1)}-{sub}")
    m = re.fullmatch(r"(?:Small-)?M([1-9])?|Small", label)
    if m:
        idx = int(m.group(1)) if m and m.lastindex else 1
        c, frac = _SMALL[(idx - 1) // 3 + 1]
        return Recipe(n=10, c=c, windows_per_patient=(idx - 1) % 3 + 1, multi_service_fraction=frac,
                      skill_grouping="random", c_range=(3, 5), name=f"Small-M{idx}")
    m = re.fullmatch(r"(?:Large-)?(N\d{3}[sp])|Large|N", label)
    if m:
        key = m.group(1) or "N100s"
        if key not in _LARGE:
            raise ValueError(f"unknown preset {name!r}")
        n, c, counts = _LARGE[key]
        return Recipe(n=n, c=c, windows_per_patient=3, service_counts=counts,
                      multi_service_fraction=round((counts[1] + counts[2]) / n, 4),
                      skill_grouping="random", name=f"Large-{key}")
    m = re.fullmatch(r"(?:[A-Z]+-)?([A-L])([1-9])?", label)
    if m:
        sub, idx = m.group(1), int(m.group(2) or 1)
        n, frac, (c_lo, c_hi), windows = _MIXED[sub]
        return Recipe(
            n=n,
            c=c_lo if idx <= 3 else c_hi,
            area=200.0 if idx >= 7 else 100.0,
            duration_range=(20, 40) if 4 <= idx <= 6 else (10, 20),
            windows_per_patient=windows,
            multi_service_fraction=frac,
            c_range=(c_lo, c_hi),
            name=f"{sub}{idx}",
        )
    raise ValueError(f"unknown preset {name!r}")


# -- generation ---------------------------------------------------------------------


def _windows(rng: np.random.Generator, count: int, horizon: float, length: float) -> list[list[float]]:
    if count == 1:
        start = int(rng.integers(0, int(horizon - length) + 1))
        return [[start, start + length]]
    if count == 2:
        half = horizon / 2
        first = int(rng.integers(0, int(half - length) + 1))
        for _ in range(MAX_WINDOW_RETRIES):
            second = int(rng.integers(int(half), int(horizon - length) + 1))
            if second - (first + length) >= 120:
                return [[first, first + length], [second, second + length]]
        raise RuntimeError("could not place a second window with 120 min separation")
    third = horizon / 3
    out = []
    for j in range(3):
        lo = int(j * third)
        start = int(rng.integers(lo, int((j + 1) * third - length) + 1))
        out.append([start, start + length])
    return out


def _skills(rng: np.random.Generator, c: int, grouping: str) -> list[list[int]]:
    out = []
    first_group = (c + 1) // 2
    for k in range(c):
        pool = SERVICES if grouping == "random" else (GROUP_ONE if k < first_group else GROUP_TWO)
        size = int(rng.integers(1, 4))
        out.append(sorted(int(s) for s in rng.choice(pool, size=size, replace=False)))
    return out


def _demand_sizes(recipe: Recipe, rng: np.random.Generator) -> list[int]:
    if recipe.service_counts is not None:
        n1, n2, n3 = recipe.service_counts
        sizes = [1] * n1 + [2] * n2 + [3] * n3
    else:
        multi = min(recipe.n, round_half_up(recipe.multi_service_fraction * recipe.n))
        sizes = [2] * multi + [1] * (recipe.n - multi)
    return [int(x) for x in rng.permutation(sizes)]


def generate(recipe: Recipe, seed: int) -> Instance:
    """Deterministic instance for ``(recipe, seed)``."""
    loc_rng = stream(seed, "locations")
    dur_rng = stream(seed, "durations")
    win_rng = stream(seed, "windows")
    skill_rng = stream(seed, "skills")
    dem_rng = stream(seed, "demands")

    side = int(recipe.area)
    coords = [tuple(float(v) for v in loc_rng.integers(0, side + 1, size=2)) for _ in range(recipe.n + 1)]

    skills = _skills(skill_rng, recipe.c, recipe.skill_grouping)
    offered = sorted({s for row in skills for s in row})
    qualified = {s: [k + 1 for k, row in enumerate(skills) if s in row] for s in offered}

    sizes = _demand_sizes(recipe, dem_rng)
    multi = [i for i, size in enumerate(sizes) if size >= 2]
    n_sync = round_half_up(recipe.simultaneous_fraction * len(multi))
    sync = set(int(i) for i in dem_rng.choice(multi, size=n_sync, replace=False)) if n_sync else set()
    demands = []
    for size in sizes:
        size = min(size, len(offered), recipe.c)
        for _ in range(1000):
            pick = sorted(int(s) for s in dem_rng.choice(offered, size=size, replace=False))
            if match_services(pick, qualified) is not None:
                break
        else:
            raise RuntimeError("caregiver skills cannot cover a multi-service demand")
        demands.append(pick)

    lo, hi = recipe.duration_range
    durations = {}
    for i, pick in enumerate(demands, start=1):
        for s in pick:
            durations[(i, s)] = float(dur_rng.integers(lo, hi + 1))

    patients = [
        {
            "id": i,
            "demands": pick,
            "simultaneous": (i - 1) in sync and len(pick) >= 2,
            "windows": _windows(win_rng, recipe.windows_per_patient, recipe.horizon, recipe.tw_length),
        }
        for i, pick in enumerate(demands, start=1)
    ]
    caregivers = [
        {"id": k + 1, "duty": [0.0, recipe.horizon], "skills": row, "max_visits": recipe.max_visits}
        for k, row in enumerate(skills)
    ]
    return build_instance(coords, patients, caregivers, durations, horizon=recipe.horizon)


def with_windows(instance: Instance, keep: int) -> Instance:
    """Copy of ``instance`` keeping only each patient's first ``keep`` windows."""
    data = instance.to_dict()
    for p in data["patients"]:
        p["windows"] = p["windows"][:keep]

    return instance_from_dict(data)
