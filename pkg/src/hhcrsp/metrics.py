"""Front indicators: shared normalization, exact hypervolume, coverage."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

Points = Sequence[Sequence[float]]


@dataclass(frozen=True)
class NormalizationBounds:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def apply(self, point: Sequence[float]) -> tuple[float, ...]:
        return tuple(
            0.0 if hi == lo else (x - lo) / (hi - lo) for x, lo, hi in zip(point, self.lower, self.upper)
        )


def normalize(fronts: Sequence[Points]) -> tuple[list[list[tuple[float, ...]]], NormalizationBounds]:
    """Min-max scale every front over the union; constant objectives map to 0."""
    union = [tuple(p) for f in fronts for p in f]
    if not union:
        raise ValueError("normalization needs at least one point")
    m = len(union[0])
    bounds = NormalizationBounds(
        tuple(min(p[j] for p in union) for j in range(m)),
        tuple(max(p[j] for p in union) for j in range(m)),
    )
    return [[bounds.apply(p) for p in f] for f in fronts], bounds


def _hv2d(points: list[tuple[float, float]], ref: tuple[float, float]) -> float:
    area = 0.0
    best_y = ref[1]
    for x, y in sorted(points):
        if y < best_y:
            area += (ref[0] - x) * (best_y - y)
            best_y = y
    return area


def hypervolume(front: Points, reference: Sequence[float] = (1.0, 1.0, 1.0)) -> float:
    """Exact dominated volume for 2 or 3 objectives (minimization).

    The 3-D case sweeps the points by the last objective and adds slabs
    whose cross-section is the 2-D hypervolume of the points seen so far.
    """
    ref = tuple(float(r) for r in reference)
    pts = [tuple(float(x) for x in p) for p in front if all(x < r for x, r in zip(p, ref))]
    if not pts:
        return 0.0
    if len(ref) == 2:
        return _hv2d(pts, ref)
    if len(ref) != 3:
        raise ValueError("hypervolume supports 2 or 3 objectives")
    pts.sort(key=lambda p: p[2])
    volume = 0.0
    active: list[tuple[float, float]] = []
    for idx, p in enumerate(pts):
        active.append((p[0], p[1]))
        top = pts[idx + 1][2] if idx + 1 < len(pts) else ref[2]
        if top > p[2]:
            volume += _hv2d(active, (ref[0], ref[1])) * (top - p[2])
    return volume


def hypervolume_monte_carlo(front: Points, reference: Sequence[float] = (1.0, 1.0, 1.0),
                            samples: int = 1_000_000, seed: int = 0, chunk: int = 200_000) -> float:
    """Box-sampling estimate over [0, reference]; points are assumed nonnegative."""
    rng = np.random.default_rng(seed)
    ref = np.asarray(reference, dtype=float)
    pts = np.asarray(front, dtype=float).reshape(-1, len(ref))
    hits = 0
    done = 0
    while done < samples:
        size = min(chunk, samples - done)
        x = rng.random((size, len(ref))) * ref
        covered = np.zeros(size, dtype=bool)
        for p in pts:
            covered |= np.all(x >= p, axis=1)
        hits += int(covered.sum())
        done += size
    return hits / samples * float(np.prod(ref))


def _dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def coverage(a: Points, b: Points) -> float:
    """Share of ``b`` strictly dominated by some member of ``a``."""
    if len(b) == 0:
        raise ValueError("coverage needs a nonempty second front")
    covered = sum(1 for q in b if any(_dominates(p, q) for p in a))
    return covered / len(b)
