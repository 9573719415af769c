"""Objective-space mathematics (maximization convention throughout).

Dominance, non-dominated pruning, exact 2-D hypervolume by rectangle sweep,
crowding distances, and the linear / Chebyshev scalarizers used for
advantages and returns. Everything here is a pure function.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError


@dataclass(frozen=True)
class ParetoPoint:
    f: tuple[float, ...]
    tag: object = None

    @staticmethod
    def of(values: Sequence[float], tag: object = None) -> "ParetoPoint":
        vals = tuple(float(v) for v in values)
        if not all(np.isfinite(vals)):
            raise ValueError(f"non-finite objective values {vals}")
        return ParetoPoint(vals, tag)


@dataclass
class FrontEstimate:
    points: list[ParetoPoint] = field(default_factory=list)

    def arrays(self) -> np.ndarray:
        return np.array([p.f for p in self.points], dtype=np.float64)

    def __len__(self) -> int:
        return len(self.points)


def dominates(a: ParetoPoint | Sequence[float], b: ParetoPoint | Sequence[float]) -> bool:
    """Weak dominance with at least one strict improvement."""
    fa = a.f if isinstance(a, ParetoPoint) else tuple(a)
    fb = b.f if isinstance(b, ParetoPoint) else tuple(b)
    if len(fa) != len(fb):
        raise ValueError(f"objective length mismatch: {len(fa)} vs {len(fb)}")
    return all(x >= y for x, y in zip(fa, fb)) and any(x > y for x, y in zip(fa, fb))


def pareto_prune(points: Iterable[ParetoPoint]) -> FrontEstimate:
    """Non-dominated subset, first objective ascending, duplicates collapsed."""
    pts = list(points)
    keep: list[ParetoPoint] = []
    seen: set[tuple[float, ...]] = set()
    for i, p in enumerate(pts):
        if p.f in seen:
            continue
        dominated = any(dominates(q, p) for j, q in enumerate(pts) if j != i)
        if not dominated:
            keep.append(p)
            seen.add(p.f)
    keep.sort(key=lambda p: p.f)
    return FrontEstimate(keep)


def hypervolume_2d(front: FrontEstimate | Sequence[ParetoPoint], ref: ParetoPoint | Sequence[float]) -> float:
    """Exact dominated area between a 2-D front and a reference point.

    Only points that strictly dominate the reference contribute; the rest add
    zero area. Computed by the sorted rectangle sweep.
    """
    pts = front.points if isinstance(front, FrontEstimate) else list(front)
    rf = ref.f if isinstance(ref, ParetoPoint) else tuple(float(v) for v in ref)
    if len(rf) != 2 or any(len(p.f) != 2 for p in pts):
        raise DimensionError("hypervolume is only defined for 2 objectives here")
    live = sorted({p.f for p in pts if p.f[0] > rf[0] and p.f[1] > rf[1]})
    # drop points dominated within the input so the sweep sees a staircase
    stair: list[tuple[float, float]] = []
    for f in live:  # ascending f0; keep only strictly descending f1
        while stair and stair[-1][1] <= f[1]:
            stair.pop()
        stair.append(f)
    hv = 0.0
    for i, (f0, f1) in enumerate(stair):
        lower = stair[i + 1][1] if i + 1 < len(stair) else rf[1]
        hv += (f0 - rf[0]) * (f1 - lower)
    return hv


def crowding_distances(points: Sequence[ParetoPoint]) -> list[float]:
    """Per-point spread measure (NSGA-II style), deterministic under ties.

    Distances are computed over unique objective vectors and mapped back, so
    exact duplicates share one value. Objectives with zero range contribute
    nothing; the first and last point in each spread objective's sorted order
    get +inf (ties resolved lexicographically, so output is independent of
    input order).
    """
    n = len(points)
    if n == 0:
        return []
    uniq = sorted({p.f for p in points})
    if len(uniq) == 1:
        return [float("inf")] * n
    arr = np.array(uniq, dtype=np.float64)
    dist = np.zeros(len(uniq), dtype=np.float64)
    for k in range(arr.shape[1]):
        lo, hi = arr[:, k].min(), arr[:, k].max()
        rng = hi - lo
        if rng == 0.0:
            continue
        order = np.argsort(arr[:, k], kind="stable")  # ties already lex-resolved by uniq sort
        dist[order[0]] = float("inf")
        dist[order[-1]] = float("inf")
        inner = order[1:-1]
        gaps = (arr[order[2:], k] - arr[order[:-2], k]) / rng
        dist[inner] += gaps
    lookup = {f: d for f, d in zip(uniq, dist)}
    return [float(lookup[p.f]) for p in points]


@dataclass(frozen=True)
class WeightVector:
    w: tuple[float, ...]

    @staticmethod
    def of(values: Sequence[float]) -> "WeightVector":
        vals = np.asarray(values, dtype=np.float64)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("weights must be a non-empty 1-D vector")
        if np.any(vals < 0):
            raise ValueError(f"weights must be non-negative, got {vals.tolist()}")
        total = float(vals.sum())
        if total <= 0:
            raise ValueError("weights must not sum to zero")
        return WeightVector(tuple(float(v) for v in vals / total))

    def array(self) -> np.ndarray:
        return np.array(self.w, dtype=np.float64)


@dataclass(frozen=True)
class UtopianPoint:
    z_star: tuple[float, ...]

    @staticmethod
    def of(values: Sequence[float]) -> "UtopianPoint":
        return UtopianPoint(tuple(float(v) for v in values))

    @staticmethod
    def from_batch(batch: np.ndarray, epsilon: float = 0.1) -> "UtopianPoint":
        """Componentwise max over a [N, n_obj] batch, nudged up by epsilon."""
        arr = np.asarray(batch, dtype=np.float64)
        return UtopianPoint(tuple(float(v) for v in arr.max(axis=0) + epsilon))

    def array(self) -> np.ndarray:
        return np.array(self.z_star, dtype=np.float64)


def scalarize_linear(v: Sequence[float], w: WeightVector) -> float:
    vec = np.asarray(v, dtype=np.float64)
    warr = w.array()
    if vec.shape != warr.shape:
        raise ValueError(f"length mismatch: value {vec.shape} vs weights {warr.shape}")
    return float(warr @ vec)


def scalarize_chebyshev(v: Sequence[float], w: WeightVector, z: UtopianPoint) -> float:
    """Negated weighted max distance to the utopian point (0 at the utopian)."""
    vec = np.asarray(v, dtype=np.float64)
    warr = w.array()
    zarr = z.array()
    if vec.shape != warr.shape or vec.shape != zarr.shape:
        raise ValueError(
            f"length mismatch: value {vec.shape}, weights {warr.shape}, utopian {zarr.shape}"
        )
    return float(-(warr * np.abs(zarr - vec)).max())


# --- CSV import/export -------------------------------------------------------

FRONT_HEADER = ["obj0", "obj1", "tag"]


def write_front_csv(path, front: FrontEstimate | Sequence[ParetoPoint]) -> None:
    from .serialize import fmt6

    pts = front.points if isinstance(front, FrontEstimate) else list(front)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(FRONT_HEADER)
        for p in pts:
            if len(p.f) != 2:
                raise DimensionError("front CSV format is 2-objective")
            writer.writerow([fmt6(p.f[0]), fmt6(p.f[1]), "" if p.tag is None else str(p.tag)])


def read_front_csv(path) -> FrontEstimate:
    points: list[ParetoPoint] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header[:3]] != FRONT_HEADER:
            raise ValueError(f"unexpected front CSV header {header!r} in {path}")
        for row in reader:
            if not row:
                continue
            tag = row[2] if len(row) > 2 and row[2] != "" else None
            points.append(ParetoPoint.of((float(row[0]), float(row[1])), tag))
    return FrontEstimate(points)
