"""Ordered point clouds, filter functions and bounded perturbations.

Row order is part of the data: DBSCAN assigns shared border points to the
first cluster that reaches them, so nothing in this module reorders points.
"""
from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

METRICS = ("euclidean", "manhattan", "chebyshev")


class EmptyInput(ValueError):
    """Raised when a point cloud would contain no points."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


def metric_distance(a: np.ndarray, b: np.ndarray, metric: str) -> float:
    diff = np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))
    if metric == "euclidean":
        return float(math.sqrt(float(np.dot(diff, diff))))
    if metric == "manhattan":
        return float(diff.sum())
    if metric == "chebyshev":
        return float(diff.max()) if diff.size else 0.0
    raise ValueError(f"unknown metric {metric!r}")


def distance_matrix(points: np.ndarray, metric: str) -> np.ndarray:
    """Dense pairwise distances; bins are small so O(n^2) is fine."""
    diff = np.abs(points[:, None, :] - points[None, :, :])
    if metric == "euclidean":
        return np.sqrt((diff * diff).sum(axis=-1))
    if metric == "manhattan":
        return diff.sum(axis=-1)
    if metric == "chebyshev":
        return diff.max(axis=-1)
    raise ValueError(f"unknown metric {metric!r}")


@dataclass(frozen=True, eq=False)
class OrderedPointCloud:
    points: np.ndarray
    metric: str = "euclidean"

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}; expected one of {METRICS}")
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2:
            raise ValueError("points must be a 2-D array (n, d)")
        if pts.shape[0] == 0:
            raise EmptyInput("point cloud is empty")
        if pts.shape[1] == 0:
            raise ValueError("points must have dimension >= 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("all coordinates must be finite")
        object.__setattr__(self, "points", _freeze(pts))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def digest(self) -> str:
        """Content hash of coordinates, order and metric."""
        h = hashlib.sha256()
        h.update(self.metric.encode())
        h.update(np.ascontiguousarray(self.points).tobytes())
        h.update(str(self.points.shape).encode())
        return h.hexdigest()

    def distance(self, i: int, j: int) -> float:
        return pairwise_distance(self, i, j)

    def distances(self, indices: Sequence[int] | None = None) -> np.ndarray:
        pts = self.points if indices is None else self.points[np.asarray(indices, dtype=int)]
        return distance_matrix(pts, self.metric)

    def subset_order(self, order: Sequence[int]) -> "OrderedPointCloud":
        """A new cloud listing the points in ``order`` (used by ordering tests)."""
        return OrderedPointCloud(self.points[np.asarray(order, dtype=int)], self.metric)


def load_cloud(rows: Iterable[Sequence], metric: str = "euclidean") -> OrderedPointCloud:
    """Build a cloud from numeric records, keeping row order.

    A leading row with any non-numeric cell is treated as a header and skipped;
    non-numeric cells anywhere else are an error.
    """
    parsed = []
    arity = None
    for lineno, row in enumerate(rows):
        cells = [c.strip() if isinstance(c, str) else c for c in row]
        if not cells or all(c == "" for c in cells):
            continue
        try:
            values = [float(c) for c in cells]
        except (TypeError, ValueError):
            if not parsed and lineno == 0:
                continue
            raise ValueError(f"non-numeric cell in row {lineno + 1}: {row!r}") from None
        if arity is None:
            arity = len(values)
        elif len(values) != arity:
            raise ValueError(f"ragged rows: row {lineno + 1} has {len(values)} cells, expected {arity}")
        parsed.append(values)
    if not parsed:
        raise EmptyInput("no numeric rows")
    return OrderedPointCloud(np.array(parsed, dtype=np.float64), metric)


def read_csv(source: str | Path | io.TextIOBase, metric: str = "euclidean") -> OrderedPointCloud:
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return load_cloud(csv.reader(fh), metric)
    return load_cloud(csv.reader(source), metric)


@dataclass(frozen=True, eq=False)
class FilterAssignment:
    values: np.ndarray
    filter_kind: str = "custom"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if v.size == 0:
            raise EmptyInput("filter has no values")
        if not np.all(np.isfinite(v)):
            raise ValueError("filter values must be finite")
        object.__setattr__(self, "values", _freeze(v))

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def range(self) -> tuple[float, float]:
        return float(self.values.min()), float(self.values.max())


def eval_filter(cloud: OrderedPointCloud, filter_kind="coord:0", values=None) -> FilterAssignment:
    """Evaluate a filter on every point.

    ``filter_kind`` is ``"coord:<axis>"`` (or an int axis) for a coordinate
    projection, or ``"custom"`` together with precomputed ``values``.
    """
    if isinstance(filter_kind, int):
        filter_kind = f"coord:{filter_kind}"
    if filter_kind == "custom":
        if values is None:
            raise ValueError("custom filter needs values")
        v = np.asarray(values, dtype=np.float64).reshape(-1)
        if v.shape[0] != len(cloud):
            raise ValueError(f"custom filter has {v.shape[0]} values for {len(cloud)} points")
        return FilterAssignment(v, "custom")
    if not filter_kind.startswith("coord:"):
        raise ValueError(f"unknown filter kind {filter_kind!r}")
    axis = int(filter_kind.split(":", 1)[1])
    if not 0 <= axis < cloud.dim:
        raise ValueError(f"axis {axis} out of range for dimension {cloud.dim}")
    return FilterAssignment(cloud.points[:, axis], filter_kind)


def pairwise_distance(cloud: OrderedPointCloud, i: int, j: int) -> float:
    n = len(cloud)
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"index out of range for {n} points: ({i}, {j})")
    return metric_distance(cloud.points[i], cloud.points[j], cloud.metric)


@dataclass(frozen=True)
class Perturbation:
    delta: float
    seed: int | None
    # index i of the source maps to index i of the perturbed cloud
    correspondence: tuple[int, ...] = field(repr=False)

    def __call__(self, i: int) -> int:
        return self.correspondence[i]

    def inverse(self, j: int) -> int:
        return self.correspondence.index(j)


def _sample_offsets(rng: np.random.Generator, n: int, d: int, delta: float, metric: str) -> np.ndarray:
    if metric == "euclidean":
        direction = rng.standard_normal((n, d))
        norms = np.linalg.norm(direction, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        radius = delta * rng.random((n, 1)) ** (1.0 / d)
        return direction / norms * radius
    if metric == "chebyshev":
        return rng.uniform(-delta, delta, size=(n, d))
    # uniform in the L1 ball: Dirichlet weights with a slack coordinate, random signs
    w = rng.dirichlet(np.ones(d + 1), size=n)[:, :d]
    signs = rng.choice([-1.0, 1.0], size=(n, d))
    return delta * w * signs


def perturb(cloud: OrderedPointCloud, delta: float, seed: int = 0) -> tuple[OrderedPointCloud, Perturbation]:
    """Move every point by at most ``delta`` (uniformly in the closed metric ball)."""
    if delta < 0 or not math.isfinite(delta):
        raise ValueError("delta must be a finite nonnegative number")
    n, d = cloud.points.shape
    ident = tuple(range(n))
    if delta == 0:
        return OrderedPointCloud(cloud.points, cloud.metric), Perturbation(0.0, seed, ident)
    rng = np.random.default_rng(seed)
    moved = cloud.points + _sample_offsets(rng, n, d, delta, cloud.metric)
    # rounding of x + offset can overshoot the ball by an ulp; pull such points back
    for i in range(n):
        while metric_distance(cloud.points[i], moved[i], cloud.metric) > delta:
            moved[i] = cloud.points[i] + (moved[i] - cloud.points[i]) * (1.0 - 1e-12)
    return OrderedPointCloud(moved, cloud.metric), Perturbation(float(delta), seed, ident)


def perturbation_from_clouds(source: OrderedPointCloud, target: OrderedPointCloud, delta: float) -> Perturbation:
    """Wrap an explicit (hand-built) perturbation after checking the bound."""
    if len(source) != len(target) or source.dim != target.dim:
        raise ValueError("clouds must have the same shape")
    worst = max_displacement(source, target)
    if worst > delta:
        raise ValueError(f"point moved by {worst} > delta={delta}")
    return Perturbation(float(delta), None, tuple(range(len(source))))


def max_displacement(source: OrderedPointCloud, target: OrderedPointCloud) -> float:
    return max(metric_distance(a, b, source.metric) for a, b in zip(source.points, target.points))
