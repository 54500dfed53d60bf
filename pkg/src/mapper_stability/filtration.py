"""Maps between cluster covers, towers and bi-filtration grids.

Maps are built from canonical core representatives and then checked
point by point; a failed check is returned as a ``FreeBorderObstruction``
rather than raised, since those failures are expected outcomes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .clustering import DbscanParams, LinkageParams
from .cover import IntervalCover, build_interval_cover, check_cover_refinement, pullback
from .mapper import ClusterCover, SimplicialComplex, build_cluster_cover, nerve
from .pointcloud import FilterAssignment, OrderedPointCloud

DIRECTIONS = ("bin", "eps", "minpts", "grid", "perturb-phi", "perturb-psi")


class InconsistentMapError(RuntimeError):
    """A simplex was sent to a non-simplex; the cover map broke containment."""


@dataclass(frozen=True, eq=False)
class CoverMap:
    source: ClusterCover
    target: ClusterCover
    assignment: tuple[int, ...]
    direction: str

    def __call__(self, e: int) -> int:
        return self.assignment[e]

    def pairs(self) -> list[list[int]]:
        return [[s, t] for s, t in enumerate(self.assignment)]


@dataclass(frozen=True)
class ContainmentFailure:
    source_element: int
    cluster: tuple[int, ...]
    rep: int
    target_element: int | None
    strays: tuple[int, ...]


@dataclass(frozen=True)
class FreeBorderObstruction:
    witnesses: tuple[int, ...]
    consequence: str
    failures: tuple[ContainmentFailure, ...] = ()
    direction: str = ""
    cell: tuple | None = None

    def at(self, cell) -> "FreeBorderObstruction":
        return FreeBorderObstruction(self.witnesses, self.consequence, self.failures, self.direction, cell)

    def to_dict(self) -> dict:
        return {
            "cell": None if self.cell is None else list(self.cell),
            "direction": self.direction,
            "consequence": self.consequence,
            "witnesses": list(self.witnesses),
            "failures": [{"source_element": f.source_element, "cluster": list(f.cluster), "rep": f.rep,
                          "target_element": f.target_element, "strays": list(f.strays)}
                         for f in self.failures],
        }


def _same_shape_params(a, b, *, allow_eps=False, allow_minpts=False) -> bool:
    if isinstance(a, DbscanParams) and isinstance(b, DbscanParams):
        if a.border_points != b.border_points:
            return False
        if not allow_eps and a.epsilon != b.epsilon:
            return False
        if not allow_minpts and a.min_pts != b.min_pts:
            return False
        return True
    if isinstance(a, LinkageParams) and isinstance(b, LinkageParams):
        if allow_minpts:
            return False
        if allow_eps:
            return a.method == b.method == "single" and a.cutting_height is not None and b.cutting_height is not None
        return a == b
    return False


def _scale(p) -> float:
    return p.epsilon if isinstance(p, DbscanParams) else p.cutting_height


def _check_order(source: ClusterCover, target: ClusterCover, direction: str) -> None:
    if direction not in DIRECTIONS:
        raise ValueError(f"unknown direction {direction!r}")
    perturbed = direction.startswith("perturb")
    if perturbed:
        if len(source.cloud) != len(target.cloud):
            raise ValueError("perturbed clouds must have the same number of points")
    elif source.cloud.digest != target.cloud.digest:
        raise ValueError("cover maps along a filtration need the same dataset")
    sp, tp = source.params, target.params
    same_bins = source.cover.intervals == target.cover.intervals
    if direction in ("bin", "grid") or perturbed:
        if not check_cover_refinement(source.cover, target.cover).verdict:
            raise ValueError("target cover does not contain the source cover")
    if direction == "bin" and not _same_shape_params(sp, tp):
        raise ValueError("bin direction needs identical clustering parameters")
    if direction in ("eps", "minpts") and not same_bins:
        raise ValueError(f"{direction} direction needs identical bins")
    if direction in ("eps", "grid") or perturbed:
        if not _same_shape_params(sp, tp, allow_eps=True):
            raise ValueError("clustering parameters differ beyond epsilon")
        if _scale(tp) < _scale(sp):
            raise ValueError("epsilon must not decrease")
    if direction == "minpts":
        if not _same_shape_params(sp, tp, allow_minpts=True):
            raise ValueError("minpts direction needs identical epsilon")
        if tp.min_pts > sp.min_pts:
            raise ValueError("MinPts must not increase")


def cover_map(source: ClusterCover, target: ClusterCover, direction: str):
    """Send each source cluster to the target cluster (same bin) holding its representative.

    For the perturbation directions the correspondence is the index identity,
    so the same rule sends C to the cluster containing the moved representative.
    Returns a ``CoverMap``, or a ``FreeBorderObstruction`` if some cluster is
    not contained in its image.
    """
    _check_order(source, target, direction)
    assignment = []
    failures = []
    for e, el in enumerate(source.elements):
        t = target.element_containing(el.bin_index, el.rep)
        if t is None:
            failures.append(ContainmentFailure(e, el.members, el.rep, None, el.members))
            assignment.append(-1)
            continue
        strays = tuple(p for p in el.members if target.element_containing(el.bin_index, p) != t)
        if strays:
            failures.append(ContainmentFailure(e, el.members, el.rep, t, strays))
        assignment.append(t)
    if failures:
        bins = {source.elements[f.source_element].bin_index for f in failures}
        fb = sorted({p for k in bins for p in target.free_border[k]})
        strays = sorted({p for f in failures for p in f.strays})
        if fb:
            consequence = f"{direction} map: cluster not contained in image; free-border points in target bin"
        else:
            consequence = f"{direction} map: cluster not contained in any target cluster"
        return FreeBorderObstruction(tuple(fb or strays), consequence, tuple(failures), direction)
    return CoverMap(source, target, tuple(assignment), direction)


def identity_map(cover: ClusterCover) -> CoverMap:
    return CoverMap(cover, cover, tuple(range(len(cover))), "identity")


def compose(cm1: CoverMap, cm2: CoverMap) -> CoverMap:
    """``cm2 o cm1``; containment is re-verified on the composite."""
    if cm1.target is not cm2.source:
        raise ValueError("cannot compose: first map's target is not second map's source")
    assignment = tuple(cm2.assignment[t] for t in cm1.assignment)
    src, dst = cm1.source, cm2.target
    for e, el in enumerate(src.elements):
        t = assignment[e]
        if not set(el.members) <= set(dst.elements[t].members):
            raise InconsistentMapError(f"composite breaks containment for element {e}")
    if cm1.direction == "identity":
        direction = cm2.direction
    elif cm2.direction == "identity":
        direction = cm1.direction
    else:
        direction = f"{cm1.direction}+{cm2.direction}"
    return CoverMap(src, dst, assignment, direction)


@dataclass(frozen=True, eq=False)
class SimplicialMap:
    vertex_map: tuple[int, ...]
    source: SimplicialComplex
    target: SimplicialComplex

    def image(self, simplex) -> tuple[int, ...]:
        return tuple(sorted({self.vertex_map[v] for v in simplex}))


def induced_simplicial_map(cm: CoverMap, src: SimplicialComplex, dst: SimplicialComplex) -> SimplicialMap:
    if src.n_vertices != len(cm.source) or dst.n_vertices != len(cm.target):
        raise ValueError("complexes are not the nerves of the map's covers")
    sm = SimplicialMap(cm.assignment, src, dst)
    for level in src.simplices:
        for s in level:
            img = sm.image(s)
            if not dst.has(img):
                raise InconsistentMapError(f"simplex {s} maps to {img}, which is not a simplex")
    return sm


def compose_simplicial(a: SimplicialMap, b: SimplicialMap) -> SimplicialMap:
    if a.target is not b.source:
        raise ValueError("cannot compose simplicial maps with mismatched endpoints")
    return SimplicialMap(tuple(b.vertex_map[v] for v in a.vertex_map), a.source, b.target)


@dataclass(frozen=True, eq=False)
class Tower:
    axis: str
    values: tuple
    covers: tuple[ClusterCover, ...]
    complexes: tuple[SimplicialComplex, ...]
    maps: tuple[CoverMap, ...]
    simplicial_maps: tuple[SimplicialMap, ...]
    obstruction: FreeBorderObstruction | None = None

    @property
    def ok(self) -> bool:
        return self.obstruction is None

    def map_between(self, i: int, j: int) -> CoverMap:
        if not 0 <= i <= j < len(self.covers):
            raise ValueError("need i <= j inside the tower")
        m = identity_map(self.covers[i])
        for step in range(i, j):
            m = compose(m, self.maps[step])
        return m


_AXIS_DIRECTION = {"bin": "bin", "eps": "eps", "minpts": "minpts"}


def tower_from_covers(axis: str, values: Sequence, covers: Sequence[ClusterCover], dim_cap: int = 2) -> Tower:
    direction = _AXIS_DIRECTION[axis]
    complexes = tuple(nerve(c, dim_cap) for c in covers)
    maps, smaps = [], []
    for step in range(len(covers) - 1):
        m = cover_map(covers[step], covers[step + 1], direction)
        if isinstance(m, FreeBorderObstruction):
            return Tower(axis, tuple(values), tuple(covers), complexes, tuple(maps), tuple(smaps),
                         m.at((step, step + 1)))
        maps.append(m)
        smaps.append(induced_simplicial_map(m, complexes[step], complexes[step + 1]))
    return Tower(axis, tuple(values), tuple(covers), complexes, tuple(maps), tuple(smaps))


def build_tower(cloud: OrderedPointCloud, filt: FilterAssignment, axis: str, values: Sequence,
                num_intervals: int, overlap: float = 0.0, epsilon: float | None = None,
                min_pts: int = 1, clustering=None, dim_cap: int = 2, layout: str = "centered",
                border_points: bool = True) -> Tower:
    """One-parameter tower of cluster covers along ``axis``.

    ``bin`` varies the percent overlap (ascending), ``eps`` the DBSCAN radius
    (ascending), ``minpts`` the DBSCAN MinPts (descending).  ``clustering``
    may supply fixed ``LinkageParams`` for the bin axis.
    """
    values = list(values)
    if not values:
        raise ValueError("need at least one parameter value")
    if axis not in _AXIS_DIRECTION:
        raise ValueError(f"unknown axis {axis!r}")
    if axis == "minpts":
        if any(int(v) != v for v in values):
            raise ValueError("MinPts values must be integers")
        if values != sorted(values, reverse=True):
            raise ValueError("MinPts values must be sorted descending")
    elif values != sorted(values):
        raise ValueError(f"{axis} values must be sorted ascending")

    def params_for(v):
        if clustering is not None:
            if axis != "bin":
                raise ValueError("fixed clustering parameters only make sense on the bin axis")
            return clustering
        if axis == "eps":
            return DbscanParams(float(v), min_pts, border_points)
        if epsilon is None:
            raise ValueError("epsilon is required")
        if axis == "minpts":
            return DbscanParams(epsilon, int(v), border_points)
        return DbscanParams(epsilon, min_pts, border_points)

    covers = []
    for v in values:
        ov = float(v) if axis == "bin" else overlap
        ic = build_interval_cover(filt, num_intervals, ov, layout)
        covers.append(build_cluster_cover(cloud, pullback(cloud, filt, ic), params_for(v)))
    return tower_from_covers(axis, values, covers, dim_cap)


@dataclass(eq=False)
class BiFiltrationGrid:
    """Cells indexed by (bin level i, epsilon level j)."""

    bin_labels: tuple
    eps_values: tuple
    interval_covers: tuple[IntervalCover, ...]
    covers: list           # covers[i][j]
    complexes: list        # complexes[i][j]
    right_maps: dict = field(default_factory=dict)   # (i, j) -> map to (i + 1, j)
    up_maps: dict = field(default_factory=dict)      # (i, j) -> map to (i, j + 1)
    right_smaps: dict = field(default_factory=dict)
    up_smaps: dict = field(default_factory=dict)
    squares: dict = field(default_factory=dict)      # (i, j) -> verdict dict
    obstruction: FreeBorderObstruction | None = None
    _composites: dict = field(default_factory=dict, repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.bin_labels), len(self.eps_values)

    @property
    def ok(self) -> bool:
        return self.obstruction is None

    @property
    def commutes(self) -> bool:
        return self.ok and all(all(v.values()) for v in self.squares.values())

    def cells(self):
        ni, nj = self.shape
        for i in range(ni):
            for j in range(nj):
                yield i, j

    def transition(self, u, v) -> CoverMap:
        """Composite map u -> v along the staircase that goes right first, then up."""
        (i0, j0), (i1, j1) = u, v
        if i1 < i0 or j1 < j0:
            raise ValueError(f"{u} is not below {v}")
        key = (u, v)
        if key not in self._composites:
            m = identity_map(self.covers[i0][j0])
            for i in range(i0, i1):
                m = compose(m, self.right_maps[(i, j0)])
            for j in range(j0, j1):
                m = compose(m, self.up_maps[(i1, j)])
            self._composites[key] = m
        return self._composites[key]

    def cluster_counts(self) -> list[list[int]]:
        ni, nj = self.shape
        return [[len(self.covers[i][j]) for j in range(nj)] for i in range(ni)]

    def manifest(self) -> dict:
        ni, nj = self.shape
        return {
            "axes": {"bin": list(self.bin_labels), "eps": list(self.eps_values)},
            "interval_covers": [c.to_dict() for c in self.interval_covers],
            "cells": [{"i": i, "j": j, "cover": self.covers[i][j].summary(),
                       "complex": {"counts": self.complexes[i][j].counts()}}
                      for i in range(ni) for j in range(nj)],
            "right_maps": [{"cell": [i, j], "pairs": m.pairs()} for (i, j), m in sorted(self.right_maps.items())],
            "up_maps": [{"cell": [i, j], "pairs": m.pairs()} for (i, j), m in sorted(self.up_maps.items())],
            "squares": [{"cell": [i, j], **v} for (i, j), v in sorted(self.squares.items())],
            "commutes": self.commutes,
            "obstruction": None if self.obstruction is None else self.obstruction.to_dict(),
        }


def build_grid(cloud: OrderedPointCloud, filt: FilterAssignment, interval_covers: Sequence[IntervalCover],
               eps_values: Sequence[float], min_pts: int, dim_cap: int = 2, bin_labels=None,
               border_points: bool = True) -> BiFiltrationGrid:
    """Grid over explicit interval covers (bin axis) and epsilon values."""
    interval_covers = list(interval_covers)
    eps_values = [float(e) for e in eps_values]
    if not interval_covers or not eps_values:
        raise ValueError("both axes need at least one value")
    if eps_values != sorted(eps_values):
        raise ValueError("epsilon values must be sorted ascending")
    for a, b in zip(interval_covers, interval_covers[1:]):
        if not check_cover_refinement(a, b).verdict:
            raise ValueError("interval covers must increase along the bin axis")
    if bin_labels is None:
        bin_labels = [c.label for c in interval_covers]
    covers, complexes = [], []
    for ic in interval_covers:
        pb = pullback(cloud, filt, ic)
        row = [build_cluster_cover(cloud, pb, DbscanParams(e, min_pts, border_points)) for e in eps_values]
        covers.append(row)
        complexes.append([nerve(c, dim_cap) for c in row])
    grid = BiFiltrationGrid(tuple(bin_labels), tuple(eps_values), tuple(interval_covers), covers, complexes)
    ni, nj = grid.shape
    for i in range(ni):
        for j in range(nj):
            for di, dj, direction, store, sstore in ((1, 0, "bin", grid.right_maps, grid.right_smaps),
                                                     (0, 1, "eps", grid.up_maps, grid.up_smaps)):
                if i + di >= ni or j + dj >= nj:
                    continue
                m = cover_map(covers[i][j], covers[i + di][j + dj], direction)
                if isinstance(m, FreeBorderObstruction):
                    if grid.obstruction is None:
                        grid.obstruction = m.at((i + di, j + dj))
                    continue
                store[(i, j)] = m
                sstore[(i, j)] = induced_simplicial_map(m, complexes[i][j], complexes[i + di][j + dj])
    if grid.ok:
        _check_squares(grid)
    return grid


def _check_squares(grid: BiFiltrationGrid) -> None:
    ni, nj = grid.shape
    for i in range(ni - 1):
        for j in range(nj - 1):
            right_up = compose(grid.right_maps[(i, j)], grid.up_maps[(i + 1, j)])
            up_right = compose(grid.up_maps[(i, j)], grid.right_maps[(i, j + 1)])
            s1 = compose_simplicial(grid.right_smaps[(i, j)], grid.up_smaps[(i + 1, j)])
            s2 = compose_simplicial(grid.up_smaps[(i, j)], grid.right_smaps[(i, j + 1)])
            direct = cover_map(grid.covers[i][j], grid.covers[i + 1][j + 1], "grid")
            diag_ok = not isinstance(direct, FreeBorderObstruction) and direct.assignment == right_up.assignment
            grid.squares[(i, j)] = {
                "cover": right_up.assignment == up_right.assignment,
                "simplicial": s1.vertex_map == s2.vertex_map,
                "diagonal": diag_ok,
            }


def build_bifiltration(cloud: OrderedPointCloud, filt: FilterAssignment, overlaps: Sequence[float],
                       eps_values: Sequence[float], min_pts: int, dim_cap: int = 2, num_intervals: int = 3,
                       layout: str = "centered", border_points: bool = True) -> BiFiltrationGrid:
    """Bi-filtration over (percent overlap, epsilon) with MinPts fixed."""
    overlaps = [float(o) for o in overlaps]
    if overlaps != sorted(overlaps):
        raise ValueError("overlap values must be sorted ascending")
    ics = [build_interval_cover(filt, num_intervals, o, layout) for o in overlaps]
    return build_grid(cloud, filt, ics, eps_values, min_pts, dim_cap, overlaps, border_points)
