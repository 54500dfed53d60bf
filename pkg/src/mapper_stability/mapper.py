"""Cluster covers, their nerves and single-run mapper graphs."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

from .clustering import Clustering, DbscanParams, cluster_bin, detect_free_border
from .cover import IntervalCover, PullbackCover, build_interval_cover, pullback
from .pointcloud import FilterAssignment, OrderedPointCloud


@dataclass(frozen=True)
class CoverElement:
    bin_index: int
    members: tuple[int, ...]
    rep: int

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True, eq=False)
class ClusterCover:
    elements: tuple[CoverElement, ...]
    clusterings: tuple[Clustering, ...]
    pullback: PullbackCover
    params: object
    noise: tuple[int, ...]
    cloud: OrderedPointCloud = field(repr=False)

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def cover(self) -> IntervalCover:
        return self.pullback.cover

    @cached_property
    def _lookup(self) -> dict:
        table = {}
        for e, el in enumerate(self.elements):
            for p in el.members:
                table[(el.bin_index, p)] = e
        return table

    def element_containing(self, bin_index: int, point: int) -> int | None:
        return self._lookup.get((bin_index, point))

    @cached_property
    def free_border(self) -> tuple[tuple[int, ...], ...]:
        """Free-border points per bin (always empty for linkage clusterings)."""
        if not isinstance(self.params, DbscanParams):
            return tuple(() for _ in self.pullback.bins)
        return tuple(detect_free_border(self.cloud, b, self.params) for b in self.pullback.bins)

    def summary(self) -> dict:
        return {
            "clusters": len(self.elements),
            "noise": len(self.noise),
            "free_border": sorted({p for fb in self.free_border for p in fb}),
            "elements": [{"id": e, "bin": el.bin_index, "rep": el.rep, "size": el.size}
                         for e, el in enumerate(self.elements)],
        }


def build_cluster_cover(cloud: OrderedPointCloud, pb: PullbackCover, params) -> ClusterCover:
    """Cluster each bin and collect all clusters as one cover of the non-noise points."""
    if pb.cloud_digest and pb.cloud_digest != cloud.digest:
        raise ValueError("pullback cover was computed on a different cloud")
    elements = []
    clusterings = []
    covered: set[int] = set()
    for k, b in enumerate(pb.bins):
        cl = cluster_bin(cloud, b, params)
        clusterings.append(cl)
        for members, rep in zip(cl.clusters, cl.canonical_rep):
            elements.append(CoverElement(k, members, rep))
            covered.update(members)
    noise = tuple(i for i in range(len(cloud)) if i not in covered)
    return ClusterCover(tuple(elements), tuple(clusterings), pb, params, noise, cloud)


@dataclass(frozen=True, eq=False)
class SimplicialComplex:
    n_vertices: int
    # simplices[k] = sorted tuple of k-simplices, each a sorted vertex tuple
    simplices: tuple[tuple[tuple[int, ...], ...], ...]
    dim_cap: int
    vertex_payload: tuple[dict, ...] = ()

    @cached_property
    def _index(self) -> list[dict]:
        return [{s: i for i, s in enumerate(level)} for level in self.simplices]

    def by_dim(self, k: int) -> tuple[tuple[int, ...], ...]:
        if 0 <= k < len(self.simplices):
            return self.simplices[k]
        return ()

    def index_of(self, simplex) -> int | None:
        s = tuple(sorted(simplex))
        k = len(s) - 1
        if k < 0 or k >= len(self.simplices):
            return None
        return self._index[k].get(s)

    def has(self, simplex) -> bool:
        return self.index_of(simplex) is not None

    @property
    def dimension(self) -> int:
        top = -1
        for k, level in enumerate(self.simplices):
            if level:
                top = k
        return top

    def counts(self) -> list[int]:
        return [len(level) for level in self.simplices]

    def edges(self):
        return self.by_dim(1)

    def to_json(self, include_members: bool = False) -> dict:
        verts = []
        for v in range(self.n_vertices):
            pay = self.vertex_payload[v] if self.vertex_payload else {}
            row = {"id": v, "bin": pay.get("bin"), "rep": pay.get("rep"), "size": pay.get("size")}
            if include_members:
                row["members"] = list(pay.get("members", ()))
            verts.append(row)
        return {"vertices": verts,
                "simplices": {str(k): [list(s) for s in self.simplices[k]]
                              for k in range(1, len(self.simplices))}}

    def to_dot(self, name: str = "mapper") -> str:
        lines = [f"graph {name} {{"]
        for v in range(self.n_vertices):
            pay = self.vertex_payload[v] if self.vertex_payload else {}
            label = f"{pay.get('bin')}:{pay.get('rep')}({pay.get('size')})"
            lines.append(f'  v{v} [label="{label}"];')
        for a, b in self.edges():
            lines.append(f"  v{a} -- v{b};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def complex_from_simplices(n_vertices: int, top_simplices, dim_cap: int) -> SimplicialComplex:
    """Downward closure of the given simplices, truncated at ``dim_cap``."""
    levels = [set() for _ in range(dim_cap + 1)]
    levels[0] = {(v,) for v in range(n_vertices)}
    for s in top_simplices:
        s = tuple(sorted(set(s)))
        for r in range(1, min(len(s), dim_cap + 1) + 1):
            for face in itertools.combinations(s, r):
                if max(face) >= n_vertices:
                    raise ValueError(f"vertex {max(face)} out of range")
                levels[r - 1].add(face)
    return SimplicialComplex(n_vertices, tuple(tuple(sorted(l)) for l in levels), dim_cap)


def nerve(cover: ClusterCover, dim_cap: int = 2) -> SimplicialComplex:
    """Nerve of the cluster cover: a simplex for every set of clusters sharing a point."""
    if dim_cap < 1:
        raise ValueError("dim_cap must be >= 1")
    containing: dict[int, list[int]] = {}
    for e, el in enumerate(cover.elements):
        for p in el.members:
            containing.setdefault(p, []).append(e)
    levels = [set() for _ in range(dim_cap + 1)]
    levels[0] = {(e,) for e in range(len(cover.elements))}
    for elems in containing.values():
        for r in range(2, min(len(elems), dim_cap + 1) + 1):
            levels[r - 1].update(itertools.combinations(sorted(elems), r))
    payload = tuple({"bin": el.bin_index, "rep": el.rep, "size": el.size, "members": el.members}
                    for el in cover.elements)
    return SimplicialComplex(len(cover.elements), tuple(tuple(sorted(l)) for l in levels), dim_cap, payload)


def mapper_graph(cloud: OrderedPointCloud, filt: FilterAssignment, num_intervals: int,
                 percent_overlap: float, params, dim_cap: int = 2, layout: str = "centered"):
    """Filter -> interval cover -> pullback -> per-bin clustering -> nerve.

    Returns ``(complex, cluster_cover)``.
    """
    cover = build_interval_cover(filt, num_intervals, percent_overlap, layout)
    cc = build_cluster_cover(cloud, pullback(cloud, filt, cover), params)
    return nerve(cc, dim_cap), cc
