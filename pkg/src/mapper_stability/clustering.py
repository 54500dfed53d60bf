"""Order-sensitive DBSCAN, linkage clustering and free-border detection.

Every function takes a ``bin``: a sequence of global point indices whose
order is the scan order.  Passing a permuted bin is how orderings are tested.
"""
from __future__ import annotations

import enum
import itertools
import math
import random
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import squareform

from .pointcloud import OrderedPointCloud


@dataclass(frozen=True)
class DbscanParams:
    epsilon: float
    min_pts: int
    border_points: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValueError("epsilon must be finite and >= 0")
        if int(self.min_pts) != self.min_pts or self.min_pts < 1:
            raise ValueError("min_pts must be an integer >= 1")

    @property
    def name(self) -> str:
        return "dbscan"

    def to_dict(self) -> dict:
        return {"algorithm": "dbscan", "epsilon": self.epsilon, "min_pts": self.min_pts,
                "border_points": self.border_points}


@dataclass(frozen=True)
class LinkageParams:
    """Hierarchical clustering settings.

    ``cutting_height`` fixes the cut; otherwise it is chosen per bin by the
    first-empty-histogram-bucket heuristic with ``num_bins_when_clustering``.
    """

    method: str = "single"
    cutting_height: float | None = None
    num_bins_when_clustering: int = 10

    def __post_init__(self):
        if self.method not in ("single", "complete", "average"):
            raise ValueError(f"unknown linkage {self.method!r}")
        if self.num_bins_when_clustering < 1:
            raise ValueError("num_bins_when_clustering must be >= 1")

    @property
    def name(self) -> str:
        return self.method

    def to_dict(self) -> dict:
        return {"algorithm": self.method, "cutting_height": self.cutting_height,
                "num_bins_when_clustering": self.num_bins_when_clustering}


class Kind(str, enum.Enum):
    CORE = "core"
    BORDER = "border"
    NOISE = "noise"
    FREE_BORDER = "free-border"


@dataclass(frozen=True)
class PointLabel:
    kind: Kind
    cluster_id: int | None = None


@dataclass(frozen=True)
class Clustering:
    clusters: tuple[tuple[int, ...], ...]
    labels: dict
    canonical_rep: tuple[int, ...]
    params: object
    bin: tuple[int, ...]

    @property
    def noise(self) -> tuple[int, ...]:
        return tuple(sorted(i for i, lab in self.labels.items() if lab.cluster_id is None))

    def cluster_of(self, i: int) -> int | None:
        lab = self.labels.get(i)
        return None if lab is None else lab.cluster_id

    def partition(self) -> frozenset:
        return frozenset(frozenset(c) for c in self.clusters)

    def records(self) -> list[dict]:
        out = []
        for i in sorted(self.labels):
            lab = self.labels[i]
            cid = lab.cluster_id
            out.append({"point": i, "label": lab.kind.value, "cluster_id": cid,
                        "canonical_rep": None if cid is None else self.canonical_rep[cid]})
        return out


class _Neighborhoods:
    """Closed eps-balls inside one bin, in local (scan-order) indices."""

    def __init__(self, cloud: OrderedPointCloud, bin_: Sequence[int], epsilon: float):
        self.bin = tuple(int(i) for i in bin_)
        if len(set(self.bin)) != len(self.bin):
            raise ValueError("bin lists a point twice")
        n = len(self.bin)
        if n:
            dist = cloud.distances(self.bin)
            adj = dist <= epsilon
        else:
            adj = np.zeros((0, 0), dtype=bool)
        self.nbrs = [tuple(int(j) for j in np.nonzero(adj[a])[0]) for a in range(n)]

    def core_mask(self, min_pts: int) -> list[bool]:
        return [len(nb) >= min_pts for nb in self.nbrs]


def _check_bin(cloud, bin_):
    n = len(cloud)
    for i in bin_:
        if not 0 <= i < n:
            raise IndexError(f"point {i} outside cloud of {n} points")


def epsilon_neighborhood(cloud: OrderedPointCloud, bin_: Sequence[int], p: int, epsilon: float) -> tuple[int, ...]:
    """Points of the bin within ``epsilon`` of ``p`` (closed ball, p included)."""
    if p not in bin_:
        raise ValueError(f"point {p} is not in the bin")
    idx = np.asarray(bin_, dtype=int)
    d = cloud.distances([p] + list(bin_))[0, 1:]
    return tuple(sorted(int(i) for i in idx[d <= epsilon]))


def classify_points(cloud: OrderedPointCloud, bin_: Sequence[int], params: DbscanParams) -> dict:
    _check_bin(cloud, bin_)
    nb = _Neighborhoods(cloud, bin_, params.epsilon)
    core = nb.core_mask(params.min_pts)
    labels = {}
    for a, g in enumerate(nb.bin):
        if core[a]:
            kind = Kind.CORE
        elif any(core[b] for b in nb.nbrs[a]):
            kind = Kind.BORDER
        else:
            kind = Kind.NOISE
        labels[g] = PointLabel(kind)
    return labels


def _core_components(nb: _Neighborhoods, core: list[bool]) -> list[int]:
    """Component id per local point (-1 for non-core) of the core adjacency graph."""
    comp = [-1] * len(core)
    c = 0
    for a in range(len(core)):
        if not core[a] or comp[a] >= 0:
            continue
        comp[a] = c
        stack = [a]
        while stack:
            x = stack.pop()
            for y in nb.nbrs[x]:
                if core[y] and comp[y] < 0:
                    comp[y] = c
                    stack.append(y)
        c += 1
    return comp


def _free_border_local(nb: _Neighborhoods, core: list[bool]) -> set[int]:
    comp = _core_components(nb, core)
    free = set()
    for a in range(len(core)):
        if core[a]:
            continue
        touching = {comp[b] for b in nb.nbrs[a] if core[b]}
        if len(touching) >= 2:
            free.add(a)
    return free


def _scan(nb: _Neighborhoods, core: list[bool]) -> list[int]:
    """Classic DBSCAN scan; returns a cluster number per local point (-1 = noise)."""
    assign = [-1] * len(core)
    cid = 0
    for a in range(len(core)):
        if assign[a] >= 0 or not core[a]:
            continue
        assign[a] = cid
        queue = deque([a])
        while queue:
            x = queue.popleft()
            for y in nb.nbrs[x]:
                if assign[y] < 0:
                    assign[y] = cid
                    if core[y]:
                        queue.append(y)
        cid += 1
    return assign


def _assemble(bin_, assign, core, free, params, all_core=False) -> Clustering:
    ncl = max(assign, default=-1) + 1
    members: list[list[int]] = [[] for _ in range(ncl)]
    cores: list[list[int]] = [[] for _ in range(ncl)]
    labels = {}
    for a, g in enumerate(bin_):
        c = assign[a]
        if c < 0:
            labels[g] = PointLabel(Kind.NOISE)
            continue
        members[c].append(g)
        if all_core or core[a]:
            cores[c].append(g)
            labels[g] = PointLabel(Kind.CORE, c)
        else:
            labels[g] = PointLabel(Kind.FREE_BORDER if a in free else Kind.BORDER, c)
    clusters = tuple(tuple(sorted(m)) for m in members)
    reps = tuple(min(c) for c in cores)
    return Clustering(clusters, labels, reps, params, tuple(bin_))


def dbscan(cloud: OrderedPointCloud, bin_: Sequence[int], params: DbscanParams) -> Clustering:
    """DBSCAN over ``bin_`` scanning points in the order given.

    A border point joins the first cluster that reaches it.  With
    ``border_points=False`` non-core points are all noise.
    """
    _check_bin(cloud, bin_)
    nb = _Neighborhoods(cloud, bin_, params.epsilon)
    core = nb.core_mask(params.min_pts)
    assign = _scan(nb, core)
    if not params.border_points:
        assign = [c if core[a] else -1 for a, c in enumerate(assign)]
    return _assemble(nb.bin, assign, core, _free_border_local(nb, core), params)


def detect_free_border(cloud: OrderedPointCloud, bin_: Sequence[int], params: DbscanParams) -> tuple[int, ...]:
    """Non-core points lying in the eps-balls of two cores that are not density-connected."""
    _check_bin(cloud, bin_)
    nb = _Neighborhoods(cloud, bin_, params.epsilon)
    core = nb.core_mask(params.min_pts)
    return tuple(sorted(nb.bin[a] for a in _free_border_local(nb, core)))


def ordering_outcomes(cloud: OrderedPointCloud, bin_: Sequence[int], params: DbscanParams,
                      max_states: int = 200_000, samples: int = 2000, seed: int = 0) -> dict:
    """For each point, the set of clusters it can land in over all scan orders.

    A cluster is identified by its set of core points.  Orderings are explored
    exhaustively as a transition system: a state is the partial assignment
    after some prefix of the scan, and scanning a core point that is still
    unassigned is the only step that changes it.  If the state space exceeds
    ``max_states`` the search falls back to ``samples`` random orderings.
    """
    _check_bin(cloud, bin_)
    nb = _Neighborhoods(cloud, bin_, params.epsilon)
    core = nb.core_mask(params.min_pts)
    n = len(core)
    outcomes: dict[int, set] = {g: set() for g in nb.bin}

    def grow(assign, a):
        assign = list(assign)
        tag = a
        assign[a] = tag
        queue = deque([a])
        while queue:
            x = queue.popleft()
            for y in nb.nbrs[x]:
                if assign[y] < 0:
                    assign[y] = tag
                    if core[y]:
                        queue.append(y)
        # relabel by the smallest core so equal partitions give equal states
        label = min(x for x in range(n) if assign[x] == tag and core[x])
        if label != tag:
            assign = [label if t == tag else t for t in assign]
        return tuple(assign)

    def record(assign):
        core_sets: dict[int, set] = {}
        for a in range(n):
            if assign[a] >= 0 and core[a]:
                core_sets.setdefault(assign[a], set()).add(nb.bin[a])
        for a in range(n):
            ident = None if assign[a] < 0 else frozenset(core_sets[assign[a]])
            outcomes[nb.bin[a]].add(ident)

    start = tuple([-1] * n)
    seen = {start}
    stack = [start]
    exhausted = True
    while stack:
        state = stack.pop()
        pending = [a for a in range(n) if core[a] and state[a] < 0]
        if not pending:
            record(state)
            continue
        for a in pending:
            nxt = grow(state, a)
            if nxt not in seen:
                if len(seen) >= max_states:
                    exhausted = False
                    break
                seen.add(nxt)
                stack.append(nxt)
        if not exhausted:
            break
    if not exhausted:
        for g in outcomes:
            outcomes[g].clear()
        rng = random.Random(seed)
        order = list(range(n))
        for _ in range(samples):
            rng.shuffle(order)
            state = start
            for a in order:
                if core[a] and state[a] < 0:
                    state = grow(state, a)
            record(state)
    return outcomes


def ordering_oracle(cloud: OrderedPointCloud, bin_: Sequence[int], params: DbscanParams, s: int, **kw) -> bool:
    """True iff two scan orders put ``s`` in different clusters."""
    if s not in bin_:
        raise ValueError(f"point {s} is not in the bin")
    return len(ordering_outcomes(cloud, bin_, params, **kw)[s]) >= 2


def permutation_outcomes(cloud: OrderedPointCloud, bin_: Sequence[int], params: DbscanParams) -> dict:
    """Literal enumeration of every permutation of the bin; only for tiny bins."""
    outcomes: dict[int, set] = {int(g): set() for g in bin_}
    for perm in itertools.permutations(bin_):
        cl = dbscan(cloud, perm, params)
        core_sets = [frozenset(g for g in c if cl.labels[g].kind == Kind.CORE) for c in cl.clusters]
        for g in bin_:
            cid = cl.cluster_of(g)
            outcomes[g].add(None if cid is None else core_sets[cid])
    return outcomes


def _ordered_labels(raw_labels) -> list[int]:
    """Renumber cluster labels by first appearance in scan order."""
    remap: dict = {}
    return [remap.setdefault(l, len(remap)) for l in raw_labels]


def single_linkage(cloud: OrderedPointCloud, bin_: Sequence[int], cutting_height: float) -> Clustering:
    """Connected components of the graph with an edge whenever dist <= cutting_height."""
    _check_bin(cloud, bin_)
    bin_ = tuple(int(i) for i in bin_)
    params = LinkageParams("single", cutting_height)
    if not bin_:
        return _assemble(bin_, [], [], set(), params)
    adj = csr_matrix(cloud.distances(bin_) <= cutting_height)
    _, raw = connected_components(adj, directed=False)
    assign = _ordered_labels(raw.tolist())
    return _assemble(bin_, assign, [True] * len(bin_), set(), params, all_core=True)


def first_empty_bucket_cutoff(heights: Sequence[float], diameter: float, num_bins: int) -> float:
    """Cut height from the histogram of merge heights plus the diameter.

    The range ``[min(heights), diameter]`` is split into ``num_bins``
    right-closed buckets (the first also closed on the left); the cut is the
    lower edge of the first empty bucket, or ``inf`` if none is empty.
    """
    h = np.asarray(heights, dtype=np.float64)
    if h.size == 0:
        return math.inf
    lo = float(h.min())
    if diameter <= lo:
        return math.inf
    width = (diameter - lo) / num_bins
    counts = np.zeros(num_bins, dtype=int)
    for v in np.append(h, diameter):
        b = int(math.ceil((v - lo) / width)) - 1
        counts[min(max(b, 0), num_bins - 1)] += 1
    empty = np.nonzero(counts == 0)[0]
    if empty.size == 0:
        return math.inf
    return lo + float(empty[0]) * width


def agglomerative(cloud: OrderedPointCloud, bin_: Sequence[int], linkage_method: str = "complete",
                  num_bins_when_clustering: int = 10, cutting_height: float | None = None) -> Clustering:
    """Hierarchical clustering of a bin, cut by the TDAmapper histogram heuristic."""
    _check_bin(cloud, bin_)
    bin_ = tuple(int(i) for i in bin_)
    params = LinkageParams(linkage_method, cutting_height, num_bins_when_clustering)
    if not bin_:
        raise ValueError("cannot cluster an empty bin")
    if len(bin_) == 1:
        return _assemble(bin_, [0], [True], set(), params, all_core=True)
    dist = cloud.distances(bin_)
    z = linkage(squareform(dist, checks=False), method=linkage_method)
    if cutting_height is None:
        cut = first_empty_bucket_cutoff(z[:, 2], float(dist.max()), num_bins_when_clustering)
    else:
        cut = cutting_height
    if math.isinf(cut):
        raw = [1] * len(bin_)
    else:
        raw = fcluster(z, cut, criterion="distance").tolist()
    assign = _ordered_labels(raw)
    return _assemble(bin_, assign, [True] * len(bin_), set(), params, all_core=True)


def cluster_bin(cloud: OrderedPointCloud, bin_: Sequence[int], params) -> Clustering:
    """Dispatch on the parameter type."""
    if isinstance(params, DbscanParams):
        return dbscan(cloud, bin_, params)
    if isinstance(params, LinkageParams):
        if not bin_:
            return _assemble((), [], [], set(), params)
        if params.method == "single" and params.cutting_height is not None:
            return single_linkage(cloud, bin_, params.cutting_height)
        return agglomerative(cloud, bin_, params.method, params.num_bins_when_clustering,
                             params.cutting_height)
    raise TypeError(f"unsupported clustering parameters {params!r}")
