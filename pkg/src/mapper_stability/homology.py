"""Simplicial homology over GF(2), induced maps, rank invariants and 1-D persistence.

Chains are Python ints used as bit vectors: bit ``i`` set means the i-th
simplex (in the complex's sorted order) is in the chain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .filtration import BiFiltrationGrid, SimplicialMap, Tower, compose_simplicial
from .mapper import SimplicialComplex


class HomologyError(ValueError):
    pass


def boundary_columns(cx: SimplicialComplex, k: int) -> list[int]:
    """Columns of the boundary map from k-chains to (k-1)-chains."""
    if k <= 0:
        return [0] * len(cx.by_dim(max(k, 0)))
    cols = []
    for s in cx.by_dim(k):
        col = 0
        for drop in range(len(s)):
            face = s[:drop] + s[drop + 1:]
            col ^= 1 << cx.index_of(face)
        cols.append(col)
    return cols


def _low(v: int) -> int:
    return v.bit_length() - 1


def gf2_rank(rows) -> int:
    """Rank of a 0/1 matrix (numpy array or iterable of int bit rows)."""
    if isinstance(rows, np.ndarray):
        if rows.size == 0:
            return 0
        rows = [sum(1 << c for c, x in enumerate(r) if x) for r in rows % 2]
    pivots: dict[int, int] = {}
    rank = 0
    for v in rows:
        while v:
            p = _low(v)
            if p in pivots:
                v ^= pivots[p]
            else:
                pivots[p] = v
                rank += 1
                break
    return rank


def gf2_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a.astype(np.int64) @ b.astype(np.int64) % 2).astype(np.uint8)


@dataclass(eq=False)
class HomologyBasis:
    k: int
    complex: SimplicialComplex
    cycle_reps: list[int]
    # pivot -> (reduced vector, coordinate tag over cycle_reps); boundaries carry tag 0
    _table: dict = field(repr=False)

    @property
    def dimension(self) -> int:
        return len(self.cycle_reps)

    def coordinates(self, cycle: int) -> int:
        """Coordinates (as a bit mask over ``cycle_reps``) of a cycle modulo boundaries."""
        tag = 0
        v = cycle
        while v:
            p = _low(v)
            entry = self._table.get(p)
            if entry is None:
                raise HomologyError("chain is not a cycle in the span of boundaries and representatives")
            v ^= entry[0]
            tag ^= entry[1]
        return tag

    def rep_simplices(self, i: int) -> list[tuple[int, ...]]:
        level = self.complex.by_dim(self.k)
        v = self.cycle_reps[i]
        return [level[b] for b in range(v.bit_length()) if v >> b & 1]


def homology(cx: SimplicialComplex, k: int) -> HomologyBasis:
    """Basis of H_k with deterministic cycle representatives."""
    if k < 0:
        raise HomologyError("degree must be >= 0")
    if cx.dim_cap < k + 1:
        raise HomologyError(f"H_{k} needs simplices up to dimension {k + 1}; complex is capped at {cx.dim_cap}")
    # kernel of the boundary on k-chains, by column reduction with bookkeeping
    cycles = []
    pivots: dict[int, tuple[int, int]] = {}
    for j, col in enumerate(boundary_columns(cx, k)):
        v, track = col, 1 << j
        while v:
            p = _low(v)
            if p not in pivots:
                pivots[p] = (v, track)
                break
            pv, pt = pivots[p]
            v ^= pv
            track ^= pt
        if not v:
            cycles.append(track)
    table: dict[int, tuple[int, int]] = {}

    def reduce(v, tag):
        while v:
            p = _low(v)
            if p not in table:
                return v, tag, p
            ev, et = table[p]
            v ^= ev
            tag ^= et
        return 0, tag, None

    for col in boundary_columns(cx, k + 1):
        v, tag, p = reduce(col, 0)
        if v:
            table[p] = (v, tag)
    reps = []
    for z in cycles:
        v, tag, p = reduce(z, 0)
        if v:
            table[p] = (v, tag ^ (1 << len(reps)))
            reps.append(z)
    return HomologyBasis(k, cx, reps, table)


def betti_numbers(cx: SimplicialComplex) -> list[int]:
    return [homology(cx, k).dimension for k in range(cx.dim_cap)]


@dataclass(eq=False)
class HomologyMap:
    matrix: np.ndarray      # shape (target dim, source dim)
    source: HomologyBasis
    target: HomologyBasis

    @property
    def rank(self) -> int:
        return gf2_rank(self.matrix)


def chain_image(sm: SimplicialMap, k: int, chain: int) -> int:
    """Push a k-chain forward; simplices collapsing to lower dimension go to zero."""
    src_level = sm.source.by_dim(k)
    out = 0
    for b in range(chain.bit_length()):
        if chain >> b & 1:
            img = sm.image(src_level[b])
            if len(img) == k + 1:
                idx = sm.target.index_of(img)
                if idx is None:
                    raise HomologyError(f"image {img} is not a simplex of the target")
                out ^= 1 << idx
    return out


def induced_homology_map(sm: SimplicialMap, src: HomologyBasis, dst: HomologyBasis) -> HomologyMap:
    if src.complex is not sm.source or dst.complex is not sm.target or src.k != dst.k:
        raise HomologyError("bases do not belong to the map's endpoints")
    mat = np.zeros((dst.dimension, src.dimension), dtype=np.uint8)
    for c, rep in enumerate(src.cycle_reps):
        coords = dst.coordinates(chain_image(sm, src.k, rep))
        for r in range(dst.dimension):
            mat[r, c] = coords >> r & 1
    return HomologyMap(mat, src, dst)


def compose_homology(a: HomologyMap, b: HomologyMap) -> HomologyMap:
    """``b o a``."""
    if a.target is not b.source:
        raise HomologyError("cannot compose homology maps with mismatched endpoints")
    return HomologyMap(gf2_matmul(b.matrix, a.matrix), a.source, b.target)


def identity_homology(basis: HomologyBasis) -> HomologyMap:
    return HomologyMap(np.eye(basis.dimension, dtype=np.uint8), basis, basis)


class TowerHomology:
    """Homology of every level of a tower with the adjacent induced maps."""

    def __init__(self, tower: Tower, k: int):
        if not tower.ok:
            raise HomologyError("tower has an obstruction; homology maps are undefined")
        self.k = k
        self.bases = [homology(cx, k) for cx in tower.complexes]
        self.maps = [induced_homology_map(sm, self.bases[i], self.bases[i + 1])
                     for i, sm in enumerate(tower.simplicial_maps)]

    @property
    def dims(self) -> list[int]:
        return [b.dimension for b in self.bases]

    def composite(self, i: int, j: int) -> HomologyMap:
        m = identity_homology(self.bases[i])
        for step in range(i, j):
            m = compose_homology(m, self.maps[step])
        return m

    def rank_invariant(self) -> dict:
        return rank_invariant_from_maps(self.maps, self.dims)


def rank_invariant_from_maps(maps: Sequence[HomologyMap], dims: Sequence[int]) -> dict:
    """``{(a, b): rank of a -> b}`` for a 1-D tower; ``(a, a)`` is the dimension."""
    n = len(dims)
    ranks = {}
    for a in range(n):
        m = np.eye(dims[a], dtype=np.uint8)
        ranks[(a, a)] = dims[a]
        for b in range(a + 1, n):
            m = gf2_matmul(maps[b - 1].matrix, m)
            ranks[(a, b)] = gf2_rank(m)
    return ranks


def persistence_diagram(ranks: dict, n: int) -> list[tuple[int, float]]:
    """Birth/death pairs by inclusion-exclusion on the rank invariant.

    ``death == math.inf`` marks classes alive at the last index.
    """
    def r(a, b):
        if a < 0 or b >= n or a > b:
            return 0
        return ranks[(a, b)]

    out = []
    for b in range(n):
        for d in range(b + 1, n + 1):
            mult = r(b, d - 1) - r(b - 1, d - 1) - r(b, d) + r(b - 1, d)
            if mult < 0:
                raise HomologyError(f"negative multiplicity at ({b}, {d}); maps are not functorial")
            out.extend([(b, math.inf if d == n else d)] * mult)
    return out


def diagram_multiplicities(ranks: dict, n: int) -> dict:
    mult: dict = {}
    for pair in persistence_diagram(ranks, n):
        mult[pair] = mult.get(pair, 0) + 1
    return mult


@dataclass
class RankInvariant:
    k: int
    ranks: dict     # ((i0, j0), (i1, j1)) -> rank
    labels: tuple = ()

    def __getitem__(self, key):
        return self.ranks[key]


class GridHomology:
    """Homology bases for every grid cell and induced maps along grid edges."""

    def __init__(self, grid: BiFiltrationGrid, k: int):
        if not grid.ok:
            raise HomologyError("grid has an obstruction; homology maps are undefined")
        self.grid = grid
        self.k = k
        ni, nj = grid.shape
        self.bases = {(i, j): homology(grid.complexes[i][j], k) for i in range(ni) for j in range(nj)}
        self.right = {u: induced_homology_map(sm, self.bases[u], self.bases[(u[0] + 1, u[1])])
                      for u, sm in grid.right_smaps.items()}
        self.up = {u: induced_homology_map(sm, self.bases[u], self.bases[(u[0], u[1] + 1)])
                   for u, sm in grid.up_smaps.items()}
        self._cache: dict = {}

    def dims(self) -> list[list[int]]:
        ni, nj = self.grid.shape
        return [[self.bases[(i, j)].dimension for j in range(nj)] for i in range(ni)]

    def transition(self, u, v) -> HomologyMap:
        """Right-then-up composite from cell u to cell v."""
        key = (u, v)
        if key not in self._cache:
            (i0, j0), (i1, j1) = u, v
            if i1 < i0 or j1 < j0:
                raise HomologyError(f"{u} is not below {v}")
            m = identity_homology(self.bases[u])
            for i in range(i0, i1):
                m = compose_homology(m, self.right[(i, j0)])
            for j in range(j0, j1):
                m = compose_homology(m, self.up[(i1, j)])
            self._cache[key] = m
        return self._cache[key]

    def transition_other_way(self, u, v) -> HomologyMap:
        """Up-then-right composite; equal to ``transition`` when squares commute."""
        (i0, j0), (i1, j1) = u, v
        m = identity_homology(self.bases[u])
        for j in range(j0, j1):
            m = compose_homology(m, self.up[(i0, j)])
        for i in range(i0, i1):
            m = compose_homology(m, self.right[(i, j1)])
        return m

    def rank_invariant(self) -> RankInvariant:
        ni, nj = self.grid.shape
        cells = [(i, j) for i in range(ni) for j in range(nj)]
        ranks = {}
        for u in cells:
            for v in cells:
                if v[0] >= u[0] and v[1] >= u[1]:
                    ranks[(u, v)] = self.transition(u, v).rank
        return RankInvariant(self.k, ranks, (self.grid.bin_labels, self.grid.eps_values))


def rank_invariant(obj, k: int):
    """Rank invariant of a tower (dict keyed by index pairs) or a grid (``RankInvariant``)."""
    if isinstance(obj, Tower):
        return TowerHomology(obj, k).rank_invariant()
    if isinstance(obj, BiFiltrationGrid):
        return GridHomology(obj, k).rank_invariant()
    raise TypeError("expected a Tower or BiFiltrationGrid")


def homology_of_composite(maps: Sequence[SimplicialMap], src: HomologyBasis, dst: HomologyBasis) -> HomologyMap:
    """Homology map of a composite simplicial map computed directly (not as a matrix product)."""
    sm = maps[0]
    for nxt in maps[1:]:
        sm = compose_simplicial(sm, nxt)
    return induced_homology_map(sm, src, dst)
