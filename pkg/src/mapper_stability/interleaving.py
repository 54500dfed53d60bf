"""Verification of the interleaving between the grids of X and of its perturbation.

With grid steps of at least (delta in bin growth, 2 delta in epsilon), each
cluster of X at cell u lands inside one cluster of X_delta at cell u + shift
(phi), and symmetrically (psi).  We build both families and check, as exact
equalities of assignments and GF(2) matrices:

* phi commutes with the internal maps of both grids,
* psi commutes with the internal maps of both grids,
* psi o phi equals the transition u -> u + 2 shift of X,
* phi o psi equals the transition u -> u + 2 shift of X_delta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .filtration import (BiFiltrationGrid, CoverMap, FreeBorderObstruction, compose, compose_simplicial,
                         cover_map, induced_simplicial_map)
from .homology import GridHomology, HomologyMap, compose_homology, gf2_rank, induced_homology_map
from .pointcloud import Perturbation

IDENTITIES = ("phi_natural", "psi_natural", "psi_phi_round_trip", "phi_psi_round_trip")
_TOL = 1e-9


@dataclass
class InterleavingReport:
    delta: float
    k: int
    shift: tuple[int, int]
    identities: dict = field(default_factory=dict)
    phi: dict = field(default_factory=dict)
    psi: dict = field(default_factory=dict)
    phi_homology: dict = field(default_factory=dict)
    psi_homology: dict = field(default_factory=dict)
    transition_ranks: list = field(default_factory=list)
    cluster_counts: dict = field(default_factory=dict)
    homology_dims: dict = field(default_factory=dict)
    obstruction: FreeBorderObstruction | None = None
    obstruction_grid: str | None = None

    @property
    def verdict(self) -> bool:
        if self.obstruction is not None or not self.identities:
            return False
        return all(all(levels[lvl] for lvl in ("cover", "simplicial", "homology"))
                   for levels in self.identities.values())

    def to_dict(self) -> dict:
        def key(u):
            return f"{u[0]},{u[1]}"

        return {
            "delta": self.delta,
            "k": self.k,
            "shift": list(self.shift),
            "verdict": self.verdict,
            "identities": self.identities,
            "phi": {key(u): list(a) for u, a in sorted(self.phi.items())},
            "psi": {key(u): list(a) for u, a in sorted(self.psi.items())},
            "phi_homology": {key(u): m.tolist() for u, m in sorted(self.phi_homology.items())},
            "psi_homology": {key(u): m.tolist() for u, m in sorted(self.psi_homology.items())},
            "transition_ranks": self.transition_ranks,
            "cluster_counts": self.cluster_counts,
            "homology_dims": self.homology_dims,
            "obstruction": None if self.obstruction is None else {
                "grid": self.obstruction_grid, **self.obstruction.to_dict()},
        }


def check_alignment(grid_x: BiFiltrationGrid, grid_xd: BiFiltrationGrid, delta: float, shift=(1, 1)) -> None:
    """Raise unless one shift step grows bins by >= delta and epsilon by >= 2 delta."""
    if grid_x.shape != grid_xd.shape:
        raise ValueError("grids have different shapes")
    if grid_x.eps_values != grid_xd.eps_values:
        raise ValueError("grids have different epsilon axes")
    if [c.intervals for c in grid_x.interval_covers] != [c.intervals for c in grid_xd.interval_covers]:
        raise ValueError("grids must use the same interval covers")
    if shift[0] < 0 or shift[1] < 0:
        raise ValueError("shift must be nonnegative")
    ni, nj = grid_x.shape
    slack = _TOL * max(1.0, abs(delta))
    for i in range(ni - shift[0]):
        a, b = grid_x.interval_covers[i], grid_x.interval_covers[i + shift[0]]
        for (alo, ahi), (blo, bhi) in zip(a.intervals, b.intervals):
            if blo > alo - delta + slack * max(1.0, abs(alo)) or bhi < ahi + delta - slack * max(1.0, abs(ahi)):
                raise ValueError(f"bin level {i} -> {i + shift[0]} grows by less than delta")
    for j in range(nj - shift[1]):
        e0, e1 = grid_x.eps_values[j], grid_x.eps_values[j + shift[1]]
        if e1 - e0 < 2 * delta - slack * max(1.0, e1):
            raise ValueError(f"epsilon level {j} -> {j + shift[1]} grows by less than 2*delta")


def _cells(shape):
    ni, nj = shape
    return [(i, j) for i in range(ni) for j in range(nj)]


def _add(u, v):
    return (u[0] + v[0], u[1] + v[1])


def _inside(u, shape):
    return 0 <= u[0] < shape[0] and 0 <= u[1] < shape[1]


def verify_interleaving(grid_x: BiFiltrationGrid, grid_xd: BiFiltrationGrid, perturbation: Perturbation,
                        delta: float, k: int = 1, shift=(1, 1)) -> InterleavingReport:
    shift = tuple(int(s) for s in shift)
    check_alignment(grid_x, grid_xd, delta, shift)
    if any(perturbation(i) != i for i in range(len(perturbation.correspondence))):
        raise ValueError("only index-preserving correspondences are supported")
    report = InterleavingReport(float(delta), k, shift)
    report.cluster_counts = {"X": grid_x.cluster_counts(), "X_delta": grid_xd.cluster_counts()}
    for name, g in (("X", grid_x), ("X_delta", grid_xd)):
        if not g.ok:
            report.obstruction, report.obstruction_grid = g.obstruction, name
            return report

    shape = grid_x.shape
    phi: dict = {}
    psi: dict = {}
    for u in _cells(shape):
        v = _add(u, shift)
        if not _inside(v, shape):
            continue
        for store, src, dst, direction, name in ((phi, grid_x, grid_xd, "perturb-phi", "phi"),
                                                 (psi, grid_xd, grid_x, "perturb-psi", "psi")):
            m = cover_map(src.covers[u[0]][u[1]], dst.covers[v[0]][v[1]], direction)
            if isinstance(m, FreeBorderObstruction):
                report.obstruction, report.obstruction_grid = m.at(v), name
                return report
            store[u] = m
    report.phi = {u: m.assignment for u, m in phi.items()}
    report.psi = {u: m.assignment for u, m in psi.items()}

    def smap(m: CoverMap, src_grid, u, dst_grid, v):
        return induced_simplicial_map(m, src_grid.complexes[u[0]][u[1]], dst_grid.complexes[v[0]][v[1]])

    hx, hxd = GridHomology(grid_x, k), GridHomology(grid_xd, k)
    report.homology_dims = {"X": hx.dims(), "X_delta": hxd.dims()}
    phi_s = {u: smap(m, grid_x, u, grid_xd, _add(u, shift)) for u, m in phi.items()}
    psi_s = {u: smap(m, grid_xd, u, grid_x, _add(u, shift)) for u, m in psi.items()}
    phi_h = {u: induced_homology_map(s, hx.bases[u], hxd.bases[_add(u, shift)]) for u, s in phi_s.items()}
    psi_h = {u: induced_homology_map(s, hxd.bases[u], hx.bases[_add(u, shift)]) for u, s in psi_s.items()}
    report.phi_homology = {u: h.matrix for u, h in phi_h.items()}
    report.psi_homology = {u: h.matrix for u, h in psi_h.items()}

    def eq_h(a: HomologyMap, b: HomologyMap) -> bool:
        return a.matrix.shape == b.matrix.shape and np.array_equal(a.matrix, b.matrix)

    def smap_of(grid, u, v):
        # simplicial transition along the same right-then-up staircase as the cover maps
        (i0, j0), (i1, j1) = u, v
        path = [grid.right_smaps[(i, j0)] for i in range(i0, i1)] + [grid.up_smaps[(i1, j)] for j in range(j0, j1)]
        if not path:
            return None
        s = path[0]
        for nxt in path[1:]:
            s = compose_simplicial(s, nxt)
        return s

    def natural(name, fam, fam_s, fam_h, src, src_h, dst, dst_h):
        stats = {"cover": True, "simplicial": True, "homology": True, "checked": 0}
        for u in fam:
            for e in ((1, 0), (0, 1)):
                ue, vs = _add(u, e), _add(_add(u, shift), e)
                if ue not in fam or not _inside(vs, shape):
                    continue
                internal_src = src.transition(u, ue)
                internal_dst = dst.transition(_add(u, shift), vs)
                left = compose(internal_src, fam[ue])
                right = compose(fam[u], internal_dst)
                stats["cover"] &= left.assignment == right.assignment
                ls = compose_simplicial(smap_of(src, u, ue), fam_s[ue])
                rs = compose_simplicial(fam_s[u], smap_of(dst, _add(u, shift), vs))
                stats["simplicial"] &= ls.vertex_map == rs.vertex_map
                lh = compose_homology(src_h.transition(u, ue), fam_h[ue])
                rh = compose_homology(fam_h[u], dst_h.transition(_add(u, shift), vs))
                stats["homology"] &= eq_h(lh, rh)
                stats["checked"] += 1
        report.identities[name] = stats

    def round_trip(name, first, first_s, first_h, second, second_s, second_h, home, home_h):
        stats = {"cover": True, "simplicial": True, "homology": True, "checked": 0}
        two = _add(shift, shift)
        for u in first:
            mid, end = _add(u, shift), _add(u, two)
            if mid not in second or not _inside(end, shape):
                continue
            trans = home.transition(u, end)
            via = compose(first[u], second[mid])
            stats["cover"] &= trans.assignment == via.assignment
            ts = smap_of(home, u, end)
            vs = compose_simplicial(first_s[u], second_s[mid])
            stats["simplicial"] &= (ts.vertex_map if ts else tuple(range(len(via.assignment)))) == vs.vertex_map
            th = home_h.transition(u, end)
            vh = compose_homology(first_h[u], second_h[mid])
            ok = eq_h(th, vh)
            stats["homology"] &= ok
            stats["checked"] += 1
            report.transition_ranks.append({"identity": name, "cell": list(u), "transition_rank": th.rank,
                                            "composed_rank": gf2_rank(vh.matrix)})
        report.identities[name] = stats

    natural("phi_natural", phi, phi_s, phi_h, grid_x, hx, grid_xd, hxd)
    natural("psi_natural", psi, psi_s, psi_h, grid_xd, hxd, grid_x, hx)
    round_trip("psi_phi_round_trip", phi, phi_s, phi_h, psi, psi_s, psi_h, grid_x, hx)
    round_trip("phi_psi_round_trip", psi, psi_s, psi_h, phi, phi_s, phi_h, grid_xd, hxd)
    return report
