"""Serialization helpers: deterministic JSON, rank and diagram CSVs, firep text."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from .homology import GridHomology, RankInvariant


def _clean(obj):
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _clean(obj.tolist())
    return obj


def dumps(obj) -> str:
    """Stable JSON text (sorted keys, trailing newline)."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def write_json(path: Path, obj) -> None:
    Path(path).write_text(dumps(obj))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def tower_ranks_csv(ranks: dict) -> str:
    rows = [(a, b, r) for (a, b), r in sorted(ranks.items())]
    return _csv_text(["a", "b", "rank"], rows)


def grid_ranks_csv(ri: RankInvariant) -> str:
    rows = [(u[0], u[1], v[0], v[1], r) for (u, v), r in sorted(ri.ranks.items())]
    return _csv_text(["a_bin", "a_eps", "b_bin", "b_eps", "rank"], rows)


def diagram_csv(diagram) -> str:
    rows = [(b, "inf" if math.isinf(d) else d) for b, d in diagram]
    return _csv_text(["birth", "death"], rows)


def firep(gh: GridHomology, x_label: str = "bin", y_label: str = "epsilon") -> str:
    """Free presentation of the homology module over the grid.

    Every basis class at cell u is a generator graded at u.  Every grid edge
    u -> w and class g at u gives the relation g - M(u -> w) g, graded at w.
    The result presents the module, though not minimally.
    """
    grid = gh.grid
    ni, nj = grid.shape
    gen_index = {}
    gens = []
    for i in range(ni):
        for j in range(nj):
            for c in range(gh.bases[(i, j)].dimension):
                gen_index[(i, j, c)] = len(gens)
                gens.append((i, j))
    rels = []
    for edges, step in ((gh.right, (1, 0)), (gh.up, (0, 1))):
        for u, hm in sorted(edges.items()):
            w = (u[0] + step[0], u[1] + step[1])
            for c in range(hm.matrix.shape[1]):
                terms = [gen_index[(u[0], u[1], c)]]
                terms += [gen_index[(w[0], w[1], r)] for r in range(hm.matrix.shape[0]) if hm.matrix[r, c]]
                rels.append((w, sorted(terms)))
    rels.sort()

    def grade(cell):
        return f"{grid.bin_labels[cell[0]]!r} {grid.eps_values[cell[1]]!r}"

    lines = ["firep", x_label, y_label, f"{len(rels)} {len(gens)} 0"]
    lines += [f"{grade(w)} ; {' '.join(map(str, terms))}" for w, terms in rels]
    lines += [f"{grade(u)} ;" for u in gens]
    return "\n".join(lines) + "\n"
