"""End-to-end stability experiments: perturb, build aligned grids, verify."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .cover import build_interval_cover, interval_growth_for_delta
from .filtration import BiFiltrationGrid, build_grid
from .interleaving import InterleavingReport, verify_interleaving
from .pointcloud import OrderedPointCloud, Perturbation, eval_filter, perturb

__all__ = ["StabilityExperiment", "StabilityResult", "run_stability", "interval_growth_for_delta",
           "load_experiment"]


@dataclass(frozen=True)
class StabilityExperiment:
    intervals: int = 3
    overlap: float = 30.0
    epsilon: float = 0.5
    min_pts: int = 2
    dim_cap: int = 2
    k: int = 1
    delta: float = 0.05
    k_max: int = 2
    l_max: int = 2
    seed: int = 0
    axis: int = 0
    layout: str = "centered"
    bin_step: float | None = None
    eps_step: float | None = None
    lipschitz: float = 1.0

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.k_max < 0 or self.l_max < 0:
            raise ValueError("grid extents must be >= 0")
        if self.bin_step is not None and self.bin_step < self.lipschitz * self.delta:
            raise ValueError("bin_step must be at least lipschitz * delta")
        if self.eps_step is not None and self.eps_step < 2 * self.delta:
            raise ValueError("eps_step must be at least 2 * delta")

    @property
    def resolved_bin_step(self) -> float:
        return 2 * self.delta * max(self.lipschitz, 1.0) if self.bin_step is None else self.bin_step

    @property
    def resolved_eps_step(self) -> float:
        return 2 * self.delta if self.eps_step is None else self.eps_step

    def eps_values(self) -> list[float]:
        return [self.epsilon + j * self.resolved_eps_step for j in range(self.l_max + 1)]

    def growths(self) -> list[float]:
        return [i * self.resolved_bin_step for i in range(self.k_max + 1)]


def load_experiment(path: str | Path) -> StabilityExperiment:
    """Read an experiment from JSON or ``key = value`` lines."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError:
        raw = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            raw[key] = value
    types = {f.name: f.type for f in fields(StabilityExperiment)}
    parsed = {}
    for key, value in raw.items():
        if key not in types:
            raise ValueError(f"unknown experiment field {key!r}")
        if value is None or value == "None":
            parsed[key] = None
        elif key == "layout":
            parsed[key] = str(value)
        elif key in ("intervals", "min_pts", "dim_cap", "k", "k_max", "l_max", "seed", "axis"):
            parsed[key] = int(value)
        else:
            parsed[key] = float(value)
    return StabilityExperiment(**parsed)


@dataclass
class StabilityResult:
    experiment: StabilityExperiment
    perturbed: OrderedPointCloud
    perturbation: Perturbation
    grid_x: BiFiltrationGrid
    grid_xd: BiFiltrationGrid
    report: InterleavingReport
    bin_capture: bool

    def to_dict(self) -> dict:
        return {"experiment": asdict(self.experiment), "bin_capture": self.bin_capture,
                "report": self.report.to_dict()}


def _bin_capture(fx, fxd, covers, step_shift) -> bool:
    """x in bin k at level i implies its moved copy is in bin k at level i + shift."""
    for i in range(len(covers) - step_shift):
        for (lo, hi), (glo, ghi) in zip(covers[i].intervals, covers[i + step_shift].intervals):
            inside = (fx >= lo) & (fx <= hi)
            if np.any(inside & ((fxd < glo) | (fxd > ghi))):
                return False
    return True


def run_stability(cloud: OrderedPointCloud, exp: StabilityExperiment,
                  perturbed: OrderedPointCloud | None = None,
                  perturbation: Perturbation | None = None) -> StabilityResult:
    """Build grids for X and X_delta and verify the interleaving.

    Pass ``perturbed``/``perturbation`` to use a hand-built perturbation;
    otherwise one is sampled from ``exp.seed``.
    """
    if perturbed is None:
        perturbed, perturbation = perturb(cloud, exp.delta, exp.seed)
    elif perturbation is None:
        raise ValueError("an explicit perturbed cloud needs its Perturbation")
    fx = eval_filter(cloud, exp.axis)
    fxd = eval_filter(perturbed, exp.axis)
    base = build_interval_cover(fx, exp.intervals, exp.overlap, exp.layout)
    covers = [interval_growth_for_delta(base, g) for g in exp.growths()]
    eps = exp.eps_values()
    labels = exp.growths()
    grid_x = build_grid(cloud, fx, covers, eps, exp.min_pts, exp.dim_cap, labels)
    grid_xd = build_grid(perturbed, fxd, covers, eps, exp.min_pts, exp.dim_cap, labels)
    report = verify_interleaving(grid_x, grid_xd, perturbation, exp.delta, exp.k)
    capture = _bin_capture(fx.values, fxd.values, covers, 1) and _bin_capture(fxd.values, fx.values, covers, 1)
    return StabilityResult(exp, perturbed, perturbation, grid_x, grid_xd, report, capture)
