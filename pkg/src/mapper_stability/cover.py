"""Interval covers of the filter line and their pullback bins."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pointcloud import FilterAssignment, OrderedPointCloud

LAYOUTS = ("centered", "tdamapper")


@dataclass(frozen=True)
class IntervalCover:
    """Closed intervals ``[lo, hi]`` covering ``[anchor[0], anchor[1]]``.

    ``layout="centered"`` keeps interval centres fixed at
    ``min + (k + 1/2) * range / n`` and widens the intervals as the overlap
    grows; ``layout="tdamapper"`` reproduces the R TDAmapper placement, where
    the first interval starts at the minimum and
    ``L = range / (n - (n - 1) * overlap)``.  Both give nested intervals when
    the overlap increases.  ``growth`` is an extra symmetric widening applied
    on top (used for the bin_delta construction).
    """

    intervals: tuple[tuple[float, float], ...]
    num_intervals: int
    percent_overlap: float
    anchor: tuple[float, float]
    layout: str = "centered"
    growth: float = 0.0

    @property
    def label(self) -> float:
        return self.percent_overlap if self.growth == 0 else self.growth

    def contains(self, k: int, value: float) -> bool:
        lo, hi = self.intervals[k]
        return lo <= value <= hi

    def to_dict(self) -> dict:
        return {
            "num_intervals": self.num_intervals,
            "percent_overlap": self.percent_overlap,
            "growth": self.growth,
            "layout": self.layout,
            "anchor": list(self.anchor),
            "intervals": [list(iv) for iv in self.intervals],
        }


def _layout_intervals(lo, hi, n, frac, layout):
    rng = hi - lo
    # endpoints are written as grid point +/- extension so that neighbours share
    # the exact same float when the overlap is zero
    if layout == "centered":
        spacing = rng / n
        ext = (spacing / (1.0 - frac) - spacing) / 2
        out = [[(lo + k * spacing) - ext, (lo + (k + 1) * spacing) + ext] for k in range(n)]
    elif layout == "tdamapper":
        length = rng / (n - (n - 1) * frac)
        step = length * (1.0 - frac)
        out = [[lo + k * step, lo + (k + 1) * step + (length - step)] for k in range(n)]
        # the outer ends are exactly the anchor; rounding must not push them past it
        out[0][0], out[-1][1] = lo, hi
    else:
        raise ValueError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")
    # and they must reach it
    out[0][0] = min(out[0][0], lo)
    out[-1][1] = max(out[-1][1], hi)
    return tuple((float(a), float(b)) for a, b in out)


def build_interval_cover(filt: FilterAssignment | tuple[float, float], num_intervals: int,
                         percent_overlap: float, layout: str = "centered") -> IntervalCover:
    """Equal-length cover of the filter range with the given percent overlap.

    ``filt`` may also be an explicit ``(min, max)`` anchor so that a second
    dataset can reuse the first dataset's intervals.
    """
    if num_intervals < 1:
        raise ValueError("num_intervals must be >= 1")
    if not 0 <= percent_overlap < 100:
        raise ValueError("percent_overlap must be in [0, 100)")
    if isinstance(filt, FilterAssignment):
        lo, hi = filt.range
    else:
        lo, hi = (float(filt[0]), float(filt[1]))
        if hi < lo:
            raise ValueError("anchor must satisfy min <= max")
    intervals = _layout_intervals(lo, hi, num_intervals, percent_overlap / 100.0, layout)
    return IntervalCover(intervals, num_intervals, float(percent_overlap), (lo, hi), layout)


def interval_growth_for_delta(cover: IntervalCover, delta: float) -> IntervalCover:
    """Extend every interval by ``delta`` on both ends (centres preserved)."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if delta == 0:
        return cover
    grown = tuple((lo - delta, hi + delta) for lo, hi in cover.intervals)
    return IntervalCover(grown, cover.num_intervals, cover.percent_overlap, cover.anchor,
                         cover.layout, cover.growth + delta)


@dataclass(frozen=True)
class PullbackCover:
    bins: tuple[tuple[int, ...], ...]
    cover: IntervalCover
    cloud_digest: str = field(default="", repr=False)

    def __len__(self) -> int:
        return len(self.bins)


def pullback(cloud: OrderedPointCloud, filt: FilterAssignment, cover: IntervalCover) -> PullbackCover:
    if len(filt) != len(cloud):
        raise ValueError("filter does not match cloud size")
    v = filt.values
    bins = []
    for lo, hi in cover.intervals:
        bins.append(tuple(int(i) for i in np.nonzero((v >= lo) & (v <= hi))[0]))
    return PullbackCover(tuple(bins), cover, cloud.digest)


@dataclass(frozen=True)
class CoverOrderWitness:
    pairs: tuple[tuple[int, bool], ...]
    verdict: bool


def check_cover_refinement(a: IntervalCover, b: IntervalCover) -> CoverOrderWitness:
    """Does ``a`` refine ``b`` index by index (I_k subset of J_k for every k)?"""
    if a.num_intervals != b.num_intervals:
        raise ValueError("covers have different numbers of intervals; no index-preserving map")
    if a.anchor != b.anchor:
        raise ValueError("covers are anchored on different filter ranges")
    pairs = tuple((k, bool(jl <= il and ih <= jh))
                  for k, ((il, ih), (jl, jh)) in enumerate(zip(a.intervals, b.intervals)))
    return CoverOrderWitness(pairs, all(ok for _, ok in pairs))
