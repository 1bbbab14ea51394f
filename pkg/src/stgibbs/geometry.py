"""Spatio-temporal points, observation windows, and distance operations.

A point lives in R^2 x R (two spatial coordinates plus a time coordinate).
Closeness between points is always judged cylindrically: a point is within
scale (r, q) of another when the planar Euclidean distance is <= r AND the
absolute time separation is <= q. Both comparisons are closed, so points on
the cylinder boundary count as neighbors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import _kernels
from .errors import ConfigError, DataError

# Pairwise scans switch from the direct O(n^2) kernel to a cell-list sweep
# above this size, provided the distance caps are finite.
GRID_INDEX_THRESHOLD = 2000


@dataclass(frozen=True)
class STPoint:
    """A single spatio-temporal point (x, y, t)."""

    x: float
    y: float
    t: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "t"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DataError(f"point coordinate {name} is not finite: {v!r}")


class DistancePair(NamedTuple):
    """Cylindrical distance between pattern points i and j (i < j)."""

    ds: float
    dt: float
    i: int
    j: int


@dataclass(frozen=True, eq=False)
class STWindow:
    """A rectangular spatio-temporal observation window with an optional mask.

    The spatial domain is the rectangle [x0, x1] x [y0, y1], optionally
    restricted to the cells of a boolean raster ``mask`` (row index = y,
    column index = x, covering the rectangle exactly). The temporal domain
    is the interval [t0, t1].
    """

    x0: float
    x1: float
    y0: float
    y1: float
    t0: float
    t1: float
    mask: np.ndarray | None = None

    def __post_init__(self) -> None:
        for lo, hi, axis in (
            (self.x0, self.x1, "x"),
            (self.y0, self.y1, "y"),
            (self.t0, self.t1, "t"),
        ):
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ConfigError(f"window {axis} bounds must be finite")
            if not lo < hi:
                raise ConfigError(f"window {axis} bounds must satisfy {axis}0 < {axis}1")
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=bool)
            if m.ndim != 2 or m.size == 0:
                raise ConfigError("window mask must be a non-empty 2d boolean raster")
            if not m.any():
                raise ConfigError("window mask has no active cells")
            object.__setattr__(self, "mask", m)

    @property
    def bounding_area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def spatial_area(self) -> float:
        """Area of the spatial domain, mask-corrected when a mask is present."""
        if self.mask is None:
            return self.bounding_area
        frac = float(np.count_nonzero(self.mask)) / self.mask.size
        return self.bounding_area * frac

    @property
    def duration(self) -> float:
        return self.t1 - self.t0

    @property
    def volume(self) -> float:
        """Spatio-temporal volume |W| = spatial area x duration."""
        return self.spatial_area * self.duration

    def mask_values(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Boolean mask membership of (xs, ys), assuming points in the bounding box."""
        if self.mask is None:
            return np.ones(np.shape(xs), dtype=bool)
        ny, nx = self.mask.shape
        # Same cell mapping as the simulation kernel: divide by the cell
        # width rather than multiplying by nx, so boundary rounding agrees.
        mdx = (self.x1 - self.x0) / nx
        mdy = (self.y1 - self.y0) / ny
        ix = np.clip(((np.asarray(xs) - self.x0) / mdx).astype(np.int64), 0, nx - 1)
        iy = np.clip(((np.asarray(ys) - self.y0) / mdy).astype(np.int64), 0, ny - 1)
        return self.mask[iy, ix]

    def contains(self, xs, ys, ts) -> np.ndarray:
        """Elementwise containment test (bounding box, mask, and time interval)."""
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        ts = np.asarray(ts, dtype=np.float64)
        inside = (
            (xs >= self.x0)
            & (xs <= self.x1)
            & (ys >= self.y0)
            & (ys <= self.y1)
            & (ts >= self.t0)
            & (ts <= self.t1)
        )
        if self.mask is not None:
            inside &= self.mask_values(xs, ys)
        return inside


def unit_cube() -> STWindow:
    """The unit observation window [0,1] x [0,1] x [0,1]."""
    return STWindow(0.0, 1.0, 0.0, 1.0, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class PointPattern:
    """A simple point pattern inside an observation window.

    Stored as aligned coordinate arrays. Construction validates that all
    points lie in the window and that no two points coincide exactly
    (patterns are simple).
    """

    xs: np.ndarray
    ys: np.ndarray
    ts: np.ndarray
    window: STWindow

    def __post_init__(self) -> None:
        xs = np.ascontiguousarray(self.xs, dtype=np.float64)
        ys = np.ascontiguousarray(self.ys, dtype=np.float64)
        ts = np.ascontiguousarray(self.ts, dtype=np.float64)
        if not (xs.ndim == ys.ndim == ts.ndim == 1):
            raise DataError("pattern coordinates must be 1d arrays")
        if not (xs.shape == ys.shape == ts.shape):
            raise DataError("pattern coordinate arrays must have equal length")
        if xs.size and not (
            np.all(np.isfinite(xs)) and np.all(np.isfinite(ys)) and np.all(np.isfinite(ts))
        ):
            raise DataError("pattern coordinates must be finite")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "ts", ts)
        inside = self.window.contains(xs, ys, ts)
        if not bool(np.all(inside)):
            bad = np.nonzero(~inside)[0]
            raise DataError(
                f"{bad.size} point(s) outside the observation window "
                f"(first offending index {bad[0]})"
            )
        if xs.size > 1:
            order = np.lexsort((ts, ys, xs))
            sx, sy, st = xs[order], ys[order], ts[order]
            dup = (sx[1:] == sx[:-1]) & (sy[1:] == sy[:-1]) & (st[1:] == st[:-1])
            if bool(np.any(dup)):
                k = int(np.nonzero(dup)[0][0])
                raise DataError(
                    "pattern is not simple: duplicate point "
                    f"({sx[k]!r}, {sy[k]!r}, {st[k]!r})"
                )

    @classmethod
    def from_points(cls, points: Iterable[STPoint], window: STWindow) -> "PointPattern":
        pts = list(points)
        xs = np.array([p.x for p in pts], dtype=np.float64)
        ys = np.array([p.y for p in pts], dtype=np.float64)
        ts = np.array([p.t for p in pts], dtype=np.float64)
        return cls(xs, ys, ts, window)

    @classmethod
    def empty(cls, window: STWindow) -> "PointPattern":
        z = np.empty(0, dtype=np.float64)
        return cls(z, z.copy(), z.copy(), window)

    def __len__(self) -> int:
        return int(self.xs.shape[0])

    def point(self, i: int) -> STPoint:
        return STPoint(float(self.xs[i]), float(self.ys[i]), float(self.ts[i]))

    def points(self) -> list[STPoint]:
        return [self.point(i) for i in range(len(self))]


def cyl_distance(a: STPoint, b: STPoint) -> tuple[float, float]:
    """Spatial distance and absolute time separation between two points."""
    ds = math.hypot(a.x - b.x, a.y - b.y)
    dt = abs(a.t - b.t)
    return ds, dt


def _validate_scale(r: float, q: float) -> None:
    if not (r >= 0.0 and q >= 0.0 and math.isfinite(r) and math.isfinite(q)):
        raise ConfigError(f"cylinder scale must be finite and non-negative, got ({r}, {q})")


def neighbor_count(
    center: STPoint,
    pattern: PointPattern,
    r: float,
    q: float,
    exclude_center: bool = False,
) -> int:
    """Number of pattern points within the closed cylinder of scale (r, q).

    With ``exclude_center=True``, pattern points exactly coinciding with the
    center are not counted; use this when the center is a member of the
    pattern itself.
    """
    _validate_scale(r, q)
    r2s = np.array([r * r], dtype=np.float64)
    qs = np.array([q], dtype=np.float64)
    _, counts = _kernels.point_stats(
        pattern.xs, pattern.ys, pattern.ts,
        center.x, center.y, center.t,
        r2s, qs, -1.0, 0.0, bool(exclude_center),
    )
    return int(counts[0])


def _cell_pairs(xs, ys, ts, ds_max, dt_max):
    """Cell-list close-pair enumeration; same output as the direct kernel.

    Bins points into boxes of edge (ds_max, ds_max, dt_max) so only the 27
    neighboring boxes need scanning. Falls back to exact cylinder tests
    within candidate sets. Results are re-sorted to the (i, j) order the
    direct kernel produces.
    """
    n = xs.shape[0]
    cx = np.floor((xs - xs.min()) / ds_max).astype(np.int64)
    cy = np.floor((ys - ys.min()) / ds_max).astype(np.int64)
    ct = np.floor((ts - ts.min()) / dt_max).astype(np.int64)
    keys = {}
    for idx in range(n):
        keys.setdefault((int(cx[idx]), int(cy[idx]), int(ct[idx])), []).append(idx)
    cells = {k: np.asarray(v, dtype=np.int64) for k, v in keys.items()}
    ds2_max = ds_max * ds_max
    ii_parts, jj_parts, ds_parts, dt_parts = [], [], [], []
    offsets = [
        (ox, oy, ot)
        for ox in (-1, 0, 1)
        for oy in (-1, 0, 1)
        for ot in (-1, 0, 1)
    ]
    for key, members in cells.items():
        cand_parts = []
        for ox, oy, ot in offsets:
            other = cells.get((key[0] + ox, key[1] + oy, key[2] + ot))
            if other is not None:
                cand_parts.append(other)
        cand = np.concatenate(cand_parts)
        for i in members:
            js = cand[cand > i]
            if js.size == 0:
                continue
            dx = xs[js] - xs[i]
            dy = ys[js] - ys[i]
            ds2 = dx * dx + dy * dy
            adt = np.abs(ts[js] - ts[i])
            sel = (ds2 <= ds2_max) & (adt <= dt_max)
            if np.any(sel):
                js_sel = js[sel]
                ii_parts.append(np.full(js_sel.size, i, dtype=np.int64))
                jj_parts.append(js_sel)
                ds_parts.append(np.sqrt(ds2[sel]))
                dt_parts.append(adt[sel])
    if not ii_parts:
        e_i = np.empty(0, dtype=np.int64)
        e_f = np.empty(0, dtype=np.float64)
        return e_i, e_i.copy(), e_f, e_f.copy()
    ii = np.concatenate(ii_parts)
    jj = np.concatenate(jj_parts)
    ds = np.concatenate(ds_parts)
    dt = np.concatenate(dt_parts)
    order = np.lexsort((jj, ii))
    return ii[order], jj[order], ds[order], dt[order]


def _pairs_arrays(pattern: PointPattern, ds_max: float, dt_max: float):
    n = len(pattern)
    use_cells = (
        n > GRID_INDEX_THRESHOLD
        and math.isfinite(ds_max)
        and math.isfinite(dt_max)
        and ds_max > 0.0
        and dt_max > 0.0
    )
    if use_cells:
        return _cell_pairs(pattern.xs, pattern.ys, pattern.ts, ds_max, dt_max)
    return _kernels.pairs_within(pattern.xs, pattern.ys, pattern.ts, ds_max, dt_max)


def close_pair_count(pattern: PointPattern, r: float, q: float) -> int:
    """Number of unordered point pairs with ds <= r and dt <= q."""
    _validate_scale(r, q)
    n = len(pattern)
    if n > GRID_INDEX_THRESHOLD and r > 0.0 and q > 0.0:
        ii, _, _, _ = _cell_pairs(pattern.xs, pattern.ys, pattern.ts, r, q)
        return int(ii.shape[0])
    return int(_kernels.close_pair_count(pattern.xs, pattern.ys, pattern.ts, r, q))


def interpoint_distance_pairs(
    pattern: PointPattern,
    ds_max: float = math.inf,
    dt_max: float = math.inf,
) -> list[DistancePair]:
    """All unordered pairs with ds <= ds_max and dt <= dt_max, ordered by (i, j)."""
    if ds_max < 0 or dt_max < 0:
        raise ConfigError("distance caps must be non-negative")
    ii, jj, ds, dt = _pairs_arrays(pattern, ds_max, dt_max)
    return [
        DistancePair(float(ds[k]), float(dt[k]), int(ii[k]), int(jj[k]))
        for k in range(ii.shape[0])
    ]
