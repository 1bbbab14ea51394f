"""Gibbs model specification and pointwise model evaluations.

A model has a log-linear trend (first-order term), a hard core that forbids
pairs closer than (hs, ht) cylindrically, and any number of pairwise
interaction components. Component j contributes gamma_j once for every
pattern point inside the closed cylinder of scale (r_j, q_j) around the
evaluation point, optionally capped at a saturation level.

The conditional intensity of point u given pattern x is

    lambda(u | x) = trend(u) * hard(u, x) * prod_j gamma_j ** S_j(u, x)

with S_j the (possibly saturated) neighbor count excluding u itself, and
hard() the 0/1 hardcore indicator. The unnormalised density multiplies the
trend over all points and gamma_j once per close pair at scale j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

from . import _kernels
from .errors import ConfigError, DataError, NumericalError
from .geometry import PointPattern, STPoint, STWindow


@dataclass(frozen=True)
class GridGeometry:
    """Uniform raster geometry: origin, cell sizes, and cell counts."""

    x0: float
    y0: float
    dx: float
    dy: float
    nx: int
    ny: int

    def __post_init__(self) -> None:
        if self.nx < 1 or self.ny < 1:
            raise ConfigError("raster must have at least one cell per axis")
        if not (self.dx > 0 and self.dy > 0):
            raise ConfigError("raster cell sizes must be positive")

    @property
    def x1(self) -> float:
        return self.x0 + self.dx * self.nx

    @property
    def y1(self) -> float:
        return self.y0 + self.dy * self.ny

    def covers(self, window: STWindow, tol: float = 1e-9) -> bool:
        return (
            self.x0 <= window.x0 + tol
            and self.x1 >= window.x1 - tol
            and self.y0 <= window.y0 + tol
            and self.y1 >= window.y1 - tol
        )

    def cell_indices(self, xs, ys) -> tuple[np.ndarray, np.ndarray]:
        """Nearest-cell (row, column) indices, clipped to the raster."""
        ix = np.clip(
            ((np.asarray(xs, dtype=np.float64) - self.x0) / self.dx).astype(np.int64),
            0,
            self.nx - 1,
        )
        iy = np.clip(
            ((np.asarray(ys, dtype=np.float64) - self.y0) / self.dy).astype(np.int64),
            0,
            self.ny - 1,
        )
        return iy, ix


@dataclass(frozen=True, eq=False)
class CovariateStack:
    """Named covariate rasters on a shared grid.

    ``spatial`` maps names to (ny, nx) arrays; ``spatiotemporal`` maps names
    to (nt, ny, nx) arrays whose leading axis samples times ``t0 + k*t_step``
    (nearest-slice lookup in time).
    """

    geometry: GridGeometry
    spatial: Mapping[str, np.ndarray] = field(default_factory=dict)
    spatiotemporal: Mapping[str, np.ndarray] = field(default_factory=dict)
    t0: float = 0.0
    t_step: float = 1.0

    def __post_init__(self) -> None:
        if self.t_step <= 0:
            raise ConfigError("covariate time step must be positive")
        shape2 = (self.geometry.ny, self.geometry.nx)
        nt = None
        spatial = {}
        for name, arr in self.spatial.items():
            a = np.asarray(arr, dtype=np.float64)
            if a.shape != shape2:
                raise DataError(
                    f"covariate {name!r} has shape {a.shape}, expected {shape2}"
                )
            if not np.all(np.isfinite(a)):
                raise DataError(f"covariate {name!r} contains non-finite values")
            spatial[name] = a
        st = {}
        for name, arr in self.spatiotemporal.items():
            a = np.asarray(arr, dtype=np.float64)
            if a.ndim != 3 or a.shape[1:] != shape2:
                raise DataError(
                    f"covariate {name!r} has shape {a.shape}, expected (nt,) + {shape2}"
                )
            if nt is None:
                nt = a.shape[0]
            elif a.shape[0] != nt:
                raise DataError(
                    f"covariate {name!r} has {a.shape[0]} time slices, expected {nt}"
                )
            if not np.all(np.isfinite(a)):
                raise DataError(f"covariate {name!r} contains non-finite values")
            st[name] = a
        object.__setattr__(self, "spatial", spatial)
        object.__setattr__(self, "spatiotemporal", st)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.spatial) + tuple(self.spatiotemporal)

    @property
    def nt(self) -> int:
        for a in self.spatiotemporal.values():
            return a.shape[0]
        return 1

    def time_indices(self, ts) -> np.ndarray:
        it = ((np.asarray(ts, dtype=np.float64) - self.t0) / self.t_step).astype(np.int64)
        return np.clip(it, 0, self.nt - 1)

    def value_matrix(self, names: tuple[str, ...], xs, ys, ts) -> np.ndarray:
        """Covariate values at points, one column per requested name."""
        iy, ix = self.geometry.cell_indices(xs, ys)
        it = self.time_indices(ts)
        cols = []
        for name in names:
            if name in self.spatial:
                cols.append(self.spatial[name][iy, ix])
            elif name in self.spatiotemporal:
                cols.append(self.spatiotemporal[name][it, iy, ix])
            else:
                raise ConfigError(f"unknown covariate {name!r}")
        if not cols:
            return np.empty((np.shape(np.asarray(xs))[0], 0), dtype=np.float64)
        return np.stack(cols, axis=1)


@dataclass(frozen=True, eq=False)
class TrendModel:
    """Log-linear first-order trend.

    log trend(x, y, t) = beta0 + sum_c beta[c] * covariate_c(x, y, t)
                         + alpha * t

    A trend with no covariates and alpha = 0 is homogeneous with rate
    exp(beta0).
    """

    beta0: float = 0.0
    beta: Mapping[str, float] = field(default_factory=dict)
    alpha: float = 0.0
    covariates: CovariateStack | None = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.beta0) or not math.isfinite(self.alpha):
            raise ConfigError("trend coefficients must be finite")
        object.__setattr__(self, "beta", dict(self.beta))
        for name, b in self.beta.items():
            if not math.isfinite(b):
                raise ConfigError(f"trend coefficient for {name!r} must be finite")
        if self.beta and self.covariates is None:
            raise ConfigError("trend references covariates but no covariate stack given")
        if self.covariates is not None:
            missing = [n for n in self.beta if n not in self.covariates.names]
            if missing:
                raise ConfigError(f"trend references unknown covariates: {missing}")

    @property
    def homogeneous(self) -> bool:
        return not self.beta and self.alpha == 0.0

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.beta)


def homogeneous_trend(rate: float) -> TrendModel:
    """Constant-rate trend with intensity ``rate``."""
    if not (rate > 0 and math.isfinite(rate)):
        raise ConfigError("homogeneous rate must be positive and finite")
    return TrendModel(beta0=math.log(rate))


@dataclass(frozen=True)
class InteractionComponent:
    """One pairwise interaction scale: weight gamma on cylinder (r, q)."""

    gamma: float
    r: float
    q: float
    saturation: float | None = None

    def __post_init__(self) -> None:
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ConfigError(f"interaction weight must be positive and finite, got {self.gamma}")
        if not (self.r > 0 and self.q > 0 and math.isfinite(self.r) and math.isfinite(self.q)):
            raise ConfigError("interaction radii must be positive and finite")
        if self.saturation is not None and not (self.saturation >= 0):
            raise ConfigError("saturation level must be non-negative")


@dataclass(frozen=True, eq=False)
class TrendField:
    """Evaluation-ready trend: a log-intensity raster plus a linear time term.

    ``log_values`` has shape (nt, ny, nx); lookups are nearest-cell on each
    axis with clipping, then ``alpha * t`` is added. A homogeneous trend is
    the degenerate (1, 1, 1) raster.
    """

    log_values: np.ndarray
    x0: float
    y0: float
    dx: float
    dy: float
    t0: float
    dt: float
    alpha: float

    def log_at(self, xs, ys, ts) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        ts = np.asarray(ts, dtype=np.float64)
        nt, ny, nx = self.log_values.shape
        ix = (
            np.zeros(xs.shape, dtype=np.int64)
            if nx == 1
            else np.clip(((xs - self.x0) / self.dx).astype(np.int64), 0, nx - 1)
        )
        iy = (
            np.zeros(ys.shape, dtype=np.int64)
            if ny == 1
            else np.clip(((ys - self.y0) / self.dy).astype(np.int64), 0, ny - 1)
        )
        it = (
            np.zeros(ts.shape, dtype=np.int64)
            if nt == 1
            else np.clip(((ts - self.t0) / self.dt).astype(np.int64), 0, nt - 1)
        )
        return self.log_values[it, iy, ix] + self.alpha * ts

    def max_log(self, t_lo: float, t_hi: float) -> float:
        """Upper bound of the log trend over the raster and a time interval."""
        base = float(np.max(self.log_values))
        return base + max(self.alpha * t_lo, self.alpha * t_hi)


def build_trend_field(trend: TrendModel) -> TrendField:
    """Precompute the log-trend raster for fast pointwise evaluation."""
    if trend.covariates is None or not trend.beta:
        return TrendField(
            log_values=np.full((1, 1, 1), trend.beta0, dtype=np.float64),
            x0=0.0,
            y0=0.0,
            dx=1.0,
            dy=1.0,
            t0=0.0,
            dt=1.0,
            alpha=trend.alpha,
        )
    stack = trend.covariates
    geom = stack.geometry
    nt = stack.nt if any(n in stack.spatiotemporal for n in trend.beta) else 1
    log_values = np.full((nt, geom.ny, geom.nx), trend.beta0, dtype=np.float64)
    for name, b in trend.beta.items():
        if name in stack.spatial:
            log_values += b * stack.spatial[name][None, :, :]
        else:
            arr = stack.spatiotemporal[name]
            log_values += b * (arr if nt > 1 else arr[:1])
    return TrendField(
        log_values=log_values,
        x0=geom.x0,
        y0=geom.y0,
        dx=geom.dx,
        dy=geom.dy,
        t0=stack.t0,
        dt=stack.t_step,
        alpha=trend.alpha,
    )


@dataclass(frozen=True, eq=False)
class GibbsModel:
    """Hybrid multi-scale pairwise-interaction model with a hard core.

    Components are kept sorted by (r, q). The scales must be strictly
    nested: hs < r_1 < ... < r_m and ht < q_1 < ... < q_m. Setting either
    hardcore distance to zero disables the hard core entirely.
    """

    trend: TrendModel
    components: tuple[InteractionComponent, ...] = ()
    hs: float = 0.0
    ht: float = 0.0

    def __post_init__(self) -> None:
        comps = tuple(sorted(self.components, key=lambda c: (c.r, c.q)))
        object.__setattr__(self, "components", comps)
        if self.hs < 0 or self.ht < 0:
            raise ConfigError("hardcore distances must be non-negative")
        if not (math.isfinite(self.hs) and math.isfinite(self.ht)):
            raise ConfigError("hardcore distances must be finite")
        rs = [c.r for c in comps]
        qs = [c.q for c in comps]
        if any(r2 <= r1 for r1, r2 in zip(rs, rs[1:])):
            raise ConfigError("interaction spatial radii must be strictly increasing")
        if any(q2 <= q1 for q1, q2 in zip(qs, qs[1:])):
            raise ConfigError("interaction temporal radii must be strictly increasing")
        if self.hardcore_active and comps:
            if self.hs >= rs[0]:
                raise ConfigError("spatial hardcore must be smaller than the first radius")
            if self.ht >= qs[0]:
                raise ConfigError("temporal hardcore must be smaller than the first radius")

    @property
    def hardcore_active(self) -> bool:
        """The hard core applies only when both distances are positive."""
        return self.hs > 0.0 and self.ht > 0.0

    @property
    def m(self) -> int:
        return len(self.components)

    def kernel_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(r^2, q, log gamma, saturation) arrays in component order."""
        r2s = np.array([c.r * c.r for c in self.components], dtype=np.float64)
        qs = np.array([c.q for c in self.components], dtype=np.float64)
        lg = np.array([math.log(c.gamma) for c in self.components], dtype=np.float64)
        sats = np.array(
            [-1.0 if c.saturation is None else float(c.saturation) for c in self.components],
            dtype=np.float64,
        )
        return r2s, qs, lg, sats

    @property
    def hs2_or_disabled(self) -> float:
        """Squared spatial hardcore for the kernels; negative when disabled."""
        return self.hs * self.hs if self.hardcore_active else -1.0

    @property
    def kernel_ht(self) -> float:
        return self.ht if self.hardcore_active else 0.0


class LogDensity(NamedTuple):
    """Log unnormalised density value plus a hardcore-violation flag.

    ``value`` is -inf exactly when ``violated`` is true (the density is 0).
    """

    value: float
    violated: bool


def trend_intensity(trend: TrendModel, p: STPoint, field: TrendField | None = None) -> float:
    """First-order trend evaluated at one point."""
    if field is None:
        field = build_trend_field(trend)
    return float(np.exp(field.log_at(p.x, p.y, p.t)))


def hardcore_indicator(u: STPoint, pattern: PointPattern, hs: float, ht: float) -> int:
    """1 if no pattern point (other than u itself) is hardcore-close to u.

    A conflict needs both ds <= hs and dt <= ht. Setting hs or ht to zero
    disables the hard core, so the indicator is then identically 1.
    """
    if hs < 0 or ht < 0:
        raise ConfigError("hardcore distances must be non-negative")
    if hs == 0.0 or ht == 0.0:
        return 1
    ok, _ = _kernels.point_stats(
        pattern.xs, pattern.ys, pattern.ts,
        u.x, u.y, u.t,
        np.empty(0, dtype=np.float64), np.empty(0, dtype=np.float64),
        hs * hs, ht, True,
    )
    return int(ok)


def sufficient_stats(u: STPoint, pattern: PointPattern, model: GibbsModel) -> np.ndarray:
    """Per-component neighbor counts of u in the pattern, excluding u itself.

    Saturated components return min(saturation, count), so values are floats.
    """
    r2s, qs, _, sats = model.kernel_arrays()
    _, counts = _kernels.point_stats(
        pattern.xs, pattern.ys, pattern.ts,
        u.x, u.y, u.t,
        r2s, qs, -1.0, 0.0, True,
    )
    out = counts.astype(np.float64)
    capped = (sats >= 0.0) & (out > sats)
    out[capped] = sats[capped]
    return out


def cond_intensity(
    model: GibbsModel,
    u: STPoint,
    pattern: PointPattern,
    field: TrendField | None = None,
) -> float:
    """Conditional intensity lambda(u | pattern).

    When u is itself a member of the pattern, neighbor counts and the
    hardcore test exclude u, which makes the value the intensity of u given
    the rest of the pattern. Returns 0.0 on a hardcore conflict.
    """
    if field is None:
        field = build_trend_field(model.trend)
    r2s, qs, lg, sats = model.kernel_arrays()
    ok, counts = _kernels.point_stats(
        pattern.xs, pattern.ys, pattern.ts,
        u.x, u.y, u.t,
        r2s, qs, model.hs2_or_disabled, model.kernel_ht, True,
    )
    if not ok:
        return 0.0
    logl = float(field.log_at(u.x, u.y, u.t))
    for j in range(model.m):
        c = float(counts[j])
        if sats[j] >= 0.0 and c > sats[j]:
            c = float(sats[j])
        logl += c * float(lg[j])
    return math.exp(logl)


def log_unnormalized_density(model: GibbsModel, pattern: PointPattern) -> LogDensity:
    """Log of the unnormalised density of a pattern under the model.

    The empty pattern has density 1 (log 0). For saturated components the
    pair count is replaced by the sum over points of the saturated neighbor
    count, halved; without saturation this equals the plain pair count.
    """
    n = len(pattern)
    if n == 0:
        return LogDensity(0.0, False)
    field = build_trend_field(model.trend)
    r2s, qs, lg, sats = model.kernel_arrays()
    total = float(np.sum(field.log_at(pattern.xs, pattern.ys, pattern.ts)))
    if model.m and bool(np.any(sats >= 0.0)):
        # Saturated form: per-point statistics, each unordered pair counted
        # from both ends, hence the factor 1/2.
        violated = False
        if model.hardcore_active:
            violated = bool(
                _kernels.close_pair_count(
                    pattern.xs, pattern.ys, pattern.ts, model.hs, model.ht
                )
                > 0
            )
        if violated:
            return LogDensity(-math.inf, True)
        acc = 0.0
        for i in range(n):
            _, counts = _kernels.point_stats(
                pattern.xs, pattern.ys, pattern.ts,
                float(pattern.xs[i]), float(pattern.ys[i]), float(pattern.ts[i]),
                r2s, qs, -1.0, 0.0, True,
            )
            for j in range(model.m):
                c = float(counts[j])
                if sats[j] >= 0.0 and c > sats[j]:
                    c = float(sats[j])
                acc += 0.5 * c * float(lg[j])
        return LogDensity(total + acc, False)
    violated_flag, pair_counts = _kernels.pair_scale_counts(
        pattern.xs, pattern.ys, pattern.ts,
        r2s, qs, model.hs2_or_disabled, model.kernel_ht,
    )
    if violated_flag:
        return LogDensity(-math.inf, True)
    for j in range(model.m):
        total += float(pair_counts[j]) * float(lg[j])
    return LogDensity(total, False)


def local_stability_log_bound(model: GibbsModel, window: STWindow) -> float:
    """Log of a uniform upper bound on the conditional intensity.

    Components with gamma <= 1 only lower the intensity. A component with
    gamma > 1 needs the hard core to cap how many neighbors can fit in its
    cylinder; the cap is the grid-packing count

        K_j = ceil((2 r_j / hs + 1)^2 * (2 q_j / ht + 1)).

    Raises NumericalError when some gamma exceeds 1 without an active hard
    core (the model is not locally stable). The bound is returned in log
    form because K_j log gamma_j routinely overflows exp().
    """
    field = build_trend_field(model.trend)
    bound = field.max_log(window.t0, window.t1)
    for c in model.components:
        if c.gamma <= 1.0:
            continue
        if c.saturation is not None:
            bound += c.saturation * math.log(c.gamma)
            continue
        if not model.hardcore_active:
            raise NumericalError(
                "model is not locally stable: an interaction weight exceeds 1 "
                "with no hard core and no saturation"
            )
        k = math.ceil((2.0 * c.r / model.hs + 1.0) ** 2 * (2.0 * c.q / model.ht + 1.0))
        bound += k * math.log(c.gamma)
    return bound


def local_stability_bound(model: GibbsModel, window: STWindow) -> float:
    """exp of ``local_stability_log_bound``; may overflow to inf for strong clustering."""
    try:
        return math.exp(local_stability_log_bound(model, window))
    except OverflowError:
        return math.inf
