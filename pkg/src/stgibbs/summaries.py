"""Second-order summaries and Monte Carlo envelope validation.

The central summary is the spatio-temporal pair correlation surface g(u, v):
the factor by which pairs at spatial distance u and time separation v are
more (g > 1) or less (g < 1) frequent than under a Poisson process with the
same first-order intensity. The estimator is kernel-smoothed with
Epanechnikov kernels and translation edge correction:

    g_hat(u, v) = 1 / (4 pi u) * sum over ordered pairs (i, j) of
        k_s(u - ds_ij) k_t(v - dt_ij)
        / (lam_i lam_j |Ws cap Ws_shifted(ij)| (T - dt_ij))

For a Poisson process with known intensity this estimator is exactly
unbiased at every grid point (the kernel mass integrates to one against the
translation-corrected pair density), which the tests exploit.

Model validation wraps the estimator in a global envelope test ranked by
extreme rank length (ERL): curves are ranked pointwise from both tails, each
curve is summarised by its ascending vector of pointwise ranks, and vectors
are compared lexicographically. The ERL measure of a curve is the fraction
of curves strictly less extreme than it, so the most extreme curve scores
highest and ties share a value (a conservative convention).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.signal import fftconvolve

from . import _kernels
from .errors import ConfigError, DataError
from .geometry import PointPattern, STWindow
from .models import GibbsModel, build_trend_field
from .simulate import MHConfig, default_mh_config, simulate_patterns
from .streams import make_rng


@dataclass(frozen=True, eq=False)
class GpcfSurface:
    """A pair correlation surface on a (u, v) grid."""

    u: np.ndarray
    v: np.ndarray
    values: np.ndarray
    eps_s: float
    eps_t: float
    n_pairs: int

    def flatten(self) -> np.ndarray:
        return self.values.reshape(-1)


def _validate_grid(grid: np.ndarray, name: str, positive: bool) -> np.ndarray:
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 1 or g.size == 0:
        raise ConfigError(f"{name} grid must be a non-empty 1d array")
    if np.any(np.diff(g) <= 0):
        raise ConfigError(f"{name} grid must be strictly increasing")
    if positive and g[0] <= 0.0:
        raise ConfigError(
            f"{name} grid must be strictly positive: the estimator divides by u"
        )
    if not positive and g[0] < 0.0:
        raise ConfigError(f"{name} grid must be non-negative")
    return g


def _spatial_set_covariance(window: STWindow):
    """Set covariance lookup for masked windows, via FFT autocorrelation."""
    ind = window.mask.astype(np.float64)
    cov_cells = fftconvolve(ind, ind[::-1, ::-1])
    cov_cells[cov_cells < 0] = 0.0
    ny, nx = ind.shape
    cell_w = (window.x1 - window.x0) / nx
    cell_h = (window.y1 - window.y0) / ny
    cov = cov_cells * (cell_w * cell_h)

    def lookup(dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
        ix = np.clip(np.rint(dx / cell_w).astype(np.int64) + (nx - 1), 0, 2 * nx - 2)
        iy = np.clip(np.rint(dy / cell_h).astype(np.int64) + (ny - 1), 0, 2 * ny - 2)
        return cov[iy, ix]

    return lookup


def _pair_weights(pattern: PointPattern, lam: np.ndarray, ds_cap: float, dt_cap: float):
    """Distances and translation-corrected weights for contributing pairs."""
    window = pattern.window
    ii, jj, ds, dt = _kernels.pairs_within(pattern.xs, pattern.ys, pattern.ts, ds_cap, dt_cap)
    if ii.shape[0] == 0:
        return ds, dt, np.empty(0, dtype=np.float64)
    dx = pattern.xs[jj] - pattern.xs[ii]
    dy = pattern.ys[jj] - pattern.ys[ii]
    if window.mask is None:
        a = window.x1 - window.x0
        b = window.y1 - window.y0
        vs = (a - np.abs(dx)) * (b - np.abs(dy))
    else:
        vs = _spatial_set_covariance(window)(dx, dy)
    vt = window.duration - dt
    good = (vs > 0.0) & (vt > 0.0)
    ii, jj, ds, dt, vs, vt = ii[good], jj[good], ds[good], dt[good], vs[good], vt[good]
    # Ordered-pair sum folded onto unordered pairs: factor 2.
    weights = 2.0 / (lam[ii] * lam[jj] * vs * vt)
    return ds, dt, weights


def _intensity_values(pattern: PointPattern, intensity) -> np.ndarray:
    if callable(intensity):
        lam = np.asarray(intensity(pattern.xs, pattern.ys, pattern.ts), dtype=np.float64)
    elif np.ndim(intensity) == 0:
        lam = np.full(len(pattern), float(intensity), dtype=np.float64)
    else:
        lam = np.asarray(intensity, dtype=np.float64)
        if lam.shape != (len(pattern),):
            raise DataError("per-point intensity array must match the pattern length")
    if not np.all(lam > 0.0) or not np.all(np.isfinite(lam)):
        raise DataError("intensities at data points must be positive and finite")
    return lam


def default_bandwidths(
    pattern: PointPattern,
    u_grid: np.ndarray,
    v_grid: np.ndarray,
) -> tuple[float, float]:
    """Data-driven kernel bandwidths for the pair correlation estimator.

    Rule of thumb of the Silverman type on the contributing pair distances:
    eps = 0.9 min(sd, iqr / 1.34) n_pairs^(-1/5), computed separately for
    the spatial and temporal coordinates over pairs reaching the grid, then
    clipped so the spatial kernel cannot spill below u = 0 (which would
    leak mass and bias the estimate downward at the smallest u).
    """
    u_grid = _validate_grid(u_grid, "u", positive=True)
    v_grid = _validate_grid(v_grid, "v", positive=False)
    ds_cap = 2.0 * float(u_grid[-1])
    dt_cap = 2.0 * float(v_grid[-1]) if v_grid[-1] > 0 else pattern.window.duration
    _, _, ds, dt = _kernels.pairs_within(pattern.xs, pattern.ys, pattern.ts, ds_cap, dt_cap)
    n_pairs = ds.shape[0]

    def rule(vals: np.ndarray, fallback: float) -> float:
        if vals.shape[0] < 2:
            return fallback
        sd = float(np.std(vals))
        q75, q25 = np.percentile(vals, [75.0, 25.0])
        iqr = float(q75 - q25)
        spread = min(sd, iqr / 1.34) if iqr > 0 else sd
        if spread <= 0:
            return fallback
        return 0.9 * spread * n_pairs ** (-0.2)

    span_u = float(u_grid[-1] - u_grid[0]) or float(u_grid[-1])
    span_v = float(v_grid[-1] - v_grid[0]) or max(float(v_grid[-1]), 1.0)
    eps_s = rule(ds, 0.25 * span_u)
    eps_t = rule(dt, 0.25 * span_v)
    eps_s = min(eps_s, 0.999 * float(u_grid[0]))
    if v_grid[0] > 0:
        eps_t = min(eps_t, 0.999 * float(v_grid[0]))
    return float(eps_s), float(eps_t)


def estimate_gpcf(
    pattern: PointPattern,
    intensity,
    u_grid,
    v_grid,
    eps_s: float | None = None,
    eps_t: float | None = None,
) -> GpcfSurface:
    """Kernel estimate of the spatio-temporal pair correlation surface.

    Parameters
    ----------
    pattern : PointPattern
        At least two points.
    intensity : float, array, or callable
        First-order intensity at the data points: a constant, per-point
        values, or a function of coordinate arrays.
    u_grid, v_grid : arrays
        Strictly increasing evaluation grids; u must be strictly positive
        (the estimator divides by u), v non-negative.
    eps_s, eps_t : float, optional
        Kernel bandwidths; defaults follow ``default_bandwidths``.

    Notes
    -----
    Edge effects are removed by translation correction: each pair is
    weighted by the reciprocal overlap of the window with itself shifted by
    the pair's displacement (rectangle formula, or FFT set covariance for
    masked windows) times the overlap of the time interval. Values at
    v = 0 keep only half the temporal kernel mass and are biased low by
    about a factor 2; start the v grid above the temporal bandwidth when
    that matters.
    """
    u_grid = _validate_grid(u_grid, "u", positive=True)
    v_grid = _validate_grid(v_grid, "v", positive=False)
    if len(pattern) < 2:
        raise DataError("pair correlation estimation needs at least 2 points")
    lam = _intensity_values(pattern, intensity)
    if eps_s is None or eps_t is None:
        auto_s, auto_t = default_bandwidths(pattern, u_grid, v_grid)
        eps_s = auto_s if eps_s is None else float(eps_s)
        eps_t = auto_t if eps_t is None else float(eps_t)
    if not (eps_s > 0 and eps_t > 0):
        raise ConfigError("kernel bandwidths must be positive")
    ds_cap = float(u_grid[-1]) + eps_s
    dt_cap = float(v_grid[-1]) + eps_t
    ds, dt, weights = _pair_weights(pattern, lam, ds_cap, dt_cap)
    acc = _kernels.gpcf_accumulate(ds, dt, weights, u_grid, v_grid, eps_s, eps_t)
    values = acc / (4.0 * math.pi * u_grid[:, None])
    return GpcfSurface(
        u=u_grid,
        v=v_grid,
        values=values,
        eps_s=float(eps_s),
        eps_t=float(eps_t),
        n_pairs=int(ds.shape[0]),
    )


def pointwise_envelopes(curves: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise minimum and maximum across curves (axis 0)."""
    curves = np.asarray(curves, dtype=np.float64)
    if curves.ndim < 2 or curves.shape[0] < 1:
        raise ConfigError("need a non-empty stack of curves")
    return curves.min(axis=0), curves.max(axis=0)


def erl_measures(curves: np.ndarray) -> np.ndarray:
    """Extreme-rank-length measure of every curve in a stack.

    Pointwise, each curve gets the two-sided rank
    min(1 + #{curves strictly below}, 1 + #{curves strictly above}); low
    rank means extreme at that point. A curve is summarised by its ranks
    sorted ascending; curve i is more extreme than curve j when its sorted
    vector is lexicographically smaller. The returned measure is the
    fraction of curves strictly less extreme, so the most extreme curve has
    the largest value and exactly tied curves share one value.
    """
    curves = np.asarray(curves, dtype=np.float64)
    if curves.ndim != 2:
        raise ConfigError("curves must form a 2d array (one row per curve)")
    n, k = curves.shape
    if n < 2:
        raise ConfigError("need at least 2 curves to rank")
    r_down = np.empty((n, k), dtype=np.int64)
    r_up = np.empty((n, k), dtype=np.int64)
    for col in range(k):
        vals = curves[:, col]
        order = np.sort(vals)
        r_down[:, col] = np.searchsorted(order, vals, side="left") + 1
        r_up[:, col] = (n - np.searchsorted(order, vals, side="right")) + 1
    ranks = np.minimum(r_down, r_up)
    ranks.sort(axis=1)
    rows = [tuple(row) for row in ranks]
    order_idx = sorted(range(n), key=lambda i: rows[i])
    measures = np.empty(n, dtype=np.float64)
    pos = 0
    while pos < n:
        end = pos
        while end + 1 < n and rows[order_idx[end + 1]] == rows[order_idx[pos]]:
            end += 1
        strictly_greater = n - 1 - end
        for t in range(pos, end + 1):
            measures[order_idx[t]] = strictly_greater / n
        pos = end + 1
    return measures


def erl_p_value(e_obs: float, e_sims: np.ndarray) -> float:
    """Monte Carlo p-value from ERL measures of observed and simulated curves.

    p = (1 + #{simulations at least as extreme as observed}) / (n_sim + 1),
    which always lies in [1 / (n_sim + 1), 1].
    """
    e_sims = np.asarray(e_sims, dtype=np.float64)
    if e_sims.ndim != 1 or e_sims.size == 0:
        raise ConfigError("need at least one simulated measure")
    return float((1 + int(np.count_nonzero(e_sims >= e_obs))) / (e_sims.size + 1))


def global_envelope(
    curves: np.ndarray,
    level: float = 0.95,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """ERL-ranked global envelope at the given confidence level.

    ``curves[0]`` is the observed curve by convention. The
    ceil((1 - level) * n) most extreme curves are dropped (curves tied with
    the cutoff are retained, which widens the envelope conservatively) and
    the envelope is the pointwise min/max of the remainder. Returns
    (lo, hi, measures). Raises ConfigError when too few curves are supplied
    to resolve the level: n >= ceil(1 / (1 - level)) is required.
    """
    curves = np.asarray(curves, dtype=np.float64)
    if curves.ndim != 2:
        raise ConfigError("curves must form a 2d array (one row per curve)")
    if not 0.0 < level < 1.0:
        raise ConfigError("envelope level must lie strictly between 0 and 1")
    n = curves.shape[0]
    # Exact rational arithmetic: 1 - 0.95 is not representable, and
    # ceil((1 - 0.95) * 20) would round 1.0000000000000009 up to 2,
    # dropping one curve too many at every integer crossing.
    alpha = 1 - Fraction(str(level))
    n_min = math.ceil(1 / alpha)
    if n < n_min:
        raise ConfigError(
            f"too few curves for a level-{level} envelope: need at least {n_min}, got {n}"
        )
    measures = erl_measures(curves)
    k_drop = math.ceil(alpha * n)
    if k_drop > 0:
        e_k = np.sort(measures)[::-1][k_drop - 1]
        if int(np.count_nonzero(measures >= e_k)) == k_drop:
            retained = measures < e_k
        else:
            # Ties straddle the cutoff: keep the tied curves, widening the
            # envelope rather than narrowing it.
            retained = measures <= e_k
    else:
        retained = np.ones(n, dtype=bool)
    if not np.any(retained):
        raise ConfigError("envelope degenerates: every retained set is empty at this level")
    lo = curves[retained].min(axis=0)
    hi = curves[retained].max(axis=0)
    return lo, hi, measures


@dataclass(frozen=True, eq=False)
class EnvelopeResult:
    """Observed vs simulated pair correlation surfaces with an ERL verdict."""

    u: np.ndarray
    v: np.ndarray
    observed: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    global_lo: np.ndarray
    global_hi: np.ndarray
    erl_obs: float
    erl_sims: np.ndarray
    p_erl: float
    n_sim: int
    level: float
    significant: bool
    significant_cells: np.ndarray
    eps_s: float
    eps_t: float

    def __post_init__(self) -> None:
        lo_bound = 1.0 / (self.n_sim + 1)
        if not lo_bound <= self.p_erl <= 1.0:
            raise ConfigError(
                f"p value {self.p_erl} outside [{lo_bound}, 1]; inconsistent inputs"
            )


def envelope_test(
    data: PointPattern,
    model: GibbsModel,
    n_sim: int,
    u_grid,
    v_grid,
    cfg: MHConfig | None = None,
    seed: int | None = None,
    level: float = 0.95,
    eps_s: float | None = None,
    eps_t: float | None = None,
    intensity=None,
    n_jobs: int = 1,
) -> EnvelopeResult:
    """Global envelope test of a fitted model against observed data.

    Simulates ``n_sim`` patterns from the model (one private RNG stream
    each), estimates the pair correlation surface of the data and of every
    simulation with shared bandwidths chosen from the data, and ranks all
    n_sim + 1 surfaces by ERL. ``intensity`` defaults to each pattern's own
    mean count over the window for homogeneous trends, and to the model's
    trend intensity otherwise.

    The p-value's resolution is 1 / (n_sim + 1); the envelope level needs
    n_sim + 1 >= ceil(1 / (1 - level)) curves (for 0.95, at least 19
    simulations).
    """
    u_grid = _validate_grid(u_grid, "u", positive=True)
    v_grid = _validate_grid(v_grid, "v", positive=False)
    if n_sim < 1:
        raise ConfigError("need at least one simulation")
    if cfg is None:
        cfg = default_mh_config(model, data.window, seed=seed)
    if eps_s is None or eps_t is None:
        auto_s, auto_t = default_bandwidths(data, u_grid, v_grid)
        eps_s = auto_s if eps_s is None else float(eps_s)
        eps_t = auto_t if eps_t is None else float(eps_t)

    field = build_trend_field(model.trend)
    homogeneous = model.trend.homogeneous

    def lam_for(pat: PointPattern):
        if intensity is not None:
            return intensity
        if homogeneous:
            return len(pat) / pat.window.volume
        return lambda xs, ys, ts: np.exp(field.log_at(xs, ys, ts))

    sims = simulate_patterns(model, data.window, cfg, n_sim, seed=seed, n_jobs=n_jobs)
    too_small = [i for i, s in enumerate(sims) if len(s) < 2]
    if too_small:
        raise DataError(
            f"{len(too_small)} simulated pattern(s) had fewer than 2 points; "
            "the model may be near-degenerate on this window"
        )
    obs_surface = estimate_gpcf(data, lam_for(data), u_grid, v_grid, eps_s, eps_t)
    surfaces = [
        estimate_gpcf(s, lam_for(s), u_grid, v_grid, eps_s, eps_t) for s in sims
    ]
    curves = np.vstack([obs_surface.flatten()] + [s.flatten() for s in surfaces])
    measures = erl_measures(curves)
    p = erl_p_value(float(measures[0]), measures[1:])
    lo, hi = pointwise_envelopes(curves[1:])
    glo, ghi, _ = global_envelope(curves, level=level)
    shape = obs_surface.values.shape
    sig_cells = (curves[0] < glo) | (curves[0] > ghi)
    return EnvelopeResult(
        u=u_grid,
        v=v_grid,
        observed=obs_surface.values,
        lo=lo.reshape(shape),
        hi=hi.reshape(shape),
        global_lo=glo.reshape(shape),
        global_hi=ghi.reshape(shape),
        erl_obs=float(measures[0]),
        erl_sims=measures[1:],
        p_erl=p,
        n_sim=n_sim,
        level=level,
        significant=bool(np.any(sig_cells)),
        significant_cells=sig_cells.reshape(shape),
        eps_s=float(eps_s),
        eps_t=float(eps_t),
    )
