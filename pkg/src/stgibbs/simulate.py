"""Pattern synthesis: Poisson sampling, dummy points, and the birth-death chain.

The Metropolis-Hastings sampler proposes a uniformly placed birth with
probability ``birth_prob`` and a uniformly chosen death otherwise, accepting
with the usual spatial birth-death ratios driven by the model's conditional
intensity. Models must be locally stable (checked up front), which makes the
chain uniformly ergodic with the target as its invariant law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from . import _kernels
from .errors import ConfigError, NumericalError
from .geometry import PointPattern, STWindow
from .models import (
    GibbsModel,
    TrendField,
    build_trend_field,
    local_stability_log_bound,
)
from .streams import make_rng


@dataclass(frozen=True)
class MHConfig:
    """Birth-death chain settings.

    ``steps`` is the total iteration count (including ``burnin``; the final
    state is taken after all steps). ``initial`` defaults to the empty
    pattern. ``seed`` is used only when no generator is passed to the run.
    """

    steps: int
    burnin: int = 0
    birth_prob: float = 0.5
    seed: int | None = None
    initial: PointPattern | None = None

    def __post_init__(self) -> None:
        if not (isinstance(self.steps, int) and isinstance(self.burnin, int)):
            raise ConfigError("steps and burnin must be integers")
        if not 0 <= self.burnin < self.steps:
            raise ConfigError("need steps > burnin >= 0")
        if not 0.0 < self.birth_prob < 1.0:
            raise ConfigError("birth probability must lie strictly between 0 and 1")


def default_mh_config(
    model: GibbsModel,
    window: STWindow,
    seed: int | None = None,
    steps: int | None = None,
) -> MHConfig:
    """A reasonable chain length for the model: scales with the trend's
    expected count. Heavy clustering may need longer chains."""
    local_stability_log_bound(model, window)  # raises if the model is unstable
    field = build_trend_field(model.trend)
    trend_count = math.exp(min(field.max_log(window.t0, window.t1), 50.0)) * window.volume
    burnin = int(math.ceil(10.0 * max(trend_count, 1.0)))
    if steps is None:
        steps = burnin + max(10_000, 20 * int(math.ceil(max(trend_count, 1.0))))
    if steps <= burnin:
        raise ConfigError("explicit steps must exceed the default burn-in")
    return MHConfig(steps=steps, burnin=burnin, seed=seed)


def sample_poisson(
    window: STWindow,
    rate,
    rng: np.random.Generator,
    rate_bound: float | None = None,
) -> PointPattern:
    """Sample a Poisson pattern by dominated thinning.

    ``rate`` is either a constant or a vectorised callable ``rate(xs, ys,
    ts)``. Callables require ``rate_bound``, a uniform upper bound on the
    rate over the window; candidates are drawn homogeneously at the bound
    and kept with probability rate/bound. Raises NumericalError if the rate
    is observed above its stated bound.
    """
    if callable(rate):
        if rate_bound is None:
            raise ConfigError("a callable rate needs an explicit rate_bound")
        rate_fn = rate
        bound = float(rate_bound)
    else:
        const = float(rate)
        if const < 0 or not math.isfinite(const):
            raise ConfigError("constant rate must be finite and non-negative")
        bound = const if rate_bound is None else float(rate_bound)
        if const > bound:
            raise NumericalError(f"rate {const} exceeds its stated bound {bound}")
        rate_fn = None
    if bound < 0 or not math.isfinite(bound):
        raise ConfigError("rate bound must be finite and non-negative")
    if bound == 0.0:
        return PointPattern.empty(window)
    mean = bound * window.bounding_area * window.duration
    n = int(rng.poisson(mean))
    xs = window.x0 + (window.x1 - window.x0) * rng.random(n)
    ys = window.y0 + (window.y1 - window.y0) * rng.random(n)
    ts = window.t0 + (window.t1 - window.t0) * rng.random(n)
    in_mask = window.mask_values(xs, ys)
    u = rng.random(n)
    if rate_fn is None:
        keep = in_mask  # constant rate at the bound: thinning keeps everything
    else:
        vals = np.asarray(rate_fn(xs, ys, ts), dtype=np.float64)
        over = in_mask & (vals > bound * (1.0 + 1e-12))
        if bool(np.any(over)):
            raise NumericalError(
                f"rate exceeds its stated bound: observed {float(np.max(vals[in_mask]))} "
                f"> {bound}"
            )
        keep = in_mask & (u * bound < vals)
    return PointPattern(xs[keep], ys[keep], ts[keep], window)


def generate_dummies(
    window: STWindow,
    ref_intensity,
    c_factor: float,
    hs: float,
    ht: float,
    data: PointPattern,
    rng: np.random.Generator,
    ref_bound: float | None = None,
) -> PointPattern:
    """Poisson dummy points at intensity ``c_factor * ref_intensity``.

    Dummies falling inside the closed hardcore cylinder of any DATA point
    are removed (their conditional intensity would be identically zero, so
    they carry no information for the fit). Dummies are not thinned against
    each other.
    """
    if c_factor <= 0 or not math.isfinite(c_factor):
        raise ConfigError("dummy intensity factor must be positive and finite")
    if callable(ref_intensity):
        if ref_bound is None:
            raise ConfigError("a callable reference intensity needs ref_bound")

        def rho(xs, ys, ts):
            return c_factor * np.asarray(ref_intensity(xs, ys, ts), dtype=np.float64)

        pat = sample_poisson(window, rho, rng, rate_bound=c_factor * float(ref_bound))
    else:
        pat = sample_poisson(window, c_factor * float(ref_intensity), rng)
    if hs > 0.0 and ht > 0.0 and len(data) and len(pat):
        conflict = _kernels.hardcore_conflicts(
            pat.xs, pat.ys, pat.ts, data.xs, data.ys, data.ts, hs, ht
        )
        keep = ~conflict
        pat = PointPattern(pat.xs[keep], pat.ys[keep], pat.ts[keep], window)
    return pat


def run_birth_death_mh(
    model: GibbsModel,
    window: STWindow,
    cfg: MHConfig,
    rng: np.random.Generator | None = None,
    return_trace: bool = False,
):
    """Run the birth-death Metropolis-Hastings chain and return the final state.

    The chain is reproducible: a given (model, window, config, generator
    state) produces the same pattern on both kernel backends, draw for draw.
    With ``return_trace=True`` also returns the per-step point counts (all
    ``steps`` of them; entries before ``cfg.burnin`` are warm-up).
    """
    local_stability_log_bound(model, window)  # raises if the model is unstable
    if rng is None:
        rng = make_rng(cfg.seed)
    field = build_trend_field(model.trend)
    init = cfg.initial
    if init is None:
        init_xs = np.empty(0, dtype=np.float64)
        init_ys = np.empty(0, dtype=np.float64)
        init_ts = np.empty(0, dtype=np.float64)
    else:
        inside = window.contains(init.xs, init.ys, init.ts)
        if not bool(np.all(inside)):
            raise ConfigError("initial pattern does not fit the simulation window")
        init_xs, init_ys, init_ts = init.xs, init.ys, init.ts
    r2s, qs, lg, sats = model.kernel_arrays()
    odds = cfg.birth_prob / (1.0 - cfg.birth_prob)
    mask = None if window.mask is None else window.mask.astype(np.uint8)
    xs, ys, ts, counts = _kernels.run_chain(
        rng.bit_generator,
        cfg.steps,
        cfg.birth_prob,
        window.x0, window.x1, window.y0, window.y1, window.t0, window.t1,
        mask,
        field.log_values,
        field.x0, field.y0, field.dx, field.dy, field.t0, field.dt,
        field.alpha,
        r2s, qs, lg, sats,
        model.hs2_or_disabled, model.kernel_ht,
        window.volume, odds,
        init_xs, init_ys, init_ts,
    )
    pattern = PointPattern(xs, ys, ts, window)
    if return_trace:
        return pattern, counts
    return pattern


def simulate_patterns(
    model: GibbsModel,
    window: STWindow,
    cfg: MHConfig,
    n_patterns: int,
    seed: int | None,
    n_jobs: int = 1,
) -> list[PointPattern]:
    """Independent chain replicates, one private RNG stream per replicate.

    Replicate k uses stream k of ``seed``, so results do not depend on
    ``n_jobs`` or scheduling order.
    """
    if n_patterns < 0:
        raise ConfigError("number of patterns must be non-negative")

    def one(k: int) -> PointPattern:
        return run_birth_death_mh(model, window, cfg, rng=make_rng(seed, stream=k))

    if n_jobs == 1 or n_patterns <= 1:
        return [one(k) for k in range(n_patterns)]
    return Parallel(n_jobs=n_jobs)(delayed(one)(k) for k in range(n_patterns))
