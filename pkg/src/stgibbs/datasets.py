"""Bundled synthetic dataset: a realistic fit/validate workload.

Generates a wildfire-flavoured scenario: a 400 x 400 km region observed for
48 monthly steps, an irregular region mask, four static terrain covariates
and two seasonally varying weather covariates on a 100 x 100 raster (4 km
cells), and a few hundred events drawn from a known Gibbs model whose trend
loads on the covariates, with inhibition at short range, mild clustering at
medium range, and a hard core. The ground truth is saved alongside the data
so fits can be compared against it.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .geometry import PointPattern, STWindow
from .io import save_covariate_stack, save_model_spec, save_pattern, write_json
from .models import (
    CovariateStack,
    GibbsModel,
    GridGeometry,
    InteractionComponent,
    TrendModel,
    build_trend_field,
)
from .simulate import MHConfig, run_birth_death_mh
from .streams import make_rng

SIZE_KM = 400.0
N_CELLS = 100
N_MONTHS = 48
TARGET_COUNT = 430.0

TRUE_BETA = {
    "elevation": -0.35,
    "slope": 0.25,
    "vegetation": 0.45,
    "settlement": -0.2,
    "temperature": 0.4,
    "dryness": 0.3,
}
TRUE_COMPONENTS = ((0.65, 4.0, 1.0), (1.3, 10.0, 2.0))  # (gamma, r km, q months)
TRUE_HARDCORE = (1.5, 0.5)  # (hs km, ht months)


def _smooth_field(rng: np.random.Generator, sigma: float) -> np.ndarray:
    """Standardised smooth Gaussian random field on the raster."""
    f = gaussian_filter(rng.standard_normal((N_CELLS, N_CELLS)), sigma, mode="reflect")
    return (f - f.mean()) / f.std()


def make_synthetic_dataset(seed: int = 2024):
    """Build the synthetic scenario in memory.

    Returns (pattern, model, window, stack): the simulated events, the true
    generating model, the masked window, and the covariate stack.
    """
    rng = make_rng(seed, stream=0)

    # Region mask: a smooth blob covering most of the square.
    yy, xx = np.mgrid[0:N_CELLS, 0:N_CELLS]
    radial = np.hypot(xx - 0.52 * N_CELLS, yy - 0.48 * N_CELLS) / N_CELLS
    bump = _smooth_field(rng, 12.0)
    mask = (0.9 - 1.4 * radial + 0.35 * bump) > 0.0
    if mask.mean() < 0.4:  # extremely unlikely; keep the window usable
        mask = radial < 0.5

    geom = GridGeometry(x0=0.0, y0=0.0, dx=SIZE_KM / N_CELLS, dy=SIZE_KM / N_CELLS,
                        nx=N_CELLS, ny=N_CELLS)
    elevation = _smooth_field(rng, 8.0)
    slope = _smooth_field(rng, 4.0)
    vegetation = _smooth_field(rng, 10.0)
    settlement = _smooth_field(rng, 6.0)

    months = np.arange(N_MONTHS, dtype=np.float64)
    season = np.sin(2.0 * math.pi * (months[:, None, None] - 5.0) / 12.0)
    temp_base = _smooth_field(rng, 9.0)
    temperature = 0.8 * season + 0.5 * temp_base[None, :, :] + 0.15 * np.stack(
        [_smooth_field(rng, 14.0) for _ in range(N_MONTHS)]
    )
    dry_base = _smooth_field(rng, 11.0)
    dryness = 0.6 * np.sin(2.0 * math.pi * (months[:, None, None] - 7.0) / 12.0) + 0.5 * dry_base[
        None, :, :
    ] + 0.15 * np.stack([_smooth_field(rng, 14.0) for _ in range(N_MONTHS)])

    stack = CovariateStack(
        geometry=geom,
        spatial={
            "elevation": elevation,
            "slope": slope,
            "vegetation": vegetation,
            "settlement": settlement,
        },
        spatiotemporal={"temperature": temperature, "dryness": dryness},
        t0=0.0,
        t_step=1.0,
    )
    window = STWindow(0.0, SIZE_KM, 0.0, SIZE_KM, 0.0, float(N_MONTHS), mask=mask)

    # Calibrate the intercept so the Poisson part integrates to the target
    # count over the masked window.
    log_load = np.zeros((N_MONTHS, N_CELLS, N_CELLS))
    for name, b in TRUE_BETA.items():
        if name in stack.spatial:
            log_load += b * stack.spatial[name][None, :, :]
        else:
            log_load += b * stack.spatiotemporal[name]
    cell_vol = geom.dx * geom.dy * 1.0
    total = float(np.sum(np.exp(log_load[:, mask])) * cell_vol)
    beta0 = math.log(TARGET_COUNT / total)

    trend = TrendModel(beta0=beta0, beta=dict(TRUE_BETA), alpha=0.0, covariates=stack)
    model = GibbsModel(
        trend=trend,
        components=tuple(
            InteractionComponent(gamma=g, r=r, q=q) for g, r, q in TRUE_COMPONENTS
        ),
        hs=TRUE_HARDCORE[0],
        ht=TRUE_HARDCORE[1],
    )
    cfg = MHConfig(steps=60_000, burnin=20_000, birth_prob=0.5)
    pattern = run_birth_death_mh(model, window, cfg, rng=make_rng(seed, stream=1))
    return pattern, model, window, stack


def write_synthetic_dataset(out_dir, seed: int = 2024) -> dict:
    """Generate the synthetic scenario and write it to ``out_dir``.

    Produces ``pattern.csv``, ``covariates.json`` (+ rasters/), ``mask.txt``,
    ``model_true.json`` (the generating model), ``structure.json`` (the same
    structure with neutral interaction weights, the natural input for
    fitting), and ``candidates.json`` (interaction scale sets for selection).
    Returns a small summary dict.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pattern, model, window, stack = make_synthetic_dataset(seed)
    save_pattern(pattern, out / "pattern.csv")
    save_covariate_stack(stack, out / "covariates.json")
    save_model_spec(
        out / "model_true.json", model, window,
        covariates_manifest="covariates.json", mask_path="mask.txt",
    )
    neutral = GibbsModel(
        trend=model.trend,
        components=tuple(
            InteractionComponent(gamma=1.0, r=c.r, q=c.q) for c in model.components
        ),
        hs=model.hs,
        ht=model.ht,
    )
    save_model_spec(
        out / "structure.json", neutral, window,
        covariates_manifest="covariates.json", mask_path="mask.txt",
    )
    write_json(
        out / "candidates.json",
        {
            "candidates": [
                [[4.0, 1.0]],
                [[4.0, 1.0], [10.0, 2.0]],
                [[4.0, 1.0], [10.0, 2.0], [20.0, 4.0]],
                [[8.0, 2.0]],
            ]
        },
    )
    return {
        "n_events": len(pattern),
        "window_km": SIZE_KM,
        "n_months": N_MONTHS,
        "mask_coverage": float(np.count_nonzero(window.mask)) / window.mask.size,
        "seed": seed,
        "true_gammas": [c.gamma for c in model.components],
        "true_hardcore": list(TRUE_HARDCORE),
    }
