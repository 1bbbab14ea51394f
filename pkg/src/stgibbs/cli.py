"""Command line interface.

Subcommands cover the full workflow: simulate patterns from a model spec,
explore interpoint distances and choose a hard core, fit a model to data,
select among candidate interaction structures, estimate the pair
correlation surface, and run the global envelope test. Every artifact is
written atomically and embeds the configuration hash, the seed, the package
version, and the active kernel backend.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
error.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import BACKEND
from .errors import ConfigError, DataError, NumericalError, STGibbsError
from .geometry import interpoint_distance_pairs
from .infer import choose_hardcore, fit_gibbs, pareto_front, prepare_quadrature, select_irregular
from .io import (
    artifact_metadata,
    load_model_spec,
    load_pattern,
    read_json,
    save_model_spec,
    save_pattern,
    write_json,
)
from .models import GibbsModel, InteractionComponent, TrendModel, build_trend_field
from .simulate import MHConfig, default_mh_config, simulate_patterns
from .streams import make_rng
from .summaries import envelope_test, estimate_gpcf
from .datasets import write_synthetic_dataset


def _parse_grid(text: str) -> np.ndarray:
    try:
        lo_s, hi_s, n_s = text.split(":")
        lo, hi, n = float(lo_s), float(hi_s), int(n_s)
    except ValueError:
        raise ConfigError(f"grid must be 'lo:hi:n', got {text!r}") from None
    if n < 1 or not hi > lo:
        raise ConfigError(f"grid needs hi > lo and n >= 1, got {text!r}")
    return np.linspace(lo, hi, n)


def _default_threads() -> int:
    env = os.environ.get("STGIBBS_THREADS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stgibbs",
        description="Spatio-temporal Gibbs point processes: simulate, fit, validate.",
    )
    parser.add_argument("--version", action="version", version=f"stgibbs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, data=True):
        p.add_argument("--spec", required=True, help="model + window spec (JSON)")
        if data:
            p.add_argument("--data", required=True, help="point pattern CSV")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("simulate", help="draw patterns from a model")
    add_common(p, data=False)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--steps", type=int, default=None, help="chain length (default: auto)")
    p.add_argument("--burnin", type=int, default=None)
    p.add_argument("--birth-prob", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=_default_threads())

    p = sub.add_parser("pareto", help="distance front and hardcore choice")
    add_common(p)
    p.add_argument("--ds-max", type=float, default=float("inf"))
    p.add_argument("--dt-max", type=float, default=float("inf"))
    p.add_argument("--policy", choices=["max-area", "fixed-ratio", "manual"],
                   default="max-area")
    p.add_argument("--ratio", type=float, default=None,
                   help="hs/ht ratio for the fixed-ratio policy")
    p.add_argument("--hs", type=float, default=None, help="manual spatial hardcore")
    p.add_argument("--ht", type=float, default=None, help="manual temporal hardcore")

    p = sub.add_parser("fit", help="fit a model structure to data")
    add_common(p)
    p.add_argument("--c-factor", type=float, default=4.0,
                   help="dummy intensity multiple of the reference intensity")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("select", help="rank candidate interaction structures by AIC")
    add_common(p)
    p.add_argument("--candidates", required=True,
                   help="JSON file: {\"candidates\": [[[r, q], ...], ...]}")
    p.add_argument("--c-factor", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("gpcf", help="estimate the pair correlation surface")
    add_common(p)
    p.add_argument("--u-grid", required=True, help="spatial grid lo:hi:n")
    p.add_argument("--v-grid", required=True, help="temporal grid lo:hi:n")
    p.add_argument("--eps-s", type=float, default=None)
    p.add_argument("--eps-t", type=float, default=None)

    p = sub.add_parser("envelope", help="global envelope test of a fitted model")
    add_common(p)
    p.add_argument("--n-sim", type=int, default=99)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--u-grid", required=True)
    p.add_argument("--v-grid", required=True)
    p.add_argument("--eps-s", type=float, default=None)
    p.add_argument("--eps-t", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=_default_threads())

    p = sub.add_parser("synth", help="write the bundled synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=2024)

    return parser


def _config_payload(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _cmd_simulate(args) -> int:
    model, window = load_model_spec(args.spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.steps is None:
        cfg = default_mh_config(model, window, seed=args.seed)
    else:
        burnin = args.burnin if args.burnin is not None else min(args.steps // 2, 10_000)
        cfg = MHConfig(steps=args.steps, burnin=burnin,
                       birth_prob=args.birth_prob, seed=args.seed)
    patterns = simulate_patterns(model, window, cfg, args.replicates,
                                 seed=args.seed, n_jobs=args.threads)
    files = []
    for k, pat in enumerate(patterns):
        name = f"pattern_{k:03d}.csv"
        save_pattern(pat, out / name)
        files.append(name)
    meta = artifact_metadata(_config_payload(args), args.seed)
    write_json(out / "simulate.json", {
        **meta,
        "command": "simulate",
        "spec": str(args.spec),
        "steps": cfg.steps,
        "burnin": cfg.burnin,
        "birth_prob": cfg.birth_prob,
        "replicates": args.replicates,
        "counts": [len(p) for p in patterns],
        "patterns": files,
    })
    print(f"simulate: wrote {len(files)} pattern(s) to {out} "
          f"(counts {[len(p) for p in patterns]})")
    return 0


def _cmd_pareto(args) -> int:
    model, window = load_model_spec(args.spec)
    data = load_pattern(args.data, window)
    pairs = interpoint_distance_pairs(data, ds_max=args.ds_max, dt_max=args.dt_max)
    front = pareto_front(pairs)
    choice = choose_hardcore(front, policy=args.policy, ratio=args.ratio,
                             hs=args.hs, ht=args.ht)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = artifact_metadata(_config_payload(args), None)
    write_json(out / "pareto.json", {
        **meta,
        "command": "pareto",
        "n_pairs": len(pairs),
        "front": [{"ds": p.ds, "dt": p.dt, "i": p.i, "j": p.j} for p in front.points],
        "dominated_count": front.dominated_count,
        "policy": choice.policy,
        "hs": choice.hs,
        "ht": choice.ht,
        "area": choice.area,
    })
    print(f"pareto: front size {front.size} of {len(pairs)} pairs; "
          f"chose hs={choice.hs:.6g}, ht={choice.ht:.6g} ({choice.policy})")
    return 0


def _fit_payload(result) -> dict:
    return {
        "names": list(result.names),
        "coefficients": result.coefficients,
        "se": result.se,
        "pvalues": result.pvalues,
        "gammas": result.gammas,
        "log_lik": result.log_lik,
        "aic": result.aic,
        "converged": result.converged,
        "iterations": result.iterations,
        "max_score": result.max_score,
        "n_rows": result.n_rows,
        "notes": list(result.notes),
    }


def _fitted_model(structure: GibbsModel, result) -> GibbsModel:
    trend = structure.trend
    names = trend.names
    beta = {name: float(result.coefficients[k + 1]) for k, name in enumerate(names)}
    has_time = "t" in result.names[: result.n_trend]
    alpha = float(result.coefficients[result.n_trend - 1]) if has_time else 0.0
    new_trend = TrendModel(
        beta0=float(result.coefficients[0]),
        beta=beta,
        alpha=alpha,
        covariates=trend.covariates,
    )
    gammas = result.gammas
    comps = tuple(
        InteractionComponent(gamma=float(gammas[j]), r=c.r, q=c.q, saturation=c.saturation)
        for j, c in enumerate(structure.components)
    )
    return GibbsModel(trend=new_trend, components=comps, hs=structure.hs, ht=structure.ht)


def _cmd_fit(args) -> int:
    structure, window = load_model_spec(args.spec)
    data = load_pattern(args.data, window)
    rng = make_rng(args.seed, stream=0)
    result = fit_gibbs(data, structure, c_factor=args.c_factor, rng=rng)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = artifact_metadata(_config_payload(args), args.seed)
    write_json(out / "fit.json", {**meta, "command": "fit", **_fit_payload(result)})
    fitted = _fitted_model(structure, result)
    manifest = read_json(args.spec).get("covariates")
    save_model_spec(out / "fitted_model.json", fitted, window,
                    covariates_manifest=(str(Path(args.spec).parent.resolve() / manifest)
                                         if manifest else None),
                    mask_path="fitted_mask.txt")
    print(result.summary())
    print(f"fit: wrote {out / 'fit.json'} and {out / 'fitted_model.json'}")
    return 0


def _cmd_select(args) -> int:
    structure, window = load_model_spec(args.spec)
    data = load_pattern(args.data, window)
    spec = read_json(args.candidates)
    if "candidates" not in spec or not isinstance(spec["candidates"], list):
        raise ConfigError(f"{args.candidates}: expected a 'candidates' list")
    candidates = [[(float(r), float(q)) for r, q in cand] for cand in spec["candidates"]]
    rng = make_rng(args.seed, stream=0)
    quad = prepare_quadrature(data, structure, c_factor=args.c_factor, rng=rng)
    ranked = select_irregular(data, candidates, structure,
                              c_factor=args.c_factor, quadrature=quad)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = artifact_metadata(_config_payload(args), args.seed)
    rows = []
    for cf in ranked:
        rows.append({
            "radii": [list(rq) for rq in cf.radii],
            "aic": None if cf.result is None else cf.result.aic,
            "log_lik": None if cf.result is None else cf.result.log_lik,
            "gammas": None if cf.result is None else cf.result.gammas,
            "converged": None if cf.result is None else cf.result.converged,
            "note": cf.note,
        })
    write_json(out / "select.json", {
        **meta,
        "command": "select",
        "dummy_count": len(quad.dummies),
        "ranking": rows,
    })
    best = ranked[0]
    print(f"select: best candidate {best.radii} "
          f"(AIC {best.result.aic:.3f})" if best.result else "select: no valid candidate")
    for cf in ranked:
        tag = f"AIC {cf.result.aic:.3f}" if cf.result else f"skipped: {cf.note}"
        print(f"  {cf.radii}: {tag}")
    return 0


def _cmd_gpcf(args) -> int:
    model, window = load_model_spec(args.spec)
    data = load_pattern(args.data, window)
    u_grid = _parse_grid(args.u_grid)
    v_grid = _parse_grid(args.v_grid)
    if model.trend.homogeneous:
        intensity = len(data) / window.volume
    else:
        field = build_trend_field(model.trend)

        def intensity(xs, ys, ts):
            return np.exp(field.log_at(xs, ys, ts))

    surf = estimate_gpcf(data, intensity, u_grid, v_grid,
                         eps_s=args.eps_s, eps_t=args.eps_t)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = artifact_metadata(_config_payload(args), None)
    write_json(out / "gpcf.json", {
        **meta,
        "command": "gpcf",
        "u": surf.u,
        "v": surf.v,
        "values": surf.values,
        "eps_s": surf.eps_s,
        "eps_t": surf.eps_t,
        "n_pairs": surf.n_pairs,
    })
    print(f"gpcf: {surf.values.shape[0]}x{surf.values.shape[1]} surface, "
          f"bandwidths ({surf.eps_s:.6g}, {surf.eps_t:.6g}), {surf.n_pairs} pairs; "
          f"wrote {out / 'gpcf.json'}")
    return 0


def _cmd_envelope(args) -> int:
    model, window = load_model_spec(args.spec)
    data = load_pattern(args.data, window)
    u_grid = _parse_grid(args.u_grid)
    v_grid = _parse_grid(args.v_grid)
    cfg = None
    if args.steps is not None:
        cfg = MHConfig(steps=args.steps, burnin=min(args.steps // 2, 10_000),
                       birth_prob=0.5, seed=args.seed)
    result = envelope_test(
        data, model, args.n_sim, u_grid, v_grid,
        cfg=cfg, seed=args.seed, level=args.level,
        eps_s=args.eps_s, eps_t=args.eps_t, n_jobs=args.threads,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = artifact_metadata(_config_payload(args), args.seed)
    write_json(out / "envelope.json", {
        **meta,
        "command": "envelope",
        "n_sim": result.n_sim,
        "level": result.level,
        "p_erl": result.p_erl,
        "erl_obs": result.erl_obs,
        "significant": result.significant,
        "u": result.u,
        "v": result.v,
        "observed": result.observed,
        "pointwise_lo": result.lo,
        "pointwise_hi": result.hi,
        "global_lo": result.global_lo,
        "global_hi": result.global_hi,
        "significant_cells": result.significant_cells.astype(int),
        "eps_s": result.eps_s,
        "eps_t": result.eps_t,
    })
    verdict = "INCOMPATIBLE with the model" if result.significant else "compatible with the model"
    print(f"envelope: p_erl = {result.p_erl:.4f} over {result.n_sim} simulations; "
          f"data {verdict} at level {result.level}; wrote {out / 'envelope.json'}")
    return 0


def _cmd_synth(args) -> int:
    summary = write_synthetic_dataset(args.out, seed=args.seed)
    meta = artifact_metadata(_config_payload(args), args.seed)
    write_json(Path(args.out) / "synth.json", {**meta, "command": "synth", **summary})
    print(f"synth: {summary['n_events']} events on a "
          f"{summary['window_km']:.0f} km window over {summary['n_months']} months; "
          f"mask coverage {summary['mask_coverage']:.0%}; wrote {args.out}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "pareto": _cmd_pareto,
    "fit": _cmd_fit,
    "select": _cmd_select,
    "gpcf": _cmd_gpcf,
    "envelope": _cmd_envelope,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except STGibbsError as exc:
        print(f"stgibbs {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
