"""Benchmark the compiled kernels against the pure-Python reference.

Times the two hot paths — the birth-death chain and the pair-correlation
kernel accumulation — through both backends and reports throughput plus
speedup. The chain is driven through the public sampler with the backend
swapped, so both runs include identical marshalling overhead.

Usage:
    python3 benchmarks/bench_kernels.py [--chain-steps N] [--pairs N]
"""

from __future__ import annotations

import argparse
from time import perf_counter

import numpy as np

import stgibbs.simulate as simulate_mod
from stgibbs import (
    GibbsModel,
    InteractionComponent,
    MHConfig,
    homogeneous_trend,
    run_birth_death_mh,
    unit_cube,
)
from stgibbs._kernels import reference

try:
    from stgibbs._kernels import _core as core
except ImportError:
    core = None


def _model():
    return GibbsModel(
        trend=homogeneous_trend(80.0),
        components=(
            InteractionComponent(gamma=0.7, r=0.05, q=0.05),
            InteractionComponent(gamma=1.2, r=0.1, q=0.1),
        ),
        hs=0.01,
        ht=0.01,
    )


def bench_chain(impl, steps: int) -> float:
    """Chain throughput in MH steps per second."""
    window = unit_cube()
    model = _model()
    cfg = MHConfig(steps=steps, burnin=0)
    old = simulate_mod._kernels
    simulate_mod._kernels = impl
    try:
        run_birth_death_mh(model, window, MHConfig(steps=200, burnin=0),
                           rng=np.random.default_rng(0))  # warm-up
        t0 = perf_counter()
        run_birth_death_mh(model, window, cfg, rng=np.random.default_rng(1))
        elapsed = perf_counter() - t0
    finally:
        simulate_mod._kernels = old
    return steps / elapsed


def bench_gpcf(impl, n_pairs: int, grid_n: int = 8) -> float:
    """Kernel-product accumulation throughput in (pair, cell) evals per second."""
    rng = np.random.default_rng(2)
    ds = rng.uniform(0.0, 0.3, n_pairs)
    dt = rng.uniform(0.0, 0.3, n_pairs)
    weights = rng.uniform(0.5, 2.0, n_pairs)
    u = np.linspace(0.05, 0.25, grid_n)
    v = np.linspace(0.05, 0.25, grid_n)
    impl.gpcf_accumulate(ds[:500], dt[:500], weights[:500], u, v, 0.05, 0.05)  # warm-up
    t0 = perf_counter()
    impl.gpcf_accumulate(ds, dt, weights, u, v, 0.05, 0.05)
    elapsed = perf_counter() - t0
    return n_pairs * grid_n * grid_n / elapsed


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--chain-steps", type=int, default=200_000,
                    help="chain length for the compiled backend")
    ap.add_argument("--pairs", type=int, default=400_000,
                    help="pair count for the accumulation benchmark")
    args = ap.parse_args()

    rows = []

    # The reference chain is much slower; give it a shorter run — the
    # reported rate is length-invariant.
    py_chain = bench_chain(reference, max(2_000, args.chain_steps // 50))
    py_gpcf = bench_gpcf(reference, args.pairs)
    if core is not None:
        c_chain = bench_chain(core, args.chain_steps)
        c_gpcf = bench_gpcf(core, args.pairs)
        rows.append(("birth-death chain", f"{c_chain:10.3g} steps/s",
                     f"{py_chain:10.3g} steps/s", f"{c_chain / py_chain:6.1f}x"))
        rows.append(("gpcf accumulation", f"{c_gpcf:10.3g} evals/s",
                     f"{py_gpcf:10.3g} evals/s", f"{c_gpcf / py_gpcf:6.1f}x"))
    else:
        rows.append(("birth-death chain", "unavailable",
                     f"{py_chain:10.3g} steps/s", "-"))
        rows.append(("gpcf accumulation", "unavailable",
                     f"{py_gpcf:10.3g} evals/s", "-"))

    print(f"{'kernel':<20} {'compiled':>20} {'python':>20} {'speedup':>8}")
    for name, c, p, s in rows:
        print(f"{name:<20} {c:>20} {p:>20} {s:>8}")
    if core is None:
        print("\ncompiled backend not importable; showing the reference only")


if __name__ == "__main__":
    main()
