"""Pure numpy implementation of the computational kernels.

This module is the reference semantics for ``stgibbs._kernels._core`` (the
Cython build of the same kernels). The two are interchangeable: integer
results are identical, and the Metropolis-Hastings chain is bitwise
reproducible across backends because both consume scalar doubles from the
same PCG64 bit generator in the same order and perform the per-step float
arithmetic in the same sequence.

Conventions shared by every kernel here:

* a point pattern is three aligned float64 arrays ``xs, ys, ts``;
* cylinder membership is closed: spatial distance ``<= r`` AND absolute
  time separation ``<= q``;
* squared spatial thresholds are passed in (``r2s = r**2``) so no square
  roots are taken on the hot path;
* a negative squared hardcore radius disables the hardcore test.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"


def point_stats(xs, ys, ts, cx, cy, ct, r2s, qs, hs2, ht, skip_equal):
    """Per-scale neighbor counts of a center point, plus a hardcore flag.

    Parameters
    ----------
    xs, ys, ts : float64 arrays
        The pattern searched for neighbors.
    cx, cy, ct : float
        The center point.
    r2s, qs : float64 arrays, ascending
        Squared spatial radii and temporal radii of the interaction scales.
    hs2, ht : float
        Squared spatial hardcore distance and temporal hardcore distance.
        ``hs2 < 0`` disables the hardcore test.
    skip_equal : bool
        If true, points exactly coinciding with the center are ignored
        (used when the center is itself a member of the pattern).

    Returns
    -------
    ok : int
        0 if some counted point falls inside the closed hardcore cylinder,
        else 1.
    counts : int64 array
        ``counts[j]`` is the number of counted points in the closed
        cylinder of scale j.
    """
    n = xs.shape[0]
    m = r2s.shape[0]
    counts = np.zeros(m, dtype=np.int64)
    if n == 0:
        return 1, counts
    dx = xs - cx
    dy = ys - cy
    ds2 = dx * dx + dy * dy
    adt = np.abs(ts - ct)
    if skip_equal:
        keep = ~((ds2 == 0.0) & (adt == 0.0))
    else:
        keep = np.ones(n, dtype=bool)
    ok = 1
    if hs2 >= 0.0 and bool(np.any(keep & (ds2 <= hs2) & (adt <= ht))):
        ok = 0
    for j in range(m):
        counts[j] = np.count_nonzero(keep & (ds2 <= r2s[j]) & (adt <= qs[j]))
    return ok, counts


def close_pair_count(xs, ys, ts, r, q):
    """Number of unordered pairs with spatial distance <= r and time gap <= q."""
    n = xs.shape[0]
    r2 = r * r
    total = 0
    for i in range(n - 1):
        dx = xs[i + 1 :] - xs[i]
        dy = ys[i + 1 :] - ys[i]
        adt = np.abs(ts[i + 1 :] - ts[i])
        total += int(np.count_nonzero((dx * dx + dy * dy <= r2) & (adt <= q)))
    return total


def pair_scale_counts(xs, ys, ts, r2s, qs, hs2, ht):
    """Unordered close-pair counts for every scale, plus a hardcore flag.

    Returns ``(violated, counts)`` where ``violated`` is 1 if any pair falls
    inside the closed hardcore cylinder and ``counts[j]`` is the number of
    unordered pairs inside the closed cylinder of scale j.
    """
    n = xs.shape[0]
    m = r2s.shape[0]
    counts = np.zeros(m, dtype=np.int64)
    violated = 0
    for i in range(n - 1):
        dx = xs[i + 1 :] - xs[i]
        dy = ys[i + 1 :] - ys[i]
        ds2 = dx * dx + dy * dy
        adt = np.abs(ts[i + 1 :] - ts[i])
        if hs2 >= 0.0 and not violated and bool(np.any((ds2 <= hs2) & (adt <= ht))):
            violated = 1
        for j in range(m):
            counts[j] += np.count_nonzero((ds2 <= r2s[j]) & (adt <= qs[j]))
    return violated, counts


def pairs_within(xs, ys, ts, ds_max, dt_max):
    """All unordered pairs with ds <= ds_max and dt <= dt_max.

    Returns ``(ii, jj, ds, dt)`` with ``ii < jj``, ordered by (i, j).
    Either cap may be ``inf``.
    """
    n = xs.shape[0]
    ds2_max = ds_max * ds_max
    ii_parts, jj_parts, ds_parts, dt_parts = [], [], [], []
    for i in range(n - 1):
        dx = xs[i + 1 :] - xs[i]
        dy = ys[i + 1 :] - ys[i]
        ds2 = dx * dx + dy * dy
        adt = np.abs(ts[i + 1 :] - ts[i])
        sel = np.nonzero((ds2 <= ds2_max) & (adt <= dt_max))[0]
        if sel.size:
            ii_parts.append(np.full(sel.size, i, dtype=np.int64))
            jj_parts.append(sel.astype(np.int64) + (i + 1))
            ds_parts.append(np.sqrt(ds2[sel]))
            dt_parts.append(adt[sel])
    if not ii_parts:
        e_i = np.empty(0, dtype=np.int64)
        e_f = np.empty(0, dtype=np.float64)
        return e_i, e_i.copy(), e_f, e_f.copy()
    return (
        np.concatenate(ii_parts),
        np.concatenate(jj_parts),
        np.concatenate(ds_parts),
        np.concatenate(dt_parts),
    )


def hardcore_conflicts(pxs, pys, pts, xs, ys, ts, hs, ht):
    """Mask of probe points lying in the closed hardcore cylinder of any data point."""
    out = np.zeros(pxs.shape[0], dtype=bool)
    hs2 = hs * hs
    for k in range(xs.shape[0]):
        dx = pxs - xs[k]
        dy = pys - ys[k]
        adt = np.abs(pts - ts[k])
        out |= (dx * dx + dy * dy <= hs2) & (adt <= ht)
    return out


def _trend_log_at(log_trend, gx0, gy0, gdx, gdy, gt0, gdt, alpha, x, y, t):
    """Nearest-cell lookup into the log-trend grid plus the continuous time term."""
    nt, ny, nx = log_trend.shape
    if nx == 1:
        ix = 0
    else:
        ix = int((x - gx0) / gdx)
        if ix < 0:
            ix = 0
        elif ix >= nx:
            ix = nx - 1
    if ny == 1:
        iy = 0
    else:
        iy = int((y - gy0) / gdy)
        if iy < 0:
            iy = 0
        elif iy >= ny:
            iy = ny - 1
    if nt == 1:
        it = 0
    else:
        it = int((t - gt0) / gdt)
        if it < 0:
            it = 0
        elif it >= nt:
            it = nt - 1
    return log_trend[it, iy, ix] + alpha * t


def run_chain(
    bit_generator,
    steps,
    p_birth,
    wx0,
    wx1,
    wy0,
    wy1,
    wt0,
    wt1,
    mask,
    log_trend,
    gx0,
    gy0,
    gdx,
    gdy,
    gt0,
    gdt,
    alpha,
    r2s,
    qs,
    log_gammas,
    sats,
    hs2,
    ht,
    vol_w,
    odds,
    init_xs,
    init_ys,
    init_ts,
):
    """Birth-death Metropolis-Hastings chain over spatio-temporal patterns.

    Each step draws, in this fixed order:

    * ``u_move``: birth if ``u_move < p_birth`` else death;
    * birth: ``(ux, uy)`` pairs repeatedly until the proposal lands inside
      the window mask, then ``ut``, then ``u_acc``;
    * death on a non-empty pattern: ``u_idx`` then ``u_acc``;
    * death on an empty pattern consumes nothing further (auto-reject).

    The acceptance ratios are ``lambda * vol_w / ((n + 1) * odds)`` for a
    birth and ``n * odds / (lambda * vol_w)`` for a death, with ``odds =
    p_birth / (1 - p_birth)`` and ``lambda`` the conditional intensity of the
    proposed (respectively removed) point. A hardcore conflict forces
    ``lambda = 0``: births are rejected outright and deaths accepted.

    Deletion swaps the last point into the freed slot, so the in-memory
    point order is a deterministic function of the draw sequence.

    Returns ``(xs, ys, ts, counts)`` with one count per step.
    """
    rng = np.random.Generator(bit_generator)
    m = r2s.shape[0]
    n = init_xs.shape[0]
    cap = max(64, 2 * n + 16)
    xs = np.empty(cap, dtype=np.float64)
    ys = np.empty(cap, dtype=np.float64)
    ts = np.empty(cap, dtype=np.float64)
    xs[:n] = init_xs
    ys[:n] = init_ys
    ts[:n] = init_ts
    counts = np.empty(steps, dtype=np.int64)
    wxw = wx1 - wx0
    wyw = wy1 - wy0
    wtw = wt1 - wt0
    use_mask = mask is not None
    if use_mask:
        mny, mnx = mask.shape
        mdx = wxw / mnx
        mdy = wyw / mny

    for step in range(steps):
        u_move = rng.random()
        if u_move < p_birth:
            while True:
                px = wx0 + wxw * rng.random()
                py = wy0 + wyw * rng.random()
                if not use_mask:
                    break
                ix = int((px - wx0) / mdx)
                if ix >= mnx:
                    ix = mnx - 1
                iy = int((py - wy0) / mdy)
                if iy >= mny:
                    iy = mny - 1
                if mask[iy, ix]:
                    break
            pt = wt0 + wtw * rng.random()
            u_acc = rng.random()
            ok, s = point_stats(xs[:n], ys[:n], ts[:n], px, py, pt, r2s, qs, hs2, ht, False)
            if ok:
                logl = _trend_log_at(log_trend, gx0, gy0, gdx, gdy, gt0, gdt, alpha, px, py, pt)
                for j in range(m):
                    c = float(s[j])
                    if sats[j] >= 0.0 and c > sats[j]:
                        c = sats[j]
                    logl += c * log_gammas[j]
                ratio = math.exp(logl) * vol_w / ((n + 1) * odds)
                if u_acc < ratio:
                    if n == cap:
                        cap *= 2
                        xs = _grow(xs, cap)
                        ys = _grow(ys, cap)
                        ts = _grow(ts, cap)
                    xs[n] = px
                    ys[n] = py
                    ts[n] = pt
                    n += 1
        else:
            if n > 0:
                u_idx = rng.random()
                i = int(u_idx * n)
                if i >= n:
                    i = n - 1
                u_acc = rng.random()
                px = xs[i]
                py = ys[i]
                pt = ts[i]
                ok, s = point_stats(xs[:n], ys[:n], ts[:n], px, py, pt, r2s, qs, hs2, ht, True)
                accept = True
                if ok:
                    logl = _trend_log_at(
                        log_trend, gx0, gy0, gdx, gdy, gt0, gdt, alpha, px, py, pt
                    )
                    for j in range(m):
                        c = float(s[j])
                        if sats[j] >= 0.0 and c > sats[j]:
                            c = sats[j]
                        logl += c * log_gammas[j]
                    ratio = n * odds / (math.exp(logl) * vol_w)
                    accept = u_acc < ratio
                if accept:
                    n -= 1
                    xs[i] = xs[n]
                    ys[i] = ys[n]
                    ts[i] = ts[n]
        counts[step] = n
    return xs[:n].copy(), ys[:n].copy(), ts[:n].copy(), counts


def _grow(a, cap):
    out = np.empty(cap, dtype=np.float64)
    out[: a.shape[0]] = a
    return out


def gpcf_accumulate(
    ds,
    dt,
    weights,
    u_grid,
    v_grid,
    eps_s,
    eps_t,
):
    """Kernel-smoothed accumulation of weighted pair distances onto a grid.

    For every grid cell (u, v) accumulates

        sum over pairs of k((u - ds) / eps_s) k((v - dt) / eps_t) * w / (eps_s eps_t)

    with k the Epanechnikov kernel ``0.75 (1 - x^2)`` on ``|x| <= 1``.
    The per-pair weight already carries the ordered-pair multiplicity, the
    intensity product, and the edge-correction denominators.

    Returns a float64 array of shape (len(u_grid), len(v_grid)).
    """
    out = np.zeros((u_grid.shape[0], v_grid.shape[0]), dtype=np.float64)
    if ds.shape[0] == 0:
        return out
    inv = 1.0 / (eps_s * eps_t)
    chunk = 200_000
    for lo in range(0, ds.shape[0], chunk):
        hi = min(lo + chunk, ds.shape[0])
        su = (u_grid[:, None] - ds[None, lo:hi]) / eps_s
        ku = np.where(np.abs(su) <= 1.0, 0.75 * (1.0 - su * su), 0.0)
        sv = (v_grid[:, None] - dt[None, lo:hi]) / eps_t
        kv = np.where(np.abs(sv) <= 1.0, 0.75 * (1.0 - sv * sv), 0.0)
        out += (ku * weights[None, lo:hi]) @ kv.T * inv
    return out
