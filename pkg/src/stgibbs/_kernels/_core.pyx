# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementation of the computational kernels.

Semantics are defined by ``stgibbs._kernels.reference``; this module is a
drop-in replacement built for speed. Integer results match the reference
exactly, and ``run_chain`` is bitwise reproducible against it: both draw
scalar doubles straight from the same PCG64 bit generator in the same order
and do the per-step float arithmetic in the same sequence.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp as c_exp
from libc.math cimport sqrt as c_sqrt

import numpy as np

cimport numpy as cnp
from numpy.random cimport bitgen_t

cnp.import_array()

BACKEND = "compiled"


cdef inline int _stats_at(
    const double* xs, const double* ys, const double* ts, Py_ssize_t n,
    double cx, double cy, double ct,
    const double* r2s, const double* qs, Py_ssize_t m,
    double hs2, double ht, bint skip_equal,
    long long* s_out,
) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double dx, dy, ds2, adt
    cdef int ok = 1
    for j in range(m):
        s_out[j] = 0
    for i in range(n):
        dx = xs[i] - cx
        dy = ys[i] - cy
        ds2 = dx * dx + dy * dy
        adt = ts[i] - ct
        if adt < 0.0:
            adt = -adt
        if skip_equal and ds2 == 0.0 and adt == 0.0:
            continue
        if hs2 >= 0.0 and ds2 <= hs2 and adt <= ht:
            ok = 0
        for j in range(m):
            if ds2 <= r2s[j] and adt <= qs[j]:
                s_out[j] += 1
    return ok


def point_stats(
    double[::1] xs, double[::1] ys, double[::1] ts,
    double cx, double cy, double ct,
    double[::1] r2s, double[::1] qs,
    double hs2, double ht, bint skip_equal,
):
    """See ``stgibbs._kernels.reference.point_stats``."""
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t m = r2s.shape[0]
    counts = np.zeros(m, dtype=np.int64)
    cdef long long[::1] cv = counts
    cdef int ok
    cdef const double* pr2s = &r2s[0] if m > 0 else NULL
    cdef const double* pqs = &qs[0] if m > 0 else NULL
    cdef long long* pc = &cv[0] if m > 0 else NULL
    if n == 0:
        return 1, counts
    ok = _stats_at(&xs[0], &ys[0], &ts[0], n, cx, cy, ct,
                   pr2s, pqs, m, hs2, ht, skip_equal, pc)
    return ok, counts


def close_pair_count(double[::1] xs, double[::1] ys, double[::1] ts, double r, double q):
    """See ``stgibbs._kernels.reference.close_pair_count``."""
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t i, j
    cdef double r2 = r * r
    cdef double dx, dy, adt
    cdef long long total = 0
    with nogil:
        for i in range(n - 1):
            for j in range(i + 1, n):
                dx = xs[j] - xs[i]
                dy = ys[j] - ys[i]
                adt = ts[j] - ts[i]
                if adt < 0.0:
                    adt = -adt
                if dx * dx + dy * dy <= r2 and adt <= q:
                    total += 1
    return int(total)


def pair_scale_counts(
    double[::1] xs, double[::1] ys, double[::1] ts,
    double[::1] r2s, double[::1] qs, double hs2, double ht,
):
    """See ``stgibbs._kernels.reference.pair_scale_counts``."""
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t m = r2s.shape[0]
    counts = np.zeros(m, dtype=np.int64)
    cdef long long[::1] cv = counts
    cdef Py_ssize_t i, j, k
    cdef double dx, dy, ds2, adt
    cdef int violated = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            dx = xs[j] - xs[i]
            dy = ys[j] - ys[i]
            ds2 = dx * dx + dy * dy
            adt = ts[j] - ts[i]
            if adt < 0.0:
                adt = -adt
            if hs2 >= 0.0 and ds2 <= hs2 and adt <= ht:
                violated = 1
            for k in range(m):
                if ds2 <= r2s[k] and adt <= qs[k]:
                    cv[k] += 1
    return violated, counts


def pairs_within(double[::1] xs, double[::1] ys, double[::1] ts, double ds_max, double dt_max):
    """See ``stgibbs._kernels.reference.pairs_within``."""
    cdef Py_ssize_t n = xs.shape[0]
    cdef double ds2_max = ds_max * ds_max
    cdef Py_ssize_t i, j
    cdef double dx, dy, ds2, adt
    cdef Py_ssize_t total = 0
    with nogil:
        for i in range(n - 1):
            for j in range(i + 1, n):
                dx = xs[j] - xs[i]
                dy = ys[j] - ys[i]
                adt = ts[j] - ts[i]
                if adt < 0.0:
                    adt = -adt
                if dx * dx + dy * dy <= ds2_max and adt <= dt_max:
                    total += 1
    ii = np.empty(total, dtype=np.int64)
    jj = np.empty(total, dtype=np.int64)
    ds = np.empty(total, dtype=np.float64)
    dt = np.empty(total, dtype=np.float64)
    if total == 0:
        return ii, jj, ds, dt
    cdef long long[::1] iv = ii
    cdef long long[::1] jv = jj
    cdef double[::1] dsv = ds
    cdef double[::1] dtv = dt
    cdef Py_ssize_t k = 0
    with nogil:
        for i in range(n - 1):
            for j in range(i + 1, n):
                dx = xs[j] - xs[i]
                dy = ys[j] - ys[i]
                ds2 = dx * dx + dy * dy
                adt = ts[j] - ts[i]
                if adt < 0.0:
                    adt = -adt
                if ds2 <= ds2_max and adt <= dt_max:
                    iv[k] = i
                    jv[k] = j
                    dsv[k] = c_sqrt(ds2)
                    dtv[k] = adt
                    k += 1
    return ii, jj, ds, dt


def hardcore_conflicts(
    double[::1] pxs, double[::1] pys, double[::1] pts,
    double[::1] xs, double[::1] ys, double[::1] ts,
    double hs, double ht,
):
    """See ``stgibbs._kernels.reference.hardcore_conflicts``."""
    cdef Py_ssize_t np_ = pxs.shape[0]
    cdef Py_ssize_t nd = xs.shape[0]
    out = np.zeros(np_, dtype=bool)
    cdef unsigned char[::1] ov = out.view(np.uint8)
    cdef double hs2 = hs * hs
    cdef Py_ssize_t i, k
    cdef double dx, dy, adt
    with nogil:
        for i in range(np_):
            for k in range(nd):
                dx = pxs[i] - xs[k]
                dy = pys[i] - ys[k]
                adt = pts[i] - ts[k]
                if adt < 0.0:
                    adt = -adt
                if dx * dx + dy * dy <= hs2 and adt <= ht:
                    ov[i] = 1
                    break
    return out


cdef inline double _trend_log_at(
    const double* log_trend, Py_ssize_t nt, Py_ssize_t ny, Py_ssize_t nx,
    double gx0, double gy0, double gdx, double gdy,
    double gt0, double gdt, double alpha,
    double x, double y, double t,
) noexcept nogil:
    cdef Py_ssize_t ix, iy, it
    if nx == 1:
        ix = 0
    else:
        ix = <Py_ssize_t>((x - gx0) / gdx)
        if ix < 0:
            ix = 0
        elif ix >= nx:
            ix = nx - 1
    if ny == 1:
        iy = 0
    else:
        iy = <Py_ssize_t>((y - gy0) / gdy)
        if iy < 0:
            iy = 0
        elif iy >= ny:
            iy = ny - 1
    if nt == 1:
        it = 0
    else:
        it = <Py_ssize_t>((t - gt0) / gdt)
        if it < 0:
            it = 0
        elif it >= nt:
            it = nt - 1
    return log_trend[(it * ny + iy) * nx + ix] + alpha * t


def run_chain(
    bit_generator,
    Py_ssize_t steps,
    double p_birth,
    double wx0, double wx1, double wy0, double wy1, double wt0, double wt1,
    mask,
    log_trend_arr,
    double gx0, double gy0, double gdx, double gdy, double gt0, double gdt,
    double alpha,
    double[::1] r2s, double[::1] qs, double[::1] log_gammas, double[::1] sats,
    double hs2, double ht,
    double vol_w, double odds,
    double[::1] init_xs, double[::1] init_ys, double[::1] init_ts,
):
    """See ``stgibbs._kernels.reference.run_chain``."""
    cdef bitgen_t* rng = <bitgen_t*> PyCapsule_GetPointer(
        bit_generator.capsule, "BitGenerator")

    cdef double[:, :, ::1] trend_v = np.ascontiguousarray(log_trend_arr, dtype=np.float64)
    cdef Py_ssize_t tnt = trend_v.shape[0]
    cdef Py_ssize_t tny = trend_v.shape[1]
    cdef Py_ssize_t tnx = trend_v.shape[2]
    cdef const double* trend_p = &trend_v[0, 0, 0]

    cdef bint use_mask = mask is not None
    cdef unsigned char[:, ::1] mask_v
    cdef const unsigned char* mask_p = NULL
    cdef Py_ssize_t mny = 0, mnx = 0
    cdef double mdx = 0.0, mdy = 0.0
    cdef double wxw = wx1 - wx0
    cdef double wyw = wy1 - wy0
    cdef double wtw = wt1 - wt0
    if use_mask:
        mask_v = np.ascontiguousarray(mask, dtype=np.uint8)
        mny = mask_v.shape[0]
        mnx = mask_v.shape[1]
        mask_p = &mask_v[0, 0]
        mdx = wxw / mnx
        mdy = wyw / mny

    cdef Py_ssize_t m = r2s.shape[0]
    cdef const double* pr2s = &r2s[0] if m > 0 else NULL
    cdef const double* pqs = &qs[0] if m > 0 else NULL
    cdef const double* plg = &log_gammas[0] if m > 0 else NULL
    cdef const double* psat = &sats[0] if m > 0 else NULL

    s_buf = np.zeros(max(m, 1), dtype=np.int64)
    cdef long long[::1] s_v = s_buf
    cdef long long* s_p = &s_v[0]

    cdef Py_ssize_t n = init_xs.shape[0]
    cdef Py_ssize_t cap = max(64, 2 * n + 16)
    xs_arr = np.empty(cap, dtype=np.float64)
    ys_arr = np.empty(cap, dtype=np.float64)
    ts_arr = np.empty(cap, dtype=np.float64)
    xs_arr[:n] = init_xs
    ys_arr[:n] = init_ys
    ts_arr[:n] = init_ts
    cdef double[::1] xs = xs_arr
    cdef double[::1] ys = ys_arr
    cdef double[::1] ts = ts_arr

    counts = np.empty(steps, dtype=np.int64)
    cdef long long[::1] counts_v = counts

    cdef Py_ssize_t step, i, j, ix, iy
    cdef double u_move, u_acc, px, py, pt, logl, ratio, c
    cdef int ok
    cdef bint accept

    for step in range(steps):
        u_move = rng.next_double(rng.state)
        if u_move < p_birth:
            while True:
                px = wx0 + wxw * rng.next_double(rng.state)
                py = wy0 + wyw * rng.next_double(rng.state)
                if not use_mask:
                    break
                ix = <Py_ssize_t>((px - wx0) / mdx)
                if ix >= mnx:
                    ix = mnx - 1
                iy = <Py_ssize_t>((py - wy0) / mdy)
                if iy >= mny:
                    iy = mny - 1
                if mask_p[iy * mnx + ix]:
                    break
            pt = wt0 + wtw * rng.next_double(rng.state)
            u_acc = rng.next_double(rng.state)
            ok = _stats_at(&xs[0], &ys[0], &ts[0], n, px, py, pt,
                           pr2s, pqs, m, hs2, ht, 0, s_p)
            if ok:
                logl = _trend_log_at(trend_p, tnt, tny, tnx,
                                     gx0, gy0, gdx, gdy, gt0, gdt, alpha,
                                     px, py, pt)
                for j in range(m):
                    c = <double> s_p[j]
                    if psat[j] >= 0.0 and c > psat[j]:
                        c = psat[j]
                    logl += c * plg[j]
                ratio = c_exp(logl) * vol_w / ((n + 1) * odds)
                if u_acc < ratio:
                    if n == cap:
                        cap *= 2
                        xs_new = np.empty(cap, dtype=np.float64)
                        ys_new = np.empty(cap, dtype=np.float64)
                        ts_new = np.empty(cap, dtype=np.float64)
                        xs_new[:n] = xs_arr[:n]
                        ys_new[:n] = ys_arr[:n]
                        ts_new[:n] = ts_arr[:n]
                        xs_arr, ys_arr, ts_arr = xs_new, ys_new, ts_new
                        xs = xs_arr
                        ys = ys_arr
                        ts = ts_arr
                    xs[n] = px
                    ys[n] = py
                    ts[n] = pt
                    n += 1
        else:
            if n > 0:
                u_acc = rng.next_double(rng.state)
                i = <Py_ssize_t>(u_acc * n)
                if i >= n:
                    i = n - 1
                u_acc = rng.next_double(rng.state)
                px = xs[i]
                py = ys[i]
                pt = ts[i]
                ok = _stats_at(&xs[0], &ys[0], &ts[0], n, px, py, pt,
                               pr2s, pqs, m, hs2, ht, 1, s_p)
                accept = True
                if ok:
                    logl = _trend_log_at(trend_p, tnt, tny, tnx,
                                         gx0, gy0, gdx, gdy, gt0, gdt, alpha,
                                         px, py, pt)
                    for j in range(m):
                        c = <double> s_p[j]
                        if psat[j] >= 0.0 and c > psat[j]:
                            c = psat[j]
                        logl += c * plg[j]
                    ratio = n * odds / (c_exp(logl) * vol_w)
                    accept = u_acc < ratio
                if accept:
                    n -= 1
                    xs[i] = xs[n]
                    ys[i] = ys[n]
                    ts[i] = ts[n]
        counts_v[step] = n
    return xs_arr[:n].copy(), ys_arr[:n].copy(), ts_arr[:n].copy(), counts


cdef inline Py_ssize_t _lower_bound(double[::1] a, double x) noexcept nogil:
    cdef Py_ssize_t lo = 0
    cdef Py_ssize_t hi = a.shape[0]
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) // 2
        if a[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


def gpcf_accumulate(
    double[::1] ds, double[::1] dt, double[::1] weights,
    double[::1] u_grid, double[::1] v_grid,
    double eps_s, double eps_t,
):
    """See ``stgibbs._kernels.reference.gpcf_accumulate``.

    Accumulation order differs from the reference (pair-major rather than
    chunked matrix products), so results agree to floating round-off, not
    bitwise.
    """
    cdef Py_ssize_t nu = u_grid.shape[0]
    cdef Py_ssize_t nv = v_grid.shape[0]
    out = np.zeros((nu, nv), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t npair = ds.shape[0]
    cdef double inv = 1.0 / (eps_s * eps_t)
    cdef Py_ssize_t p, iu, iv, iu0, iv0
    cdef double d, e, w, su, sv, ku, kv
    with nogil:
        for p in range(npair):
            d = ds[p]
            e = dt[p]
            w = weights[p] * inv
            iu0 = _lower_bound(u_grid, d - eps_s)
            for iu in range(iu0, nu):
                su = (u_grid[iu] - d) / eps_s
                if su > 1.0:
                    break
                ku = 0.75 * (1.0 - su * su)
                iv0 = _lower_bound(v_grid, e - eps_t)
                for iv in range(iv0, nv):
                    sv = (v_grid[iv] - e) / eps_t
                    if sv > 1.0:
                        break
                    kv = 0.75 * (1.0 - sv * sv)
                    o[iu, iv] += ku * kv * w
    return out
