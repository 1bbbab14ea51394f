"""Windows, point patterns, and cylinder distance computations."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import stgibbs.geometry as geometry
from stgibbs import (
    ConfigError,
    DataError,
    PointPattern,
    STPoint,
    STWindow,
    close_pair_count,
    cyl_distance,
    interpoint_distance_pairs,
    neighbor_count,
    unit_cube,
)
from conftest import make_pattern, uniform_pattern


# ---------------------------------------------------------------------------
# windows
# ---------------------------------------------------------------------------


def test_unit_cube_bounds_and_volume():
    w = unit_cube()
    assert (w.x0, w.x1, w.y0, w.y1, w.t0, w.t1) == (0, 1, 0, 1, 0, 1)
    assert w.volume == 1.0
    assert w.spatial_area == 1.0
    assert w.duration == 1.0


@pytest.mark.parametrize(
    "kwargs,needle",
    [
        (dict(x0=1.0, x1=0.0, y0=0.0, y1=1.0, t0=0.0, t1=1.0), "x bounds"),
        (dict(x0=0.0, x1=1.0, y0=2.0, y1=2.0, t0=0.0, t1=1.0), "y bounds"),
        (dict(x0=0.0, x1=1.0, y0=0.0, y1=1.0, t0=5.0, t1=1.0), "t bounds"),
    ],
)
def test_window_rejects_degenerate_bounds(kwargs, needle):
    with pytest.raises(ConfigError, match=needle):
        STWindow(**kwargs)


def test_window_mask_must_be_2d_boolean():
    with pytest.raises(ConfigError, match="2d boolean raster"):
        STWindow(0, 1, 0, 1, 0, 1, mask=np.ones(4, dtype=bool))


def test_window_mask_needs_active_cells():
    with pytest.raises(ConfigError, match="no active cells"):
        STWindow(0, 1, 0, 1, 0, 1, mask=np.zeros((3, 3), dtype=bool))


def test_masked_window_scales_area_by_cell_fraction():
    mask = np.zeros((4, 4), dtype=bool)
    mask[:2, :] = True  # half of the cells active
    w = STWindow(0, 2, 0, 2, 0, 3, mask=mask)
    assert w.bounding_area == 4.0
    assert w.spatial_area == pytest.approx(2.0)
    assert w.volume == pytest.approx(6.0)


def test_mask_values_nearest_cell_lookup():
    mask = np.array([[True, False], [False, True]])
    w = STWindow(0, 1, 0, 1, 0, 1, mask=mask)
    xs = np.array([0.25, 0.75, 0.25, 0.75])
    ys = np.array([0.25, 0.25, 0.75, 0.75])
    assert w.mask_values(xs, ys).tolist() == [True, False, False, True]
    # points exactly on the upper boundary clamp into the last cell
    assert w.mask_values(np.array([1.0]), np.array([1.0])).tolist() == [True]


def test_window_contains_is_closed():
    w = unit_cube()
    inside = w.contains(np.array([0.0, 1.0]), np.array([0.0, 1.0]), np.array([0.0, 1.0]))
    assert inside.all()
    outside = w.contains(np.array([-1e-12]), np.array([0.5]), np.array([0.5]))
    assert not outside.any()


# ---------------------------------------------------------------------------
# point patterns
# ---------------------------------------------------------------------------


def test_pattern_basic_accessors(window):
    pat = make_pattern(window, [(0.1, 0.2, 0.3), (0.4, 0.5, 0.6)])
    assert len(pat) == 2
    assert pat.point(1) == STPoint(0.4, 0.5, 0.6)
    assert [(p.x, p.y, p.t) for p in pat.points()] == [(0.1, 0.2, 0.3), (0.4, 0.5, 0.6)]


def test_empty_pattern(window):
    pat = PointPattern.empty(window)
    assert len(pat) == 0
    assert pat.xs.shape == (0,)


def test_pattern_rejects_mismatched_lengths(window):
    with pytest.raises(DataError, match="equal length"):
        PointPattern(np.zeros(2), np.zeros(3), np.zeros(2), window)


def test_pattern_rejects_non_finite(window):
    with pytest.raises(DataError, match="finite"):
        PointPattern(np.array([0.5, np.nan]), np.zeros(2), np.zeros(2), window)


def test_pattern_rejects_points_outside_window(window):
    with pytest.raises(DataError, match=r"outside the observation window \(first offending index 1\)"):
        make_pattern(window, [(0.5, 0.5, 0.5), (1.5, 0.5, 0.5)])


def test_pattern_rejects_duplicates(window):
    with pytest.raises(DataError, match="not simple: duplicate point"):
        make_pattern(window, [(0.5, 0.5, 0.5), (0.2, 0.2, 0.2), (0.5, 0.5, 0.5)])


def test_pattern_rejects_points_outside_mask():
    mask = np.array([[True, False]])  # right half inactive
    w = STWindow(0, 1, 0, 1, 0, 1, mask=mask)
    make_pattern(w, [(0.25, 0.5, 0.5)])  # active half is fine
    with pytest.raises(DataError, match="outside the observation window"):
        make_pattern(w, [(0.75, 0.5, 0.5)])


# ---------------------------------------------------------------------------
# cylinder distances
# ---------------------------------------------------------------------------


def test_cyl_distance_hand_value():
    ds, dt = cyl_distance(STPoint(0, 0, 0), STPoint(3, 4, -5))
    assert ds == 5.0
    assert dt == 5.0


@given(
    ax=st.floats(-5, 5), ay=st.floats(-5, 5), at=st.floats(-5, 5),
    bx=st.floats(-5, 5), by=st.floats(-5, 5), bt=st.floats(-5, 5),
)
def test_cyl_distance_symmetric(ax, ay, at, bx, by, bt):
    a, b = STPoint(ax, ay, at), STPoint(bx, by, bt)
    assert cyl_distance(a, b) == cyl_distance(b, a)
    ds, dt = cyl_distance(a, b)
    assert ds >= 0.0 and dt >= 0.0


def test_neighbor_count_boundaries_are_closed(window):
    # dyadic coordinates so the boundary separations are exactly representable
    pat = make_pattern(window, [(0.5, 0.5, 0.5), (0.625, 0.5, 0.5), (0.5, 0.5, 0.75)])
    center = STPoint(0.5, 0.5, 0.5)
    # first point coincides with the center; second at ds=0.125 exactly;
    # third at dt=0.25 exactly — closed boundaries include both
    assert neighbor_count(center, pat, r=0.125, q=0.25) == 3
    assert neighbor_count(center, pat, r=0.125, q=0.25, exclude_center=True) == 2
    assert neighbor_count(center, pat, r=0.124999, q=0.25, exclude_center=True) == 1
    assert neighbor_count(center, pat, r=0.125, q=0.249999, exclude_center=True) == 1


def test_close_pair_count_hand_example(window):
    pat = make_pattern(
        window,
        [(0.1, 0.1, 0.1), (0.15, 0.1, 0.1), (0.1, 0.1, 0.5), (0.9, 0.9, 0.12)],
    )
    # pairs within ds<=0.1, dt<=0.1: only (0,1)
    assert close_pair_count(pat, 0.1, 0.1) == 1
    # widen time to 0.5: (0,2) at dt=0.4 and (1,2) at ds=0.05, dt=0.4 join
    assert close_pair_count(pat, 0.1, 0.5) == 3
    # widen space fully: all six pairs qualify (largest dt is 0.4)
    assert close_pair_count(pat, 2.0, 0.5) == 6


def _brute_pairs(pat, ds_max, dt_max):
    out = []
    for i in range(len(pat)):
        for j in range(i + 1, len(pat)):
            ds, dt = cyl_distance(pat.point(i), pat.point(j))
            if ds <= ds_max and dt <= dt_max:
                out.append((i, j, ds, dt))
    return out


@settings(deadline=None, max_examples=40)
@given(
    n=st.integers(0, 25),
    r=st.floats(0.01, 0.8),
    q=st.floats(0.01, 0.8),
    seed=st.integers(0, 10_000),
)
def test_pair_queries_match_brute_force(n, r, q, seed):
    rng = np.random.default_rng(seed)
    w = unit_cube()
    pat = uniform_pattern(w, n, rng)
    brute = _brute_pairs(pat, r, q)
    assert close_pair_count(pat, r, q) == len(brute)
    got = interpoint_distance_pairs(pat, ds_max=r, dt_max=q)
    assert [(p.i, p.j) for p in got] == [(i, j) for i, j, _, _ in brute]
    np.testing.assert_allclose([p.ds for p in got], [b[2] for b in brute], rtol=1e-12)
    np.testing.assert_allclose([p.dt for p in got], [b[3] for b in brute], rtol=1e-12)
    # 2 * (pair count) equals the sum of per-point neighbor counts
    total = sum(
        neighbor_count(pat.point(i), pat, r, q, exclude_center=True) for i in range(n)
    )
    assert total == 2 * len(brute)


def test_interpoint_pairs_sorted_and_capped(window, rng):
    pat = uniform_pattern(window, 40, rng)
    pairs = interpoint_distance_pairs(pat, ds_max=0.3, dt_max=0.4)
    keys = [(p.i, p.j) for p in pairs]
    assert keys == sorted(keys)
    assert all(p.i < p.j for p in pairs)
    assert all(p.ds <= 0.3 and p.dt <= 0.4 for p in pairs)


def test_interpoint_pairs_rejects_negative_caps(window, rng):
    pat = uniform_pattern(window, 5, rng)
    with pytest.raises(ConfigError, match="non-negative"):
        interpoint_distance_pairs(pat, ds_max=-0.1)


def test_cell_list_path_matches_direct(monkeypatch, rng):
    # force the grid-indexed path at a small n and compare with the direct path
    w = unit_cube()
    pat = uniform_pattern(w, 600, rng)
    direct = interpoint_distance_pairs(pat, ds_max=0.08, dt_max=0.1)
    monkeypatch.setattr(geometry, "GRID_INDEX_THRESHOLD", 100)
    indexed = interpoint_distance_pairs(pat, ds_max=0.08, dt_max=0.1)
    assert [(p.i, p.j) for p in indexed] == [(p.i, p.j) for p in direct]
    np.testing.assert_array_equal(
        np.array([p.ds for p in indexed]), np.array([p.ds for p in direct])
    )
    np.testing.assert_array_equal(
        np.array([p.dt for p in indexed]), np.array([p.dt for p in direct])
    )


def test_cell_list_used_above_threshold(rng):
    # n just above the real threshold, exercised without monkeypatching
    w = unit_cube()
    pat = uniform_pattern(w, geometry.GRID_INDEX_THRESHOLD + 50, rng)
    pairs = interpoint_distance_pairs(pat, ds_max=0.03, dt_max=0.05)
    assert close_pair_count(pat, 0.03, 0.05) == len(pairs)
