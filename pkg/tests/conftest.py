"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from stgibbs import (
    GibbsModel,
    InteractionComponent,
    PointPattern,
    STWindow,
    homogeneous_trend,
    unit_cube,
)


@pytest.fixture
def window():
    return unit_cube()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_pattern(window, coords):
    """Build a PointPattern from an iterable of (x, y, t) triples."""
    coords = list(coords)
    if not coords:
        return PointPattern.empty(window)
    xs, ys, ts = (np.asarray(col, dtype=np.float64) for col in zip(*coords))
    return PointPattern(xs, ys, ts, window)


def uniform_pattern(window, n, rng):
    """n points drawn uniformly in an unmasked window."""
    xs = rng.uniform(window.x0, window.x1, n)
    ys = rng.uniform(window.y0, window.y1, n)
    ts = rng.uniform(window.t0, window.t1, n)
    return PointPattern(xs, ys, ts, window)


def hybrid_model(
    rate=80.0,
    gammas=(0.7, 1.2),
    scales=((0.05, 0.05), (0.1, 0.1)),
    hs=0.01,
    ht=0.01,
    saturations=None,
):
    """A two-scale hybrid model used across the test modules."""
    if saturations is None:
        saturations = (None,) * len(gammas)
    components = tuple(
        InteractionComponent(gamma=g, r=r, q=q, saturation=s)
        for g, (r, q), s in zip(gammas, scales, saturations)
    )
    return GibbsModel(trend=homogeneous_trend(rate), components=components, hs=hs, ht=ht)


@pytest.fixture
def small_model():
    return hybrid_model()
