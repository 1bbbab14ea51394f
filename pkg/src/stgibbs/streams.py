"""Reproducible random number streams.

All stochastic routines in the package draw from ``numpy.random.Generator``
objects backed by PCG64. Streams are derived from a user seed through
``numpy.random.SeedSequence`` so that (seed, stream) pairs give independent,
platform-stable sequences, and so that parallel replicates can each own a
private stream without coordination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ALGORITHM = "pcg64"


def make_rng(seed: int | None, stream: int = 0) -> np.random.Generator:
    """Return a PCG64 generator for the given (seed, stream) pair.

    ``seed=None`` gives fresh OS entropy. The same (seed, stream) pair always
    yields the same sequence; distinct stream indices under one seed yield
    statistically independent sequences.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream,))
    return np.random.Generator(np.random.PCG64(ss))


def spawn_rngs(seed: int | None, n: int, base_stream: int = 0) -> list[np.random.Generator]:
    """Return ``n`` independent generators for streams base_stream..base_stream+n-1."""
    return [make_rng(seed, base_stream + k) for k in range(n)]


@dataclass(frozen=True)
class RNGStream:
    """A recordable handle for one random stream.

    Stored in run artifacts so a result can name the exact stream that
    produced it. ``generator()`` materialises the stream.
    """

    seed: int
    stream: int = 0
    algorithm: str = ALGORITHM

    def __post_init__(self) -> None:
        if self.algorithm != ALGORITHM:
            raise ValueError(f"unsupported rng algorithm {self.algorithm!r}")

    def generator(self) -> np.random.Generator:
        return make_rng(self.seed, self.stream)
