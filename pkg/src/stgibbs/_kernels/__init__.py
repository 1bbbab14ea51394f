"""Kernel backend selection.

Imports the compiled Cython kernels when available and falls back to the
pure numpy reference implementation otherwise. Both expose the same API and
the same semantics; ``BACKEND`` reports which one is active. Set
``STGIBBS_FORCE_PYTHON=1`` before import to force the fallback.
"""

from __future__ import annotations

import os

if os.environ.get("STGIBBS_FORCE_PYTHON"):
    from . import reference as _impl
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import reference as _impl

from . import reference

BACKEND: str = _impl.BACKEND

point_stats = _impl.point_stats
close_pair_count = _impl.close_pair_count
pair_scale_counts = _impl.pair_scale_counts
pairs_within = _impl.pairs_within
hardcore_conflicts = _impl.hardcore_conflicts
run_chain = _impl.run_chain
gpcf_accumulate = _impl.gpcf_accumulate

__all__ = [
    "BACKEND",
    "point_stats",
    "close_pair_count",
    "pair_scale_counts",
    "pairs_within",
    "hardcore_conflicts",
    "run_chain",
    "gpcf_accumulate",
    "reference",
]
