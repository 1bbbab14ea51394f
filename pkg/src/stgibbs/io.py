"""File formats: point patterns, model specs, covariate manifests, artifacts.

All writes are atomic (write to a sibling temp file, then rename), so a
crashed run never leaves a truncated artifact behind. Artifacts embed the
hash of the configuration that produced them plus the seed, package version,
and kernel backend, so results can be traced to their inputs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import __version__
from ._kernels import BACKEND
from .errors import ConfigError, DataError
from .geometry import PointPattern, STWindow
from .models import (
    CovariateStack,
    GibbsModel,
    GridGeometry,
    InteractionComponent,
    TrendModel,
)

PATTERN_HEADER = ["x", "y", "t"]


def _atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonify(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Mapping):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    return obj


def write_json(path, payload: Mapping[str, Any]) -> None:
    """Atomically write a JSON artifact."""
    _atomic_write_text(Path(path), json.dumps(_jsonify(payload), indent=2) + "\n")


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DataError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed JSON in {path}: {exc}") from exc


def config_hash(payload: Mapping[str, Any]) -> str:
    """Stable hash of a configuration mapping (sha256 of canonical JSON)."""
    canon = json.dumps(_jsonify(payload), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def artifact_metadata(config: Mapping[str, Any], seed) -> dict:
    """Provenance block embedded in every artifact."""
    return {
        "config_hash": config_hash(config),
        "seed": seed,
        "package_version": __version__,
        "kernel_backend": BACKEND,
    }


# ---------------------------------------------------------------------------
# Point patterns


def save_pattern(pattern: PointPattern, path) -> None:
    """Write a pattern as CSV with shortest round-trip decimal coordinates."""
    rows = ["%s,%s,%s" % (repr(float(x)), repr(float(y)), repr(float(t)))
            for x, y, t in zip(pattern.xs, pattern.ys, pattern.ts)]
    _atomic_write_text(Path(path), ",".join(PATTERN_HEADER) + "\n" + "\n".join(rows) + ("\n" if rows else ""))


def load_pattern(path, window: STWindow) -> PointPattern:
    """Read a pattern CSV (header ``x,y,t``) and validate it against a window.

    Malformed rows, duplicate points, and points outside the window raise
    DataError naming the offending line numbers (the header is line 1).
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty pattern file") from None
            if [h.strip() for h in header] != PATTERN_HEADER:
                raise DataError(
                    f"{path}: expected header 'x,y,t', got {','.join(header)!r}"
                )
            xs, ys, ts, lines = [], [], [], []
            seen: dict[tuple[float, float, float], int] = {}
            for lineno, row in enumerate(reader, start=2):
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                if len(row) != 3:
                    raise DataError(f"{path}: line {lineno}: expected 3 fields, got {len(row)}")
                try:
                    x, y, t = (float(v) for v in row)
                except ValueError:
                    raise DataError(
                        f"{path}: line {lineno}: non-numeric coordinate in {row!r}"
                    ) from None
                if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(t)):
                    raise DataError(f"{path}: line {lineno}: non-finite coordinate")
                key = (x, y, t)
                if key in seen:
                    raise DataError(
                        f"{path}: line {lineno}: duplicate point, first seen at line {seen[key]}"
                    )
                seen[key] = lineno
                xs.append(x)
                ys.append(y)
                ts.append(t)
                lines.append(lineno)
    except OSError as exc:
        raise DataError(f"cannot read pattern file {path}: {exc}") from exc
    xs_a = np.asarray(xs, dtype=np.float64)
    ys_a = np.asarray(ys, dtype=np.float64)
    ts_a = np.asarray(ts, dtype=np.float64)
    inside = window.contains(xs_a, ys_a, ts_a)
    if not bool(np.all(inside)):
        bad = [lines[k] for k in np.nonzero(~inside)[0][:10]]
        raise DataError(
            f"{path}: {int(np.count_nonzero(~inside))} point(s) outside the window "
            f"(lines {', '.join(map(str, bad))})"
        )
    return PointPattern(xs_a, ys_a, ts_a, window)


# ---------------------------------------------------------------------------
# Rasters


def save_raster(arr: np.ndarray, path) -> None:
    a = np.asarray(arr)
    # %.17g round-trips every double exactly through decimal text
    fmt = "%d" if a.dtype == bool or np.issubdtype(a.dtype, np.integer) else "%.17g"
    rows = "\n".join(" ".join(fmt % v for v in row) for row in np.atleast_2d(a))
    _atomic_write_text(Path(path), rows + "\n")


def load_raster(path) -> np.ndarray:
    try:
        return np.loadtxt(path, dtype=np.float64, ndmin=2)
    except FileNotFoundError:
        raise DataError(f"raster file not found: {path}") from None
    except ValueError as exc:
        raise DataError(f"malformed raster {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Covariate manifests


def save_covariate_stack(stack: CovariateStack, manifest_path, raster_dir=None) -> None:
    """Write a covariate stack as a manifest plus one text raster per slice."""
    manifest_path = Path(manifest_path)
    base = Path(raster_dir) if raster_dir is not None else manifest_path.parent / "rasters"
    base.mkdir(parents=True, exist_ok=True)
    g = stack.geometry
    spatial = {}
    for name, arr in stack.spatial.items():
        rel = f"{base.name}/{name}.txt"
        save_raster(arr, manifest_path.parent / rel)
        spatial[name] = rel
    st = {}
    for name, arr in stack.spatiotemporal.items():
        rels = []
        for k in range(arr.shape[0]):
            rel = f"{base.name}/{name}_{k:03d}.txt"
            save_raster(arr[k], manifest_path.parent / rel)
            rels.append(rel)
        st[name] = rels
    write_json(
        manifest_path,
        {
            "geometry": {
                "x0": g.x0, "y0": g.y0, "dx": g.dx, "dy": g.dy, "nx": g.nx, "ny": g.ny,
            },
            "t0": stack.t0,
            "t_step": stack.t_step,
            "spatial": spatial,
            "spatiotemporal": st,
        },
    )


def load_covariate_stack(manifest_path) -> CovariateStack:
    """Load a covariate stack from its manifest.

    A missing raster file raises DataError naming the covariate and slice; a
    raster whose shape disagrees with the manifest geometry raises DataError
    naming the covariate and both shapes.
    """
    manifest_path = Path(manifest_path)
    spec = read_json(manifest_path)
    try:
        g = spec["geometry"]
        geom = GridGeometry(
            x0=float(g["x0"]), y0=float(g["y0"]),
            dx=float(g["dx"]), dy=float(g["dy"]),
            nx=int(g["nx"]), ny=int(g["ny"]),
        )
    except KeyError as exc:
        raise DataError(f"{manifest_path}: manifest missing geometry key {exc}") from None
    shape = (geom.ny, geom.nx)
    base = manifest_path.parent

    def load_slice(cov: str, rel: str, slice_label: str) -> np.ndarray:
        p = base / rel
        if not p.exists():
            raise DataError(
                f"{manifest_path}: covariate {cov!r} is missing slice {slice_label} "
                f"(expected file {p})"
            )
        arr = load_raster(p)
        if arr.shape != shape:
            raise DataError(
                f"{manifest_path}: covariate {cov!r} slice {slice_label} has shape "
                f"{arr.shape}, expected {shape} from the manifest geometry"
            )
        return arr

    spatial = {
        name: load_slice(name, rel, name)
        for name, rel in spec.get("spatial", {}).items()
    }
    st = {}
    for name, rels in spec.get("spatiotemporal", {}).items():
        slices = [load_slice(name, rel, f"{name}[{k}]") for k, rel in enumerate(rels)]
        st[name] = np.stack(slices, axis=0)
    return CovariateStack(
        geometry=geom,
        spatial=spatial,
        spatiotemporal=st,
        t0=float(spec.get("t0", 0.0)),
        t_step=float(spec.get("t_step", 1.0)),
    )


# ---------------------------------------------------------------------------
# Model specs


def save_model_spec(path, model: GibbsModel, window: STWindow,
                    covariates_manifest: str | None = None,
                    mask_path: str | None = None,
                    extra: Mapping[str, Any] | None = None) -> None:
    """Write a model + window spec as JSON (mask and covariates by reference)."""
    path = Path(path)
    win: dict[str, Any] = {
        "x0": window.x0, "x1": window.x1,
        "y0": window.y0, "y1": window.y1,
        "t0": window.t0, "t1": window.t1,
    }
    if window.mask is not None:
        mask_rel = mask_path or "mask.txt"
        save_raster(window.mask.astype(np.int64), path.parent / mask_rel)
        win["mask"] = mask_rel
    payload: dict[str, Any] = {
        "window": win,
        "trend": {
            "beta0": model.trend.beta0,
            "beta": dict(model.trend.beta),
            "alpha": model.trend.alpha,
        },
        "components": [
            {"gamma": c.gamma, "r": c.r, "q": c.q, "saturation": c.saturation}
            for c in model.components
        ],
        "hardcore": {"hs": model.hs, "ht": model.ht},
    }
    if covariates_manifest is not None:
        payload["covariates"] = covariates_manifest
    if extra:
        payload.update(_jsonify(extra))
    write_json(path, payload)


def load_model_spec(path) -> tuple[GibbsModel, STWindow]:
    """Load a model + window spec written by ``save_model_spec``."""
    path = Path(path)
    spec = read_json(path)
    try:
        w = spec["window"]
        mask = None
        if "mask" in w:
            mask = load_raster(path.parent / w["mask"]) != 0.0
        window = STWindow(
            x0=float(w["x0"]), x1=float(w["x1"]),
            y0=float(w["y0"]), y1=float(w["y1"]),
            t0=float(w["t0"]), t1=float(w["t1"]),
            mask=mask,
        )
        tr = spec.get("trend", {})
        stack = None
        if "covariates" in spec:
            stack = load_covariate_stack(path.parent / spec["covariates"])
        trend = TrendModel(
            beta0=float(tr.get("beta0", 0.0)),
            beta={k: float(v) for k, v in tr.get("beta", {}).items()},
            alpha=float(tr.get("alpha", 0.0)),
            covariates=stack,
        )
        comps = tuple(
            InteractionComponent(
                gamma=float(c["gamma"]), r=float(c["r"]), q=float(c["q"]),
                saturation=None if c.get("saturation") is None else float(c["saturation"]),
            )
            for c in spec.get("components", [])
        )
        hc = spec.get("hardcore", {})
        model = GibbsModel(
            trend=trend,
            components=comps,
            hs=float(hc.get("hs", 0.0)),
            ht=float(hc.get("ht", 0.0)),
        )
    except KeyError as exc:
        raise DataError(f"{path}: model spec missing key {exc}") from None
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed model spec: {exc}") from exc
    return model, window
