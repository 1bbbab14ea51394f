"""Model fitting by logistic composite likelihood, and structural selection.

The estimating equation contrasts the observed points (response 1) against a
Poisson quadrature pattern of dummy points (response 0) with intensity rho.
A point p with regressors z(p) enters a logistic regression

    logit P(response = 1 | p) = log lambda_theta(p) - log rho(p)

so the linear predictor is z(p) . beta plus the fixed offset -log rho(p).
Maximising this likelihood estimates the Gibbs model's trend coefficients
and log interaction weights without touching the intractable normalising
constant. Rows whose hardcore indicator is zero carry no information (their
conditional intensity is identically zero) and are dropped.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from . import _kernels
from .errors import ConfigError, DataError, NumericalError
from .geometry import DistancePair, PointPattern, STWindow
from .models import (
    GibbsModel,
    InteractionComponent,
    TrendModel,
    build_trend_field,
)
from .simulate import generate_dummies
from .streams import make_rng

SCORE_TOL = 1e-8
PIN_NOTE = "no close pairs at scale"


@dataclass(frozen=True, eq=False)
class LogisticDesign:
    """Assembled regression problem for one model structure.

    ``matrix`` holds one row per retained data/dummy point: the trend
    columns (intercept, covariates, optional time) followed by one
    neighbor-count column per interaction component. ``offset`` is
    -log rho(point).
    """

    matrix: np.ndarray
    response: np.ndarray
    offset: np.ndarray
    names: tuple[str, ...]
    n_trend: int
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.matrix.ndim != 2:
            raise DataError("design matrix must be 2d")
        n, p = self.matrix.shape
        if self.response.shape != (n,) or self.offset.shape != (n,):
            raise DataError("design response/offset lengths do not match the matrix")
        if len(self.names) != p:
            raise DataError("design has one name per column")
        if not (1 <= self.n_trend <= p):
            raise DataError("trend column count out of range")
        if n and not (
            np.all(np.isfinite(self.matrix)) and np.all(np.isfinite(self.offset))
        ):
            raise DataError("design contains non-finite entries")

    @property
    def n_rows(self) -> int:
        return int(self.matrix.shape[0])


@dataclass(frozen=True, eq=False)
class FitResult:
    """Fitted coefficients with Wald uncertainty and fit diagnostics.

    Coefficients are ordered like the design columns: trend block first,
    then one log interaction weight per component. ``log_lik_path`` records
    the likelihood after every accepted iteration (non-decreasing by
    construction).
    """

    names: tuple[str, ...]
    coefficients: np.ndarray
    se: np.ndarray
    pvalues: np.ndarray
    n_trend: int
    log_lik: float
    aic: float
    converged: bool
    iterations: int
    max_score: float
    log_lik_path: np.ndarray
    n_rows: int
    notes: tuple[str, ...] = ()

    @property
    def beta(self) -> np.ndarray:
        """Trend coefficients (intercept, covariates, optional time slope)."""
        return self.coefficients[: self.n_trend]

    @property
    def theta(self) -> np.ndarray:
        """Log interaction weights."""
        return self.coefficients[self.n_trend :]

    @property
    def gammas(self) -> np.ndarray:
        """Interaction weights gamma_j = exp(theta_j)."""
        return np.exp(self.theta)

    def summary(self) -> str:
        lines = [
            f"logistic fit: {self.n_rows} rows, logLik {self.log_lik:.4f}, "
            f"AIC {self.aic:.4f}, converged={self.converged} "
            f"({self.iterations} iterations, max|score|={self.max_score:.2e})"
        ]
        lines.append(f"{'term':>16} {'estimate':>12} {'se':>12} {'p':>10}")
        for k, name in enumerate(self.names):
            lines.append(
                f"{name:>16} {self.coefficients[k]:>12.6f} "
                f"{self.se[k]:>12.6f} {self.pvalues[k]:>10.4g}"
            )
        for note in self.notes:
            lines.append(f"note: {note}")
        return "\n".join(lines)


def _stats_matrix(
    model: GibbsModel,
    host: PointPattern,
    xs: np.ndarray,
    ys: np.ndarray,
    ts: np.ndarray,
    skip_equal: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Hardcore indicators and per-scale neighbor counts of probe points in host."""
    r2s, qs, _, sats = model.kernel_arrays()
    n = xs.shape[0]
    ok = np.empty(n, dtype=bool)
    stats = np.empty((n, model.m), dtype=np.float64)
    for i in range(n):
        o, counts = _kernels.point_stats(
            host.xs, host.ys, host.ts,
            float(xs[i]), float(ys[i]), float(ts[i]),
            r2s, qs, model.hs2_or_disabled, model.kernel_ht, skip_equal,
        )
        ok[i] = bool(o)
        stats[i] = counts
    capped = (sats >= 0.0)[None, :] & (stats > sats[None, :])
    stats = np.where(capped, np.broadcast_to(sats, stats.shape), stats)
    return ok, stats


def _trend_columns(
    trend: TrendModel,
    xs: np.ndarray,
    ys: np.ndarray,
    ts: np.ndarray,
    time_column: bool,
) -> tuple[np.ndarray, tuple[str, ...]]:
    cols = [np.ones(xs.shape[0], dtype=np.float64)]
    names = ["intercept"]
    if trend.beta:
        mat = trend.covariates.value_matrix(trend.names, xs, ys, ts)
        for k, name in enumerate(trend.names):
            cols.append(mat[:, k])
            names.append(name)
    if time_column:
        cols.append(ts.astype(np.float64))
        names.append("t")
    return np.stack(cols, axis=1), tuple(names)


def build_logistic_design(
    data: PointPattern,
    dummies: PointPattern,
    model: GibbsModel,
    rho,
    time_column: bool | None = None,
) -> LogisticDesign:
    """Assemble the logistic regression for a model structure.

    ``model`` supplies the structure only: which covariates enter the trend,
    the interaction scales, and the hard core. Its gamma values are ignored.
    ``rho`` is the dummy intensity (constant or callable); the offset of
    every row is -log rho at that point. ``time_column`` adds a linear time
    term; by default it is included exactly when the structure has a
    nonzero time slope.

    Data points violating the model hard core against the rest of the data,
    and dummy points violating it against the data, are excluded with a
    note. An empty data pattern or an empty retained dummy set is a
    degenerate fit and raises DataError.
    """
    if time_column is None:
        time_column = model.trend.alpha != 0.0
    if len(data) == 0:
        raise DataError("degenerate logistic fit: no data points")
    if len(dummies) == 0:
        raise DataError("degenerate logistic fit: no dummy points")
    notes: list[str] = []

    ok_d, stats_d = _stats_matrix(model, data, data.xs, data.ys, data.ts, True)
    ok_q, stats_q = _stats_matrix(model, data, dummies.xs, dummies.ys, dummies.ts, False)
    if not np.all(ok_d):
        dropped = int(np.count_nonzero(~ok_d))
        notes.append(
            f"excluded {dropped} data row(s) with hardcore conflicts inside the data"
        )
    if not np.all(ok_q):
        dropped = int(np.count_nonzero(~ok_q))
        notes.append(f"excluded {dropped} dummy row(s) with hardcore conflicts vs data")
    if not np.any(ok_d):
        raise DataError("degenerate logistic fit: every data row is hardcore-excluded")
    if not np.any(ok_q):
        raise DataError("degenerate logistic fit: every dummy row is hardcore-excluded")

    xs = np.concatenate([data.xs[ok_d], dummies.xs[ok_q]])
    ys = np.concatenate([data.ys[ok_d], dummies.ys[ok_q]])
    ts = np.concatenate([data.ts[ok_d], dummies.ts[ok_q]])
    stats = np.vstack([stats_d[ok_d], stats_q[ok_q]])
    y = np.concatenate(
        [
            np.ones(int(np.count_nonzero(ok_d)), dtype=np.int8),
            np.zeros(int(np.count_nonzero(ok_q)), dtype=np.int8),
        ]
    )
    trend_block, trend_names = _trend_columns(model.trend, xs, ys, ts, time_column)
    names = trend_names + tuple(f"log_gamma_{j + 1}" for j in range(model.m))
    matrix = np.hstack([trend_block, stats]) if model.m else trend_block
    if callable(rho):
        rho_vals = np.asarray(rho(xs, ys, ts), dtype=np.float64)
    else:
        rho_vals = np.full(xs.shape[0], float(rho), dtype=np.float64)
    if not np.all(rho_vals > 0.0):
        raise ConfigError("dummy intensity rho must be strictly positive")
    offset = -np.log(rho_vals)
    return LogisticDesign(
        matrix=matrix,
        response=y,
        offset=offset,
        names=names,
        n_trend=len(trend_names),
        notes=tuple(notes),
    )


def _check_columns(matrix: np.ndarray, names: tuple[str, ...]):
    """Identify all-zero (pinned) columns and reject genuine collinearity."""
    norms = np.linalg.norm(matrix, axis=0)
    pinned = norms == 0.0
    active = ~pinned
    sub = matrix[:, active]
    if sub.shape[1]:
        scaled = sub / np.linalg.norm(sub, axis=0)
        s = np.linalg.svd(scaled, compute_uv=False)
        if s[-1] < 1e-10 * s[0]:
            _, _, vt = np.linalg.svd(scaled)
            null = np.abs(vt[-1]) > 1e-6
            involved = [n for n, f in zip(np.array(names)[active], null) if f]
            raise NumericalError(
                f"collinear design columns: {involved}; remove or merge these terms"
            )
    return pinned


def _binom_log_lik(eta: np.ndarray, y_bool: np.ndarray) -> float:
    return float(
        -(np.logaddexp(0.0, -eta[y_bool]).sum() + np.logaddexp(0.0, eta[~y_bool]).sum())
    )


def fit_logistic(
    design: LogisticDesign,
    max_iter: int = 100,
    ridge: float = 1e-10,
) -> FitResult:
    """Maximise the logistic likelihood by Newton iteration (IRLS).

    Each Newton step is halved until the log-likelihood does not decrease,
    so the reported likelihood path is monotone. Convergence is declared
    when the score's infinity norm falls below 1e-8. All-zero columns (an
    interaction scale capturing no neighbors anywhere) are pinned at
    coefficient 0 with infinite standard error rather than rejected; any
    other exact collinearity raises NumericalError. Clean separation shows
    up as non-convergence with a diverging coefficient and is reported in
    the notes.
    """
    X = design.matrix
    y_bool = design.response.astype(bool)
    off = design.offset
    n, p = X.shape
    notes = list(design.notes)
    pinned = _check_columns(X, design.names)
    if np.any(pinned):
        for name in np.array(design.names)[pinned]:
            notes.append(f"column {name!r} is identically zero ({PIN_NOTE}); pinned at 0")

    beta = np.zeros(p, dtype=np.float64)
    eta = off.copy()
    ll = _binom_log_lik(eta, y_bool)
    path = [ll]
    converged = False
    iterations = 0
    eye = np.eye(p)
    max_score = math.inf
    for _ in range(max_iter):
        mu = expit(eta)
        score = X.T @ (y_bool - mu)
        max_score = float(np.max(np.abs(score))) if p else 0.0
        if max_score < SCORE_TOL:
            converged = True
            break
        w = mu * (1.0 - mu)
        H = (X * w[:, None]).T @ X
        try:
            delta = np.linalg.solve(H + ridge * eye, score)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular information matrix in IRLS: {exc}") from exc
        step = 1.0
        improved = False
        for _ in range(50):
            cand = beta + step * delta
            eta_c = X @ cand + off
            ll_c = _binom_log_lik(eta_c, y_bool)
            if ll_c >= ll:
                improved = True
                break
            step *= 0.5
        if not improved:
            break  # numerically at the optimum already
        beta, eta, ll = cand, eta_c, ll_c
        path.append(ll)
        iterations += 1
    else:
        mu = expit(eta)
        score = X.T @ (y_bool - mu)
        max_score = float(np.max(np.abs(score))) if p else 0.0
        converged = max_score < SCORE_TOL
    if not converged:
        mu = expit(eta)
        score = X.T @ (y_bool - mu)
        max_score = float(np.max(np.abs(score)))
        if max_score < SCORE_TOL:
            converged = True
        else:
            big = np.abs(beta) > 30.0
            for k in np.nonzero(big)[0]:
                direction = "+inf" if beta[k] > 0 else "-inf"
                notes.append(
                    f"possible separation: coefficient {design.names[k]!r} "
                    f"diverging toward {direction}"
                )

    mu = expit(eta)
    w = mu * (1.0 - mu)
    H = (X * w[:, None]).T @ X
    se = np.full(p, np.inf)
    active = ~pinned
    if np.any(active):
        H_sub = H[np.ix_(active, active)]
        try:
            cov = np.linalg.inv(H_sub)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"singular observed information at the optimum: {exc}"
            ) from exc
        diag = np.diag(cov).copy()
        diag[diag < 0] = np.nan
        se[active] = np.sqrt(diag)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(se > 0, beta / se, np.inf)
        z[~np.isfinite(se)] = 0.0
    pvalues = np.array([math.erfc(abs(float(v)) / math.sqrt(2.0)) for v in z])
    aic = 2.0 * p - 2.0 * ll
    return FitResult(
        names=design.names,
        coefficients=beta,
        se=se,
        pvalues=pvalues,
        n_trend=design.n_trend,
        log_lik=ll,
        aic=aic,
        converged=converged,
        iterations=iterations,
        max_score=max_score,
        log_lik_path=np.asarray(path),
        n_rows=n,
        notes=tuple(notes),
    )


@dataclass(frozen=True)
class ParetoFront:
    """Jointly minimal interpoint distances.

    ``points`` are the non-dominated pairs sorted by spatial distance
    ascending; a pair p dominates q when p.ds <= q.ds and p.dt <= q.dt with
    at least one strict inequality.
    """

    points: tuple[DistancePair, ...]
    dominated_count: int

    @property
    def size(self) -> int:
        return len(self.points)


def pareto_front(pairs: Sequence[DistancePair]) -> ParetoFront:
    """Non-dominated subset of distance pairs under joint (ds, dt) minimisation."""
    ordered = sorted(pairs, key=lambda p: (p.ds, p.dt))
    front: list[DistancePair] = []
    for p in ordered:
        if front:
            last = front[-1]
            identical = last.ds == p.ds and last.dt == p.dt
            if not identical and last.dt <= p.dt:
                continue  # dominated by the current staircase
        front.append(p)
    return ParetoFront(points=tuple(front), dominated_count=len(ordered) - len(front))


@dataclass(frozen=True)
class HardcoreChoice:
    """A feasible hardcore pair and the policy that produced it."""

    hs: float
    ht: float
    policy: str
    area: float


def _before(v: float) -> float:
    """Largest float strictly below v, floored at 0."""
    return max(float(np.nextafter(v, -math.inf)), 0.0)


def _staircase_corners(front: ParetoFront) -> list[tuple[float, float]]:
    """Maximal feasible (hs, ht) corners under the front staircase.

    Feasibility (no front pair with ds <= hs and dt <= ht) is open at the
    pair coordinates, so interior corners back off by one float step; the
    two end corners are capped at the front's extent in the unconstrained
    coordinate.
    """
    pts: list[DistancePair] = []
    for p in front.points:
        if pts and pts[-1].ds == p.ds and pts[-1].dt == p.dt:
            continue
        pts.append(p)
    k_max = len(pts)
    corners = [( _before(pts[0].ds), pts[0].dt )]
    for k in range(1, k_max):
        corners.append((_before(pts[k].ds), _before(pts[k - 1].dt)))
    corners.append((pts[-1].ds, _before(pts[-1].dt)))
    return corners


def _front_feasible(front: ParetoFront, hs: float, ht: float) -> list[DistancePair]:
    """Front pairs violated by (hs, ht); empty means feasible.

    Because every dominated pair sits componentwise above some front pair,
    feasibility against the front is equivalent to feasibility against all
    pairs the front was built from.
    """
    if hs == 0.0 or ht == 0.0:
        return []
    return [p for p in front.points if p.ds <= hs and p.dt <= ht]


def choose_hardcore(
    front: ParetoFront,
    policy: str = "max-area",
    ratio: float | None = None,
    hs: float | None = None,
    ht: float | None = None,
) -> HardcoreChoice:
    """Pick hardcore distances compatible with observed interpoint distances.

    Policies:

    * ``"max-area"``: the staircase corner maximising hs * ht;
    * ``"fixed-ratio"``: the farthest feasible point along hs = ratio * ht;
    * ``"manual"``: validate the given (hs, ht), raising DataError with the
      violating pairs when it conflicts with the front.

    All results are strictly feasible: no pair from the front (hence no pair
    at all) satisfies ds <= hs and dt <= ht.
    """
    if policy == "manual":
        if hs is None or ht is None:
            raise ConfigError("manual hardcore policy needs explicit hs and ht")
        if hs < 0 or ht < 0:
            raise ConfigError("hardcore distances must be non-negative")
        violating = _front_feasible(front, hs, ht)
        if violating:
            listing = ", ".join(
                f"(i={p.i}, j={p.j}, ds={p.ds:.6g}, dt={p.dt:.6g})" for p in violating[:20]
            )
            raise DataError(
                f"infeasible hardcore (hs={hs}, ht={ht}): violated by pairs {listing}"
            )
        return HardcoreChoice(hs=float(hs), ht=float(ht), policy=policy, area=float(hs * ht))
    if front.size == 0:
        raise ConfigError(
            "empty distance front: hardcore choice is unconstrained; "
            "pass explicit distances with the manual policy"
        )
    corners = _staircase_corners(front)
    if policy == "max-area":
        best = max(corners, key=lambda c: c[0] * c[1])
        choice = HardcoreChoice(best[0], best[1], policy, best[0] * best[1])
    elif policy == "fixed-ratio":
        if ratio is None or not (ratio > 0 and math.isfinite(ratio)):
            raise ConfigError("fixed-ratio hardcore policy needs a positive ratio")
        t_best = 0.0
        for ch, ct_ in corners:
            t_best = max(t_best, min(ct_, ch / ratio))
        choice = HardcoreChoice(ratio * t_best, t_best, policy, ratio * t_best * t_best)
    else:
        raise ConfigError(f"unknown hardcore policy {policy!r}")
    if _front_feasible(front, choice.hs, choice.ht):
        raise NumericalError("hardcore choice failed its own feasibility check")
    return choice


@dataclass(frozen=True, eq=False)
class Quadrature:
    """A dummy-point set and the intensity it was drawn at.

    ``rho`` is a constant or a callable; reused across candidate fits so
    their likelihoods (and AICs) are directly comparable.
    """

    dummies: PointPattern
    rho: object
    description: str
    first_pass: FitResult | None = None


def prepare_quadrature(
    data: PointPattern,
    structure: GibbsModel,
    c_factor: float = 4.0,
    rng: np.random.Generator | None = None,
    time_column: bool | None = None,
) -> Quadrature:
    """Draw the dummy set for fitting ``structure`` to ``data``.

    Homogeneous trends use the rule rho = c_factor * n / |W|. Trends with
    covariates (or a time slope) first fit the Poisson model with
    homogeneous dummies, then draw the final dummies at c_factor times the
    fitted first-order intensity, so dummy mass tracks the trend.
    """
    if rng is None:
        rng = make_rng(None)
    window = data.window
    n = len(data)
    if n == 0:
        raise DataError("degenerate logistic fit: no data points")
    if time_column is None:
        time_column = structure.trend.alpha != 0.0
    base_rate = n / window.volume
    rho0 = c_factor * base_rate
    hs, ht = structure.hs, structure.ht
    if not structure.hardcore_active:
        hs = ht = 0.0
    if not structure.trend.beta and not time_column:
        dummies = generate_dummies(window, base_rate, c_factor, hs, ht, data, rng)
        return Quadrature(
            dummies=dummies,
            rho=rho0,
            description=f"homogeneous dummies at rho = {c_factor} * n / |W| = {rho0:.6g}",
        )
    poisson_structure = GibbsModel(trend=structure.trend, components=(), hs=0.0, ht=0.0)
    dummies0 = generate_dummies(window, base_rate, c_factor, 0.0, 0.0, data, rng)
    design0 = build_logistic_design(data, dummies0, poisson_structure, rho0, time_column)
    first = fit_logistic(design0)
    fitted_trend = TrendModel(
        beta0=float(first.coefficients[0]),
        beta={
            name: float(first.coefficients[k + 1])
            for k, name in enumerate(structure.trend.names)
        },
        alpha=float(first.coefficients[first.n_trend - 1]) if time_column else 0.0,
        covariates=structure.trend.covariates,
    )
    field = build_trend_field(fitted_trend)

    def rho_fn(xs, ys, ts):
        return c_factor * np.exp(field.log_at(xs, ys, ts))

    bound = math.exp(field.max_log(window.t0, window.t1))
    dummies = generate_dummies(
        window, lambda xs, ys, ts: np.exp(field.log_at(xs, ys, ts)),
        c_factor, hs, ht, data, rng, ref_bound=bound,
    )
    return Quadrature(
        dummies=dummies,
        rho=rho_fn,
        description=(
            f"trend-proportional dummies at rho = {c_factor} * fitted first-order "
            f"intensity (first-pass Poisson fit, logLik {first.log_lik:.4f})"
        ),
        first_pass=first,
    )


def fit_gibbs(
    data: PointPattern,
    structure: GibbsModel,
    c_factor: float = 4.0,
    rng: np.random.Generator | None = None,
    quadrature: Quadrature | None = None,
    time_column: bool | None = None,
) -> FitResult:
    """Fit a Gibbs model structure to data by logistic composite likelihood."""
    if quadrature is None:
        quadrature = prepare_quadrature(data, structure, c_factor, rng, time_column)
    design = build_logistic_design(
        data, quadrature.dummies, structure, quadrature.rho, time_column
    )
    return fit_logistic(design)


@dataclass(frozen=True)
class CandidateFit:
    """One candidate interaction configuration with its fit (or skip reason)."""

    radii: tuple[tuple[float, float], ...]
    result: FitResult | None
    note: str = ""


def select_irregular(
    data: PointPattern,
    candidates: Sequence[Sequence[tuple[float, float]]],
    structure: GibbsModel,
    c_factor: float = 4.0,
    rng: np.random.Generator | None = None,
    quadrature: Quadrature | None = None,
    time_column: bool | None = None,
) -> list[CandidateFit]:
    """Rank candidate interaction-scale sets by AIC.

    Every candidate reuses one shared dummy set, so AIC differences reflect
    the interaction structure alone. Candidates violating the scale-nesting
    constraints (radii not strictly increasing, or not strictly above the
    hard core) are skipped with a warning. Ties in AIC prefer fewer
    components. The returned list is sorted best first; skipped candidates
    sort last, in input order.
    """
    if quadrature is None:
        quadrature = prepare_quadrature(data, structure, c_factor, rng, time_column)
    fits: list[CandidateFit] = []
    for cand in candidates:
        radii = tuple((float(r), float(q)) for r, q in cand)
        try:
            model = GibbsModel(
                trend=structure.trend,
                components=tuple(InteractionComponent(1.0, r, q) for r, q in radii),
                hs=structure.hs,
                ht=structure.ht,
            )
        except ConfigError as exc:
            warnings.warn(f"skipping candidate {radii}: {exc}", stacklevel=2)
            fits.append(CandidateFit(radii=radii, result=None, note=str(exc)))
            continue
        result = fit_gibbs(
            data, model, c_factor, rng, quadrature=quadrature, time_column=time_column
        )
        fits.append(CandidateFit(radii=radii, result=result))
    order = sorted(
        range(len(fits)),
        key=lambda k: (
            (0, fits[k].result.aic, len(fits[k].radii))
            if fits[k].result is not None
            else (1, float(k), 0)
        ),
    )
    return [fits[k] for k in order]
