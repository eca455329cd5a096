"""Numerical verification of the Stratonovich rank identities.

Each claim checked here is an almost-sure pathwise equality for continuous
semimartingales; on a grid the two sides differ by a discretization residual
that should shrink as the step size does. The verifiers compute, per path,
the sup-over-grid and endpoint absolute residuals; the convergence study
re-evaluates them on a ladder of coarser grids carved out of one fine
simulation and fits an empirical rate.

Claims and their identities (all with midpoint Stratonovich sums):

* ``lemma2``     |X(t)| - |X(0)|  =  int sgn(X) o dX
* ``lemma3``     |X-Y|(t) - |X-Y|(0)  =  int sgn(X-Y) o dX - int sgn(X-Y) o dY
* ``lemma4_max`` max(X,Y) change  =  int 1{X>=Y} o dX + int 1{X<Y} o dY
* ``lemma4_min`` min(X,Y) change  =  int 1{X<Y} o dX + int 1{X>=Y} o dY
* ``prop1``      ranked-process change  =  sum_i int 1{asset i holds rank k} o dX_i
* ``prop3``      structural process  =  log-change of the generating function
* ``coincidence``  occupation fraction of the near-tie band (reported)

Coupling across refinement levels: the study simulates once at the finest
level and restricts that ensemble to each coarser grid, so values at shared
grid times are bit-identical across levels and residual changes are
attributable to the step size alone. Restriction of the driving noise agrees
with block-summed increments (see ``coarsen_increments``) up to round-off.

Convergence rates are reported, not asserted against theory: the identities
are exact in the limit, and rate windows used in acceptance tests come from
pilot measurement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .integrals import covariation, sgn_series, stratonovich_integral
from .models import (
    AtlasParams,
    BrownianParams,
    RankBasedParams,
    simulate_atlas,
    simulate_brownian,
    simulate_rank_based,
)
from .paths import PathEnsemble, RngSpec, TimeGrid, build_grid
from .portfolios import (
    DecompositionReport,
    GeneratingFunction,
    decompose,
    generated_weights,
    market_weights,
)
from .ranks import RankFrame, coincidence_stats, ranked_ensemble

__all__ = [
    "CLAIMS",
    "ResidualSeries",
    "ConvergenceReport",
    "verify_abs_representation",
    "verify_pair_difference",
    "verify_minmax",
    "verify_rank_representation",
    "rank_reconstruction",
    "decomposition_residuals",
    "verify_decomposition",
    "convergence_study",
]

CLAIMS = (
    "lemma2",
    "lemma3",
    "lemma4_max",
    "lemma4_min",
    "prop1",
    "prop3",
    "coincidence",
)

# Mean residuals below this are round-off, not discretization error; rate
# fits are skipped there (noise-free zero-crossing-free inputs hit this).
_ROUNDOFF_FLOOR = 1e-13


@dataclass(frozen=True)
class ResidualSeries:
    """Per-path residual magnitudes for one claim.

    ``sup`` is the sup-over-grid absolute residual and ``endpoint`` the
    absolute residual at t = T. Shapes are ``(paths,)`` except for ``prop1``
    where a leading rank axis gives ``(n, paths)``.
    """

    claim: str
    sup: np.ndarray
    endpoint: np.ndarray

    def __post_init__(self):
        if (np.asarray(self.sup) < 0).any() or (np.asarray(self.endpoint) < 0).any():
            raise ValidationError("residuals must be non-negative")


def _residual_stats(series: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sup-over-time and endpoint magnitudes of a running residual series."""
    return np.abs(series).max(axis=-1), np.abs(series[..., -1])


def verify_abs_representation(X: np.ndarray) -> ResidualSeries:
    """Residual of the absolute-value representation of a single series."""
    X = np.asarray(X, dtype=np.float64)
    recon = stratonovich_integral(sgn_series(X), X).values
    resid = (np.abs(X) - np.abs(X[..., :1])) - recon
    sup, end = _residual_stats(resid)
    return ResidualSeries(claim="lemma2", sup=sup, endpoint=end)


def verify_pair_difference(X: np.ndarray, Y: np.ndarray) -> ResidualSeries:
    """Residual of the absolute-difference representation of two series."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    s = sgn_series(X - Y)
    recon = stratonovich_integral(s, X).values - stratonovich_integral(s, Y).values
    d = np.abs(X - Y)
    resid = (d - d[..., :1]) - recon
    sup, end = _residual_stats(resid)
    return ResidualSeries(claim="lemma3", sup=sup, endpoint=end)


def verify_minmax(X: np.ndarray, Y: np.ndarray) -> tuple[ResidualSeries, ResidualSeries]:
    """Residuals of the running-max and running-min representations.

    The indicator on the first series is closed (``X >= Y``, ties included)
    and its complement rides on the second, matching the rank tie convention,
    so for two assets these residuals agree bit-for-bit with the rank-process
    verifier.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    ind = (X >= Y).astype(np.float64)
    comp = 1.0 - ind
    recon_max = stratonovich_integral(ind, X).values + stratonovich_integral(comp, Y).values
    recon_min = stratonovich_integral(comp, X).values + stratonovich_integral(ind, Y).values
    hi = np.maximum(X, Y)
    lo = np.minimum(X, Y)
    resid_max = (hi - hi[..., :1]) - recon_max
    resid_min = (lo - lo[..., :1]) - recon_min
    sup_max, end_max = _residual_stats(resid_max)
    sup_min, end_min = _residual_stats(resid_min)
    return (
        ResidualSeries(claim="lemma4_max", sup=sup_max, endpoint=end_max),
        ResidualSeries(claim="lemma4_min", sup=sup_min, endpoint=end_min),
    )


def rank_reconstruction(
    ensemble: PathEnsemble, frames: RankFrame, rank: int
) -> np.ndarray:
    """Stratonovich reconstruction of one ranked process, shape (paths, M+1).

    Sums, over assets in index order, the midpoint integral of the rank
    occupation indicator against that asset's series.
    """
    values = ensemble.values
    total = np.zeros((values.shape[0], values.shape[2]), dtype=np.float64)
    for i in range(values.shape[1]):
        ind = (frames.rank_of_asset[:, i, :] == rank).astype(np.float64)
        total += stratonovich_integral(ind, values[:, i, :]).values
    return total


def verify_rank_representation(
    ensemble: PathEnsemble, frames: RankFrame
) -> ResidualSeries:
    """Residuals of the Stratonovich rank representation, all ranks at once.

    ``sup`` and ``endpoint`` have shape ``(n, paths)``, rank-major. The
    ensemble passed in is the *named* (unsorted) one; ranked series are
    recovered through the frames.
    """
    values = ensemble.values
    P, n, _ = values.shape
    ranked = np.take_along_axis(values, frames.asset_at_rank, axis=1)
    sup = np.empty((n, P), dtype=np.float64)
    end = np.empty((n, P), dtype=np.float64)
    for k in range(n):
        recon = rank_reconstruction(ensemble, frames, k)
        resid = (ranked[:, k, :] - ranked[:, k, :1]) - recon
        sup[k], end[k] = _residual_stats(resid)
    return ResidualSeries(claim="prop1", sup=sup, endpoint=end)


def decomposition_residuals(report: DecompositionReport) -> dict[str, np.ndarray]:
    """Per-path diagnostics of a return decomposition.

    Returns ``sup`` and ``endpoint`` for the structural-vs-generating-function
    residual, plus realized quadratic variations of the bounded-variation
    remainder and of the relative log-return itself.
    """
    resid = report.structural - report.generating_log_change
    sup, end = _residual_stats(resid)
    qv_theta = covariation(report.residual, report.residual).endpoint
    qv_rel = covariation(report.relative_log_return, report.relative_log_return).endpoint
    return {"sup": sup, "endpoint": end, "qv_theta": qv_theta, "qv_rel": qv_rel}


@dataclass(frozen=True)
class ConvergenceReport:
    """Residual statistics across a ladder of coupled grid refinements.

    Levels are ordered coarse to fine (step sizes strictly decreasing).
    ``mean_residual[l]`` is the mean over paths of the per-path sup residual
    (for ``prop1``, the worst rank's mean); ``fitted_rate`` is the slope of a
    least-squares line through (log h, log mean residual), NaN when the
    residuals sit at round-off level. ``extras`` carries per-level
    claim-specific series (e.g. quadratic variations for ``prop3``).
    """

    claim: str
    levels: tuple[int, ...]
    step_sizes: np.ndarray
    mean_residual: np.ndarray
    max_residual: np.ndarray
    fitted_rate: float
    per_level: tuple[ResidualSeries, ...]
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.levels) < 3:
            raise ValidationError(f"need at least 3 refinement levels, got {len(self.levels)}")
        h = np.asarray(self.step_sizes)
        if not (np.diff(h) < 0).all():
            raise ValidationError("step sizes must be strictly decreasing")


def _fit_rate(step_sizes: np.ndarray, mean_residual: np.ndarray) -> float:
    if np.any(mean_residual <= _ROUNDOFF_FLOOR):
        return float("nan")
    slope, _ = np.polyfit(np.log(step_sizes), np.log(mean_residual), 1)
    return float(slope)


def verify_decomposition(
    reports: Sequence[DecompositionReport], step_sizes: Sequence[float], levels: Sequence[int]
) -> ConvergenceReport:
    """Convergence of the structural identity and of the remainder's QV.

    ``reports`` must come from the same underlying ensemble restricted to
    grids of the given step sizes, ordered coarse to fine.
    """
    if len(reports) != len(step_sizes) or len(reports) != len(levels):
        raise ValidationError("one report and one step size per level required")
    per_level = []
    mean_r, max_r = [], []
    qv_theta_mean, qv_rel_mean = [], []
    for report in reports:
        stats = decomposition_residuals(report)
        per_level.append(
            ResidualSeries(claim="prop3", sup=stats["sup"], endpoint=stats["endpoint"])
        )
        mean_r.append(float(stats["sup"].mean()))
        max_r.append(float(stats["sup"].max()))
        qv_theta_mean.append(float(stats["qv_theta"].mean()))
        qv_rel_mean.append(float(stats["qv_rel"].mean()))
    mean_r = np.asarray(mean_r)
    h = np.asarray(step_sizes, dtype=np.float64)
    return ConvergenceReport(
        claim="prop3",
        levels=tuple(int(m) for m in levels),
        step_sizes=h,
        mean_residual=mean_r,
        max_residual=np.asarray(max_r),
        fitted_rate=_fit_rate(h, mean_r),
        per_level=tuple(per_level),
        extras={
            "qv_theta_mean": np.asarray(qv_theta_mean),
            "qv_rel_mean": np.asarray(qv_rel_mean),
        },
    )


def _simulate_model(
    model, grid: TimeGrid, rng: RngSpec, paths: int, threads: int = 1
) -> PathEnsemble:
    if isinstance(model, BrownianParams):
        return simulate_brownian(model, grid, rng, paths, threads=threads)
    if isinstance(model, AtlasParams):
        return simulate_atlas(model, grid, rng, paths, threads=threads)
    if isinstance(model, RankBasedParams):
        return simulate_rank_based(model, grid, rng, paths, threads=threads)
    raise ValidationError(f"unsupported model parameter type {type(model).__name__}")


def _check_levels(levels: Sequence[int]) -> list[int]:
    lv = [int(m) for m in levels]
    if len(lv) < 3:
        raise ValidationError(f"need at least 3 refinement levels, got {len(lv)}")
    if sorted(lv) != lv or len(set(lv)) != len(lv):
        raise ValidationError(f"levels must be strictly increasing step counts, got {levels}")
    if lv[0] < 2:
        raise ValidationError("coarsest level must have at least 2 steps")
    for m in lv[:-1]:
        if lv[-1] % m != 0:
            raise ValidationError(f"finest level {lv[-1]} is not a multiple of level {m}")
    return lv


def _level_residuals(
    claim: str,
    sub: PathEnsemble,
    generator: GeneratingFunction | None,
    band_delta,
) -> tuple[ResidualSeries, dict]:
    """Evaluate one claim on one (already restricted) ensemble."""
    values = sub.values
    extras: dict = {}
    if claim == "lemma2":
        return verify_abs_representation(values[:, 0, :]), extras
    if claim in ("lemma3", "lemma4_max", "lemma4_min"):
        if values.shape[1] < 2:
            raise ValidationError(f"claim {claim} needs at least two assets")
        X, Y = values[:, 0, :], values[:, 1, :]
        if claim == "lemma3":
            return verify_pair_difference(X, Y), extras
        res_max, res_min = verify_minmax(X, Y)
        return (res_max if claim == "lemma4_max" else res_min), extras
    if claim == "prop1":
        _, frames = ranked_ensemble(sub)
        return verify_rank_representation(sub, frames), extras
    if claim == "prop3":
        if generator is None:
            raise ValidationError("claim prop3 requires a generating function")
        mu = market_weights(sub)
        _, frames = ranked_ensemble(sub)
        pi = generated_weights(mu, frames, generator)
        report = decompose(pi, mu, frames, generator, sub)
        stats = decomposition_residuals(report)
        extras = {
            "qv_theta_mean": float(stats["qv_theta"].mean()),
            "qv_rel_mean": float(stats["qv_rel"].mean()),
        }
        return (
            ResidualSeries(claim="prop3", sup=stats["sup"], endpoint=stats["endpoint"]),
            extras,
        )
    if claim == "coincidence":
        if values.shape[1] < 2:
            raise ValidationError("claim coincidence needs at least two assets")
        delta = math.sqrt(sub.grid.h) if band_delta is None else float(band_delta)
        stats = coincidence_stats(sub, delta)
        frac = stats.band_fraction_per_path[0]
        extras = {"delta": delta, "triple_points": stats.triple_points}
        return ResidualSeries(claim="coincidence", sup=frac, endpoint=frac), extras
    raise ValidationError(f"unknown claim {claim!r}; choose from {CLAIMS}")


def convergence_study(
    claim: str,
    model,
    T: float,
    levels: Sequence[int],
    paths: int,
    rng: RngSpec,
    generator: GeneratingFunction | None = None,
    band_delta: float | None = None,
    threads: int = 1,
) -> ConvergenceReport:
    """Coupled step-size refinement study for one claim.

    One ensemble is simulated at the finest level and restricted to each
    coarser grid, so every level sees the same underlying noise and the same
    values at shared grid times. ``levels`` are step counts, strictly
    increasing, each dividing the finest.
    """
    if claim not in CLAIMS:
        raise ValidationError(f"unknown claim {claim!r}; choose from {CLAIMS}")
    lv = _check_levels(levels)
    if paths < 1:
        raise ValidationError(f"path count must be >= 1, got {paths}")
    fine = _simulate_model(model, build_grid(T, lv[-1]), rng, paths, threads=threads)

    per_level: list[ResidualSeries] = []
    mean_r, max_r = [], []
    extras_per_level: list[dict] = []
    for M in lv:
        sub = fine if M == lv[-1] else fine.subsample(M)
        res, extras = _level_residuals(claim, sub, generator, band_delta)
        per_level.append(res)
        if claim == "prop1":
            # Worst rank's mean sup-residual; max over everything.
            mean_r.append(float(res.sup.mean(axis=1).max()))
        else:
            mean_r.append(float(res.sup.mean()))
        max_r.append(float(res.sup.max()))
        extras_per_level.append(extras)

    h = np.array([T / M for M in lv])
    mean_arr = np.asarray(mean_r)
    extras: dict = {}
    for key in extras_per_level[-1]:
        extras[key] = np.asarray([e[key] for e in extras_per_level])
    return ConvergenceReport(
        claim=claim,
        levels=tuple(lv),
        step_sizes=h,
        mean_residual=mean_arr,
        max_residual=np.asarray(max_r),
        fitted_rate=_fit_rate(h, mean_arr),
        per_level=tuple(per_level),
        extras=extras,
    )
