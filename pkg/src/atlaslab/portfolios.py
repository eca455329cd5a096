"""Market weights, rank-generated portfolios, and the return decomposition.

A portfolio here is a weight process ``pi`` over assets summing to 1 at every
grid point (negative weights allowed; generated portfolios can short). Given
a positive C^2 function S on a neighborhood of the unit simplex, the weights
generated by S from the *ranked* market weights are

    pi_{p(k)} = (Dk log S(mu_sorted) + 1 - sum_j mu_sorted_j * Dj log S(mu_sorted)) * mu_sorted_k

where ``p`` maps rank to asset. The correction term makes the weights sum to
one automatically. Two closed-form fixed points anchor the implementation:
a constant S generates the market portfolio itself, and the geometric mean
generates the equal-weight portfolio.

The relative log-return of ``pi`` against the market decomposes into a
structural part (the running Stratonovich sum of ``pi_i`` against
``log mu_i``) and a trading part (the remainder). For generated portfolios
the structural part tracks the log-change of S along the ranked weights; the
verification module measures how fast the discrepancy vanishes under grid
refinement.

Wealth itself is computed by the exact discrete self-financing recursion

    Z_pi(t_{m+1}) / Z_pi(t_m) = sum_i pi_i(t_m) * X_i(t_{m+1}) / X_i(t_m)

with weights read at the left endpoint (non-anticipating trading). The
market ratio admits the same form with ``mu`` in place of ``pi``, so the
relative log-return of the market portfolio against itself is exactly zero,
term by term.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EvaluationError, NumericalError, ValidationError
from .integrals import stratonovich_integral
from .paths import PathEnsemble
from .ranks import RankFrame

__all__ = [
    "GeneratingFunction",
    "WeightSeries",
    "DecompositionReport",
    "market_weights",
    "generated_weights",
    "relative_wealth",
    "structural_process",
    "decompose",
]

# Weights this close to the simplex boundary break log-based generators.
_INTERIOR_FLOOR = 1e-12

_WEIGHT_SUM_ATOL = 1e-12


def _guard_interior(x: np.ndarray, name: str) -> None:
    bad = x < _INTERIOR_FLOOR
    if bad.any():
        where = np.argwhere(bad)[0]
        raise EvaluationError(
            f"{name} generating function needs weights >= {_INTERIOR_FLOOR}; "
            f"violated at index {tuple(int(v) for v in where)} "
            f"(value {float(x[tuple(where)]):.3e})"
        )


@dataclass(frozen=True)
class GeneratingFunction:
    """A positive C^2 function on the simplex with an analytic gradient.

    ``value`` maps ``(..., n)`` weight arrays to ``(...)``; ``gradient`` maps
    ``(..., n)`` to ``(..., n)``. Gradients are supplied analytically for all
    built-ins and cross-checked against central finite differences in the
    test suite, so generated-weight convergence studies are not contaminated
    by finite-difference noise.
    """

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)

    @classmethod
    def constant(cls, c: float = 1.0) -> "GeneratingFunction":
        """S = c. Generates the market portfolio."""
        if not (c > 0.0):
            raise ValidationError(f"constant generating value must be positive, got {c}")

        def value(x):
            return np.full(np.asarray(x).shape[:-1], float(c))

        def gradient(x):
            return np.zeros_like(np.asarray(x, dtype=np.float64))

        return cls(name="constant", value=value, gradient=gradient, params={"c": float(c)})

    @classmethod
    def entropy(cls) -> "GeneratingFunction":
        """S(x) = -sum x_k log x_k, with the 0*log(0) = 0 convention."""

        def value(x):
            x = np.asarray(x, dtype=np.float64)
            _guard_interior(x, "entropy")
            return -(x * np.log(x)).sum(axis=-1)

        def gradient(x):
            x = np.asarray(x, dtype=np.float64)
            _guard_interior(x, "entropy")
            return -(1.0 + np.log(x))

        return cls(name="entropy", value=value, gradient=gradient)

    @classmethod
    def diversity(cls, p: float) -> "GeneratingFunction":
        """S(x) = (sum x_k^p)^(1/p) for 0 < p < 1."""
        if not (0.0 < p < 1.0):
            raise ValidationError(f"diversity exponent must lie in (0, 1), got {p}")

        def value(x):
            x = np.asarray(x, dtype=np.float64)
            return (x**p).sum(axis=-1) ** (1.0 / p)

        def gradient(x):
            x = np.asarray(x, dtype=np.float64)
            s = (x**p).sum(axis=-1, keepdims=True)
            return s ** (1.0 / p - 1.0) * x ** (p - 1.0)

        return cls(name="diversity", value=value, gradient=gradient, params={"p": float(p)})

    @classmethod
    def geometric_mean(cls) -> "GeneratingFunction":
        """S(x) = (prod x_k)^(1/n). Generates the equal-weight portfolio."""

        def value(x):
            x = np.asarray(x, dtype=np.float64)
            _guard_interior(x, "geometric_mean")
            return np.exp(np.log(x).mean(axis=-1))

        def gradient(x):
            x = np.asarray(x, dtype=np.float64)
            _guard_interior(x, "geometric_mean")
            n = x.shape[-1]
            val = np.exp(np.log(x).mean(axis=-1, keepdims=True))
            return val / (n * x)

        return cls(name="geometric_mean", value=value, gradient=gradient)

    @classmethod
    def by_name(cls, name: str, **params) -> "GeneratingFunction":
        """Build a built-in by its config name."""
        factories = {
            "constant": cls.constant,
            "entropy": cls.entropy,
            "diversity": cls.diversity,
            "geometric_mean": cls.geometric_mean,
        }
        if name not in factories:
            raise ValidationError(
                f"unknown generating function {name!r}; choose from {sorted(factories)}"
            )
        return factories[name](**params)


@dataclass(frozen=True)
class WeightSeries:
    """Portfolio weights per (path, asset, time), summing to 1 over assets."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3:
            raise ValidationError(f"weights must be (paths, assets, M+1), got shape {v.shape}")
        if not np.isfinite(v).all():
            raise ValidationError("weights must be finite")
        worst = float(np.max(np.abs(v.sum(axis=1) - 1.0)))
        if worst > _WEIGHT_SUM_ATOL:
            raise ValidationError(
                f"weights must sum to 1 within {_WEIGHT_SUM_ATOL}; worst deviation {worst:.3e}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def market_weights(log_x: PathEnsemble) -> WeightSeries:
    """Capitalization weights mu_i = X_i / sum_j X_j from log-capitalizations.

    Computed by subtracting the per-time max of log X before exponentiating,
    so arbitrary common shifts of the logs cancel exactly.
    """
    logs = log_x.values
    shifted = logs - logs.max(axis=1, keepdims=True)
    w = np.exp(shifted)
    w /= w.sum(axis=1, keepdims=True)
    return WeightSeries(values=w)


def generated_weights(
    mu: WeightSeries, frames: RankFrame, S: GeneratingFunction
) -> WeightSeries:
    """Portfolio weights generated by S from the ranked market weights.

    The weight computed for rank ``k`` is assigned back to the asset holding
    that rank at the same grid point.
    """
    w = mu.values
    if frames.asset_at_rank.shape != w.shape:
        raise ValidationError(
            f"rank frame shape {frames.asset_at_rank.shape} does not match weights {w.shape}"
        )
    mu_sorted = np.take_along_axis(w, frames.asset_at_rank, axis=1)
    # Evaluators take the asset axis last: (paths, M+1, n).
    x = np.moveaxis(mu_sorted, 1, -1)
    s_val = S.value(x)
    bad = ~(s_val > 0.0)
    if bad.any():
        p_idx, m_idx = np.argwhere(bad)[0]
        raise EvaluationError(
            f"generating function {S.name!r} is non-positive at path {int(p_idx)}, "
            f"time index {int(m_idx)} (value {float(s_val[p_idx, m_idx]):.3e})"
        )
    dlog = S.gradient(x) / s_val[..., None]
    correction = 1.0 - (x * dlog).sum(axis=-1, keepdims=True)
    pi_sorted = np.moveaxis((dlog + correction) * x, -1, 1)
    pi = np.empty_like(w)
    np.put_along_axis(pi, frames.asset_at_rank, pi_sorted, axis=1)
    return WeightSeries(values=pi)


def relative_wealth(pi: WeightSeries, log_x: PathEnsemble) -> np.ndarray:
    """Running log(Z_pi / Z_market) under discrete self-financing rebalancing.

    Both wealth processes start at the total market capitalization, and both
    per-step growth factors are weighted sums of the same asset gross returns,
    so the market portfolio maps to the zero series exactly.

    Returns shape ``(paths, M+1)``. Raises :class:`NumericalError` if shorting
    drives a per-step portfolio factor non-positive, identifying the path,
    time index, and offending weights.
    """
    w = pi.values
    logs = log_x.values
    if w.shape != logs.shape:
        raise ValidationError(f"weights shape {w.shape} does not match paths {logs.shape}")
    gross = np.exp(np.diff(logs, axis=-1))
    factor_pi = (w[:, :, :-1] * gross).sum(axis=1)
    bad = ~(factor_pi > 0.0)
    if bad.any():
        p_idx, m_idx = np.argwhere(bad)[0]
        raise NumericalError(
            f"portfolio wealth factor {float(factor_pi[p_idx, m_idx]):.3e} <= 0 at "
            f"path {int(p_idx)}, step {int(m_idx)}; weights "
            f"{np.array2string(w[p_idx, :, m_idx], precision=4)}"
        )
    mu = market_weights(log_x).values
    factor_mu = (mu[:, :, :-1] * gross).sum(axis=1)
    steps = np.log(factor_pi) - np.log(factor_mu)
    out = np.empty((w.shape[0], w.shape[2]), dtype=np.float64)
    out[:, 0] = 0.0
    np.cumsum(steps, axis=-1, out=out[:, 1:])
    return out


def structural_process(pi: WeightSeries, mu: WeightSeries) -> np.ndarray:
    """Running Stratonovich sum of the weights against the log market weights.

    value(t) = sum_i midpoint-integral of pi_i against log(mu_i) up to t,
    shape ``(paths, M+1)``. For pi = mu this telescopes to the change of the
    weight total, which is conserved on the simplex, so the series shrinks
    with the step size.
    """
    w = pi.values
    m = mu.values
    if w.shape != m.shape:
        raise ValidationError(f"weights shape {w.shape} does not match {m.shape}")
    log_mu = np.log(m)
    total = np.zeros((w.shape[0], w.shape[2]), dtype=np.float64)
    for i in range(w.shape[1]):
        total += stratonovich_integral(w[:, i, :], log_mu[:, i, :]).values
    return total


@dataclass(frozen=True)
class DecompositionReport:
    """Aligned return-decomposition series over the grid, all starting at 0.

    ``trading = relative_log_return - structural`` holds identically by
    construction; ``residual`` is the relative log-return net of the
    generating function's log-change and estimates the bounded-variation
    remainder of the decomposition.
    """

    relative_log_return: np.ndarray
    generating_log_change: np.ndarray
    structural: np.ndarray
    trading: np.ndarray
    residual: np.ndarray


def decompose(
    pi: WeightSeries,
    mu: WeightSeries,
    frames: RankFrame,
    S: GeneratingFunction,
    log_x: PathEnsemble,
) -> DecompositionReport:
    """Full return decomposition of a generated portfolio on an ensemble."""
    rel = relative_wealth(pi, log_x)
    mu_sorted = np.take_along_axis(mu.values, frames.asset_at_rank, axis=1)
    log_s = np.log(S.value(np.moveaxis(mu_sorted, 1, -1)))
    gen_change = log_s - log_s[:, :1]
    structural = structural_process(pi, mu)
    return DecompositionReport(
        relative_log_return=rel,
        generating_log_change=gen_change,
        structural=structural,
        trading=rel - structural,
        residual=rel - gen_change,
    )
