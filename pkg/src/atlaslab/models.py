"""Euler simulation of Atlas and first-order rank-based market models.

Dynamics are stated and stored in log-capitalizations. For the Atlas model
each asset drifts at ``-g`` except the smallest (last-ranked) asset, which
drifts at ``(n-1)*g``, so the drifts sum to zero at every instant; the
first-order generalization assigns each rank its own drift and volatility.

The Euler step freezes the rank at the left endpoint of the interval, which
is the non-anticipating reading of the rank indicator::

    x_i(t_{m+1}) = x_i(t_m) + g_{rank_i(t_m)} * h + sigma_{rank_i(t_m)} * dW_i(m)

No within-step crossing correction is applied; the verification module
quantifies the resulting step-size error instead of hiding it. The Atlas
simulator delegates to the rank-table kernel with the drift table
``[-g, ..., -g, (n-1)*g]``, so the two entry points are bit-identical on the
same increments by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .paths import PathEnsemble, RngSpec, TimeGrid, brownian_ensemble, gaussian_increments

__all__ = [
    "AtlasParams",
    "RankBasedParams",
    "BrownianParams",
    "simulate_atlas",
    "simulate_rank_based",
    "simulate_brownian",
]


def _check_initial(initial_log, n: int) -> np.ndarray:
    if initial_log is None:
        return np.zeros(n, dtype=np.float64)
    arr = np.asarray(initial_log, dtype=np.float64)
    if arr.shape != (n,):
        raise ValidationError(f"initial log values must have shape ({n},), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValidationError("initial log values must be finite")
    return arr


@dataclass(frozen=True)
class AtlasParams:
    """Atlas model coefficients: common volatility, one growth parameter.

    ``g`` has units 1/time and ``sigma`` 1/sqrt(time). Default initial
    log-capitalizations are all zero (ties at t=0 break by asset index).
    """

    n: int
    g: float
    sigma: float
    initial_log: np.ndarray | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValidationError(f"need at least n=2 assets, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if not (self.g > 0.0) or not np.isfinite(self.g):
            raise ValidationError(f"growth parameter g must be positive, got {self.g}")
        if not (self.sigma > 0.0) or not np.isfinite(self.sigma):
            raise ValidationError(f"volatility sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "initial_log", _check_initial(self.initial_log, self.n))


@dataclass(frozen=True)
class RankBasedParams:
    """First-order model coefficients: one drift and volatility per rank.

    ``g_by_rank[k]`` and ``sigma_by_rank[k]`` apply to the asset holding rank
    ``k`` (0 = largest). All volatilities must be positive.
    """

    n: int
    g_by_rank: np.ndarray
    sigma_by_rank: np.ndarray
    initial_log: np.ndarray | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValidationError(f"need at least n=2 assets, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        g = np.asarray(self.g_by_rank, dtype=np.float64)
        s = np.asarray(self.sigma_by_rank, dtype=np.float64)
        if g.shape != (self.n,) or s.shape != (self.n,):
            raise ValidationError(
                f"per-rank tables must have shape ({self.n},), got {g.shape} and {s.shape}"
            )
        if not np.isfinite(g).all():
            raise ValidationError("per-rank drifts must be finite")
        if not (np.isfinite(s).all() and (s > 0.0).all()):
            raise ValidationError("per-rank volatilities must all be positive")
        object.__setattr__(self, "g_by_rank", g)
        object.__setattr__(self, "sigma_by_rank", s)
        object.__setattr__(self, "initial_log", _check_initial(self.initial_log, self.n))

    @classmethod
    def from_atlas(cls, params: AtlasParams) -> "RankBasedParams":
        """Rewrite Atlas coefficients as per-rank tables."""
        g_tab = np.full(params.n, -params.g, dtype=np.float64)
        g_tab[-1] = (params.n - 1) * params.g
        s_tab = np.full(params.n, params.sigma, dtype=np.float64)
        return cls(
            n=params.n,
            g_by_rank=g_tab,
            sigma_by_rank=s_tab,
            initial_log=params.initial_log,
        )

    @property
    def is_atlas(self) -> bool:
        """True iff the tables are exactly an Atlas drift pattern."""
        g, s = self.g_by_rank, self.sigma_by_rank
        if not (s == s[0]).all() or not (g[:-1] == g[0]).all():
            return False
        return g[0] < 0.0 and g[-1] == (self.n - 1) * (-g[0])


@dataclass(frozen=True)
class BrownianParams:
    """Driftless scaled Brownian motions, the degenerate no-coupling case."""

    n: int
    sigma: float = 1.0
    initial_log: np.ndarray | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"need at least n=1 assets, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if not (self.sigma > 0.0) or not np.isfinite(self.sigma):
            raise ValidationError(f"volatility sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "initial_log", _check_initial(self.initial_log, self.n))


def _euler_rank_kernel(
    x0: np.ndarray, dW: np.ndarray, h: float, g_tab: np.ndarray, s_tab: np.ndarray
) -> np.ndarray:
    """Rank-frozen Euler recursion over all paths at once.

    ``x0`` is (paths, n), ``dW`` is (paths, n, M); returns (paths, n, M+1).
    """
    P, n, M = dW.shape
    out = np.empty((P, n, M + 1), dtype=np.float64)
    out[:, :, 0] = x0
    x = x0.copy()
    drift = np.empty_like(x)
    vol = np.empty_like(x)
    rank_idx = np.arange(n)
    g_row = np.broadcast_to(g_tab[rank_idx], (P, n))
    s_row = np.broadcast_to(s_tab[rank_idx], (P, n))
    for m in range(M):
        # Left-endpoint ranks: stable descending order, ties to lower index.
        order = np.argsort(-x, axis=1, kind="stable")
        np.put_along_axis(drift, order, g_row, axis=1)
        np.put_along_axis(vol, order, s_row, axis=1)
        x = x + drift * h + vol * dW[:, :, m]
        out[:, :, m + 1] = x
    return out


def simulate_rank_based(
    params: RankBasedParams,
    grid: TimeGrid,
    rng: RngSpec,
    paths: int,
    dW: np.ndarray | None = None,
    threads: int = 1,
) -> PathEnsemble:
    """Simulate log-capitalizations of a first-order model.

    Pass ``dW`` to reuse increments already drawn (e.g. coupled refinement
    studies); otherwise they are generated from ``rng`` via the documented
    substream rule. The result is a pure function of the arguments.
    """
    if dW is None:
        dW = gaussian_increments(rng, grid, params.n, paths, threads=threads)
    else:
        dW = np.asarray(dW, dtype=np.float64)
        if dW.shape != (paths, params.n, grid.M):
            raise ValidationError(
                f"increments shape {dW.shape} does not match "
                f"(paths={paths}, n={params.n}, M={grid.M})"
            )
    x0 = np.broadcast_to(params.initial_log, (paths, params.n)).copy()
    values = _euler_rank_kernel(x0, dW, grid.h, params.g_by_rank, params.sigma_by_rank)
    return PathEnsemble(values=values, grid=grid)


def simulate_atlas(
    params: AtlasParams,
    grid: TimeGrid,
    rng: RngSpec,
    paths: int,
    dW: np.ndarray | None = None,
    threads: int = 1,
) -> PathEnsemble:
    """Simulate log-capitalizations of an Atlas model."""
    return simulate_rank_based(
        RankBasedParams.from_atlas(params), grid, rng, paths, dW=dW, threads=threads
    )


def simulate_brownian(
    params: BrownianParams,
    grid: TimeGrid,
    rng: RngSpec,
    paths: int,
    dW: np.ndarray | None = None,
    threads: int = 1,
) -> PathEnsemble:
    """Exact scaled Brownian paths (cumulative sums, no Euler error)."""
    if dW is None:
        dW = gaussian_increments(rng, grid, params.n, paths, threads=threads)
    return brownian_ensemble(dW, grid, sigma=params.sigma, initial=params.initial_log)
