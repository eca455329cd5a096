"""Time grids, multi-asset path storage, and seeded Gaussian increments.

Everything downstream (SDE simulation, integral estimators, verification
studies) is built on three primitives defined here:

* :class:`TimeGrid` -- a uniform partition of ``[0, T]``,
* :class:`PathEnsemble` -- values of ``n`` processes on a grid for ``P``
  independent Monte Carlo paths, stored as one ``(P, n, M+1)`` array,
* :class:`RngSpec` -- a master seed plus a fixed substream derivation rule,
  so that the full increment array is a pure function of
  ``(spec, grid, n, paths)`` regardless of evaluation order or threading.

Reproducibility contract
------------------------
The substream for path ``p`` and asset ``i`` is
``numpy.random.SeedSequence(master_seed, spawn_key=(p, i))`` feeding a
``PCG64`` bit generator; normal variates are drawn with
``Generator.standard_normal`` (ziggurat) and scaled by ``sqrt(h)``.
Distinct ``(p, i)`` pairs give distinct, independent substreams by the
collision-resistant design of ``SeedSequence``. Changing any part of this
recipe changes the streams, so it is pinned here and exercised by tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = [
    "TimeGrid",
    "PathEnsemble",
    "RngSpec",
    "build_grid",
    "gaussian_increments",
    "coarsen_increments",
    "brownian_ensemble",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of ``[0, T]`` into ``M`` steps of size ``h = T/M``."""

    T: float
    M: int

    def __post_init__(self):
        if not np.isfinite(self.T) or self.T <= 0.0:
            raise ValidationError(f"horizon T must be a positive finite real, got {self.T}")
        if int(self.M) != self.M or self.M < 2:
            raise ValidationError(f"step count M must be an integer >= 2, got {self.M}")
        object.__setattr__(self, "M", int(self.M))

    @property
    def h(self) -> float:
        return self.T / self.M

    def points(self) -> np.ndarray:
        """Grid points t_m = m*h, m = 0..M, with t_M = T exactly."""
        return np.linspace(0.0, self.T, self.M + 1)

    def refine_stride(self, coarse_M: int) -> int:
        """Subsampling stride that maps this grid onto a coarser one."""
        if coarse_M < 2 or self.M % coarse_M != 0:
            raise ValidationError(
                f"coarse step count {coarse_M} does not divide fine step count {self.M}"
            )
        return self.M // coarse_M


def build_grid(T: float, M: int) -> TimeGrid:
    """Validate and build a uniform grid on ``[0, T]`` with ``M`` steps."""
    return TimeGrid(T=float(T), M=M)


@dataclass(frozen=True)
class PathEnsemble:
    """Values of ``n`` processes over a grid for ``P`` independent paths.

    ``values`` has shape ``(P, n, M+1)`` with time along the last axis.
    Entries must be finite; the array is treated as immutable once stored.
    """

    values: np.ndarray
    grid: TimeGrid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3:
            raise ValidationError(f"values must be (paths, assets, M+1), got shape {v.shape}")
        if v.shape[2] != self.grid.M + 1:
            raise ValidationError(
                f"time axis has {v.shape[2]} points but grid expects {self.grid.M + 1}"
            )
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise ValidationError(f"need at least one path and one asset, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise ValidationError("ensemble values must all be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def num_paths(self) -> int:
        return self.values.shape[0]

    @property
    def num_assets(self) -> int:
        return self.values.shape[1]

    def subsample(self, coarse_M: int) -> "PathEnsemble":
        """Restrict to a coarser grid sharing the same endpoints.

        The returned values are exactly the stored values at the shared grid
        times (a strided copy, bit-identical), which is what couples
        refinement levels in convergence studies.
        """
        stride = self.grid.refine_stride(coarse_M)
        coarse = build_grid(self.grid.T, coarse_M)
        return PathEnsemble(values=self.values[:, :, ::stride].copy(), grid=coarse)


@dataclass(frozen=True)
class RngSpec:
    """Master seed and the documented substream derivation rule.

    Substream for (path p, asset i):
    ``SeedSequence(master_seed, spawn_key=(p, i))`` -> ``PCG64`` ->
    ``Generator.standard_normal``. See the module docstring.
    """

    master_seed: int = 0

    def __post_init__(self):
        if int(self.master_seed) != self.master_seed:
            raise ValidationError(f"master_seed must be an integer, got {self.master_seed!r}")
        if not (0 <= int(self.master_seed) < 2**64):
            raise ValidationError("master_seed must fit in 64 bits")
        object.__setattr__(self, "master_seed", int(self.master_seed))

    def substream(self, path: int, asset: int) -> np.random.Generator:
        """Independent generator for one (path, asset) pair."""
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(path, asset))
        return np.random.Generator(np.random.PCG64(seq))


def gaussian_increments(
    spec: RngSpec, grid: TimeGrid, n: int, paths: int, threads: int = 1
) -> np.ndarray:
    """Brownian increments with mean 0 and variance ``h`` per step.

    Returns an array of shape ``(paths, n, M)``; entry ``[p, i, m]`` is
    ``W_i(t_{m+1}) - W_i(t_m)`` for path ``p``. Output is a pure function of
    ``(spec, grid, n, paths)``: each (path, asset) substream is generated
    independently and written into its own slice, so ``threads`` only changes
    scheduling, never a single bit of the result.
    """
    if n < 1:
        raise ValidationError(f"asset count must be >= 1, got {n}")
    if paths < 1:
        raise ValidationError(f"path count must be >= 1, got {paths}")
    if threads < 1:
        raise ValidationError(f"thread count must be >= 1, got {threads}")
    out = np.empty((paths, n, grid.M), dtype=np.float64)

    def fill(path_range):
        for p in path_range:
            for i in range(n):
                out[p, i, :] = spec.substream(p, i).standard_normal(grid.M)

    if threads == 1 or paths == 1:
        fill(range(paths))
    else:
        from concurrent.futures import ThreadPoolExecutor

        blocks = np.array_split(np.arange(paths), min(threads, paths))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, blocks))
    out *= np.sqrt(grid.h)
    return out


def coarsen_increments(dW: np.ndarray, factor: int) -> np.ndarray:
    """Aggregate fine increments into coarse ones by summing blocks of ``factor``.

    The induced coarse Brownian path is the restriction of the fine path to
    the coarse grid (up to float round-off in the block sums).
    """
    dW = np.asarray(dW)
    if int(factor) != factor or factor < 1:
        raise ValidationError(f"coarsening factor must be a positive integer, got {factor}")
    factor = int(factor)
    M = dW.shape[-1]
    if M % factor != 0:
        raise ValidationError(f"factor {factor} does not divide step count {M}")
    shape = dW.shape[:-1] + (M // factor, factor)
    return dW.reshape(shape).sum(axis=-1)


def brownian_ensemble(
    dW: np.ndarray, grid: TimeGrid, sigma: float = 1.0, initial: np.ndarray | None = None
) -> PathEnsemble:
    """Paths ``x0 + sigma * W`` built by cumulative summation of increments.

    This is the exact (distribution-free) construction used wherever a claim
    is about Brownian motion itself rather than a rank-coupled diffusion.
    """
    dW = np.asarray(dW, dtype=np.float64)
    if dW.ndim != 3 or dW.shape[-1] != grid.M:
        raise ValidationError(
            f"increments must be (paths, assets, M={grid.M}), got shape {dW.shape}"
        )
    if sigma < 0:
        raise ValidationError(f"sigma must be >= 0, got {sigma}")
    P, n, M = dW.shape
    values = np.empty((P, n, M + 1), dtype=np.float64)
    if initial is None:
        values[:, :, 0] = 0.0
    else:
        initial = np.asarray(initial, dtype=np.float64)
        if initial.shape != (n,):
            raise ValidationError(f"initial values must have shape ({n},), got {initial.shape}")
        values[:, :, 0] = initial
    np.cumsum(sigma * dW, axis=-1, out=values[:, :, 1:])
    values[:, :, 1:] += values[:, :, :1]
    return PathEnsemble(values=values, grid=grid)
