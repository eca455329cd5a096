"""Rank permutations, ranked path processes, and coincidence statistics.

Ranks are 0-based with rank 0 the largest value; ties are broken by asset
index, the lower index taking the better (smaller) rank. Exact float ties are
honored deterministically with no tolerance band: ties have probability zero
along simulated paths but occur systematically at shared initial values.

For every grid point the rank map ``r`` (asset -> rank) and its inverse ``p``
(rank -> asset) are stored side by side, so occupation indicators and ranked
series are cheap gathers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .paths import PathEnsemble

__all__ = [
    "RankFrame",
    "CoincidenceStats",
    "rank_permutation",
    "ranked_ensemble",
    "occupation_indicator",
    "coincidence_stats",
]


@dataclass(frozen=True)
class RankFrame:
    """Per (path, time) rank permutations of an ensemble.

    ``rank_of_asset[p, i, m]`` is the rank held by asset ``i`` (0 = largest);
    ``asset_at_rank[p, k, m]`` is the asset holding rank ``k``. The two are
    mutually inverse permutations of ``0..n-1`` at every grid point.
    """

    rank_of_asset: np.ndarray
    asset_at_rank: np.ndarray

    def __post_init__(self):
        r, p = self.rank_of_asset, self.asset_at_rank
        if r.shape != p.shape or r.ndim != 3:
            raise ValidationError(f"inconsistent rank frame shapes {r.shape} vs {p.shape}")

    @property
    def num_assets(self) -> int:
        return self.rank_of_asset.shape[1]


def _rank_maps(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Descending stable argsort along axis 1 plus its inverse."""
    # Stable sort of -values: equal entries keep index order, so the lower
    # asset index wins the better rank, as required by the tie convention.
    order = np.argsort(-values, axis=1, kind="stable").astype(np.int32)
    ranks = np.empty_like(order)
    np.put_along_axis(
        ranks, order, np.arange(order.shape[1], dtype=np.int32).reshape(1, -1, 1), axis=1
    )
    return ranks, order


def rank_permutation(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rank map and inverse for one value vector.

    Returns ``(r, p)`` with ``r[i]`` the 0-based rank of ``values[i]``
    (0 = largest, ties to the lower index) and ``p = r^{-1}``.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size < 1:
        raise ValidationError(f"expected a non-empty 1-d vector, got shape {values.shape}")
    if not np.isfinite(values).all():
        raise ValidationError("rank input must be finite")
    r, p = _rank_maps(values.reshape(1, -1, 1))
    return r[0, :, 0].copy(), p[0, :, 0].copy()


def ranked_ensemble(ensemble: PathEnsemble) -> tuple[PathEnsemble, RankFrame]:
    """Sort an ensemble by rank at every grid point.

    Returns the ranked ensemble (axis 1 indexed by rank, non-increasing) and
    the frame of permutations, with ``ranked[p, k, m] == values[p, frames.
    asset_at_rank[p, k, m], m]``.
    """
    values = ensemble.values
    ranks, order = _rank_maps(values)
    ranked = np.take_along_axis(values, order, axis=1)
    return (
        PathEnsemble(values=ranked, grid=ensemble.grid),
        RankFrame(rank_of_asset=ranks, asset_at_rank=order),
    )


def occupation_indicator(frames: RankFrame, asset: int, rank: int) -> np.ndarray:
    """0/1 series over the grid, 1 where ``asset`` holds ``rank``.

    Shape ``(paths, M+1)``. Summing over ranks for a fixed asset, or over
    assets for a fixed rank, gives identically 1.
    """
    n = frames.num_assets
    if not (0 <= asset < n):
        raise ValidationError(f"asset index {asset} out of range for {n} assets")
    if not (0 <= rank < n):
        raise ValidationError(f"rank {rank} out of range for {n} assets")
    return (frames.rank_of_asset[:, asset, :] == rank).astype(np.float64)


@dataclass(frozen=True)
class CoincidenceStats:
    """Tie, crossing, and near-tie occupation statistics of an ensemble.

    All counts aggregate over paths and grid points. ``band_fraction_per_path``
    keeps the per-path occupation fractions so Monte Carlo standard errors can
    be formed; ``triple_points`` counts grid points where three or more assets
    sit within a chain of ``delta``-gaps (two or more adjacent sorted gaps
    below ``delta``).
    """

    delta: float
    pairs: tuple[tuple[int, int], ...]
    exact_ties: np.ndarray          # (num_pairs,) int
    sign_changes: np.ndarray        # (num_pairs,) int
    band_fraction: np.ndarray       # (num_pairs,) float in [0, 1]
    band_fraction_per_path: np.ndarray  # (num_pairs, paths)
    triple_points: int
    triple_points_per_path: np.ndarray  # (paths,) int


def coincidence_stats(ensemble: PathEnsemble, delta: float) -> CoincidenceStats:
    """Pairwise tie/crossing counts and ``delta``-band occupation fractions."""
    if not (delta > 0.0) or not np.isfinite(delta):
        raise ValidationError(f"band width delta must be positive and finite, got {delta}")
    values = ensemble.values
    P, n, _ = values.shape

    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    exact = np.zeros(len(pairs), dtype=np.int64)
    changes = np.zeros(len(pairs), dtype=np.int64)
    frac = np.zeros(len(pairs), dtype=np.float64)
    frac_per_path = np.zeros((len(pairs), P), dtype=np.float64)
    for idx, (i, j) in enumerate(pairs):
        d = values[:, i, :] - values[:, j, :]
        exact[idx] = int(np.count_nonzero(d == 0.0))
        sign = np.where(d > 0.0, 1, -1)
        changes[idx] = int(np.count_nonzero(np.diff(sign, axis=-1)))
        in_band = np.abs(d) < delta
        frac_per_path[idx] = in_band.mean(axis=-1)
        frac[idx] = in_band.mean()

    if n >= 3:
        srt = np.sort(values, axis=1)[:, ::-1, :]
        gaps = srt[:, :-1, :] - srt[:, 1:, :]
        chained = (gaps[:, :-1, :] < delta) & (gaps[:, 1:, :] < delta)
        triple_mask = chained.any(axis=1)
        triples_per_path = triple_mask.sum(axis=-1).astype(np.int64)
    else:
        triples_per_path = np.zeros(P, dtype=np.int64)

    return CoincidenceStats(
        delta=float(delta),
        pairs=tuple(pairs),
        exact_ties=exact,
        sign_changes=changes,
        band_fraction=frac,
        band_fraction_per_path=frac_per_path,
        triple_points=int(triples_per_path.sum()),
        triple_points_per_path=triples_per_path,
    )
