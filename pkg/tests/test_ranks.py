import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from atlaslab import (
    PathEnsemble,
    RngSpec,
    ValidationError,
    build_grid,
    coincidence_stats,
    gaussian_increments,
    occupation_indicator,
    rank_permutation,
    ranked_ensemble,
    simulate_atlas,
)
from atlaslab.models import AtlasParams


def make_ensemble(values):
    values = np.asarray(values, dtype=np.float64)
    return PathEnsemble(values=values, grid=build_grid(1.0, values.shape[2] - 1))


class TestRankPermutation:
    def test_simple_order(self):
        # Largest value gets rank 0.
        r, p = rank_permutation([3.0, 1.0, 2.0])
        assert np.array_equal(r, [0, 2, 1])
        assert np.array_equal(p, [0, 2, 1])

    def test_tie_broken_by_index(self):
        r, p = rank_permutation([2.0, 2.0, 1.0])
        assert np.array_equal(r, [0, 1, 2])
        assert np.array_equal(p, [0, 1, 2])

    def test_single_value(self):
        r, p = rank_permutation([5.0])
        assert np.array_equal(r, [0]) and np.array_equal(p, [0])

    def test_rejects_nan(self):
        with pytest.raises(ValidationError):
            rank_permutation([1.0, np.nan])

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, st.integers(1, 12),
                  elements=st.floats(-10, 10, allow_nan=False).map(lambda v: round(v, 1))))
    def test_permutation_properties(self, values):
        # Rounded elements make ties frequent, exercising the tie-break rule.
        r, p = rank_permutation(values)
        n = len(values)
        assert np.array_equal(r[p], np.arange(n))
        assert np.array_equal(p[r], np.arange(n))
        ranked = values[p]
        assert (np.diff(ranked) <= 0).all()
        # Equal values keep index order.
        for k in range(n - 1):
            if ranked[k] == ranked[k + 1]:
                assert p[k] < p[k + 1]


class TestRankedEnsemble:
    def test_constant_paths(self):
        ens = make_ensemble([[[1.0] * 5, [2.0] * 5]])
        ranked, frames = ranked_ensemble(ens)
        assert np.array_equal(ranked.values[0, 0], 2.0 * np.ones(5))
        assert np.array_equal(ranked.values[0, 1], np.ones(5))
        assert np.array_equal(frames.asset_at_rank[0, :, 2], [1, 0])

    def test_sum_preserved(self):
        grid = build_grid(1.0, 64)
        ens = simulate_atlas(
            AtlasParams(n=4, g=0.2, sigma=0.5), grid, RngSpec(3), 8
        )
        ranked, _ = ranked_ensemble(ens)
        np.testing.assert_allclose(
            ranked.values.sum(axis=1), ens.values.sum(axis=1), atol=1e-12
        )

    def test_crossing_lines(self):
        # X1 = t and X2 = 1 - t cross at 0.5; the top rank is the max.
        t = build_grid(1.0, 4).points()
        ens = make_ensemble([[t, 1.0 - t]])
        ranked, frames = ranked_ensemble(ens)
        assert np.array_equal(ranked.values[0, 0], np.maximum(t, 1.0 - t))
        # At the tie (t = 0.5) the lower asset index takes rank 0.
        assert frames.asset_at_rank[0, 0, 2] == 0

    def test_frames_are_inverse(self):
        grid = build_grid(1.0, 32)
        ens = simulate_atlas(AtlasParams(n=5, g=0.1, sigma=0.4), grid, RngSpec(8), 6)
        _, frames = ranked_ensemble(ens)
        gathered = np.take_along_axis(frames.rank_of_asset, frames.asset_at_rank, axis=1)
        assert np.array_equal(gathered, np.broadcast_to(
            np.arange(5).reshape(1, 5, 1), gathered.shape))

    def test_gather_matches_values(self):
        grid = build_grid(1.0, 16)
        ens = simulate_atlas(AtlasParams(n=3, g=0.3, sigma=0.6), grid, RngSpec(12), 4)
        ranked, frames = ranked_ensemble(ens)
        regather = np.take_along_axis(ens.values, frames.asset_at_rank, axis=1)
        assert np.array_equal(ranked.values, regather)


class TestOccupationIndicator:
    def test_partition_of_unity(self):
        grid = build_grid(1.0, 32)
        ens = simulate_atlas(AtlasParams(n=4, g=0.1, sigma=0.5), grid, RngSpec(4), 5)
        _, frames = ranked_ensemble(ens)
        by_rank = sum(occupation_indicator(frames, 1, k) for k in range(4))
        assert np.array_equal(by_rank, np.ones_like(by_rank))
        by_asset = sum(occupation_indicator(frames, i, 2) for i in range(4))
        assert np.array_equal(by_asset, np.ones_like(by_asset))

    def test_constant_example(self):
        ens = make_ensemble([[[1.0] * 5, [2.0] * 5]])
        _, frames = ranked_ensemble(ens)
        assert occupation_indicator(frames, 1, 0).all()

    def test_bounds_checked(self):
        ens = make_ensemble([[[1.0] * 3, [2.0] * 3]])
        _, frames = ranked_ensemble(ens)
        with pytest.raises(ValidationError):
            occupation_indicator(frames, 2, 0)
        with pytest.raises(ValidationError):
            occupation_indicator(frames, 0, -1)


class TestCoincidenceStats:
    def test_identical_paths(self):
        ens = make_ensemble([[[1.0] * 9, [1.0] * 9]])
        stats = coincidence_stats(ens, delta=0.1)
        assert stats.exact_ties[0] == 9
        assert stats.band_fraction[0] == 1.0
        assert stats.sign_changes[0] == 0

    def test_separated_constants(self):
        ens = make_ensemble([[[0.0] * 9, [5.0] * 9]])
        stats = coincidence_stats(ens, delta=0.5)
        assert stats.exact_ties[0] == 0
        assert stats.band_fraction[0] == 0.0
        assert stats.triple_points == 0

    def test_sign_changes_counted(self):
        t = np.linspace(0.0, 1.0, 9)
        ens = make_ensemble([[t, 1.0 - t]])  # one crossing
        stats = coincidence_stats(ens, delta=1e-6)
        assert stats.sign_changes[0] == 1

    def test_triple_points_chained(self):
        base = np.zeros(5)
        ens = make_ensemble([[base, base + 0.01, base + 0.02, base + 5.0]])
        stats = coincidence_stats(ens, delta=0.05)
        assert stats.triple_points == 5
        assert np.array_equal(stats.triple_points_per_path, [5])
        # Widening the gap beyond delta kills the chain.
        ens2 = make_ensemble([[base, base + 0.01, base + 0.2, base + 5.0]])
        assert coincidence_stats(ens2, delta=0.05).triple_points == 0

    def test_named_and_ranked_tie_sets_agree(self):
        # A tie among named series is a tie among ranked series and back.
        grid = build_grid(1.0, 64)
        ens = simulate_atlas(AtlasParams(n=3, g=0.2, sigma=0.4), grid, RngSpec(9), 10)
        values = ens.values.copy()
        values[:, 1, 10] = values[:, 0, 10]  # plant exact ties
        planted = PathEnsemble(values=values, grid=grid)
        ranked, _ = ranked_ensemble(planted)

        def tie_mask(v):
            out = np.zeros((v.shape[0], v.shape[2]), dtype=bool)
            for i in range(v.shape[1]):
                for j in range(i + 1, v.shape[1]):
                    out |= v[:, i, :] == v[:, j, :]
            return out

        assert np.array_equal(tie_mask(planted.values), tie_mask(ranked.values))

    def test_rejects_bad_delta(self):
        ens = make_ensemble([[[1.0] * 3, [2.0] * 3]])
        for delta in (0.0, -1.0, np.inf):
            with pytest.raises(ValidationError):
                coincidence_stats(ens, delta)
