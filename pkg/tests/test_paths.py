import numpy as np
import pytest

from atlaslab import (
    PathEnsemble,
    RngSpec,
    ValidationError,
    brownian_ensemble,
    build_grid,
    coarsen_increments,
    gaussian_increments,
)


class TestBuildGrid:
    def test_points_quarter_grid(self):
        grid = build_grid(1.0, 4)
        assert np.array_equal(grid.points(), [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_step_size(self):
        assert build_grid(2.0, 2).h == 1.0

    def test_endpoint_exact(self):
        grid = build_grid(0.1, 3)
        assert grid.points()[-1] == 0.1
        assert grid.points()[0] == 0.0

    @pytest.mark.parametrize("T,M", [(1.0, 0), (1.0, 1), (0.0, 4), (-1.0, 4), (np.nan, 4)])
    def test_rejects_bad_arguments(self, T, M):
        with pytest.raises(ValidationError):
            build_grid(T, M)

    def test_refine_stride(self):
        grid = build_grid(1.0, 64)
        assert grid.refine_stride(16) == 4
        with pytest.raises(ValidationError):
            grid.refine_stride(48)


class TestGaussianIncrements:
    def test_reproducible(self):
        grid = build_grid(1.0, 128)
        a = gaussian_increments(RngSpec(7), grid, 3, 5)
        b = gaussian_increments(RngSpec(7), grid, 3, 5)
        assert np.array_equal(a, b)

    def test_thread_count_does_not_change_output(self):
        grid = build_grid(1.0, 64)
        a = gaussian_increments(RngSpec(7), grid, 2, 9)
        b = gaussian_increments(RngSpec(7), grid, 2, 9, threads=4)
        assert np.array_equal(a, b)

    def test_substreams_distinct(self):
        grid = build_grid(1.0, 32)
        dW = gaussian_increments(RngSpec(0), grid, 2, 2)
        flat = dW.reshape(4, -1)
        for i in range(4):
            for j in range(i + 1, 4):
                assert not np.array_equal(flat[i], flat[j])

    def test_mean_within_clt_band(self):
        # Sample mean of N = P*n*M variates with variance h: SE = sqrt(h/N).
        grid = build_grid(1.0, 1000)
        dW = gaussian_increments(RngSpec(11), grid, 10, 1000)
        se = np.sqrt(grid.h / dW.size)
        assert abs(dW.mean()) < 5 * se

    def test_variance_within_chisq_band(self):
        grid = build_grid(1.0, 1000)
        dW = gaussian_increments(RngSpec(11), grid, 10, 1000)
        rel_se = np.sqrt(2.0 / (dW.size - 1))
        assert abs(dW.var(ddof=1) / grid.h - 1.0) < 5 * rel_se

    def test_quadratic_variation_near_horizon(self):
        grid = build_grid(1.0, 2**10)
        dW = gaussian_increments(RngSpec(3), grid, 1, 256)
        qv = (dW**2).sum(axis=-1).ravel()
        se = qv.std(ddof=1) / np.sqrt(qv.size)
        assert abs(qv.mean() - grid.T) < 5 * se

    def test_rejects_bad_counts(self):
        grid = build_grid(1.0, 8)
        with pytest.raises(ValidationError):
            gaussian_increments(RngSpec(0), grid, 0, 1)
        with pytest.raises(ValidationError):
            gaussian_increments(RngSpec(0), grid, 1, 0)
        with pytest.raises(ValidationError):
            gaussian_increments(RngSpec(0), grid, 1, 1, threads=0)

    def test_master_seed_must_be_integral(self):
        with pytest.raises(ValidationError):
            RngSpec(1.5)


class TestCoarsenIncrements:
    def test_factor_one_is_identity(self):
        dW = gaussian_increments(RngSpec(5), build_grid(1.0, 16), 2, 3)
        assert np.array_equal(coarsen_increments(dW, 1), dW)

    def test_block_sums(self):
        dW = np.arange(12.0).reshape(1, 1, 12)
        coarse = coarsen_increments(dW, 3)
        assert np.array_equal(coarse, [[[3.0, 12.0, 21.0, 30.0]]])

    def test_shared_grid_points_match(self):
        grid = build_grid(1.0, 256)
        dW = gaussian_increments(RngSpec(9), grid, 2, 4)
        fine = brownian_ensemble(dW, grid)
        coarse = brownian_ensemble(coarsen_increments(dW, 8), build_grid(1.0, 32))
        np.testing.assert_allclose(
            coarse.values, fine.values[:, :, ::8], rtol=0, atol=1e-12
        )

    def test_coarse_variance(self):
        grid = build_grid(1.0, 512)
        dW = gaussian_increments(RngSpec(13), grid, 4, 128)
        coarse = coarsen_increments(dW, 8)
        target = 8 * grid.h
        rel_se = np.sqrt(2.0 / (coarse.size - 1))
        assert abs(coarse.var(ddof=1) / target - 1.0) < 5 * rel_se

    def test_rejects_non_divisor(self):
        dW = np.zeros((1, 1, 10))
        with pytest.raises(ValidationError):
            coarsen_increments(dW, 3)
        with pytest.raises(ValidationError):
            coarsen_increments(dW, 0)


class TestPathEnsemble:
    def test_shape_validation(self):
        grid = build_grid(1.0, 4)
        with pytest.raises(ValidationError):
            PathEnsemble(values=np.zeros((2, 3, 4)), grid=grid)  # needs M+1 = 5
        with pytest.raises(ValidationError):
            PathEnsemble(values=np.zeros((2, 5)), grid=grid)

    def test_rejects_non_finite(self):
        grid = build_grid(1.0, 4)
        values = np.zeros((1, 1, 5))
        values[0, 0, 2] = np.nan
        with pytest.raises(ValidationError):
            PathEnsemble(values=values, grid=grid)

    def test_subsample_is_exact_restriction(self):
        grid = build_grid(1.0, 64)
        dW = gaussian_increments(RngSpec(2), grid, 2, 3)
        ens = brownian_ensemble(dW, grid)
        sub = ens.subsample(16)
        assert sub.grid.M == 16
        assert np.array_equal(sub.values, ens.values[:, :, ::4])

    def test_brownian_initial_values(self):
        grid = build_grid(1.0, 8)
        dW = gaussian_increments(RngSpec(2), grid, 2, 3)
        ens = brownian_ensemble(dW, grid, sigma=0.5, initial=np.array([1.0, -2.0]))
        assert np.array_equal(ens.values[:, 0, 0], np.ones(3))
        assert np.array_equal(ens.values[:, 1, 0], -2.0 * np.ones(3))
        np.testing.assert_allclose(
            ens.values[:, :, -1],
            ens.values[:, :, 0] + 0.5 * dW.sum(axis=-1),
            atol=1e-12,
        )
