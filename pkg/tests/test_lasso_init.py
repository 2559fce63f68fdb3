"""Coordinate-descent initializer checked by KKT certificates and, for two
predictors, an independent two-stage grid search over the coefficient plane."""

import numpy as np
import pytest

from sofar.lasso_init import (
    cross_validate_lambda0,
    initialize,
    kkt_residual,
    lasso_column,
    lasso_matrix,
)
from sofar.linalg import thin_svd


def grid_oracle_two_predictors(x, y, lam, span=3.0):
    """Independent p=2 solver: coarse grid then local refinement to ~2e-4.

    The solver standardizes columns to squared norm n, so in original
    coordinates the penalty on b_j is lam * |b_j| * ||x_j|| / sqrt(n).
    """
    n = x.shape[0]
    col_norms = np.linalg.norm(x, axis=0) / np.sqrt(n)

    def objective(b):
        r = y - x @ b
        return 0.5 / n * float(r @ r) + lam * float(np.sum(col_norms * np.abs(b)))

    best = np.zeros(2)
    best_val = objective(best)
    step = span / 30
    center = np.zeros(2)
    for _ in range(4):  # three refinement stages after the coarse pass
        g = np.arange(-30, 31) * step
        for b0 in center[0] + g:
            for b1 in center[1] + g:
                cand = np.array([b0, b1])
                val = objective(cand)
                if val < best_val - 1e-14:
                    best_val = val
                    best = cand
        center = best
        step /= 15
    return best


class TestKktCertificate:
    def test_kkt_residual_small_many_instances(self):
        rng = np.random.default_rng(0)
        for i in range(110):
            n = int(rng.integers(5, 30))
            p = int(rng.integers(1, 15))
            x = rng.normal(size=(n, p))
            beta = rng.normal(size=p) * (rng.random(p) < 0.5)
            y = x @ beta + 0.1 * rng.normal(size=n)
            lam = float(rng.uniform(0.01, 0.5))
            coef = lasso_column(x, y, lam)
            assert kkt_residual(x, y, coef, lam) <= 1e-8, f"instance {i}"

    def test_lambda_above_max_gives_zero(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(20, 5))
        y = rng.normal(size=20)
        n = 20
        s = np.sqrt(n) / np.linalg.norm(x, axis=0)
        lam_max = float(np.max(np.abs((x * s).T @ y))) / n
        assert not np.any(lasso_column(x, y, lam_max * 1.0001))
        assert np.any(lasso_column(x, y, lam_max * 0.99))

    def test_zero_penalty_matches_least_squares(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(30, 4))
        y = rng.normal(size=30)
        coef = lasso_column(x, y, 0.0)
        oracle = np.linalg.lstsq(x, y, rcond=None)[0]
        assert np.allclose(coef, oracle, atol=1e-6)


class TestGridOracle:
    def test_two_predictor_solutions_match_grid_search(self):
        rng = np.random.default_rng(3)
        for i in range(12):
            n = int(rng.integers(10, 40))
            x = rng.normal(size=(n, 2))
            y = x @ rng.normal(size=2) + 0.2 * rng.normal(size=n)
            lam = float(rng.uniform(0.02, 0.4))
            coef = lasso_column(x, y, lam)
            oracle = grid_oracle_two_predictors(x, y, lam)
            assert np.max(np.abs(coef - oracle)) <= 2e-3, f"instance {i}"


class TestObjectiveTrace:
    def test_per_sweep_objective_nonincreasing(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            n, p = 25, 10
            x = rng.normal(size=(n, p))
            y = rng.normal(size=n)
            _, trace = lasso_column(x, y, 0.05, record_objective=True)
            assert np.all(np.diff(trace) <= 1e-10)


class TestMatrixAndInit:
    def test_matrix_equals_columnwise(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(25, 8))
        y = rng.normal(size=(25, 3))
        c = lasso_matrix(x, y, 0.1)
        for j in range(3):
            assert np.allclose(c[:, j], lasso_column(x, y[:, j], 0.1), atol=1e-12)

    def test_negative_lambda_rejected(self):
        with pytest.raises(ValueError):
            lasso_column(np.ones((3, 1)), np.ones(3), -0.1)
        with pytest.raises(ValueError):
            lasso_matrix(np.ones((3, 1)), np.ones((3, 1)), -0.1)

    def test_row_mismatch_rejected(self):
        with pytest.raises(ValueError):
            lasso_matrix(np.ones((3, 2)), np.ones((4, 1)), 0.1)

    def test_initialize_svd_consistency(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(40, 10))
        y = x @ rng.normal(size=(10, 6)) + 0.1 * rng.normal(size=(40, 6))
        st = initialize(x, y, 3, seed=0)
        assert not st.zero_fit
        fac = thin_svd(st.c_tilde)
        assert np.allclose(st.d0, fac.s[:3], atol=1e-10)
        assert np.allclose(st.u0.T @ st.u0, np.eye(3), atol=1e-10)
        assert np.allclose(st.v0.T @ st.v0, np.eye(3), atol=1e-10)
        assert kkt_residual(x, y, st.c_tilde, st.lambda0) <= 1e-8

    def test_initialize_zero_fit_flag(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(20, 4))
        y = rng.normal(size=(20, 3))
        st = initialize(x, y, 2, lambda0=1e9)
        assert st.zero_fit
        assert st.d0.size == 0 and not np.any(st.c_tilde)

    def test_initialize_rank_bounds(self):
        x = np.ones((5, 3))
        y = np.ones((5, 2))
        with pytest.raises(ValueError):
            initialize(x, y, 0)
        with pytest.raises(ValueError):
            initialize(x, y, 3)


class TestCrossValidation:
    def test_deterministic_and_in_grid(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(30, 6))
        y = x @ rng.normal(size=(6, 2)) + 0.3 * rng.normal(size=(30, 2))
        lam1 = cross_validate_lambda0(x, y, seed=3)
        lam2 = cross_validate_lambda0(x, y, seed=3)
        assert lam1 == lam2
        n = 30
        lam_max = float(np.max(np.abs(x.T @ y))) / n
        grid = np.geomspace(lam_max, 1e-3 * lam_max, 30)
        assert np.min(np.abs(grid - lam1)) <= 1e-12 * lam_max

    def test_zero_data_returns_zero(self):
        assert cross_validate_lambda0(np.ones((10, 2)), np.zeros((10, 2))) == 0.0

    def test_bad_folds_rejected(self):
        with pytest.raises(ValueError):
            cross_validate_lambda0(np.ones((4, 2)), np.ones((4, 1)), k_folds=5)
