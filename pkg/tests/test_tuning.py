"""Penalty-ray tuning: null bounds really null the model, the grid has the
documented shape, and each selection criterion matches a hand computation."""

import numpy as np
import pytest

from sofar.penalty import Penalty, PenaltyKind
from sofar.solver import SofarConfig, fit
from sofar.tuning import Criterion, TuningResult, marginal_null_bounds, search


def small_problem(seed=0, n=30, p=6, q=4, rank=2):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, p))
    u = np.linalg.qr(rng.normal(size=(p, rank)))[0]
    v = np.linalg.qr(rng.normal(size=(q, rank)))[0]
    c = (u * np.array([3.0, 1.5][:rank])) @ v.T
    y = x @ c + 0.1 * rng.normal(size=(n, q))
    return x, y, c


class TestNullBounds:
    def test_nuclear_bound_nulls_the_model(self):
        # the nuclear-penalty bound is a genuine global null threshold: any
        # heavier penalty collapses the whole fit, anything well below keeps it
        x, y, _ = small_problem()
        pa = Penalty(PenaltyKind.ENTRYWISE_L1)
        ld, _, _ = marginal_null_bounds(x, y, pa, pa)
        assert fit(x, y, 2, SofarConfig(lambda_d=1.001 * ld), seed=0).rank == 0
        assert fit(x, y, 2, SofarConfig(lambda_d=0.01 * ld), seed=0).rank > 0

    def test_diag_cross_example(self):
        # X'Y = diag(3, 1): nuclear bound 3, entrywise bound 3
        x = np.eye(2)
        y = np.diag([3.0, 1.0])
        pa = Penalty(PenaltyKind.ENTRYWISE_L1)
        ld, la, lb = marginal_null_bounds(x, y, pa, pa)
        assert ld == pytest.approx(3.0)
        assert la == pytest.approx(3.0)
        assert lb == pytest.approx(3.0)

    def test_values_match_direct_formulas(self):
        x, y, _ = small_problem(1)
        cross = x.T @ y
        pa = Penalty(PenaltyKind.ENTRYWISE_L1)
        pb = Penalty(PenaltyKind.ROWWISE_GROUP)
        ld, la, lb = marginal_null_bounds(x, y, pa, pb)
        assert ld == pytest.approx(np.linalg.svd(cross, compute_uv=False)[0], rel=1e-8)
        assert la == pytest.approx(np.max(np.abs(cross)))
        assert lb == pytest.approx(np.max(np.linalg.norm(cross.T, axis=1)))

    def test_adaptive_weights_scale_by_min_weight(self):
        x, y, _ = small_problem(2)
        cross = x.T @ y
        w = np.full(cross.shape, 4.0)
        pa = Penalty(PenaltyKind.ENTRYWISE_L1, w)
        pb = Penalty(PenaltyKind.ENTRYWISE_L1)
        wd = np.array([2.0, 8.0])
        ld, la, _ = marginal_null_bounds(x, y, pa, pb, weights_d=wd)
        assert ld == pytest.approx(np.linalg.svd(cross, compute_uv=False)[0] / 2.0, rel=1e-8)
        assert la == pytest.approx(np.max(np.abs(cross)) / 4.0)

    def test_zero_data_warns(self):
        pa = Penalty(PenaltyKind.ENTRYWISE_L1)
        assert marginal_null_bounds(np.ones((4, 2)), np.zeros((4, 3)), pa, pa) == (0.0, 0.0, 0.0)


class TestSearch:
    def test_grid_geometry_and_ratios(self):
        x, y, _ = small_problem(3)
        res = search(x, y, 2, SofarConfig(), grid_size=5, epsilon=1e-2)
        assert len(res.grid) == 5 and len(res.scores) == 5
        ld0, la0, lb0 = res.grid[0]
        ts = np.geomspace(1.0, 1e-2, 5)
        for (ld, la, lb), t in zip(res.grid, ts):
            assert ld == pytest.approx(t * ld0)
            assert la == pytest.approx(t * la0)
            assert lb == pytest.approx(t * lb0)

    def test_ratio_mask_zeroes_rays(self):
        x, y, _ = small_problem(4)
        res = search(x, y, 2, SofarConfig(), grid_size=3, ratios=(0.0, 1.0, 0.0))
        for ld, la, lb in res.grid:
            assert ld == 0.0 and lb == 0.0 and la > 0

    def test_validation_criterion_matches_manual_score(self):
        x, y, _ = small_problem(5)
        xv, yv = small_problem(6)[:2]
        res = search(
            x, y, 2, SofarConfig(), grid_size=4,
            criterion=Criterion.VALIDATION,
            criterion_data={"x_valid": xv, "y_valid": yv},
        )
        f = res.best_fit
        manual = float(np.sum((yv - xv @ f.c) ** 2)) / yv.size
        assert res.scores[res.best_index] == pytest.approx(manual, rel=1e-12)
        assert res.best_index == int(np.argmin(res.scores))

    def test_gic_matches_manual_formula(self):
        x, y, _ = small_problem(7)
        n, q = y.shape
        p = x.shape[1]
        res = search(x, y, 2, SofarConfig(), grid_size=4, criterion=Criterion.GIC)
        f = res.best_fit
        resid = y - x @ f.c
        mse = float(np.sum(resid**2)) / (n * q)
        df = np.count_nonzero(f.d) + np.count_nonzero(f.a) + np.count_nonzero(f.b)
        manual = np.log(mse) + np.log(np.log(n)) * np.log(p * q) * df / (n * q)
        assert res.scores[res.best_index] == pytest.approx(manual, rel=1e-10)

    def test_cv_criterion_runs_and_is_deterministic(self):
        x, y, _ = small_problem(8)
        res1 = search(x, y, 2, SofarConfig(), grid_size=3, criterion=Criterion.KFOLD_CV, seed=4)
        res2 = search(x, y, 2, SofarConfig(), grid_size=3, criterion=Criterion.KFOLD_CV, seed=4)
        assert res1.scores == res2.scores
        assert res1.best_index == res2.best_index

    def test_ties_break_toward_heavier_penalty(self):
        # all-zero responses give identical (zero-fit) scores on every grid
        # point, so the first (largest-penalty) candidate must win
        x = np.ones((10, 3)) + np.diag(np.ones(3))[np.tile(np.arange(3), 4)[:10]]
        y = np.zeros((10, 2))
        res = search(x, y, 2, SofarConfig(), grid_size=4, criterion=Criterion.GIC)
        assert res.null_data_warning
        assert res.best_index == 0

    def test_validation_requires_data(self):
        x, y, _ = small_problem(9)
        with pytest.raises(ValueError):
            search(x, y, 2, SofarConfig(), criterion=Criterion.VALIDATION)

    def test_grid_and_epsilon_validation(self):
        x, y, _ = small_problem(10)
        with pytest.raises(ValueError):
            search(x, y, 2, SofarConfig(), grid_size=1)
        with pytest.raises(ValueError):
            search(x, y, 2, SofarConfig(), epsilon=1.5)

    def test_telemetry_accumulates(self):
        x, y, _ = small_problem(11)
        res = search(x, y, 2, SofarConfig(), grid_size=3)
        assert isinstance(res, TuningResult)
        assert res.total_monotone_violations == 0
        assert res.max_orth_dev <= 1e-8
