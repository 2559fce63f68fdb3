"""Metrics, alignment, spark and perturbation diagnostics, checked against
hand computations and an independent Gram-eigenvalue subset oracle."""

import itertools

import numpy as np
import pytest

from sofar.metrics_theory import (
    align_layers,
    evaluate,
    perturbation_check,
    rate_diagnostic,
    robust_spark_bruteforce,
    support_metrics,
    theory_report,
)
from sofar.simgen import GroundTruth, ModelSpec, gen_model
from sofar.solver import SofarFit


def fit_from_factors(u, d, v) -> SofarFit:
    return SofarFit(
        u=np.asarray(u, dtype=float),
        d=np.asarray(d, dtype=float),
        v=np.asarray(v, dtype=float),
        objective_trace=np.zeros(0),
        primal_residuals=(0.0, 0.0),
        outer_iterations=0,
        converged=True,
    )


def truth_from_factors(u, d, v) -> GroundTruth:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    d = np.asarray(d, dtype=float)
    return GroundTruth(
        c_star=(u * d) @ v.T, u_star=u, v_star=v, d_star=d, sigma2=1.0, r=d.shape[0]
    )


def planted(seed=0, p=6, q=5, r=2):
    rng = np.random.default_rng(seed)
    u = np.linalg.qr(rng.normal(size=(p, r)))[0]
    v = np.linalg.qr(rng.normal(size=(q, r)))[0]
    d = np.array([3.0, 1.5][:r])
    return u, d, v


class TestEvaluate:
    def test_exact_recovery_zeros(self):
        u, d, v = planted()
        truth = truth_from_factors(u, d, v)
        f = fit_from_factors(u, d, v)
        x = np.random.default_rng(1).normal(size=(20, 6))
        rec = evaluate(f, truth, x)
        assert rec.mse_est == 0.0
        assert rec.mse_pred == 0.0
        assert rec.fpr_pct == 0.0 and rec.fnr_pct == 0.0
        assert rec.rank_correct and rec.rank_hat == 2
        assert rec.orth == pytest.approx(0.0, abs=1e-10)

    def test_orth_formula_known_value(self):
        # one off-diagonal pair of 0.01 in U'U and exact V adds 2.0
        u = np.array([[1.0, 0.01], [0.0, np.sqrt(1 - 0.01**2)]])
        v = np.eye(2)
        truth = truth_from_factors(np.eye(2), [2.0, 1.0], np.eye(2))
        f = fit_from_factors(u, [2.0, 1.0], v)
        rec = evaluate(f, truth, np.eye(2))
        # U'U = [[1, 0.01], [0.01, 1]]: absolute sum 2.02, V exact: 2.0
        assert rec.orth == pytest.approx(2.0, abs=1e-10)

    def test_mse_denominators(self):
        u, d, v = planted(2)
        truth = truth_from_factors(u, d, v)
        f = fit_from_factors(u, d * 1.1, v)
        rng = np.random.default_rng(3)
        x = rng.normal(size=(17, 6))
        rec = evaluate(f, truth, x)
        diff = f.c - truth.c_star
        assert rec.mse_est == pytest.approx(np.sum(diff**2) / (6 * 5))
        assert rec.mse_pred == pytest.approx(np.sum((x @ diff) ** 2) / (17 * 5))

    def test_overestimated_rank_counts_false_positives(self):
        u, d, v = planted(4)
        truth = truth_from_factors(u[:, :1], d[:1], v[:, :1])
        f = fit_from_factors(u, d, v)
        rec = evaluate(f, truth, np.eye(6))
        assert rec.rank_hat == 2 and not rec.rank_correct
        assert rec.fpr_pct > 0.0

    def test_zero_rank_fit(self):
        u, d, v = planted(5)
        truth = truth_from_factors(u, d, v)
        f = fit_from_factors(np.zeros((6, 0)), np.zeros(0), np.zeros((5, 0)))
        rec = evaluate(f, truth, np.eye(6))
        assert rec.rank_hat == 0 and rec.fnr_pct == 100.0 and rec.orth == 0.0


class TestAlignLayers:
    def test_sign_flip_applied_jointly(self):
        u, d, v = planted(6)
        truth = truth_from_factors(u, d, v)
        f = fit_from_factors(-u, d, -v)  # same matrix c, flipped signs
        (u_hat, _, v_hat), (u_star, _, v_star) = align_layers(f, truth)
        assert np.allclose(u_hat, u_star, atol=1e-12)
        assert np.allclose(v_hat, v_star, atol=1e-12)

    def test_zero_padding_to_common_width(self):
        u, d, v = planted(7)
        truth = truth_from_factors(u, d, v)
        f = fit_from_factors(u[:, :1], d[:1], v[:, :1])
        (u_hat, d_hat, v_hat), (u_star, d_star, _) = align_layers(f, truth)
        assert u_hat.shape == u_star.shape == (6, 2)
        assert d_hat[1] == 0.0 and d_star[1] == 1.5


class TestSupportMetrics:
    def test_counts(self):
        est = np.array([1.0, 0.0, 1e-12, 0.5])
        true = np.array([1.0, 0.0, 1.0, 0.0])
        fpr, fnr = support_metrics(est, true)
        assert fpr == pytest.approx(100.0 * 1 / 2)  # one false positive of two true zeros
        assert fnr == pytest.approx(100.0 * 1 / 2)  # one miss of two true nonzeros


class TestTheoryReport:
    def test_hand_computed_quantities(self):
        u = np.eye(4)[:, :2]
        v = np.eye(3)[:, :2]
        d = np.array([2.0, 1.0])
        truth = truth_from_factors(u, d, v)
        rep = theory_report(truth, n=100, p=4, q=3)
        assert rep.s == 2 and rep.s_a == 2 and rep.s_b == 2 and rep.r == 2
        assert rep.delta == pytest.approx((1 - 1 / 4) ** 2)
        assert rep.eta_n == pytest.approx(1 + np.sqrt(1 + 4) / np.sqrt(rep.delta))
        assert rep.r_n == pytest.approx(np.sqrt(2 * np.log(12) / 100))
        assert rep.tau == pytest.approx(1.0)

    def test_model1_counts(self):
        _, _, truth = gen_model(ModelSpec.standard(1), seed=0)
        rep = theory_report(truth, 200, 100, 40)
        assert rep.s_a == 12 and rep.s_b == 15 and rep.r == 3
        assert rep.s == int(np.count_nonzero(truth.c_star))


class TestRobustSpark:
    def oracle(self, x, c, k_max):
        """Independent enumeration using Gram eigenvalues instead of the SVD."""
        n, p = x.shape
        xs = x / np.sqrt(n)
        for k in range(1, min(k_max, p) + 1):
            for cols in itertools.combinations(range(p), k):
                sub = xs[:, cols]
                smin = np.sqrt(max(np.min(np.linalg.eigvalsh(sub.T @ sub)), 0.0))
                if smin < c:
                    return k
        return None

    def test_identity_design_has_no_small_subset(self):
        n = 9
        x = np.sqrt(n) * np.vstack([np.eye(3)] * 3)[:n]
        # scaled columns are orthonormal; no subset has singular value < 0.5
        assert robust_spark_bruteforce(np.sqrt(n) * np.eye(3), 0.5, 3) is None

    def test_duplicate_columns_give_two(self):
        rng = np.random.default_rng(8)
        col = rng.normal(size=(10, 1))
        x = np.hstack([col, col, rng.normal(size=(10, 2))])
        assert robust_spark_bruteforce(x, 0.1, 4) == 2

    def test_matches_gram_oracle_many_instances(self):
        rng = np.random.default_rng(9)
        for i in range(110):
            n = int(rng.integers(4, 12))
            p = int(rng.integers(2, 7))
            x = rng.normal(size=(n, p))
            c = float(rng.uniform(0.1, 1.5))
            assert robust_spark_bruteforce(x, c, p) == self.oracle(x, c, p), f"instance {i}"

    def test_guard_and_validation(self):
        with pytest.raises(ValueError):
            robust_spark_bruteforce(np.ones((5, 21)), 0.5, 13)
        with pytest.raises(ValueError):
            robust_spark_bruteforce(np.ones((5, 3)), 0.0, 2)


class TestPerturbation:
    def test_zero_perturbation(self):
        rng = np.random.default_rng(10)
        c = rng.normal(size=(5, 4))
        rec = perturbation_check([c], [np.zeros((5, 4))])[0]
        assert rec.dc == 0.0 and rec.dd == 0.0 and rec.mirsky_holds

    def test_mirsky_holds_on_random_pairs(self):
        rng = np.random.default_rng(11)
        stars, deltas = [], []
        for _ in range(100):
            c = rng.normal(size=(6, 4))
            d1 = np.linalg.svd(c, compute_uv=False)[0]
            delta = rng.normal(size=(6, 4))
            delta *= 0.9 * d1 / np.linalg.svd(delta, compute_uv=False)[0]
            stars.append(c)
            deltas.append(delta)
        recs = perturbation_check(stars, deltas)
        assert all(r.mirsky_holds for r in recs)
        for r in recs:
            assert r.dd <= r.dc + 1e-10

    def test_hypothesis_filter_rejects_large_perturbations(self):
        rng = np.random.default_rng(12)
        c = rng.normal(size=(4, 4))
        d1 = np.linalg.svd(c, compute_uv=False)[0]
        delta = rng.normal(size=(4, 4))
        delta *= 3.0 * d1 / np.linalg.svd(delta, compute_uv=False)[0]
        with pytest.raises(ValueError):
            perturbation_check([c], [delta])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            perturbation_check([np.eye(2)], [])


class TestRateDiagnostic:
    def test_smoke_single_point(self):
        spec = ModelSpec.standard(1, p=30, q=16)
        rows = rate_diagnostic(spec, [120], reps=1, seed=0, m=3, grid_size=4, n_valid=100)
        assert len(rows) == 1
        row = rows[0]
        assert row["n"] == 120
        assert row["median_init_err"] > 0 and row["median_sofar_err"] > 0
        assert row["theory_init_scale"] > 0 and row["theory_sofar_scale"] > 0
