"""Evaluation metrics for simulation studies and theory-side diagnostics:
layer alignment, the standard error/selection measures, brute-force robust
spark, singular-value perturbation checks and convergence-rate summaries."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .linalg import check_matrix, thin_svd
from .simgen import GroundTruth, ModelSpec, gen_holdout, gen_model
from .solver import SofarFit

__all__ = [
    "MetricsRecord",
    "TheoryReport",
    "align_layers",
    "evaluate",
    "support_metrics",
    "theory_report",
    "robust_spark_bruteforce",
    "perturbation_check",
    "rate_diagnostic",
]

_NONZERO_TOL = 1e-8  # estimated entries below this count as zero


@dataclass
class MetricsRecord:
    mse_est: float
    mse_pred: float
    fpr_pct: float
    fnr_pct: float
    rank_hat: int
    rank_correct: bool
    orth: float


@dataclass
class TheoryReport:
    s: int
    s_a: int
    s_b: int
    r: int
    eta_n: float
    r_n: float
    tau: float
    delta: float


def align_layers(fit: SofarFit, truth: GroundTruth):
    """Zero-pad both factorizations to a common width and match signs.

    Layers are already ordered by descending singular value on both sides;
    the estimated column signs are flipped so each matched pair of right
    singular vectors has nonnegative inner product.
    """
    width = max(fit.rank, truth.r)
    p = fit.u.shape[0]
    q = fit.v.shape[0]
    u_hat = np.zeros((p, width))
    v_hat = np.zeros((q, width))
    d_hat = np.zeros(width)
    u_hat[:, : fit.rank] = fit.u
    v_hat[:, : fit.rank] = fit.v
    d_hat[: fit.rank] = fit.d
    u_star = np.zeros((p, width))
    v_star = np.zeros((q, width))
    d_star = np.zeros(width)
    u_star[:, : truth.r] = truth.u_star
    v_star[:, : truth.r] = truth.v_star
    d_star[: truth.r] = truth.d_star
    for k in range(width):
        if v_hat[:, k] @ v_star[:, k] < 0:
            v_hat[:, k] = -v_hat[:, k]
            u_hat[:, k] = -u_hat[:, k]
    return (u_hat, d_hat, v_hat), (u_star, d_star, v_star)


def support_metrics(est: np.ndarray, true: np.ndarray) -> tuple[float, float]:
    """FPR and FNR percentages for stacked support recovery."""
    est_nz = np.abs(est) > _NONZERO_TOL
    true_nz = true != 0
    fp = int(np.sum(est_nz & ~true_nz))
    tn = int(np.sum(~est_nz & ~true_nz))
    fn = int(np.sum(~est_nz & true_nz))
    tp = int(np.sum(est_nz & true_nz))
    fpr = 100.0 * fp / (tn + fp) if (tn + fp) else 0.0
    fnr = 100.0 * fn / (tp + fn) if (tp + fn) else 0.0
    return fpr, fnr


def evaluate(fit: SofarFit, truth: GroundTruth, x) -> MetricsRecord:
    """Estimation/prediction error, U-V support recovery and orthogonality."""
    xm = check_matrix(x, "x")
    p, q = truth.c_star.shape
    n = xm.shape[0]
    diff = fit.c - truth.c_star
    mse_est = float(np.sum(diff * diff)) / (p * q)
    xd = xm @ diff
    mse_pred = float(np.sum(xd * xd)) / (n * q)
    (u_hat, _, v_hat), (u_star, _, v_star) = align_layers(fit, truth)
    stacked_est = np.concatenate([u_hat.ravel(), v_hat.ravel()])
    stacked_true = np.concatenate([u_star.ravel(), v_star.ravel()])
    fpr, fnr = support_metrics(stacked_est, stacked_true)
    rank_hat = fit.rank
    if rank_hat:
        orth = 100.0 * (
            float(np.sum(np.abs(fit.u.T @ fit.u)))
            + float(np.sum(np.abs(fit.v.T @ fit.v)))
            - 2.0 * rank_hat
        )
    else:
        orth = 0.0
    return MetricsRecord(
        mse_est=mse_est,
        mse_pred=mse_pred,
        fpr_pct=fpr,
        fnr_pct=fnr,
        rank_hat=rank_hat,
        rank_correct=rank_hat == truth.r,
        orth=orth,
    )


def theory_report(truth: GroundTruth, n: int, p: int, q: int) -> TheoryReport:
    """Sparsity counts, identifiability factor and rate quantities of the truth."""
    a_star = truth.u_star * truth.d_star
    b_star = truth.v_star * truth.d_star
    s = int(np.count_nonzero(truth.c_star))
    s_a = int(np.count_nonzero(a_star))
    s_b = int(np.count_nonzero(b_star))
    r = int(truth.r)
    d = truth.d_star
    if r >= 2:
        gaps = 1.0 - (d[1:] ** 2) / (d[:-1] ** 2)
        delta = float(np.min(gaps)) ** 2 if np.min(gaps) > 0 else 0.0
    else:
        delta = 1.0
    ratio_sum = float(np.sum((d[0] / d) ** 2))
    eta_n = 1.0 + np.sqrt(ratio_sum) / np.sqrt(delta) if delta > 0 else float("inf")
    r_n = float(np.sqrt(s * np.log(p * q) / n))
    nz_mags = np.concatenate(
        [d, np.abs(a_star[a_star != 0]), np.abs(b_star[b_star != 0])]
    )
    tau = float(np.min(nz_mags[nz_mags != 0])) if np.any(nz_mags) else 0.0
    return TheoryReport(s=s, s_a=s_a, s_b=s_b, r=r, eta_n=float(eta_n), r_n=r_n, tau=tau, delta=delta)


def robust_spark_bruteforce(x, c: float, k_max: int):
    """Smallest column-subset size of n^{-1/2} X with a singular value below c.

    Exhaustive over subsets of size 1..min(k_max, p); returns None when no
    qualifying subset exists within the searched sizes. Guarded to p <= 20
    or k_max <= 12 to keep the enumeration tractable.
    """
    xm = check_matrix(x, "x")
    n, p = xm.shape
    if c <= 0:
        raise ValueError("c must be positive")
    if p > 20 and k_max > 12:
        raise ValueError("combinatorial guard: need p <= 20 or k_max <= 12")
    xs = xm / np.sqrt(n)
    for k in range(1, min(k_max, p) + 1):
        for cols in itertools.combinations(range(p), k):
            smin = np.linalg.svd(xs[:, cols], compute_uv=False)[-1]
            if smin < c:
                return k
    return None


@dataclass
class PerturbationRecord:
    dc: float
    dd: float
    mirsky_holds: bool
    ab_ratio: float  # (||dA|| + ||dB||) / (eta_n ||dC||); diagnostic only


def perturbation_check(c_star_matrices, perturbations) -> list[PerturbationRecord]:
    """Singular-value/factor perturbation diagnostics for C = C* + delta pairs.

    Pairs violating the hypothesis ||C - C*||_2 <= d1* are rejected.
    The singular-value inequality ||D - D*||_F <= ||C - C*||_F is asserted
    with slack 1e-10; the factor-error ratio is reported, not asserted,
    because its constant is unspecified.
    """
    out = []
    for c_star, delta in zip(c_star_matrices, perturbations, strict=True):
        sm = check_matrix(c_star, "c_star")
        dm = check_matrix(delta, "perturbation")
        cm = sm + dm
        if dm.shape != sm.shape:
            raise ValueError("perturbation shape must match c_star")
        fac = thin_svd(cm)
        fac_star = thin_svd(sm)
        d1 = fac_star.s[0]
        spec_norm = np.linalg.svd(cm - sm, compute_uv=False)[0] if np.any(cm != sm) else 0.0
        if spec_norm > d1:
            raise ValueError("hypothesis ||c - c_star||_2 <= d1* violated")
        dc = float(np.linalg.norm(cm - sm))
        dd = float(np.linalg.norm(fac.s - fac_star.s))
        holds = dd <= dc + 1e-10
        if not holds:
            raise AssertionError(f"singular-value perturbation bound failed: {dd} > {dc}")
        a = fac.u * fac.s
        b = fac.v * fac.s
        a_star = fac_star.u * fac_star.s
        b_star = fac_star.v * fac_star.s
        dab = float(np.linalg.norm(a - a_star) + np.linalg.norm(b - b_star))
        r_eff = int(np.sum(fac_star.s > 1e-12 * d1))
        d_nz = fac_star.s[:r_eff]
        if r_eff >= 2:
            gaps = 1.0 - (d_nz[1:] ** 2) / (d_nz[:-1] ** 2)
            delta = float(np.min(gaps)) ** 2 if np.min(gaps) > 0 else 0.0
        else:
            delta = 1.0
        eta = 1.0 + np.sqrt(np.sum((d_nz[0] / d_nz) ** 2) / delta) if delta > 0 else float("inf")
        ratio = dab / (eta * dc) if dc > 0 and np.isfinite(eta) else 0.0
        out.append(PerturbationRecord(dc=dc, dd=dd, mirsky_holds=holds, ab_ratio=ratio))
    return out


def rate_diagnostic(
    spec: ModelSpec,
    n_values,
    reps: int,
    seed: int,
    m: int = 5,
    grid_size: int = 15,
    n_valid: int = 400,
) -> list[dict]:
    """Median initializer and refined errors per sample size, with the
    theoretical scalings for side-by-side ratio checks."""
    from .bench import run_sofar_method

    rows = []
    for ni, n in enumerate(n_values):
        sp = ModelSpec(
            model_id=spec.model_id, n=int(n), p=spec.p, q=spec.q, r=spec.r, p0=spec.p0, q0=spec.q0
        )
        init_errs = []
        sofar_errs = []
        report = None
        for rep in range(reps):
            stream = 1000 * ni + rep
            x, y, truth = gen_model(sp, seed, stream)
            xv, yv = gen_holdout(sp, truth, n_valid, seed, 500_000 + stream)
            res = run_sofar_method(
                x, y, xv, yv, m=m, method="sofar-l", grid_size=grid_size, seed=seed
            )
            init_errs.append(float(np.linalg.norm(res["c_tilde"] - truth.c_star)))
            sofar_errs.append(float(np.linalg.norm(res["fit"].c - truth.c_star)))
            report = theory_report(truth, sp.n, sp.p, sp.q)
        theo_init = np.sqrt(report.s * np.log(sp.p * sp.q) / sp.n)
        theo_sofar = np.sqrt(
            (report.r + report.s_a + report.s_b) * report.eta_n**2 * np.log(sp.p * sp.q) / sp.n
        )
        rows.append(
            {
                "n": int(n),
                "median_init_err": float(np.median(init_errs)),
                "median_sofar_err": float(np.median(sofar_errs)),
                "theory_init_scale": float(theo_init),
                "theory_sofar_scale": float(theo_sofar),
                "init_ratio": float(np.median(init_errs) / theo_init),
                "sofar_ratio": float(np.median(sofar_errs) / theo_sofar),
            }
        )
    return rows
