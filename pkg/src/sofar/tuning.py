"""One-dimensional tuning along the ray from the marginal null bounds.

The three penalty levels that each, alone, produce the null model define an
upper corner (ld*, la*, lb*); candidate triples are t * corner for t on a
log-spaced grid in [epsilon, 1]. Candidates are scored by held-out
validation error, K-fold cross-validation, or a generalized information
criterion.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .lasso_init import InitState, initialize
from .linalg import check_matrix, top_eigenvalue_sym
from .penalty import Penalty
from .solver import SofarConfig, SofarFit, fit

__all__ = ["Criterion", "TuningResult", "marginal_null_bounds", "search"]


class Criterion(Enum):
    VALIDATION = "valid"
    KFOLD_CV = "cv"
    GIC = "gic"


@dataclass
class TuningResult:
    grid: list[tuple[float, float, float]]
    scores: list[float]
    best_index: int
    best_fit: SofarFit
    criterion: Criterion
    null_data_warning: bool = False
    total_monotone_violations: int = 0  # summed over every grid-point fit
    max_orth_dev: float = 0.0  # worst orthogonality drift over the grid


def marginal_null_bounds(
    x,
    y,
    penalty_a: Penalty,
    penalty_b: Penalty,
    weights_d: np.ndarray | None = None,
) -> tuple[float, float, float]:
    """Smallest penalty levels at which each marginal problem goes null.

    ld* is the top singular value of X'Y (scaled by the smallest adaptive
    nuclear weight when present); la*, lb* come from the penalties' own
    null thresholds at the zero-solution gradients X'Y and Y'X.
    """
    xm = check_matrix(x, "x")
    ym = check_matrix(y, "y")
    cross = xm.T @ ym
    if not np.any(cross):
        return 0.0, 0.0, 0.0
    gram_small = cross.T @ cross if cross.shape[0] >= cross.shape[1] else cross @ cross.T
    sigma1 = float(np.sqrt(top_eigenvalue_sym(gram_small)))
    ld = sigma1 if weights_d is None else sigma1 / float(np.min(weights_d))
    la = _null_bound(penalty_a, cross)
    lb = _null_bound(penalty_b, cross.T)
    return ld, la, lb


def _null_bound(pen: Penalty, grad: np.ndarray) -> float:
    """Null threshold of the penalty at gradient grad; adaptive weights have
    factor-dependent shape, so they enter only through their smallest value."""
    base, _ = Penalty(pen.kind).null_threshold(grad)
    if pen.weights is None or pen.weights.size == 0:
        return base
    return base / float(np.min(pen.weights))


def _gic_score(x, y, f: SofarFit) -> float:
    n, q = y.shape
    p = x.shape[1]
    resid = y - x @ f.c
    mse = float(np.sum(resid * resid)) / (n * q)
    if mse <= 0:
        mse = np.finfo(float).tiny
    df = int(np.count_nonzero(f.d)) + int(np.count_nonzero(f.a)) + int(np.count_nonzero(f.b))
    return float(np.log(mse) + np.log(np.log(n)) * np.log(p * q) * df / (n * q))


def _validation_score(x_val, y_val, f: SofarFit) -> float:
    resid = y_val - x_val @ f.c
    return float(np.sum(resid * resid)) / (y_val.shape[0] * y_val.shape[1])


def search(
    x,
    y,
    m: int,
    base_config: SofarConfig,
    grid_size: int = 30,
    epsilon: float = 1e-3,
    criterion: Criterion = Criterion.GIC,
    criterion_data: dict | None = None,
    seed: int = 0,
    init: InitState | None = None,
    ratios: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> TuningResult:
    """Fit along the null-bound ray and keep the best-scoring triple.

    Each grid point is fitted from the same Lasso-SVD initialization. Ties
    break toward larger t (heavier penalty), which comes first on the grid.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    xm = check_matrix(x, "x")
    ym = check_matrix(y, "y")
    criterion_data = criterion_data or {}
    if criterion is Criterion.VALIDATION:
        if "x_valid" not in criterion_data or "y_valid" not in criterion_data:
            raise ValueError("validation criterion requires x_valid and y_valid")
        xv = check_matrix(criterion_data["x_valid"], "x_valid")
        yv = check_matrix(criterion_data["y_valid"], "y_valid")

    if init is None:
        init = initialize(xm, ym, m, seed=seed)
    ld_s, la_s, lb_s = marginal_null_bounds(
        xm, ym, base_config.penalty_a, base_config.penalty_b, base_config.weights_d
    )
    null_warn = max(ld_s, la_s, lb_s) == 0.0
    ts = np.geomspace(1.0, epsilon, grid_size)
    grid = [(float(t * ld_s * ratios[0]), float(t * la_s * ratios[1]), float(t * lb_s * ratios[2])) for t in ts]

    scores: list[float] = []
    best_index = -1
    best_fit: SofarFit | None = None
    total_viol = 0
    max_orth = 0.0
    for i, (ld, la, lb) in enumerate(grid):
        cfg = replace(base_config, lambda_d=ld, lambda_a=la, lambda_b=lb)
        f = fit(xm, ym, m, cfg, init=init)
        total_viol += f.monotone_violations
        max_orth = max(max_orth, f.max_orth_dev)
        if criterion is Criterion.VALIDATION:
            score = _validation_score(xv, yv, f)
        elif criterion is Criterion.GIC:
            score = _gic_score(xm, ym, f)
        else:
            score = _cv_score(xm, ym, m, cfg, criterion_data, seed)
        scores.append(score)
        if best_fit is None or score < scores[best_index]:
            best_index = i
            best_fit = f
    return TuningResult(
        grid=grid,
        scores=scores,
        best_index=best_index,
        best_fit=best_fit,
        criterion=criterion,
        null_data_warning=null_warn,
        total_monotone_violations=total_viol,
        max_orth_dev=max_orth,
    )


def _cv_score(x, y, m, cfg: SofarConfig, criterion_data: dict, seed: int) -> float:
    from .lasso_init import _fold_indices
    from .simgen import rng_stream

    k_folds = int(criterion_data.get("k_folds", 5))
    n = x.shape[0]
    if k_folds < 2 or n < k_folds:
        raise ValueError("need k_folds >= 2 and n >= k_folds")
    rng = rng_stream(seed, 1)
    folds = _fold_indices(n, k_folds, rng)
    total = 0.0
    for fold in folds:
        mask = np.ones(n, dtype=bool)
        mask[fold] = False
        xt, yt = x[mask], y[mask]
        try:
            f = fit(xt, yt, min(m, min(xt.shape[1], yt.shape[1])), cfg, seed=seed)
        except ValueError:
            return float("inf")
        total += _validation_score(x[fold], y[fold], f)
    return total / len(folds)
