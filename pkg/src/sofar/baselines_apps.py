"""Classical comparison estimators and the identity-design application
wrappers: biclustering, two sparse PCA variants, sparse factor analysis and
the two-step sparse VAR reduction."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .lasso_init import initialize
from .linalg import check_matrix, min_norm_least_squares, thin_svd
from .solver import SofarConfig, SofarFit, fit

__all__ = [
    "AppResult",
    "rrr_fit",
    "bicluster",
    "sparse_pca_regression",
    "sparse_pca_approx",
    "sparse_factor_analysis",
    "sparse_var",
]


@dataclass
class AppResult:
    fit: SofarFit
    derived: dict


def rrr_fit(x, y, m: int, c_ols: np.ndarray | None = None) -> np.ndarray:
    """Reduced-rank regression by projecting the least-squares fitted values.

    C_rrr = C_ols Vm Vm' with Vm the top-m right singular vectors of X C_ols.
    m = 0 yields the zero matrix; m = min(p, q) recovers the OLS fit.
    """
    xm = check_matrix(x, "x")
    ym = check_matrix(y, "y")
    if m < 0 or m > min(xm.shape[1], ym.shape[1]):
        raise ValueError("rank out of range")
    if c_ols is None:
        c_ols = min_norm_least_squares(xm, ym)
    if m == 0:
        return np.zeros_like(c_ols)
    fitted = xm @ c_ols
    vm = thin_svd(fitted).v[:, :m]
    return c_ols @ (vm @ vm.T)


def _identity_fit(data: np.ndarray, m: int, config: SofarConfig, seed: int) -> SofarFit:
    x = np.eye(data.shape[0])
    init = initialize(x, data, m, seed=seed)
    return fit(x, data, m, config, init=init)


def bicluster(x_data, m: int, config: SofarConfig, seed: int = 0) -> AppResult:
    """Simultaneous row/column clustering via the sparse SVD of the mean matrix.

    Identity-design fit of the data matrix itself; the supports of the left
    and right singular vectors indicate row and column cluster membership.
    """
    data = check_matrix(x_data, "x_data")
    f = _identity_fit(data, m, config, seed)
    derived = {
        "row_clusters": [np.flatnonzero(np.abs(f.u[:, k]) > 1e-8) for k in range(f.rank)],
        "col_clusters": [np.flatnonzero(np.abs(f.v[:, k]) > 1e-8) for k in range(f.rank)],
    }
    return AppResult(fit=f, derived=derived)


def sparse_pca_regression(x_data, m: int, config: SofarConfig, seed: int = 0) -> AppResult:
    """Self-regression sparse PCA: loadings are the orthonormal columns of U."""
    data = check_matrix(x_data, "x_data")
    cfg = replace(config, lambda_b=0.0)
    init = initialize(data, data, m, seed=seed)
    f = fit(data, data, m, cfg, init=init)
    return AppResult(fit=f, derived={"loadings": f.u, "scores": data @ f.u})


def sparse_pca_approx(x_data, m: int, config: SofarConfig, seed: int = 0) -> AppResult:
    """Matrix-approximation sparse PCA: loadings are the orthonormal columns of V."""
    data = check_matrix(x_data, "x_data")
    cfg = replace(config, lambda_a=0.0)
    f = _identity_fit(data, m, cfg, seed)
    return AppResult(fit=f, derived={"loadings": f.v, "scores": data @ f.v})


def sparse_factor_analysis(x_series, m: int, config: SofarConfig, seed: int = 0) -> AppResult:
    """Sparse factors and loadings from the identity-design fit of a T x p panel.

    Factors F = sqrt(T) U satisfy F'F/T = I; loadings L = V D / sqrt(T) so
    that F L' reproduces the fitted mean matrix.
    """
    data = check_matrix(x_series, "x_series")
    t_len = data.shape[0]
    f = _identity_fit(data, m, config, seed)
    factors = np.sqrt(t_len) * f.u
    loadings = f.b / np.sqrt(t_len)
    return AppResult(fit=f, derived={"factors": factors, "loadings": loadings})


def sparse_var(x_series, y_series, m: int, config: SofarConfig, seed: int = 0) -> AppResult:
    """Two-step estimation of the factor-augmented joint dynamics.

    Step 1 fits the lag-1 transition of the high-dimensional series x_t (the
    regression estimates C with x_t ~ x_{t-1} C, i.e. the VAR coefficient is
    C'), extracting factors f_t = U'x_t and g_t = V'x_t. Step 2 regresses
    y_t on (y_{t-1}, f_{t-1}) by least squares for the (A, B) blocks.
    """
    xs = check_matrix(x_series, "x_series")
    ys = check_matrix(y_series, "y_series")
    if xs.shape[0] < 3:
        raise ValueError("need at least 3 time points")
    if ys.shape[0] != xs.shape[0]:
        raise ValueError("x_series and y_series must cover the same time points")
    x_lag = xs[:-1]
    x_lead = xs[1:]
    init = initialize(x_lag, x_lead, m, seed=seed)
    f = fit(x_lag, x_lead, m, config, init=init)
    factors_f = xs @ f.u  # f_t for every t
    factors_g = xs @ f.v
    design = np.hstack([ys[:-1], factors_f[:-1]])
    coef = min_norm_least_squares(design, ys[1:])
    q = ys.shape[1]
    derived = {
        "a_block": coef[:q],  # y_t' = y_{t-1}' A + f_{t-1}' B + eps'
        "b_block": coef[q:],
        "d_hat": f.d,
        "factors_f": factors_f,
        "factors_g": factors_g,
    }
    return AppResult(fit=f, derived=derived)
