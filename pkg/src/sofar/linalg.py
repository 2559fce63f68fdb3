"""Dense matrix decompositions used by every solver block.

All routines operate on 2-D float64 numpy arrays and are pure: inputs are
never modified, so results can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ThinSvd",
    "check_matrix",
    "thin_svd",
    "polar_orthogonal_factor",
    "top_eigenvalue_sym",
    "min_norm_least_squares",
]

_JACOBI_TOL = 1e-14
_JACOBI_MAX_SWEEPS = 100


def check_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validate and return a finite 2-D float64 array with positive dimensions."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={a.ndim}")
    if a.shape[0] == 0 or a.shape[1] == 0:
        raise ValueError(f"{name} has a zero dimension: shape={a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


@dataclass(frozen=True)
class ThinSvd:
    """Thin SVD factors: u (m x k) and v (n x k) orthonormal, s nonincreasing."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.v.T


def _round_robin_pairs(m: int):
    """Disjoint column-pair schedule (circle method), m-1 rounds covering all pairs."""
    ids = list(range(m)) + ([m] if m % 2 else [])  # m is a phantom slot when odd
    n = len(ids)
    rounds = []
    order = ids[1:]
    for _ in range(n - 1):
        lineup = [ids[0]] + order
        pairs = [
            (lineup[i], lineup[n - 1 - i])
            for i in range(n // 2)
            if lineup[i] < m and lineup[n - 1 - i] < m
        ]
        rounds.append(
            (
                np.array([p[0] for p in pairs], dtype=np.intp),
                np.array([p[1] for p in pairs], dtype=np.intp),
            )
        )
        order = order[-1:] + order[:-1]
    return rounds


def _jacobi_orthogonalize(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One-sided Jacobi: return (M, V) with M = a @ V having orthogonal columns."""
    m = a.shape[1]
    work = a.copy()
    v = np.eye(m)
    if m == 1:
        return work, v
    rounds = _round_robin_pairs(m)
    for _ in range(_JACOBI_MAX_SWEEPS):
        off = 0.0
        for ii, jj in rounds:
            ci = work[:, ii]
            cj = work[:, jj]
            aa = np.einsum("ij,ij->j", ci, ci)
            bb = np.einsum("ij,ij->j", cj, cj)
            cc = np.einsum("ij,ij->j", ci, cj)
            denom = np.sqrt(aa * bb)
            active = np.abs(cc) > _JACOBI_TOL * np.where(denom > 0, denom, 1.0)
            if not np.any(active):
                continue
            rel = np.abs(cc[active]) / np.where(denom[active] > 0, denom[active], 1.0)
            off = max(off, float(rel.max()))
            zeta = (bb[active] - aa[active]) / (2.0 * cc[active])
            t = np.sign(zeta) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            t[zeta == 0] = 1.0
            cs = 1.0 / np.sqrt(1.0 + t * t)
            sn = cs * t
            ia = ii[active]
            ja = jj[active]
            gi = work[:, ia]
            gj = work[:, ja]
            work[:, ia] = cs * gi - sn * gj
            work[:, ja] = sn * gi + cs * gj
            vi = v[:, ia]
            vj = v[:, ja]
            v[:, ia] = cs * vi - sn * vj
            v[:, ja] = sn * vi + cs * vj
        if off <= _JACOBI_TOL:
            break
    return work, v


def _complete_orthonormal(u: np.ndarray, cols: np.ndarray) -> None:
    """Fill the given columns of u with unit vectors orthogonal to the rest (in place)."""
    p = u.shape[0]
    basis = [u[:, j] for j in range(u.shape[1]) if j not in set(cols.tolist())]
    for j in cols:
        for e in range(p):
            cand = np.zeros(p)
            cand[e] = 1.0
            for b in basis:
                cand -= (cand @ b) * b
            nrm = np.linalg.norm(cand)
            if nrm > 1e-8:
                cand /= nrm
                u[:, j] = cand
                basis.append(cand)
                break


def thin_svd(m) -> ThinSvd:
    """Thin SVD via one-sided Jacobi rotations on the narrower orientation.

    Singular values are nonnegative and nonincreasing, with ties kept in the
    original column order. Signs are normalized so that the largest-magnitude
    entry of each right singular vector is positive.
    """
    a = check_matrix(m)
    transposed = a.shape[0] < a.shape[1]
    if transposed:
        a = a.T
    work, v = _jacobi_orthogonalize(a)
    s = np.linalg.norm(work, axis=0)
    order = np.argsort(-s, kind="stable")
    s = s[order]
    work = work[:, order]
    v = v[:, order]
    u = np.where(s > 0, work / np.where(s > 0, s, 1.0), 0.0)
    dead = np.flatnonzero(s == 0)
    if dead.size:
        _complete_orthonormal(u, dead)
    if transposed:
        u, v = v, u
    # sign convention: dominant entry of each v column made positive
    for k in range(v.shape[1]):
        imax = int(np.argmax(np.abs(v[:, k])))
        if v[imax, k] < 0:
            v[:, k] = -v[:, k]
            u[:, k] = -u[:, k]
    return ThinSvd(u=u, s=s, v=v)


def polar_orthogonal_factor(m, return_degenerate: bool = False):
    """Orthogonal polar factor Q = U1 V1^T of m, the maximizer of tr(Q^T m).

    Defined for rank-deficient inputs as well; when the smallest singular
    value falls below 1e-12 the factor is no longer unique and a degeneracy
    flag is reported (second return value when requested).
    """
    a = check_matrix(m)
    if a.shape[0] < a.shape[1]:
        raise ValueError("polar factor requires rows >= cols")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    q = u @ vt
    if return_degenerate:
        return q, bool(s[-1] < 1e-12)
    return q


def top_eigenvalue_sym(s) -> float:
    """Dominant eigenvalue of a symmetric PSD matrix by power iteration.

    Deterministic all-ones start vector; converges on relative eigenvalue
    change below 1e-12 or stops after 10000 iterations.
    """
    a = check_matrix(s)
    if a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    scale = np.max(np.abs(a))
    if np.max(np.abs(a - a.T)) > 1e-10 * max(1.0, scale):
        raise ValueError("matrix is not symmetric within tolerance")
    if scale == 0.0:
        return 0.0
    p = a.shape[0]
    vec = np.full(p, 1.0 / np.sqrt(p))
    lam = 0.0
    for _ in range(10000):
        w = a @ vec
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        vec = w / nrm
        lam_new = float(vec @ (a @ vec))
        if abs(lam_new - lam) <= 1e-12 * max(1.0, abs(lam_new)):
            return max(lam_new, 0.0)
        lam = lam_new
    return max(lam, 0.0)


def min_norm_least_squares(x, y) -> np.ndarray:
    """Minimum-Frobenius-norm solution of min ||y - x c||_F via the pseudo-inverse.

    Singular values of x below 1e-10 times the largest are treated as zero.
    """
    xm = check_matrix(x, "x")
    ym = check_matrix(y, "y")
    if xm.shape[0] != ym.shape[0]:
        raise ValueError("x and y must have the same number of rows")
    fac = thin_svd(xm)
    smax = fac.s[0] if fac.s.size else 0.0
    keep = fac.s > 1e-10 * smax
    inv = np.zeros_like(fac.s)
    inv[keep] = 1.0 / fac.s[keep]
    return (fac.v * inv) @ (fac.u.T @ ym)
