"""Augmented-Lagrangian block-coordinate-descent solver for the orthogonal
sparse factorization objective

    1/2 ||Y - X U D V'||_F^2 + ld ||D||_1 + la rho_a(A) + lb rho_b(B)
    s.t. U'U = V'V = I,  UD = A,  VD = B,

with nonnegative singular values d, split variables A, B and multipliers
Gamma_a, Gamma_b. Block updates: U by an iterative weighted Procrustes
scheme, V by a single polar factor, D by a per-coordinate closed form, A and
B by proximal soft-thresholding. Layers whose singular value hits exactly
zero are pruned greedily; an all-zero D returns the zero fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lasso_init import InitState, initialize
from .linalg import check_matrix, polar_orthogonal_factor, top_eigenvalue_sym
from .penalty import Penalty, PenaltyKind

__all__ = [
    "SofarConfig",
    "SofarState",
    "SofarFit",
    "SofarDivergedError",
    "make_state",
    "update_u",
    "update_v",
    "update_d",
    "update_a",
    "update_b",
    "update_duals",
    "augmented_lagrangian",
    "fit",
]

_MONO_SLACK = 1e-10  # relative to 1 + |L|


class SofarDivergedError(RuntimeError):
    """Objective became non-finite; carries the objective trace."""

    def __init__(self, message: str, trace):
        super().__init__(message)
        self.trace = np.asarray(trace)


@dataclass(frozen=True)
class SofarConfig:
    lambda_d: float = 0.0
    lambda_a: float = 0.0
    lambda_b: float = 0.0
    penalty_a: Penalty = field(default_factory=lambda: Penalty(PenaltyKind.ENTRYWISE_L1))
    penalty_b: Penalty = field(default_factory=lambda: Penalty(PenaltyKind.ENTRYWISE_L1))
    weights_d: np.ndarray | None = None
    mu0: float = 1.0
    gamma: float = 1.05
    mu_max: float = 1e10
    inner_sweeps: int = 10
    inner_tol: float = 1e-4
    outer_tol_primal: float = 1e-9
    outer_tol_obj: float = 1e-8
    max_outer: int = 1000
    procrustes_max_iter: int = 5
    procrustes_tol: float = 1e-7
    prune_tol: float = 1e-4  # relative floor below which a layer is dropped

    def __post_init__(self):
        if self.gamma <= 1:
            raise ValueError("gamma must exceed 1")
        if not 0 <= self.prune_tol < 1:
            raise ValueError("prune_tol must lie in [0, 1)")
        for name in ("inner_tol", "outer_tol_primal", "outer_tol_obj", "procrustes_tol", "mu0", "mu_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if min(self.lambda_d, self.lambda_a, self.lambda_b) < 0:
            raise ValueError("penalty levels must be nonnegative")


@dataclass
class SofarState:
    """Mutable solver state; gram = X'X, cross = X'Y and rho2 are cached."""

    u: np.ndarray
    v: np.ndarray
    d: np.ndarray
    a: np.ndarray
    b: np.ndarray
    gamma_a: np.ndarray
    gamma_b: np.ndarray
    mu: float
    gram: np.ndarray
    cross: np.ndarray
    rho2: float
    identity_like: bool  # rho2*I - X'X vanishes (e.g. identity design)
    penalty_a: Penalty
    penalty_b: Penalty
    weights_d: np.ndarray  # per-layer nuclear weights (ones when non-adaptive)


@dataclass
class SofarFit:
    """Pruned, sorted, sign-normalized factorization plus solver telemetry."""

    u: np.ndarray
    d: np.ndarray
    v: np.ndarray
    objective_trace: np.ndarray
    primal_residuals: tuple[float, float]
    outer_iterations: int
    converged: bool
    monotone_violations: int = 0
    max_orth_dev: float = 0.0
    degenerate_polar: bool = False
    u_procrustes_max_iters: int = 0

    @property
    def rank(self) -> int:
        return int(self.d.shape[0])

    @property
    def a(self) -> np.ndarray:
        return self.u * self.d

    @property
    def b(self) -> np.ndarray:
        return self.v * self.d

    @property
    def c(self) -> np.ndarray:
        return (self.u * self.d) @ self.v.T


def _sliced_penalty(pen: Penalty, keep: np.ndarray) -> Penalty:
    if pen.weights is None:
        return pen
    return Penalty(pen.kind, pen.weights[:, keep])


def make_state(x, y, config: SofarConfig, init: InitState) -> SofarState:
    """Assemble the initial state from a Lasso-SVD starting point."""
    xm = check_matrix(x, "x")
    ym = check_matrix(y, "y")
    gram = xm.T @ xm
    cross = xm.T @ ym
    rho2 = top_eigenvalue_sym(gram)
    wmat = rho2 * np.eye(xm.shape[1]) - gram
    identity_like = float(np.max(np.abs(wmat))) <= 1e-12 * max(rho2, 1.0)
    m = init.d0.shape[0]
    wd = np.ones(m) if config.weights_d is None else np.asarray(config.weights_d, dtype=float).copy()
    if wd.shape[0] != m:
        raise ValueError("weights_d length must match the initial rank")
    keep = init.d0 > 0
    u = init.u0[:, keep].copy()
    v = init.v0[:, keep].copy()
    d = init.d0[keep].copy()
    a = u * d
    b = v * d
    return SofarState(
        u=u,
        v=v,
        d=d,
        a=a,
        b=b,
        gamma_a=np.zeros_like(a),
        gamma_b=np.zeros_like(b),
        mu=config.mu0,
        gram=gram,
        cross=cross,
        rho2=rho2,
        identity_like=identity_like,
        penalty_a=_sliced_penalty(config.penalty_a, keep),
        penalty_b=_sliced_penalty(config.penalty_b, keep),
        weights_d=wd[keep],
    )


def _u_subproblem_objective(st: SofarState, u: np.ndarray, target: np.ndarray) -> float:
    gu = st.gram @ (u * st.d)
    quad = 0.5 * float(np.sum((u * gu).sum(axis=0) * st.d))
    lin = float(np.sum((u * target).sum(axis=0) * st.d))
    return quad - lin


def _polar_fast(a: np.ndarray):
    """Polar factor without input validation; for the solver's hot loop."""
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return u @ vt, bool(s[-1] < 1e-12)


def update_u(st: SofarState, config: SofarConfig):
    """Iterative weighted-Procrustes update of U.

    Repeats U <- polar((X'YV + mu A - Gamma_a + (rho2 I - X'X) U D) D) until
    the iterate stalls; a single step suffices when rho2 I - X'X vanishes.
    Each step is a majorization-minimization step, so the subproblem
    objective never increases. Returns (u, iterations, degenerate_flag).
    """
    if not np.any(st.d):
        return st.u.copy(), 0, False
    target = st.cross @ st.v + st.mu * st.a - st.gamma_a
    u = st.u
    degen = False
    max_iter = 1 if st.identity_like else config.procrustes_max_iter
    iters = 0
    for _ in range(max_iter):
        if st.identity_like:
            c1 = target * st.d
        else:
            ud = u * st.d
            c1 = (target + st.rho2 * ud - st.gram @ ud) * st.d
        u_new, dflag = _polar_fast(c1)
        degen = degen or dflag
        iters += 1
        change = float(np.linalg.norm(u_new - u))
        u = u_new
        if change <= config.procrustes_tol:
            break
    return u, iters, degen


def update_v(st: SofarState):
    """Exact Procrustes update of V: polar factor of (Y'XU + mu B - Gamma_b) D."""
    c2 = (st.cross.T @ st.u + st.mu * st.b - st.gamma_b) * st.d
    return _polar_fast(c2)


def update_d(st: SofarState, config: SofarConfig) -> np.ndarray:
    """Closed-form nonnegative D update; separable because U, V are orthonormal."""
    if st.mu <= 0:
        raise ValueError("mu must be positive")
    gu = st.gram @ st.u
    gkk = np.einsum("pk,pk->k", st.u, gu)
    h = (
        np.einsum("pk,pk->k", st.u, st.cross @ st.v)
        + np.einsum("pk,pk->k", st.u, st.mu * st.a - st.gamma_a)
        + np.einsum("qk,qk->k", st.v, st.mu * st.b - st.gamma_b)
    )
    return np.maximum(0.0, (h - config.lambda_d * st.weights_d) / (gkk + 2.0 * st.mu))


def update_a(st: SofarState, config: SofarConfig) -> np.ndarray:
    target = st.u * st.d + st.gamma_a / st.mu
    if config.lambda_a == 0:
        return target
    return st.penalty_a.prox(target, config.lambda_a / st.mu)


def update_b(st: SofarState, config: SofarConfig) -> np.ndarray:
    target = st.v * st.d + st.gamma_b / st.mu
    if config.lambda_b == 0:
        return target
    return st.penalty_b.prox(target, config.lambda_b / st.mu)


def update_duals(st: SofarState, config: SofarConfig):
    """Multiplier ascent followed by the mu ramp (capped at mu_max)."""
    ga = st.gamma_a + st.mu * (st.u * st.d - st.a)
    gb = st.gamma_b + st.mu * (st.v * st.d - st.b)
    mu = min(st.mu * config.gamma, config.mu_max)
    return ga, gb, mu


def augmented_lagrangian(st: SofarState, x: np.ndarray, y: np.ndarray, config: SofarConfig) -> float:
    ud = st.u * st.d
    vd = st.v * st.d
    resid = y - (x @ ud) @ st.v.T
    val = 0.5 * float(np.sum(resid * resid))
    val += config.lambda_d * float(np.sum(st.weights_d * st.d))
    if config.lambda_a:
        val += config.lambda_a * st.penalty_a.value(st.a)
    if config.lambda_b:
        val += config.lambda_b * st.penalty_b.value(st.b)
    ra = ud - st.a
    rb = vd - st.b
    val += float(np.sum(st.gamma_a * ra)) + float(np.sum(st.gamma_b * rb))
    val += 0.5 * st.mu * (float(np.sum(ra * ra)) + float(np.sum(rb * rb)))
    return val


def _zero_fit(p: int, q: int, trace, outer: int, telemetry: dict | None = None) -> SofarFit:
    tel = telemetry or {}
    return SofarFit(
        u=np.zeros((p, 0)),
        d=np.zeros(0),
        v=np.zeros((q, 0)),
        objective_trace=np.asarray(trace),
        primal_residuals=(0.0, 0.0),
        outer_iterations=outer,
        converged=True,
        **tel,
    )


def _finalize(st: SofarState, trace, outer, converged, telemetry) -> SofarFit:
    order = np.argsort(-st.d, kind="stable")
    u = st.u[:, order].copy()
    v = st.v[:, order].copy()
    d = st.d[order].copy()
    for k in range(v.shape[1]):
        imax = int(np.argmax(np.abs(v[:, k])))
        if v[imax, k] < 0:
            v[:, k] = -v[:, k]
            u[:, k] = -u[:, k]
    ra = float(np.linalg.norm(u * d - st.a[:, order]))
    rb = float(np.linalg.norm(v * d - st.b[:, order]))
    return SofarFit(
        u=u,
        d=d,
        v=v,
        objective_trace=np.asarray(trace),
        primal_residuals=(ra, rb),
        outer_iterations=outer,
        converged=converged,
        **telemetry,
    )


def _orth_dev(u: np.ndarray) -> float:
    if u.shape[1] == 0:
        return 0.0
    return float(np.max(np.abs(u.T @ u - np.eye(u.shape[1]))))


def fit(x, y, m: int, config: SofarConfig, init: InitState | None = None, seed: int = 0) -> SofarFit:
    """Run the full solver loop from a Lasso-SVD initialization.

    Inner loop: up to config.inner_sweeps coordinate sweeps over the five
    blocks, stopping early on a relative objective stall. Outer loop: dual
    ascent and mu ramp, terminating when the primal residuals and objective
    change both fall below their tolerances. The augmented Lagrangian is
    tracked per sweep; increases beyond a relative slack of 1e-10 within a
    fixed (mu, Gamma) epoch are counted as monotonicity violations.
    """
    xm = check_matrix(x, "x")
    ym = check_matrix(y, "y")
    p, q = xm.shape[1], ym.shape[1]
    if not 1 <= m <= min(p, q):
        raise ValueError(f"rank m={m} out of range [1, {min(p, q)}]")
    if init is None:
        init = initialize(xm, ym, m, seed=seed)
    telemetry = {
        "monotone_violations": 0,
        "max_orth_dev": 0.0,
        "degenerate_polar": False,
        "u_procrustes_max_iters": 0,
    }
    if init.zero_fit:
        return _zero_fit(p, q, [], 0, telemetry)
    st = make_state(xm, ym, config, init)
    if st.d.shape[0] == 0:
        return _zero_fit(p, q, [], 0, telemetry)

    trace: list[float] = []
    converged = False
    outer = 0
    # absolute prune floor: layers negligible relative to the starting scale
    # collapse to the zero fit instead of lingering as numerical dust
    d_ref = float(np.max(st.d))
    obj_prev_outer = augmented_lagrangian(st, xm, ym, config)
    for outer in range(1, config.max_outer + 1):
        epoch_obj = None
        for _ in range(config.inner_sweeps):
            u, iters, degen = update_u(st, config)
            st.u = u
            telemetry["u_procrustes_max_iters"] = max(telemetry["u_procrustes_max_iters"], iters)
            telemetry["degenerate_polar"] = telemetry["degenerate_polar"] or degen
            st.v, degen_v = update_v(st)
            telemetry["degenerate_polar"] = telemetry["degenerate_polar"] or degen_v
            st.d = update_d(st, config)
            thr = max(config.prune_tol * float(np.max(st.d, initial=0.0)), 1e-8 * d_ref)
            keep = st.d > thr
            if not np.all(keep):
                if not np.any(keep):
                    return _zero_fit(p, q, trace, outer, telemetry)
                st.u = st.u[:, keep]
                st.v = st.v[:, keep]
                st.d = st.d[keep]
                st.a = st.a[:, keep]
                st.b = st.b[:, keep]
                st.gamma_a = st.gamma_a[:, keep]
                st.gamma_b = st.gamma_b[:, keep]
                st.weights_d = st.weights_d[keep]
                st.penalty_a = _sliced_penalty(st.penalty_a, keep)
                st.penalty_b = _sliced_penalty(st.penalty_b, keep)
                epoch_obj = None  # dimension changed: restart the monotone baseline
            st.a = update_a(st, config)
            st.b = update_b(st, config)
            obj = augmented_lagrangian(st, xm, ym, config)
            if not np.isfinite(obj):
                raise SofarDivergedError("augmented Lagrangian became non-finite", trace)
            trace.append(obj)
            telemetry["max_orth_dev"] = max(
                telemetry["max_orth_dev"], _orth_dev(st.u), _orth_dev(st.v)
            )
            if epoch_obj is not None:
                if obj > epoch_obj + _MONO_SLACK * (1.0 + abs(epoch_obj)):
                    telemetry["monotone_violations"] += 1
                if abs(obj - epoch_obj) <= config.inner_tol * (1.0 + abs(obj)):
                    epoch_obj = obj
                    break
            epoch_obj = obj
        st.gamma_a, st.gamma_b, st.mu = update_duals(st, config)
        ra = float(np.linalg.norm(st.u * st.d - st.a))
        rb = float(np.linalg.norm(st.v * st.d - st.b))
        scale = 1.0 + float(np.linalg.norm(st.a)) + float(np.linalg.norm(st.b))
        obj_now = epoch_obj if epoch_obj is not None else augmented_lagrangian(st, xm, ym, config)
        obj_change = abs(obj_now - obj_prev_outer) / (1.0 + abs(obj_now))
        obj_prev_outer = obj_now
        if max(ra, rb) <= config.outer_tol_primal * scale and obj_change <= config.outer_tol_obj:
            converged = True
            break
    return _finalize(st, trace, outer, converged, telemetry)
