"""Training loops: difference-of-convex outer iteration and inner solvers.

The non-convex training objective is

    J(c) = 0.5 * c'Kc + C * sum_i rescaled_hp(u_i),   u_i = 1 - y_i * (Kc)_i,

where K is the bias-augmented Gram matrix and c are the representer
coefficients of the weight vector.  The loss splits into convex g plus
concave h; each outer iteration freezes the per-sample weights
delta_i = -h'(u_i) at the current margins and minimises the convex surrogate

    F(c) = 0.5 * c'Kc + C * sum_i g(u_i) + C * sum_i delta_i * y_i * (Kc)_i.

Because the surrogate majorises J and touches it at the current iterate, the
recorded objective never increases while the iterates move.

Two interchangeable inner solvers are provided:

* ``inner_solve_primal`` - damped Newton with a backtracking line search on
  F itself.  Exact (F is convex and C^1), used as the correctness oracle.
* ``inner_solve_dual`` - clipped coordinate descent on the box-constrained
  dual of F with the loss regions frozen at the current margins: samples in
  the quadratic smoothing zone keep an (asymmetric) quadratic penalty with
  unbounded dual coordinates, samples in the linear tails keep the tangent
  penalty, which caps their dual coordinates.  Each coordinate is minimised
  exactly and clipped to its box; the frozen-region approximation is
  validated against the primal solver by the equivalence tests.

``train_baseline`` fits the hinge / pinball / Huberized-pinball reference
models with the same machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import Dataset
from .kernels import Gram, KernelSpec, gram_matrix
from .losses import (
    LossKind,
    LossParams,
    _hp_deriv,
    _hp_second_deriv,
    _hp_value,
    delta_coefficient,
    hinge as hinge_loss,
    pinball as pinball_loss,
    rescaled_hp,
)

__all__ = [
    "InnerMethod",
    "SolverConfig",
    "SolverError",
    "CccpState",
    "IndexPartition",
    "compute_margins",
    "delta_vector",
    "partition",
    "rhp_objective",
    "subproblem_objective",
    "subproblem_gradient",
    "inner_solve_primal",
    "inner_solve_dual",
    "dual_objective",
    "cccp_train",
    "train_baseline",
]


class InnerMethod(Enum):
    PRIMAL_REFERENCE = "primal"
    DUAL_CD = "dual"


_PRIMAL_DEFAULT_TOL = 1e-6  # on the gradient norm, relative to the start
_DUAL_DEFAULT_TOL = 1e-8  # on the per-sweep relative objective decrease


@dataclass(frozen=True)
class SolverConfig:
    """All knobs of the training loop.

    ``inner_tol`` defaults per method when left as None: 1e-6 gradient-norm
    tolerance for the primal solver, 1e-8 relative objective decrease per
    sweep for the dual solver.  ``big_M`` stands in for the unbounded upper
    range of dual coordinates in the quadratic smoothing zone.
    """

    C: float = 1.0
    max_cccp: int = 50
    outer_tol: float = 1e-3
    inner_method: InnerMethod = InnerMethod.PRIMAL_REFERENCE
    inner_tol: float | None = None
    max_inner: int = 10000
    big_M: float = 1e8
    seed: int = 0

    def __post_init__(self):
        if not (isinstance(self.C, (int, float)) and math.isfinite(self.C) and self.C > 0):
            raise ValueError(f"C must be a positive finite number, got {self.C!r}")
        if not (isinstance(self.max_cccp, int) and self.max_cccp >= 1):
            raise ValueError(f"max_cccp must be an integer >= 1, got {self.max_cccp!r}")
        for name in ("outer_tol", "big_M"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")
        if self.inner_tol is not None and not (
                isinstance(self.inner_tol, (int, float)) and math.isfinite(self.inner_tol)
                and self.inner_tol > 0):
            raise ValueError(f"inner_tol must be positive, got {self.inner_tol!r}")
        if not (isinstance(self.max_inner, int) and self.max_inner >= 1):
            raise ValueError(f"max_inner must be an integer >= 1, got {self.max_inner!r}")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            raise ValueError(f"seed must be a nonnegative integer, got {self.seed!r}")
        object.__setattr__(self, "C", float(self.C))

    def effective_inner_tol(self, method: InnerMethod) -> float:
        if self.inner_tol is not None:
            return float(self.inner_tol)
        return _PRIMAL_DEFAULT_TOL if method is InnerMethod.PRIMAL_REFERENCE else _DUAL_DEFAULT_TOL


class SolverError(RuntimeError):
    """Inner solver failed to converge; carries the last iterate."""

    def __init__(self, message, coeffs=None, grad_norm=None, iterations=None):
        super().__init__(message)
        self.coeffs = coeffs
        self.grad_norm = grad_norm
        self.iterations = iterations


@dataclass(frozen=True)
class CccpState:
    """One recorded outer iterate."""

    k: int
    coeffs: np.ndarray
    delta: np.ndarray
    margins: np.ndarray
    objective: float


@dataclass(frozen=True)
class IndexPartition:
    """Sample indices in the quadratic zone (i1, |u| < s) vs the linear tails
    (i2, |u| >= s)."""

    i1: np.ndarray
    i2: np.ndarray


def _gram_values(gram) -> np.ndarray:
    if isinstance(gram, Gram):
        if not gram.augmented:
            raise ValueError("solver operations need the bias-augmented Gram matrix")
        return gram.values
    return np.asarray(gram, dtype=float)


def compute_margins(c, gram, y) -> np.ndarray:
    """Margins u_i = 1 - y_i * (Kc)_i for the augmented Gram K."""
    K = _gram_values(gram)
    c = np.asarray(c, dtype=float)
    y = np.asarray(y, dtype=float)
    if c.shape != y.shape or c.shape[0] != K.shape[0]:
        raise ValueError("coefficients, labels and Gram matrix sizes must agree")
    return 1.0 - y * (K @ c)


def delta_vector(u, p: LossParams) -> np.ndarray:
    """Elementwise outer-loop weights delta_i = -h'(u_i)."""
    return np.asarray(delta_coefficient(np.asarray(u, dtype=float), p))


def partition(u, s: float) -> IndexPartition:
    """Split indices by |u_i| < s (quadratic zone) vs |u_i| >= s (tails)."""
    u = np.asarray(u, dtype=float)
    mask = np.abs(u) < s
    return IndexPartition(i1=np.flatnonzero(mask), i2=np.flatnonzero(~mask))


def rhp_objective(c, gram, y, C: float, p: LossParams) -> float:
    """Full training objective 0.5*c'Kc + C * sum rescaled_hp(u)."""
    K = _gram_values(gram)
    c = np.asarray(c, dtype=float)
    y = np.asarray(y, dtype=float)
    if c.shape != y.shape or c.shape[0] != K.shape[0]:
        raise ValueError("coefficients, labels and Gram matrix sizes must agree")
    Kc = K @ c
    u = 1.0 - y * Kc
    return float(0.5 * c @ Kc + C * np.sum(rescaled_hp(u, p)))


def subproblem_objective(c, gram, y, delta, C: float, p: LossParams) -> float:
    """Convex surrogate F(c) for frozen weights delta."""
    K = _gram_values(gram)
    c = np.asarray(c, dtype=float)
    Kc = K @ c
    u = 1.0 - y * Kc
    g = (p.eta / p.lambda_) * _hp_value(u, p.s, p.tau)
    return float(0.5 * c @ Kc + C * np.sum(g) + C * (delta * y) @ Kc)


def subproblem_gradient(c, gram, y, delta, C: float, p: LossParams) -> np.ndarray:
    """Gradient of F: K @ (c - C * gamma), gamma_i = y_i*(g'(u_i) - delta_i)."""
    K = _gram_values(gram)
    c = np.asarray(c, dtype=float)
    u = 1.0 - y * (K @ c)
    gp = (p.eta / p.lambda_) * _hp_deriv(u, p.s, p.tau)
    gamma = y * (gp - delta)
    return K @ (c - C * gamma)


def inner_solve_primal(gram, y, delta, C: float, p: LossParams, cfg: SolverConfig,
                       c0=None) -> np.ndarray:
    """Minimise the convex surrogate F by damped Newton with backtracking.

    Stops once ||grad F(c)|| <= tol * max(1, ||grad F(0)||).  F is convex and
    continuously differentiable, so the gradient-norm stop certifies a global
    minimiser up to tolerance.  Raises :class:`SolverError` when the budget of
    ``cfg.max_inner`` Newton steps is exhausted.
    """
    K = _gram_values(gram)
    y = np.asarray(y, dtype=float)
    delta = np.asarray(delta, dtype=float)
    n = K.shape[0]
    c = np.zeros(n) if c0 is None else np.array(c0, dtype=float)
    tol = cfg.effective_inner_tol(InnerMethod.PRIMAL_REFERENCE)
    scale = p.eta / p.lambda_

    def objective(cv, Kc):
        u = 1.0 - y * Kc
        return float(0.5 * cv @ Kc + C * np.sum(scale * _hp_value(u, p.s, p.tau))
                     + C * (delta * y) @ Kc)

    # Reference gradient magnitude at c = 0 (margins all equal one).
    gp0 = scale * _hp_deriv(np.ones(n), p.s, p.tau)
    grad0 = K @ (-C * (y * (gp0 - delta)))
    gnorm_floor = tol * max(1.0, float(np.linalg.norm(grad0)))
    jitter = 1e-10 * max(1.0, float(np.trace(K)) / n)

    Kc = K @ c
    gn = math.inf
    for it in range(cfg.max_inner):
        u = 1.0 - y * Kc
        gp = scale * _hp_deriv(u, p.s, p.tau)
        grad = K @ (c - C * (y * (gp - delta)))
        gn = float(np.linalg.norm(grad))
        if gn <= gnorm_floor:
            return c
        gpp = scale * _hp_second_deriv(u, p.s, p.tau)
        active = np.flatnonzero(gpp > 0.0)
        if active.size:
            Ka = K[:, active]
            H = K + C * (Ka * gpp[active]) @ Ka.T
        else:
            H = K.copy()
        H[np.diag_indices_from(H)] += jitter
        try:
            step = np.linalg.solve(H, -grad)
        except np.linalg.LinAlgError:
            step = -grad
        slope = float(grad @ step)
        if slope >= 0.0:
            step = -grad
            slope = -gn * gn
        f0 = objective(c, Kc)
        t = 1.0
        Kstep = K @ step
        while t > 1e-16:
            c_try = c + t * step
            Kc_try = Kc + t * Kstep
            if objective(c_try, Kc_try) <= f0 + 1e-4 * t * slope:
                c, Kc = c_try, Kc_try
                break
            t *= 0.5
        else:
            raise SolverError("line search stalled in the primal subproblem solver",
                              coeffs=c, grad_norm=gn, iterations=it)
    raise SolverError(
        f"primal subproblem solver did not reach tolerance within {cfg.max_inner} steps",
        coeffs=c, grad_norm=gn, iterations=cfg.max_inner)


def _dual_bounds(n, part: IndexPartition, C, p: LossParams, big_M):
    """Upper bounds of the nonnegative dual pair (alpha, beta).

    Quadratic-zone coordinates are effectively unbounded (big_M); linear-tail
    coordinates cap at the tangent slopes: C*eta/lambda on the alpha block and
    tau*C*eta/lambda on the beta block.
    """
    ub_a = np.full(n, big_M)
    ub_b = np.full(n, big_M)
    cap = C * p.eta / p.lambda_
    ub_a[part.i2] = cap
    ub_b[part.i2] = p.tau * cap
    return ub_a, ub_b


def dual_objective(alpha, beta, gram, y, delta, C: float, p: LossParams,
                   part: IndexPartition) -> float:
    """Objective of the frozen-region dual box QP at (alpha, beta).

    Smaller is better; differs from the shifted-variable formulation only by
    an additive constant, so monotonicity statements transfer unchanged.
    """
    K = _gram_values(gram)
    y = np.asarray(y, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    theta = alpha - beta - C * np.asarray(delta, dtype=float)
    ytheta = y * theta
    quad = 0.5 * ytheta @ (K @ ytheta)
    w_q = p.s * p.lambda_ / (2.0 * C * p.eta)
    rt = math.sqrt(p.tau) if p.tau > 0 else 0.0
    i1, i2 = part.i1, part.i2
    qterm = w_q * np.sum((alpha[i1] + beta[i1] / rt) ** 2) if (i1.size and p.tau > 0) else 0.0
    linear = -np.sum(alpha) + np.sum(beta) + 0.5 * p.s * np.sum(alpha[i2] + beta[i2])
    return float(quad + qterm + linear)


def _dual_cd(K, y, delta, C, p, cfg, part, alpha0=None, beta0=None,
             objective_trace=None):
    """Clipped coordinate-descent sweeps over the dual pair (alpha, beta).

    Every coordinate update is the exact minimiser of the one-dimensional
    restriction, clipped to the box, so the dual objective never increases.
    Returns (c, alpha, beta) with c = y * (alpha - beta - C*delta).
    """
    n = K.shape[0]
    H = K * np.outer(y, y)
    Hd = np.diag(H).copy()
    ub_a, ub_b = _dual_bounds(n, part, C, p, cfg.big_M)
    alpha = np.zeros(n) if alpha0 is None else np.clip(alpha0, 0.0, ub_a)
    beta = np.zeros(n) if beta0 is None else np.clip(beta0, 0.0, ub_b)

    w_q = p.s * p.lambda_ / (2.0 * C * p.eta)
    rt = math.sqrt(p.tau)
    in_quad = np.zeros(n, dtype=bool)
    in_quad[part.i1] = True
    lin_a = np.where(in_quad, -1.0, -1.0 + 0.5 * p.s)
    lin_b = np.where(in_quad, 1.0, 1.0 + 0.5 * p.s)
    curv_a = np.maximum(Hd + np.where(in_quad, 2.0 * w_q, 0.0), 1e-12)
    curv_b = np.maximum(Hd + np.where(in_quad, 2.0 * w_q / p.tau, 0.0), 1e-12)

    theta = alpha - beta - C * delta
    Ht = H @ theta
    qv = alpha + beta / rt  # only read on quadratic-zone coordinates

    tol = cfg.effective_inner_tol(InnerMethod.DUAL_CD)

    def full_objective():
        qterm = w_q * np.sum(qv[in_quad] ** 2)
        linear = -np.sum(alpha) + np.sum(beta) + 0.5 * p.s * np.sum(alpha[~in_quad] + beta[~in_quad])
        return float(0.5 * theta @ Ht + qterm + linear)

    prev = full_objective()
    if objective_trace is not None:
        objective_trace.append(prev)
    for sweep in range(cfg.max_inner):
        for i in range(n):
            quad_i = in_quad[i]
            g = Ht[i] + lin_a[i] + (2.0 * w_q * qv[i] if quad_i else 0.0)
            new = min(max(alpha[i] - g / curv_a[i], 0.0), ub_a[i])
            d = new - alpha[i]
            if d != 0.0:
                alpha[i] = new
                theta[i] += d
                Ht += H[:, i] * d
                if quad_i:
                    qv[i] += d
            if objective_trace is not None:
                objective_trace.append(full_objective())
            g = -Ht[i] + lin_b[i] + (2.0 * w_q * qv[i] / rt if quad_i else 0.0)
            new = min(max(beta[i] - g / curv_b[i], 0.0), ub_b[i])
            d = new - beta[i]
            if d != 0.0:
                beta[i] = new
                theta[i] -= d
                Ht -= H[:, i] * d
                if quad_i:
                    qv[i] += d / rt
            if objective_trace is not None:
                objective_trace.append(full_objective())
        if (sweep + 1) % 64 == 0:
            Ht = H @ theta  # refresh against incremental drift
        current = full_objective()
        if prev - current <= tol * max(1.0, abs(prev)):
            return y * theta, alpha, beta
        prev = current
    raise SolverError(
        f"dual coordinate descent did not converge within {cfg.max_inner} sweeps",
        coeffs=y * theta, iterations=cfg.max_inner)


def inner_solve_dual(gram, y, delta, C: float, p: LossParams, cfg: SolverConfig,
                     part: IndexPartition, objective_trace=None) -> np.ndarray:
    """Solve the frozen-region dual box QP by clipped coordinate descent.

    Requires tau > 0 (the beta block is scaled by 1/tau); a tau of zero turns
    the negative-margin side flat and is served by the primal reference
    solver instead.  Sweeps stop once the relative objective decrease over a
    full sweep drops below the tolerance.  When ``objective_trace`` is given,
    the dual objective is appended after every single-coordinate update.
    """
    if p.tau <= 0.0:
        raise ValueError("the dual coordinate-descent solver requires tau > 0; "
                         "use InnerMethod.PRIMAL_REFERENCE for tau = 0")
    K = _gram_values(gram)
    y = np.asarray(y, dtype=float)
    delta = np.asarray(delta, dtype=float)
    c, _, _ = _dual_cd(K, y, delta, C, p, cfg, part, objective_trace=objective_trace)
    return c


def _require_both_classes(y):
    if not (np.any(y == 1.0) and np.any(y == -1.0)):
        raise ValueError("training requires samples from both classes")


def cccp_train(ds: Dataset, spec: KernelSpec, p: LossParams, cfg: SolverConfig):
    """Train the rescaled-loss model by successive convex surrogates.

    Starts from zero coefficients (margins all one), recomputes the weights
    delta at every outer iteration, solves the surrogate with the configured
    inner method and stops when the RKHS norm of the iterate change drops to
    ``outer_tol`` or after ``max_cccp`` iterations.  Returns the trained model
    together with the trace of recorded outer states.

    The dual inner step optimises a frozen-region approximation; if a step
    ever fails to decrease the true objective (a region-crossing transient),
    that iteration falls back to the exact primal solve, which restores the
    descent guarantee.  The number of such fallbacks is reported in the model
    metadata.
    """
    _require_both_classes(ds.labels)
    gram = gram_matrix(spec, ds.features, augmented=True)
    K = gram.values
    y = ds.labels
    n = ds.n

    c = np.zeros(n)
    u = np.ones(n)
    J = rhp_objective(c, gram, y, cfg.C, p)
    delta = delta_vector(u, p)
    trace = [CccpState(k=0, coeffs=c.copy(), delta=delta.copy(), margins=u.copy(), objective=J)]

    use_dual = cfg.inner_method is InnerMethod.DUAL_CD
    if use_dual and p.tau <= 0.0:
        raise ValueError("the dual coordinate-descent solver requires tau > 0; "
                         "use InnerMethod.PRIMAL_REFERENCE for tau = 0")

    alpha = beta = None
    fallbacks = 0
    iterations = 0
    try:
        for k in range(1, cfg.max_cccp + 1):
            if use_dual:
                part = partition(u, p.s)
                c_new, alpha, beta = _dual_cd(K, y, delta, cfg.C, p, cfg, part,
                                              alpha0=alpha, beta0=beta)
            else:
                c_new = inner_solve_primal(gram, y, delta, cfg.C, p, cfg, c0=c)
            J_new = rhp_objective(c_new, gram, y, cfg.C, p)
            if use_dual and J_new > J + 1e-13 * max(1.0, abs(J)):
                c_new = inner_solve_primal(gram, y, delta, cfg.C, p, cfg, c0=c)
                J_new = rhp_objective(c_new, gram, y, cfg.C, p)
                alpha = beta = None
                fallbacks += 1
            dc = c_new - c
            shift = math.sqrt(max(float(dc @ (K @ dc)), 0.0))
            c = c_new
            u = 1.0 - y * (K @ c)
            J = J_new
            delta = delta_vector(u, p)
            iterations = k
            trace.append(CccpState(k=k, coeffs=c.copy(), delta=delta.copy(),
                                   margins=u.copy(), objective=J))
            if shift <= cfg.outer_tol:
                break
    except SolverError as err:
        raise SolverError(f"outer iteration {iterations + 1}: {err}",
                          coeffs=err.coeffs, grad_norm=err.grad_norm,
                          iterations=iterations) from err

    from .model import build_trained_model

    model = build_trained_model(
        ds, spec, p, cfg, LossKind.RESCALED_HP, c,
        extra_meta={"iterations": iterations, "final_objective": J,
                    "primal_fallbacks": fallbacks})
    return model, trace


def _box_qp_cd(H, lin, lb, ub, tol, max_sweeps):
    """Clipped coordinate descent on 0.5*p'Hp + lin'p over a box."""
    n = H.shape[0]
    Hd = np.maximum(np.diag(H).copy(), 1e-12)
    pvec = np.zeros(n)
    Hp = np.zeros(n)

    def objective():
        return float(0.5 * pvec @ Hp + lin @ pvec)

    prev = objective()
    for sweep in range(max_sweeps):
        for i in range(n):
            g = Hp[i] + lin[i]
            new = min(max(pvec[i] - g / Hd[i], lb[i]), ub[i])
            d = new - pvec[i]
            if d != 0.0:
                pvec[i] = new
                Hp += H[:, i] * d
        if (sweep + 1) % 64 == 0:
            Hp = H @ pvec
        current = objective()
        if prev - current <= tol * max(1.0, abs(prev)):
            return pvec
        prev = current
    raise SolverError(f"box QP coordinate descent did not converge within {max_sweeps} sweeps",
                      coeffs=pvec, iterations=max_sweeps)


def train_baseline(kind: LossKind, ds: Dataset, spec: KernelSpec, p: LossParams,
                   cfg: SolverConfig):
    """Train one of the convex reference models.

    Hinge and pinball are solved through their dual box QPs by clipped
    coordinate descent (bias absorbed, so no equality constraint); the dual
    boxes are [0, C] for hinge and [-tau*C, C] for pinball.  The Huberized
    pinball model is one exact convex solve of the surrogate machinery with
    zero weights and unit loss scale.
    """
    _require_both_classes(ds.labels)
    if kind is LossKind.RESCALED_HP:
        raise ValueError("use cccp_train (or fit) for the rescaled model")
    gram = gram_matrix(spec, ds.features, augmented=True)
    K = gram.values
    y = ds.labels
    n = ds.n
    tol = cfg.effective_inner_tol(InnerMethod.DUAL_CD)

    if kind is LossKind.HINGE:
        H = K * np.outer(y, y)
        pv = _box_qp_cd(H, -np.ones(n), np.zeros(n), np.full(n, cfg.C), tol, cfg.max_inner)
        c = y * pv
        u = 1.0 - y * (K @ c)
        final = float(0.5 * c @ (K @ c) + cfg.C * np.sum(hinge_loss(u)))
    elif kind is LossKind.PINBALL:
        if p.tau <= 0.0:
            raise ValueError("the pinball dual needs tau > 0 "
                             "(tau = 0 coincides with the hinge model)")
        H = K * np.outer(y, y)
        pv = _box_qp_cd(H, -np.ones(n), np.full(n, -p.tau * cfg.C), np.full(n, cfg.C),
                        tol, cfg.max_inner)
        c = y * pv
        u = 1.0 - y * (K @ c)
        final = float(0.5 * c @ (K @ c) + cfg.C * np.sum(pinball_loss(u, p.tau)))
    elif kind is LossKind.HUBERIZED_PINBALL:
        p_unit = LossParams(eta=1.0, lambda_=1.0, s=p.s, tau=p.tau)
        c = inner_solve_primal(gram, y, np.zeros(n), cfg.C, p_unit, cfg)
        u = 1.0 - y * (K @ c)
        final = float(0.5 * c @ (K @ c) + cfg.C * np.sum(_hp_value(u, p.s, p.tau)))
    else:
        raise ValueError(f"unsupported baseline kind {kind!r}")

    from .model import build_trained_model

    return build_trained_model(ds, spec, p, cfg, kind, c,
                               extra_meta={"iterations": 1, "final_objective": final,
                                           "primal_fallbacks": 0})
