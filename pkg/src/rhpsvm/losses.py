"""Margin losses for robust binary SVM training.

Every loss here takes the margin argument ``u = 1 - y * f(x)``: positive when
a sample sits inside the margin or on the wrong side, negative when it is
classified with room to spare.  Four families are implemented:

* hinge: ``max(u, 0)``.
* pinball: ``u`` for ``u >= 0``, ``-tau * u`` otherwise.  The quantile weight
  ``tau`` also penalises well-classified points, which stabilises the
  decision boundary under resampling.
* Huberized pinball ``L_hp``: pinball with a quadratic smoothing zone of
  half-width ``s`` around zero, making the loss differentiable everywhere.
* rescaled Huberized pinball: the bounded transform
  ``eta * (1 - exp(-L_hp(u) / lam))``.  The ceiling ``eta`` caps what any
  single sample can contribute, which is what buys outlier insensitivity.

The rescaled loss is non-convex but splits exactly into a convex part ``g``
and a concave part ``h`` with ``g + h == loss``.  The training outer loop
linearises ``h`` at the current iterate; the per-sample weight
``delta = -h'(u)`` is the only coupling between outer iterations.

All evaluators accept scalars or numpy arrays and return the same kind.
Branch boundaries follow half-open intervals (``u > s``, ``0 < u <= s``,
``-s < u <= 0``, ``u <= -s``); the loss and its derivative are continuous at
the knots, so membership at the boundary is immaterial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "LossParams",
    "LossKind",
    "FisherReport",
    "hinge",
    "pinball",
    "huberized_pinball",
    "huberized_pinball_deriv",
    "rescaled_hp",
    "rescaled_hp_deriv",
    "g_part",
    "h_part",
    "delta_coefficient",
    "lipschitz_bound",
    "fisher_consistency_check",
    "loss_table",
    "loss_table_csv",
]


@dataclass(frozen=True)
class LossParams:
    """Parameters of the rescaled Huberized pinball loss family.

    eta     loss ceiling (supremum of the rescaled loss), > 0
    lambda_ rescaling bandwidth of the exponential transform, > 0
    s       half-width of the quadratic smoothing zone, > 0
    tau     quantile asymmetry weight on the negative-margin side, in [0, 1]

    Instances are immutable.  Defaults are unit values with tau = 0.5, which
    keep the rescaled loss inside [0, 1).
    """

    eta: float = 1.0
    lambda_: float = 1.0
    s: float = 1.0
    tau: float = 0.5

    def __post_init__(self):
        for name in ("eta", "lambda_", "s"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if not (isinstance(self.tau, (int, float)) and math.isfinite(self.tau)
                and 0.0 <= self.tau <= 1.0):
            raise ValueError(f"tau must lie in [0, 1], got {self.tau!r}")
        object.__setattr__(self, "tau", float(self.tau))


class LossKind(Enum):
    """The four supported margin losses."""

    HINGE = "hinge"
    PINBALL = "pinball"
    HUBERIZED_PINBALL = "hp"
    RESCALED_HP = "rhp"


@dataclass(frozen=True)
class FisherReport:
    """Result of the numeric Fisher-consistency check."""

    max_violation: float
    deriv_at_zero: float
    passed: bool


def _as_finite_array(u):
    arr = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("loss argument must be finite")
    return arr


def _match(value, like):
    """Return a float for scalar input, the array otherwise."""
    if np.ndim(like) == 0:
        return float(value)
    return value


def _check_s_tau(s, tau):
    if not (isinstance(s, (int, float)) and math.isfinite(s) and s > 0):
        raise ValueError(f"s must be a positive finite number, got {s!r}")
    if not (isinstance(tau, (int, float)) and math.isfinite(tau) and 0.0 <= tau <= 1.0):
        raise ValueError(f"tau must lie in [0, 1], got {tau!r}")


def hinge(u):
    """max(u, 0)."""
    arr = _as_finite_array(u)
    return _match(np.maximum(arr, 0.0), u)


def pinball(u, tau):
    """u for u >= 0, -tau*u for u < 0; nonnegative for tau in [0, 1]."""
    _check_s_tau(1.0, tau)
    arr = _as_finite_array(u)
    return _match(np.where(arr >= 0.0, arr, -tau * arr), u)


def _hp_value(arr, s, tau):
    return np.select(
        [arr > s, arr > 0.0, arr > -s],
        [arr - s / 2.0, arr * arr / (2.0 * s), tau * arr * arr / (2.0 * s)],
        default=tau * (-arr - s / 2.0),
    )


def _hp_deriv(arr, s, tau):
    return np.select(
        [arr > s, arr > 0.0, arr > -s],
        [np.ones_like(arr), arr / s, tau * arr / s],
        default=-tau,
    )


def _hp_second_deriv(arr, s, tau):
    # Piecewise-constant curvature of the smoothing zone; zero in the linear tails.
    return np.select(
        [arr > s, arr > 0.0, arr > -s],
        [np.zeros_like(arr), np.full_like(arr, 1.0 / s), np.full_like(arr, tau / s)],
        default=0.0,
    )


def huberized_pinball(u, s, tau):
    """Pinball loss with a quadratic zone of half-width s around u = 0.

    Value: u - s/2 for u > s; u^2/(2s) for 0 < u <= s; tau*u^2/(2s) for
    -s < u <= 0; tau*(-u - s/2) for u <= -s.  Continuously differentiable.
    """
    _check_s_tau(s, tau)
    arr = _as_finite_array(u)
    return _match(_hp_value(arr, s, tau), u)


def huberized_pinball_deriv(u, s, tau):
    """Derivative of :func:`huberized_pinball`; continuous, |value| <= 1."""
    _check_s_tau(s, tau)
    arr = _as_finite_array(u)
    return _match(_hp_deriv(arr, s, tau), u)


def rescaled_hp(u, p: LossParams):
    """Bounded rescaling eta*(1 - exp(-L_hp(u)/lambda)) of the Huberized pinball.

    The value lies in [0, eta) for finite u and vanishes at u = 0.  In float64
    the value saturates to exactly eta once L_hp(u)/lambda exceeds ~37.
    """
    arr = _as_finite_array(u)
    hp = _hp_value(arr, p.s, p.tau)
    return _match(p.eta * (-np.expm1(-hp / p.lambda_)), u)


def rescaled_hp_deriv(u, p: LossParams):
    """Derivative of :func:`rescaled_hp`; magnitude bounded by eta/lambda."""
    arr = _as_finite_array(u)
    hp = _hp_value(arr, p.s, p.tau)
    dhp = _hp_deriv(arr, p.s, p.tau)
    return _match((p.eta / p.lambda_) * dhp * np.exp(-hp / p.lambda_), u)


def g_part(u, p: LossParams):
    """Convex part of the rescaled loss: (eta/lambda) * L_hp(u)."""
    arr = _as_finite_array(u)
    return _match((p.eta / p.lambda_) * _hp_value(arr, p.s, p.tau), u)


def h_part(u, p: LossParams):
    """Concave remainder; g_part(u) + h_part(u) == rescaled_hp(u) exactly."""
    arr = _as_finite_array(u)
    hp = _hp_value(arr, p.s, p.tau)
    # Computed as loss - g so the decomposition identity holds bit-exactly.
    return _match(p.eta * (-np.expm1(-hp / p.lambda_)) - (p.eta / p.lambda_) * hp, u)


def delta_coefficient(u, p: LossParams):
    """Per-sample outer-loop weight -h'(u).

    Equals (eta/lambda) * L_hp'(u) * (1 - exp(-L_hp(u)/lambda)); shares the
    sign of L_hp'(u) and is bounded by eta/lambda in magnitude.
    """
    arr = _as_finite_array(u)
    hp = _hp_value(arr, p.s, p.tau)
    dhp = _hp_deriv(arr, p.s, p.tau)
    return _match((p.eta / p.lambda_) * dhp * (-np.expm1(-hp / p.lambda_)), u)


def lipschitz_bound(p: LossParams) -> float:
    """Supremum of |rescaled_hp'|: eta/lambda.

    |L_hp'| <= 1 and the exponential damping factor is <= 1, so the analytic
    bound is attained only in the limit.
    """
    return p.eta / p.lambda_


def fisher_consistency_check(p: LossParams, z_grid) -> FisherReport:
    """Numerically check the classification-calibration condition.

    Writing ``Lbar(z) = rescaled_hp(1 - z, p)`` for the loss as a function of
    the signed score, the check evaluates ``Lbar(z) - Lbar(-z)`` on a grid of
    positive z and requires every difference to be strictly negative, plus a
    nonzero slope ``Lbar'(0) = -rescaled_hp'(1)``.  Together these are the
    standard sufficient conditions for the minimiser of the expected loss to
    implement the Bayes rule.
    """
    grid = np.asarray(z_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("z_grid must be nonempty")
    if not np.all(np.isfinite(grid)) or not np.all(grid > 0.0):
        raise ValueError("z_grid entries must be positive finite numbers")
    diffs = rescaled_hp(1.0 - grid, p) - rescaled_hp(1.0 + grid, p)
    max_violation = float(np.max(diffs))
    deriv_at_zero = -rescaled_hp_deriv(1.0, p)
    passed = max_violation < 0.0 and abs(deriv_at_zero) > 1e-12
    return FisherReport(max_violation=max_violation, deriv_at_zero=deriv_at_zero, passed=passed)


def _table_deriv(kind: LossKind, arr, p: LossParams):
    if kind is LossKind.HINGE:
        # Subgradient convention at the kink: the u >= 0 branch slope.
        return np.where(arr >= 0.0, 1.0, 0.0)
    if kind is LossKind.PINBALL:
        return np.where(arr >= 0.0, 1.0, -p.tau)
    if kind is LossKind.HUBERIZED_PINBALL:
        return _hp_deriv(arr, p.s, p.tau)
    return (p.eta / p.lambda_) * _hp_deriv(arr, p.s, p.tau) * np.exp(
        -_hp_value(arr, p.s, p.tau) / p.lambda_
    )


def loss_table(kind: LossKind, p: LossParams, u_min: float, u_max: float, step: float):
    """Tabulate (u, loss, deriv) on the inclusive grid u_min, u_min+step, ...

    Returns a list of 3-tuples.  For the non-smooth losses the derivative
    column uses the right-branch subgradient at u = 0.
    """
    if not (math.isfinite(u_min) and math.isfinite(u_max) and u_min < u_max):
        raise ValueError("need finite u_min < u_max")
    if not (math.isfinite(step) and step > 0.0):
        raise ValueError("step must be positive")
    count = int(math.floor((u_max - u_min) / step + 1e-9)) + 1
    us = u_min + step * np.arange(count)
    if kind is LossKind.HINGE:
        vals = np.maximum(us, 0.0)
    elif kind is LossKind.PINBALL:
        vals = np.where(us >= 0.0, us, -p.tau * us)
    elif kind is LossKind.HUBERIZED_PINBALL:
        vals = _hp_value(us, p.s, p.tau)
    else:
        vals = p.eta * (-np.expm1(-_hp_value(us, p.s, p.tau) / p.lambda_))
    derivs = _table_deriv(kind, us, p)
    return [(float(a), float(b), float(c)) for a, b, c in zip(us, vals, derivs)]


def loss_table_csv(rows) -> str:
    """Serialize loss_table rows as CSV with 17-significant-digit floats."""
    lines = ["u,loss,deriv"]
    for u, loss, deriv in rows:
        lines.append(f"{u:.17g},{loss:.17g},{deriv:.17g}")
    return "\n".join(lines) + "\n"
