"""Kernel evaluation and Gram matrix assembly.

The bias term is never a free variable: it is absorbed by augmenting the
feature map with a constant 1, so every augmented kernel value is the plain
kernel value plus one and the decision function is a plain weighted sum of
augmented kernel evaluations.  This removes the equality constraint from the
dual problems downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "KernelKind",
    "KernelSpec",
    "Gram",
    "kernel_eval",
    "kernel_matrix",
    "gram_matrix",
    "decision_expansion",
]


class KernelKind(Enum):
    LINEAR = "linear"
    RBF = "rbf"
    POLYNOMIAL = "poly"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice plus its parameters.

    Use the factory methods: ``KernelSpec.linear()``, ``KernelSpec.rbf(gamma)``,
    ``KernelSpec.polynomial(degree, coef0, scale)``.
    """

    kind: KernelKind = KernelKind.LINEAR
    gamma: float | None = None
    degree: int | None = None
    coef0: float | None = None
    scale: float | None = None

    def __post_init__(self):
        if self.kind is KernelKind.RBF:
            if not (isinstance(self.gamma, (int, float)) and math.isfinite(self.gamma)
                    and self.gamma > 0):
                raise ValueError(f"rbf kernel needs gamma > 0, got {self.gamma!r}")
            object.__setattr__(self, "gamma", float(self.gamma))
        elif self.kind is KernelKind.POLYNOMIAL:
            if not (isinstance(self.degree, int) and self.degree >= 1):
                raise ValueError(f"polynomial kernel needs integer degree >= 1, got {self.degree!r}")
            coef0 = 0.0 if self.coef0 is None else self.coef0
            scale = 1.0 if self.scale is None else self.scale
            if not (isinstance(coef0, (int, float)) and math.isfinite(coef0)):
                raise ValueError(f"coef0 must be finite, got {coef0!r}")
            if not (isinstance(scale, (int, float)) and math.isfinite(scale) and scale > 0):
                raise ValueError(f"scale must be > 0, got {scale!r}")
            object.__setattr__(self, "coef0", float(coef0))
            object.__setattr__(self, "scale", float(scale))

    @classmethod
    def linear(cls) -> "KernelSpec":
        return cls(kind=KernelKind.LINEAR)

    @classmethod
    def rbf(cls, gamma: float) -> "KernelSpec":
        return cls(kind=KernelKind.RBF, gamma=gamma)

    @classmethod
    def polynomial(cls, degree: int, coef0: float = 0.0, scale: float = 1.0) -> "KernelSpec":
        return cls(kind=KernelKind.POLYNOMIAL, degree=degree, coef0=coef0, scale=scale)


@dataclass(frozen=True)
class Gram:
    """Symmetric matrix of pairwise kernel values.

    ``augmented`` records whether the constant bias feature has been folded
    in, i.e. whether every entry carries the extra +1.
    """

    values: np.ndarray
    augmented: bool

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("Gram matrix must be square")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def kernel_eval(spec: KernelSpec, x, x_prime) -> float:
    """Single kernel value between two feature vectors."""
    a = np.asarray(x, dtype=float).ravel()
    b = np.asarray(x_prime, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if spec.kind is KernelKind.LINEAR:
        return float(a @ b)
    if spec.kind is KernelKind.RBF:
        d = a - b
        return float(np.exp(-spec.gamma * (d @ d)))
    return float((spec.scale * (a @ b) + spec.coef0) ** spec.degree)


def kernel_matrix(spec: KernelSpec, A, B) -> np.ndarray:
    """Cross matrix of kernel values, shape (len(A), len(B)); no bias term."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise ValueError("A and B must be 2-d with equal feature dimension")
    prod = A @ B.T
    if spec.kind is KernelKind.LINEAR:
        return prod
    if spec.kind is KernelKind.RBF:
        sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * prod
        np.clip(sq, 0.0, None, out=sq)
        return np.exp(-spec.gamma * sq)
    return (spec.scale * prod + spec.coef0) ** spec.degree


def gram_matrix(spec: KernelSpec, X, augmented: bool) -> Gram:
    """Square Gram matrix of X against itself, optionally bias-augmented.

    The result is symmetrised exactly; an RBF Gram gets an exact unit
    diagonal.  Augmentation adds 1.0 to every entry.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("X must be a nonempty 2-d matrix")
    values = kernel_matrix(spec, X, X)
    values = 0.5 * (values + values.T)
    if spec.kind is KernelKind.RBF:
        np.fill_diagonal(values, 1.0)
    if augmented:
        values = values + 1.0
    return Gram(values=values, augmented=augmented)


def decision_expansion(spec: KernelSpec, support_X, coeffs, x) -> float:
    """Decision value sum_i c_i * (K(x_i, x) + 1) of a kernel expansion."""
    support_X = np.asarray(support_X, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float).ravel()
    if support_X.ndim != 2 or support_X.shape[0] != coeffs.shape[0]:
        raise ValueError("support rows and coefficients must have matching length")
    if coeffs.size == 0:
        return 0.0
    x = np.asarray(x, dtype=float).reshape(1, -1)
    col = kernel_matrix(spec, support_X, x)[:, 0]
    return float(coeffs @ (col + 1.0))
