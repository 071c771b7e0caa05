"""User-facing classifier: fit, predict and versioned serialization."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from . import jsonio
from .data import Dataset
from .kernels import KernelKind, KernelSpec, kernel_matrix
from .losses import LossKind, LossParams
from .solver import SolverConfig

__all__ = [
    "FORMAT_VERSION",
    "TrainedModel",
    "build_trained_model",
    "fit",
    "decision_value",
    "decision_values",
    "predict",
    "predict_many",
    "save",
    "load",
    "config_digest",
]

FORMAT_VERSION = 1

_PRUNE_THRESHOLD = 1e-12


@dataclass(frozen=True)
class TrainedModel:
    """Immutable trained classifier in kernel-expansion form.

    Only support rows with |coefficient| > 1e-12 are retained; dropping the
    rest perturbs any decision value by at most 1e-12 * n * max|K|.
    """

    kind: LossKind
    params: LossParams
    kernel: KernelSpec
    support_X: np.ndarray
    coeffs: np.ndarray
    meta: dict

    def __post_init__(self):
        support = np.asarray(self.support_X, dtype=float)
        coeffs = np.asarray(self.coeffs, dtype=float)
        if support.ndim != 2 or coeffs.ndim != 1 or support.shape[0] != coeffs.shape[0]:
            raise ValueError("support rows and coefficients must have matching length")
        if not np.all(np.isfinite(support)) or not np.all(np.isfinite(coeffs)):
            raise ValueError("support rows and coefficients must be finite")
        support = support.copy()
        coeffs = coeffs.copy()
        support.flags.writeable = False
        coeffs.flags.writeable = False
        object.__setattr__(self, "support_X", support)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def d(self) -> int:
        return int(self.meta["d"])


def config_digest(kind: LossKind, p: LossParams, spec: KernelSpec, cfg: SolverConfig) -> str:
    """Short stable digest of the full training configuration."""
    payload = jsonio.dumps({
        "kind": kind.value,
        "loss": {"eta": p.eta, "lambda": p.lambda_, "s": p.s, "tau": p.tau},
        "kernel": _kernel_to_dict(spec),
        "solver": {
            "C": cfg.C, "max_cccp": cfg.max_cccp, "outer_tol": cfg.outer_tol,
            "inner_method": cfg.inner_method.value, "inner_tol": cfg.inner_tol,
            "max_inner": cfg.max_inner, "big_M": cfg.big_M, "seed": cfg.seed,
        },
    })
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


def build_trained_model(ds: Dataset, spec: KernelSpec, p: LossParams, cfg: SolverConfig,
                        kind: LossKind, coeffs, extra_meta=None) -> TrainedModel:
    """Prune negligible coefficients and assemble the model with metadata."""
    coeffs = np.asarray(coeffs, dtype=float)
    keep = np.flatnonzero(np.abs(coeffs) > _PRUNE_THRESHOLD)
    meta = {
        "format_version": FORMAT_VERSION,
        "n_train": ds.n,
        "d": ds.d,
        "n_support": int(keep.size),
        "inner_method": cfg.inner_method.value,
        "config_digest": config_digest(kind, p, spec, cfg),
    }
    if extra_meta:
        meta.update(extra_meta)
    return TrainedModel(kind=kind, params=p, kernel=spec,
                        support_X=ds.features[keep], coeffs=coeffs[keep], meta=meta)


def fit(ds: Dataset, spec: KernelSpec, p: LossParams, cfg: SolverConfig,
        kind: LossKind = LossKind.RESCALED_HP) -> TrainedModel:
    """Train a classifier of the requested kind.

    The rescaled loss goes through the difference-of-convex outer loop; the
    three convex losses are trained directly.  The hinge model ignores all
    loss parameters.
    """
    from .solver import cccp_train, train_baseline

    if kind is LossKind.RESCALED_HP:
        model, _ = cccp_train(ds, spec, p, cfg)
        return model
    return train_baseline(kind, ds, spec, p, cfg)


def decision_values(m: TrainedModel, X) -> np.ndarray:
    """Batch decision values sum_i c_i * (K(x_i, x) + 1)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != m.d:
        raise ValueError(f"expected feature dimension {m.d}, got {X.shape}")
    if m.coeffs.size == 0:
        return np.zeros(X.shape[0])
    return m.coeffs @ (kernel_matrix(m.kernel, m.support_X, X) + 1.0)


def decision_value(m: TrainedModel, x) -> float:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != m.d:
        raise ValueError(f"expected feature dimension {m.d}, got {x.shape[0]}")
    return float(decision_values(m, x.reshape(1, -1))[0])


def predict_many(m: TrainedModel, X) -> np.ndarray:
    """Labels for a batch of rows; a decision value of exactly 0 maps to +1."""
    return np.where(decision_values(m, X) >= 0.0, 1.0, -1.0)


def predict(m: TrainedModel, x) -> float:
    return 1.0 if decision_value(m, x) >= 0.0 else -1.0


def _kernel_to_dict(spec: KernelSpec) -> dict:
    if spec.kind is KernelKind.LINEAR:
        params: dict = {}
    elif spec.kind is KernelKind.RBF:
        params = {"gamma": spec.gamma}
    else:
        params = {"degree": spec.degree, "coef0": spec.coef0, "scale": spec.scale}
    return {"kind": spec.kind.value, "params": params}


def _kernel_from_dict(obj) -> KernelSpec:
    kind = obj["kind"]
    params = obj.get("params", {})
    if kind == KernelKind.LINEAR.value:
        return KernelSpec.linear()
    if kind == KernelKind.RBF.value:
        return KernelSpec.rbf(params["gamma"])
    if kind == KernelKind.POLYNOMIAL.value:
        return KernelSpec.polynomial(int(params["degree"]), params.get("coef0", 0.0),
                                     params.get("scale", 1.0))
    raise ValueError(f"unknown kernel kind {kind!r}")


def save(m: TrainedModel) -> str:
    """Serialize the model to versioned JSON text with %.17g floats."""
    payload = {
        "version": FORMAT_VERSION,
        "loss": {
            "kind": m.kind.value,
            "eta": m.params.eta,
            "lambda": m.params.lambda_,
            "s": m.params.s,
            "tau": m.params.tau,
        },
        "kernel": _kernel_to_dict(m.kernel),
        "support": [list(row) for row in m.support_X],
        "coeffs": list(m.coeffs),
        "meta": m.meta,
    }
    return jsonio.dumps(payload)


def load(text: str) -> TrainedModel:
    """Parse model text; rejects unknown versions and invariant violations."""
    try:
        obj = jsonio.loads(text)
    except ValueError as err:
        raise ValueError(f"malformed model text: {err}") from None
    if not isinstance(obj, dict) or "version" not in obj:
        raise ValueError("malformed model text: missing version field")
    if obj["version"] != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {obj['version']!r} "
                         f"(this build reads version {FORMAT_VERSION})")
    try:
        loss = obj["loss"]
        kind = LossKind(loss["kind"])
        params = LossParams(eta=loss["eta"], lambda_=loss["lambda"],
                            s=loss["s"], tau=loss["tau"])
        kernel = _kernel_from_dict(obj["kernel"])
        meta = obj["meta"]
        support = np.asarray(obj["support"], dtype=float)
        coeffs = np.asarray(obj["coeffs"], dtype=float)
    except (KeyError, TypeError) as err:
        raise ValueError(f"malformed model text: {err}") from None
    if support.size == 0:
        support = support.reshape(0, int(meta["d"]))
    if support.ndim != 2 or support.shape[1] != int(meta["d"]):
        raise ValueError("malformed model text: support rows do not match dimension")
    return TrainedModel(kind=kind, params=params, kernel=kernel,
                        support_X=support, coeffs=coeffs, meta=meta)
