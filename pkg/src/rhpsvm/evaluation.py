"""Metrics, the generalization-bound evaluator and robustness experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, append_sample, subset
from .kernels import KernelKind, KernelSpec
from .losses import LossKind, LossParams
from .model import TrainedModel, decision_values, fit, predict_many
from .solver import SolverConfig

__all__ = [
    "MetricsReport",
    "BoundInputs",
    "BoundReport",
    "FitConfig",
    "StabilityRun",
    "StabilityReport",
    "OutlierShiftReport",
    "accuracy_metrics",
    "generalization_bound",
    "bound_terms",
    "bound_inputs_for_model",
    "resampling_stability",
    "outlier_shift",
    "linear_weight_vector",
]


@dataclass(frozen=True)
class MetricsReport:
    """Confusion counts and accuracy for ±1 predictions."""

    accuracy: float
    tp: int
    tn: int
    fp: int
    fn: int


@dataclass(frozen=True)
class BoundInputs:
    """Inputs of the generalization-bound evaluator.

    ``gamma`` is a user-supplied scale (the bound's margin-scale factor is
    left free here, default 1), ``iota`` the Lipschitz constant of the loss,
    ``b_norm`` an upper bound on the weight norm, ``gram_trace`` the sum of
    diagonal kernel values and ``zeta`` the confidence level: the bound holds
    with probability at least 1 - zeta.
    """

    sum_loss: float
    n: int
    gamma: float
    b_norm: float
    iota: float
    gram_trace: float
    zeta: float

    def __post_init__(self):
        if not (isinstance(self.n, int) and self.n >= 1):
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        for name in ("sum_loss", "b_norm", "gram_trace"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be a nonnegative finite number, got {v!r}")
        for name in ("gamma", "iota"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")
        if not (isinstance(self.zeta, (int, float)) and 0.0 < self.zeta < 1.0):
            raise ValueError(f"zeta must lie strictly inside (0, 1), got {self.zeta!r}")


@dataclass(frozen=True)
class BoundReport:
    loss_term: float
    capacity_term: float
    confidence_term: float
    total: float


@dataclass(frozen=True)
class FitConfig:
    """Everything needed to train one model inside an experiment."""

    kind: LossKind
    params: LossParams
    kernel: KernelSpec
    solver: SolverConfig


@dataclass(frozen=True)
class StabilityRun:
    index: int
    seed: int
    redraws: int
    accuracy: float


@dataclass(frozen=True)
class StabilityReport:
    runs: tuple
    mean: float
    std: float


@dataclass(frozen=True)
class OutlierShiftReport:
    angle_a: float
    angle_b: float
    norm_ratio_a: float
    norm_ratio_b: float


def accuracy_metrics(preds, labels) -> MetricsReport:
    """Count the confusion matrix of ±1 predictions against ±1 labels."""
    preds = np.asarray(preds, dtype=float).ravel()
    labels = np.asarray(labels, dtype=float).ravel()
    if preds.shape != labels.shape:
        raise ValueError("predictions and labels must have equal length")
    if preds.size == 0:
        raise ValueError("cannot compute metrics on empty input")
    tp = int(np.sum((preds == 1.0) & (labels == 1.0)))
    tn = int(np.sum((preds == -1.0) & (labels == -1.0)))
    fp = int(np.sum((preds == 1.0) & (labels == -1.0)))
    fn = int(np.sum((preds == -1.0) & (labels == 1.0)))
    if tp + tn + fp + fn != preds.size:
        raise ValueError("predictions and labels must be exactly -1 or +1")
    return MetricsReport(accuracy=(tp + tn) / preds.size, tp=tp, tn=tn, fp=fp, fn=fn)


def bound_terms(b: BoundInputs) -> BoundReport:
    """Evaluate the three addends of the generalization bound.

    total = (gamma/n) * sum_loss
          + (2 * b_norm * gamma * iota / sqrt(n)) * sqrt(gram_trace)
          + sqrt(8 * ln(2 / zeta) / n)
    """
    loss_term = b.gamma / b.n * b.sum_loss
    capacity_term = 2.0 * b.b_norm * b.gamma * b.iota / math.sqrt(b.n) * math.sqrt(b.gram_trace)
    confidence_term = math.sqrt(8.0 * math.log(2.0 / b.zeta) / b.n)
    return BoundReport(loss_term=loss_term, capacity_term=capacity_term,
                       confidence_term=confidence_term,
                       total=loss_term + capacity_term + confidence_term)


def generalization_bound(b: BoundInputs) -> float:
    """Right-hand side of the misclassification-probability bound."""
    return bound_terms(b).total


def bound_inputs_for_model(m: TrainedModel, ds: Dataset, zeta: float,
                           gamma: float = 1.0) -> BoundInputs:
    """Assemble bound inputs from a trained model and evaluation data.

    The Lipschitz constant defaults to eta/lambda of the model's loss, the
    weight-norm bound to the trained RKHS norm, and the trace to the
    bias-augmented diagonal kernel values (the feature space the model
    actually lives in).
    """
    from .kernels import gram_matrix
    from .losses import lipschitz_bound, rescaled_hp

    values = decision_values(m, ds.features)
    margins = 1.0 - ds.labels * values
    sum_loss = float(np.sum(rescaled_hp(margins, m.params)))
    if m.coeffs.size:
        gram = gram_matrix(m.kernel, m.support_X, augmented=True)
        b_norm = math.sqrt(max(float(m.coeffs @ (gram.values @ m.coeffs)), 0.0))
    else:
        b_norm = 0.0
    if m.kernel.kind is KernelKind.RBF:
        diag = np.ones(ds.n)
    else:
        from .kernels import kernel_eval
        diag = np.array([kernel_eval(m.kernel, x, x) for x in ds.features])
    gram_trace = float(np.sum(diag + 1.0))
    return BoundInputs(sum_loss=sum_loss, n=ds.n, gamma=gamma,
                       b_norm=max(b_norm, 1e-300), iota=lipschitz_bound(m.params),
                       gram_trace=gram_trace, zeta=zeta)


def _fit_config(ds: Dataset, config: FitConfig) -> TrainedModel:
    return fit(ds, config.kernel, config.params, config.solver, config.kind)


def resampling_stability(train_ds: Dataset, test_ds: Dataset, config: FitConfig,
                         n_resamples: int, seed: int) -> StabilityReport:
    """Accuracy spread over seeded bootstrap resamples of the training set.

    Each run draws n samples with replacement (run r uses generator seed
    ``seed + 100000*r + redraws``), trains one model and scores it on the
    untouched test split.  A degenerate single-class resample is redrawn with
    the next sub-seed and the redraw count recorded.  The reported std is the
    population standard deviation of the per-run accuracies.
    """
    if n_resamples < 2:
        raise ValueError("need at least 2 resamples")
    runs = []
    for r in range(n_resamples):
        redraws = 0
        while True:
            run_seed = seed + 100000 * r + redraws
            rng = np.random.default_rng(run_seed)
            idx = rng.integers(0, train_ds.n, size=train_ds.n)
            labels = train_ds.labels[idx]
            if np.any(labels == 1.0) and np.any(labels == -1.0):
                break
            redraws += 1
            if redraws > 100:
                raise ValueError("could not draw a two-class bootstrap resample")
        model = _fit_config(subset(train_ds, idx), config)
        preds = predict_many(model, test_ds.features)
        acc = accuracy_metrics(preds, test_ds.labels).accuracy
        runs.append(StabilityRun(index=r, seed=run_seed, redraws=redraws, accuracy=acc))
    accs = np.array([run.accuracy for run in runs])
    return StabilityReport(runs=tuple(runs), mean=float(accs.mean()),
                           std=float(accs.std()))


def linear_weight_vector(m: TrainedModel) -> np.ndarray:
    """Primal weight vector of a linear-kernel model (bias part excluded)."""
    if m.kernel.kind is not KernelKind.LINEAR:
        raise ValueError("weight vectors are only defined for the linear kernel")
    if m.coeffs.size == 0:
        return np.zeros(m.d)
    return m.coeffs @ m.support_X


def _angle(w0: np.ndarray, w1: np.ndarray) -> float:
    n0 = float(np.linalg.norm(w0))
    n1 = float(np.linalg.norm(w1))
    if n0 < 1e-15 or n1 < 1e-15:
        return 0.0  # degenerate (near-zero) classifier: direction undefined
    cosine = float(w0 @ w1) / (n0 * n1)
    return math.acos(min(1.0, max(-1.0, cosine)))


def outlier_shift(ds: Dataset, outlier_x, outlier_label: float,
                  config_a: FitConfig, config_b: FitConfig) -> OutlierShiftReport:
    """How far one injected sample rotates the separating hyperplane.

    Trains each configuration on the data with and without the extra sample
    and reports the angle between the two primal weight vectors, plus the
    norm ratio with/without.  Linear kernels only.
    """
    for config in (config_a, config_b):
        if config.kernel.kind is not KernelKind.LINEAR:
            raise ValueError("outlier_shift supports the linear kernel only")
    polluted = append_sample(ds, outlier_x, outlier_label)
    results = []
    for config in (config_a, config_b):
        w_clean = linear_weight_vector(_fit_config(ds, config))
        w_out = linear_weight_vector(_fit_config(polluted, config))
        angle = _angle(w_clean, w_out)
        n_clean = float(np.linalg.norm(w_clean))
        n_out = float(np.linalg.norm(w_out))
        if n_clean < 1e-15:
            ratio = 1.0 if n_out < 1e-15 else math.inf
        else:
            ratio = n_out / n_clean
        results.append((angle, ratio))
    return OutlierShiftReport(angle_a=results[0][0], angle_b=results[1][0],
                              norm_ratio_a=results[0][1], norm_ratio_b=results[1][1])
