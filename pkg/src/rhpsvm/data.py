"""Dataset container, file parsers, standardization, splits and noise.

Datasets are dense: a float64 feature matrix with one row per sample and a
label vector whose entries are exactly -1.0 or +1.0.  All randomness is
driven by numpy's PCG64 generator (``numpy.random.default_rng``) seeded
explicitly, so every operation here is byte-reproducible for a fixed seed
within one build of the library.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dataset",
    "NoiseSpec",
    "ParseError",
    "StandardizeTransform",
    "parse_csv",
    "parse_libsvm",
    "dataset_to_csv",
    "standardize",
    "inject_label_noise",
    "stratified_kfold",
    "stratified_split",
    "synth_two_gaussians",
    "subset",
    "append_sample",
]


class ParseError(ValueError):
    """Malformed input file; carries the 1-based offending line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Dataset:
    """Dense feature matrix plus ±1 labels.  Immutable after construction."""

    features: np.ndarray
    labels: np.ndarray
    name: str | None = None

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels, dtype=float)
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise ValueError("features must be a nonempty 2-d matrix")
        if labels.shape != (features.shape[0],):
            raise ValueError("labels must be a vector with one entry per sample")
        if not np.all(np.isfinite(features)):
            raise ValueError("features must be finite")
        if not np.all(np.abs(labels) == 1.0):
            raise ValueError("labels must be exactly -1 or +1")
        features = features.copy()
        labels = labels.copy()
        features.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class NoiseSpec:
    """Label-flip request: flip exactly floor(rate * n) labels, seeded."""

    rate: float
    seed: int

    def __post_init__(self):
        if not (isinstance(self.rate, (int, float)) and 0.0 <= self.rate <= 0.5):
            raise ValueError(f"rate must lie in [0, 0.5], got {self.rate!r}")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            raise ValueError(f"seed must be a nonnegative integer, got {self.seed!r}")


def _parse_label(token: str, line_no: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(line_no, f"bad label {token!r}") from None
    if value not in (-1.0, 1.0):
        raise ParseError(line_no, f"label must be +1 or -1, got {token!r}")
    return value


def parse_csv(text: str, name: str | None = None) -> Dataset:
    """Parse comma-separated rows of features followed by a ±1 label.

    A non-numeric first row is treated as a header and skipped.  Blank lines
    are ignored.  Ragged rows, non-numeric or non-finite fields and labels
    outside {±1} raise :class:`ParseError` with the line number.
    """
    rows = []
    width = None
    first_data_row = True
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if first_data_row:
            first_data_row = False
            numeric = []
            for f in fields:
                try:
                    float(f)
                    numeric.append(True)
                except ValueError:
                    numeric.append(False)
            if not any(numeric):
                continue  # fully non-numeric first row: a header
        if len(fields) < 2:
            raise ParseError(line_no, "need at least one feature and a label")
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise ParseError(line_no, f"expected {width} fields, got {len(fields)}")
        values = []
        for f in fields[:-1]:
            try:
                v = float(f)
            except ValueError:
                raise ParseError(line_no, f"bad feature value {f!r}") from None
            if not math.isfinite(v):
                raise ParseError(line_no, f"non-finite feature value {f!r}")
            values.append(v)
        label = _parse_label(fields[-1], line_no)
        rows.append((values, label))
    if not rows:
        raise ParseError(1, "no data rows")
    features = np.array([r[0] for r in rows], dtype=float)
    labels = np.array([r[1] for r in rows], dtype=float)
    return Dataset(features=features, labels=labels, name=name)


def dataset_to_csv(ds: Dataset) -> str:
    """Serialize a dataset as headerless CSV with 17-significant-digit floats.

    parse_csv(dataset_to_csv(ds)) reproduces the dataset exactly.
    """
    lines = []
    for row, label in zip(ds.features, ds.labels):
        fields = [f"{v:.17g}" for v in row]
        fields.append(f"{int(label):d}")
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def parse_libsvm(text: str, dim: int | None = None, name: str | None = None) -> Dataset:
    """Parse sparse ``label idx:val ...`` rows into a dense dataset.

    Indices are 1-based and must be strictly increasing within a row.
    Unspecified entries are zero.  The feature dimension is the largest index
    seen, or ``dim`` when given (indices beyond it are an error).
    """
    rows = []
    max_index = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        label = _parse_label(tokens[0], line_no)
        entries = []
        prev = 0
        for token in tokens[1:]:
            try:
                idx_str, val_str = token.split(":", 1)
                idx = int(idx_str)
                val = float(val_str)
            except ValueError:
                raise ParseError(line_no, f"bad feature entry {token!r}") from None
            if idx < 1:
                raise ParseError(line_no, f"feature index must be >= 1, got {idx}")
            if idx <= prev:
                raise ParseError(line_no, f"feature indices must be strictly increasing, got {idx} after {prev}")
            if not math.isfinite(val):
                raise ParseError(line_no, f"non-finite feature value {val_str!r}")
            prev = idx
            entries.append((idx, val))
            max_index = max(max_index, idx)
        rows.append((label, entries, line_no))
    if not rows:
        raise ParseError(1, "no data rows")
    d = dim if dim is not None else max_index
    if d < 1:
        raise ParseError(1, "cannot infer a positive feature dimension")
    features = np.zeros((len(rows), d))
    labels = np.empty(len(rows))
    for i, (label, entries, line_no) in enumerate(rows):
        for idx, val in entries:
            if idx > d:
                raise ParseError(line_no, f"feature index {idx} exceeds dimension {d}")
            features[i, idx - 1] = val
        labels[i] = label
    return Dataset(features=features, labels=labels, name=name)


@dataclass(frozen=True)
class StandardizeTransform:
    """Per-feature affine map x -> (x - mu) / sigma fitted on training data."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).copy()
        sigma = np.asarray(self.sigma, dtype=float).copy()
        mu.flags.writeable = False
        sigma.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    def apply(self, ds: Dataset) -> Dataset:
        if ds.d != self.mu.shape[0]:
            raise ValueError("dimension mismatch between transform and dataset")
        return Dataset(features=(ds.features - self.mu) / self.sigma,
                       labels=ds.labels, name=ds.name)

    def apply_features(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return (X - self.mu) / self.sigma


def standardize(ds: Dataset) -> tuple[Dataset, StandardizeTransform]:
    """Center every feature and scale it to unit population std.

    Features with std below 1e-12 are only centered; their recorded sigma is
    1 so the transform stays invertible and reusable on test data.
    """
    if ds.n < 2:
        raise ValueError("standardize needs at least 2 samples")
    mu = ds.features.mean(axis=0)
    sigma = ds.features.std(axis=0)
    sigma = np.where(sigma < 1e-12, 1.0, sigma)
    transform = StandardizeTransform(mu=mu, sigma=sigma)
    return transform.apply(ds), transform


def inject_label_noise(ds: Dataset, spec: NoiseSpec) -> Dataset:
    """Flip exactly floor(rate * n) labels, chosen without replacement.

    The flipped index set depends only on (n, seed), so applying the same
    spec twice restores the original labels.
    """
    k = int(math.floor(spec.rate * ds.n))
    labels = ds.labels.copy()
    if k > 0:
        rng = np.random.default_rng(spec.seed)
        idx = rng.choice(ds.n, size=k, replace=False)
        labels[idx] = -labels[idx]
    return Dataset(features=ds.features, labels=labels, name=ds.name)


def stratified_kfold(ds: Dataset, k: int, seed: int):
    """Deterministic stratified k-fold split.

    Returns a list of (train_indices, test_indices) pairs.  Per-class test
    counts across folds differ by at most one.  Requires both classes present
    with at least k members each.
    """
    if not (2 <= k <= ds.n):
        raise ValueError(f"k must lie in [2, n], got {k}")
    rng = np.random.default_rng(seed)
    fold_members = [[] for _ in range(k)]
    classes = (1.0, -1.0)
    for cls in classes:
        idx = np.flatnonzero(ds.labels == cls)
        if idx.size == 0:
            raise ValueError("both classes must be present")
        if idx.size < k:
            raise ValueError(f"class {cls:+.0f} has {idx.size} members, fewer than k={k}")
        perm = rng.permutation(idx)
        for f in range(k):
            fold_members[f].extend(perm[f::k].tolist())
    folds = []
    all_idx = np.arange(ds.n)
    for f in range(k):
        test = np.array(sorted(fold_members[f]), dtype=int)
        mask = np.ones(ds.n, dtype=bool)
        mask[test] = False
        folds.append((all_idx[mask], test))
    return folds


def stratified_split(ds: Dataset, test_fraction: float, seed: int):
    """Deterministic stratified train/test split by fraction."""
    if not (0.0 < test_fraction < 1.0):
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    test_idx = []
    for cls in (1.0, -1.0):
        idx = np.flatnonzero(ds.labels == cls)
        if idx.size == 0:
            raise ValueError("both classes must be present")
        n_test = int(math.floor(test_fraction * idx.size))
        perm = rng.permutation(idx)
        test_idx.extend(perm[:n_test].tolist())
    test = np.array(sorted(test_idx), dtype=int)
    mask = np.ones(ds.n, dtype=bool)
    mask[test] = False
    train = np.arange(ds.n)[mask]
    if train.size == 0 or test.size == 0:
        raise ValueError("split produced an empty train or test set")
    return subset(ds, train), subset(ds, test)


def synth_two_gaussians(n: int, d: int, separation: float, sigma: float, seed: int) -> Dataset:
    """Two isotropic Gaussian blobs with means ±(separation/2)/sqrt(d)*(1,..,1).

    The first n/2 rows carry label +1, the rest -1.  Deterministic per seed.
    """
    if n < 2 or n % 2 != 0:
        raise ValueError(f"n must be a positive even integer, got {n}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if not (isinstance(sigma, (int, float)) and sigma > 0):
        raise ValueError(f"sigma must be > 0, got {sigma!r}")
    rng = np.random.default_rng(seed)
    mean = (separation / 2.0) / math.sqrt(d) * np.ones(d)
    half = n // 2
    pos = mean + sigma * rng.standard_normal((half, d))
    neg = -mean + sigma * rng.standard_normal((half, d))
    features = np.vstack([pos, neg])
    labels = np.concatenate([np.ones(half), -np.ones(half)])
    return Dataset(features=features, labels=labels, name=f"two_gaussians(n={n},d={d},seed={seed})")


def subset(ds: Dataset, indices) -> Dataset:
    indices = np.asarray(indices, dtype=int)
    return Dataset(features=ds.features[indices], labels=ds.labels[indices], name=ds.name)


def append_sample(ds: Dataset, x, label: float) -> Dataset:
    """Return a new dataset with one extra sample appended."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    if x.shape[1] != ds.d:
        raise ValueError("appended sample has wrong dimension")
    return Dataset(features=np.vstack([ds.features, x]),
                   labels=np.concatenate([ds.labels, [float(label)]]),
                   name=ds.name)
