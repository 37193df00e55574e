"""Dataset ingestion, preprocessing, splitting, and synthetic benchmarks."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .rng import RngState


class DataError(ValueError):
    """Malformed input data; the message carries the file location."""


@dataclass
class Dataset:
    """Samples as rows, integer class labels, and optional feature names."""

    X: np.ndarray
    y: np.ndarray
    n_classes: int
    label_names: list[str]
    feature_names: list[str] | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.intp)
        if self.X.ndim != 2:
            raise DataError(f"sample matrix must be 2-D, got shape {self.X.shape}")
        n, d = self.X.shape
        if self.y.shape != (n,):
            raise DataError(f"labels must have length {n}, got shape {self.y.shape}")
        if not np.isfinite(self.X).all():
            bad = np.argwhere(~np.isfinite(self.X))[0]
            raise DataError(f"non-finite value at row {bad[0]}, column {bad[1]}")
        if self.n_classes < 2:
            raise DataError(f"need at least 2 classes, got {self.n_classes}")
        present = np.unique(self.y)
        if present.size and (present[0] < 0 or present[-1] >= self.n_classes):
            raise DataError(
                f"labels must lie in 0..{self.n_classes - 1}, found {present[0]}..{present[-1]}"
            )
        if present.size != self.n_classes:
            missing = sorted(set(range(self.n_classes)) - set(present.tolist()))
            raise DataError(f"classes {missing} have no samples")
        if len(self.label_names) != self.n_classes:
            raise DataError("label_names must have one entry per class")
        if self.feature_names is not None and len(self.feature_names) != d:
            raise DataError(f"expected {d} feature names, got {len(self.feature_names)}")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(
            self.X[indices].copy(),
            self.y[indices].copy(),
            self.n_classes,
            list(self.label_names),
            list(self.feature_names) if self.feature_names is not None else None,
        )


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")


@dataclass(frozen=True)
class Standardizer:
    """Per-feature affine transform fit on training data.

    apply() is not idempotent: it always subtracts `mean` and divides by
    `scale`, so transforming already-transformed data shifts it again.
    """

    mean: np.ndarray
    scale: np.ndarray  # std with zero-variance features mapped to 1

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale


def load_delimited(
    path: str,
    delimiter: str = ",",
    header: bool = True,
    label_col: int = -1,
) -> Dataset:
    """Parse a delimited text table into a Dataset.

    Lines starting with '#' and blank lines are skipped. Label strings are
    mapped to integer codes in order of first appearance. Any ragged row or
    non-numeric feature cell raises DataError naming the offending location.
    """
    rows: list[tuple[int, list[str]]] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            rows.append((lineno, next(csv.reader([line], delimiter=delimiter))))
    if not rows:
        raise DataError(f"{path}: no data rows")

    feature_names: list[str] | None = None
    if header:
        header_line, header_cells = rows.pop(0)
        if not rows:
            raise DataError(f"{path}: header only, no data rows")
        width = len(header_cells)
    else:
        width = len(rows[0][1])

    if not -width <= label_col < width:
        raise DataError(f"{path}: label column {label_col} outside row width {width}")
    label_idx = label_col % width
    if header:
        feature_names = [c for i, c in enumerate(header_cells) if i != label_idx]

    n, d = len(rows), width - 1
    if d < 1:
        raise DataError(f"{path}: rows must have at least one feature column")
    X = np.empty((n, d))
    codes: dict[str, int] = {}
    y = np.empty(n, dtype=np.intp)
    for r, (lineno, cells) in enumerate(rows):
        if len(cells) != width:
            raise DataError(
                f"{path}: line {lineno}: expected {width} fields, found {len(cells)}"
            )
        label = cells[label_idx].strip()
        if not label:
            raise DataError(f"{path}: line {lineno}: missing label")
        y[r] = codes.setdefault(label, len(codes))
        c = 0
        for i, cell in enumerate(cells):
            if i == label_idx:
                continue
            try:
                X[r, c] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: line {lineno}, column {i + 1}: non-numeric value {cell!r}"
                ) from None
            c += 1
    label_names = [name for name, _ in sorted(codes.items(), key=lambda kv: kv[1])]
    return Dataset(X, y, len(codes), label_names, feature_names)


def save_delimited(
    dataset: Dataset,
    path: str,
    delimiter: str = ",",
    comments: list[str] | None = None,
) -> None:
    """Write a Dataset as delimited text (floats keep full precision)."""
    names = dataset.feature_names or [f"x{j}" for j in range(dataset.n_features)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for comment in comments or []:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow([*names, "label"])
        for i in range(dataset.n_samples):
            row = [repr(float(v)) for v in dataset.X[i]]
            row.append(dataset.label_names[dataset.y[i]])
            writer.writerow(row)


def standardize(
    train: Dataset, test: Dataset | None = None
) -> tuple[Dataset, Dataset | None, Standardizer]:
    """Z-score both splits using training statistics only.

    Zero-variance features map to exactly 0 in both splits.
    """
    mean = train.X.mean(axis=0)
    std = train.X.std(axis=0)
    scale = np.where(std > 0.0, std, 1.0)
    transform = Standardizer(mean, scale)
    train_out = replace(train, X=transform.apply(train.X))
    test_out = replace(test, X=transform.apply(test.X)) if test is not None else None
    return train_out, test_out, transform


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Deterministic train/test split; stratified splits keep class proportions
    via largest-remainder rounding while leaving every class nonempty on both
    sides."""
    n = dataset.n_samples
    rng = RngState(spec.seed)
    if not spec.stratified:
        perm = rng.permutation(n)
        n_train = int(round(spec.train_fraction * n))
        if n_train < 1 or n_train >= n:
            raise DataError(f"fraction {spec.train_fraction} leaves an empty split for n={n}")
        train_idx = np.sort(perm[:n_train])
        test_idx = np.sort(perm[n_train:])
        return dataset.subset(train_idx), dataset.subset(test_idx)

    class_indices = [np.flatnonzero(dataset.y == c) for c in range(dataset.n_classes)]
    counts = np.array([idx.size for idx in class_indices])
    if counts.min() < 2:
        tiny = int(np.argmin(counts))
        raise DataError(
            f"class {dataset.label_names[tiny]!r} has {counts.min()} sample(s);"
            " stratified splitting needs at least 2 per class"
        )
    quotas = spec.train_fraction * counts
    take = np.floor(quotas).astype(int)
    target = int(round(spec.train_fraction * n))
    leftovers = sorted(
        range(dataset.n_classes), key=lambda c: (-(quotas[c] - take[c]), c)
    )
    for c in leftovers:
        if take.sum() >= target:
            break
        take[c] += 1
    take = np.clip(take, 1, counts - 1)

    train_parts, test_parts = [], []
    for c, idx in enumerate(class_indices):
        perm = rng.permutation(idx.size)
        train_parts.append(idx[perm[: take[c]]])
        test_parts.append(idx[perm[take[c] :]])
    train_idx = np.sort(np.concatenate(train_parts))
    test_idx = np.sort(np.concatenate(test_parts))
    return dataset.subset(train_idx), dataset.subset(test_idx)


def make_synthetic(
    n: int, d: int, n_informative: int, seed: int
) -> tuple[Dataset, list[int]]:
    """Gaussian features with a planted nonlinear binary concept.

    The label is 1 when sum over planted features of sin(x) + x^2 exceeds its
    sample median, which keeps the classes balanced to within one sample.
    Returns the dataset and the sorted planted feature indices.
    """
    if n_informative > d:
        raise ValueError(f"cannot plant {n_informative} features in {d}")
    if n < 2:
        raise ValueError("need at least 2 samples")
    rng = RngState(seed)
    X = rng.normal((n, d))
    planted = sorted(int(j) for j in rng.permutation(d)[:n_informative])
    sub = X[:, planted]
    score = np.sin(sub).sum(axis=1) + (sub**2).sum(axis=1)
    y = (score > np.median(score)).astype(np.intp)
    feature_names = [f"f{j}" for j in range(d)]
    return Dataset(X, y, 2, ["0", "1"], feature_names), planted
