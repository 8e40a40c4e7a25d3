"""CSV ingestion and the preprocessing pipeline.

The pipeline follows the intrusion-detection setup: numeric features
only, constant features removed, the training set drawn from the normal
class by trimming extreme rows and then systematic (or seeded random)
sampling, standardization fit on the training normals and applied
everywhere, and an optional rank-based quantile transform to uniform
[0, 1] fitted on the same rows. Trimming precedes scaling; the split
manifest records enough (selected indices, scaler parameters, counts)
to reproduce a split exactly.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from .errors import DataError

logger = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class LabelSchema:
    """How to read the label column: which values mean attack/normal.

    Give either set (the complement becomes the other class) or both
    (any value outside their union is then an error).
    """

    label_column: str
    attack_labels: Optional[frozenset] = None
    normal_labels: Optional[frozenset] = None
    drop_non_numeric: bool = True

    def __post_init__(self):
        if self.attack_labels is None and self.normal_labels is None:
            raise DataError("schema needs attack_labels and/or normal_labels")
        for name in ("attack_labels", "normal_labels"):
            values = getattr(self, name)
            if values is not None:
                object.__setattr__(self, name, frozenset(str(v) for v in values))


@dataclass(frozen=True)
class RawTable:
    """Numeric feature table with binary labels (0 normal, 1 attack)."""

    features: pd.DataFrame
    labels: np.ndarray
    dataset_name: str

    def __post_init__(self):
        if len(self.features) == 0:
            raise DataError("table has no rows")
        if self.features.shape[1] == 0:
            raise DataError("table has no usable feature columns")
        if len(self.labels) != len(self.features):
            raise DataError("label count does not match row count")

    @property
    def feature_names(self) -> tuple:
        return tuple(self.features.columns)

    def constant_columns(self) -> tuple:
        """Features with variance below the floor, flagged for removal."""
        var = self.features.var(axis=0, ddof=0)
        return tuple(var.index[var.values < VARIANCE_FLOOR])


@dataclass(frozen=True)
class SplitSpec:
    """Requested split sizes and the sampling recipe for the train set."""

    train_normals: int
    val_normals: int = 0
    val_attacks: int = 0
    test_normals: int = 0
    test_attacks: int = 0
    sampling: str = "systematic"
    trim_fraction: float = 0.01
    quantile_bins: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.train_normals < 1:
            raise DataError("train_normals must be >= 1")
        for name in ("val_normals", "val_attacks", "test_normals", "test_attacks"):
            if getattr(self, name) < 0:
                raise DataError(f"{name} must be non-negative")
        if self.sampling not in ("systematic", "random"):
            raise DataError(f"sampling must be 'systematic' or 'random', got {self.sampling!r}")
        if not 0.0 <= self.trim_fraction < 0.5:
            raise DataError("trim_fraction must be in [0, 0.5)")
        if self.quantile_bins is not None and self.quantile_bins < 2:
            raise DataError("quantile_bins must be >= 2")


@dataclass(frozen=True)
class Scaler:
    """Per-feature standardization parameters (population convention)."""

    mean: np.ndarray
    std: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.std


@dataclass(frozen=True)
class DataMatrix:
    """Standardized matrix with provenance metadata and optional labels."""

    values: np.ndarray
    feature_names: tuple
    dataset_name: str
    role: str
    labels: Optional[np.ndarray] = None

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    @property
    def shape(self) -> tuple:
        return self.values.shape


@dataclass(frozen=True)
class PreprocessResult:
    train: DataMatrix
    validation: DataMatrix
    test: DataMatrix
    scaler: Scaler
    manifest: dict


def load_dataset(path, schema: LabelSchema, dataset_name: Optional[str] = None) -> RawTable:
    """Read a delimited file with header into a RawTable.

    Non-numeric feature columns are dropped (or rejected when the schema
    says so); rows with missing values in the surviving columns are
    dropped; label values are mapped to {normal, attack} per the schema.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    frame = pd.read_csv(path)
    if schema.label_column not in frame.columns:
        raise DataError(f"label column {schema.label_column!r} not in {list(frame.columns)}")
    raw_labels = frame[schema.label_column].astype(str).str.strip()
    features = frame.drop(columns=[schema.label_column])

    numeric = {}
    dropped = []
    for column in features.columns:
        coerced = pd.to_numeric(features[column], errors="coerce")
        if coerced.isna().all():
            dropped.append(column)
        else:
            numeric[column] = coerced
    if dropped:
        if not schema.drop_non_numeric:
            raise DataError(f"non-numeric feature columns: {dropped}")
        logger.info("dropping %d non-numeric columns: %s", len(dropped), dropped)
    if not numeric:
        raise DataError("no usable numeric feature columns")
    features = pd.DataFrame(numeric)

    keep = ~features.isna().any(axis=1)
    n_dropped_rows = int((~keep).sum())
    if n_dropped_rows:
        logger.info("dropping %d rows with missing values", n_dropped_rows)
        features = features.loc[keep]
        raw_labels = raw_labels.loc[keep]
    if len(features) == 0:
        raise DataError("no rows left after dropping missing values")

    labels = _map_labels(raw_labels, schema)
    return RawTable(
        features=features.reset_index(drop=True),
        labels=labels,
        dataset_name=dataset_name or path.stem,
    )


def _map_labels(raw: pd.Series, schema: LabelSchema) -> np.ndarray:
    values = raw.to_numpy()
    if schema.attack_labels is not None and schema.normal_labels is not None:
        known = schema.attack_labels | schema.normal_labels
        unknown = sorted(set(values) - known)
        if unknown:
            raise DataError(f"unknown label values: {unknown}")
        return np.isin(values, sorted(schema.attack_labels)).astype(int)
    if schema.attack_labels is not None:
        return np.isin(values, sorted(schema.attack_labels)).astype(int)
    return (~np.isin(values, sorted(schema.normal_labels))).astype(int)


def _trim_indices(X: np.ndarray, fraction: float) -> np.ndarray:
    """Rows inside the per-feature two-sided percentile band."""
    if fraction == 0.0:
        return np.arange(X.shape[0])
    lo = np.quantile(X, fraction, axis=0)
    hi = np.quantile(X, 1.0 - fraction, axis=0)
    keep = np.all((X >= lo) & (X <= hi), axis=1)
    return np.flatnonzero(keep)


def _sample_training(pool_size: int, spec: SplitSpec) -> np.ndarray:
    if pool_size < spec.train_normals:
        raise DataError(
            f"trimmed normal pool has {pool_size} rows, {spec.train_normals} requested"
        )
    if spec.sampling == "systematic":
        stride = pool_size // spec.train_normals
        return np.arange(spec.train_normals) * stride
    rng = np.random.default_rng(spec.seed)
    return np.sort(rng.choice(pool_size, size=spec.train_normals, replace=False))


class _QuantileMap:
    """Rank-based map of each feature to uniform [0, 1] on Q quantiles."""

    def __init__(self, X: np.ndarray, bins: int):
        grid = np.linspace(0.0, 1.0, bins)
        self.grid = grid
        self.quantiles = np.quantile(X, grid, axis=0)

    def transform(self, X: np.ndarray) -> np.ndarray:
        out = np.empty_like(X, dtype=float)
        for j in range(X.shape[1]):
            out[:, j] = np.interp(X[:, j], self.quantiles[:, j], self.grid)
        return out


def preprocess(table: RawTable, spec: SplitSpec) -> PreprocessResult:
    """Trim, sample, optionally quantile-map, and standardize the splits.

    Validation and test rows are taken in pool order from the rows not
    selected for training (trimmed-away outliers stay eligible: only the
    training set is sanitized).
    """
    X_all = table.features.to_numpy(dtype=float)
    names = np.array(table.feature_names)
    labels = np.asarray(table.labels)

    constant = np.var(X_all, axis=0) < VARIANCE_FLOOR
    if constant.all():
        raise DataError("all features are constant")
    removed_constant = [str(n) for n in names[constant]]
    if removed_constant:
        logger.info("removing %d constant features: %s", len(removed_constant), removed_constant)
    X_all = X_all[:, ~constant]
    names = names[~constant]

    normal_rows = np.flatnonzero(labels == 0)
    attack_rows = np.flatnonzero(labels == 1)
    if normal_rows.size < spec.train_normals:
        raise DataError(
            f"{normal_rows.size} normal rows available, {spec.train_normals} requested for training"
        )

    kept = _trim_indices(X_all[normal_rows], spec.trim_fraction)
    trimmed_pool = normal_rows[kept]
    train_rows = trimmed_pool[_sample_training(trimmed_pool.size, spec)]

    rest_normals = normal_rows[~np.isin(normal_rows, train_rows)]
    if rest_normals.size < spec.val_normals + spec.test_normals:
        raise DataError(
            f"{rest_normals.size} normal rows left for validation/test, "
            f"{spec.val_normals + spec.test_normals} requested"
        )
    if attack_rows.size < spec.val_attacks + spec.test_attacks:
        raise DataError(
            f"{attack_rows.size} attack rows available, "
            f"{spec.val_attacks + spec.test_attacks} requested"
        )
    val_n = rest_normals[: spec.val_normals]
    test_n = rest_normals[spec.val_normals : spec.val_normals + spec.test_normals]
    val_a = attack_rows[: spec.val_attacks]
    test_a = attack_rows[spec.val_attacks : spec.val_attacks + spec.test_attacks]

    X_train = X_all[train_rows]
    quantile_map = None
    if spec.quantile_bins is not None:
        quantile_map = _QuantileMap(X_train, spec.quantile_bins)
        X_train = quantile_map.transform(X_train)

    std = X_train.std(axis=0)
    degenerate = std < VARIANCE_FLOOR
    if degenerate.all():
        raise DataError("all features are constant on the training sample")
    if degenerate.any():
        logger.info(
            "removing %d features degenerate on the training sample: %s",
            int(degenerate.sum()),
            [str(n) for n in names[degenerate]],
        )

    def finalize(rows: np.ndarray, role: str, with_labels: bool) -> DataMatrix:
        X = X_all[rows]
        if quantile_map is not None:
            X = quantile_map.transform(X)
        X = scaler.transform(X[:, ~degenerate])
        return DataMatrix(
            values=X,
            feature_names=tuple(str(n) for n in names[~degenerate]),
            dataset_name=table.dataset_name,
            role=role,
            labels=labels[rows].copy() if with_labels else None,
        )

    scaler = Scaler(
        mean=X_train[:, ~degenerate].mean(axis=0), std=std[~degenerate]
    )
    train = DataMatrix(
        values=scaler.transform(X_train[:, ~degenerate]),
        feature_names=tuple(str(n) for n in names[~degenerate]),
        dataset_name=table.dataset_name,
        role="train",
        labels=None,
    )
    validation = finalize(np.concatenate([val_n, val_a]), "validation", True)
    test = finalize(np.concatenate([test_n, test_a]), "test", True)

    manifest = {
        "dataset": table.dataset_name,
        "features_kept": list(train.feature_names),
        "features_removed_constant": removed_constant,
        "features_removed_degenerate": [str(n) for n in names[degenerate]],
        "trim_fraction": spec.trim_fraction,
        "trimmed_pool_size": int(trimmed_pool.size),
        "sampling": spec.sampling,
        "seed": spec.seed,
        "quantile_bins": spec.quantile_bins,
        "train_indices": [int(i) for i in train_rows],
        "counts": {
            "train_normals": int(train_rows.size),
            "val_normals": int(val_n.size),
            "val_attacks": int(val_a.size),
            "test_normals": int(test_n.size),
            "test_attacks": int(test_a.size),
        },
        "scaler_mean": [float(m) for m in scaler.mean],
        "scaler_std": [float(s) for s in scaler.std],
    }
    return PreprocessResult(train, validation, test, scaler, manifest)


def class_counts(split: DataMatrix) -> tuple:
    """(normals, attacks) of a labeled split."""
    if split.labels is None or len(split.labels) == 0:
        raise DataError("split has no labels")
    labels = np.asarray(split.labels)
    normals = int(np.sum(labels == 0))
    attacks = int(np.sum(labels == 1))
    return normals, attacks
