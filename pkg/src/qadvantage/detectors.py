"""Anomaly detectors over PCA models: PCC, Ensemble PCC, reconstruction.

All three consume a ``PCAModel`` without caring whether it came from the
exact SVD or from the noisy extraction path, so classical and quantum
pipelines differ only in the model they pass in. The PCC statistic T1
sums (e_i^T z)^2 / lambda_i over the first k components, T2 the same
over the last q; a sample is an attack when a statistic strictly
exceeds its calibrated threshold. Thresholds come from the empirical
(1 - alpha) quantile of validation-normal scores (nearest-rank, upper),
so raising alpha can only lower thresholds and grow the flagged set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .errors import ConfigError, DataError, InfeasibleError
from .pca import NUMERICAL_ZERO_FRACTION, PCAModel, project_reconstruct

PCC_MODES = ("major_only", "major_minor")

# score layout shared by ensemble_scores and EnsembleModel.thresholds
ENSEMBLE_CRITERIA = (
    "dot_major",
    "dot_minor",
    "cosine_major",
    "cosine_minor",
    "correlation_major",
    "correlation_minor",
)


@dataclass(frozen=True)
class PccModel:
    """Principal component classifier: majors-only or majors OR minors."""

    model: PCAModel
    k: int
    alpha: float
    q: int = 0
    mode: str = "major_only"
    c1: Optional[float] = None
    c2: Optional[float] = None

    def __post_init__(self):
        if self.mode not in PCC_MODES:
            raise ConfigError(f"mode must be one of {PCC_MODES}, got {self.mode!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        r = self.model.rank
        if not 1 <= self.k <= r:
            raise ConfigError(f"k={self.k} outside [1, {r}]")
        if self.mode == "major_minor":
            if not 1 <= self.q <= r - self.k:
                raise ConfigError(
                    f"q={self.q} must leave majors and minors disjoint (rank {r}, k={self.k})"
                )
        for name in ("c1", "c2"):
            value = getattr(self, name)
            if value is not None and not math.isfinite(value):
                raise ConfigError(f"{name} must be finite")

    @property
    def calibrated(self) -> bool:
        if self.c1 is None:
            return False
        return self.mode == "major_only" or self.c2 is not None


@dataclass(frozen=True)
class EnsembleModel:
    """Six-criterion OR classifier: {dot, cosine, correlation} x {major, minor}."""

    model: PCAModel
    k: int
    q: int
    alpha: float
    thresholds: Optional[np.ndarray] = None  # ENSEMBLE_CRITERIA order

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        r = self.model.rank
        if not 1 <= self.k <= r:
            raise ConfigError(f"k={self.k} outside [1, {r}]")
        if not 1 <= self.q <= r - self.k:
            raise ConfigError(f"q={self.q} must leave majors and minors disjoint")
        if self.thresholds is not None:
            t = np.asarray(self.thresholds, dtype=float)
            if t.shape != (6,) or not np.all(np.isfinite(t)):
                raise ConfigError("thresholds must be six finite values")
            object.__setattr__(self, "thresholds", t)

    @property
    def calibrated(self) -> bool:
        return self.thresholds is not None


@dataclass(frozen=True)
class ReconModel:
    """Reconstruction-loss detector: attack iff SSE onto top-k exceeds t."""

    model: PCAModel
    k: int
    t: Optional[float] = None

    def __post_init__(self):
        if not 1 <= self.k <= self.model.rank:
            raise ConfigError(f"k={self.k} outside [1, {self.model.rank}]")
        if self.t is not None and not (math.isfinite(self.t) and self.t > 0):
            raise ConfigError(f"outlier threshold must be finite and positive, got {self.t}")

    @property
    def calibrated(self) -> bool:
        return self.t is not None


def _as_batch(z) -> tuple:
    Z = np.asarray(z, dtype=float)
    single = Z.ndim == 1
    return np.atleast_2d(Z), single


def _floor_guard(model: PCAModel, indices: np.ndarray) -> None:
    # lambda at or below the numerical-zero floor makes 1/lambda meaningless
    lam = model.eigenvalues
    floor = (NUMERICAL_ZERO_FRACTION * float(model.singular_values[0])) ** 2
    bad = np.flatnonzero(lam[indices] <= floor)
    if bad.size:
        raise InfeasibleError(
            f"selected components {indices[bad].tolist()} have eigenvalues at the "
            "numerical-zero floor; selection is ill-conditioned for 1/lambda statistics"
        )


def _chi2_sums(Y: np.ndarray, lam: np.ndarray) -> np.ndarray:
    return np.sum(Y * Y / lam, axis=1)


def pcc_scores(z, detector: PccModel):
    """(T1, T2) per sample; T2 is 0 in major_only mode."""
    Z, single = _as_batch(z)
    model = detector.model
    if Z.shape[1] != model.dim:
        raise DataError(f"sample dim {Z.shape[1]} != model dim {model.dim}")
    majors = np.arange(detector.k)
    _floor_guard(model, majors)
    Y = Z @ model.components.T
    T1 = _chi2_sums(Y[:, majors], model.eigenvalues[majors])
    if detector.mode == "major_minor":
        minors = np.arange(model.rank - detector.q, model.rank)
        _floor_guard(model, minors)
        T2 = _chi2_sums(Y[:, minors], model.eigenvalues[minors])
    else:
        T2 = np.zeros_like(T1)
    if single:
        return float(T1[0]), float(T2[0])
    return T1, T2


def ensemble_scores(z, detector: EnsembleModel):
    """Six per-sample sums in ENSEMBLE_CRITERIA order.

    dot uses y_i = e_i^T z, cosine divides by both norms, correlation is
    the Pearson correlation of e_i and z read as d-length sequences; the
    major sums run over the first k components, the minor sums over the
    last q, each y_i^2 weighted by 1/lambda_i.
    """
    Z, single = _as_batch(z)
    model = detector.model
    if Z.shape[1] != model.dim:
        raise DataError(f"sample dim {Z.shape[1]} != model dim {model.dim}")
    majors = np.arange(detector.k)
    minors = np.arange(model.rank - detector.q, model.rank)
    _floor_guard(model, majors)
    _floor_guard(model, minors)

    E = model.components
    z_norm = np.linalg.norm(Z, axis=1)
    if np.any(z_norm == 0.0):
        raise DataError("zero vector has no cosine or correlation scores")
    Zc = Z - Z.mean(axis=1, keepdims=True)
    zc_norm = np.linalg.norm(Zc, axis=1)
    if np.any(zc_norm == 0.0):
        raise DataError("constant vector has undefined correlation scores")
    Ec = E - E.mean(axis=1, keepdims=True)
    e_norm = np.linalg.norm(E, axis=1)
    ec_norm = np.linalg.norm(Ec, axis=1)
    if np.any(e_norm == 0.0) or np.any(ec_norm == 0.0):
        raise DataError("degenerate component vector in the model")

    Y_dot = Z @ E.T
    Y_cos = Y_dot / (e_norm[None, :] * z_norm[:, None])
    Y_cor = (Zc @ Ec.T) / (ec_norm[None, :] * zc_norm[:, None])

    lam = model.eigenvalues
    scores = np.column_stack(
        [
            _chi2_sums(Y_dot[:, majors], lam[majors]),
            _chi2_sums(Y_dot[:, minors], lam[minors]),
            _chi2_sums(Y_cos[:, majors], lam[majors]),
            _chi2_sums(Y_cos[:, minors], lam[minors]),
            _chi2_sums(Y_cor[:, majors], lam[majors]),
            _chi2_sums(Y_cor[:, minors], lam[minors]),
        ]
    )
    return scores[0] if single else scores


def recon_scores(z, detector: ReconModel):
    """Sum of squared reconstruction error onto the top-k subspace."""
    _, _, sse = project_reconstruct(z, detector.model, detector.k)
    return sse


def calibrate_thresholds(scores, alpha: float) -> float:
    """Nearest-rank upper (1 - alpha) quantile of validation-normal scores.

    c = ascending_scores[ceil((1 - alpha) * N)] (1-based), so the
    fraction of calibration scores strictly above c is at most alpha and
    thresholds are non-increasing in alpha.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")
    values = np.sort(np.asarray(scores, dtype=float).ravel())
    if values.size == 0:
        raise DataError("cannot calibrate on an empty score sequence")
    index = math.ceil((1.0 - alpha) * values.size) - 1
    return float(values[min(max(index, 0), values.size - 1)])


def calibrate_pcc(detector: PccModel, validation_normals) -> PccModel:
    """New PccModel with c1 (and c2 when used) from validation normals."""
    X = np.atleast_2d(np.asarray(validation_normals, dtype=float))
    T1, T2 = pcc_scores(X, detector)
    c1 = calibrate_thresholds(T1, detector.alpha)
    c2 = detector.c2
    if detector.mode == "major_minor":
        c2 = calibrate_thresholds(T2, detector.alpha)
    return replace(detector, c1=c1, c2=c2)


def calibrate_ensemble(detector: EnsembleModel, validation_normals) -> EnsembleModel:
    """All six thresholds from the same validation normals at the same alpha."""
    X = np.atleast_2d(np.asarray(validation_normals, dtype=float))
    scores = ensemble_scores(X, detector)
    thresholds = np.array(
        [calibrate_thresholds(scores[:, j], detector.alpha) for j in range(6)]
    )
    return replace(detector, thresholds=thresholds)


def tune_recon_threshold(detector: ReconModel, validation, labels) -> ReconModel:
    """Pick t from the observed validation scores by maximizing F1.

    Candidates are the distinct validation scores; ties in F1 go to the
    larger threshold (fewer false positives).
    """
    scores = np.asarray(recon_scores(validation, detector), dtype=float).ravel()
    y = np.asarray(labels)
    if scores.shape != y.shape:
        raise DataError("scores and labels must align")
    if not np.any(y == 1):
        raise DataError("threshold tuning needs attack rows in validation")
    best_t, best_f1 = None, -1.0
    for t in np.unique(scores):
        if t <= 0:
            continue
        metrics = evaluate((scores > t).astype(int), y)
        if metrics.f1 >= best_f1:
            best_t, best_f1 = float(t), metrics.f1
    if best_t is None:
        raise DataError("no positive score available as a threshold")
    return replace(detector, t=best_t)


Detector = Union[PccModel, EnsembleModel, ReconModel]


def classify(z, detector: Detector):
    """0/1 attack labels; strict inequality, so score == threshold is normal."""
    if isinstance(detector, PccModel):
        if not detector.calibrated:
            raise ConfigError("PCC model is not calibrated")
        T1, T2 = pcc_scores(z, detector)
        flags = np.asarray(T1) > detector.c1
        if detector.mode == "major_minor":
            flags = flags | (np.asarray(T2) > detector.c2)
    elif isinstance(detector, EnsembleModel):
        if not detector.calibrated:
            raise ConfigError("ensemble model is not calibrated")
        scores = ensemble_scores(z, detector)
        flags = np.any(np.atleast_2d(scores) > detector.thresholds, axis=1)
        if np.asarray(z).ndim == 1:
            flags = flags[0]
    elif isinstance(detector, ReconModel):
        if not detector.calibrated:
            raise ConfigError("reconstruction model is not calibrated")
        flags = np.asarray(recon_scores(z, detector)) > detector.t
    else:
        raise ConfigError(f"unknown detector type {type(detector).__name__}")
    if np.ndim(flags) == 0:
        return int(flags)
    return flags.astype(int)


@dataclass(frozen=True)
class EvalMetrics:
    """Binary metrics in percent, attack = positive class."""

    recall: float
    precision: float
    f1: float
    accuracy: float

    def as_dict(self) -> dict:
        return {
            "recall": self.recall,
            "precision": self.precision,
            "f1": self.f1,
            "accuracy": self.accuracy,
        }


def evaluate(predictions, labels) -> EvalMetrics:
    """Recall/precision/F1/accuracy percentages.

    Precision is 0 when nothing is flagged; recall is undefined (error)
    when the labels contain no attacks.
    """
    pred = np.asarray(predictions, dtype=int).ravel()
    y = np.asarray(labels, dtype=int).ravel()
    if pred.shape != y.shape:
        raise DataError(f"{pred.size} predictions vs {y.size} labels")
    positives = int(np.sum(y == 1))
    if positives == 0:
        raise DataError("recall is undefined without positive labels")
    tp = int(np.sum((pred == 1) & (y == 1)))
    fp = int(np.sum((pred == 1) & (y == 0)))
    recall = tp / positives
    precision = tp / (tp + fp) if tp + fp else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    accuracy = float(np.mean(pred == y))
    return EvalMetrics(
        recall=100.0 * recall,
        precision=100.0 * precision,
        f1=100.0 * f1,
        accuracy=100.0 * accuracy,
    )
