"""End-to-end experiment wiring shared by the CLI, tests, and studies.

A ModelBundle pairs the exact PCA decomposition with (optionally) the
noisy extraction of the same training matrix, so detector code and
metric tables can switch between the classical and quantum paths by
picking a model out of the bundle. All the error knobs travel in a
single QpcaRequest.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import DataMatrix
from .detectors import (
    EnsembleModel,
    EvalMetrics,
    PccModel,
    ReconModel,
    calibrate_ensemble,
    calibrate_pcc,
    classify,
    evaluate,
    tune_recon_threshold,
)
from .errors import ConfigError, DataError
from .pca import (
    PCAModel,
    VarianceSelection,
    fit_exact_pca,
    select_below_threshold,
    select_for_variance,
)
from .qpca import (
    QpcaRequest,
    combine_extractions,
    extract_least_q,
    extract_top_k,
    quantum_binary_search_theta,
)
from .qsim import NoiseContext

DETECTOR_KINDS = ("pcc_major", "pcc_major_minor", "ensemble", "recon")


@dataclass(frozen=True)
class ModelBundle:
    """Exact model plus selections, and the noisy twin when requested."""

    exact: PCAModel
    selection_major: VarianceSelection
    selection_minor: Optional[VarianceSelection]
    quantum: Optional[PCAModel] = None
    quantum_majors: Optional[PCAModel] = None
    quantum_minors: Optional[PCAModel] = None
    theta: Optional[float] = None
    theta_min: Optional[float] = None

    @property
    def k_exact(self) -> int:
        return self.selection_major.k

    @property
    def q_exact(self) -> int:
        return self.selection_minor.count if self.selection_minor is not None else 0

    @property
    def k_quantum(self) -> int:
        return self.quantum_majors.rank if self.quantum_majors is not None else 0

    @property
    def q_quantum(self) -> int:
        return self.quantum_minors.rank if self.quantum_minors is not None else 0


def _train_values(train) -> np.ndarray:
    values = np.asarray(train, dtype=float)
    if values.ndim != 2:
        raise DataError("training data must be a matrix")
    return values


def build_bundle(
    train, request: QpcaRequest, ctx: Optional[NoiseContext] = None
) -> ModelBundle:
    """Fit the exact model, select components, and optionally extract noisily.

    The minor side is active when the request names p_minor (variance
    target, threshold derived from the exact spectrum) or theta_min (used
    directly); the quantum path reuses the same threshold on its own
    estimates, so zero noise reproduces the exact selection.
    """
    if request.p_major is None:
        raise ConfigError("request must set p_major")
    X = _train_values(train)
    exact = fit_exact_pca(X)
    sel_major = select_for_variance(exact, request.p_major, "major")

    sel_minor = None
    theta_min = request.theta_min
    if request.p_minor is not None:
        sel_minor = select_for_variance(exact, request.p_minor, "minor")
        theta_min = sel_minor.theta_min
    elif theta_min is not None:
        sel_minor = select_below_threshold(exact, theta_min)

    if ctx is None:
        return ModelBundle(
            exact=exact,
            selection_major=sel_major,
            selection_minor=sel_minor,
            theta_min=theta_min,
        )

    gamma = request.resolve_gamma(exact.dim)
    theta = quantum_binary_search_theta(
        exact, request.p_major, request.search_epsilon, request.eta, ctx, gamma
    )
    majors = extract_top_k(X, exact, theta, request, ctx)
    minors = None
    combined = majors
    if theta_min is not None:
        minors = extract_least_q(X, exact, theta_min, request, ctx)
        combined = combine_extractions(majors, minors)
    return ModelBundle(
        exact=exact,
        selection_major=sel_major,
        selection_minor=sel_minor,
        quantum=combined,
        quantum_majors=majors,
        quantum_minors=minors,
        theta=theta,
        theta_min=theta_min,
    )


def make_detector(kind: str, bundle: ModelBundle, alpha: float, quantum: bool):
    """Uncalibrated detector over the bundle's exact or quantum model."""
    if kind not in DETECTOR_KINDS:
        raise ConfigError(f"detector kind must be one of {DETECTOR_KINDS}, got {kind!r}")
    needs_minor = kind in ("pcc_major_minor", "ensemble")
    if quantum:
        if bundle.quantum is None:
            raise ConfigError("bundle has no quantum extraction")
        if needs_minor and bundle.quantum_minors is None:
            raise ConfigError(f"{kind} needs a minor-side extraction")
        model = bundle.quantum if needs_minor else bundle.quantum_majors
        k, q = bundle.k_quantum, bundle.q_quantum
    else:
        if needs_minor and bundle.selection_minor is None:
            raise ConfigError(f"{kind} needs a minor selection")
        model = bundle.exact
        k, q = bundle.k_exact, bundle.q_exact
    if kind == "pcc_major":
        return PccModel(model=model, k=k, alpha=alpha, mode="major_only")
    if kind == "pcc_major_minor":
        return PccModel(model=model, k=k, q=q, alpha=alpha, mode="major_minor")
    if kind == "ensemble":
        return EnsembleModel(model=model, k=k, q=q, alpha=alpha)
    return ReconModel(model=model, k=k)


def normals_of(split: DataMatrix) -> np.ndarray:
    if split.labels is None:
        raise DataError(f"{split.role} split has no labels")
    return split.values[np.asarray(split.labels) == 0]


def calibrate_detector(detector, validation: DataMatrix, fixed_t: Optional[float] = None):
    """Thresholds from validation: alpha quantiles, or F1 search for recon.

    A reconstruction detector takes ``fixed_t`` verbatim when given
    (e.g. to hold the operating point across a noise sweep).
    """
    if isinstance(detector, ReconModel):
        if fixed_t is not None:
            return ReconModel(model=detector.model, k=detector.k, t=fixed_t)
        return tune_recon_threshold(detector, validation.values, validation.labels)
    if fixed_t is not None:
        raise ConfigError("fixed_t applies to reconstruction detectors only")
    normals = normals_of(validation)
    if isinstance(detector, PccModel):
        return calibrate_pcc(detector, normals)
    return calibrate_ensemble(detector, normals)


def evaluate_detector(detector, test: DataMatrix) -> EvalMetrics:
    if test.labels is None:
        raise DataError("test split has no labels")
    return evaluate(classify(test.values, detector), test.labels)


def run_detector(
    kind: str,
    bundle: ModelBundle,
    alpha: float,
    validation: DataMatrix,
    test: DataMatrix,
    quantum: bool = False,
    fixed_t: Optional[float] = None,
):
    """(calibrated detector, test metrics) in one step."""
    detector = make_detector(kind, bundle, alpha, quantum)
    detector = calibrate_detector(detector, validation, fixed_t=fixed_t)
    return detector, evaluate_detector(detector, test)
