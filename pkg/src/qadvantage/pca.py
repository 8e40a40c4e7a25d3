"""Exact PCA on standardized data: the classical baseline.

Conventions used throughout the toolkit:

* eigenvalues are those of X^T X directly, with no 1/(n-1) factor; the
  T1/T2 detector statistics divide by lambda_i, so any consistent
  scaling cancels after threshold calibration,
* principal components are the right singular vectors of X,
* each component's largest-magnitude entry is made positive so exact
  and noise-injected models are directly comparable,
* variance bookkeeping uses factor-score ratios lambda_i / sum_j lambda_j.

Noise-injected models produced by the quantum simulators reuse the same
``PCAModel`` container plus an ``ErrorCertificate`` record.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError, InfeasibleError

# Singular values below NUMERICAL_ZERO_FRACTION * sigma_1 are treated as
# numerical zeros and excluded from the minor-component pool.
NUMERICAL_ZERO_FRACTION = 1e-10

_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ErrorCertificate:
    """Record of the noise actually injected into a PCAModel.

    The bounds promised by the quantum subroutines are
    |sigma_bar - sigma| <= epsilon, |lambda_bar - lambda| <= 2 epsilon
    sqrt(lambda) and ||e_bar - e||_2 <= delta per retained component
    (looser by the failure band when ``failed`` is set).
    """

    epsilon: float
    eta: float
    delta: float
    gamma: float
    sigma_errors: np.ndarray
    lambda_errors: np.ndarray
    vector_distances: np.ndarray
    failed: np.ndarray
    epsilon_theta: Optional[float] = None
    theta: Optional[float] = None
    theta_min: Optional[float] = None


@dataclass(frozen=True)
class PCAModel:
    """PCA decomposition: components are rows, eigenvalues descending.

    ``source_indices`` maps each retained component back to its position
    in the exact spectrum; for exact models this is simply 0..r-1.
    """

    components: np.ndarray
    eigenvalues: np.ndarray
    n_samples: int
    source_indices: Optional[np.ndarray] = None
    certificate: Optional[ErrorCertificate] = None

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float)
        eig = np.asarray(self.eigenvalues, dtype=float)
        if comps.ndim != 2 or eig.ndim != 1 or comps.shape[0] != eig.shape[0]:
            raise ValueError("components must be (r, d) with r eigenvalues")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "eigenvalues", eig)
        if self.source_indices is None:
            object.__setattr__(self, "source_indices", np.arange(comps.shape[0]))
        else:
            object.__setattr__(
                self, "source_indices", np.asarray(self.source_indices, dtype=int)
            )

    @property
    def rank(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def dim(self) -> int:
        return self.components.shape[1]

    @property
    def singular_values(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.eigenvalues, 0.0))

    @property
    def ratios(self) -> np.ndarray:
        """Factor-score ratios lambda_i / sum_j lambda_j."""
        total = float(np.sum(self.eigenvalues))
        if total <= 0.0:
            raise InfeasibleError("eigenvalue mass is zero")
        return self.eigenvalues / total

    def minor_pool(self) -> np.ndarray:
        """Positions whose singular value clears the numerical-zero floor."""
        sv = self.singular_values
        floor = NUMERICAL_ZERO_FRACTION * sv[0] if sv.size else 0.0
        return np.flatnonzero(sv > floor)


@dataclass(frozen=True)
class VarianceSelection:
    """Retained index set with its variance share and boundary thresholds."""

    mode: str
    indices: np.ndarray
    p: float
    theta: Optional[float] = None
    theta_min: Optional[float] = None

    @property
    def k(self) -> int:
        return int(self.indices.shape[0]) if self.mode == "major" else 0

    @property
    def q(self) -> int:
        return int(self.indices.shape[0]) if self.mode == "minor" else 0

    @property
    def count(self) -> int:
        return int(self.indices.shape[0])


def _fix_signs(components: np.ndarray) -> np.ndarray:
    """Make each row's largest-magnitude entry positive (first max on ties)."""
    out = components.copy()
    for row in out:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return out


def fit_exact_pca(train) -> PCAModel:
    """Full SVD of the training matrix; rows of V^T become the components.

    The input is expected to be standardized already; eigenvalues are
    sigma_i^2 of X, i.e. eigenvalues of X^T X.
    """
    X = np.asarray(train, dtype=float)
    if X.ndim != 2:
        raise DataError("training data must be a 2-D matrix")
    n, d = X.shape
    if n < 2 or d < 1:
        raise DataError(f"need at least 2 rows and 1 column, got {n}x{d}")
    if not np.all(np.isfinite(X)):
        raise DataError("training matrix contains non-finite entries")
    _, s, vt = np.linalg.svd(X, full_matrices=False)
    return PCAModel(components=_fix_signs(vt), eigenvalues=s**2, n_samples=n)


def _expand_ties(sv: np.ndarray, order: np.ndarray, count: int) -> int:
    """Grow a boundary selection until the tied singular-value block closes."""
    while count < order.size and sv[order[count]] == sv[order[count - 1]]:
        count += 1
    return count


def _major_theta(sv: np.ndarray, order: np.ndarray, k: int) -> float:
    below = sv[order[k]] if k < order.size else 0.0
    return 0.5 * (sv[order[k - 1]] + below)


def _minor_theta(sv: np.ndarray, order: np.ndarray, q: int) -> float:
    # order runs from the smallest retained singular value upward
    if q < order.size:
        return 0.5 * (sv[order[q - 1]] + sv[order[q]])
    # selection swallowed the whole pool; any bound just above the top works
    return float(np.nextafter(sv[order[q - 1]], np.inf))


def select_for_variance(model: PCAModel, p_target: float, mode: str) -> VarianceSelection:
    """Smallest component set whose cumulative variance ratio reaches p_target.

    Major mode counts from the top of the spectrum, minor mode from the
    tail of the minor pool (numerical zeros excluded). The returned
    threshold sits at the midpoint of the boundary singular values, and
    ties at the boundary are always included whole.
    """
    if not 0.0 < p_target <= 1.0:
        raise ValueError(f"p_target must be in (0, 1], got {p_target}")
    if mode not in ("major", "minor"):
        raise ValueError(f"mode must be 'major' or 'minor', got {mode!r}")
    ratios = model.ratios
    sv = model.singular_values
    if mode == "major":
        order = np.arange(model.rank)
    else:
        order = model.minor_pool()[::-1]
        if order.size == 0:
            raise InfeasibleError("minor pool is empty (all singular values are numerical zeros)")
    cum = np.cumsum(ratios[order])
    hit = np.flatnonzero(cum >= p_target)
    if hit.size == 0:
        raise InfeasibleError(
            f"variance target {p_target} unreachable: cumulative ratio tops out at {cum[-1]:.6g}"
        )
    count = _expand_ties(sv, order, int(hit[0]) + 1)
    indices = np.sort(order[:count])
    p = float(cum[count - 1])
    if mode == "major":
        return VarianceSelection(mode, indices, p, theta=_major_theta(sv, order, count))
    return VarianceSelection(mode, indices, p, theta_min=_minor_theta(sv, order, count))


def select_top_k(model: PCAModel, k: int) -> VarianceSelection:
    """Major selection with the component count fixed directly."""
    if not 1 <= k <= model.rank:
        raise ValueError(f"k must be in [1, {model.rank}], got {k}")
    order = np.arange(model.rank)
    sv = model.singular_values
    count = _expand_ties(sv, order, k)
    p = float(np.sum(model.ratios[:count]))
    return VarianceSelection("major", np.arange(count), p, theta=_major_theta(sv, order, count))


def select_below_threshold(model: PCAModel, theta_min: float) -> VarianceSelection:
    """Minor selection from an explicit singular-value threshold."""
    pool = model.minor_pool()
    sv = model.singular_values
    indices = pool[sv[pool] < theta_min]
    if indices.size == 0:
        raise InfeasibleError(f"no minor-pool singular value lies below theta_min={theta_min}")
    p = float(np.sum(model.ratios[indices]))
    return VarianceSelection("minor", np.sort(indices), p, theta_min=float(theta_min))


def project_reconstruct(z, model: PCAModel, k: int):
    """Project onto the top-k components and back.

    Returns (projection, reconstruction, sse). Accepts a single vector
    or a stack of rows; sse is scalar for a vector, per-row otherwise.
    """
    if not 1 <= k <= model.rank:
        raise ValueError(f"k must be in [1, {model.rank}], got {k}")
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    Z = np.atleast_2d(z)
    if Z.shape[1] != model.dim:
        raise ValueError(f"dimension mismatch: z has {Z.shape[1]} features, model has {model.dim}")
    E = model.components[:k]
    Y = Z @ E.T
    Zhat = Y @ E
    sse = np.sum((Z - Zhat) ** 2, axis=1)
    if single:
        return Y[0], Zhat[0], float(sse[0])
    return Y, Zhat, sse


def subset_model(model: PCAModel, indices) -> PCAModel:
    """Restriction of an exact model to the given component positions.

    Order is preserved as given; the error certificate (if any) does not
    survive subsetting, so use this on exact models only.
    """
    idx = np.asarray(indices, dtype=int)
    return PCAModel(
        components=model.components[idx],
        eigenvalues=model.eigenvalues[idx],
        n_samples=model.n_samples,
        source_indices=model.source_indices[idx],
    )


def save_model(model: PCAModel, path) -> None:
    """Serialize to a flat .npz: spectrum, component matrix, metadata."""
    arrays = {
        "schema_version": np.int64(_SCHEMA_VERSION),
        "components": model.components,
        "eigenvalues": model.eigenvalues,
        "n_samples": np.int64(model.n_samples),
        "source_indices": model.source_indices,
    }
    cert = model.certificate
    if cert is not None:
        scalars = {
            "epsilon": cert.epsilon,
            "eta": cert.eta,
            "delta": cert.delta,
            "gamma": cert.gamma,
            "epsilon_theta": cert.epsilon_theta,
            "theta": cert.theta,
            "theta_min": cert.theta_min,
        }
        arrays["certificate_json"] = np.str_(json.dumps(scalars))
        arrays["cert_sigma_errors"] = cert.sigma_errors
        arrays["cert_lambda_errors"] = cert.lambda_errors
        arrays["cert_vector_distances"] = cert.vector_distances
        arrays["cert_failed"] = cert.failed
    np.savez(path, **arrays)


def load_model(path) -> PCAModel:
    with np.load(path, allow_pickle=False) as payload:
        version = int(payload["schema_version"])
        if version != _SCHEMA_VERSION:
            raise DataError(f"unsupported model schema version {version}")
        certificate = None
        if "certificate_json" in payload:
            scalars = json.loads(str(payload["certificate_json"]))
            certificate = ErrorCertificate(
                epsilon=scalars["epsilon"],
                eta=scalars["eta"],
                delta=scalars["delta"],
                gamma=scalars["gamma"],
                epsilon_theta=scalars["epsilon_theta"],
                theta=scalars["theta"],
                theta_min=scalars["theta_min"],
                sigma_errors=payload["cert_sigma_errors"],
                lambda_errors=payload["cert_lambda_errors"],
                vector_distances=payload["cert_vector_distances"],
                failed=payload["cert_failed"],
            )
        return PCAModel(
            components=payload["components"],
            eigenvalues=payload["eigenvalues"],
            n_samples=int(payload["n_samples"]),
            source_indices=payload["source_indices"],
            certificate=certificate,
        )
