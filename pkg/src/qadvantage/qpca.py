"""Noisy quantum-PCA model extraction, certified against the exact model.

The pipeline mirrors the quantum algorithm: a bisection over the
perturbed spectrum finds the singular-value threshold theta for a
variance target, then the top-k (or, with the condition flipped, the
least-q) components are extracted with bounded per-component errors:

* |sigma_bar - sigma| <= epsilon (consistent phase estimation),
* |lambda_bar - lambda| <= 2 epsilon sqrt(lambda),
* ||e_bar - e||_2 <= delta.

Vector noise is injected by rotating each component toward a random
direction in its orthogonal complement with magnitude drawn from
[delta/2, delta]; this guarantees the certified distance bound at any
delta (including the zero-noise limit) while modeling the error a
sample-budgeted tomography round would leave behind. With probability
gamma a component's draw fails and the magnitude is re-sampled in the
blowup band instead; failures are recorded in the certificate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InfeasibleError
from .pca import ErrorCertificate, PCAModel, _expand_ties
from .qsim import NoiseContext, phase_estimate


@dataclass(frozen=True)
class QpcaRequest:
    """Error/failure knobs for one extraction run.

    ``epsilon`` bounds singular-value estimates, ``epsilon_theta`` the
    binary-search estimates (defaults to epsilon), ``eta`` the variance
    tolerance of the threshold search, ``delta`` the component-vector
    error, ``gamma`` the per-component failure probability (defaults to
    1/d at use), ``heuristic_divisor`` the tomography budget divisor h.
    """

    p_major: Optional[float] = None
    p_minor: Optional[float] = None
    epsilon: float = 1.0
    epsilon_theta: Optional[float] = None
    eta: float = 0.1
    delta: float = 0.1
    gamma: Optional[float] = None
    theta_min: Optional[float] = None
    heuristic_divisor: float = 1.0

    def __post_init__(self):
        for name in ("epsilon", "eta", "delta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.epsilon_theta is not None and self.epsilon_theta < 0:
            raise ValueError("epsilon_theta must be non-negative")
        for name in ("p_major", "p_minor"):
            value = getattr(self, name)
            if value is not None and not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must be in (0, 1]")
        if self.p_major is not None and self.eta >= self.p_major:
            raise ValueError("eta must be smaller than the major variance target")
        if self.gamma is not None and not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if self.heuristic_divisor < 1.0:
            raise ValueError("heuristic divisor must be >= 1")

    @property
    def search_epsilon(self) -> float:
        return self.epsilon if self.epsilon_theta is None else self.epsilon_theta

    def resolve_gamma(self, dimension: int) -> float:
        return 1.0 / dimension if self.gamma is None else self.gamma


def _perturbed_spectrum(
    exact: PCAModel, eps: float, ctx: NoiseContext, gamma: float
) -> np.ndarray:
    sv = exact.singular_values
    return np.array([phase_estimate(float(s), eps, ctx, gamma) for s in sv])


def quantum_binary_search_theta(
    exact: PCAModel,
    p_target: float,
    eps_theta: float,
    eta: float,
    ctx: NoiseContext,
    gamma: Optional[float] = None,
) -> float:
    """Threshold theta with |p_target - coverage(theta)| <= eta.

    coverage(theta) sums the true factor-score ratios of the components
    whose perturbed singular value clears theta. The bisection runs
    ceil(log2(sigma_1/eps_theta)) rounds over the perturbed spectrum and
    the result is snapped to the midpoint of the boundary estimates, so
    the zero-noise limit coincides with the exact selection threshold.
    Raises when no threshold meets the tolerance.
    """
    if not 0.0 < p_target <= 1.0:
        raise ValueError(f"p_target must be in (0, 1], got {p_target}")
    if eta < 0:
        raise ValueError("eta must be non-negative")
    g = ctx.failure_rate if gamma is None else gamma
    ratios = exact.ratios
    sv_bar = _perturbed_spectrum(exact, eps_theta, ctx, g)

    sigma_top = float(exact.singular_values[0])
    depth = 1
    if eps_theta > 0 and sigma_top > eps_theta:
        depth = math.ceil(math.log2(sigma_top / eps_theta))
    lo, hi = 0.0, float(np.max(sv_bar))
    for _ in range(depth):
        mid = 0.5 * (lo + hi)
        if float(np.sum(ratios[sv_bar >= mid])) >= p_target:
            lo = mid
        else:
            hi = mid

    # snap to the plateau boundary: smallest k whose coverage reaches the
    # target on the perturbed order, falling back to k-1 if only the
    # undershooting side is within tolerance
    order = np.argsort(-sv_bar, kind="stable")
    cum = np.cumsum(ratios[order])
    hit = np.flatnonzero(cum >= p_target)
    candidates = []
    if hit.size:
        candidates.append(_expand_ties(sv_bar, order, int(hit[0]) + 1))
        if hit[0] > 0:
            candidates.append(int(hit[0]))
    else:
        candidates.append(order.size)
    for count in candidates:
        if abs(cum[count - 1] - p_target) <= eta:
            return _boundary_midpoint(sv_bar, order, count, eps_theta)
    raise InfeasibleError(
        f"no threshold reaches coverage {p_target} within tolerance {eta}: "
        f"closest coverages {[float(cum[c - 1]) for c in candidates]}"
    )


def _boundary_midpoint(
    sv_bar: np.ndarray, order: np.ndarray, count: int, eps: float
) -> float:
    last = float(sv_bar[order[count - 1]])
    if count < order.size:
        below = float(sv_bar[order[count]])
    elif last > 0:
        below = 0.0
    else:
        # everything selected and the smallest estimate is non-positive:
        # any threshold strictly below it works
        below = last - 2.0 * max(eps, 1.0)
    return 0.5 * (last + below)


def _rotate_within(e: np.ndarray, magnitude: float, rng: np.random.Generator) -> np.ndarray:
    """Unit vector at distance <= magnitude from e (exact at magnitude=0)."""
    if magnitude == 0.0 or e.shape[0] < 2:
        return e.copy()
    g = rng.normal(size=e.shape[0])
    g -= np.dot(g, e) * e
    norm = np.linalg.norm(g)
    while norm < 1e-12:
        g = rng.normal(size=e.shape[0])
        g -= np.dot(g, e) * e
        norm = np.linalg.norm(g)
    out = e + (magnitude / norm) * g
    return out / np.linalg.norm(out)


def _extract(
    exact: PCAModel,
    member_indices: np.ndarray,
    req: QpcaRequest,
    ctx: NoiseContext,
    theta: Optional[float] = None,
    theta_min: Optional[float] = None,
) -> PCAModel:
    gamma = req.resolve_gamma(exact.dim)
    sv = exact.singular_values
    lam = exact.eigenvalues
    rows = []
    for i in member_indices:
        sigma_bar = phase_estimate(float(sv[i]), req.epsilon, ctx, gamma)
        sigma_err = sigma_bar - sv[i]
        lam_bar = lam[i] + 2.0 * sigma_err * sv[i]
        # a wild estimate on a small eigenvalue could cross zero; clamping
        # to a positive sliver keeps T2-style statistics finite and can
        # only shrink the certified error
        lam_bar = max(lam_bar, 1e-12 * lam[i])
        if req.delta > 0.0:
            failed = bool(ctx.rng.random() < gamma)
            low, high = (req.delta, ctx.blowup * req.delta) if failed else (req.delta / 2.0, req.delta)
            magnitude = float(ctx.rng.uniform(low, high))
        else:
            failed = False
            magnitude = 0.0
        e_bar = _rotate_within(exact.components[i], magnitude, ctx.rng)
        rows.append(
            (
                int(i),
                lam_bar,
                e_bar,
                sigma_err,
                lam_bar - lam[i],
                float(np.linalg.norm(e_bar - exact.components[i])),
                failed,
            )
        )
    rows.sort(key=lambda row: -row[1])
    indices, lam_bars, e_bars, sig_errs, lam_errs, vec_dists, failures = zip(*rows)
    certificate = ErrorCertificate(
        epsilon=req.epsilon,
        eta=req.eta,
        delta=req.delta,
        gamma=gamma,
        epsilon_theta=req.search_epsilon,
        theta=theta,
        theta_min=theta_min,
        sigma_errors=np.array(sig_errs),
        lambda_errors=np.array(lam_errs),
        vector_distances=np.array(vec_dists),
        failed=np.array(failures, dtype=bool),
    )
    return PCAModel(
        components=np.vstack(e_bars),
        eigenvalues=np.array(lam_bars),
        n_samples=exact.n_samples,
        source_indices=np.array(indices),
        certificate=certificate,
    )


def _check_data(X, exact: PCAModel) -> None:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != exact.dim:
        raise ValueError(
            f"data matrix must be 2-D with {exact.dim} columns, got shape {X.shape}"
        )


def extract_top_k(
    X, exact: PCAModel, theta: float, req: QpcaRequest, ctx: NoiseContext
) -> PCAModel:
    """Noisy model of the components whose estimated sigma clears theta.

    Membership is decided on this routine's own consistent estimates
    (precision epsilon), so the retained count can differ from the exact
    selection by the estimation error, as a real run's would.
    """
    _check_data(X, exact)
    sv = exact.singular_values
    if not np.any(sv > theta):
        raise InfeasibleError(f"no singular value lies above theta={theta}")
    gamma = req.resolve_gamma(exact.dim)
    sv_bar = _perturbed_spectrum(exact, req.epsilon, ctx, gamma)
    retained = np.flatnonzero(sv_bar >= theta)
    if retained.size == 0:
        raise InfeasibleError(f"estimated spectrum left no component above theta={theta}")
    return _extract(exact, retained, req, ctx, theta=theta)


def extract_least_q(
    X, exact: PCAModel, theta_min: float, req: QpcaRequest, ctx: NoiseContext
) -> PCAModel:
    """Noisy model of the minor components below theta_min.

    The flipped-condition twin of extract_top_k; the minor pool excludes
    singular values under the numerical-zero floor.
    """
    _check_data(X, exact)
    pool = exact.minor_pool()
    sv = exact.singular_values
    if not np.any(sv[pool] < theta_min):
        raise InfeasibleError(f"no minor-pool singular value lies below theta_min={theta_min}")
    gamma = req.resolve_gamma(exact.dim)
    sv_bar = _perturbed_spectrum(exact, req.epsilon, ctx, gamma)
    retained = pool[sv_bar[pool] < theta_min]
    if retained.size == 0:
        raise InfeasibleError(
            f"estimated spectrum left no minor component below theta_min={theta_min}"
        )
    return _extract(exact, retained, req, ctx, theta_min=theta_min)


def combine_extractions(majors: PCAModel, minors: PCAModel) -> PCAModel:
    """Stack a top-k and a least-q extraction into one model.

    The majors keep their positions at the front and the minors at the
    back, which is exactly the layout the T1/T2 detector statistics
    index into. Both parts must come from the same run configuration.
    """
    if majors.dim != minors.dim:
        raise ValueError("extractions live in different feature spaces")
    cert_a, cert_b = majors.certificate, minors.certificate
    if cert_a is None or cert_b is None:
        raise ValueError("both extractions must carry error certificates")
    for field in ("epsilon", "eta", "delta", "gamma", "epsilon_theta"):
        if getattr(cert_a, field) != getattr(cert_b, field):
            raise ValueError(f"extractions disagree on {field}")
    overlap = np.intersect1d(majors.source_indices, minors.source_indices)
    if overlap.size:
        raise ValueError(f"components {overlap.tolist()} appear in both extractions")
    certificate = ErrorCertificate(
        epsilon=cert_a.epsilon,
        eta=cert_a.eta,
        delta=cert_a.delta,
        gamma=cert_a.gamma,
        epsilon_theta=cert_a.epsilon_theta,
        theta=cert_a.theta,
        theta_min=cert_b.theta_min,
        sigma_errors=np.concatenate([cert_a.sigma_errors, cert_b.sigma_errors]),
        lambda_errors=np.concatenate([cert_a.lambda_errors, cert_b.lambda_errors]),
        vector_distances=np.concatenate(
            [cert_a.vector_distances, cert_b.vector_distances]
        ),
        failed=np.concatenate([cert_a.failed, cert_b.failed]),
    )
    return PCAModel(
        components=np.vstack([majors.components, minors.components]),
        eigenvalues=np.concatenate([majors.eigenvalues, minors.eigenvalues]),
        n_samples=majors.n_samples,
        source_indices=np.concatenate([majors.source_indices, minors.source_indices]),
        certificate=certificate,
    )
