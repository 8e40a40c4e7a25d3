"""Query-count formulas, crossover frontiers, and QRAM resource figures.

Everything here is explicit arithmetic: the asymptotic running times are
evaluated with constant factor 1 and base-2 logs (floored at 1), so the
outputs support order-of-magnitude comparisons, not wall-clock claims.
Every report carries that declaration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DataError
from .pca import NUMERICAL_ZERO_FRACTION, VarianceSelection

VARIANTS = ("pcc_major_only", "pcc_major_minor", "recon", "qmeans")
CLASSICAL_VARIANTS = ("randomized_pca", "full_svd")

COUNT_NOTE = "explicit constants 1, polylog factors evaluated with log2 floored at 1"


@dataclass(frozen=True)
class DatasetParams:
    """Measured quantities entering the running-time formulas.

    The selection-dependent fields (theta, p_major, k and the minor-side
    trio) stay None when no selection covers them; the count formulas
    reject variants whose inputs are missing.
    """

    n: int
    d: int
    spectral_norm: float
    frobenius_norm: float
    mu: float
    kappa: float
    sigma_min: float
    eta_norm: float
    theta: Optional[float] = None
    theta_min: Optional[float] = None
    p_major: Optional[float] = None
    p_minor: Optional[float] = None
    k: Optional[int] = None
    q: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n < 1 or self.d < 1:
            raise DataError(f"n and d must be positive, got ({self.n}, {self.d})")
        slack = 1.0 + 1e-9
        if self.mu > self.frobenius_norm * slack:
            raise DataError(f"mu={self.mu} exceeds the Frobenius norm {self.frobenius_norm}")
        if self.spectral_norm > self.frobenius_norm * slack:
            raise DataError("spectral norm exceeds the Frobenius norm")
        if self.kappa < 1.0:
            raise DataError(f"condition number must be >= 1, got {self.kappa}")
        for name in ("spectral_norm", "frobenius_norm", "mu", "sigma_min", "eta_norm"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise DataError(f"{name} must be finite and positive, got {value}")

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "spectral_norm": self.spectral_norm,
            "frobenius_norm": self.frobenius_norm,
            "mu": self.mu,
            "kappa": self.kappa,
            "sigma_min": self.sigma_min,
            "eta_norm": self.eta_norm,
            "theta": self.theta,
            "theta_min": self.theta_min,
            "p_major": self.p_major,
            "p_minor": self.p_minor,
            "k": self.k,
            "q": self.q,
        }


@dataclass(frozen=True)
class QuantumErrorParams:
    """Error knobs appearing in the query-count denominators."""

    epsilon: float = 1.0
    epsilon_theta: Optional[float] = None
    delta: float = 0.1
    eta: float = 0.1

    def __post_init__(self) -> None:
        for name in ("epsilon", "delta", "eta"):
            value = getattr(self, name)
            if value <= 0.0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.epsilon_theta is not None and self.epsilon_theta <= 0.0:
            raise ConfigError(f"epsilon_theta must be positive, got {self.epsilon_theta}")

    @property
    def search_epsilon(self) -> float:
        return self.epsilon if self.epsilon_theta is None else self.epsilon_theta


@dataclass(frozen=True)
class CostModel:
    """Which formula to evaluate and how literally.

    iterations only matters for the qmeans variant, whose published cost
    is per iteration.
    """

    variant: str
    log_base: int = 2
    constant_factor: float = 1.0
    include_polylog: bool = True
    iterations: int = 1

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.log_base != 2:
            raise ConfigError("only base-2 logs are supported")
        if self.constant_factor <= 0.0:
            raise ConfigError("constant factor must be positive")
        if self.iterations < 1:
            raise ConfigError("iteration count must be at least 1")


def _polylog(x: float, enabled: bool) -> float:
    # floored at 1 so k=1 or d=2 cannot zero out a count
    if not enabled:
        return 1.0
    if x <= 1.0:
        return 1.0
    return max(1.0, math.log2(x))


def spectral_norm_power(X, rel_tol: float = 1e-6, max_iter: int = 10_000) -> float:
    """Largest singular value by power iteration on X^T X.

    Deterministic start vector; stops when successive estimates agree to
    rel_tol. Returns 0 for an all-zero matrix.
    """
    A = np.asarray(X, dtype=float)
    rng = np.random.default_rng(0)
    v = rng.normal(size=A.shape[1])
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(max_iter):
        w = A.T @ (A @ v)
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        previous, estimate = estimate, math.sqrt(norm_w)
        if abs(estimate - previous) <= rel_tol * estimate:
            break
    return estimate


def _row_q_norms(M: np.ndarray, q: float) -> float:
    # s_q(M) = max_i ||M_i||_q^q with the q=0 convention |x|^0 = [x != 0]
    magnitude = np.abs(M)
    if q == 0.0:
        powered = (magnitude > 0.0).astype(float)
    else:
        powered = magnitude**q
    return float(np.max(np.sum(powered, axis=1)))


def mu_parameter(X, grid_points: int = 101) -> float:
    """min over p in [0,1] of (||X||_F, sqrt(s_2p(X) s_2(1-p)(X^T))).

    p is scanned on a uniform grid; 101 points reproduce the published
    convention and a denser grid can only shave the value marginally.
    """
    A = np.asarray(X, dtype=float)
    if grid_points < 2:
        raise ConfigError("mu grid needs at least 2 points")
    best = float(np.linalg.norm(A))
    for p in np.linspace(0.0, 1.0, grid_points):
        candidate = math.sqrt(_row_q_norms(A, 2.0 * p) * _row_q_norms(A.T, 2.0 * (1.0 - p)))
        if candidate < best:
            best = candidate
    return best


def measure_params(
    X,
    selection: Optional[VarianceSelection] = None,
    minor_selection: Optional[VarianceSelection] = None,
    mu_grid_points: int = 101,
) -> DatasetParams:
    """Measure every formula input on a standardized matrix.

    The spectral norm comes from the power method (relative 1e-6), mu
    from the grid scan, sigma_min from the exact spectrum after the
    numerical-zero floor; kappa pairs the measured spectral norm with
    that floored sigma_min (clamped at 1 to absorb the power-method
    tolerance on effectively rank-one inputs).
    """
    A = np.asarray(X, dtype=float)
    if A.ndim != 2:
        raise DataError("expected a 2-D matrix")
    if not np.all(np.isfinite(A)):
        raise DataError("matrix contains non-finite entries")
    n, d = A.shape
    spectral = spectral_norm_power(A)
    if spectral == 0.0:
        raise DataError("matrix is identically zero")
    singular_values = np.linalg.svd(A, compute_uv=False)
    retained = singular_values[singular_values > NUMERICAL_ZERO_FRACTION * singular_values[0]]
    sigma_min = float(retained[-1])
    kappa = max(1.0, spectral / sigma_min)
    theta = p_major = k = None
    if selection is not None:
        if selection.mode != "major":
            raise ConfigError("selection must be a major-mode selection")
        theta, p_major, k = selection.theta, selection.p, selection.count
    theta_min = p_minor = q = None
    if minor_selection is not None:
        if minor_selection.mode != "minor":
            raise ConfigError("minor_selection must be a minor-mode selection")
        theta_min, p_minor, q = minor_selection.theta_min, minor_selection.p, minor_selection.count
    return DatasetParams(
        n=n,
        d=d,
        spectral_norm=spectral,
        frobenius_norm=float(np.linalg.norm(A)),
        mu=mu_parameter(A, mu_grid_points),
        kappa=kappa,
        sigma_min=sigma_min,
        eta_norm=float(np.max(np.sum(A**2, axis=1))),
        theta=theta,
        theta_min=theta_min,
        p_major=p_major,
        p_minor=p_minor,
        k=k,
        q=q,
    )


def _require(params: DatasetParams, names: Sequence[str], variant: str) -> None:
    missing = [name for name in names if getattr(params, name) is None]
    if missing:
        raise ConfigError(f"variant {variant!r} needs {', '.join(missing)} in DatasetParams")


def binary_search_count(params: DatasetParams, errors: QuantumErrorParams, cost: CostModel) -> float:
    eps = errors.search_epsilon
    return params.mu / (eps * errors.eta) * _polylog(params.mu / eps, cost.include_polylog)


def top_k_count(params: DatasetParams, errors: QuantumErrorParams, cost: CostModel) -> float:
    _require(params, ("theta", "p_major", "k"), cost.variant)
    logs = _polylog(params.k, cost.include_polylog) * _polylog(params.d, cost.include_polylog)
    numerator = params.d * params.k * params.spectral_norm * params.mu
    denominator = params.theta * math.sqrt(params.p_major) * errors.epsilon * errors.delta**2
    return numerator / denominator * logs


def least_q_count(params: DatasetParams, errors: QuantumErrorParams, cost: CostModel) -> float:
    _require(params, ("theta_min", "p_minor", "q"), cost.variant)
    return (
        params.theta_min
        / params.sigma_min
        * (params.mu / errors.epsilon)
        * (params.q * params.d / math.sqrt(params.p_minor))
    )


def _qmeans_per_iteration(params: DatasetParams, errors: QuantumErrorParams) -> float:
    k, d = params.k, params.d
    eta, delta = params.eta_norm, errors.delta
    main = k * d * (eta / delta**2) * params.kappa * (params.mu + k * eta / delta)
    tail = k**2 * (eta**1.5 / delta**2) * params.kappa * params.mu
    return main + tail


def quantum_query_count(
    params: DatasetParams, errors: QuantumErrorParams, cost: CostModel
) -> float:
    """Evaluate the query-count formula for the configured variant.

    The detector variants are independent of n (n hides in suppressed
    polylogs); qmeans multiplies its per-iteration cost by the iteration
    count of the cost model. k doubles as the cluster count there.
    """
    if cost.variant == "qmeans":
        _require(params, ("k",), cost.variant)
        total = _qmeans_per_iteration(params, errors) * cost.iterations
    else:
        total = binary_search_count(params, errors, cost) + top_k_count(params, errors, cost)
        if cost.variant == "pcc_major_minor":
            total += least_q_count(params, errors, cost)
    return cost.constant_factor * total


def classical_op_count(n: float, d: float, k: int, variant: str) -> float:
    """Operation counts for the classical baselines.

    randomized_pca follows n*d*k*log2(k) with the log floored at 1;
    full_svd is min(n*d^2, n^2*d) and ignores k.
    """
    if variant not in CLASSICAL_VARIANTS:
        raise ConfigError(f"variant must be one of {CLASSICAL_VARIANTS}, got {variant!r}")
    if n <= 0 or d <= 0 or k <= 0:
        raise ConfigError("n, d and k must be positive")
    if variant == "randomized_pca":
        return float(n) * float(d) * float(k) * max(1.0, math.log2(k))
    return min(float(n) * float(d) ** 2, float(n) ** 2 * float(d))


@dataclass(frozen=True)
class CrossoverCell:
    n: float
    d: float
    quantum_count: float
    classical_count: float
    advantage: bool


@dataclass(frozen=True)
class CrossoverReport:
    cells: Tuple[CrossoverCell, ...]
    frontier: Mapping[float, Optional[float]]
    analytic_frontier: Mapping[float, float]
    classical_variant: str
    growth_model: str
    single_crossing: bool
    note: str = COUNT_NOTE


def _cell_params(params: DatasetParams, n: float, d: float, growth_model: str) -> DatasetParams:
    updates = {"n": int(n), "d": int(d)}
    if growth_model == "sqrt_n":
        scale = math.sqrt(n / params.n)
        updates.update(
            mu=params.mu * scale,
            spectral_norm=params.spectral_norm * scale,
            frobenius_norm=params.frobenius_norm * scale,
        )
    return replace(params, **updates)


def _analytic_frontier(
    quantum: float, d: float, k: int, classical_variant: str
) -> float:
    # smallest n with classical(n) above the (n-free) quantum count
    if classical_variant == "randomized_pca":
        return quantum / (d * k * max(1.0, math.log2(k)))
    n_star = quantum / d**2
    if n_star >= d:
        return n_star
    return math.sqrt(quantum / d)


def find_crossover(
    params: DatasetParams,
    errors: QuantumErrorParams,
    cost: CostModel,
    n_grid: Sequence[float],
    d_grid: Sequence[float],
    growth_model: str = "fixed",
) -> CrossoverReport:
    """Evaluate both counts over the (n, d) grid and locate the frontier.

    The frontier maps each d to the smallest grid n with a quantum
    advantage (None when no grid point is advantageous); the analytic
    frontier inverts the closed-form counts without the grid. Dataset
    parameters stay at their measured values unless growth_model is
    sqrt_n, which scales mu and the norms by sqrt(n / n_measured).
    """
    if cost.variant == "qmeans":
        raise ConfigError("crossover frontiers are defined for the detector variants")
    if growth_model not in ("fixed", "sqrt_n"):
        raise ConfigError(f"unknown growth model {growth_model!r}")
    n_values = sorted(float(n) for n in n_grid)
    d_values = sorted(float(d) for d in d_grid)
    if not n_values or not d_values:
        raise ConfigError("n and d grids must be non-empty")
    if n_values[0] <= 0 or d_values[0] <= 0:
        raise ConfigError("grid values must be positive")
    classical_variant = "full_svd" if cost.variant == "pcc_major_minor" else "randomized_pca"
    cells = []
    frontier: dict = {}
    analytic: dict = {}
    single_crossing = True
    for d in d_values:
        seen_advantage = False
        frontier[d] = None
        for n in n_values:
            cell_params = _cell_params(params, n, d, growth_model)
            quantum = quantum_query_count(cell_params, errors, cost)
            classical = classical_op_count(n, d, params.k, classical_variant)
            advantage = quantum < classical
            cells.append(CrossoverCell(n, d, quantum, classical, advantage))
            if advantage and frontier[d] is None:
                frontier[d] = n
            if seen_advantage and not advantage:
                single_crossing = False
            seen_advantage = seen_advantage or advantage
        base = _cell_params(params, n_values[0], d, growth_model)
        if growth_model == "fixed":
            analytic[d] = _analytic_frontier(
                quantum_query_count(base, errors, cost), d, params.k, classical_variant
            )
        else:
            analytic[d] = _bisect_frontier(params, errors, cost, d, classical_variant)
    return CrossoverReport(
        cells=tuple(cells),
        frontier=frontier,
        analytic_frontier=analytic,
        classical_variant=classical_variant,
        growth_model=growth_model,
        single_crossing=single_crossing,
    )


def _bisect_frontier(
    params: DatasetParams,
    errors: QuantumErrorParams,
    cost: CostModel,
    d: float,
    classical_variant: str,
    hi: float = 1e18,
) -> float:
    def gap(n: float) -> float:
        cell = _cell_params(params, n, d, "sqrt_n")
        return classical_op_count(n, d, params.k, classical_variant) - quantum_query_count(
            cell, errors, cost
        )

    lo = 1.0
    if gap(hi) <= 0.0:
        return math.inf
    if gap(lo) > 0.0:
        return lo
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if gap(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# QRAM resource figures


@dataclass(frozen=True)
class QramConfig:
    """Hardware operating point for the memory-access estimate."""

    gate_error: float
    magic_state_failure: float
    cycle_time_ns: float
    word_size: int = 1
    label: str = ""

    def __post_init__(self) -> None:
        if not 0.0 < self.gate_error < 1.0:
            raise ConfigError("gate error must be a probability in (0, 1)")
        if not 0.0 < self.magic_state_failure < 1.0:
            raise ConfigError("magic-state failure must be a probability in (0, 1)")
        if self.cycle_time_ns <= 0.0:
            raise ConfigError("cycle time must be positive")
        if self.word_size < 1:
            raise ConfigError("word size must be at least 1 bit")


OPTIMISTIC_QRAM = QramConfig(1e-5, 1e-4, 200.0, 1, "optimistic")
REALISTIC_QRAM = QramConfig(1e-3, 1e-2, 1000.0, 1, "realistic")

_ANCHOR_WIDTH = 34
# published (latency ms, physical qubits) at the 34-bit anchor width
_COEFFICIENT_TABLE = (
    (OPTIMISTIC_QRAM, 1.07, 2.08e14),
    (REALISTIC_QRAM, 28.1, 7.31e16),
)
# circuit-shape metadata for the anchor circuit; nothing re-derives these
ANCHOR_CIRCUIT = {
    "logical_qubits": 1.37e11,
    "circuit_depth": 539.0,
    "t_count": 3.61e11,
    "t_depth": 67.0,
    "clifford_count": 9.28e11,
}


@dataclass(frozen=True)
class ResourceEstimate:
    n: int
    d: int
    address_width: int
    kp_tree_nodes: float
    word_size: int
    architecture: str
    latency_ms: float
    physical_qubits: float
    extrapolated: bool
    circuit: Mapping[str, float] = field(default_factory=lambda: dict(ANCHOR_CIRCUIT))

    def as_dict(self) -> dict:
        flat = {
            "n": self.n,
            "d": self.d,
            "address_width": self.address_width,
            "kp_tree_nodes": self.kp_tree_nodes,
            "word_size": self.word_size,
            "architecture": self.architecture,
            "latency_ms": self.latency_ms,
            "physical_qubits": self.physical_qubits,
            "extrapolated": self.extrapolated,
            "anchor_width": _ANCHOR_WIDTH,
        }
        for key, value in self.circuit.items():
            flat[f"anchor_{key}"] = value
        return flat


def address_width(n: int, d: int) -> int:
    cells = float(n) * float(d)
    if cells < 2:
        raise DataError("need at least 2 stored cells for an address space")
    return math.ceil(math.log2(cells * math.log2(cells)))


def kp_tree_nodes(n: int, d: int) -> float:
    cells = float(n) * float(d)
    if cells < 2:
        raise DataError("need at least 2 stored cells for an address space")
    return cells * math.log2(cells)


def _match_operating_point(config: QramConfig):
    for anchor, latency, qubits in _COEFFICIENT_TABLE:
        close = (
            math.isclose(config.gate_error, anchor.gate_error, rel_tol=1e-9)
            and math.isclose(config.magic_state_failure, anchor.magic_state_failure, rel_tol=1e-9)
            and math.isclose(config.cycle_time_ns, anchor.cycle_time_ns, rel_tol=1e-9)
        )
        if close:
            return anchor, latency, qubits
    return None


def qram_estimate(
    n: int, d: int, config: QramConfig, allow_extrapolation: bool = False
) -> ResourceEstimate:
    """Address width, tree size and the published per-query figures.

    Only the two shipped operating points carry coefficients, anchored
    at the 34-bit address width; any other width scales both figures
    linearly in width and is flagged (and gated) as extrapolation. Word
    sizes other than 1 bit are unsupported without new coefficients.
    """
    if config.word_size != 1:
        raise ConfigError(
            f"word size {config.word_size} is unsupported without new coefficients"
        )
    width = address_width(n, d)
    match = _match_operating_point(config)
    if match is None:
        raise ConfigError(
            "configuration is outside the coefficient table; only the optimistic "
            "(1e-5 gate error, 200 ns) and realistic (1e-3, 1 us) points are published"
        )
    anchor, latency, qubits = match
    extrapolated = width != _ANCHOR_WIDTH
    if extrapolated:
        if not allow_extrapolation:
            raise ConfigError(
                f"address width {width} is outside the coefficient table "
                f"(anchor {_ANCHOR_WIDTH}); pass allow_extrapolation=True to scale linearly"
            )
        scale = width / _ANCHOR_WIDTH
        latency *= scale
        qubits *= scale
    return ResourceEstimate(
        n=int(n),
        d=int(d),
        address_width=width,
        kp_tree_nodes=kp_tree_nodes(n, d),
        word_size=config.word_size,
        architecture=anchor.label,
        latency_ms=latency,
        physical_qubits=qubits,
        extrapolated=extrapolated,
    )
