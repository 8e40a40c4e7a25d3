"""Classical simulators of the quantum subroutines used by the pipeline.

Each simulator injects noise exactly within the guarantee of the
corresponding bounded-error routine, at the pessimistic edge of its
stated success probability:

* ``estimate_amplitude``: additive error 2*pi*sqrt(a(1-a))/t + pi^2/t^2,
  success probability 8/pi^2, exact on certainty cases (a=0; a=1 with
  even t),
* ``phase_estimate``: additive error strictly inside (-eps, +eps),
  consistent, i.e. repeated calls with the same (value, eps) in one
  context return the identical estimate,
* ``estimate_inner_product``: additive error eps with probability
  >= 1 - 2*Delta,
* ``tomography``: draws computational-basis samples from x_i^2 for the
  magnitudes and simulates a second interference round for the signs.

Failure events (the complement of each success probability, plus the
configurable rate gamma for phase estimation) land in a band up to
``blowup`` times the bound, so downstream robustness to the stated
failure probability is actually exercised.
"""
from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

# success probability of amplitude estimation, fixed by the routine itself
AMPLITUDE_SUCCESS = 8.0 / np.pi**2


def _format_key_part(part) -> str:
    if isinstance(part, float):
        # 12 significant digits: close inputs share a noise draw, which is
        # what the consistency contract needs
        return f"{part:.12g}"
    return str(part)


@dataclass
class NoiseContext:
    """Seeded noise state shared by the simulators.

    ``failure_rate`` is the probability gamma that a phase estimate
    falls outside its bound; ``blowup`` scales the failure band. The
    consistency store maps (routine id, discretized input key) to the
    cached draw, and the draw itself is derived by hashing the key with
    the seed, so equal seeds give byte-identical estimates across
    processes regardless of call order.
    """

    seed: int
    failure_rate: float = 0.0
    blowup: float = 10.0
    rng: np.random.Generator = field(init=False, repr=False)
    _store: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if not 0.0 <= self.failure_rate < 1.0:
            raise ValueError("failure_rate must be in [0, 1)")
        if self.blowup < 1.0:
            raise ValueError("blowup must be >= 1")
        self.rng = np.random.default_rng(self.seed)

    def key_rng(self, routine: str, parts: Sequence) -> np.random.Generator:
        """Generator that is a pure function of (seed, routine, key parts)."""
        material = "|".join([routine, *map(_format_key_part, parts)])
        digest = hashlib.sha256(material.encode("utf-8")).digest()
        words = [int.from_bytes(digest[i : i + 8], "little") for i in range(0, 32, 8)]
        return np.random.default_rng(np.random.SeedSequence([self.seed, *words]))

    def consistent_draw(self, routine: str, parts: Sequence, sampler):
        """Cache-and-return ``sampler(rng)`` for this (routine, key)."""
        key = (routine, tuple(map(_format_key_part, parts)))
        if key not in self._store:
            self._store[key] = sampler(self.key_rng(routine, parts))
        return self._store[key]


@dataclass(frozen=True)
class TomographyPlan:
    """Sample budget for vector tomography.

    The l2 mode needs N = ceil(36 d ln d / delta^2) samples for error
    delta, the linf mode N = ceil(36 ln d / delta^2); natural logs. The
    heuristic divisor h >= 1 cuts the budget to ceil(N / h). An explicit
    ``sample_override`` pins the effective budget directly (used by the
    fixed-budget study mode).
    """

    dimension: int
    delta: float
    norm: str = "l2"
    heuristic_divisor: float = 1.0
    sample_override: Optional[int] = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if self.norm not in ("l2", "linf"):
            raise ValueError(f"norm must be 'l2' or 'linf', got {self.norm!r}")
        if self.heuristic_divisor < 1.0:
            raise ValueError("heuristic divisor must be >= 1")
        if self.sample_override is not None and self.sample_override < 1:
            raise ValueError("sample_override must be >= 1")

    @property
    def sample_bound(self) -> int:
        """Theoretical sample count N before the heuristic divisor."""
        if self.delta == 0.0:
            raise ValueError("sample bound diverges at delta=0")
        d = self.dimension
        factor = 36.0 * d * math.log(d) if self.norm == "l2" else 36.0 * math.log(d)
        return max(1, math.ceil(factor / self.delta**2))

    @property
    def effective_samples(self) -> int:
        if self.sample_override is not None:
            return self.sample_override
        return max(1, math.ceil(self.sample_bound / self.heuristic_divisor))


def amplitude_bound(a: float, t: int) -> float:
    """Additive error bound of t-round amplitude estimation."""
    return 2.0 * np.pi * math.sqrt(a * (1.0 - a)) / t + np.pi**2 / t**2


def estimate_amplitude(a: float, t: int, ctx: NoiseContext) -> float:
    """Noisy amplitude estimate in [0, 1]; exact on certainty cases."""
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"amplitude must be in [0, 1], got {a}")
    if t < 1 or int(t) != t:
        raise ValueError(f"round count t must be a positive integer, got {t}")
    t = int(t)
    if a == 0.0:
        return 0.0
    if a == 1.0 and t % 2 == 0:
        return 1.0
    bound = amplitude_bound(a, t)
    if ctx.rng.random() < AMPLITUDE_SUCCESS:
        err = ctx.rng.uniform(-bound, bound)
    else:
        err = float(ctx.rng.choice([-1.0, 1.0])) * ctx.rng.uniform(bound, ctx.blowup * bound)
    return float(np.clip(a + err, 0.0, 1.0))


def phase_estimate(
    true_value: float,
    eps: float,
    ctx: NoiseContext,
    gamma: Optional[float] = None,
) -> float:
    """Consistent noisy estimate with |estimate - true_value| < eps.

    With probability gamma (default: the context failure rate) the error
    instead lands in the failure band (eps, blowup*eps). eps=0 is the
    exact limit and returns the true value.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if eps == 0.0:
        return float(true_value)
    g = ctx.failure_rate if gamma is None else gamma

    def sampler(rng: np.random.Generator) -> float:
        if g > 0.0 and rng.random() < g:
            magnitude = rng.uniform(eps, ctx.blowup * eps)
        else:
            magnitude = rng.uniform(0.0, eps)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        return float(true_value) + sign * magnitude

    return ctx.consistent_draw("phase", (float(true_value), float(eps), float(g)), sampler)


def noisy_sq_distances(
    V: np.ndarray,
    C: np.ndarray,
    eps: float,
    delta_fail: float,
    ctx: NoiseContext,
) -> np.ndarray:
    """Batch distance estimation: all pairwise squared distances V x C.

    Each entry carries additive error <= eps with probability
    >= 1 - 2*delta_fail, failure band up to blowup*eps, clamped at 0.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if V.shape[1] != C.shape[1]:
        raise ValueError(f"dimension mismatch: {V.shape[1]} vs {C.shape[1]}")
    d2 = (
        np.sum(V**2, axis=1)[:, None]
        + np.sum(C**2, axis=1)[None, :]
        - 2.0 * V @ C.T
    )
    np.maximum(d2, 0.0, out=d2)
    if eps == 0.0:
        return d2
    err = ctx.rng.uniform(-eps, eps, size=d2.shape)
    fail = ctx.rng.random(size=d2.shape) < 2.0 * delta_fail
    if np.any(fail):
        n_fail = int(np.count_nonzero(fail))
        magnitude = ctx.rng.uniform(eps, ctx.blowup * eps, size=n_fail)
        sign = np.where(ctx.rng.random(n_fail) < 0.5, 1.0, -1.0)
        err[fail] = sign * magnitude
    return np.maximum(d2 + err, 0.0)


def estimate_inner_product(
    v: np.ndarray,
    c: np.ndarray,
    eps: float,
    delta_fail: float,
    ctx: NoiseContext,
    mode: str = "sq_distance",
) -> float:
    """Noisy squared distance (or inner product) between two vectors.

    Additive error <= eps with probability >= 1 - 2*delta_fail; failures
    land in the blowup band. Squared distances are clamped at zero.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if not 0.0 < delta_fail < 0.5:
        raise ValueError("delta_fail must be in (0, 0.5)")
    if mode not in ("sq_distance", "inner"):
        raise ValueError(f"mode must be 'sq_distance' or 'inner', got {mode!r}")
    v = np.asarray(v, dtype=float)
    c = np.asarray(c, dtype=float)
    if v.shape != c.shape:
        raise ValueError(f"dimension mismatch: {v.shape} vs {c.shape}")
    if mode == "sq_distance":
        return float(noisy_sq_distances(v[None, :], c[None, :], eps, delta_fail, ctx)[0, 0])
    true = float(np.dot(v, c))
    if eps == 0.0:
        return true
    if ctx.rng.random() < 2.0 * delta_fail:
        err = float(ctx.rng.choice([-1.0, 1.0])) * ctx.rng.uniform(eps, ctx.blowup * eps)
    else:
        err = ctx.rng.uniform(-eps, eps)
    return true + err


def tomography(x: np.ndarray, plan: TomographyPlan, ctx: NoiseContext) -> np.ndarray:
    """Simulated pure-state tomography of a unit vector.

    Half of the effective sample budget estimates magnitudes from
    multinomial counts over x_i^2, the other half drives the sign round:
    signs are recovered relative to the dominant coordinate (which
    anchors the global phase and is never flipped); every other sign is
    flipped independently with probability
    max(0, 1/2 - |x_i| sqrt(S)/4). The output is renormalized to unit
    norm. delta=0 is the exact limit.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("tomography expects a 1-D vector")
    if x.shape[0] != plan.dimension:
        raise ValueError(f"vector has dimension {x.shape[0]}, plan expects {plan.dimension}")
    norm = np.linalg.norm(x)
    if norm == 0.0:
        raise DataError("cannot run tomography on the zero vector")
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"input must be a unit vector, got norm {norm}")
    if plan.delta == 0.0:
        return x.copy()
    samples = plan.effective_samples
    if samples < x.shape[0]:
        logger.warning(
            "tomography budget %d below dimension %d; estimates will be coarse",
            samples,
            x.shape[0],
        )
    s_mag = max(1, math.ceil(samples / 2))
    s_sign = max(1, samples - s_mag)
    probs = x**2
    probs = probs / probs.sum()
    counts = ctx.rng.multinomial(s_mag, probs)
    magnitudes = np.sqrt(counts / s_mag)
    flip_p = np.clip(0.5 - np.abs(x) * math.sqrt(s_sign) / 4.0, 0.0, 0.5)
    flip_p[int(np.argmax(np.abs(x)))] = 0.0
    signs = np.where(x < 0, -1.0, 1.0)
    signs[ctx.rng.random(x.shape[0]) < flip_p] *= -1.0
    out = signs * magnitudes
    return out / np.linalg.norm(out)


def _vector_error(x: np.ndarray, xbar: np.ndarray, norm: str) -> float:
    diff = xbar - x
    return float(np.linalg.norm(diff)) if norm == "l2" else float(np.max(np.abs(diff)))


@dataclass(frozen=True)
class TomographyStudyRow:
    delta: Optional[float]
    samples: int
    theory_samples: Optional[int]
    median_error: float
    p05: float
    p95: float
    errors: np.ndarray


def tomography_study(
    x: np.ndarray,
    ctx: NoiseContext,
    deltas: Optional[Sequence[float]] = None,
    sample_counts: Optional[Sequence[int]] = None,
    repetitions: int = 50,
    norm: str = "l2",
    heuristic_divisor: float = 1.0,
) -> list[TomographyStudyRow]:
    """Empirical samples-vs-error curve for tomography.

    Either a delta grid (budgets from the theoretical bound divided by
    h) or explicit sample counts can drive the sweep; each row reports
    the error distribution over ``repetitions`` trials together with the
    theoretical budget for overlay plotting.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if (deltas is None) == (sample_counts is None):
        raise ValueError("provide exactly one of deltas or sample_counts")
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    rows = []
    if deltas is not None:
        plans = [(float(dl), TomographyPlan(d, float(dl), norm, heuristic_divisor)) for dl in deltas]
        configs = [(dl, plan.effective_samples, plan.sample_bound) for dl, plan in plans]
    else:
        configs = [(None, int(s), None) for s in sample_counts]
    for delta, samples, theory in configs:
        run_plan = TomographyPlan(d, delta if delta else 1.0, norm, sample_override=samples)
        errors = np.array(
            [_vector_error(x, tomography(x, run_plan, ctx), norm) for _ in range(repetitions)]
        )
        rows.append(
            TomographyStudyRow(
                delta=delta,
                samples=samples,
                theory_samples=theory,
                median_error=float(np.median(errors)),
                p05=float(np.quantile(errors, 0.05)),
                p95=float(np.quantile(errors, 0.95)),
                errors=errors,
            )
        )
    return rows
