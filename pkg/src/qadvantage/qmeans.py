"""Noisy Lloyd iterations (q-means) and Calinski-Harabasz evaluation.

The quantum algorithm's guarantee is that each returned centroid sits
within delta (l2) of the classical update computed from the same
assignments, and that assignments use squared-distance estimates with
additive error eps_dist. Both effects are injected directly: distances
through the batch estimator, centroids by adding a random vector of
norm at most delta after each exact mean update. Convergence is tested
on the exact (pre-perturbation) drift so noise cannot stall it.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DataError
from .qsim import NoiseContext, noisy_sq_distances

logger = logging.getLogger(__name__)

ITERATION_CAP = 300


@dataclass(frozen=True)
class ClusteringResult:
    """Final centroids and assignments plus the per-iteration drift log."""

    centroids: np.ndarray
    assignments: np.ndarray
    iterations: int
    drift_log: np.ndarray
    reseeds: tuple
    eta_norm: float  # measured max squared row norm, logged not user-set

    def __post_init__(self):
        if self.drift_log.shape[0] != self.iterations:
            raise ValueError("drift log must have one entry per iteration")
        k = self.centroids.shape[0]
        if self.assignments.min(initial=0) < 0 or self.assignments.max(initial=-1) >= k:
            raise ValueError("assignment indexes an invalid centroid")


def kmeans_pp_init(X: np.ndarray, k: int, seed: int) -> np.ndarray:
    """k-means++ seeding: spread initial centroids by squared distance."""
    rng = np.random.default_rng(seed)
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    closest = np.sum((X - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(closest.sum())
        if total <= 0.0:  # all points coincide with chosen centroids
            centroids[j:] = centroids[0]
            break
        centroids[j] = X[rng.choice(n, p=closest / total)]
        closest = np.minimum(closest, np.sum((X - centroids[j]) ** 2, axis=1))
    return centroids


def _resolve_init(X: np.ndarray, k: int, init) -> np.ndarray:
    if isinstance(init, (int, np.integer)):
        return kmeans_pp_init(X, k, int(init))
    centroids = np.array(init, dtype=float)
    if centroids.shape != (k, X.shape[1]):
        raise DataError(
            f"init centroids must be ({k}, {X.shape[1]}), got {centroids.shape}"
        )
    return centroids


def _exact_sq_distances(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d2 = np.sum(X**2, axis=1)[:, None] + np.sum(C**2, axis=1)[None, :] - 2.0 * X @ C.T
    return np.maximum(d2, 0.0)


def _perturb(C: np.ndarray, delta: float, rng: np.random.Generator) -> np.ndarray:
    if delta == 0.0:
        return C
    out = C.copy()
    for j in range(C.shape[0]):
        direction = rng.normal(size=C.shape[1])
        norm = np.linalg.norm(direction)
        if norm == 0.0:
            continue
        out[j] = C[j] + (rng.uniform(delta / 2.0, delta) / norm) * direction
    return out


def _lloyd(
    X: np.ndarray,
    k: int,
    init,
    delta: float,
    eps_dist: float,
    ctx: Optional[NoiseContext],
    cap: int,
) -> ClusteringResult:
    n = X.shape[0]
    centroids = _resolve_init(X, k, init)
    rng = ctx.rng if ctx is not None else None

    def distances(C):
        if ctx is not None and eps_dist > 0.0:
            return noisy_sq_distances(X, C, eps_dist, ctx.failure_rate, ctx)
        return _exact_sq_distances(X, C)

    drift_log = []
    reseeds = []
    assignments = np.zeros(n, dtype=int)
    # drift compares consecutive exact updates (never the perturbed
    # centroids), so the injected noise cannot stall termination
    reference = centroids.copy()
    for iteration in range(cap):
        D = distances(centroids)
        assignments = np.argmin(D, axis=1)
        point_dist = D[np.arange(n), assignments].copy()
        while True:
            empty = [j for j in range(k) if not np.any(assignments == j)]
            if not empty:
                break
            for j in empty:
                # re-seed at the point farthest from its current centroid
                farthest = int(np.argmax(point_dist))
                if point_dist[farthest] == -np.inf:
                    raise DataError("not enough distinct points to fill every cluster")
                assignments[farthest] = j
                point_dist[farthest] = -np.inf  # cannot be stolen twice
                reseeds.append((iteration, j))
                logger.info("iteration %d: reseeded empty cluster %d", iteration, j)
        update = np.empty_like(centroids)
        for j in range(k):
            update[j] = X[assignments == j].mean(axis=0)
        drift = float(np.max(np.linalg.norm(update - reference, axis=1)))
        drift_log.append(drift)
        reference = update
        if rng is not None:
            centroids = _perturb(update, delta, rng)
        else:
            centroids = update
        stop = drift < delta / 2.0 if delta > 0.0 else drift == 0.0
        if stop:
            break
    return ClusteringResult(
        centroids=centroids,
        assignments=assignments,
        iterations=len(drift_log),
        drift_log=np.asarray(drift_log),
        reseeds=tuple(reseeds),
        eta_norm=float(np.max(np.sum(X**2, axis=1))),
    )


def _within_sse(X: np.ndarray, assignments: np.ndarray, k: int) -> float:
    total = 0.0
    for j in range(k):
        members = X[assignments == j]
        if members.size:
            total += float(np.sum((members - members.mean(axis=0)) ** 2))
    return total


def _best_of(
    X: np.ndarray,
    k: int,
    init,
    delta: float,
    eps_dist: float,
    ctx: Optional[NoiseContext],
    cap: int,
    restarts: int,
) -> ClusteringResult:
    if restarts < 1:
        raise DataError(f"restarts must be >= 1, got {restarts}")
    if restarts == 1:
        return _lloyd(X, k, init, delta, eps_dist, ctx, cap)
    if not isinstance(init, (int, np.integer)):
        raise DataError("restarts > 1 needs an integer init seed")
    best = None
    best_sse = math.inf
    for r in range(restarts):
        result = _lloyd(X, k, int(init) + 7919 * r, delta, eps_dist, ctx, cap)
        sse = _within_sse(X, result.assignments, k)
        if sse < best_sse:
            best, best_sse = result, sse
    return best


def _check_inputs(X, k: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("clustering needs a non-empty 2-D matrix")
    if not np.all(np.isfinite(X)):
        raise DataError("clustering input contains non-finite values")
    if not 1 <= k <= X.shape[0]:
        raise DataError(f"k={k} outside [1, {X.shape[0]}]")
    return X


def qmeans_fit(
    X,
    k: int,
    delta: float,
    eps_dist: float,
    init: Union[int, Sequence],
    ctx: NoiseContext,
    iteration_cap: int = ITERATION_CAP,
    restarts: int = 1,
) -> ClusteringResult:
    """Noisy Lloyd loop: delta-perturbed centroids, eps_dist distances.

    Stops when the exact update drift falls below delta / 2 or at the
    iteration cap; empty clusters are re-seeded from the farthest point
    and logged in ``reseeds``. With ``restarts`` > 1 the loop reruns
    from derived seeds and keeps the partition with the lowest
    within-cluster SSE, mirroring multi-init k-means.
    """
    X = _check_inputs(X, k)
    if delta <= 0.0 or eps_dist <= 0.0:
        raise DataError("delta and eps_dist must be positive")
    return _best_of(X, k, init, delta, eps_dist, ctx, iteration_cap, restarts)


def kmeans_fit(
    X,
    k: int,
    init: Union[int, Sequence],
    iteration_cap: int = ITERATION_CAP,
    restarts: int = 1,
) -> ClusteringResult:
    """Classical Lloyd baseline sharing the q-means code path and init."""
    X = _check_inputs(X, k)
    return _best_of(X, k, init, 0.0, 0.0, None, iteration_cap, restarts)


def ch_index(X, result: ClusteringResult) -> float:
    """Calinski-Harabasz: between/within dispersion scaled by dof.

    Uses the assignment sets' own means (not the perturbed centroids) so
    classical and quantum runs are compared on the clusters they induce.
    Returns +inf when the within-dispersion is exactly zero.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    labels = np.asarray(result.assignments)
    k = result.centroids.shape[0]
    n = X.shape[0]
    if k < 2:
        raise DataError("CH index needs at least two clusters")
    if n != labels.shape[0]:
        raise DataError("assignments do not match the data")
    counts = np.bincount(labels, minlength=k)
    if np.any(counts == 0):
        raise DataError("CH index needs every cluster non-empty")
    grand = X.mean(axis=0)
    between = 0.0
    within = 0.0
    for j in range(k):
        members = X[labels == j]
        mu = members.mean(axis=0)
        between += counts[j] * float(np.sum((mu - grand) ** 2))
        within += float(np.sum((members - mu) ** 2))
    if within == 0.0:
        logger.info("zero within-cluster dispersion; returning +inf sentinel")
        return math.inf
    return (between / (k - 1)) / (within / (n - k))


def qmeans_study(
    X,
    cluster_grid: Sequence[int],
    delta: float,
    seeds: Sequence[int],
    eps_dist: Optional[float] = None,
    iteration_cap: int = ITERATION_CAP,
    X_quantum=None,
    restarts: int = 1,
) -> list:
    """CH comparison rows over a cluster-count grid, paired by init.

    Every (n_k, seed) cell runs the classical baseline and the noisy
    variant from the same k-means++ initialization; ``eps_dist``
    defaults to delta. The noisy variant clusters ``X_quantum`` when
    given (a perturbed projection of the same points), so the two
    pipelines stay end-to-end independent as published; each side's CH
    score is computed on its own inputs. Returns dict rows ready for a
    CSV writer.
    """
    X = np.asarray(X, dtype=float)
    Xq = X if X_quantum is None else np.asarray(X_quantum, dtype=float)
    if Xq.shape != X.shape:
        raise DataError("quantum-side matrix must match the classical shape")
    if eps_dist is None:
        eps_dist = delta
    rows = []
    for n_k in cluster_grid:
        for seed in seeds:
            classical = kmeans_fit(
                X, n_k, init=seed, iteration_cap=iteration_cap, restarts=restarts
            )
            quantum = qmeans_fit(
                Xq,
                n_k,
                delta=delta,
                eps_dist=eps_dist,
                init=seed,
                ctx=NoiseContext(seed=seed),
                iteration_cap=iteration_cap,
                restarts=restarts,
            )
            ch_c = ch_index(X, classical)
            ch_q = ch_index(Xq, quantum)
            rel = abs(ch_q - ch_c) / ch_c if math.isfinite(ch_c) and ch_c else math.nan
            rows.append(
                {
                    "n_k": int(n_k),
                    "seed": int(seed),
                    "ch_classical": ch_c,
                    "ch_quantum": ch_q,
                    "rel_diff": rel,
                    "iterations_classical": classical.iterations,
                    "iterations_quantum": quantum.iterations,
                }
            )
    return rows
