"""Synthetic intrusion corpus for desk-scale runs.

Normal traffic is a correlated Gaussian with a spiked covariance: a few
directions carry most of the variance (the "major" components), the
rest share the remainder evenly, so variance-target selection lands on
a predictable component count. Attacks are drawn from a shifted and
rescaled version of the same model, displaced both inside the major
subspace and along tail directions, so projection-based (T1), minor
(T2), and reconstruction detectors all have signal.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .data import LabelSchema, RawTable

DEFAULT_SPIKE_SHARES = (0.30, 0.14, 0.10, 0.09, 0.085, 0.082)


def synthetic_schema(label_column: str = "label") -> LabelSchema:
    return LabelSchema(
        label_column=label_column,
        attack_labels=frozenset({"attack"}),
        normal_labels=frozenset({"normal"}),
    )


def synthetic_corpus(
    n_normal: int,
    n_attack: int,
    d: int = 50,
    seed: int = 7,
    spike_shares: Sequence[float] = DEFAULT_SPIKE_SHARES,
    attack_shift: float = 10.0,
    attack_scale: float = 1.15,
    include_constant_feature: bool = False,
    dataset_name: str = "synthetic",
) -> RawTable:
    """Gaussian normal class plus a shifted/correlated attack class.

    ``spike_shares`` are the approximate variance fractions of the
    leading components; they must sum below 1 and there must be room for
    at least one tail direction. The attack shift is expressed in
    per-feature standard deviations and split between the second spike
    and two tail directions.
    """
    shares = np.asarray(spike_shares, dtype=float)
    if shares.ndim != 1 or shares.size >= d:
        raise ValueError("need fewer spike shares than dimensions")
    if np.any(shares <= 0) or shares.sum() >= 1.0:
        raise ValueError("spike shares must be positive and sum below 1")
    rng = np.random.default_rng(seed)

    tail = (1.0 - shares.sum()) / (d - shares.size)
    variances = np.concatenate([shares, np.full(d - shares.size, tail)]) * d
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    scale_matrix = np.sqrt(variances)[:, None] * Q.T  # row i: sqrt(var_i) * q_i

    normals = rng.normal(size=(n_normal, d)) @ scale_matrix

    # displace attacks along one major and two tail directions and widen
    # their tail spread so all detector families see them; the major
    # direction is weighted heavier because its natural spread is larger
    direction = 4.0 * Q[:, 1] + Q[:, -1] + Q[:, -2]
    direction /= np.linalg.norm(direction)
    attack_var = variances.copy()
    attack_var[shares.size :] *= attack_scale
    attacks = rng.normal(size=(n_attack, d)) @ (np.sqrt(attack_var)[:, None] * Q.T)
    attacks += attack_shift * direction

    X = np.vstack([normals, attacks])
    labels = np.concatenate([np.zeros(n_normal, dtype=int), np.ones(n_attack, dtype=int)])
    order = rng.permutation(X.shape[0])
    X, labels = X[order], labels[order]

    columns = {f"f{j:02d}": X[:, j] for j in range(d)}
    if include_constant_feature:
        columns["const"] = np.ones(X.shape[0])
    frame = pd.DataFrame(columns)
    return RawTable(features=frame, labels=labels, dataset_name=dataset_name)


def write_synthetic_csv(
    path,
    n_normal: int,
    n_attack: int,
    d: int = 50,
    seed: int = 7,
    label_column: str = "label",
    **kwargs,
) -> Path:
    """Write a synthetic corpus to CSV with a label column."""
    table = synthetic_corpus(n_normal, n_attack, d=d, seed=seed, **kwargs)
    frame = table.features.copy()
    frame[label_column] = np.where(table.labels == 1, "attack", "normal")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path
