"""Deterministic output writers and the run manifest.

CSV cells go through one canonical formatter so identical configs and
seeds reproduce byte-identical files. Figures render through the Agg
backend straight to disk; the manifest, written last, lists every other
output file with its SHA-256 content hash.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

MANIFEST_NAME = "run_manifest.json"


def format_cell(value) -> str:
    """Canonical text for one CSV cell."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    number = float(value)
    if math.isnan(number):
        return "nan"
    if math.isinf(number):
        return "inf" if number > 0 else "-inf"
    if number == int(number) and abs(number) < 1e16:
        return str(int(number))
    return format(number, ".10g")


def sha256_of(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


class RunWriter:
    """Collects every artifact of one command run under one directory."""

    def __init__(self, output_dir) -> None:
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []

    def _register(self, path: Path) -> Path:
        self.files.append(path)
        return path

    def write_csv(
        self,
        name: str,
        header: Sequence[str],
        rows: Iterable[Sequence],
        comments: Sequence[str] = (),
    ) -> Path:
        path = self.output_dir / name
        lines = [f"# {comment}" for comment in comments]
        lines.append(",".join(header))
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row width {len(row)} != header width {len(header)} in {name}")
            lines.append(",".join(format_cell(cell) for cell in row))
        path.write_text("\n".join(lines) + "\n")
        return self._register(path)

    def write_keyvalue(self, name: str, mapping: Mapping, comments: Sequence[str] = ()) -> Path:
        rows = [(key, mapping[key]) for key in mapping]
        return self.write_csv(name, ("key", "value"), rows, comments=comments)

    def save_figure(self, name: str, fig) -> Path:
        path = self.output_dir / name
        fig.savefig(path, dpi=120, metadata={"Software": None})
        plt.close(fig)
        return self._register(path)

    def finalize(
        self,
        command: str,
        config_digest: str,
        seeds: Sequence[int],
        status: str = "ok",
        error: Optional[Mapping[str, str]] = None,
    ) -> Path:
        manifest = {
            "command": command,
            "config_sha256": config_digest,
            "seeds": list(int(s) for s in seeds),
            "status": status,
            "outputs": [
                {
                    "name": path.name,
                    "sha256": sha256_of(path),
                    "bytes": path.stat().st_size,
                }
                for path in sorted(self.files, key=lambda p: p.name)
            ],
        }
        if error is not None:
            manifest["error"] = dict(error)
        path = self.output_dir / MANIFEST_NAME
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return path


def metrics_vs_alpha_figure(alphas, table, title: str):
    """Overlay the classical and noisy detector metrics over the grid.

    ``table`` maps metric name -> (classical values, quantum values).
    """
    fig, axes = plt.subplots(1, len(table), figsize=(4 * len(table), 3.2), squeeze=False)
    for axis, (metric, (classical, quantum)) in zip(axes[0], table.items()):
        axis.plot(alphas, classical, "o-", label="classical")
        axis.plot(alphas, quantum, "s--", label="quantum")
        axis.set_xlabel("false alarm rate")
        axis.set_ylabel(f"{metric} (%)")
        axis.grid(alpha=0.3)
    axes[0][0].legend()
    fig.suptitle(title)
    fig.tight_layout()
    return fig


def crossover_figure(cells, frontier, classical_variant: str):
    ds = sorted({cell.d for cell in cells})
    fig, axes = plt.subplots(1, len(ds), figsize=(4.5 * len(ds), 3.4), squeeze=False)
    for axis, d in zip(axes[0], ds):
        rows = sorted((c for c in cells if c.d == d), key=lambda c: c.n)
        ns = [c.n for c in rows]
        axis.loglog(ns, [c.quantum_count for c in rows], label="quantum queries")
        axis.loglog(ns, [c.classical_count for c in rows], label=classical_variant)
        boundary = frontier.get(d)
        if boundary is not None:
            axis.axvline(boundary, color="gray", linestyle=":", label=f"frontier n={boundary:.3g}")
        axis.set_xlabel("samples n")
        axis.set_ylabel("operation count")
        axis.set_title(f"d = {int(d)}")
        axis.grid(alpha=0.3, which="both")
        axis.legend(fontsize=8)
    fig.tight_layout()
    return fig


def tomography_figure(curve_rows, histogram_errors):
    panels = 2 if histogram_errors is not None else 1
    fig, axes = plt.subplots(1, panels, figsize=(5 * panels, 3.4), squeeze=False)
    axis = axes[0][0]
    if curve_rows:
        samples = [row.samples for row in curve_rows]
        med = [row.median_error for row in curve_rows]
        lo = [row.p05 for row in curve_rows]
        hi = [row.p95 for row in curve_rows]
        axis.fill_between(samples, lo, hi, alpha=0.25, label="5th-95th pct")
        axis.plot(samples, med, "o-", label="median error")
        axis.set_xscale("log")
        axis.set_xlabel("samples")
        axis.set_ylabel("l2 error")
        axis.grid(alpha=0.3)
        axis.legend()
    if histogram_errors is not None:
        axes[0][1].hist(histogram_errors, bins=30)
        axes[0][1].set_xlabel("l2 error")
        axes[0][1].set_ylabel("trials")
        axes[0][1].grid(alpha=0.3)
    fig.tight_layout()
    return fig


def qmeans_figure(summary_rows):
    fig, axis = plt.subplots(figsize=(5.5, 3.4))
    n_ks = [row["n_k"] for row in summary_rows]
    axis.plot(n_ks, [row["ch_classical"] for row in summary_rows], "o-", label="k-means")
    axis.plot(n_ks, [row["ch_quantum"] for row in summary_rows], "s--", label="noisy variant")
    axis.set_xlabel("clusters")
    axis.set_ylabel("CH index (median over seeds)")
    axis.grid(alpha=0.3)
    axis.legend()
    fig.tight_layout()
    return fig
