"""Batch front end: fit, crossover, tomography-study, resources, qmeans-study.

Each command reads one declarative config file, writes CSV tables (and
rendered figures) into a per-command directory, and finishes with a
manifest hashing every output. Exit codes follow the error taxonomy:
0 success, 2 config, 3 data, 4 infeasible, 1 internal.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .advantage import COUNT_NOTE, CostModel, find_crossover, measure_params, qram_estimate
from .config import RunConfig, load_config
from .data import PreprocessResult, load_dataset, preprocess
from .errors import ConfigError, ToolkitError
from .pca import PCAModel, fit_exact_pca, select_below_threshold, select_for_variance
from .pipeline import build_bundle, run_detector
from .qmeans import qmeans_study
from .qpca import QpcaRequest, extract_top_k, quantum_binary_search_theta
from .qsim import NoiseContext, TomographyPlan, tomography_study
from .reports import (
    RunWriter,
    crossover_figure,
    metrics_vs_alpha_figure,
    qmeans_figure,
    tomography_figure,
)
from .synthetic import synthetic_corpus

COMMANDS = ("fit", "crossover", "tomography-study", "resources", "qmeans-study")
METRICS = ("recall", "precision", "f1", "accuracy")


def _prepare_data(cfg: RunConfig, seed: int) -> PreprocessResult:
    data = cfg.require("data")
    if data.synthetic is not None:
        spec = data.synthetic
        raw = synthetic_corpus(
            n_normal=spec.n_normal,
            n_attack=spec.n_attack,
            d=spec.d,
            seed=seed,
            attack_shift=spec.attack_shift,
            attack_scale=spec.attack_scale,
        )
    else:
        raw = load_dataset(data.csv.path, data.csv.schema())
    return preprocess(raw, data.split_spec(seed))


def _qpca_request(cfg: RunConfig, delta: Optional[float] = None) -> QpcaRequest:
    model, errors = cfg.model, cfg.errors
    return QpcaRequest(
        p_major=model.p_major,
        p_minor=model.p_minor,
        theta_min=model.theta_min,
        epsilon=errors.epsilon,
        epsilon_theta=errors.epsilon_theta,
        eta=errors.eta,
        delta=errors.delta if delta is None else delta,
        gamma=errors.gamma,
        heuristic_divisor=cfg.model.heuristic_divisor,
    )


def _write_model_csv(writer: RunWriter, name: str, model: PCAModel) -> None:
    header = ["component", "eigenvalue"] + [f"v{j}" for j in range(model.dim)]
    rows = [
        [i, model.eigenvalues[i]] + list(model.components[i]) for i in range(model.rank)
    ]
    writer.write_csv(name, header, rows)


def _median_table(per_seed: dict, keys) -> dict:
    """per_seed[key][metric][side] lists -> median per cell."""
    table = {}
    for key in keys:
        table[key] = {
            metric: {
                side: float(np.median(per_seed[key][metric][side]))
                for side in ("c", "q")
            }
            for metric in METRICS
        }
    return table


def _fit_alpha_grid(cfg: RunConfig, writer: RunWriter, kind: str) -> None:
    alphas = cfg.model.alphas
    blank = lambda: {m: {"c": [], "q": []} for m in METRICS}  # noqa: E731
    per_alpha = {alpha: blank() for alpha in alphas}
    seed_rows = []
    summary_rows = []
    for seed in cfg.seeds:
        prepared = _prepare_data(cfg, seed)
        bundle = build_bundle(prepared.train.values, _qpca_request(cfg), NoiseContext(seed=seed))
        _write_model_csv(writer, f"model_exact_seed{seed}.csv", bundle.exact)
        _write_model_csv(writer, f"model_quantum_seed{seed}.csv", bundle.quantum)
        summary_rows.append(
            [
                seed,
                bundle.k_exact,
                bundle.q_exact,
                bundle.k_quantum,
                bundle.q_quantum,
                bundle.theta,
                bundle.theta_min,
                bundle.selection_major.p,
                prepared.train.shape[0],
                prepared.train.shape[1],
            ]
        )
        for alpha in alphas:
            for side, quantum in (("c", False), ("q", True)):
                _, metrics = run_detector(
                    kind, bundle, alpha, prepared.validation, prepared.test, quantum=quantum
                )
                record = metrics.as_dict()
                for metric in METRICS:
                    per_alpha[alpha][metric][side].append(record[metric])
                seed_rows.append(
                    [seed, alpha * 100.0, side] + [record[m] for m in METRICS]
                )
    medians = _median_table(per_alpha, alphas)
    table_rows = [
        [alpha * 100.0]
        + [medians[alpha][m][side] for m in METRICS for side in ("c", "q")]
        for alpha in alphas
    ]
    header = ["alpha_pct"] + [f"{m}_{side}" for m in METRICS for side in ("c", "q")]
    writer.write_csv(
        "fit_metrics.csv",
        header,
        table_rows,
        comments=[
            f"detector={kind} medians over seeds={list(cfg.seeds)}",
            "columns mirror the published alpha tables: (c) exact model, (q) noisy extraction",
        ],
    )
    writer.write_csv(
        "fit_metrics_per_seed.csv",
        ["seed", "alpha_pct", "side"] + list(METRICS),
        seed_rows,
    )
    writer.write_csv(
        "model_summary.csv",
        [
            "seed",
            "k_exact",
            "q_exact",
            "k_quantum",
            "q_quantum",
            "theta",
            "theta_min",
            "p_major_achieved",
            "train_rows",
            "features",
        ],
        summary_rows,
    )
    figure_table = {
        metric: (
            [medians[a][metric]["c"] for a in alphas],
            [medians[a][metric]["q"] for a in alphas],
        )
        for metric in METRICS
    }
    writer.save_figure(
        "fit_metrics.png",
        metrics_vs_alpha_figure([a * 100.0 for a in alphas], figure_table, f"{kind} detector"),
    )


def _fit_recon_delta_sweep(cfg: RunConfig, writer: RunWriter) -> None:
    deltas = cfg.model.recon_deltas
    blank = lambda: {m: {"c": [], "q": []} for m in METRICS}  # noqa: E731
    per_delta = {delta: blank() for delta in deltas}
    seed_rows = []
    for seed in cfg.seeds:
        prepared = _prepare_data(cfg, seed)
        classical_bundle = build_bundle(prepared.train.values, _qpca_request(cfg))
        _write_model_csv(writer, f"model_exact_seed{seed}.csv", classical_bundle.exact)
        detector_c, metrics_c = run_detector(
            "recon", classical_bundle, 0.0, prepared.validation, prepared.test, quantum=False
        )
        record_c = metrics_c.as_dict()
        for delta in deltas:
            # the classical threshold stays fixed so only the vector error varies
            bundle = build_bundle(
                prepared.train.values, _qpca_request(cfg, delta=delta), NoiseContext(seed=seed)
            )
            _, metrics_q = run_detector(
                "recon",
                bundle,
                0.0,
                prepared.validation,
                prepared.test,
                quantum=True,
                fixed_t=detector_c.t,
            )
            record_q = metrics_q.as_dict()
            for metric in METRICS:
                per_delta[delta][metric]["c"].append(record_c[metric])
                per_delta[delta][metric]["q"].append(record_q[metric])
            seed_rows.append(
                [seed, delta]
                + [record_q[m] for m in METRICS]
                + [record_c[m] for m in METRICS]
            )
    medians = _median_table(per_delta, deltas)
    table_rows = [
        [delta] + [medians[delta][m][side] for m in METRICS for side in ("q", "c")]
        for delta in deltas
    ]
    header = ["delta"] + [f"{m}_{side}" for m in METRICS for side in ("q", "c")]
    writer.write_csv(
        "recon_delta_metrics.csv",
        header,
        table_rows,
        comments=[
            f"reconstruction-loss detector, medians over seeds={list(cfg.seeds)}",
            "classical threshold tuned once and held fixed across the delta grid",
        ],
    )
    writer.write_csv(
        "recon_delta_per_seed.csv",
        ["seed", "delta"] + [f"{m}_q" for m in METRICS] + [f"{m}_c" for m in METRICS],
        seed_rows,
    )
    figure_table = {
        metric: (
            [medians[dl][metric]["c"] for dl in deltas],
            [medians[dl][metric]["q"] for dl in deltas],
        )
        for metric in METRICS
    }
    fig = metrics_vs_alpha_figure(list(deltas), figure_table, "recon detector, delta sweep")
    for axis in fig.axes:
        axis.set_xlabel("delta")
        axis.set_xscale("log")
    writer.save_figure("recon_delta_metrics.png", fig)


def cmd_fit(cfg: RunConfig, writer: RunWriter) -> None:
    kind = cfg.model.detector
    if kind == "recon" and cfg.model.recon_deltas is not None:
        _fit_recon_delta_sweep(cfg, writer)
    else:
        _fit_alpha_grid(cfg, writer, kind)


def cmd_crossover(cfg: RunConfig, writer: RunWriter) -> None:
    section = cfg.require("crossover")
    if section.params is not None:
        params = section.params
    else:
        prepared = _prepare_data(cfg, cfg.seeds[0])
        model = fit_exact_pca(prepared.train.values)
        major = select_for_variance(model, cfg.model.p_major, "major")
        minor = None
        if cfg.model.p_minor is not None:
            minor = select_for_variance(model, cfg.model.p_minor, "minor")
        elif cfg.model.theta_min is not None:
            minor = select_below_threshold(model, cfg.model.theta_min)
        params = measure_params(prepared.train.values, major, minor)
    report = find_crossover(
        params,
        cfg.errors.quantum_error_params(),
        CostModel(section.variant),
        section.n_grid,
        section.d_grid,
        growth_model=section.growth_model,
    )
    writer.write_keyvalue(
        "crossover_params.csv",
        {k: v for k, v in params.as_dict().items()},
        comments=[COUNT_NOTE],
    )
    writer.write_csv(
        "crossover_grid.csv",
        ["n", "d", "quantum_count", "classical_count", "advantage"],
        [[c.n, c.d, c.quantum_count, c.classical_count, c.advantage] for c in report.cells],
        comments=[
            COUNT_NOTE,
            f"classical baseline: {report.classical_variant}; growth model: {report.growth_model}",
        ],
    )
    frontier_rows = []
    for d in sorted(report.frontier):
        grid_n = report.frontier[d]
        frontier_rows.append(
            [
                d,
                grid_n,
                report.analytic_frontier[d],
                "ok" if grid_n is not None else "no advantage",
            ]
        )
    writer.write_csv(
        "crossover_frontier.csv",
        ["d", "grid_frontier_n", "analytic_frontier_n", "status"],
        frontier_rows,
        comments=[COUNT_NOTE, f"single_crossing={report.single_crossing}"],
    )
    writer.save_figure(
        "crossover.png",
        crossover_figure(report.cells, report.frontier, report.classical_variant),
    )


def _tomography_vector(cfg: RunConfig) -> np.ndarray:
    section = cfg.tomography
    if section.basis_vector:
        if section.dimension is None:
            raise ConfigError("tomography.basis_vector needs dimension")
        vector = np.zeros(section.dimension)
        vector[0] = 1.0
        return vector
    if cfg.data is not None:
        prepared = _prepare_data(cfg, cfg.seeds[0])
        model = fit_exact_pca(prepared.train.values)
        return model.components[0]
    if section.dimension is not None:
        rng = np.random.default_rng(cfg.seeds[0])
        vector = rng.normal(size=section.dimension)
        return vector / np.linalg.norm(vector)
    raise ConfigError("tomography needs a data section, a dimension, or basis_vector")


def cmd_tomography_study(cfg: RunConfig, writer: RunWriter) -> None:
    section = cfg.require("tomography")
    x = _tomography_vector(cfg)
    d = x.shape[0]
    ctx = NoiseContext(seed=cfg.seeds[0])
    comments = [f"dimension d={d}", "l2 sample bound: N(delta) = ceil(36 d ln(d) / delta^2)"]
    curve_rows = []
    if section.deltas is not None or section.sample_counts is not None:
        curve_rows = tomography_study(
            x,
            ctx,
            deltas=section.deltas,
            sample_counts=section.sample_counts,
            repetitions=section.repetitions,
            heuristic_divisor=section.heuristic_divisor,
        )
        if section.deltas is not None:
            for delta in section.deltas:
                bound = TomographyPlan(d, float(delta)).sample_bound
                comments.append(f"delta={delta:g} -> N={bound}")
            if section.heuristic_divisor > 1.0:
                comments.append(f"budgets divided by h={section.heuristic_divisor:g}")
        writer.write_csv(
            "tomography_curve.csv",
            ["delta", "samples", "theory_samples", "median_error", "p05", "p95"],
            [
                [row.delta, row.samples, row.theory_samples, row.median_error, row.p05, row.p95]
                for row in curve_rows
            ],
            comments=comments,
        )
    histogram_errors = None
    if section.fixed_samples is not None:
        rows = tomography_study(
            x,
            ctx,
            sample_counts=[section.fixed_samples],
            repetitions=section.fixed_repetitions,
        )
        histogram_errors = rows[0].errors
        writer.write_csv(
            "tomography_fixed_trials.csv",
            ["trial", "error"],
            [[i, err] for i, err in enumerate(histogram_errors)],
            comments=[
                f"dimension d={d}",
                f"{section.fixed_repetitions} repetitions at {section.fixed_samples} samples",
            ],
        )
        counts, edges = np.histogram(histogram_errors, bins=30)
        writer.write_csv(
            "tomography_histogram.csv",
            ["bin_left", "bin_right", "count"],
            [[edges[i], edges[i + 1], int(counts[i])] for i in range(counts.size)],
            comments=[f"{section.fixed_repetitions} trials at {section.fixed_samples} samples"],
        )
    if not curve_rows and histogram_errors is None:
        raise ConfigError("tomography section requests no study: give deltas, sample_counts or fixed_samples")
    writer.save_figure("tomography.png", tomography_figure(curve_rows, histogram_errors))


def cmd_resources(cfg: RunConfig, writer: RunWriter) -> None:
    section = cfg.require("resources")
    estimate = qram_estimate(section.n, section.d, section.qram, section.allow_extrapolation)
    writer.write_keyvalue(
        "resource_report.csv",
        estimate.as_dict(),
        comments=[
            "per-query latency and qubit totals from the published operating points",
            "anchor_* rows describe the published circuit at the anchor address width",
        ],
    )


def _quantum_projection(cfg: RunConfig, X: np.ndarray, exact: PCAModel, seed: int) -> np.ndarray:
    qm = cfg.qmeans
    request = QpcaRequest(
        p_major=qm.projection_p,
        epsilon=qm.projection_epsilon,
        epsilon_theta=qm.projection_epsilon,
        eta=qm.projection_eta,
        delta=qm.projection_delta,
        gamma=cfg.errors.gamma,
    )
    ctx = NoiseContext(seed=seed)
    theta = quantum_binary_search_theta(
        exact, qm.projection_p, request.search_epsilon, request.eta, ctx,
        request.resolve_gamma(exact.dim),
    )
    majors = extract_top_k(X, exact, theta, request, ctx)
    return X @ majors.components[0][:, None]


def cmd_qmeans_study(cfg: RunConfig, writer: RunWriter) -> None:
    qm = cfg.require("qmeans")
    all_rows = []
    for seed in cfg.seeds:
        prepared = _prepare_data(cfg, seed)
        X = prepared.train.values
        exact = fit_exact_pca(X)
        projection_c = X @ exact.components[0][:, None]
        projection_q = _quantum_projection(cfg, X, exact, seed)
        all_rows.extend(
            qmeans_study(
                projection_c,
                qm.clusters,
                qm.delta,
                seeds=(seed,),
                eps_dist=qm.eps_dist,
                iteration_cap=qm.iteration_cap,
                X_quantum=projection_q,
                restarts=qm.restarts,
            )
        )
    writer.write_csv(
        "qmeans_ch.csv",
        [
            "n_k",
            "seed",
            "ch_classical",
            "ch_quantum",
            "rel_diff_pct",
            "iterations_classical",
            "iterations_quantum",
        ],
        [
            [
                row["n_k"],
                row["seed"],
                row["ch_classical"],
                row["ch_quantum"],
                row["rel_diff"] * 100.0,
                row["iterations_classical"],
                row["iterations_quantum"],
            ]
            for row in all_rows
        ],
        comments=[
            "classical side: exact first-component projection + k-means",
            "quantum side: noisy extraction projection + noisy clustering, paired by seed",
        ],
    )
    summary = []
    for n_k in qm.clusters:
        rows = [row for row in all_rows if row["n_k"] == n_k]
        rels = [row["rel_diff"] * 100.0 for row in rows]
        summary.append(
            {
                "n_k": n_k,
                "ch_classical": float(np.median([row["ch_classical"] for row in rows])),
                "ch_quantum": float(np.median([row["ch_quantum"] for row in rows])),
                "median_rel_diff_pct": float(np.median(rels)),
                "max_rel_diff_pct": float(np.max(rels)),
            }
        )
    writer.write_csv(
        "qmeans_summary.csv",
        ["n_k", "ch_classical", "ch_quantum", "median_rel_diff_pct", "max_rel_diff_pct"],
        [
            [s["n_k"], s["ch_classical"], s["ch_quantum"], s["median_rel_diff_pct"], s["max_rel_diff_pct"]]
            for s in summary
        ],
        comments=[f"medians over seeds={list(cfg.seeds)}"],
    )
    writer.save_figure("qmeans_ch.png", qmeans_figure(summary))


_DISPATCH = {
    "fit": cmd_fit,
    "crossover": cmd_crossover,
    "tomography-study": cmd_tomography_study,
    "resources": cmd_resources,
    "qmeans-study": cmd_qmeans_study,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qadvantage",
        description="PCA-based intrusion detection under simulated quantum extraction errors",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        command = sub.add_parser(name)
        command.add_argument("--config", required=True, help="YAML or JSON run config")
        command.add_argument("--output-dir", default=None, help="override the config output_dir")
        command.add_argument("--seed", type=int, default=None, help="replace the seed list")
    return parser


def _emit_error(exc: Exception, category: str) -> None:
    payload = {"error": {"category": category, "message": str(exc)}}
    sys.stderr.write(json.dumps(payload) + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ToolkitError as exc:
        _emit_error(exc, exc.category)
        return exc.exit_code
    if args.output_dir is not None:
        cfg = dataclasses.replace(cfg, output_dir=Path(args.output_dir).resolve())
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seeds=(args.seed,))
    digest = hashlib.sha256(Path(args.config).read_bytes()).hexdigest()
    writer = RunWriter(cfg.output_dir / args.command.replace("-", "_"))
    try:
        _DISPATCH[args.command](cfg, writer)
    except ToolkitError as exc:
        _emit_error(exc, exc.category)
        writer.finalize(
            args.command,
            digest,
            cfg.seeds,
            status="error",
            error={"category": exc.category, "message": str(exc)},
        )
        return exc.exit_code
    except ValueError as exc:
        # contract violations bubbling up from module-level validation
        _emit_error(exc, "config")
        writer.finalize(
            args.command,
            digest,
            cfg.seeds,
            status="error",
            error={"category": "config", "message": str(exc)},
        )
        return 2
    writer.finalize(args.command, digest, cfg.seeds)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
