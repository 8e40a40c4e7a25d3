"""Single-file declarative run configuration.

One YAML (or JSON) document drives every command; each command reads
only the sections it needs and rejects runs whose sections are missing.
There are no interactive prompts: everything is decided before the run
starts, and referenced paths must exist at load time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
import yaml

from .advantage import (
    OPTIMISTIC_QRAM,
    REALISTIC_QRAM,
    DatasetParams,
    QramConfig,
    QuantumErrorParams,
)
from .data import LabelSchema, SplitSpec
from .errors import ConfigError

DETECTOR_CHOICES = ("pcc_major", "pcc_major_minor", "ensemble", "recon")

DEFAULT_ALPHAS = (0.01, 0.02, 0.04, 0.06, 0.08, 0.10)


def _reject_unknown(section: dict, allowed: Sequence[str], where: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _as_tuple(value, caster, where: str) -> tuple:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{where} must be a list")
    try:
        return tuple(caster(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where} holds a non-numeric entry: {exc}") from exc


def _grid(value, where: str) -> Tuple[float, ...]:
    """Either an explicit list or {start, stop, points} on a log scale."""
    if isinstance(value, dict):
        _reject_unknown(value, ("start", "stop", "points"), where)
        try:
            start, stop = float(value["start"]), float(value["stop"])
            points = int(value["points"])
        except KeyError as exc:
            raise ConfigError(f"{where} needs start, stop and points") from exc
        if start <= 0 or stop <= start or points < 2:
            raise ConfigError(f"{where} needs 0 < start < stop and points >= 2")
        return tuple(float(x) for x in np.logspace(np.log10(start), np.log10(stop), points))
    return _as_tuple(value, float, where)


@dataclass(frozen=True)
class SyntheticSpec:
    n_normal: int
    n_attack: int
    d: int = 50
    attack_shift: float = 10.0
    attack_scale: float = 1.15


@dataclass(frozen=True)
class CsvSpec:
    path: Path
    label_column: str
    attack_labels: Tuple[str, ...] = ()
    normal_labels: Tuple[str, ...] = ()

    def schema(self) -> LabelSchema:
        return LabelSchema(
            label_column=self.label_column,
            attack_labels=frozenset(self.attack_labels) or None,
            normal_labels=frozenset(self.normal_labels) or None,
        )


@dataclass(frozen=True)
class DataSection:
    synthetic: Optional[SyntheticSpec]
    csv: Optional[CsvSpec]
    split: dict

    def split_spec(self, seed: int) -> SplitSpec:
        return SplitSpec(seed=seed, **self.split)


@dataclass(frozen=True)
class ModelSection:
    detector: str = "pcc_major"
    p_major: float = 0.70
    p_minor: Optional[float] = None
    theta_min: Optional[float] = None
    alphas: Tuple[float, ...] = DEFAULT_ALPHAS
    recon_deltas: Optional[Tuple[float, ...]] = None
    heuristic_divisor: float = 1.0


@dataclass(frozen=True)
class ErrorSection:
    epsilon: float = 1.0
    epsilon_theta: Optional[float] = None
    delta: float = 0.1
    eta: float = 0.1
    gamma: Optional[float] = None

    def quantum_error_params(self) -> QuantumErrorParams:
        return QuantumErrorParams(
            epsilon=self.epsilon,
            epsilon_theta=self.epsilon_theta,
            delta=self.delta,
            eta=self.eta,
        )


@dataclass(frozen=True)
class CrossoverSection:
    variant: str
    n_grid: Tuple[float, ...]
    d_grid: Tuple[float, ...]
    growth_model: str = "fixed"
    params: Optional[DatasetParams] = None


@dataclass(frozen=True)
class TomographySection:
    dimension: Optional[int] = None
    basis_vector: bool = False
    deltas: Optional[Tuple[float, ...]] = None
    sample_counts: Optional[Tuple[int, ...]] = None
    repetitions: int = 50
    heuristic_divisor: float = 1.0
    fixed_samples: Optional[int] = None
    fixed_repetitions: int = 1000


@dataclass(frozen=True)
class ResourceSection:
    n: int
    d: int
    qram: QramConfig
    allow_extrapolation: bool = False


@dataclass(frozen=True)
class QmeansSection:
    clusters: Tuple[int, ...] = tuple(range(10, 101, 10))
    delta: float = 0.0005
    eps_dist: Optional[float] = None
    iteration_cap: int = 300
    restarts: int = 3
    projection_p: float = 0.6
    projection_epsilon: float = 5.0
    projection_eta: float = 0.1
    projection_delta: float = 0.1


@dataclass(frozen=True)
class RunConfig:
    seeds: Tuple[int, ...]
    output_dir: Path
    data: Optional[DataSection] = None
    model: ModelSection = field(default_factory=ModelSection)
    errors: ErrorSection = field(default_factory=ErrorSection)
    crossover: Optional[CrossoverSection] = None
    tomography: Optional[TomographySection] = None
    resources: Optional[ResourceSection] = None
    qmeans: Optional[QmeansSection] = None

    def require(self, section: str):
        value = getattr(self, section)
        if value is None:
            raise ConfigError(f"config has no '{section}' section, required by this command")
        return value


def _parse_data(section: dict, base_dir: Path) -> DataSection:
    _reject_unknown(section, ("synthetic", "csv", "split"), "data")
    synthetic = csv_spec = None
    if ("synthetic" in section) == ("csv" in section):
        raise ConfigError("data section needs exactly one of 'synthetic' or 'csv'")
    if "synthetic" in section:
        spec = dict(section["synthetic"])
        _reject_unknown(
            spec, ("n_normal", "n_attack", "d", "attack_shift", "attack_scale"), "data.synthetic"
        )
        try:
            synthetic = SyntheticSpec(
                n_normal=int(spec["n_normal"]),
                n_attack=int(spec["n_attack"]),
                d=int(spec.get("d", 50)),
                attack_shift=float(spec.get("attack_shift", 10.0)),
                attack_scale=float(spec.get("attack_scale", 1.15)),
            )
        except KeyError as exc:
            raise ConfigError(f"data.synthetic needs {exc.args[0]}") from exc
    else:
        spec = dict(section["csv"])
        _reject_unknown(
            spec, ("path", "label_column", "attack_labels", "normal_labels"), "data.csv"
        )
        try:
            path = (base_dir / str(spec["path"])).resolve()
            csv_spec = CsvSpec(
                path=path,
                label_column=str(spec["label_column"]),
                attack_labels=tuple(str(v) for v in spec.get("attack_labels", ())),
                normal_labels=tuple(str(v) for v in spec.get("normal_labels", ())),
            )
        except KeyError as exc:
            raise ConfigError(f"data.csv needs {exc.args[0]}") from exc
        if not path.exists():
            raise ConfigError(f"dataset path does not exist: {path}")
        if not csv_spec.attack_labels and not csv_spec.normal_labels:
            raise ConfigError("data.csv needs attack_labels and/or normal_labels")
    split = dict(section.get("split", {}))
    allowed = (
        "train_normals",
        "val_normals",
        "val_attacks",
        "test_normals",
        "test_attacks",
        "sampling",
        "trim_fraction",
        "quantile_bins",
    )
    _reject_unknown(split, allowed, "data.split")
    if "train_normals" not in split:
        raise ConfigError("data.split needs train_normals")
    return DataSection(synthetic=synthetic, csv=csv_spec, split=split)


def _parse_model(section: dict) -> ModelSection:
    allowed = (
        "detector",
        "p_major",
        "p_minor",
        "theta_min",
        "alphas",
        "recon_deltas",
        "heuristic_divisor",
    )
    _reject_unknown(section, allowed, "model")
    detector = str(section.get("detector", "pcc_major"))
    if detector not in DETECTOR_CHOICES:
        raise ConfigError(f"model.detector must be one of {DETECTOR_CHOICES}, got {detector!r}")
    alphas = section.get("alphas")
    recon_deltas = section.get("recon_deltas")
    return ModelSection(
        detector=detector,
        p_major=float(section.get("p_major", 0.70)),
        p_minor=None if section.get("p_minor") is None else float(section["p_minor"]),
        theta_min=None if section.get("theta_min") is None else float(section["theta_min"]),
        alphas=DEFAULT_ALPHAS if alphas is None else _as_tuple(alphas, float, "model.alphas"),
        recon_deltas=None
        if recon_deltas is None
        else _as_tuple(recon_deltas, float, "model.recon_deltas"),
        heuristic_divisor=float(section.get("heuristic_divisor", 1.0)),
    )


def _parse_errors(section: dict) -> ErrorSection:
    _reject_unknown(section, ("epsilon", "epsilon_theta", "delta", "eta", "gamma"), "errors")
    return ErrorSection(
        epsilon=float(section.get("epsilon", 1.0)),
        epsilon_theta=None
        if section.get("epsilon_theta") is None
        else float(section["epsilon_theta"]),
        delta=float(section.get("delta", 0.1)),
        eta=float(section.get("eta", 0.1)),
        gamma=None if section.get("gamma") is None else float(section["gamma"]),
    )


def _parse_crossover(section: dict) -> CrossoverSection:
    _reject_unknown(section, ("variant", "n_grid", "d_grid", "growth_model", "params"), "crossover")
    for key in ("variant", "n_grid", "d_grid"):
        if key not in section:
            raise ConfigError(f"crossover needs {key}")
    params = None
    if section.get("params") is not None:
        raw = dict(section["params"])
        try:
            params = DatasetParams(**raw)
        except TypeError as exc:
            raise ConfigError(f"crossover.params: {exc}") from exc
    return CrossoverSection(
        variant=str(section["variant"]),
        n_grid=_grid(section["n_grid"], "crossover.n_grid"),
        d_grid=_grid(section["d_grid"], "crossover.d_grid"),
        growth_model=str(section.get("growth_model", "fixed")),
        params=params,
    )


def _parse_tomography(section: dict) -> TomographySection:
    allowed = (
        "dimension",
        "basis_vector",
        "deltas",
        "sample_counts",
        "repetitions",
        "heuristic_divisor",
        "fixed_samples",
        "fixed_repetitions",
    )
    _reject_unknown(section, allowed, "tomography")
    deltas = section.get("deltas")
    counts = section.get("sample_counts")
    if deltas is not None and counts is not None:
        raise ConfigError("tomography takes deltas or sample_counts, not both")
    return TomographySection(
        dimension=None if section.get("dimension") is None else int(section["dimension"]),
        basis_vector=bool(section.get("basis_vector", False)),
        deltas=None if deltas is None else _as_tuple(deltas, float, "tomography.deltas"),
        sample_counts=None if counts is None else _as_tuple(counts, int, "tomography.sample_counts"),
        repetitions=int(section.get("repetitions", 50)),
        heuristic_divisor=float(section.get("heuristic_divisor", 1.0)),
        fixed_samples=None if section.get("fixed_samples") is None else int(section["fixed_samples"]),
        fixed_repetitions=int(section.get("fixed_repetitions", 1000)),
    )


def _parse_resources(section: dict) -> ResourceSection:
    _reject_unknown(section, ("n", "d", "config", "allow_extrapolation"), "resources")
    for key in ("n", "d"):
        if key not in section:
            raise ConfigError(f"resources needs {key}")
    raw = section.get("config", "optimistic")
    if isinstance(raw, str):
        table = {"optimistic": OPTIMISTIC_QRAM, "realistic": REALISTIC_QRAM}
        if raw not in table:
            raise ConfigError(
                f"resources.config must be 'optimistic', 'realistic' or a mapping, got {raw!r}"
            )
        qram = table[raw]
    elif isinstance(raw, dict):
        allowed = ("gate_error", "magic_state_failure", "cycle_time_ns", "word_size", "label")
        _reject_unknown(raw, allowed, "resources.config")
        try:
            qram = QramConfig(
                gate_error=float(raw["gate_error"]),
                magic_state_failure=float(raw["magic_state_failure"]),
                cycle_time_ns=float(raw["cycle_time_ns"]),
                word_size=int(raw.get("word_size", 1)),
                label=str(raw.get("label", "custom")),
            )
        except KeyError as exc:
            raise ConfigError(f"resources.config needs {exc.args[0]}") from exc
    else:
        raise ConfigError("resources.config must be a label or a mapping")
    return ResourceSection(
        n=int(section["n"]),
        d=int(section["d"]),
        qram=qram,
        allow_extrapolation=bool(section.get("allow_extrapolation", False)),
    )


def _parse_qmeans(section: dict) -> QmeansSection:
    allowed = (
        "clusters",
        "delta",
        "eps_dist",
        "iteration_cap",
        "restarts",
        "projection_p",
        "projection_epsilon",
        "projection_eta",
        "projection_delta",
    )
    _reject_unknown(section, allowed, "qmeans")
    clusters = section.get("clusters")
    return QmeansSection(
        clusters=QmeansSection.clusters if clusters is None else _as_tuple(clusters, int, "qmeans.clusters"),
        delta=float(section.get("delta", 0.0005)),
        eps_dist=None if section.get("eps_dist") is None else float(section["eps_dist"]),
        iteration_cap=int(section.get("iteration_cap", 300)),
        restarts=int(section.get("restarts", 3)),
        projection_p=float(section.get("projection_p", 0.6)),
        projection_epsilon=float(section.get("projection_epsilon", 5.0)),
        projection_eta=float(section.get("projection_eta", 0.1)),
        projection_delta=float(section.get("projection_delta", 0.1)),
    )


def parse_config(document: dict, base_dir: Path) -> RunConfig:
    if not isinstance(document, dict):
        raise ConfigError("config document must be a mapping")
    allowed = (
        "seeds",
        "seed",
        "output_dir",
        "data",
        "model",
        "errors",
        "crossover",
        "tomography",
        "resources",
        "qmeans",
    )
    _reject_unknown(document, allowed, "config")
    if "seeds" in document and "seed" in document:
        raise ConfigError("give either seeds or seed, not both")
    if "seeds" in document:
        seeds = _as_tuple(document["seeds"], int, "seeds")
    elif "seed" in document:
        seeds = (int(document["seed"]),)
    else:
        seeds = (0,)
    if not seeds:
        raise ConfigError("seeds must be non-empty")
    output_dir = (base_dir / str(document.get("output_dir", "runs"))).resolve()
    return RunConfig(
        seeds=seeds,
        output_dir=output_dir,
        data=_parse_data(document["data"], base_dir) if "data" in document else None,
        model=_parse_model(document.get("model", {})),
        errors=_parse_errors(document.get("errors", {})),
        crossover=_parse_crossover(document["crossover"]) if "crossover" in document else None,
        tomography=_parse_tomography(document["tomography"]) if "tomography" in document else None,
        resources=_parse_resources(document["resources"]) if "resources" in document else None,
        qmeans=_parse_qmeans(document["qmeans"]) if "qmeans" in document else None,
    )


def load_config(path) -> RunConfig:
    """Parse a YAML or JSON config file into a validated RunConfig."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix.lower() == ".json":
        try:
            document = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    else:
        try:
            document = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return parse_config(document, path.parent)
