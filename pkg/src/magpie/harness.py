"""Experiment orchestration: config files, dataset construction, solver runs and artifacts.

A config file is INI with one ``[experiment]`` section and any number of
``[solver.NAME]`` sections::

    [experiment]
    n = 512
    m = 128
    overlap = 0.5
    eta = 0.05
    seed = 0
    object = texture
    alpha = 0.01
    tol = 1e-4
    max_epochs = 200

    [solver.rpie]
    algorithm = rpie

    [solver.magpie7]
    algorithm = magpie
    levels = 7

Solver sections inherit ``alpha``, ``tol``, ``max_epochs``, ``seed`` and
``levels`` from ``[experiment]`` unless they set their own.

Every run writes ``NAME/log.csv``, ``NAME/recon.cf2d``, ``NAME/magnitude.pgm``
and ``NAME/phase.pgm`` below the output directory, plus one ``manifest.json``.
"""

from __future__ import annotations

import configparser
import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .formats import write_field, write_pgm
from .metrics import MetricRow
from .simulate import (
    Dataset,
    load_grayscale_object,
    make_dataset,
    make_synthetic_object,
    make_zone_plate_probe,
    scan_positions,
)
from .solvers import RunLog, SolverConfig, initial_object, run_solver

__all__ = [
    "CSV_COLUMNS",
    "ExperimentConfig",
    "SolverResult",
    "load_config",
    "build_dataset",
    "run_experiment",
    "export_images",
    "write_log_csv",
    "write_combined_csv",
    "read_log_csv",
    "epochs_to_tol",
]

CSV_COLUMNS = ("epoch", "residual", "error", "grad_criterion", "wall_ms")
EPOCH_NOTE = "metrics are logged once per epoch (one full shuffled sweep over all scan regions; one iteration for lbfgs)"

_INHERITED = ("alpha", "tol", "max_epochs", "seed", "levels", "timing")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to rebuild a dataset and rerun a set of solvers."""

    n: int = 512
    m: int = 128
    overlap: float = 0.5
    eta: float = 0.05
    seed: int = 0
    object: str = "texture"
    object_seed: int | None = None
    magnitude_image: str | None = None
    phase_image: str | None = None
    aperture_fraction: float = 0.5
    phase_coeff: float | None = None
    alpha: float = 0.01
    levels: int = 1
    tol: float = 1e-4
    max_epochs: int = 100
    timing: bool = True
    out: str = "runs"
    solvers: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ConfigError("n and m must be positive")
        if self.m & (self.m - 1):
            raise ConfigError(f"probe size m must be a power of two, got {self.m}")
        if self.m > self.n:
            raise ConfigError(f"probe size {self.m} exceeds object size {self.n}")
        if not 0.0 <= self.overlap < 1.0:
            raise ConfigError(f"overlap must lie in [0, 1), got {self.overlap}")
        if self.eta < 0:
            raise ConfigError(f"eta must be non-negative, got {self.eta}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if (self.magnitude_image is None) != (self.phase_image is None):
            raise ConfigError("magnitude_image and phase_image must be given together")
        for name, cfg in self.solvers.items():
            if not isinstance(cfg, SolverConfig):
                raise ConfigError(f"solver {name!r} is not a SolverConfig")

    def solver(self, **overrides) -> SolverConfig:
        """A solver config carrying this experiment's shared settings."""
        base = {key: getattr(self, key) for key in _INHERITED}
        base.update(overrides)
        return SolverConfig(**base)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["solvers"] = {name: asdict(cfg) for name, cfg in self.solvers.items()}
        return out


def _parse_value(key, raw, kind):
    raw = raw.strip()
    if raw == "" or raw.lower() == "none":
        return None
    try:
        if kind is bool:
            return raw.lower() in ("1", "true", "yes", "on")
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


_EXPERIMENT_TYPES = {
    "n": int,
    "m": int,
    "overlap": float,
    "eta": float,
    "seed": int,
    "object": str,
    "object_seed": int,
    "magnitude_image": str,
    "phase_image": str,
    "aperture_fraction": float,
    "phase_coeff": float,
    "alpha": float,
    "levels": int,
    "tol": float,
    "max_epochs": int,
    "timing": bool,
    "out": str,
}
_SOLVER_TYPES = {
    "algorithm": str,
    "alpha": float,
    "levels": int,
    "tol": float,
    "max_epochs": int,
    "seed": int,
    "lbfgs_history": int,
    "timing": bool,
}


def load_config(path=None, overrides: dict | None = None, solver_overrides: dict | None = None) -> ExperimentConfig:
    """Read an INI config (or start from defaults) and apply overrides.

    ``overrides`` replace ``[experiment]`` keys; ``solver_overrides`` are then
    forced onto every solver section, so command-line flags win over files.
    """
    exp: dict = {}
    solver_sections: dict[str, dict] = {}
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        for section in parser.sections():
            if section == "experiment":
                for key, raw in parser[section].items():
                    if key not in _EXPERIMENT_TYPES:
                        raise ConfigError(f"unknown experiment key {key!r}")
                    exp[key] = _parse_value(key, raw, _EXPERIMENT_TYPES[key])
            elif section.startswith("solver."):
                values = {}
                for key, raw in parser[section].items():
                    if key not in _SOLVER_TYPES:
                        raise ConfigError(f"unknown solver key {key!r} in [{section}]")
                    values[key] = _parse_value(key, raw, _SOLVER_TYPES[key])
                solver_sections[section[len("solver.") :]] = values
            else:
                raise ConfigError(f"unknown section [{section}]")
    for key, value in (overrides or {}).items():
        if value is not None:
            exp[key] = value
    exp = {k: v for k, v in exp.items() if v is not None or k in ("object_seed", "magnitude_image", "phase_image", "phase_coeff")}
    try:
        cfg = ExperimentConfig(**exp)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    solvers = {}
    forced = {k: v for k, v in (solver_overrides or {}).items() if v is not None}
    for name, values in solver_sections.items():
        values = {k: v for k, v in values.items() if v is not None}
        values.update(forced)
        solvers[name] = cfg.solver(**values)
    return replace(cfg, solvers=solvers)


def build_dataset(cfg: ExperimentConfig) -> Dataset:
    """Probe, object, scan plan and (noisy) measurements described by ``cfg``."""
    probe = make_zone_plate_probe(cfg.m, cfg.aperture_fraction, cfg.phase_coeff)
    if cfg.magnitude_image is not None:
        obj = load_grayscale_object(cfg.magnitude_image, cfg.phase_image, cfg.n)
    else:
        obj_seed = cfg.seed if cfg.object_seed is None else cfg.object_seed
        obj = make_synthetic_object(cfg.n, cfg.object, obj_seed)
    plan = scan_positions(cfg.n, cfg.m, cfg.overlap)
    return make_dataset(obj, probe, plan, cfg.eta, cfg.seed)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_log_csv(path, rows) -> None:
    """Write metric rows with a header and 17 significant digits."""
    write_combined_csv(path, {None: rows})


def write_combined_csv(path, logs: dict) -> None:
    """Rows of several runs in one file, prefixed by a ``solver`` column.

    A single ``None`` key writes the plain per-run layout without that column.
    """
    tagged = list(logs) != [None]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow((("solver",) if tagged else ()) + CSV_COLUMNS)
        for name, rows in logs.items():
            for row in rows:
                values = [_fmt(getattr(row, col)) for col in CSV_COLUMNS]
                writer.writerow(([name] if tagged else []) + values)


def read_log_csv(path) -> list[MetricRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            MetricRow(
                int(rec["epoch"]),
                float(rec["residual"]),
                float(rec["error"]),
                float(rec["grad_criterion"]),
                float(rec["wall_ms"]),
            )
            for rec in reader
        ]


def export_images(z, directory) -> tuple[Path, Path]:
    """16-bit magnitude and phase images of ``z``.

    Magnitude spans ``[0, max|z|]`` (an all-zero field gives a black image);
    phase maps ``[-pi, pi]`` onto the full gray range, so phase 0 is mid-gray.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    z = np.asarray(z)
    mag = np.abs(z)
    peak = mag.max(initial=0.0)
    mag_px = np.zeros(mag.shape, dtype=np.int64) if peak == 0 else np.rint(mag / peak * 65535).astype(np.int64)
    phase_px = np.rint((np.angle(z) + np.pi) / (2 * np.pi) * 65535).astype(np.int64)
    mag_path, phase_path = directory / "magnitude.pgm", directory / "phase.pgm"
    write_pgm(mag_path, mag_px, 65535)
    write_pgm(phase_path, phase_px, 65535)
    return mag_path, phase_path


@dataclass
class SolverResult:
    name: str
    config: SolverConfig
    log: RunLog | None = None
    z: np.ndarray | None = None
    error: str | None = None

    @property
    def status(self) -> str:
        if self.error is not None:
            return "error"
        return self.log.status

    @property
    def failed(self) -> bool:
        return self.status in ("error", "diverged", "line_search_failed")


def epochs_to_tol(log: RunLog) -> float:
    """Epoch at which the run met its tolerance, ``inf`` if it never did."""
    return float(log.epochs) if log.converged else math.inf


def _solver_entry(result: SolverResult) -> dict:
    entry = {"config": asdict(result.config), "seed": result.config.seed, "status": result.status}
    if result.error is not None:
        entry["error"] = result.error
    else:
        entry["epochs"] = result.log.epochs
        last = result.log.rows[-1]
        entry["final"] = {col: getattr(last, col) for col in CSV_COLUMNS if col != "wall_ms"}
    return entry


def write_manifest(path, cfg: ExperimentConfig, dataset: Dataset, results=(), extra: dict | None = None) -> None:
    manifest = {
        "config": cfg.to_dict(),
        "seeds": {"data": cfg.seed, "object": cfg.seed if cfg.object_seed is None else cfg.object_seed},
        "dataset_checksum": dataset.checksum(),
        "n_regions": dataset.n_regions,
        "note": EPOCH_NOTE,
        "solvers": {r.name: _solver_entry(r) for r in results},
    }
    manifest.update(extra or {})
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def run_one(name: str, solver_cfg: SolverConfig, dataset: Dataset, out_dir: Path | None) -> SolverResult:
    """Run one solver from the all-ones start; any exception is captured in the result."""
    result = SolverResult(name, solver_cfg)
    try:
        result.z, result.log = run_solver(initial_object(dataset.plan.n), dataset, solver_cfg)
    except (ArithmeticError, ValueError) as exc:
        result.error = f"{type(exc).__name__}: {exc}"
        return result
    if out_dir is not None:
        run_dir = out_dir / name
        run_dir.mkdir(parents=True, exist_ok=True)
        write_log_csv(run_dir / "log.csv", result.log.rows)
        write_field(run_dir / "recon.cf2d", result.z)
        export_images(result.z, run_dir)
    return result


def run_experiment(cfg: ExperimentConfig, out_dir=None, dataset: Dataset | None = None) -> dict[str, SolverResult]:
    """Build the dataset once and run every configured solver on it.

    Artifacts go to ``out_dir`` (default ``cfg.out``); pass ``out_dir=False``
    to skip writing files. Solver failures are recorded, not raised.
    """
    if not cfg.solvers:
        raise ConfigError("no solvers configured")
    dataset = build_dataset(cfg) if dataset is None else dataset
    target = None if out_dir is False else Path(cfg.out if out_dir is None else out_dir)
    if target is not None:
        target.mkdir(parents=True, exist_ok=True)
    results = {name: run_one(name, sc, dataset, target) for name, sc in cfg.solvers.items()}
    if target is not None:
        write_manifest(target / "manifest.json", cfg, dataset, results.values())
    return results
