"""Command-line entry point ``magpie``.

Exit codes: 0 on success, 1 when a solver fails (or a property suite does not
hold for ``verify``), 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError
from .formats import write_field, write_measurements
from .harness import build_dataset, load_config, run_experiment, write_combined_csv, write_manifest
from .solvers import ALGORITHMS
from .verify import SUITES, run_suites

_EXPERIMENT_FLAGS = {
    "n": "n",
    "m": "m",
    "overlap": "overlap",
    "eta": "eta",
    "seed": "seed",
    "alpha": "alpha",
    "levels": "levels",
    "tol": "tol",
    "max_epochs": "max_epochs",
    "out": "out",
}
_SOLVER_FLAGS = ("alpha", "levels", "tol", "max_epochs", "seed")


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="INI experiment file")
    p.add_argument("--seed", type=_u64)
    p.add_argument("--n", type=int, help="object size")
    p.add_argument("--m", type=int, help="probe size (power of two)")
    p.add_argument("--overlap", type=float)
    p.add_argument("--eta", type=float, help="Poisson noise level")
    p.add_argument("--alpha", type=float)
    p.add_argument("--levels", type=int, help="number of grids used by magpie (1 = rPIE)")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--algorithm", choices=ALGORITHMS)
    p.add_argument("--out", type=Path)
    p.add_argument("--no-timing", action="store_true", help="log wall_ms as 0 so reruns are byte-identical")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magpie", description="Multilevel ptychographic reconstruction")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("probe", "write the zone-plate probe as CF2D"),
        ("object", "write the ground-truth object as CF2D"),
        ("simulate", "write measurements (MEAS), probe, object and a manifest"),
        ("reconstruct", "run one solver"),
        ("compare", "run every configured solver and write a combined CSV"),
    ]:
        _add_common(sub.add_parser(name, help=text))
    v = sub.add_parser("verify", help="run the randomized property suites")
    v.add_argument("--suite", action="append", choices=list(SUITES), help="restrict to these suites")
    return parser


def _load(args):
    overrides = {dst: getattr(args, src) for src, dst in _EXPERIMENT_FLAGS.items()}
    if overrides["out"] is not None:
        overrides["out"] = str(overrides["out"])
    if args.no_timing:
        overrides["timing"] = False
    forced = {key: getattr(args, key) for key in _SOLVER_FLAGS}
    if args.no_timing:
        forced["timing"] = False
    return load_config(args.config, overrides, forced)


def _cmd_probe(cfg, args):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = build_dataset(cfg)
    write_field(out / "probe.cf2d", ds.probe)
    print(out / "probe.cf2d")
    return 0


def _cmd_object(cfg, args):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = build_dataset(cfg)
    write_field(out / "object.cf2d", ds.ground_truth)
    print(out / "object.cf2d")
    return 0


def _cmd_simulate(cfg, args):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = build_dataset(cfg)
    write_measurements(out / "measurements.meas", ds.measurements)
    write_field(out / "probe.cf2d", ds.probe)
    write_field(out / "object.cf2d", ds.ground_truth)
    offsets = [[r.row, r.col] for r in ds.plan.regions]
    write_manifest(out / "manifest.json", cfg, ds, extra={"offsets": offsets})
    print(f"{ds.n_regions} regions -> {out / 'measurements.meas'}")
    return 0


def _report(results) -> int:
    for name, res in results.items():
        if res.error is not None:
            print(f"{name}: error {res.error}", file=sys.stderr)
        else:
            last = res.log.rows[-1]
            print(f"{name}: {res.status} after {res.log.epochs} epochs, residual {last.residual:.6g}, error {last.error:.6g}, criterion {last.grad_criterion:.3g}")
    return 1 if any(r.failed for r in results.values()) else 0


def _cmd_reconstruct(cfg, args):
    if args.algorithm is not None:
        cfg = replace(cfg, solvers={args.algorithm: cfg.solver(algorithm=args.algorithm)})
    elif not cfg.solvers:
        cfg = replace(cfg, solvers={"magpie": cfg.solver(algorithm="magpie")})
    elif len(cfg.solvers) != 1:
        raise ConfigError("reconstruct runs one solver; pass --algorithm or configure exactly one [solver.*]")
    return _report(run_experiment(cfg))


def _cmd_compare(cfg, args):
    if not cfg.solvers:
        raise ConfigError("compare needs at least one [solver.NAME] section in the config")
    results = run_experiment(cfg)
    logs = {name: res.log.rows for name, res in results.items() if res.log is not None}
    write_combined_csv(Path(cfg.out) / "compare.csv", logs)
    return _report(results)


def _cmd_verify(args):
    results = run_suites(args.suite)
    for res in results:
        print(res.line())
    return 0 if all(r.passed for r in results) else 1


_COMMANDS = {
    "probe": _cmd_probe,
    "object": _cmd_object,
    "simulate": _cmd_simulate,
    "reconstruct": _cmd_reconstruct,
    "compare": _cmd_compare,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return _cmd_verify(args)
    try:
        cfg = _load(args)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
