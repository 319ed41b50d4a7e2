import json

import numpy as np
import pytest

from magpie import SolverConfig, check_stop, compute_metrics, initial_object, run_solver
from magpie.errors import ConfigError
from magpie.formats import read_field, read_pgm
from magpie.harness import (
    ExperimentConfig,
    build_dataset,
    epochs_to_tol,
    export_images,
    load_config,
    read_log_csv,
    run_experiment,
    write_log_csv,
)
from magpie.metrics import MetricRow

from conftest import cplx
from oracles import fourier_misfit


def test_metrics_at_truth(small_dataset):
    row = compute_metrics(small_dataset.ground_truth, small_dataset)
    assert row.residual < 1e-20 and row.error == 0 and row.grad_criterion < 1e-12


def test_error_ignores_global_phase(small_dataset):
    for phase in (np.pi, 0.7):
        row = compute_metrics(small_dataset.ground_truth * np.exp(1j * phase), small_dataset)
        assert row.error < 1e-14


def test_residual_matches_fourier_resummation(small_dataset, rng):
    ds = small_dataset
    z = cplx(rng, 16, 16)
    expected = sum(fourier_misfit(z[r.slices], ds.probe, ds.measurements[r.k]) for r in ds.plan.regions)
    assert compute_metrics(z, ds).residual == pytest.approx(expected, rel=1e-9)


def test_criterion_normalization(small_dataset, rng):
    ds = small_dataset
    z = cplx(rng, 16, 16)
    total = 0.0
    for r in ds.plan.regions:
        z_k = z[r.slices]
        spec = np.fft.fft2(ds.probe * z_k)
        R = np.fft.ifft2(np.sqrt(ds.measurements[r.k]) * spec / np.abs(spec))
        total += np.linalg.norm(np.conj(ds.probe) * (ds.probe * z_k - R))
    assert compute_metrics(z, ds).grad_criterion == pytest.approx(total / (9 * 8), rel=1e-12)


def test_error_missing_without_truth(small_dataset):
    from magpie.simulate import Dataset

    ds = Dataset(small_dataset.probe, small_dataset.plan, small_dataset.measurements)
    assert np.isnan(compute_metrics(initial_object(16), ds).error)


def test_stop_rule_is_strict():
    row = MetricRow(1, 1.0, 1.0, 1e-4)
    assert not check_stop(row, 1e-4)
    assert check_stop(MetricRow(1, 0.0, 0.0, 0.0), 1e-12)


def test_csv_roundtrip_and_format(tmp_path, noisy_dataset):
    _, log = run_solver(initial_object(32), noisy_dataset, SolverConfig("rpie", max_epochs=5))
    write_log_csv(tmp_path / "log.csv", log.rows)
    lines = (tmp_path / "log.csv").read_text().splitlines()
    assert lines[0] == "epoch,residual,error,grad_criterion,wall_ms"
    assert len(lines) == 7
    assert read_log_csv(tmp_path / "log.csv") == log.rows


def test_export_zero_field(tmp_path):
    mag, phase = export_images(np.zeros((4, 4), complex), tmp_path)
    assert not read_pgm(mag)[0].any()
    assert read_pgm(phase)[1] == 65535


def test_export_ones_field(tmp_path):
    mag, phase = export_images(np.ones((3, 3), complex), tmp_path)
    assert (read_pgm(mag)[0] == 65535).all()
    px = read_pgm(phase)[0]
    assert (px == px[0, 0]).all() and abs(px[0, 0] - 65535 / 2) <= 0.5


def test_export_magnitude_quantization(tmp_path, rng):
    z = cplx(rng, 8, 8)
    mag, _ = export_images(z, tmp_path)
    px, maxval = read_pgm(mag)
    peak = np.abs(z).max()
    assert np.abs(px / maxval * peak - np.abs(z)).max() <= peak / 65535


def _tiny(tmp_path, **kw):
    solvers = {
        "rpie": SolverConfig("rpie", max_epochs=4, timing=False),
        "magpie3": SolverConfig("magpie", levels=3, max_epochs=4, timing=False),
    }
    base = dict(n=32, m=8, eta=0.05, seed=3, out=str(tmp_path), solvers=solvers)
    base.update(kw)
    return ExperimentConfig(**base)


def test_run_experiment_artifacts(tmp_path):
    cfg = _tiny(tmp_path)
    results = run_experiment(cfg)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["dataset_checksum"] == build_dataset(cfg).checksum()
    assert "epoch" in manifest["note"]
    for name in ("rpie", "magpie3"):
        assert {p.name for p in (tmp_path / name).iterdir()} == {"log.csv", "recon.cf2d", "magnitude.pgm", "phase.pgm"}
        np.testing.assert_array_equal(read_field(tmp_path / name / "recon.cf2d"), results[name].z)
        assert manifest["solvers"][name]["status"] == "max_epochs"


def test_rerun_gives_identical_csv(tmp_path):
    run_experiment(_tiny(tmp_path / "a"))
    run_experiment(_tiny(tmp_path / "b"))
    for name in ("rpie", "magpie3"):
        assert (tmp_path / "a" / name / "log.csv").read_bytes() == (tmp_path / "b" / name / "log.csv").read_bytes()


def test_solver_failure_is_isolated(tmp_path):
    cfg = _tiny(tmp_path, solvers={"bad": SolverConfig("magpie", levels=7), "ok": SolverConfig("rpie", max_epochs=2)})
    results = run_experiment(cfg)
    assert results["bad"].failed and "levels" in results["bad"].error
    assert results["ok"].status == "max_epochs"
    assert json.loads((tmp_path / "manifest.json").read_text())["solvers"]["bad"]["status"] == "error"


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        run_experiment(_tiny(tmp_path, out=str(blocker / "sub")))


def test_epochs_to_tol(small_dataset):
    _, log = run_solver(small_dataset.ground_truth, small_dataset, SolverConfig("rpie", tol=1e-8))
    assert epochs_to_tol(log) == 1
    _, log = run_solver(initial_object(16), small_dataset, SolverConfig("rpie", tol=1e-12, max_epochs=2))
    assert epochs_to_tol(log) == float("inf")


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text(
        "[experiment]\nn = 64\nm = 16\nalpha = 0.02\nmax_epochs = 7\n\n"
        "[solver.a]\nalgorithm = rpie\n\n[solver.b]\nalgorithm = magpie\nlevels = 3\nalpha = 0.05\n"
    )
    cfg = load_config(path)
    assert cfg.n == 64 and cfg.solvers["a"].alpha == 0.02 and cfg.solvers["a"].max_epochs == 7
    assert cfg.solvers["b"].levels == 3 and cfg.solvers["b"].alpha == 0.05
    cfg = load_config(path, {"n": 32}, {"alpha": 0.3, "levels": 2})
    assert cfg.n == 32 and cfg.solvers["b"].alpha == 0.3 and cfg.solvers["b"].levels == 2


@pytest.mark.parametrize(
    "text",
    ["[experiment]\nm = 12\n", "[experiment]\nbogus = 1\n", "[other]\nx = 1\n", "[solver.a]\nalgorithm = pie\n", "[experiment]\nn = abc\n"],
)
def test_bad_config(tmp_path, text):
    path = tmp_path / "bad.ini"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config(path)
