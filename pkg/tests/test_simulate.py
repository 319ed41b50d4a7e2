import numpy as np
import pytest

from magpie import (
    add_poisson_noise,
    load_grayscale_object,
    make_dataset,
    make_synthetic_object,
    make_zone_plate_probe,
    scan_positions,
    simulate_intensities,
)
from magpie.errors import ConfigError, DimensionError, DomainError
from magpie.formats import write_pgm
from magpie.surrogate import global_objective

from oracles import overlap_count


@pytest.mark.parametrize("overlap, step, count", [(0.5, 64, 49), (0.75, 32, 169)])
def test_scan_grid_paper_scale(overlap, step, count):
    plan = scan_positions(512, 128, overlap)
    assert plan.step == step
    assert len(plan.regions) == count == ((512 - 128) // step + 1) ** 2


def test_scan_single_region():
    plan = scan_positions(64, 64, 0.3)
    assert [(r.row, r.col) for r in plan.regions] == [(0, 0)]


def test_scan_clamps_final_offset():
    plan = scan_positions(20, 8, 0.5)
    rows = sorted({r.row for r in plan.regions})
    assert rows == [0, 4, 8, 12]
    plan = scan_positions(21, 8, 0.5)
    assert sorted({r.row for r in plan.regions})[-1] == 13


@pytest.mark.parametrize("n, m, overlap", [(16, 8, 0.0), (21, 8, 0.5), (32, 8, 0.25), (40, 16, 0.9)])
def test_scan_covers_every_pixel(n, m, overlap):
    plan = scan_positions(n, m, overlap)
    assert all(r.fits((n, n)) for r in plan.regions)
    assert overlap_count(n, m, [(r.row, r.col) for r in plan.regions]).min() >= 1


def test_scan_errors():
    with pytest.raises(DimensionError):
        scan_positions(8, 16, 0.5)
    with pytest.raises(ConfigError):
        scan_positions(16, 8, 1.0)


@pytest.mark.parametrize("m, af", [(8, 0.5), (32, 1.0), (128, 0.5), (16, 0.25)])
def test_probe_energy_normalization(m, af):
    Q = make_zone_plate_probe(m, af)
    assert np.sum(np.abs(Q) ** 2) == pytest.approx(m * m, rel=1e-9)


@pytest.mark.parametrize("m", [8, 16, 64])
def test_probe_point_symmetric_magnitude(m):
    mag = np.abs(make_zone_plate_probe(m))
    np.testing.assert_allclose(mag, np.rot90(mag, 2), atol=1e-9 * mag.max())


def test_probe_without_chirp_is_disk_transform():
    m = 8
    c = np.arange(m) - (m - 1) / 2
    disk = np.array([[1.0 if x * x + y * y <= (m / 2) ** 2 else 0.0 for y in c] for x in c])
    spectrum = np.zeros((m, m), dtype=complex)
    for iu, u in enumerate(c):
        for iv, v in enumerate(c):
            for ix, x in enumerate(c):
                for iy, y in enumerate(c):
                    spectrum[iu, iv] += disk[ix, iy] * np.exp(-2j * np.pi * (u * x + v * y) / m)
    Q = make_zone_plate_probe(m, 1.0, 0.0)
    expected = np.abs(spectrum) * m / np.linalg.norm(spectrum)
    np.testing.assert_allclose(np.abs(Q), expected, atol=1e-10)


def test_probe_errors():
    with pytest.raises(ConfigError):
        make_zone_plate_probe(12)
    with pytest.raises(ConfigError):
        make_zone_plate_probe(8, 0.0)


@pytest.mark.parametrize("kind", ["texture", "circuit"])
def test_object_ranges_and_determinism(kind):
    z = make_synthetic_object(64, kind, 7)
    assert np.abs(z).min() >= 0 and np.abs(z).max() <= 1 + 1e-15
    phase = np.angle(z[np.abs(z) > 0])
    assert phase.min() >= -1e-12 and phase.max() <= np.pi / 2 + 1e-12
    np.testing.assert_array_equal(z, make_synthetic_object(64, kind, 7))


def test_circuit_border_is_dark():
    n = 128
    mag = np.abs(make_synthetic_object(n, "circuit", 0))
    b = n // 10
    border = np.ones((n, n), dtype=bool)
    border[b:-b, b:-b] = False
    assert mag[border].mean() < 0.05
    assert mag[~border].mean() > 0.05


def test_unknown_object_kind():
    with pytest.raises(ConfigError):
        make_synthetic_object(8, "baboon")


def test_grayscale_constant_images(tmp_path):
    write_pgm(tmp_path / "white.pgm", np.full((6, 6), 255), 255)
    write_pgm(tmp_path / "black.pgm", np.zeros((6, 6), dtype=int), 255)
    z = load_grayscale_object(tmp_path / "white.pgm", tmp_path / "black.pgm", 4)
    np.testing.assert_allclose(np.abs(z), 1.0)
    np.testing.assert_allclose(np.angle(z), 0.0)


def test_grayscale_ramp(tmp_path):
    ramp = np.tile(np.arange(256), (256, 1))
    write_pgm(tmp_path / "ramp.pgm", ramp, 255)
    write_pgm(tmp_path / "black.pgm", np.zeros((256, 256), dtype=int), 255)
    z = load_grayscale_object(tmp_path / "ramp.pgm", tmp_path / "black.pgm", 256)
    np.testing.assert_allclose(np.abs(z[0]), np.arange(256) / 255, atol=1e-15)


def test_grayscale_phase_scale(tmp_path):
    write_pgm(tmp_path / "white.pgm", np.full((4, 4), 65535), 65535)
    z = load_grayscale_object(tmp_path / "white.pgm", tmp_path / "white.pgm", 4)
    np.testing.assert_allclose(np.angle(z), np.pi / 2)


def test_grayscale_too_small(tmp_path):
    write_pgm(tmp_path / "s.pgm", np.zeros((3, 3), dtype=int), 255)
    with pytest.raises(OSError):
        load_grayscale_object(tmp_path / "s.pgm", tmp_path / "s.pgm", 4)


def test_intensities_zero_object():
    plan = scan_positions(8, 4, 0.5)
    d = simulate_intensities(np.zeros((8, 8)), make_zone_plate_probe(4), plan)
    assert d.shape == (9, 4, 4) and not d.any()


def test_intensities_dc_only():
    plan = scan_positions(2, 2, 0.0)
    d = simulate_intensities(np.ones((2, 2)), np.ones((2, 2)), plan)
    np.testing.assert_allclose(d[0], [[16, 0], [0, 0]], atol=1e-12)


def test_intensities_parseval(rng):
    n, m = 16, 8
    z = make_synthetic_object(n, "texture", 2)
    Q = make_zone_plate_probe(m)
    plan = scan_positions(n, m, 0.5)
    d = simulate_intensities(z, Q, plan)
    for r in plan.regions:
        assert d[r.k].sum() == pytest.approx(m * m * np.sum(np.abs(Q * z[r.slices]) ** 2), rel=1e-12)


def test_noise_zero_entries_stay_zero():
    out = add_poisson_noise(np.array([[0.0, 5.0], [0.0, 1.0]]), 0.1, 0)
    assert out[0, 0] == 0 and out[1, 0] == 0


def test_noise_free_is_copy():
    d = np.array([[1.0, 2.0]])
    out = add_poisson_noise(d, 0.0, 0)
    np.testing.assert_array_equal(out, d)
    assert out is not d


def test_noise_moments():
    draws = add_poisson_noise(np.full(100_000, 4.0)[None, :], 0.05, 42)
    assert draws.mean() == pytest.approx(4.0, abs=0.02)
    assert draws.var() == pytest.approx(0.05 * 4.0, rel=0.05)


def test_noise_rejects_negative():
    with pytest.raises(DomainError):
        add_poisson_noise(np.array([[-1.0]]), 0.1, 0)
    with pytest.raises(DomainError):
        add_poisson_noise(np.array([[1.0]]), -0.1, 0)


def test_noiseless_dataset_is_exact(small_dataset):
    ds = small_dataset
    np.testing.assert_array_equal(ds.measurements, simulate_intensities(ds.ground_truth, ds.probe, ds.plan))
    assert global_objective(ds.ground_truth, ds.probe, ds.plan, ds.measurements) <= 1e-18


def test_dataset_checksum_stable():
    args = (make_synthetic_object(16, "texture", 0), make_zone_plate_probe(8), scan_positions(16, 8, 0.5), 0.1)
    a, b, c = make_dataset(*args, seed=5), make_dataset(*args, seed=5), make_dataset(*args, seed=6)
    assert a.checksum() == b.checksum() != c.checksum()
