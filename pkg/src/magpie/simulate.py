"""Synthetic ptychography data: probes, objects, scan plans and measurements."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage

from .errors import ConfigError, DimensionError, DomainError
from .fields import RegionIndex, as_complex_field
from .formats import read_pgm

__all__ = [
    "ScanPlan",
    "Dataset",
    "scan_positions",
    "make_zone_plate_probe",
    "make_synthetic_object",
    "load_grayscale_object",
    "simulate_intensities",
    "add_poisson_noise",
    "make_dataset",
]


@dataclass(frozen=True)
class ScanPlan:
    n: int
    m: int
    overlap_ratio: float
    regions: tuple[RegionIndex, ...]

    def __len__(self) -> int:
        return len(self.regions)

    @property
    def step(self) -> int:
        return _step(self.m, self.overlap_ratio)


def _step(m: int, overlap_ratio: float) -> int:
    # round half up; never below one pixel
    return max(1, int(np.floor(m * (1.0 - overlap_ratio) + 0.5)))


def scan_positions(n: int, m: int, overlap_ratio: float) -> ScanPlan:
    """Raster scan of an ``n x n`` object with ``m x m`` windows.

    Offsets advance by ``round(m * (1 - overlap_ratio))``; a final row/column
    at ``n - m`` is appended when the step does not land there, so every
    pixel is covered.
    """
    if m < 1 or n < 1:
        raise ConfigError("n and m must be positive")
    if m > n:
        raise DimensionError(f"region size {m} exceeds object size {n}")
    if not 0.0 <= overlap_ratio < 1.0:
        raise ConfigError(f"overlap_ratio must lie in [0, 1), got {overlap_ratio}")
    step = _step(m, overlap_ratio)
    offsets = list(range(0, n - m + 1, step))
    if offsets[-1] != n - m:
        offsets.append(n - m)
    regions = tuple(
        RegionIndex(k, row, col, m)
        for k, (row, col) in enumerate((r, c) for r in offsets for c in offsets)
    )
    return ScanPlan(n, m, float(overlap_ratio), regions)


def centered_dft2(f: np.ndarray) -> np.ndarray:
    """DFT with sample and frequency indices both centered at ``(m - 1) / 2``.

    With this symmetric placement a point-symmetric input produces a
    point-symmetric spectrum (symmetric under ``np.rot90(., 2)``).
    """
    h, w = f.shape
    cy = np.arange(h) - (h - 1) / 2
    cx = np.arange(w) - (w - 1) / 2
    Ay = np.exp(-2j * np.pi * np.outer(cy, cy) / h)
    Ax = np.exp(-2j * np.pi * np.outer(cx, cx) / w)
    return Ay @ f @ Ax.T


def default_phase_coeff(m: int, aperture_fraction: float) -> float:
    """Chirp strength whose edge frequency lands an eighth of the window off-axis.

    The illuminated spot then spans roughly a quarter of the ``m x m`` window,
    leaving a dim fringe that keeps small-``alpha`` sweeps stable.
    """
    return np.pi / (4.0 * aperture_fraction * m)


def make_zone_plate_probe(m: int, aperture_fraction: float = 0.5, phase_coeff: float | None = None) -> np.ndarray:
    """Zone-plate-like illumination.

    A disk of radius ``aperture_fraction * m / 2`` carrying the quadratic
    phase ``exp(1j * phase_coeff * r**2)`` is taken to the sample plane with
    one centered DFT, then scaled so that ``sum(|Q|**2) == m**2``.
    """
    if m < 1 or m & (m - 1):
        raise ConfigError(f"probe size must be a power of two, got {m}")
    if not 0.0 < aperture_fraction <= 1.0:
        raise ConfigError(f"aperture_fraction must lie in (0, 1], got {aperture_fraction}")
    if phase_coeff is None:
        phase_coeff = default_phase_coeff(m, aperture_fraction)
    if not np.isfinite(phase_coeff):
        raise ConfigError("phase_coeff must be finite")
    c = np.arange(m) - (m - 1) / 2
    r2 = c[:, None] ** 2 + c[None, :] ** 2
    radius = aperture_fraction * m / 2
    pupil = np.where(r2 <= radius**2, np.exp(1j * phase_coeff * r2), 0.0)
    Q = centered_dft2(pupil)
    return Q * (m / np.sqrt(np.sum(np.abs(Q) ** 2)))


def _normalize01(a: np.ndarray) -> np.ndarray:
    lo, hi = a.min(), a.max()
    if hi == lo:
        return np.zeros_like(a)
    return (a - lo) / (hi - lo)


def _smooth_noise(rng, n: int, scales) -> np.ndarray:
    out = np.zeros((n, n))
    for sigma, weight in scales:
        out += weight * _normalize01(ndimage.gaussian_filter(rng.standard_normal((n, n)), sigma, mode="wrap"))
    return out


def _texture(n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    scales = [(max(n / 16, 1.0), 1.0), (max(n / 64, 0.5), 0.5), (0.75, 0.25)]
    mag = _normalize01(_smooth_noise(rng, n, scales))
    phase = _normalize01(_smooth_noise(rng, n, scales[:2]))
    return mag, phase


def _circuit(n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    mag = np.zeros((n, n))
    phase = np.zeros((n, n))
    lo, hi = int(np.ceil(0.12 * n)), int(np.floor(0.88 * n))
    span = hi - lo
    if span < 2:
        return mag, phase
    # horizontal and vertical traces of several widths plus square pads
    for _ in range(max(4, n // 8)):
        width = int(rng.integers(1, max(2, n // 40) + 1))
        length = int(rng.integers(max(2, span // 4), span + 1))
        level = rng.uniform(0.4, 1.0)
        if rng.random() < 0.5:
            r0 = int(rng.integers(lo, max(lo + 1, hi - width)))
            c0 = int(rng.integers(lo, max(lo + 1, hi - length + 1)))
            sl = (slice(r0, min(r0 + width, hi)), slice(c0, min(c0 + length, hi)))
        else:
            r0 = int(rng.integers(lo, max(lo + 1, hi - length + 1)))
            c0 = int(rng.integers(lo, max(lo + 1, hi - width)))
            sl = (slice(r0, min(r0 + length, hi)), slice(c0, min(c0 + width, hi)))
        mag[sl] = np.maximum(mag[sl], level)
        phase[sl] = np.maximum(phase[sl], level)
    for _ in range(max(2, n // 32)):
        size = int(rng.integers(max(2, n // 32), max(3, n // 12) + 1))
        r0 = int(rng.integers(lo, max(lo + 1, hi - size)))
        c0 = int(rng.integers(lo, max(lo + 1, hi - size)))
        sl = (slice(r0, min(r0 + size, hi)), slice(c0, min(c0 + size, hi)))
        mag[sl] = 1.0
        phase[sl] = 0.5
    mag = np.clip(ndimage.gaussian_filter(mag, 0.6), 0.0, 1.0)
    phase = np.clip(ndimage.gaussian_filter(phase, 0.6), 0.0, 1.0)
    return mag, phase


def make_synthetic_object(n: int, kind: str = "texture", seed: int = 0) -> np.ndarray:
    """Procedural complex object with magnitude in [0, 1] and phase in [0, pi/2].

    ``texture`` superimposes smoothed random fields at several scales;
    ``circuit`` draws axis-aligned traces and pads on an empty frame so the
    outer margin is dark.
    """
    if n < 1:
        raise ConfigError("object size must be positive")
    rng = np.random.default_rng(seed)
    if kind == "texture":
        mag, phase = _texture(n, rng)
    elif kind == "circuit":
        mag, phase = _circuit(n, rng)
    else:
        raise ConfigError(f"unknown object kind {kind!r}")
    return mag * np.exp(1j * (np.pi / 2) * phase)


def _center_crop(a: np.ndarray, n: int) -> np.ndarray:
    h, w = a.shape
    r0, c0 = (h - n) // 2, (w - n) // 2
    return a[r0 : r0 + n, c0 : c0 + n]


def load_grayscale_object(mag_path, phase_path, n: int) -> np.ndarray:
    """Complex object from two P5 images: magnitude ``p / maxval``, phase ``p / maxval * pi / 2``.

    Both images are center-cropped to ``n x n``.
    """
    parts = []
    for path in (mag_path, phase_path):
        pixels, maxval = read_pgm(path)
        if min(pixels.shape) < n:
            raise OSError(f"{path}: image {pixels.shape[1]}x{pixels.shape[0]} smaller than {n}x{n}")
        parts.append(_center_crop(pixels, n) / maxval)
    mag, phase = parts
    return mag * np.exp(1j * (np.pi / 2) * phase)


def simulate_intensities(obj: np.ndarray, probe: np.ndarray, plan: ScanPlan) -> np.ndarray:
    """Noiseless far-field intensities ``|dft2(Q * P_k z)|**2`` as an ``(N, m, m)`` stack."""
    obj = as_complex_field(obj)
    probe = as_complex_field(probe)
    if probe.shape != (plan.m, plan.m):
        raise DimensionError(f"probe shape {probe.shape} does not match region size {plan.m}")
    if obj.shape != (plan.n, plan.n):
        raise DimensionError(f"object shape {obj.shape} does not match plan size {plan.n}")
    out = np.empty((len(plan.regions), plan.m, plan.m))
    for r in plan.regions:
        out[r.k] = np.abs(np.fft.fft2(probe * obj[r.slices])) ** 2
    return out


def add_poisson_noise(dtilde: np.ndarray, eta: float, seed) -> np.ndarray:
    """Photon-counting noise ``eta * Poisson(dtilde / eta)``; ``eta == 0`` returns a copy.

    ``seed`` is anything accepted by :func:`numpy.random.default_rng`.
    """
    dtilde = np.asarray(dtilde, dtype=np.float64)
    if eta < 0:
        raise DomainError(f"noise level must be non-negative, got {eta}")
    if np.any(dtilde < 0):
        raise DomainError("intensities must be non-negative")
    if eta == 0:
        return dtilde.copy()
    rng = np.random.default_rng(seed)
    return eta * rng.poisson(dtilde / eta).astype(np.float64)


@dataclass(frozen=True, eq=False)
class Dataset:
    probe: np.ndarray
    plan: ScanPlan
    measurements: np.ndarray
    eta: float = 0.0
    ground_truth: np.ndarray | None = None
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.measurements) != len(self.plan.regions):
            raise DimensionError(
                f"{len(self.measurements)} measurements for {len(self.plan.regions)} regions"
            )
        if np.any(self.measurements < 0):
            raise DomainError("intensities must be non-negative")

    @cached_property
    def amplitudes(self) -> np.ndarray:
        return np.sqrt(self.measurements)

    @property
    def n_regions(self) -> int:
        return len(self.plan.regions)

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.probe, dtype="<c16").tobytes())
        h.update(np.ascontiguousarray(self.measurements, dtype="<f8").tobytes())
        h.update(np.asarray([r.row for r in self.plan.regions] + [r.col for r in self.plan.regions], dtype="<i8").tobytes())
        return h.hexdigest()


def make_dataset(obj, probe, plan: ScanPlan, eta: float = 0.0, seed: int = 0) -> Dataset:
    """Simulate measurements for ``obj``; region ``k`` draws noise from child ``k`` of ``seed``."""
    clean = simulate_intensities(obj, probe, plan)
    children = np.random.SeedSequence(seed).spawn(len(plan.regions))
    noisy = np.stack([add_poisson_noise(d, eta, s) for d, s in zip(clean, children)])
    return Dataset(as_complex_field(probe), plan, noisy, float(eta), as_complex_field(obj), int(seed))
