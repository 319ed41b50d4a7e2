"""Misfit, revised exit waves and the quadratic surrogate.

DFT convention: ``dft2`` is the unnormalized forward transform and ``idft2``
carries the full ``1/m**2`` factor, so ``||dft2(f)||**2 == m**2 * ||f||**2``.
This matches ``numpy.fft`` defaults.

Complex gradients are taken in the real embedding ``z = x + iy`` and reported
as ``grad_x + 1j * grad_y``; a first-order change is ``Re(vdot(grad, dz))``.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, DomainError
from .fields import extract_region

__all__ = [
    "PhaseCache",
    "dft2",
    "idft2",
    "revised_exit_wave",
    "region_gradient",
    "region_objective",
    "global_objective",
    "global_gradient",
    "surrogate_objective",
    "surrogate_gradient",
]


def dft2(f: np.ndarray) -> np.ndarray:
    return np.fft.fft2(f)


def idft2(f: np.ndarray) -> np.ndarray:
    return np.fft.ifft2(f)


class PhaseCache:
    """Last known unit-modulus Fourier phase factor of every region.

    Where the current Fourier coefficient is exactly zero its phase is
    undefined; the revised exit wave then falls back to the cached factor,
    which starts at 1 (phase 0).
    """

    def __init__(self, n_regions: int, m: int):
        self.phases = np.ones((n_regions, m, m), dtype=np.complex128)

    def __len__(self) -> int:
        return len(self.phases)

    def copy(self) -> "PhaseCache":
        other = PhaseCache.__new__(PhaseCache)
        other.phases = self.phases.copy()
        return other


def _phase_factors(spectrum, cache, k, update):
    nonzero = spectrum != 0
    if cache is None:
        phase = np.ones_like(spectrum)
    elif update:
        phase = cache.phases[k]
    else:
        phase = cache.phases[k].copy()
    phase[nonzero] = spectrum[nonzero] / np.abs(spectrum[nonzero])
    return phase


def exit_wave_from_amplitude(z_k, Q, amplitude, cache=None, k=0, update=True):
    """Revised exit wave given precomputed Fourier amplitudes ``sqrt(d_k)``.

    Hot-path variant of :func:`revised_exit_wave` used by the solvers.
    """
    spectrum = dft2(Q * z_k)
    return idft2(amplitude * _phase_factors(spectrum, cache, k, update))


def revised_exit_wave(z_k, Q, d_k, cache: PhaseCache | None = None, k: int = 0, update: bool = True):
    """Exit wave ``Q * z_k`` with its Fourier magnitudes replaced by ``sqrt(d_k)``.

    Parameters
    ----------
    z_k, Q : (m, m) complex arrays
        Object patch and probe.
    d_k : (m, m) real array
        Measured intensities, must be non-negative.
    cache : PhaseCache, optional
        Phase memory for zero Fourier coefficients. Without a cache the
        fallback phase is 0. Region ``k``'s slice is refreshed in place
        unless ``update`` is false.
    """
    z_k = np.asarray(z_k)
    Q = np.asarray(Q)
    d_k = np.asarray(d_k, dtype=np.float64)
    if not (z_k.shape == Q.shape == d_k.shape):
        raise DimensionError(f"shape mismatch: z_k {z_k.shape}, Q {Q.shape}, d_k {d_k.shape}")
    if np.any(d_k < 0):
        raise DomainError("intensities must be non-negative")
    return exit_wave_from_amplitude(z_k, Q, np.sqrt(d_k), cache, k, update)


def region_gradient(z_k, Q, R_k) -> np.ndarray:
    """Complex gradient ``conj(Q) * (Q * z_k - R_k)`` of the region misfit."""
    return np.conj(Q) * (Q * z_k - R_k)


def region_objective(z_k, Q, d_k) -> float:
    """``0.5 * ||Q * z_k - R_k(z_k)||**2``."""
    R = revised_exit_wave(z_k, Q, d_k)
    return 0.5 * float(np.vdot(Q * z_k - R, Q * z_k - R).real)


def _measurement_stack(measurements):
    return np.asarray(measurements, dtype=np.float64)


def global_objective(z, Q, plan, measurements) -> float:
    """Sum of region misfits over every scan position of ``plan``."""
    d = _measurement_stack(measurements)
    if len(d) != len(plan.regions):
        raise DimensionError(f"{len(d)} measurements for {len(plan.regions)} regions")
    return sum(region_objective(extract_region(z, r), Q, d[r.k]) for r in plan.regions)


def global_gradient(z, Q, plan, measurements, cache: PhaseCache | None = None) -> np.ndarray:
    """Full complex gradient: region gradients scattered back and summed."""
    d = _measurement_stack(measurements)
    amp = np.sqrt(d)
    g = np.zeros(np.shape(z), dtype=np.complex128)
    for r in plan.regions:
        z_k = z[r.slices]
        R = exit_wave_from_amplitude(z_k, Q, amp[r.k], cache, r.k)
        g[r.slices] += region_gradient(z_k, Q, R)
    return g


def surrogate_objective(z_k, anchor, Q, d_k, cache=None, k=0) -> float:
    """Quadratic surrogate ``0.5 * ||Q * z_k - R_k(anchor)||**2``.

    Equal to the misfit at ``z_k == anchor`` and above it everywhere else.
    """
    R = revised_exit_wave(anchor, Q, d_k, cache, k, update=False)
    r = Q * z_k - R
    return 0.5 * float(np.vdot(r, r).real)


def surrogate_gradient(z_k, anchor, Q, d_k, cache=None, k=0) -> np.ndarray:
    R = revised_exit_wave(anchor, Q, d_k, cache, k, update=False)
    return region_gradient(z_k, Q, R)
