"""Per-level probes, transfer weights and regularization for the multilevel solver.

For a level with probe ``Q`` and energy ``E = |Q|**2`` the descent to the
next coarser level uses

* ``Q_H  = restrict(Q)``
* ``W_z  = E / prolong(restrict(E))``
* ``W_R  = prolong(Q_H) * conj(Q) / prolong(restrict(E))``
* ``W_uH = |Q_H|**2 / restrict(E)``
* ``u_H  = W_uH * restrict(u)``

``W_R`` is written with ``conj(Q)`` in the numerator instead of dividing by
``Q``; the two agree wherever ``Q != 0``. Bins whose probe energy sums to
zero get all weights (and ``u_H``) set to 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .fields import prolong, restrict

__all__ = ["LevelData", "LevelStack", "build_level_stack", "downsample_object", "downsample_rew"]


@dataclass(frozen=True, eq=False)
class LevelData:
    """Probe and regularizer of one level plus the weights that lead one level down.

    The weight fields and ``mask`` are ``None`` on the coarsest level.
    """

    Q: np.ndarray
    u: np.ndarray
    W_z: np.ndarray | None = None
    W_R: np.ndarray | None = None
    W_uH: np.ndarray | None = None
    mask: np.ndarray | None = None

    @property
    def m(self) -> int:
        return self.Q.shape[0]

    @property
    def step(self) -> np.ndarray:
        """Proximal step factor ``conj(Q) / (u + |Q|**2)``, zero where both vanish."""
        denom = self.u + np.abs(self.Q) ** 2
        out = np.zeros_like(self.Q)
        np.divide(np.conj(self.Q), denom, out=out, where=denom > 0)
        return out


@dataclass(frozen=True, eq=False)
class LevelStack:
    levels: tuple[LevelData, ...]

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, i) -> LevelData:
        return self.levels[i]


def _ratio(num, den, where):
    out = np.zeros(np.broadcast(num, den).shape, dtype=np.result_type(num, den))
    np.divide(num, den, out=out, where=where)
    return out


def max_levels(m: int) -> int:
    return int(np.log2(m)) + 1


def build_level_stack(Q: np.ndarray, u: np.ndarray, levels: int) -> LevelStack:
    """Precompute ``levels`` grids (index 0 is the finest) for probe ``Q`` and regularizer ``u``."""
    Q = np.asarray(Q, dtype=np.complex128)
    u = np.asarray(u, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ConfigError(f"probe must be square, got {Q.shape}")
    m = Q.shape[0]
    if m < 1 or m & (m - 1):
        raise ConfigError(f"probe size must be a power of two, got {m}")
    if u.shape != Q.shape:
        raise ConfigError(f"regularizer shape {u.shape} does not match probe {Q.shape}")
    if np.any(u < 0):
        raise ConfigError("regularizer must be non-negative")
    if not 1 <= levels <= max_levels(m):
        raise ConfigError(f"levels must lie in [1, {max_levels(m)}] for m={m}, got {levels}")

    out = []
    for _ in range(levels - 1):
        energy = np.abs(Q) ** 2
        binned = restrict(energy)
        mask = binned > 0
        Q_H = restrict(Q)
        spread = prolong(binned)
        fine_mask = prolong(mask)
        W_z = _ratio(energy, spread, fine_mask)
        W_R = _ratio(prolong(Q_H) * np.conj(Q), spread, fine_mask)
        W_uH = _ratio(np.abs(Q_H) ** 2, binned, mask)
        out.append(LevelData(Q, u, W_z, W_R, W_uH, mask))
        Q, u = Q_H, W_uH * restrict(u)
    out.append(LevelData(Q, u))
    return LevelStack(tuple(out))


def downsample_object(z_k: np.ndarray, W_z: np.ndarray) -> np.ndarray:
    """Probe-energy-weighted bin average of an object patch."""
    return restrict(W_z * z_k)


def downsample_rew(R_k: np.ndarray, W_R: np.ndarray) -> np.ndarray:
    """Weighted bin average of a revised exit wave."""
    return restrict(W_R * R_k)
