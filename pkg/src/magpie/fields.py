"""Dense 2D fields, scan-region windows and dyadic grid transfer.

Fields are plain ``numpy`` arrays of shape ``(height, width)`` stored
row-major (C order). Complex fields use ``complex128`` and real fields
``float64``. Every function returns a new array; inputs are never modified.

Grid transfer follows the average-pooling convention: restriction maps each
2x2 bin of the fine grid to its mean, prolongation replicates each coarse
value into its 2x2 bin. As matrices on the row-major flattening,
``prolong == 4 * restrict.T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

__all__ = [
    "RegionIndex",
    "as_complex_field",
    "as_real_field",
    "restrict",
    "prolong",
    "extract_region",
    "embed_add_region",
]


def as_complex_field(a) -> np.ndarray:
    """Return ``a`` as a C-contiguous 2D ``complex128`` array."""
    f = np.ascontiguousarray(a, dtype=np.complex128)
    if f.ndim != 2 or f.size == 0:
        raise DimensionError(f"expected a non-empty 2D field, got shape {f.shape}")
    return f


def as_real_field(a) -> np.ndarray:
    """Return ``a`` as a C-contiguous 2D ``float64`` array."""
    f = np.ascontiguousarray(a, dtype=np.float64)
    if f.ndim != 2 or f.size == 0:
        raise DimensionError(f"expected a non-empty 2D field, got shape {f.shape}")
    return f


@dataclass(frozen=True)
class RegionIndex:
    """Square scan window ``[row, row+size) x [col, col+size)`` of region ``k``."""

    k: int
    row: int
    col: int
    size: int

    @property
    def slices(self) -> tuple[slice, slice]:
        return (slice(self.row, self.row + self.size), slice(self.col, self.col + self.size))

    def fits(self, shape: tuple[int, int]) -> bool:
        h, w = shape
        return (
            self.size > 0
            and 0 <= self.row
            and 0 <= self.col
            and self.row + self.size <= h
            and self.col + self.size <= w
        )


def restrict(f: np.ndarray) -> np.ndarray:
    """Average each 2x2 bin of ``f``.

    Works for real and complex fields alike. Both dimensions must be even.

    >>> restrict(np.array([[1.0, 2.0], [3.0, 4.0]]))
    array([[2.5]])
    """
    f = np.asarray(f)
    if f.ndim != 2:
        raise DimensionError(f"expected a 2D field, got shape {f.shape}")
    h, w = f.shape
    if h % 2 or w % 2:
        raise DimensionError(f"restriction needs even dimensions, got {h}x{w}")
    return 0.25 * (f[0::2, 0::2] + f[1::2, 0::2] + f[0::2, 1::2] + f[1::2, 1::2])


def prolong(f: np.ndarray) -> np.ndarray:
    """Replicate every entry of ``f`` into a 2x2 bin (doubles both dimensions)."""
    f = np.asarray(f)
    if f.ndim != 2:
        raise DimensionError(f"expected a 2D field, got shape {f.shape}")
    return np.repeat(np.repeat(f, 2, axis=0), 2, axis=1)


def _check_region(shape, r: RegionIndex) -> None:
    if not r.fits(shape):
        raise IndexError(
            f"region k={r.k} at ({r.row}, {r.col}) of size {r.size} "
            f"does not fit in a {shape[0]}x{shape[1]} object"
        )


def extract_region(obj: np.ndarray, r: RegionIndex) -> np.ndarray:
    """Copy of the window of ``obj`` selected by ``r``."""
    obj = np.asarray(obj)
    _check_region(obj.shape, r)
    return obj[r.slices].copy()


def embed_add_region(obj: np.ndarray, patch: np.ndarray, r: RegionIndex) -> np.ndarray:
    """Return ``obj`` with ``patch`` added into window ``r`` (the adjoint of extraction)."""
    obj = np.asarray(obj)
    patch = np.asarray(patch)
    if patch.shape != (r.size, r.size):
        raise DimensionError(f"patch shape {patch.shape} does not match region size {r.size}")
    _check_region(obj.shape, r)
    out = np.array(obj, dtype=np.result_type(obj, patch), copy=True)
    out[r.slices] += patch
    return out
