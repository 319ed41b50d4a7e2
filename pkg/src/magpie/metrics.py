"""Reconstruction quality metrics and the stopping rule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .surrogate import exit_wave_from_amplitude, region_gradient

__all__ = ["MetricRow", "compute_metrics", "check_stop"]


@dataclass(frozen=True)
class MetricRow:
    epoch: int
    residual: float
    error: float
    grad_criterion: float
    wall_ms: float = 0.0


def compute_metrics(z, dataset, cache=None, epoch: int = 0, wall_ms: float = 0.0) -> MetricRow:
    """Residual, magnitude error and gradient criterion of ``z``.

    ``residual`` is the global misfit, ``error`` is ``|| |z| - |z*| ||_2`` (NaN
    without ground truth) and ``grad_criterion`` is
    ``sum_k ||grad Phi_k(P_k z)||_2 / (N * m)`` -- note the division by ``m``,
    not ``m**2``. A phase cache, when given, is read but never modified.
    """
    Q = dataset.probe
    amp = dataset.amplitudes
    residual = 0.0
    grad_sum = 0.0
    for r in dataset.plan.regions:
        z_k = z[r.slices]
        R = exit_wave_from_amplitude(z_k, Q, amp[r.k], cache, r.k, update=False)
        diff = Q * z_k - R
        residual += 0.5 * float(np.vdot(diff, diff).real)
        grad_sum += float(np.linalg.norm(region_gradient(z_k, Q, R)))
    if dataset.ground_truth is None:
        error = float("nan")
    else:
        error = float(np.linalg.norm(np.abs(z) - np.abs(dataset.ground_truth)))
    criterion = grad_sum / (dataset.n_regions * dataset.plan.m)
    return MetricRow(epoch, residual, error, criterion, wall_ms)


def check_stop(row: MetricRow, tol: float) -> bool:
    """True iff the gradient criterion is strictly below ``tol``."""
    return row.grad_criterion < tol
