"""Reconstruction algorithms.

* ``rpie``            -- regularized PIE, one proximal step per region in shuffled order
* ``magpie``          -- the same sweep, but every region update is a recursive
                         multilevel proximal solve (:func:`magps_update`)
* ``exact_surrogate`` -- global majorization-minimization: each step exactly
                         minimizes the quadratic surrogate built at the current iterate
* ``lbfgs``           -- limited-memory quasi-Newton on the real embedding of the misfit

All runs start from a caller-supplied ``z0`` and return ``(z, RunLog)``.
Region write-back inside a sweep is immediate (Gauss-Seidel order).
Shuffles come from numpy's PCG64 generator seeded with ``config.seed``.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, NumericalGuardError
from .levels import LevelStack, build_level_stack, downsample_object, downsample_rew, max_levels
from .fields import prolong
from .metrics import MetricRow, check_stop, compute_metrics
from .surrogate import PhaseCache, exit_wave_from_amplitude

__all__ = [
    "ALGORITHMS",
    "SolverConfig",
    "SolverState",
    "RunLog",
    "rpie_regularizer",
    "rpie_region_update",
    "rpie_epoch",
    "rpie_run",
    "exact_surrogate_step",
    "exact_surrogate_run",
    "lbfgs_run",
    "magps_update",
    "coarse_direction",
    "magpie_epoch",
    "magpie_run",
    "run_solver",
    "initial_object",
]

ALGORITHMS = ("rpie", "exact_surrogate", "lbfgs", "magpie")


@dataclass(frozen=True)
class SolverConfig:
    algorithm: str = "magpie"
    alpha: float = 0.01
    levels: int = 1
    tol: float = 1e-4
    max_epochs: int = 100
    seed: int = 0
    lbfgs_history: int = 5
    timing: bool = True

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.levels < 1:
            raise ConfigError(f"levels must be at least 1, got {self.levels}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be at least 1, got {self.max_epochs}")
        if self.lbfgs_history < 1:
            raise ConfigError(f"lbfgs_history must be at least 1, got {self.lbfgs_history}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


@dataclass
class SolverState:
    z: np.ndarray
    cache: PhaseCache


@dataclass
class RunLog:
    config: SolverConfig
    rows: list[MetricRow] = field(default_factory=list)
    status: str = "max_epochs"

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def epochs(self) -> int:
        """Number of completed epochs (iterations for L-BFGS)."""
        return self.rows[-1].epoch if self.rows else 0

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def config_dict(self) -> dict:
        return asdict(self.config)


def initial_object(n: int) -> np.ndarray:
    """Free-space transmission: an all-ones object."""
    return np.ones((n, n), dtype=np.complex128)


def rpie_regularizer(Q: np.ndarray, alpha: float) -> np.ndarray:
    """``alpha * (max|Q|**2 - |Q|**2)``: heavier damping where illumination is weak."""
    energy = np.abs(Q) ** 2
    return alpha * (energy.max() - energy)


def _prox(z_k, Q, R_k, step):
    return z_k + step * (R_k - Q * z_k)


def rpie_region_update(z_k, Q, R_k, u) -> np.ndarray:
    """One proximal step on the region surrogate.

    Minimizes ``0.5 * ||Q * x - R_k||**2 + 0.5 * sum(u * |x - z_k|**2)``.
    """
    denom = u + np.abs(Q) ** 2
    if np.any(denom <= 0):
        raise NumericalGuardError("u + |Q|^2 vanishes; use a positive regularization constant")
    return _prox(z_k, Q, R_k, np.conj(Q) / denom)


def _check_start(z0, dataset):
    z0 = np.asarray(z0, dtype=np.complex128)
    n = dataset.plan.n
    if z0.shape != (n, n):
        raise DimensionError(f"initial object has shape {z0.shape}, expected {(n, n)}")
    return z0.copy()


def _sweep(z, cache, dataset, rng, update):
    """In-place shuffled sweep; ``update(z_k, R_k)`` returns the new patch."""
    Q = dataset.probe
    amp = dataset.amplitudes
    regions = dataset.plan.regions
    for idx in rng.permutation(len(regions)):
        r = regions[idx]
        z_k = z[r.slices]
        R = exit_wave_from_amplitude(z_k, Q, amp[r.k], cache, r.k)
        z[r.slices] = update(z_k, R)
    return z


def rpie_epoch(state: SolverState, dataset, u, rng) -> SolverState:
    """One rPIE sweep over all regions in an order drawn from ``rng``."""
    Q = dataset.probe
    denom = u + np.abs(Q) ** 2
    if np.any(denom <= 0):
        raise NumericalGuardError("u + |Q|^2 vanishes; use a positive regularization constant")
    step = np.conj(Q) / denom
    z = _sweep(state.z.copy(), state.cache, dataset, rng, lambda z_k, R: _prox(z_k, Q, R, step))
    return SolverState(z, state.cache)


def coarse_direction(z_k, R_k, stack: LevelStack, level: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Coarse-grid correction seen from ``level``.

    Returns ``(e_H, z_H)``: the change produced by the recursive solve on
    ``level + 1`` and the downsampled starting point it was applied to.
    """
    lv = stack[level]
    z_H = downsample_object(z_k, lv.W_z)
    R_H = downsample_rew(R_k, lv.W_R)
    return magps_update(z_H, R_H, stack, level + 1) - z_H, z_H


def magps_update(z_k, R_k, stack: LevelStack, level: int = 0) -> np.ndarray:
    """Multilevel proximal solve of one region's surrogate.

    On the coarsest level this is a single proximal step. Otherwise the
    patch and exit wave are carried one level down, solved recursively, the
    prolonged correction is added and a fine-level proximal step finishes
    the update (reusing the same ``R_k``).
    """
    if not 0 <= level < len(stack):
        raise ConfigError(f"level {level} outside stack of depth {len(stack)}")
    lv = stack[level]
    if level == len(stack) - 1:
        return _prox(z_k, lv.Q, R_k, lv.step)
    e_H, _ = coarse_direction(z_k, R_k, stack, level)
    return _prox(z_k + prolong(e_H), lv.Q, R_k, lv.step)


def magpie_epoch(state: SolverState, dataset, stack: LevelStack, rng) -> SolverState:
    z = _sweep(state.z.copy(), state.cache, dataset, rng, lambda z_k, R: magps_update(z_k, R, stack))
    return SolverState(z, state.cache)


class _Clock:
    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.t0 = time.perf_counter()

    def ms(self) -> float:
        return (time.perf_counter() - self.t0) * 1e3 if self.enabled else 0.0


def _epoch_loop(state, dataset, config, epoch_fn):
    log = RunLog(config)
    clock = _Clock(config.timing)
    log.rows.append(compute_metrics(state.z, dataset, state.cache, 0, 0.0))
    for epoch in range(1, config.max_epochs + 1):
        state = epoch_fn(state)
        row = compute_metrics(state.z, dataset, state.cache, epoch, clock.ms())
        if not (np.all(np.isfinite(state.z)) and np.isfinite(row.residual)):
            log.status = "diverged"
            break
        log.rows.append(row)
        if check_stop(row, config.tol):
            log.status = "converged"
            break
    return state.z, log


def _new_state(z0, dataset):
    return SolverState(_check_start(z0, dataset), PhaseCache(dataset.n_regions, dataset.plan.m))


def rpie_run(z0, dataset, config: SolverConfig):
    u = rpie_regularizer(dataset.probe, config.alpha)
    rng = np.random.default_rng(config.seed)
    return _epoch_loop(_new_state(z0, dataset), dataset, config, lambda s: rpie_epoch(s, dataset, u, rng))


def magpie_run(z0, dataset, config: SolverConfig):
    """Shuffled sweeps of :func:`magps_update` until the gradient criterion drops below ``tol``."""
    m = dataset.plan.m
    if config.levels > max_levels(m):
        raise ConfigError(f"levels={config.levels} exceeds the {max_levels(m)} grids available for m={m}")
    stack = build_level_stack(dataset.probe, rpie_regularizer(dataset.probe, config.alpha), config.levels)
    rng = np.random.default_rng(config.seed)
    return _epoch_loop(_new_state(z0, dataset), dataset, config, lambda s: magpie_epoch(s, dataset, stack, rng))


def probe_coverage(dataset) -> np.ndarray:
    """Accumulated probe energy ``sum_k P_k^T |Q|**2`` per object pixel."""
    energy = np.abs(dataset.probe) ** 2
    S = np.zeros((dataset.plan.n, dataset.plan.n))
    for r in dataset.plan.regions:
        S[r.slices] += energy
    return S


def exact_surrogate_step(z, dataset, cache: PhaseCache | None = None) -> np.ndarray:
    """Global minimizer of the quadratic surrogate anchored at ``z``.

    Solves ``S * z_new = sum_k P_k^T (conj(Q) * R_k(P_k z))`` pixel by pixel
    with ``S`` the probe coverage; pixels that no probe reaches keep their value.
    """
    Q = dataset.probe
    amp = dataset.amplitudes
    rhs = np.zeros_like(z, dtype=np.complex128)
    for r in dataset.plan.regions:
        R = exit_wave_from_amplitude(z[r.slices], Q, amp[r.k], cache, r.k)
        rhs[r.slices] += np.conj(Q) * R
    S = probe_coverage(dataset)
    out = np.array(z, dtype=np.complex128, copy=True)
    np.divide(rhs, S, out=out, where=S > 0)
    return out


def exact_surrogate_run(z0, dataset, config: SolverConfig):
    return _epoch_loop(
        _new_state(z0, dataset),
        dataset,
        config,
        lambda s: SolverState(exact_surrogate_step(s.z, dataset, s.cache), s.cache),
    )


def _objective_and_gradient(z, dataset):
    Q = dataset.probe
    amp = dataset.amplitudes
    f = 0.0
    g = np.zeros_like(z)
    for r in dataset.plan.regions:
        z_k = z[r.slices]
        diff = Q * z_k - exit_wave_from_amplitude(z_k, Q, amp[r.k])
        f += 0.5 * float(np.vdot(diff, diff).real)
        g[r.slices] += np.conj(Q) * diff
    return f, g


def _rdot(a, b) -> float:
    # inner product of the real embeddings [Re a, Im a] . [Re b, Im b]
    return float(np.vdot(a, b).real)


def lbfgs_run(z0, dataset, config: SolverConfig, c1: float = 1e-4, max_halvings: int = 40):
    """L-BFGS with backtracking (Armijo constant ``c1``, step halving).

    Curvature pairs with ``s.y <= 0`` are dropped. If no step of length
    ``2**-max_halvings`` or more gives sufficient decrease the run stops with
    status ``line_search_failed`` and returns the last accepted iterate.
    """
    z = _check_start(z0, dataset)
    log = RunLog(config)
    clock = _Clock(config.timing)
    memory: deque = deque(maxlen=config.lbfgs_history)
    f, g = _objective_and_gradient(z, dataset)
    log.rows.append(compute_metrics(z, dataset, None, 0, 0.0))
    for it in range(1, config.max_epochs + 1):
        gnorm2 = _rdot(g, g)
        if gnorm2 == 0.0:
            log.rows.append(compute_metrics(z, dataset, None, it, clock.ms()))
            log.status = "converged"
            break
        q = g.copy()
        coeffs = []
        for s, y, rho in reversed(memory):
            a = rho * _rdot(s, q)
            q -= a * y
            coeffs.append(a)
        if memory:
            s, y, _ = memory[-1]
            q *= _rdot(s, y) / _rdot(y, y)
        for (s, y, rho), a in zip(memory, reversed(coeffs)):
            b = rho * _rdot(y, q)
            q += (a - b) * s
        d = -q
        slope = _rdot(g, d)
        if not slope < 0:
            memory.clear()
            d = -g
            slope = -gnorm2
        t = 1.0
        for _ in range(max_halvings + 1):
            z_new = z + t * d
            f_new, g_new = _objective_and_gradient(z_new, dataset)
            if f_new <= f + c1 * t * slope:
                break
            t *= 0.5
        else:
            log.status = "line_search_failed"
            break
        s = t * d
        y = g_new - g
        sy = _rdot(s, y)
        if sy > 0:
            memory.append((s, y, 1.0 / sy))
        z, f, g = z_new, f_new, g_new
        row = compute_metrics(z, dataset, None, it, clock.ms())
        log.rows.append(row)
        if check_stop(row, config.tol):
            log.status = "converged"
            break
    return z, log


_RUNNERS = {
    "rpie": rpie_run,
    "magpie": magpie_run,
    "exact_surrogate": exact_surrogate_run,
    "lbfgs": lbfgs_run,
}


def run_solver(z0, dataset, config: SolverConfig):
    return _RUNNERS[config.algorithm](z0, dataset, config)
