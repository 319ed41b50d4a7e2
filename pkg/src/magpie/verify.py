"""Randomized property suites for the surrogate, transfer and solver invariants.

Each ``check_*`` function draws its own instances from a seeded generator and
returns a :class:`CheckResult`. Reference quantities are recomputed here from
their Fourier-domain or closed-form definitions rather than through the solver
code paths, so a pass means two independent routes agree.

The ``regularization_transfer`` suite tests the identity
``restrict(1 / (u + |Q|**2)) == W_uH / (u_H + |Q_H|**2)`` literally. It only
holds when ``u + |Q|**2`` is constant inside every 2x2 bin, so it is expected to
fail for generic probes; ``regularization_transfer_exact`` checks the identity
``W_uH / (u_H + |Q_H|**2) == 1 / restrict(u + |Q|**2)`` that does hold.

Likewise ``sublinear_rate`` measures gradients as ``grad_x + 1j * grad_y``;
with that scaling the bound can fail already at the first iterate (one
region, unit probe: ``||grad||**2 == 2 * misfit``). ``sublinear_rate_wirtinger``
evaluates the bound with the Wirtinger derivative, a quarter of the squared norm.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .fields import prolong, restrict
from .levels import build_level_stack
from .simulate import make_dataset, make_synthetic_object, make_zone_plate_probe, scan_positions
from .solvers import coarse_direction, exact_surrogate_step, probe_coverage, rpie_regularizer
from .surrogate import PhaseCache, global_gradient, global_objective, revised_exit_wave, surrogate_gradient, surrogate_objective

__all__ = ["CheckResult", "SUITES", "run_suites"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    instances: int
    worst: float
    seconds: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: {self.instances} instances, worst {self.worst:.3e} ({self.seconds:.2f} s){' - ' + self.detail if self.detail else ''}"


# -- independent reference formulas ---------------------------------------------------


def fourier_misfit(z_k, Q, d_k) -> float:
    """``0.5 * || |F(Q z)| - sqrt(d) ||**2 / m**2`` (Parseval form of the region misfit)."""
    m2 = Q.size
    return 0.5 * float(np.sum((np.abs(np.fft.fft2(Q * z_k)) - np.sqrt(d_k)) ** 2)) / m2


def fourier_gradient(z_k, Q, d_k) -> np.ndarray:
    """Gradient of :func:`fourier_misfit` written with the adjoint ``F^H / m**2``."""
    spec = np.fft.fft2(Q * z_k)
    mag = np.abs(spec)
    unit = np.ones_like(spec)
    np.divide(spec, mag, out=unit, where=mag > 0)
    resid = spec - np.sqrt(d_k) * unit
    adjoint = np.conj(np.fft.fft2(np.conj(resid))) / Q.size
    return np.conj(Q) * adjoint


def _random_probe(rng, m, zero_fraction=0.2):
    Q = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    Q[rng.random((m, m)) < zero_fraction] = 0.0
    if m >= 2 and rng.random() < 0.5:
        # wipe a whole 2x2 bin so coarse levels see an unilluminated bin
        i, j = 2 * rng.integers(m // 2), 2 * rng.integers(m // 2)
        Q[i : i + 2, j : j + 2] = 0.0
    return Q


def _random_field(rng, shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _random_intensity(rng, Q):
    truth = _random_field(rng, Q.shape)
    d = np.abs(np.fft.fft2(Q * truth)) ** 2
    return d * rng.uniform(0.5, 1.5, size=d.shape)


def _rel(a, b) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        return CheckResult(res[0], res[1], res[2], res[3], time.perf_counter() - t0, *res[4:])

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# -- suites ------------------------------------------------------------------------------


@_timed
def check_majorization(instances: int = 200, seed: int = 0):
    """Surrogate dominates the misfit and touches it (value and gradient) at the anchor."""
    rng = np.random.default_rng(seed)
    worst_dom, worst_val, worst_grad = -np.inf, 0.0, 0.0
    for _ in range(instances):
        m = int(rng.choice([4, 8, 16]))
        Q = _random_probe(rng, m)
        d = _random_intensity(rng, Q)
        anchor = _random_field(rng, (m, m))
        z = anchor + _random_field(rng, (m, m), scale=rng.uniform(0.01, 2.0))
        phi = fourier_misfit(z, Q, d)
        sur = surrogate_objective(z, anchor, Q, d)
        worst_dom = max(worst_dom, (phi - sur) / max(abs(sur), 1.0))
        phi_a = fourier_misfit(anchor, Q, d)
        worst_val = max(worst_val, abs(surrogate_objective(anchor, anchor, Q, d) - phi_a) / max(phi_a, 1e-300))
        worst_grad = max(worst_grad, _rel(surrogate_gradient(anchor, anchor, Q, d), fourier_gradient(anchor, Q, d)))
    ok = worst_dom <= 1e-9 and worst_val <= 1e-12 and worst_grad <= 1e-12
    detail = f"dominance {worst_dom:.1e}, value {worst_val:.1e}, gradient {worst_grad:.1e}"
    return "majorization", ok, instances, max(worst_dom, worst_val, worst_grad), detail


@_timed
def check_gradient(instances: int = 50, seed: int = 1, step: float = 1e-6):
    """Complex gradient against central finite differences over real and imaginary parts."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        m = int(rng.choice([4, 8]))
        Q = _random_probe(rng, m, zero_fraction=0.1)
        d = _random_intensity(rng, Q)
        z = _random_field(rng, (m, m))
        R = revised_exit_wave(z, Q, d)
        g = np.conj(Q) * (Q * z - R)
        fd = np.zeros_like(g)
        for idx in np.ndindex(m, m):
            for unit in (1.0, 1j):
                e = np.zeros((m, m), dtype=complex)
                e[idx] = unit * step
                diff = (fourier_misfit(z + e, Q, d) - fourier_misfit(z - e, Q, d)) / (2 * step)
                fd[idx] += diff * unit
        worst = max(worst, _rel(g, fd))
    return "gradient", worst < 1e-5, instances, worst


@_timed
def check_weight_bounds(instances: int = 1000, seed: int = 2):
    """``0 <= W_z <= 4``, ``|W_R| <= 4``, ``0 <= W_uH <= 1`` and bin averages of ``W_z`` equal one."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        m = int(rng.choice([2, 4, 8, 16]))
        Q = _random_probe(rng, m, zero_fraction=rng.uniform(0.0, 0.7))
        lv = build_level_stack(Q, np.zeros((m, m)), 2)[0]
        excess = max(
            -lv.W_z.min(),
            lv.W_z.max() - 4.0,
            np.abs(lv.W_R).max() - 4.0,
            -lv.W_uH.min(),
            lv.W_uH.max() - 1.0,
        )
        avg_err = np.abs(restrict(lv.W_z)[lv.mask] - 1.0).max(initial=0.0)
        worst = max(worst, excess, avg_err)
    return "weight_bounds", worst <= 1e-12, instances, worst


def _coarse_surrogate(z_H, Q_H, R_H):
    r = Q_H * z_H - R_H
    return 0.5 * float(np.vdot(r, r).real), np.conj(Q_H) * r


@_timed
def check_consistency(instances: int = 200, seed: int = 3):
    """Coarse surrogate value and gradient are bounded by the fine ones."""
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(instances):
        m = int(rng.choice([4, 8, 16]))
        Q = _random_probe(rng, m)
        d = _random_intensity(rng, Q)
        anchor = _random_field(rng, (m, m))
        z = _random_field(rng, (m, m))
        lv = build_level_stack(Q, np.zeros((m, m)), 2)[0]
        R = revised_exit_wave(anchor, Q, d, update=False)
        fine_val = 0.5 * float(np.linalg.norm(Q * z - R) ** 2)
        fine_grad = np.conj(Q) * (Q * z - R)
        val_H, grad_H = _coarse_surrogate(restrict(lv.W_z * z), restrict(Q), restrict(lv.W_R * R))
        bound1 = 0.25 * np.abs(lv.W_R).max() ** 2 * fine_val
        bound2 = 0.5 * lv.W_uH.max() * np.linalg.norm(fine_grad)
        worst = max(worst, (val_H - bound1) / max(bound1, 1.0), (np.linalg.norm(grad_H) - bound2) / max(bound2, 1.0))
    return "consistency", worst <= 1e-9, instances, worst


@_timed
def check_coarse_direction(instances: int = 200, seed: int = 4):
    """Two-grid coarse correction equals its closed form and is a descent direction."""
    rng = np.random.default_rng(seed)
    worst_form, worst_descent = 0.0, -np.inf
    for _ in range(instances):
        m = int(rng.choice([4, 8, 16]))
        Q = _random_probe(rng, m)
        alpha = rng.uniform(1e-3, 1.0)
        u = alpha * (np.abs(Q).max() ** 2 - np.abs(Q) ** 2)
        d = _random_intensity(rng, Q)
        R = revised_exit_wave(_random_field(rng, (m, m)), Q, d)
        z = _random_field(rng, (m, m))
        e_H, _ = coarse_direction(z, R, build_level_stack(Q, u, 2))

        grad = np.conj(Q) * (Q * z - R)
        energy_H = restrict(np.abs(Q) ** 2)
        Q_H2 = np.abs(restrict(Q)) ** 2
        lit = energy_H > 0
        u_H = np.where(lit, Q_H2 / np.where(lit, energy_H, 1.0), 0.0) * restrict(u)
        denom = np.where(lit, energy_H * (u_H + Q_H2), 1.0)
        closed = np.where(lit & (Q_H2 > 0), -Q_H2 / denom, 0.0) * restrict(grad)

        worst_form = max(worst_form, _rel(e_H, closed) if np.linalg.norm(closed) > 0 else float(np.abs(e_H).max()))
        step = prolong(e_H)
        scale = max(np.linalg.norm(grad) * np.linalg.norm(step), 1.0)
        worst_descent = max(worst_descent, float(np.vdot(grad, step).real) / scale)
    ok = worst_form <= 1e-10 and worst_descent <= 1e-12
    detail = f"closed form {worst_form:.1e}, descent {worst_descent:.1e}"
    return "coarse_direction", ok, instances, max(worst_form, worst_descent), detail


def _transfer_pairs(rng, instances):
    for _ in range(instances):
        m = int(rng.choice([4, 8, 16]))
        Q = _random_probe(rng, m)
        alpha = rng.uniform(1e-3, 1.0)
        yield Q, rpie_regularizer(Q, alpha)


@_timed
def check_regularization_transfer(instances: int = 200, seed: int = 5):
    """``restrict(1 / (u + |Q|**2)) == W_uH / (u_H + |Q_H|**2)`` on illuminated bins."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for Q, u in _transfer_pairs(rng, instances):
        fine, coarse = build_level_stack(Q, u, 2).levels
        lit = fine.mask & (np.abs(coarse.Q) > 0)
        lhs = restrict(1.0 / (u + np.abs(Q) ** 2))
        rhs = fine.W_uH / (coarse.u + np.abs(coarse.Q) ** 2 + ~lit)
        if lit.any():
            worst = max(worst, float(np.max(np.abs(lhs - rhs)[lit] / np.abs(lhs[lit]))))
    return "regularization_transfer", worst <= 1e-12, instances, worst


@_timed
def check_regularization_transfer_exact(instances: int = 200, seed: int = 5):
    """``W_uH / (u_H + |Q_H|**2) == 1 / restrict(u + |Q|**2)`` on bins with ``Q_H != 0``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for Q, u in _transfer_pairs(rng, instances):
        fine, coarse = build_level_stack(Q, u, 2).levels
        lit = fine.mask & (np.abs(coarse.Q) > 0)
        lhs = 1.0 / restrict(u + np.abs(Q) ** 2)
        rhs = fine.W_uH / (coarse.u + np.abs(coarse.Q) ** 2 + ~lit)
        if lit.any():
            worst = max(worst, float(np.max(np.abs(lhs - rhs)[lit] / np.abs(lhs[lit]))))
    return "regularization_transfer_exact", worst <= 1e-12, instances, worst


def surrogate_descent_trajectory(steps: int = 50, seed: int = 6):
    """Misfits, squared gradient norms and the rate constant along exact surrogate steps.

    Uses a noiseless ``n=32``, ``m=8`` instance started from an all-ones object.
    """
    n, m = 32, 8
    probe = make_zone_plate_probe(m)
    plan = scan_positions(n, m, 0.5)
    ds = make_dataset(make_synthetic_object(n, "texture", seed), probe, plan, 0.0, seed)
    z = np.ones((n, n), dtype=complex)
    cache = PhaseCache(ds.n_regions, m)
    phis, grads = [], []
    for j in range(steps + 1):
        phis.append(global_objective(z, probe, plan, ds.measurements))
        g = global_gradient(z, probe, plan, ds.measurements, cache.copy())
        grads.append(float(np.vdot(g, g).real))
        if j < steps:
            z = exact_surrogate_step(z, ds, cache)
    coverage_max = float(probe_coverage(ds).max())
    return np.array(phis), np.array(grads), coverage_max


@_timed
def check_monotone_descent(steps: int = 50, seed: int = 6):
    """Exact surrogate minimization never increases the misfit."""
    phis, _, _ = surrogate_descent_trajectory(steps, seed)
    rises = (phis[1:] - phis[:-1]) / np.maximum(phis[:-1], 1e-300)
    worst = float(rises.max())
    return "monotone_descent", worst <= 1e-12, steps, worst, f"misfit {phis[0]:.3e} -> {phis[-1]:.3e}"


@_timed
def check_sublinear_rate(steps: int = 50, seed: int = 6):
    """``min_{j<=t} ||grad||**2 <= max(coverage) * misfit_0 / (2 (t + 1))`` for every prefix."""
    phis, grads, cmax = surrogate_descent_trajectory(steps, seed)
    t = np.arange(len(grads))
    bound = cmax * phis[0] / (2.0 * (t + 1))
    ratio = np.minimum.accumulate(grads) / bound
    worst = float(ratio.max())
    first_bad = int(np.argmax(ratio > 1.0)) if worst > 1.0 else -1
    detail = f"max ratio to bound {worst:.3f}" + (f", first violated at t={first_bad}" if first_bad >= 0 else "")
    return "sublinear_rate", worst <= 1.0, len(grads), worst, detail


@_timed
def check_sublinear_rate_wirtinger(steps: int = 50, seed: int = 6):
    """The same rate bound measured with the Wirtinger gradient ``0.5 * (grad_x + 1j grad_y)``."""
    phis, grads, cmax = surrogate_descent_trajectory(steps, seed)
    t = np.arange(len(grads))
    bound = cmax * phis[0] / (2.0 * (t + 1))
    worst = float((np.minimum.accumulate(0.25 * grads) / bound).max())
    return "sublinear_rate_wirtinger", worst <= 1.0, len(grads), worst


@_timed
def check_transfer_identities(instances: int = 500, seed: int = 7):
    """restrict(prolong(x)) == x, commutation law and operator norm bounds with all-ones equality."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        h, w = (int(v) for v in rng.integers(1, 17, size=2))
        x = _random_field(rng, (h, w))
        A = _random_field(rng, (2 * h, 2 * w))
        f = A
        worst = max(worst, float(np.abs(restrict(prolong(x)) - x).max()))
        worst = max(worst, float(np.abs(x * restrict(A) - restrict(prolong(x) * A)).max()))
        nf, nx = np.linalg.norm(f), np.linalg.norm(x)
        worst = max(worst, np.linalg.norm(restrict(f)) - 0.5 * nf, abs(np.linalg.norm(prolong(x)) - 2.0 * nx) / nx)
        worst = max(worst, np.abs(restrict(f)).max() - np.abs(f).max(), abs(np.abs(prolong(x)).max() - np.abs(x).max()))
        ones_f, ones_x = np.ones((2 * h, 2 * w)), np.ones((h, w))
        worst = max(
            worst,
            abs(np.linalg.norm(restrict(ones_f)) - 0.5 * np.linalg.norm(ones_f)) / np.linalg.norm(ones_f),
            abs(np.abs(restrict(ones_f)).max() - 1.0),
        )
    return "transfer_identities", worst <= 1e-13, instances, worst


SUITES = {
    "majorization": check_majorization,
    "gradient": check_gradient,
    "weight_bounds": check_weight_bounds,
    "consistency": check_consistency,
    "coarse_direction": check_coarse_direction,
    "regularization_transfer": check_regularization_transfer,
    "regularization_transfer_exact": check_regularization_transfer_exact,
    "monotone_descent": check_monotone_descent,
    "sublinear_rate": check_sublinear_rate,
    "sublinear_rate_wirtinger": check_sublinear_rate_wirtinger,
    "transfer_identities": check_transfer_identities,
}


def run_suites(names=None) -> list[CheckResult]:
    """Run the named suites (all by default) in declaration order."""
    names = list(SUITES) if names is None else list(names)
    return [SUITES[name]() for name in names]
