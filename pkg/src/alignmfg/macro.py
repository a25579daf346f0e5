"""Macroscopic fields induced by an ensemble: local mass a, mean velocity u,
velocity disorder sigma, velocity moments, and the Eulerian energy form.

Fields live at interval indices (velocities are interval constants); node-time
evaluation averages the two adjacent intervals.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import Ensemble

__all__ = [
    "MacroSample",
    "MomentSeries",
    "FieldBatch",
    "moments",
    "macro_eval",
    "macro_fields_batch",
    "decomposition_check",
    "eulerian_energy",
]


@dataclass(frozen=True)
class MomentSeries:
    """Velocity moments per interval: m1[k] = sum w |v|, m2[k] = sum w |v|^2."""

    times: np.ndarray
    m1: np.ndarray
    m2: np.ndarray


@dataclass(frozen=True)
class MacroSample:
    k: int
    x: np.ndarray
    a: float
    au: np.ndarray
    u: np.ndarray
    sigma: float


@dataclass(frozen=True)
class FieldBatch:
    """Fields at a batch of points; gradient entries are None unless requested.

    ``ju`` is the Jacobian du_alpha/dx_beta with shape (S, d, d).
    """

    a: np.ndarray
    au: np.ndarray
    u: np.ndarray
    sigma: np.ndarray
    grad_a: np.ndarray | None = None
    ju: np.ndarray | None = None
    grad_sigma: np.ndarray | None = None


def moments(ens: Ensemble) -> MomentSeries:
    vel = ens.velocities()
    speed = np.linalg.norm(vel, axis=-1)  # (N, M)
    w = ens.weights
    m1 = np.einsum("nk,n->k", speed, w)
    m2 = np.einsum("nk,n->k", speed**2, w)
    times = np.arange(ens.steps) * ens.dt
    return MomentSeries(times=times, m1=m1, m2=m2)


def _source_positions(ens: Ensemble, k: int, where: str) -> np.ndarray:
    if where == "node":
        return ens.positions[:, k, :]
    if where == "midpoint":
        return 0.5 * (ens.positions[:, k, :] + ens.positions[:, k + 1, :])
    raise ValueError(f"unknown evaluation location {where!r}")


def macro_fields_batch(ens: Ensemble, k: int, x, where: str = "node",
                       velocities=None, need_grads: bool = False) -> FieldBatch:
    """Evaluate (a, au, u, sigma) and optionally their x-derivatives.

    ``x`` has shape (S, d); sources are the particles at interval ``k``
    (positions at the node or the interval midpoint, velocities of the
    interval unless an explicit (N, d) array is passed).
    """
    if not 0 <= k < ens.steps:
        raise ValueError("interval index out of range")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    pos = _source_positions(ens, k, where)
    vel = ens.velocities()[:, k, :] if velocities is None else velocities
    w = ens.weights
    dom, ker = ens.game.domain, ens.game.kernel

    disp = dom.displacement(x[:, None, :], pos[None, :, :])  # (S, N, d)
    if need_grads:
        eta, geta = ker.eval_grad(disp)
    else:
        eta, geta = ker.eval(disp), None
    a = eta @ w
    au = np.einsum("sn,nd,n->sd", eta, vel, w)
    u = au / a[:, None]
    dev = vel[None, :, :] - u[:, None, :]  # (S, N, d)
    dev2 = np.sum(dev * dev, axis=-1)
    sigma = np.einsum("sn,sn,n->s", dev2, eta, w)
    if not need_grads:
        return FieldBatch(a=a, au=au, u=u, sigma=sigma)

    grad_a = np.einsum("snb,n->sb", geta, w)
    ju = np.einsum("sna,snb,n->sab", dev, geta, w) / a[:, None, None]
    # the mixed term of grad sigma vanishes: u is the eta-weighted mean
    grad_sigma = np.einsum("sn,snb,n->sb", dev2, geta, w)
    return FieldBatch(a=a, au=au, u=u, sigma=sigma, grad_a=grad_a, ju=ju,
                      grad_sigma=grad_sigma)


def macro_eval(ens: Ensemble, k: int, x) -> MacroSample:
    """Fields at one space-time point (positions at node k, interval-k
    velocities)."""
    x = np.asarray(x, dtype=float)
    fb = macro_fields_batch(ens, k, x[None])
    return MacroSample(k=k, x=x, a=float(fb.a[0]), au=fb.au[0], u=fb.u[0],
                       sigma=float(fb.sigma[0]))


def decomposition_check(ens: Ensemble, k: int, x, v):
    """Direct second moment around v versus a|v-u|^2 + sigma.

    Returns (lhs, rhs); the two are equal up to rounding for any v.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    pos = _source_positions(ens, k, "node")
    vel = ens.velocities()[:, k, :]
    eta = ens.game.kernel.eval(ens.game.domain.displacement(x[None], pos))
    dv = v[None, :] - vel
    lhs = float(np.einsum("n,n,n->", np.sum(dv * dv, axis=-1), eta, ens.weights))
    fb = macro_fields_batch(ens, k, x[None])
    rhs = float(fb.a[0] * np.sum((v - fb.u[0]) ** 2) + fb.sigma[0])
    return lhs, rhs


def eulerian_energy(rho, w, kernel, delta, lam, length, dt) -> float:
    """Benamou-Brenier-style energy of gridded (density, momentum) fields.

    Quadrature of (delta/2)|w|^2/rho + lambda (|w|^2/rho)(eta*rho)
    - lambda w.(eta*w) over a periodic 1D grid, with 0/0 := 0.
    """
    from .eulerian import Grid1D, convolve_periodic

    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    w = np.atleast_2d(np.asarray(w, dtype=float))
    if rho.shape != w.shape:
        raise ValueError("density and momentum grids differ in shape")
    if np.any(rho < 0):
        raise ValueError("density must be nonnegative")
    if np.any((rho == 0) & (w != 0)):
        raise ValueError("momentum must vanish wherever the density does")
    grid = Grid1D(n_x=rho.shape[1], length=length, n_t=rho.shape[0], dt=dt)

    total = 0.0
    for k in range(rho.shape[0]):
        r, m = rho[k], w[k]
        with np.errstate(invalid="ignore", divide="ignore"):
            m2_over_r = np.where(r > 0, m * m / np.where(r > 0, r, 1.0), 0.0)
        conv_r = convolve_periodic(r, kernel, grid)
        conv_m = convolve_periodic(m, kernel, grid)
        cell = 0.5 * delta * m2_over_r + lam * m2_over_r * conv_r - lam * m * conv_m
        total += float(np.sum(cell)) * grid.h * dt
    return total
