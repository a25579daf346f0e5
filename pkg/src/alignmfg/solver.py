"""Energy descent over trajectory ensembles with frozen initial nodes.

Limited-memory quasi-Newton directions with Armijo backtracking; accepted
steps strictly decrease the energy, initial nodes are never touched.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .ensemble import Ensemble, energy_and_gradient, total_energy

__all__ = ["SolveConfig", "SolveReport", "initialize_ensemble", "minimize_energy"]


@dataclass(frozen=True)
class SolveConfig:
    max_iter: int = 10_000
    grad_tol: float = 1e-8          # scaled: ||g|| <= grad_tol * (1 + |J|)
    armijo_c1: float = 1e-4
    backtrack: float = 0.5
    step0: float = 1.0
    memory: int = 10                # 0 disables quasi-Newton directions
    max_backtracks: int = 60
    multi_start: int = 1
    perturbation: float = 0.0       # node noise scale for extra starts
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.armijo_c1 < 1.0 and 0.0 < self.backtrack < 1.0):
            raise ValueError("armijo_c1 and backtrack must lie in (0, 1)")
        if self.grad_tol <= 0 or self.step0 <= 0:
            raise ValueError("tolerances and step sizes must be > 0")
        if self.memory < 0 or self.multi_start < 1 or self.perturbation < 0:
            raise ValueError("memory >= 0, multi_start >= 1, perturbation >= 0")


@dataclass
class SolveReport:
    energy_history: np.ndarray      # energies of accepted iterates
    grad_norm: float
    iterations: int
    wall_time: float
    termination: str                # converged | max-iter | stalled
    n_evals: int = 0
    start_index: int = 0


class KernelParityError(ValueError):
    """The interaction kernel is not even; descent does not certify equilibria."""


def check_even_kernel(kernel, dim: int, probes: int = 16) -> None:
    """Numerically spot-check eta(z) == eta(-z)."""
    rng = np.random.default_rng(12345)
    z = rng.standard_normal((probes, dim))
    if not np.allclose(kernel.eval(z), kernel.eval(-z), rtol=0, atol=0):
        raise KernelParityError("kernel fails the evenness check")


# ---------------------------------------------------------------------------
# Core descent loop (flat vector interface)


def _two_loop(grad, s_list, y_list):
    q = grad.copy()
    alphas = []
    for s, y in zip(reversed(s_list), reversed(y_list)):
        rho = 1.0 / np.dot(y, s)
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    s, y = s_list[-1], y_list[-1]
    q *= np.dot(s, y) / np.dot(y, y)
    for (s, y), a in zip(zip(s_list, y_list), reversed(alphas)):
        rho = 1.0 / np.dot(y, s)
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return -q


def _descend(value, value_grad, x0, cfg: SolveConfig):
    """Armijo-backtracked descent; returns (x, f, report)."""
    t0 = time.perf_counter()
    x = np.asarray(x0, dtype=float).copy()
    f, g = value_grad(x)
    n_evals = 1
    history = [f]
    s_list: list[np.ndarray] = []
    y_list: list[np.ndarray] = []
    termination = "max-iter"
    it = 0
    while it < cfg.max_iter:
        gnorm = float(np.linalg.norm(g))
        if gnorm <= cfg.grad_tol * (1.0 + abs(f)):
            termination = "converged"
            break
        it += 1

        kinds = ["qn", "sd"] if s_list else ["sd"]
        accepted = False
        for kind in kinds:
            if kind == "qn":
                p = _two_loop(g, s_list, y_list)
                alpha = 1.0
            else:
                p = -g
                alpha = cfg.step0 / (1.0 + gnorm)
            slope = float(np.dot(g, p))
            if slope >= 0.0:  # rounding produced an ascent direction
                p = -g
                slope = -gnorm * gnorm
                alpha = cfg.step0 / (1.0 + gnorm)

            for _ in range(cfg.max_backtracks):
                x_new = x + alpha * p
                f_new = value(x_new)
                n_evals += 1
                if f_new <= f + cfg.armijo_c1 * alpha * slope and f_new < f:
                    accepted = True
                    break
                alpha *= cfg.backtrack
            if accepted:
                break
            if kind == "qn":  # quasi-Newton step failed: restart the memory
                s_list.clear()
                y_list.clear()
        if not accepted:
            termination = "stalled"
            break

        f_old, g_old = f, g
        f, g = value_grad(x_new)
        n_evals += 1
        s = x_new - x
        y = g - g_old
        sy = float(np.dot(s, y))
        if cfg.memory > 0 and sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            s_list.append(s)
            y_list.append(y)
            if len(s_list) > cfg.memory:
                s_list.pop(0)
                y_list.pop(0)
        x = x_new
        history.append(f)

    report = SolveReport(
        energy_history=np.asarray(history),
        grad_norm=float(np.linalg.norm(g)),
        iterations=it,
        wall_time=time.perf_counter() - t0,
        termination=termination,
        n_evals=n_evals,
    )
    return x, f, report


def minimize_free_nodes(value, value_grad, x0, cfg: SolveConfig):
    """Public hook for other modules (best responses reuse the same loop)."""
    return _descend(value, value_grad, x0, cfg)


# ---------------------------------------------------------------------------
# Ensemble initialization and minimization


def initialize_ensemble(scenario, seed=None) -> Ensemble:
    """Sample starts and seed straight-line first guesses.

    Interior guess: constant velocity -grad Psi(x0)/delta, clipped to the
    configured speed cap (and to a safe torus step), then Gaussian noise of
    scale ``scenario.init_perturbation`` on all free nodes.
    """
    game = scenario.build_game()
    starts, pops, weights = scenario.sample_starts(seed)
    params = game.params
    m = params.steps
    n, d = starts.shape

    _, gpsi = _terminal_grads(game, starts, pops)
    v0 = -gpsi / np.asarray(params.deltas)[pops][:, None]
    cap = scenario.init_speed_cap
    if game.domain.is_torus:
        cap = min(cap, 0.45 * game.domain.min_period() / params.dt)
    speed = np.linalg.norm(v0, axis=1)
    over = speed > cap
    if np.any(over):
        v0[over] *= (cap / speed[over])[:, None]

    t = np.arange(m + 1) * params.dt
    positions = starts[:, None, :] + t[None, :, None] * v0[:, None, :]
    zeta = scenario.init_perturbation
    if zeta > 0:
        rng = np.random.default_rng(
            scenario.seed if seed is None else seed)
        positions[:, 1:, :] += zeta * rng.standard_normal((n, m, d))
    return Ensemble(game, positions, weights, pops)


def _terminal_grads(game, points, pops):
    vals = np.zeros(points.shape[0])
    grads = np.zeros_like(points)
    for q, psi in enumerate(game.terminal_costs):
        mask = pops == q
        if np.any(mask):
            v, g = psi.eval_grad(points[mask], game.domain)
            vals[mask] = v
            grads[mask] = g
    return vals, grads


def _solve_one(ens: Ensemble, cfg: SolveConfig):
    shape = ens.positions.shape
    fixed = ens.positions[:, :1, :]

    def unpack(x):
        free = x.reshape(shape[0], shape[1] - 1, shape[2])
        return np.concatenate([fixed, free], axis=1)

    def value(x):
        return total_energy(ens, unpack(x))

    def value_grad(x):
        f, g = energy_and_gradient(ens, unpack(x))
        return f, g[:, 1:, :].ravel()

    x0 = ens.positions[:, 1:, :].ravel()
    x, f, report = _descend(value, value_grad, x0, cfg)
    return ens.with_positions(unpack(x)), f, report


def minimize_energy(ens: Ensemble, cfg: SolveConfig | None = None):
    """Descend the global energy; returns (ensemble, report).

    With ``multi_start > 1`` additional runs start from noise-perturbed
    copies (scale ``perturbation``) and the lowest-energy result wins.
    """
    cfg = cfg or SolveConfig()
    check_even_kernel(ens.game.kernel, ens.dim)
    best = None
    for s in range(cfg.multi_start):
        start = ens.copy()
        if s > 0 and cfg.perturbation > 0:
            rng = np.random.default_rng([cfg.seed, s])
            start.positions[:, 1:, :] += cfg.perturbation * rng.standard_normal(
                start.positions[:, 1:, :].shape)
        solved, f, report = _solve_one(start, cfg)
        report.start_index = s
        if best is None or f < best[1]:
            best = (solved, f, report)
    solved, _, report = best
    assert solved.initial_nodes_intact()
    return solved, report
