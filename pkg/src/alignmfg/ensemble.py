"""Weighted piecewise-linear trajectory ensembles and their energies.

The discrete configuration is N curves on a uniform time grid of M intervals.
Velocities are interval constants; the kernel weight of an interval is the
trapezoidal average of its two node values, which keeps the pair energy
exactly symmetric and the gradient exactly computable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Domain, Game, Kernel

__all__ = [
    "Ensemble",
    "DiscreteCurve",
    "velocities",
    "kinetic_energy",
    "pair_interaction",
    "agent_cost",
    "agent_costs",
    "total_energy",
    "energy_gradient",
    "energy_and_gradient",
    "own_cost",
    "own_cost_and_gradient",
]

# block size for pairwise sweeps; keeps (block, N, M, d) buffers ~tens of MB
_PAIR_BLOCK = 64


class EnsembleError(ValueError):
    pass


class WrapAmbiguityError(EnsembleError):
    """A discrete step reached half a torus period: velocity sign ambiguous."""


@dataclass
class DiscreteCurve:
    """One particle's node positions plus the grid geometry."""

    nodes: np.ndarray  # (M+1, d)
    dt: float
    domain: Domain

    @property
    def steps(self) -> int:
        return self.nodes.shape[0] - 1


class Ensemble:
    """Discrete measure on curves: positions (N, M+1, d), weights, labels.

    Node 0 of every particle is frozen at creation (the initial distribution
    is a hard constraint); mutate only nodes 1..M.
    """

    def __init__(self, game: Game, positions, weights, pops):
        self.game = game
        self.positions = np.array(positions, dtype=float)
        self.weights = np.array(weights, dtype=float)
        self.pops = np.array(pops, dtype=int)
        if self.positions.ndim != 3:
            raise EnsembleError("positions must have shape (N, M+1, d)")
        n, nodes, d = self.positions.shape
        if nodes != game.params.steps + 1:
            raise EnsembleError("node count does not match the time grid")
        if d != game.domain.dim:
            raise EnsembleError("coordinate count does not match the domain")
        if self.weights.shape != (n,) or self.pops.shape != (n,):
            raise EnsembleError("weights/pops must have one entry per particle")
        if np.any(self.weights <= 0):
            raise EnsembleError("particle weights must be > 0")
        if self.pops.min() < 0 or self.pops.max() >= game.params.n_pops:
            raise EnsembleError("population label out of range")
        for q, mass in enumerate(game.params.masses):
            got = self.weights[self.pops == q].sum()
            if not np.isclose(got, mass, rtol=1e-9, atol=1e-12):
                raise EnsembleError(
                    f"population {q} carries mass {got}, expected {mass}"
                )
        self._initial_nodes = self.positions[:, 0, :].copy()

    # -- basic geometry -----------------------------------------------------

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]

    @property
    def steps(self) -> int:
        return self.positions.shape[1] - 1

    @property
    def dim(self) -> int:
        return self.positions.shape[2]

    @property
    def dt(self) -> float:
        return self.game.params.dt

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def curve(self, i: int) -> DiscreteCurve:
        return DiscreteCurve(self.positions[i], self.dt, self.game.domain)

    def copy(self) -> "Ensemble":
        return Ensemble(self.game, self.positions.copy(), self.weights, self.pops)

    def with_positions(self, positions) -> "Ensemble":
        return Ensemble(self.game, positions, self.weights, self.pops)

    def initial_nodes_intact(self) -> bool:
        return np.array_equal(self.positions[:, 0, :], self._initial_nodes)

    def velocities(self) -> np.ndarray:
        """All interval velocities, shape (N, M, d)."""
        return _velocities(self.positions, self.dt, self.game.domain)

    def deltas_per_particle(self) -> np.ndarray:
        return np.asarray(self.game.params.deltas)[self.pops]

    def terminal_values_grads(self, final=None):
        """Psi and grad Psi of every particle's final node, population-wise."""
        if final is None:
            final = self.positions[:, -1, :]
        vals = np.zeros(final.shape[0])
        grads = np.zeros_like(final)
        for q, psi in enumerate(self.game.terminal_costs):
            mask = self.pops == q
            if np.any(mask):
                v, g = psi.eval_grad(final[mask], self.game.domain)
                vals[mask] = v
                grads[mask] = g
        return vals, grads


def _velocities(positions: np.ndarray, dt: float, domain: Domain) -> np.ndarray:
    steps = domain.displacement(positions[..., 1:, :], positions[..., :-1, :])
    if domain.is_torus:
        half = np.asarray(domain.periods) / 2.0
        if np.any(np.abs(steps) >= half * (1.0 - 1e-12)):
            raise WrapAmbiguityError(
                "a step reaches half a torus period; refine the time grid"
            )
    return steps / dt


# ---------------------------------------------------------------------------
# Single-curve operations


def velocities(curve: DiscreteCurve) -> np.ndarray:
    return _velocities(curve.nodes, curve.dt, curve.domain)


def kinetic_energy(curve: DiscreteCurve) -> float:
    v = velocities(curve)
    return 0.5 * curve.dt * float(np.sum(v * v))


def pair_interaction(curve: DiscreteCurve, other: DiscreteCurve,
                     kernel: Kernel) -> float:
    """Alignment cost between two curves on the same grid.

    (dt/2) sum_k |v_k - w_k|^2 * etabar_k with etabar_k the trapezoidal
    kernel weight of interval k.
    """
    if curve.nodes.shape != other.nodes.shape or curve.dt != other.dt:
        raise EnsembleError("curves live on different grids")
    dv = velocities(curve) - velocities(other)
    eta = kernel.eval(curve.domain.displacement(curve.nodes, other.nodes))
    etabar = 0.5 * (eta[:-1] + eta[1:])
    return 0.5 * curve.dt * float(np.sum(np.sum(dv * dv, axis=-1) * etabar))


# ---------------------------------------------------------------------------
# Pairwise sweeps (blocked)


def _interaction_block(domain, kernel, dt, pos_blk, vel_blk, pos_all, vel_all,
                       w_all, need_grad):
    """Interaction of a block of curves against a whole curve family.

    Returns (vals, grads):
      vals[b]  = sum_j w_j V(curve_b, curve_j)
      grads[b] = sum_j w_j d/d(nodes_b) V(curve_b, curve_j)   (if requested)

    The j-sum runs over the full family in index order (fixed reduction
    order, deterministic for a fixed configuration).
    """
    disp = domain.displacement(pos_blk[:, None, :, :], pos_all[None, :, :, :])
    if need_grad:
        eta, geta = kernel.eval_grad(disp)  # (b, N, M+1), (b, N, M+1, d)
    else:
        eta = kernel.eval(disp)
    etabar = 0.5 * (eta[:, :, :-1] + eta[:, :, 1:])  # (b, N, M)
    dv = vel_blk[:, None, :, :] - vel_all[None, :, :, :]  # (b, N, M, d)
    dv2 = np.sum(dv * dv, axis=-1)  # (b, N, M)
    vals = 0.5 * dt * np.einsum("bjk,bjk,j->b", dv2, etabar, w_all)
    if not need_grad:
        return vals, None

    b, m1, d = pos_blk.shape
    grads = np.zeros((b, m1, d))
    # velocity part: node m picks up S1_{m-1} - S1_m, S1_k = sum_j w etabar dv
    s1 = np.einsum("bjkd,bjk,j->bkd", dv, etabar, w_all)  # (b, M, d)
    grads[:, 1:, :] += s1
    grads[:, :-1, :] -= s1
    # kernel part: node m carries dv2_{m-1} + dv2_m (missing ends drop out)
    c = np.zeros((dv2.shape[0], dv2.shape[1], m1))
    c[:, :, 1:] += dv2
    c[:, :, :-1] += dv2
    grads += 0.25 * dt * np.einsum("bjmd,bjm,j->bmd", geta, c, w_all)
    return vals, grads


def _interaction_sums(ens: Ensemble, positions=None, need_grad=False,
                      block=_PAIR_BLOCK):
    """Per-particle frozen-field interaction sums over the whole ensemble."""
    if positions is None:
        positions = ens.positions
    vel = _velocities(positions, ens.dt, ens.game.domain)
    n = positions.shape[0]
    vals = np.empty(n)
    grads = np.empty_like(positions) if need_grad else None
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        v, g = _interaction_block(
            ens.game.domain, ens.game.kernel, ens.dt,
            positions[lo:hi], vel[lo:hi], positions, vel,
            ens.weights, need_grad,
        )
        vals[lo:hi] = v
        if need_grad:
            grads[lo:hi] = g
    return vals, grads


def _kinetic_terms(positions, dt, domain):
    vel = _velocities(positions, dt, domain)
    kin = 0.5 * dt * np.sum(vel * vel, axis=(1, 2))  # (N,)
    return vel, kin


def _kinetic_gradient(vel: np.ndarray) -> np.ndarray:
    """d/d(nodes) of the per-curve kinetic energy, shape (N, M+1, d)."""
    n, m, d = vel.shape
    g = np.zeros((n, m + 1, d))
    g[:, 1:, :] += vel
    g[:, :-1, :] -= vel
    return g


# ---------------------------------------------------------------------------
# Energies


def agent_cost(i: int, ens: Ensemble) -> float:
    """Individual cost of particle i against the frozen ensemble.

    delta_p K + Psi_p(final) + lambda sum_j w_j V(gamma_i, gamma_j); the
    j-sum keeps the self term (zero at the current profile).
    """
    return own_cost(ens, i, ens.positions[i])


def agent_costs(ens: Ensemble) -> np.ndarray:
    """All individual costs at once, shape (N,)."""
    vel, kin = _kinetic_terms(ens.positions, ens.dt, ens.game.domain)
    psi, _ = ens.terminal_values_grads()
    vals, _ = _interaction_sums(ens)
    return ens.deltas_per_particle() * kin + psi + ens.game.params.lam * vals


def total_energy(ens: Ensemble, positions=None) -> float:
    """Global energy 2 sum_i w_i (delta_p K_i + Psi_i) + lambda V(Q)."""
    if positions is None:
        positions = ens.positions
    vel, kin = _kinetic_terms(positions, ens.dt, ens.game.domain)
    psi, _ = ens.terminal_values_grads(positions[:, -1, :])
    vals, _ = _interaction_sums(ens, positions)
    w = ens.weights
    delta = ens.deltas_per_particle()
    return float(
        2.0 * np.sum(w * (delta * kin + psi))
        + ens.game.params.lam * np.sum(w * vals)
    )


def energy_and_gradient(ens: Ensemble, positions=None):
    """Total energy and its exact gradient w.r.t. every node.

    Node-0 rows are zeroed: initial positions are constrained.  For an even
    kernel each particle block equals 2 w_i times the gradient of that
    particle's individual cost.
    """
    if positions is None:
        positions = ens.positions
    vel, kin = _kinetic_terms(positions, ens.dt, ens.game.domain)
    psi, gpsi = ens.terminal_values_grads(positions[:, -1, :])
    vals, gvals = _interaction_sums(ens, positions, need_grad=True)
    w = ens.weights
    delta = ens.deltas_per_particle()
    lam = ens.game.params.lam

    energy = float(2.0 * np.sum(w * (delta * kin + psi)) + lam * np.sum(w * vals))
    grad = _kinetic_gradient(vel) * delta[:, None, None]
    grad[:, -1, :] += gpsi
    grad += lam * gvals
    grad *= 2.0 * w[:, None, None]
    grad[:, 0, :] = 0.0
    return energy, grad


def energy_gradient(ens: Ensemble) -> np.ndarray:
    return energy_and_gradient(ens)[1]


# ---------------------------------------------------------------------------
# Single-particle cost against the frozen population (best responses)


def _own_terms(ens: Ensemble, i: int, nodes, need_grad, frozen=None):
    nodes = np.asarray(nodes, dtype=float)
    dom = ens.game.domain
    vel = _velocities(nodes[None], ens.dt, dom)
    kin = 0.5 * ens.dt * float(np.sum(vel * vel))
    q = int(ens.pops[i])
    psi, gpsi = ens.game.terminal_costs[q].eval_grad(nodes[-1], dom)
    if frozen is None:
        frozen = (ens.positions, ens.velocities())
    vals, grads = _interaction_block(
        dom, ens.game.kernel, ens.dt, nodes[None], vel,
        frozen[0], frozen[1], ens.weights, need_grad,
    )
    delta = ens.game.params.deltas[q]
    lam = ens.game.params.lam
    cost = delta * kin + float(psi) + lam * float(vals[0])
    if not need_grad:
        return cost, None
    grad = delta * _kinetic_gradient(vel)[0] + lam * grads[0]
    grad[-1] += gpsi
    grad[0] = 0.0
    return cost, grad


def own_cost(ens: Ensemble, i: int, nodes, frozen=None) -> float:
    """Cost of one candidate curve for particle i, everything else frozen."""
    return _own_terms(ens, i, nodes, False, frozen)[0]


def own_cost_and_gradient(ens: Ensemble, i: int, nodes, frozen=None):
    """Cost and node gradient of a candidate curve, everything else frozen.

    The frozen population includes particle i's incumbent curve; node 0 of
    the gradient is zeroed (fixed start).
    """
    return _own_terms(ens, i, nodes, True, frozen)


# ---------------------------------------------------------------------------
# Grid refinement


def refine_time_grid(ens: Ensemble) -> Ensemble:
    """Double the number of time intervals by linear node interpolation."""
    from dataclasses import replace

    pos = ens.positions
    n, m1, d = pos.shape
    new = np.empty((n, 2 * (m1 - 1) + 1, d))
    new[:, ::2] = pos
    new[:, 1::2] = 0.5 * (pos[:, :-1] + pos[:, 1:])
    params = replace(ens.game.params, steps=2 * ens.game.params.steps)
    game = replace(ens.game, params=params)
    return Ensemble(game, new, ens.weights, ens.pops)
