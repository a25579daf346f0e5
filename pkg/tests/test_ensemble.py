import numpy as np
import pytest

from alignmfg.ensemble import (
    DiscreteCurve,
    Ensemble,
    EnsembleError,
    agent_cost,
    agent_costs,
    energy_and_gradient,
    kinetic_energy,
    own_cost_and_gradient,
    pair_interaction,
    refine_time_grid,
    total_energy,
    velocities,
)
from alignmfg.model import (
    Domain,
    Kernel,
    LinearTerm,
    TerminalCost,
)

from conftest import make_ensemble, make_game, random_ensemble

EUC1 = Domain("euclidean", 1)
TORUS1 = Domain("flat-torus", 1, (1.0,))


def line_nodes(x0, x1, steps, dim=1):
    """Straight line from x0 to x1 with ``steps`` intervals."""
    t = np.linspace(0.0, 1.0, steps + 1)[:, None]
    return (1 - t) * np.atleast_1d(x0) + t * np.atleast_1d(x1)


class TestCurves:
    def test_constant_curve_zero_velocity_and_energy(self):
        c = DiscreteCurve(np.full((5, 2), 1.7), 0.25, Domain("euclidean", 2))
        assert np.all(velocities(c) == 0.0)
        assert kinetic_energy(c) == 0.0

    def test_unit_difference_quotient(self):
        c = DiscreteCurve(np.array([[0.0], [1.0]]), 1.0, EUC1)
        assert np.allclose(velocities(c), [[1.0]])

    def test_torus_velocity_wraps(self):
        c = DiscreteCurve(np.array([[0.9], [0.1]]), 1.0, TORUS1)
        assert np.allclose(velocities(c), [[0.2]])

    @pytest.mark.parametrize("steps", [1, 3, 8, 17])
    def test_straight_line_kinetic_energy_exact(self, steps):
        # 0.5 * integral of 1^2 over [0,1]; exact for constant speed
        c = DiscreteCurve(line_nodes(0.0, 1.0, steps), 1.0 / steps, EUC1)
        assert np.isclose(kinetic_energy(c), 0.5, rtol=1e-12)

    def test_kinetic_quadratic_homogeneity(self, rng):
        nodes = rng.standard_normal((7, 3))
        c1 = DiscreteCurve(nodes, 0.2, Domain("euclidean", 3))
        c2 = DiscreteCurve(2.0 * nodes, 0.2, Domain("euclidean", 3))
        assert np.isclose(kinetic_energy(c2), 4.0 * kinetic_energy(c1))


class TestPairInteraction:
    def test_self_interaction_vanishes(self, rng):
        nodes = rng.standard_normal((6, 2))
        c = DiscreteCurve(nodes, 0.2, Domain("euclidean", 2))
        k = Kernel("smoothed-exponential", 1.0, 0.5, 0.05)
        assert pair_interaction(c, c, k) == 0.0

    def test_translates_share_velocities(self, rng):
        nodes = rng.standard_normal((6, 2))
        dom = Domain("euclidean", 2)
        c1 = DiscreteCurve(nodes, 0.2, dom)
        c2 = DiscreteCurve(nodes + np.array([0.4, -1.0]), 0.2, dom)
        k = Kernel("gaussian", 1.0, 1.0)
        # velocity differences vanish up to the rounding of the shifted nodes
        assert pair_interaction(c1, c2, k) <= 1e-25

    def test_hand_value_constant_kernel(self):
        # (1/2) * |1 - 0|^2 * 1 over one unit interval
        c1 = DiscreteCurve(np.array([[0.0], [1.0]]), 1.0, EUC1)
        c2 = DiscreteCurve(np.array([[0.0], [0.0]]), 1.0, EUC1)
        k = Kernel("constant", 1.0, 1.0)
        assert np.isclose(pair_interaction(c1, c2, k), 0.5, rtol=1e-12)

    def test_symmetry_for_even_kernels(self):
        dom = Domain("euclidean", 2)
        k = Kernel("smoothed-exponential", 1.2, 0.6, 0.06)
        rng = np.random.default_rng(3)
        for _ in range(100):
            a = DiscreteCurve(rng.standard_normal((5, 2)), 0.25, dom)
            b = DiscreteCurve(rng.standard_normal((5, 2)), 0.25, dom)
            vab = pair_interaction(a, b, k)
            vba = pair_interaction(b, a, k)
            assert np.isclose(vab, vba, rtol=1e-14, atol=1e-15)

    def test_grid_mismatch_rejected(self):
        c1 = DiscreteCurve(np.zeros((3, 1)), 0.5, EUC1)
        c2 = DiscreteCurve(np.zeros((4, 1)), 0.5, EUC1)
        with pytest.raises(EnsembleError):
            pair_interaction(c1, c2, Kernel("constant", 1.0, 1.0))


class TestAgentCost:
    def test_single_still_particle_pays_terminal_only(self):
        psi = TerminalCost((LinearTerm((2.0,)),))
        game = make_game(steps=3, psis=(psi,),
                         kernel=Kernel("gaussian", 1.0, 1.0))
        ens = make_ensemble(np.full((1, 4, 1), 0.7), game=game)
        assert np.isclose(agent_cost(0, ens), 1.4, rtol=1e-12)

    def test_single_agent_linear_psi_closed_form(self):
        # optimal curve has velocity -g/delta; F = -T g^2/(2 delta) + g x0
        g, delta, horizon, x0, steps = 1.5, 2.0, 1.0, 0.3, 8
        psi = TerminalCost((LinearTerm((g,)),))
        game = make_game(steps=steps, horizon=horizon, deltas=(delta,),
                         psis=(psi,), kernel=Kernel("gaussian", 1.0, 1.0))
        nodes = line_nodes(x0, x0 - horizon * g / delta, steps)
        ens = make_ensemble(nodes[None], game=game)
        expect = -horizon * g**2 / (2 * delta) + g * x0
        assert np.isclose(agent_cost(0, ens), expect, rtol=1e-12)

    def test_two_particle_hand_case(self):
        # curves 0->1 and 0->0, eta == 1, T = M = 1, delta = lam = 1,
        # equal weights 1/2: F_1 = K_1 + w_2 V(1,2) = 0.5 + 0.25
        game = make_game(steps=1, kernel=Kernel("constant", 1.0, 1.0))
        pos = np.array([[[0.0], [1.0]], [[0.0], [0.0]]])
        ens = make_ensemble(pos, game=game)
        assert np.isclose(agent_cost(0, ens), 0.75, rtol=1e-12)
        assert np.isclose(agent_cost(1, ens), 0.25, rtol=1e-12)


class TestTotalEnergy:
    def test_still_ensemble_pays_twice_the_terminal_mass(self, rng):
        psi = TerminalCost((LinearTerm((1.0, -2.0)),))
        game = make_game(domain=Domain("euclidean", 2), steps=4, psis=(psi,),
                         kernel=Kernel("smoothed-exponential", 1.0, 0.5, 0.05))
        starts = rng.standard_normal((5, 2))
        pos = np.repeat(starts[:, None, :], 5, axis=1)
        ens = make_ensemble(pos, game=game)
        psi_vals = starts @ np.array([1.0, -2.0])
        assert np.isclose(total_energy(ens),
                          2.0 * np.sum(ens.weights * psi_vals), rtol=1e-12)

    def test_two_particle_hand_case_and_identity(self):
        # direct: sum_i w_i 2 delta K_i = 0.5, lam sum w_i w_j V_ij = 0.25;
        # the J/F identity gives the same 0.75
        game = make_game(steps=1, kernel=Kernel("constant", 1.0, 1.0))
        pos = np.array([[[0.0], [1.0]], [[0.0], [0.0]]])
        ens = make_ensemble(pos, game=game)
        j = total_energy(ens)
        assert np.isclose(j, 0.75, rtol=1e-12)
        costs = agent_costs(ens)
        kin = np.array([0.5, 0.0])
        psi = np.zeros(2)
        ident = float(np.sum(ens.weights * (costs + kin + psi)))
        assert np.isclose(j, ident, rtol=1e-14)

    def test_single_still_particle_no_terminal_is_free(self):
        game = make_game(steps=3, kernel=Kernel("gaussian", 1.0, 1.0))
        ens = make_ensemble(np.zeros((1, 4, 1)), game=game)
        assert total_energy(ens) == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_cost_energy_identity_random(self, seed):
        ens = random_ensemble(seed)
        vel = ens.velocities()
        kin = 0.5 * ens.dt * np.sum(vel * vel, axis=(1, 2))
        psi, _ = ens.terminal_values_grads()
        ident = float(np.sum(ens.weights * (agent_costs(ens)
                                            + ens.deltas_per_particle() * kin
                                            + psi)))
        assert np.isclose(total_energy(ens), ident, rtol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_interaction_bounded_by_kinetic_mass(self, seed):
        # lam V(Q) <= 2 lam (sup eta) W sum_i w_i K_i
        ens = random_ensemble(seed)
        vel = ens.velocities()
        kin = 0.5 * ens.dt * np.sum(vel * vel, axis=(1, 2))
        psi, _ = ens.terminal_values_grads()
        lam = ens.game.params.lam
        j = total_energy(ens)
        kpart = float(np.sum(ens.weights * (ens.deltas_per_particle() * kin + psi)))
        lam_v = j - 2.0 * kpart
        bound = (2.0 * lam * ens.game.kernel.amplitude * ens.total_mass
                 * float(np.sum(ens.weights * kin)))
        assert lam_v <= bound * (1 + 1e-12) + 1e-12

    @pytest.mark.parametrize("seed", range(3))
    def test_kinetic_terminal_lower_bound(self, seed):
        # delta K + Psi(end) >= delta K / 2 + Psi(start) - Lip^2 T / delta
        ens = random_ensemble(seed)
        vel = ens.velocities()
        kin = 0.5 * ens.dt * np.sum(vel * vel, axis=(1, 2))
        horizon = ens.game.params.horizon
        lo = ens.positions.min(axis=(0, 1))
        hi = ens.positions.max(axis=(0, 1))
        psi_end, _ = ens.terminal_values_grads()
        psi_start, _ = ens.terminal_values_grads(ens.positions[:, 0, :])
        for i in range(ens.n_particles):
            q = int(ens.pops[i])
            delta = ens.game.params.deltas[q]
            lip = ens.game.terminal_costs[q].lipschitz_bound(lo, hi)
            lhs = delta * kin[i] + psi_end[i]
            rhs = 0.5 * delta * kin[i] + psi_start[i] - lip**2 * horizon / delta
            assert lhs >= rhs - 1e-10


class TestGradient:
    def fd_gradient(self, ens, step=1e-5):
        pos = ens.positions.copy()
        out = np.zeros_like(pos)
        for i in range(ens.n_particles):
            for k in range(1, ens.steps + 1):
                for a in range(ens.dim):
                    keep = pos[i, k, a]
                    pos[i, k, a] = keep + step
                    fp = total_energy(ens, pos)
                    pos[i, k, a] = keep - step
                    fm = total_energy(ens, pos)
                    pos[i, k, a] = keep
                    out[i, k, a] = (fp - fm) / (2 * step)
        return out

    def test_still_no_terminal_gradient_is_zero(self):
        game = make_game(steps=3, deltas=(1.0, 2.0), masses=(0.5, 0.5),
                         psis=(TerminalCost(), TerminalCost()),
                         kernel=Kernel("smoothed-exponential", 1.0, 0.5, 0.05))
        pos = np.repeat(np.array([[0.1], [0.4], [0.9]])[:, None, :], 4, axis=1)
        ens = make_ensemble(pos, game=game, pops=[0, 0, 1])
        _, g = energy_and_gradient(ens)
        assert np.all(g == 0.0)

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_finite_differences(self, seed):
        ens = random_ensemble(seed, n=8, steps=16, dim=2)
        _, g = energy_and_gradient(ens)
        fd = self.fd_gradient(ens)
        err = np.abs(g - fd).max()
        assert err <= 1e-6 * max(np.abs(fd).max(), 1.0)

    def test_matches_finite_differences_on_torus(self):
        dom = Domain("flat-torus", 2, (2.0, 2.0))
        ens = random_ensemble(11, n=6, steps=8, dim=2, domain=dom,
                              psi_kind="none")
        _, g = energy_and_gradient(ens)
        fd = self.fd_gradient(ens)
        assert np.abs(g - fd).max() <= 1e-6 * max(np.abs(fd).max(), 1.0)

    def test_initial_nodes_carry_no_gradient(self):
        ens = random_ensemble(2)
        _, g = energy_and_gradient(ens)
        assert np.all(g[:, 0, :] == 0.0)

    def test_vanishes_at_single_agent_linear_optimum(self):
        g0, delta, steps = 0.8, 1.3, 10
        psi = TerminalCost((LinearTerm((g0,)),))
        game = make_game(steps=steps, deltas=(delta,), psis=(psi,),
                         kernel=Kernel("gaussian", 1.0, 1.0))
        nodes = line_nodes(0.2, 0.2 - g0 / delta, steps)
        ens = make_ensemble(nodes[None], game=game)
        _, g = energy_and_gradient(ens)
        assert np.abs(g).max() <= 1e-12

    @pytest.mark.parametrize("seed", range(3))
    def test_particle_block_is_twice_own_cost_gradient(self, seed):
        ens = random_ensemble(seed)
        _, g = energy_and_gradient(ens)
        for i in range(ens.n_particles):
            _, gi = own_cost_and_gradient(ens, i, ens.positions[i])
            assert np.allclose(g[i], 2.0 * ens.weights[i] * gi,
                               rtol=1e-11, atol=1e-13)


class TestEnsembleStructure:
    def test_population_mass_must_match(self):
        game = make_game(steps=2, masses=(1.0,))
        with pytest.raises(EnsembleError):
            Ensemble(game, np.zeros((2, 3, 1)), np.array([0.4, 0.4]),
                     np.zeros(2, dtype=int))

    def test_refine_doubles_intervals_preserving_nodes(self, rng):
        ens = random_ensemble(4)
        fine = refine_time_grid(ens)
        assert fine.steps == 2 * ens.steps
        assert np.array_equal(fine.positions[:, ::2], ens.positions)
        # interval velocities are unchanged on both halves
        v = ens.velocities()
        vf = fine.velocities()
        assert np.allclose(vf[:, ::2], v, rtol=1e-12, atol=1e-12)
        assert np.allclose(vf[:, 1::2], v, rtol=1e-12, atol=1e-12)

    def test_refine_keeps_kinetic_energy_exact(self):
        nodes = line_nodes(0.0, 1.0, 4)
        game = make_game(steps=4, kernel=Kernel("gaussian", 1.0, 1.0))
        ens = make_ensemble(nodes[None], game=game)
        fine = refine_time_grid(ens)
        assert np.isclose(total_energy(fine), total_energy(ens), rtol=1e-12)
