import numpy as np
import pytest

from alignmfg.ensemble import total_energy
from alignmfg.model import Kernel, LinearTerm, TerminalCost
from alignmfg.scenario import (
    SamplerSpec,
    PopulationSpec,
    Scenario,
    mirror_scenario,
    standard_scenario,
)
from alignmfg.model import Domain
from alignmfg.solver import SolveConfig, initialize_ensemble, minimize_energy

from conftest import make_ensemble, make_game


def single_agent_scenario(g=1.0, delta=1.0, x0=0.25, steps=8, horizon=1.0,
                          perturbation=0.0, psi_terms=None, seed=5):
    from alignmfg.scenario import InitSpec

    terms = psi_terms if psi_terms is not None else (LinearTerm((g,)),)
    pop = PopulationSpec(
        mass=1.0, delta=delta, count=1,
        terminal_cost=TerminalCost(terms),
        sampler=SamplerSpec("explicit", points=((x0,),)),
    )
    return Scenario(
        name="one", seed=seed, domain=Domain("euclidean", 1),
        kernel=Kernel("smoothed-exponential", 1.0, 0.5, 0.05),
        lam=1.0, horizon=horizon, steps=steps, populations=(pop,),
        init=InitSpec(perturbation=perturbation),
    )


class TestInitialize:
    def test_no_terminal_cost_gives_still_ensemble(self):
        scen = single_agent_scenario(psi_terms=())
        ens = initialize_ensemble(scen)
        assert np.all(ens.positions == 0.25)

    def test_linear_psi_gives_constant_velocity_line(self):
        scen = single_agent_scenario(g=0.8, delta=2.0)
        ens = initialize_ensemble(scen)
        v = ens.velocities()
        assert np.allclose(v, -0.8 / 2.0, rtol=1e-12)

    def test_same_seed_is_bit_identical(self):
        scen = single_agent_scenario(perturbation=0.3)
        a = initialize_ensemble(scen)
        b = initialize_ensemble(scen)
        assert np.array_equal(a.positions, b.positions)

    def test_speed_cap_clips_the_guess(self):
        scen = single_agent_scenario(g=100.0)
        scen = Scenario(**{**scen.__dict__})
        ens = initialize_ensemble(scen)
        speeds = np.linalg.norm(ens.velocities(), axis=-1)
        assert speeds.max() <= scen.init.speed_cap * (1 + 1e-12)


class TestMinimize:
    def test_still_global_optimum_returns_immediately(self):
        game = make_game(steps=4, psis=(TerminalCost(),),
                         kernel=Kernel("smoothed-exponential", 1.0, 0.5, 0.05))
        pos = np.repeat(np.array([[0.0], [0.5], [1.0]])[:, None, :], 5, axis=1)
        ens = make_ensemble(pos, game=game)
        out, rep = minimize_energy(ens, SolveConfig())
        assert rep.iterations == 0
        assert rep.termination == "converged"
        assert np.array_equal(out.positions, pos)

    def test_single_agent_linear_psi_analytic_optimum(self):
        g, delta, x0, steps = 1.0, 1.0, 0.25, 8
        scen = single_agent_scenario(g=g, delta=delta, x0=x0, steps=steps,
                                     perturbation=0.4)
        ens = initialize_ensemble(scen)
        out, rep = minimize_energy(ens, SolveConfig(grad_tol=1e-13))
        t = np.arange(steps + 1) / steps
        expect = x0 - t * g / delta
        assert np.abs(out.positions[0, :, 0] - expect).max() <= 1e-8
        assert rep.termination == "converged"

    def test_history_strictly_decreases(self):
        scen = standard_scenario(n_per_pop=4, steps=8, perturbation=0.1,
                                 grad_tol=1e-6)
        ens = initialize_ensemble(scen)
        out, rep = minimize_energy(ens, scen.solve)
        h = rep.energy_history
        assert np.all(np.diff(h) < 0.0)

    def test_initial_nodes_bit_identical_after_solve(self):
        scen = standard_scenario(n_per_pop=4, steps=8, perturbation=0.1,
                                 grad_tol=1e-6)
        ens = initialize_ensemble(scen)
        starts = ens.positions[:, 0, :].copy()
        out, _ = minimize_energy(ens, scen.solve)
        assert np.array_equal(out.positions[:, 0, :], starts)

    def test_beats_the_still_ensemble_energy(self):
        # descent started from the still configuration can only improve on
        # the benchmark value 2 sum w Psi(x)
        scen = standard_scenario(n_per_pop=4, steps=8, grad_tol=1e-6)
        ens = initialize_ensemble(scen)
        still = ens.copy()
        still.positions[:] = still.positions[:, :1, :]
        psi, _ = still.terminal_values_grads()
        bench = 2.0 * float(np.sum(still.weights * psi))
        assert np.isclose(total_energy(still), bench, rtol=1e-12)
        out, _ = minimize_energy(still, scen.solve)
        assert total_energy(out) <= bench

    def test_mirror_symmetric_solution(self):
        scen = mirror_scenario(n_per_pop=6, steps=12, grad_tol=1e-9)
        ens = initialize_ensemble(scen)
        out, _ = minimize_energy(ens, scen.solve)
        n = out.n_particles // 2
        # population swap + sign flip maps the solution to itself
        mirrored = -out.positions[list(range(n, 2 * n)) + list(range(n))]
        assert np.abs(out.positions - mirrored).max() <= 1e-6

    def test_multi_start_returns_lowest_energy(self):
        scen = standard_scenario(n_per_pop=3, steps=6, perturbation=0.2,
                                 grad_tol=1e-6)
        ens = initialize_ensemble(scen)
        cfg_one = SolveConfig(grad_tol=1e-6, multi_start=1)
        cfg_many = SolveConfig(grad_tol=1e-6, multi_start=3, perturbation=0.3,
                               seed=2)
        _, rep1 = minimize_energy(ens, cfg_one)
        _, rep3 = minimize_energy(ens, cfg_many)
        assert rep3.energy_history[-1] <= rep1.energy_history[-1] + 1e-12

    def test_refinement_stability_on_converged_solution(self):
        from alignmfg.ensemble import refine_time_grid

        scen = standard_scenario(n_per_pop=4, steps=8, grad_tol=1e-9)
        ens = initialize_ensemble(scen)
        out, _ = minimize_energy(ens, scen.solve)
        j_coarse = total_energy(out)
        fine, _ = minimize_energy(refine_time_grid(out),
                                  SolveConfig(grad_tol=1e-9))
        j_fine = total_energy(fine)
        assert abs(j_fine - j_coarse) <= 0.05 * abs(j_coarse)
