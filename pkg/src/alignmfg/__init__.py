"""Numerical laboratory for deterministic mean-field games where agents
penalize the mismatch between their velocity and that of nearby agents.

Equilibria are computed by minimizing a global energy over discrete
trajectory ensembles, verified as Nash equilibria via best responses, and
cross-validated against the coupled value-function/continuity PDE system
on the 1D torus.
"""

from .diagnostics import (
    best_response,
    bounds_audit,
    el_residual,
    el_residual_all,
    exploitability,
    monokineticity_index,
    segregation_index,
    uniqueness_probe,
)
from .ensemble import (
    DiscreteCurve,
    Ensemble,
    agent_cost,
    agent_costs,
    energy_gradient,
    kinetic_energy,
    pair_interaction,
    total_energy,
    velocities,
)
from .eulerian import (
    Grid1D,
    ce_forward,
    convolve_periodic,
    cross_validate,
    hj_backward,
    picard_solve,
)
from .macro import decomposition_check, eulerian_energy, macro_eval, moments
from .model import (
    Domain,
    Game,
    GameParams,
    Kernel,
    LinearTerm,
    QuadraticWellTerm,
    TerminalCost,
    displacement,
    kernel_eval_grad,
    terminal_eval_grad,
)
from .runner import RunArtifacts, run
from .scenario import Scenario, load_scenario, save_scenario, scenario_hash
from .solver import SolveConfig, SolveReport, initialize_ensemble, minimize_energy

__version__ = "0.1.0"
