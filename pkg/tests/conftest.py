import numpy as np
import pytest

from alignmfg.ensemble import Ensemble
from alignmfg.model import (
    Domain,
    Game,
    GameParams,
    Kernel,
    LinearTerm,
    QuadraticWellTerm,
    TerminalCost,
)


def make_game(domain=None, kernel=None, lam=1.0, horizon=1.0, steps=4,
              deltas=(1.0,), masses=(1.0,), psis=None):
    domain = domain or Domain("euclidean", 1)
    kernel = kernel or Kernel("constant", 1.0, 1.0)
    if psis is None:
        psis = tuple(TerminalCost() for _ in deltas)
    params = GameParams(lam=lam, horizon=horizon, steps=steps,
                        deltas=deltas, masses=masses)
    return Game(domain=domain, kernel=kernel, params=params,
                terminal_costs=psis)


def make_ensemble(positions, game=None, pops=None, **game_kw):
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[0]
    if game is None:
        game_kw.setdefault("steps", positions.shape[1] - 1)
        d = positions.shape[2]
        game_kw.setdefault("domain", Domain("euclidean", d))
        game = make_game(**game_kw)
    pops = np.zeros(n, dtype=int) if pops is None else np.asarray(pops)
    weights = np.empty(n)
    for q, mass in enumerate(game.params.masses):
        mask = pops == q
        weights[mask] = mass / mask.sum()
    return Ensemble(game, positions, weights, pops)


def random_ensemble(seed, n=6, steps=5, dim=2, domain=None, lam=0.8,
                    kernel=None, two_pops=True, psi_kind="mixed"):
    """Generic random instance used by the property sweeps."""
    rng = np.random.default_rng(seed)
    domain = domain or Domain("euclidean", dim)
    kernel = kernel or Kernel("smoothed-exponential", 1.3, 0.7, 0.07)
    if two_pops and n >= 2:
        deltas = (0.7, 1.4)
        masses = (0.6, 0.9)
        pops = np.array([0] * (n // 2) + [1] * (n - n // 2))
    else:
        deltas, masses = (1.0,), (1.0,)
        pops = np.zeros(n, dtype=int)
    if psi_kind == "mixed":
        psis = tuple(
            TerminalCost((LinearTerm(tuple(rng.uniform(-1, 1, dim))),
                          QuadraticWellTerm(tuple(rng.uniform(-1, 1, dim)),
                                            float(rng.uniform(0, 2)))))
            for _ in deltas)
    elif psi_kind == "none":
        psis = tuple(TerminalCost() for _ in deltas)
    game = make_game(domain=domain, kernel=kernel, lam=lam, steps=steps,
                     deltas=deltas, masses=masses, psis=psis)
    scale = (0.3 * min(domain.periods) if domain.is_torus else 1.0)
    positions = rng.uniform(-1, 1, size=(n, steps + 1, dim)) * scale
    if domain.is_torus:
        positions = positions + np.asarray(domain.periods) / 2
    return make_ensemble(positions, game=game, pops=pops)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
