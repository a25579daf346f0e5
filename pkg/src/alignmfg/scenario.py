"""Scenario configuration: populations, samplers, presets, (de)serialization.

A scenario file is one JSON document; ``load_scenario`` fills defaults and
validates, and the echoed form round-trips field by field.  The scenario hash
(sha256 of the canonical echo) stamps every exported table.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from statistics import NormalDist

import numpy as np

from .model import (
    Domain,
    Game,
    GameParams,
    Kernel,
    LinearTerm,
    ModelError,
    QuadraticWellTerm,
    TerminalCost,
)
from .solver import SolveConfig

__all__ = [
    "Scenario",
    "PopulationSpec",
    "ScenarioError",
    "load_scenario",
    "scenario_from_dict",
    "save_scenario",
    "scenario_hash",
    "standard_scenario",
    "mirror_scenario",
    "small_horizon_scenario",
    "torus_scenario",
    "lane_scenario",
    "random_scenario",
    "PRESETS",
]


class ScenarioError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Specs


@dataclass(frozen=True)
class SamplerSpec:
    kind: str                      # uniform-box | gaussian | explicit
    lo: tuple = ()
    hi: tuple = ()
    mean: tuple = ()
    std: tuple = ()
    points: tuple = ()
    stratified: bool = True


@dataclass(frozen=True)
class PopulationSpec:
    mass: float
    delta: float
    count: int
    terminal_cost: TerminalCost
    sampler: SamplerSpec


@dataclass(frozen=True)
class InitSpec:
    perturbation: float = 0.0
    speed_cap: float = 10.0


@dataclass(frozen=True)
class DiagnosticsSpec:
    br_grad_tol: float = 1e-10
    br_starts: int = 3
    subset: int | None = None
    monokin_radius: float | None = None   # default: kernel length scale
    audit_samples: int = 1000
    uniqueness_starts: int = 10
    uniqueness_spread: float = 0.5
    uniqueness_particle: int = 0


@dataclass(frozen=True)
class EulerianSpec:
    n_x: int = 256
    theta: float = 0.5
    tol: float = 1e-6
    max_iter: int = 500
    bandwidth: float | None = None        # default: 2 grid spacings
    base_substeps: int = 1


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    domain: Domain
    kernel: Kernel
    lam: float
    horizon: float
    steps: int
    populations: tuple[PopulationSpec, ...]
    init: InitSpec = InitSpec()
    solve: SolveConfig = SolveConfig()
    diagnostics: DiagnosticsSpec = DiagnosticsSpec()
    eulerian: EulerianSpec = EulerianSpec()

    # -- model assembly -----------------------------------------------------

    def build_game(self) -> Game:
        params = GameParams(
            lam=self.lam,
            horizon=self.horizon,
            steps=self.steps,
            deltas=tuple(p.delta for p in self.populations),
            masses=tuple(p.mass for p in self.populations),
        )
        return Game(
            domain=self.domain,
            kernel=self.kernel,
            params=params,
            terminal_costs=tuple(p.terminal_cost for p in self.populations),
        )

    @property
    def init_perturbation(self) -> float:
        return self.init.perturbation

    @property
    def init_speed_cap(self) -> float:
        return self.init.speed_cap

    @property
    def monokin_radius(self) -> float:
        r = self.diagnostics.monokin_radius
        return float(r) if r is not None else self.kernel.length_scale

    # -- sampling -----------------------------------------------------------

    def sample_starts(self, seed=None):
        """Initial points, population labels and uniform weights per label."""
        seed = self.seed if seed is None else seed
        starts, pops, weights = [], [], []
        offset = 0
        for q, pop in enumerate(self.populations):
            pts = _sample(pop.sampler, pop.count, self.domain, offset,
                          [seed, q])
            starts.append(pts)
            pops.append(np.full(pop.count, q))
            weights.append(np.full(pop.count, pop.mass / pop.count))
            offset += pop.count
        return (np.concatenate(starts), np.concatenate(pops),
                np.concatenate(weights))

    def initial_density_grid(self, grid) -> np.ndarray:
        """Exact-mass initial density on a 1D grid (single population)."""
        if len(self.populations) != 1:
            raise ScenarioError("gridded initial density needs one population")
        pop = self.populations[0]
        cells = grid.cells()
        s = pop.sampler
        if s.kind == "gaussian":
            mu, sd = s.mean[0], s.std[0]
            dens = np.zeros_like(cells)
            for j in range(-5, 6):
                zz = (cells + j * grid.length - mu) / sd
                dens += np.exp(-0.5 * zz * zz)
        elif s.kind == "uniform-box":
            dens = ((cells >= s.lo[0]) & (cells < s.hi[0])).astype(float)
        else:  # explicit: cloud-in-cell
            from .eulerian import kde_density_1d
            w = np.full(len(s.points), pop.mass / len(s.points))
            dens = kde_density_1d(np.asarray(s.points)[:, 0], w, grid, 0.0)
        total = dens.sum() * grid.h
        if total <= 0:
            raise ScenarioError("initial sampler places no mass on the grid")
        return dens * (pop.mass / total)


# ---------------------------------------------------------------------------
# Samplers


def _halton(index: np.ndarray, base: int) -> np.ndarray:
    out = np.zeros(index.shape, dtype=float)
    f = 1.0
    i = index.copy()
    while np.any(i > 0):
        f /= base
        out += f * (i % base)
        i //= base
    return out


_HALTON_BASES = (2, 3, 5, 7, 11, 13)


def _sample(spec: SamplerSpec, count: int, domain: Domain, offset: int,
            seed) -> np.ndarray:
    d = domain.dim
    if spec.kind == "explicit":
        pts = np.asarray(spec.points, dtype=float).reshape(count, d)
        return domain.wrap(pts) if domain.is_torus else pts

    if spec.stratified:
        if d == 1 and offset == 0:
            u = (np.arange(count) + 0.5)[:, None] / count
        else:
            # low-discrepancy fill; the running offset keeps populations
            # interleaved rather than stacked on identical points
            idx = np.arange(offset + 1, offset + count + 1)
            u = np.stack([_halton(idx, b) for b in _HALTON_BASES[:d]], axis=1)
    else:
        rng = np.random.default_rng(seed)
        u = rng.uniform(size=(count, d))

    if spec.kind == "uniform-box":
        lo = np.asarray(spec.lo, dtype=float)
        hi = np.asarray(spec.hi, dtype=float)
        return lo + u * (hi - lo)
    if spec.kind == "gaussian":
        mu = np.asarray(spec.mean, dtype=float)
        sd = np.asarray(spec.std, dtype=float)
        nd = NormalDist()
        z = np.vectorize(nd.inv_cdf)(np.clip(u, 1e-12, 1.0 - 1e-12))
        pts = mu + sd * z
        return domain.wrap(pts) if domain.is_torus else pts
    raise ScenarioError(f"unknown sampler kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# Dict round-trip


def _get(d, key, default=None, required=False, ctx=""):
    if key in d:
        return d[key]
    if required:
        raise ScenarioError(f"missing field {ctx}{key}")
    return default


def _terminal_from_list(items, ctx):
    terms = []
    for j, item in enumerate(items):
        kind = _get(item, "type", required=True, ctx=f"{ctx}[{j}].")
        if kind == "linear":
            terms.append(LinearTerm(tuple(_get(item, "gradient", required=True,
                                               ctx=f"{ctx}[{j}]."))))
        elif kind == "quadratic-well":
            kappa = _get(item, "kappa", required=True, ctx=f"{ctx}[{j}].")
            kappa = tuple(kappa) if isinstance(kappa, (list, tuple)) else float(kappa)
            terms.append(QuadraticWellTerm(
                tuple(_get(item, "center", required=True, ctx=f"{ctx}[{j}].")),
                kappa))
        else:
            raise ScenarioError(f"{ctx}[{j}]: unknown terminal term {kind!r}")
    return TerminalCost(tuple(terms))


def _terminal_to_list(psi: TerminalCost):
    items = []
    for t in psi.terms:
        if isinstance(t, LinearTerm):
            items.append({"type": "linear", "gradient": list(t.gradient)})
        else:
            kappa = (list(t.kappa) if isinstance(t.kappa, tuple)
                     else float(t.kappa))
            items.append({"type": "quadratic-well", "center": list(t.center),
                          "kappa": kappa})
    return items


def _sampler_from_dict(d, dim, ctx):
    kind = _get(d, "type", required=True, ctx=ctx)
    strat = bool(_get(d, "stratified", True))
    if kind == "uniform-box":
        lo = _get(d, "lo", required=True, ctx=ctx)
        hi = _get(d, "hi", required=True, ctx=ctx)
        if len(lo) != dim or len(hi) != dim:
            raise ScenarioError(f"{ctx}lo/hi must have {dim} entries")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ScenarioError(f"{ctx}needs lo < hi componentwise")
        return SamplerSpec("uniform-box", lo=tuple(lo), hi=tuple(hi),
                           stratified=strat)
    if kind == "gaussian":
        mean = _get(d, "mean", required=True, ctx=ctx)
        std = _get(d, "std", required=True, ctx=ctx)
        if len(mean) != dim or len(std) != dim:
            raise ScenarioError(f"{ctx}mean/std must have {dim} entries")
        if any(s <= 0 for s in std):
            raise ScenarioError(f"{ctx}std must be > 0")
        return SamplerSpec("gaussian", mean=tuple(mean), std=tuple(std),
                           stratified=strat)
    if kind == "explicit":
        pts = _get(d, "points", required=True, ctx=ctx)
        if not pts or any(len(p) != dim for p in pts):
            raise ScenarioError(f"{ctx}points must be nonempty {dim}-vectors")
        return SamplerSpec("explicit", points=tuple(map(tuple, pts)))
    raise ScenarioError(f"{ctx}unknown sampler type {kind!r}")


def _sampler_to_dict(s: SamplerSpec):
    if s.kind == "uniform-box":
        return {"type": s.kind, "lo": list(s.lo), "hi": list(s.hi),
                "stratified": s.stratified}
    if s.kind == "gaussian":
        return {"type": s.kind, "mean": list(s.mean), "std": list(s.std),
                "stratified": s.stratified}
    return {"type": s.kind, "points": [list(p) for p in s.points]}


def scenario_from_dict(data: dict) -> Scenario:
    try:
        dom_d = _get(data, "domain", required=True)
        kind = _get(dom_d, "kind", "euclidean")
        dim = int(_get(dom_d, "dim", required=True, ctx="domain."))
        periods = dom_d.get("periods")
        domain = Domain(kind, dim,
                        tuple(periods) if periods is not None else None)

        ker_d = _get(data, "kernel", required=True)
        family = _get(ker_d, "family", "smoothed-exponential")
        eps = float(_get(ker_d, "length_scale", 1.0))
        smoothing = ker_d.get("smoothing")
        if smoothing is None:
            smoothing = 0.1 * eps if family == "smoothed-exponential" else 0.0
        kernel = Kernel(family, float(_get(ker_d, "amplitude", 1.0)), eps,
                        float(smoothing))

        lam = float(_get(data, "lam", required=True))
        horizon = float(_get(data, "horizon", required=True))
        steps = int(_get(data, "steps", required=True))
        if lam <= 0:
            raise ScenarioError("lam must be > 0 (interaction weight)")
        if horizon <= 0:
            raise ScenarioError("horizon must be > 0")
        if steps < 1:
            raise ScenarioError("steps must be >= 1")

        pops_d = _get(data, "populations", required=True)
        if not pops_d:
            raise ScenarioError("need at least one population")
        pops = []
        for q, pd in enumerate(pops_d):
            ctx = f"populations[{q}]."
            mass = float(_get(pd, "mass", required=True, ctx=ctx))
            delta = float(_get(pd, "delta", required=True, ctx=ctx))
            if mass <= 0:
                raise ScenarioError(f"{ctx}mass must be > 0")
            if delta <= 0:
                raise ScenarioError(f"{ctx}delta must be > 0")
            sampler = _sampler_from_dict(
                _get(pd, "sampler", required=True, ctx=ctx), dim,
                ctx + "sampler.")
            count = _get(pd, "count",
                         len(sampler.points) if sampler.kind == "explicit"
                         else None, ctx=ctx)
            if count is None:
                raise ScenarioError(f"{ctx}count is required")
            count = int(count)
            if count < 1:
                raise ScenarioError(f"{ctx}count must be >= 1")
            if sampler.kind == "explicit" and count != len(sampler.points):
                raise ScenarioError(f"{ctx}count != number of explicit points")
            psi = _terminal_from_list(_get(pd, "terminal_cost", []),
                                      ctx + "terminal_cost")
            pops.append(PopulationSpec(mass, delta, count, psi, sampler))

        init_d = _get(data, "init", {})
        init = InitSpec(
            perturbation=float(_get(init_d, "perturbation", 0.0)),
            speed_cap=float(_get(init_d, "speed_cap", 10.0)),
        )
        if init.perturbation < 0 or init.speed_cap <= 0:
            raise ScenarioError("init.perturbation >= 0 and speed_cap > 0")

        sol_d = _get(data, "solve", {})
        solve = SolveConfig(
            max_iter=int(_get(sol_d, "max_iter", 10_000)),
            grad_tol=float(_get(sol_d, "grad_tol", 1e-8)),
            armijo_c1=float(_get(sol_d, "armijo_c1", 1e-4)),
            backtrack=float(_get(sol_d, "backtrack", 0.5)),
            step0=float(_get(sol_d, "step0", 1.0)),
            memory=int(_get(sol_d, "memory", 10)),
            max_backtracks=int(_get(sol_d, "max_backtracks", 60)),
            multi_start=int(_get(sol_d, "multi_start", 1)),
            perturbation=float(_get(sol_d, "perturbation", 0.0)),
            seed=int(_get(sol_d, "seed", 0)),
        )

        dia_d = _get(data, "diagnostics", {})
        subset = dia_d.get("subset")
        radius = dia_d.get("monokin_radius")
        diagnostics = DiagnosticsSpec(
            br_grad_tol=float(_get(dia_d, "br_grad_tol", 1e-10)),
            br_starts=int(_get(dia_d, "br_starts", 3)),
            subset=int(subset) if subset is not None else None,
            monokin_radius=float(radius) if radius is not None else None,
            audit_samples=int(_get(dia_d, "audit_samples", 1000)),
            uniqueness_starts=int(_get(dia_d, "uniqueness_starts", 10)),
            uniqueness_spread=float(_get(dia_d, "uniqueness_spread", 0.5)),
            uniqueness_particle=int(_get(dia_d, "uniqueness_particle", 0)),
        )

        eul_d = _get(data, "eulerian", {})
        bandwidth = eul_d.get("bandwidth")
        eulerian = EulerianSpec(
            n_x=int(_get(eul_d, "n_x", 256)),
            theta=float(_get(eul_d, "theta", 0.5)),
            tol=float(_get(eul_d, "tol", 1e-6)),
            max_iter=int(_get(eul_d, "max_iter", 500)),
            bandwidth=float(bandwidth) if bandwidth is not None else None,
            base_substeps=int(_get(eul_d, "base_substeps", 1)),
        )

        scen = Scenario(
            name=str(_get(data, "name", "scenario")),
            seed=int(_get(data, "seed", 0)),
            domain=domain,
            kernel=kernel,
            lam=lam,
            horizon=horizon,
            steps=steps,
            populations=tuple(pops),
            init=init,
            solve=solve,
            diagnostics=diagnostics,
            eulerian=eulerian,
        )
        _validate(scen)
        return scen
    except ModelError as exc:
        raise ScenarioError(str(exc)) from exc


def _validate(scen: Scenario):
    scen.build_game()  # raises on inconsistent model data (torus/psi, ...)
    if scen.domain.is_torus:
        p = np.asarray(scen.domain.periods)
        for q, pop in enumerate(scen.populations):
            s = pop.sampler
            if s.kind == "uniform-box":
                lo, hi = np.asarray(s.lo), np.asarray(s.hi)
                if np.any(lo < 0) or np.any(hi > p):
                    raise ScenarioError(
                        f"populations[{q}].sampler: box leaves the torus cell")


def scenario_to_dict(scen: Scenario) -> dict:
    dom = {"kind": scen.domain.kind, "dim": scen.domain.dim}
    if scen.domain.periods is not None:
        dom["periods"] = list(scen.domain.periods)
    out = {
        "name": scen.name,
        "seed": scen.seed,
        "domain": dom,
        "kernel": {
            "family": scen.kernel.family,
            "amplitude": scen.kernel.amplitude,
            "length_scale": scen.kernel.length_scale,
            "smoothing": scen.kernel.smoothing,
        },
        "lam": scen.lam,
        "horizon": scen.horizon,
        "steps": scen.steps,
        "populations": [
            {
                "mass": p.mass,
                "delta": p.delta,
                "count": p.count,
                "terminal_cost": _terminal_to_list(p.terminal_cost),
                "sampler": _sampler_to_dict(p.sampler),
            }
            for p in scen.populations
        ],
        "init": {"perturbation": scen.init.perturbation,
                 "speed_cap": scen.init.speed_cap},
        "solve": {
            "max_iter": scen.solve.max_iter,
            "grad_tol": scen.solve.grad_tol,
            "armijo_c1": scen.solve.armijo_c1,
            "backtrack": scen.solve.backtrack,
            "step0": scen.solve.step0,
            "memory": scen.solve.memory,
            "max_backtracks": scen.solve.max_backtracks,
            "multi_start": scen.solve.multi_start,
            "perturbation": scen.solve.perturbation,
            "seed": scen.solve.seed,
        },
        "diagnostics": {
            "br_grad_tol": scen.diagnostics.br_grad_tol,
            "br_starts": scen.diagnostics.br_starts,
            "subset": scen.diagnostics.subset,
            "monokin_radius": scen.diagnostics.monokin_radius,
            "audit_samples": scen.diagnostics.audit_samples,
            "uniqueness_starts": scen.diagnostics.uniqueness_starts,
            "uniqueness_spread": scen.diagnostics.uniqueness_spread,
            "uniqueness_particle": scen.diagnostics.uniqueness_particle,
        },
        "eulerian": {
            "n_x": scen.eulerian.n_x,
            "theta": scen.eulerian.theta,
            "tol": scen.eulerian.tol,
            "max_iter": scen.eulerian.max_iter,
            "bandwidth": scen.eulerian.bandwidth,
            "base_substeps": scen.eulerian.base_substeps,
        },
    }
    return out


def canonical_json(scen: Scenario) -> str:
    return json.dumps(scenario_to_dict(scen), sort_keys=True,
                      separators=(",", ":"))


def scenario_hash(scen: Scenario) -> str:
    return hashlib.sha256(canonical_json(scen).encode()).hexdigest()[:16]


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: not valid JSON ({exc})") from exc
    return scenario_from_dict(data)


def save_scenario(scen: Scenario, path):
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(scen), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Presets


def standard_scenario(n_per_pop=16, steps=32, horizon=1.0, eps=0.3,
                      lam=1.0, delta=1.0, perturbation=0.05, seed=7,
                      grad_tol=1e-8) -> Scenario:
    """Two populations on the line crossing head-on (the workhorse case)."""
    right = np.linspace(0.6, 1.4, n_per_pop)
    pops = []
    for sgn in (1.0, -1.0):
        pts = tuple((float(sgn * x),) for x in right)
        pops.append(PopulationSpec(
            mass=0.5,
            delta=delta,
            count=n_per_pop,
            terminal_cost=TerminalCost((LinearTerm((sgn,)),)),
            sampler=SamplerSpec("explicit", points=pts),
        ))
    return Scenario(
        name="standard-2pop-1d",
        seed=seed,
        domain=Domain("euclidean", 1),
        kernel=Kernel("smoothed-exponential", 1.0, eps, 0.1 * eps),
        lam=lam,
        horizon=horizon,
        steps=steps,
        populations=tuple(pops),
        init=InitSpec(perturbation=perturbation),
        solve=SolveConfig(grad_tol=grad_tol, seed=seed),
    )


def mirror_scenario(**kw) -> Scenario:
    """Standard head-on scenario with exactly mirror-symmetric data."""
    kw.setdefault("perturbation", 0.0)
    return replace(standard_scenario(**kw), name="mirror-2pop-1d")


def small_horizon_scenario(**kw) -> Scenario:
    kw.setdefault("horizon", 0.1)
    kw.setdefault("steps", 16)
    return replace(standard_scenario(**kw), name="small-horizon-2pop-1d")


def torus_scenario(n_particles=2000, n_x=256, steps=16, horizon=1.0,
                   eps=0.15, lam=1.0, delta=1.0, kappa=1.0, seed=11,
                   grad_tol=1e-5) -> Scenario:
    """Single population on the unit circle pulled into a quadratic well."""
    pop = PopulationSpec(
        mass=1.0,
        delta=delta,
        count=n_particles,
        terminal_cost=TerminalCost((QuadraticWellTerm((0.5,), kappa),)),
        sampler=SamplerSpec("gaussian", mean=(0.5,), std=(0.12,)),
    )
    return Scenario(
        name="torus-1d",
        seed=seed,
        domain=Domain("flat-torus", 1, (1.0,)),
        kernel=Kernel("smoothed-exponential", 1.0, eps, 0.1 * eps),
        lam=lam,
        horizon=horizon,
        steps=steps,
        populations=(pop,),
        solve=SolveConfig(grad_tol=grad_tol, seed=seed),
        eulerian=EulerianSpec(n_x=n_x),
    )


def lane_scenario(n_per_pop=50, steps=24, horizon=1.0, eps=0.1, lam=1.0,
                  delta=1.0, kappa_y=0.0, half_length=3.0, seed=21,
                  grad_tol=1e-6) -> Scenario:
    """Two populations mixed in a planar strip walking in opposite
    directions; confinement in the cross direction is optional."""
    pops = []
    for sgn in (1.0, -1.0):
        terms = [LinearTerm((sgn, 0.0))]
        if kappa_y > 0:
            terms.append(QuadraticWellTerm((0.0, 0.0), (0.0, kappa_y)))
        pops.append(PopulationSpec(
            mass=0.5,
            delta=delta,
            count=n_per_pop,
            terminal_cost=TerminalCost(tuple(terms)),
            sampler=SamplerSpec("uniform-box",
                                lo=(-half_length, 0.0),
                                hi=(half_length, 1.0)),
        ))
    return Scenario(
        name="lane-2pop-2d",
        seed=seed,
        domain=Domain("euclidean", 2),
        kernel=Kernel("smoothed-exponential", 1.0, eps, 0.1 * eps),
        lam=lam,
        horizon=horizon,
        steps=steps,
        populations=tuple(pops),
        solve=SolveConfig(grad_tol=grad_tol, seed=seed),
    )


def random_scenario(seed: int, n_particles=8, steps=16, dim=2) -> Scenario:
    """Small randomized instance (mixed kernels and terminal costs), used by
    the gradient audit."""
    rng = np.random.default_rng(seed)
    family = ["smoothed-exponential", "gaussian", "constant"][seed % 3]
    kernel = Kernel(family, float(rng.uniform(0.5, 2.0)),
                    float(rng.uniform(0.3, 1.5)),
                    float(rng.uniform(0.05, 0.2)) if family ==
                    "smoothed-exponential" else 0.0)
    n2 = n_particles // 2
    pops = []
    for q, count in enumerate((n2, n_particles - n2)):
        terms = (LinearTerm(tuple(rng.uniform(-1, 1, size=dim))),
                 QuadraticWellTerm(tuple(rng.uniform(-1, 1, size=dim)),
                                   float(rng.uniform(0.0, 2.0))))
        pops.append(PopulationSpec(
            mass=float(rng.uniform(0.5, 1.5)),
            delta=float(rng.uniform(0.5, 2.0)),
            count=count,
            terminal_cost=TerminalCost(terms),
            sampler=SamplerSpec("gaussian", mean=tuple(rng.uniform(-1, 1, dim)),
                                std=tuple(rng.uniform(0.3, 1.0, dim)),
                                stratified=False),
        ))
    return Scenario(
        name=f"random-{seed}",
        seed=seed,
        domain=Domain("euclidean", dim),
        kernel=kernel,
        lam=float(rng.uniform(0.3, 2.0)),
        horizon=1.0,
        steps=steps,
        populations=tuple(pops),
        init=InitSpec(perturbation=0.3),
    )


PRESETS = {
    "standard": standard_scenario,
    "mirror": mirror_scenario,
    "small-horizon": small_horizon_scenario,
    "torus": torus_scenario,
    "lane": lane_scenario,
}
