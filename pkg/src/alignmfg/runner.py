"""Experiment pipelines and artifact export.

Every exported table is flat delimited text with one comment line carrying
the scenario hash, then a header row.  Floats are written with ``repr`` so
re-running a pipeline with the same scenario and seed reproduces the files
byte for byte (wall-clock timings never enter the artifacts).
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from . import eulerian as eul
from .ensemble import Ensemble, agent_costs, total_energy
from .scenario import (
    Scenario,
    ScenarioError,
    lane_scenario,
    random_scenario,
    scenario_hash,
    scenario_to_dict,
)
from .solver import initialize_ensemble, minimize_energy

__all__ = ["RunArtifacts", "run", "COMMANDS", "default_threads",
           "write_trajectories", "read_trajectories", "gradient_check"]

COMMANDS = ("solve", "verify", "fields", "eulerian", "gradcheck", "lane-demo")

THREADS_ENV = "ALIGNMFG_THREADS"


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass
class RunArtifacts:
    command: str
    scenario: Scenario
    scenario_hash: str
    report: dict
    out_dir: Path | None = None
    ensemble: Ensemble | None = None
    files: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Table IO


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_table(path: Path, header: list[str], rows, tag: str):
    with open(path, "w") as fh:
        fh.write(f"# scenario={tag}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _read_tag(path: Path) -> str:
    with open(path) as fh:
        first = fh.readline().strip()
    if not first.startswith("# scenario="):
        raise ScenarioError(f"{path}: missing scenario hash line")
    return first.split("=", 1)[1]


def write_trajectories(path: Path, ens: Ensemble, tag: str):
    d = ens.dim
    header = ["time", "particle", "population"] + [f"x{a}" for a in range(d)]
    dt = ens.dt

    def rows():
        for k in range(ens.steps + 1):
            for i in range(ens.n_particles):
                yield ((k * dt, i, int(ens.pops[i]))
                       + tuple(ens.positions[i, k]))

    _write_table(path, header, rows(), tag)


def read_trajectories(path: Path, scen: Scenario) -> Ensemble:
    """Rebuild the ensemble exported by ``write_trajectories``.

    Refuses to pair the table with a scenario whose hash differs from the
    stamped one.
    """
    tag = _read_tag(path)
    want = scenario_hash(scen)
    if tag != want:
        raise ScenarioError(
            f"{path}: trajectories were produced by scenario {tag}, "
            f"this scenario hashes to {want}")
    raw = np.genfromtxt(path, delimiter=",", skip_header=2)
    game = scen.build_game()
    n = sum(p.count for p in scen.populations)
    m1 = scen.steps + 1
    d = scen.domain.dim
    if raw.shape != (n * m1, 3 + d):
        raise ScenarioError(f"{path}: unexpected table shape {raw.shape}")
    pops = raw[:n, 2].astype(int)
    positions = raw[:, 3:].reshape(m1, n, d).transpose(1, 0, 2)
    weights = np.concatenate([
        np.full(p.count, p.mass / p.count) for p in scen.populations])
    return Ensemble(game, positions, weights, pops)


def _write_report(path: Path, report: dict):
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_scenario_echo(path: Path, scen: Scenario):
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(scen), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Pipeline pieces


def _solve_pipeline(scen: Scenario, out: Path | None, art: RunArtifacts):
    ens0 = initialize_ensemble(scen)
    ens, rep = minimize_energy(ens0, scen.solve)
    art.ensemble = ens
    art.report.update({
        "energy": float(rep.energy_history[-1]),
        "initial_energy": float(rep.energy_history[0]),
        "grad_norm": rep.grad_norm,
        "iterations": rep.iterations,
        "termination": rep.termination,
        "n_evals": rep.n_evals,
    })
    if out is not None:
        tp = out / "trajectories.csv"
        write_trajectories(tp, ens, art.scenario_hash)
        art.files["trajectories"] = tp
        ep = out / "energy.csv"
        _write_table(ep, ["iteration", "energy"],
                     ((i, e) for i, e in enumerate(rep.energy_history)),
                     art.scenario_hash)
        art.files["energy"] = ep
    return ens, rep


def _ensemble_for(scen: Scenario, out: Path | None, art: RunArtifacts):
    """Reuse a previously solved trajectory table when present, else solve."""
    if out is not None:
        tp = out / "trajectories.csv"
        if tp.exists():
            ens = read_trajectories(tp, scen)
            art.ensemble = ens
            art.files["trajectories"] = tp
            return ens
    ens, _ = _solve_pipeline(scen, out, art)
    return ens


def _diagnostics_pipeline(scen: Scenario, ens: Ensemble, threads: int):
    dg = scen.diagnostics
    br_cfg = replace(scen.solve, grad_tol=dg.br_grad_tol, multi_start=1)
    expl = diag.exploitability(ens, br_cfg, n_starts=dg.br_starts,
                               subset=dg.subset, seed=scen.seed,
                               threads=threads)
    el = diag.el_residual_all(ens)
    audit = diag.bounds_audit(ens, samples=dg.audit_samples, seed=scen.seed)
    report = diag.DiagnosticsReport(
        exploitability=expl,
        el=el,
        audit=audit,
        energy=total_energy(ens),
    )
    if len(scen.populations) >= 1:
        report.monokineticity = diag.monokineticity_index(
            ens, scen.monokin_radius)
        report.monokineticity_radius = scen.monokin_radius
    return report


def _fields_pipeline(scen: Scenario, ens: Ensemble, out: Path | None,
                     art: RunArtifacts):
    from .macro import macro_fields_batch

    d = ens.dim
    if d == 1:
        if scen.domain.is_torus:
            length = scen.domain.periods[0]
            pts = (np.arange(scen.eulerian.n_x) * length
                   / scen.eulerian.n_x)[:, None]
        else:
            lo = ens.positions.min() - scen.kernel.length_scale
            hi = ens.positions.max() + scen.kernel.length_scale
            pts = np.linspace(lo, hi, scen.eulerian.n_x)[:, None]
    elif d == 2:
        lo = ens.positions.min(axis=(0, 1)) - scen.kernel.length_scale
        hi = ens.positions.max(axis=(0, 1)) + scen.kernel.length_scale
        gx = np.linspace(lo[0], hi[0], 32)
        gy = np.linspace(lo[1], hi[1], 32)
        pts = np.stack(np.meshgrid(gx, gy, indexing="ij"),
                       axis=-1).reshape(-1, 2)
    else:
        raise ScenarioError("field export supports d <= 2")

    cell = float(np.ptp(pts[:, 0]) / max(len(np.unique(pts[:, 0])) - 1, 1))
    bw = scen.eulerian.bandwidth or 2.0 * cell
    header = (["time", "cell"] + [f"x{a}" for a in range(d)] + ["a"]
              + [f"u{a}" for a in range(d)] + ["sigma", "rho"])

    def rows():
        for k in range(ens.steps):
            fb = macro_fields_batch(ens, k, pts)
            rho = _kde_generic(ens, k, pts, bw)
            for c in range(pts.shape[0]):
                yield ((k * ens.dt, c) + tuple(pts[c]) + (fb.a[c],)
                       + tuple(fb.u[c]) + (fb.sigma[c], rho[c]))

    if out is not None:
        fp = out / "fields.csv"
        _write_table(fp, header, rows(), art.scenario_hash)
        art.files["fields"] = fp
    art.report["field_grid_points"] = int(pts.shape[0])
    art.report["kde_bandwidth"] = float(bw)


def _kde_generic(ens: Ensemble, k: int, pts: np.ndarray,
                 bandwidth: float) -> np.ndarray:
    disp = ens.game.domain.displacement(pts[:, None, :],
                                        ens.positions[None, :, k, :])
    r2 = np.sum(disp * disp, axis=-1)
    norm = (np.sqrt(2.0 * np.pi) * bandwidth) ** ens.dim
    return (np.exp(-0.5 * r2 / bandwidth**2) @ ens.weights) / norm


def gradient_check(ens: Ensemble, step: float = 1e-5) -> dict:
    """Central finite differences of the total energy against the analytic
    gradient over every free node coordinate."""
    from .ensemble import energy_and_gradient

    _, g = energy_and_gradient(ens)
    pos = ens.positions.copy()
    fd = np.zeros_like(g)
    for i in range(ens.n_particles):
        for k in range(1, ens.steps + 1):
            for a in range(ens.dim):
                keep = pos[i, k, a]
                pos[i, k, a] = keep + step
                fp = total_energy(ens, pos)
                pos[i, k, a] = keep - step
                fm = total_energy(ens, pos)
                pos[i, k, a] = keep
                fd[i, k, a] = (fp - fm) / (2.0 * step)
    err = np.abs(g - fd)
    scale = max(float(np.max(np.abs(fd))), 1e-300)
    return {
        "max_abs_error": float(err.max()),
        "max_rel_error": float(err.max() / scale),
        "grad_scale": scale,
    }


# ---------------------------------------------------------------------------
# Command driver


def run(scen: Scenario | None, command: str, out_dir=None,
        threads: int | None = None) -> RunArtifacts:
    """Execute one pipeline and write its artifacts under ``out_dir``."""
    if command not in COMMANDS:
        raise ScenarioError(f"unknown command {command!r}")
    threads = threads or default_threads()
    out = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)

    if command == "gradcheck":
        report = {"scenarios": [], "max_rel_error": 0.0, "fd_step": 1e-5}
        for s in range(5):
            sc = random_scenario(seed=100 + s)
            ens = initialize_ensemble(sc)
            res = gradient_check(ens)
            res["name"] = sc.name
            report["scenarios"].append(res)
            report["max_rel_error"] = max(report["max_rel_error"],
                                          res["max_rel_error"])
        art = RunArtifacts("gradcheck", random_scenario(seed=100), "-", report,
                           out)
        if out is not None:
            rp = out / "gradcheck.json"
            _write_report(rp, report)
            art.files["report"] = rp
        return art

    if command == "lane-demo" and scen is None:
        scen = lane_scenario()
    if scen is None:
        raise ScenarioError(f"command {command!r} needs a scenario")

    tag = scenario_hash(scen)
    art = RunArtifacts(command, scen, tag, {"scenario": scen.name,
                                            "scenario_hash": tag}, out)
    if out is not None:
        sp = out / "scenario.json"
        _write_scenario_echo(sp, scen)
        art.files["scenario"] = sp

    if command == "solve":
        _solve_pipeline(scen, out, art)

    elif command == "verify":
        ens = _ensemble_for(scen, out, art)
        report = _diagnostics_pipeline(scen, ens, threads)
        art.report["diagnostics"] = report.to_dict()

    elif command == "fields":
        ens = _ensemble_for(scen, out, art)
        _fields_pipeline(scen, ens, out, art)

    elif command == "eulerian":
        ens = _ensemble_for(scen, out, art)
        state, residuals, converged = eul.picard_solve(
            scen, theta=scen.eulerian.theta, tol=scen.eulerian.tol,
            max_iter=scen.eulerian.max_iter)
        bw = scen.eulerian.bandwidth or 2.0 * state.grid.h
        l1 = eul.cross_validate(ens, state, bw)
        mass = state.mass_series()
        art.report.update({
            "picard_converged": bool(converged),
            "picard_iterations": int(len(residuals)),
            "picard_residual": float(residuals[-1]) if len(residuals) else None,
            "residual_history": [float(r) for r in residuals],
            "mass_drift": float(np.max(np.abs(mass - mass[0]))),
            "l1_distance": [float(v) for v in l1],
            "l1_final": float(l1[-1]),
            "kde_bandwidth": float(bw),
        })
        if out is not None:
            fp = out / "eulerian_fields.csv"
            grid = state.grid
            header = ["time", "cell", "x0", "rho", "v", "phi", "a"]

            def rows():
                cells = grid.cells()
                for k in range(grid.n_t):
                    for c in range(grid.n_x):
                        yield (k * grid.dt, c, cells[c], state.rho[k, c],
                               state.v[k, c], state.phi[k, c], state.a[k, c])

            _write_table(fp, header, rows(), tag)
            art.files["eulerian_fields"] = fp

    elif command == "lane-demo":
        if len(scen.populations) < 2:
            raise ScenarioError("lane-demo needs at least two populations")
        ens, _ = _solve_pipeline(scen, out, art)
        radius = scen.monokin_radius
        series = [diag.segregation_index(ens, k, radius)
                  for k in range(ens.steps + 1)]
        art.report.update({
            "segregation_radius": float(radius),
            "segregation_initial": series[0],
            "segregation_final": series[-1],
            "segregation_series": series,
        })
        if out is not None:
            sp = out / "segregation.csv"
            _write_table(sp, ["time", "index"],
                         ((k * ens.dt, s) for k, s in enumerate(series)), tag)
            art.files["segregation"] = sp

    if out is not None:
        rp = out / "report.json"
        _write_report(rp, art.report)
        art.files["report"] = rp
    return art
