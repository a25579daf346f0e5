"""Equilibrium verification: best responses and exploitability gaps,
Euler-Lagrange residuals, algebraic bound audits, monokineticity and
segregation metrics, and the small-horizon uniqueness probe.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ensemble import (
    DiscreteCurve,
    Ensemble,
    agent_costs,
    own_cost,
    own_cost_and_gradient,
)
from .macro import macro_fields_batch, moments
from .solver import SolveConfig, minimize_free_nodes

__all__ = [
    "best_response",
    "exploitability",
    "ExploitabilityReport",
    "el_residual",
    "el_residual_all",
    "ELReport",
    "bounds_audit",
    "AuditRow",
    "AuditError",
    "monokineticity_index",
    "uniqueness_probe",
    "segregation_index",
    "DiagnosticsReport",
]


# ---------------------------------------------------------------------------
# Best response and exploitability


def _solve_own(ens, i, nodes0, cfg):
    nodes0 = np.asarray(nodes0, dtype=float)
    frozen = (ens.positions, ens.velocities())
    shape = nodes0.shape
    fixed = nodes0[0]

    def unpack(x):
        return np.concatenate([fixed[None], x.reshape(shape[0] - 1, shape[1])])

    def value(x):
        return own_cost(ens, i, unpack(x), frozen)

    def value_grad(x):
        f, g = own_cost_and_gradient(ens, i, unpack(x), frozen)
        return f, g[1:].ravel()

    x, f, report = minimize_free_nodes(value, value_grad, nodes0[1:].ravel(), cfg)
    return unpack(x), f, report


def _response_starts(ens, i, n_starts, spread, seed):
    """Incumbent, single-agent straight line, then noisy copies."""
    incumbent = ens.positions[i].copy()
    starts = [incumbent]
    if n_starts >= 2:
        q = int(ens.pops[i])
        x0 = incumbent[0]
        _, g = ens.game.terminal_costs[q].eval_grad(x0, ens.game.domain)
        v = -g / ens.game.params.deltas[q]
        speed = np.linalg.norm(v)
        if ens.game.domain.is_torus:
            cap = 0.45 * ens.game.domain.min_period() / ens.dt
            if speed > cap:
                v = v * (cap / speed)
        t = np.arange(ens.steps + 1)[:, None] * ens.dt
        starts.append(x0[None, :] + t * v[None, :])
    if n_starts > 2:
        if spread is None:
            spread = 0.1 * (1.0 + float(np.ptp(incumbent)))
        rng = np.random.default_rng([seed, i])
        for _ in range(n_starts - 2):
            noisy = incumbent.copy()
            noisy[1:] += spread * rng.standard_normal(noisy[1:].shape)
            starts.append(noisy)
    return starts


def _best_response(ens, i, cfg, n_starts=3, spread=None, seed=0):
    best = None
    stalled = False
    for nodes0 in _response_starts(ens, i, n_starts, spread, seed):
        nodes, f, report = _solve_own(ens, i, nodes0, cfg)
        stalled = stalled or report.termination == "stalled"
        if best is None or f < best[1]:
            best = (nodes, f)
    return best[0], best[1], stalled


def best_response(i: int, ens: Ensemble, cfg: SolveConfig | None = None,
                  n_starts: int = 3, spread=None, seed: int = 0):
    """Best reply of particle i against the frozen ensemble.

    Multi-start local minimization of the individual cost; the incumbent
    curve is always one start, so the returned cost never exceeds the
    incumbent's.  Returns (curve, cost).
    """
    cfg = cfg or SolveConfig(grad_tol=1e-10)
    nodes, cost, _ = _best_response(ens, i, cfg, n_starts, spread, seed)
    return DiscreteCurve(nodes, ens.dt, ens.game.domain), cost


@dataclass
class ExploitabilityReport:
    indices: np.ndarray        # particles actually probed
    incumbent_costs: np.ndarray
    gaps: np.ndarray           # eps_i = F_i - best reply cost
    relative_gaps: np.ndarray  # eps_i / (1 + |F_i|)
    max_gap: float
    mean_gap: float
    weighted_mean_gap: float   # mass-weighted over the probed set
    max_relative_gap: float
    stalled: int = 0           # best-response solves that hit a stall

    def to_dict(self):
        return {
            "indices": self.indices.tolist(),
            "gaps": self.gaps.tolist(),
            "relative_gaps": self.relative_gaps.tolist(),
            "max_gap": self.max_gap,
            "mean_gap": self.mean_gap,
            "weighted_mean_gap": self.weighted_mean_gap,
            "max_relative_gap": self.max_relative_gap,
            "stalled": self.stalled,
        }


def exploitability(ens: Ensemble, cfg: SolveConfig | None = None,
                   n_starts: int = 3, subset: int | None = None,
                   seed: int = 0, threads: int = 1) -> ExploitabilityReport:
    """Per-particle Nash gaps against the frozen ensemble.

    ``subset`` probes a seeded random sample of particles instead of all of
    them; probed indices are recorded in the report.  Results assemble by
    particle index, so the thread count never changes the output.
    """
    cfg = cfg or SolveConfig(grad_tol=1e-10)
    n = ens.n_particles
    if subset is not None and subset < n:
        rng = np.random.default_rng([seed, 53561])
        indices = np.sort(rng.choice(n, size=subset, replace=False))
    else:
        indices = np.arange(n)
    costs = agent_costs(ens)

    def probe(i):
        return _best_response(ens, int(i), cfg, n_starts, None, seed)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(probe, indices))
    else:
        results = [probe(i) for i in indices]

    best_costs = np.array([r[1] for r in results])
    stalls = sum(1 for r in results if r[2])
    inc = costs[indices]
    gaps = inc - best_costs
    rel = gaps / (1.0 + np.abs(inc))
    w = ens.weights[indices]
    return ExploitabilityReport(
        indices=indices,
        incumbent_costs=inc,
        gaps=gaps,
        relative_gaps=rel,
        max_gap=float(gaps.max()),
        mean_gap=float(gaps.mean()),
        weighted_mean_gap=float(np.sum(w * gaps) / np.sum(w)),
        max_relative_gap=float(rel.max()),
        stalled=stalls,
    )


# ---------------------------------------------------------------------------
# Euler-Lagrange residuals


@dataclass
class ELReport:
    z: np.ndarray                    # (N, M, d) adjoint series at midpoints
    residuals: np.ndarray            # (N, M-1, d) interior residuals
    transversality: np.ndarray       # (N, d)
    sup_residual: float
    sup_transversality: float
    z_sup: float                     # max |z_k| over particles and intervals

    def to_dict(self):
        return {
            "sup_residual": self.sup_residual,
            "sup_transversality": self.sup_transversality,
            "z_sup": self.z_sup,
        }


def el_residual_all(ens: Ensemble) -> ELReport:
    """Discrete Euler-Lagrange residuals for every particle.

    z_k = delta v_k + lambda a (v_k - u) with the fields taken at interval
    midpoints; the interior residual compares (z_k - z_{k-1})/dt against the
    field-gradient source at node k (adjacent-interval averages); the
    transversality residual is z_{M-1} + grad Psi(final node).
    """
    n, m, d = ens.n_particles, ens.steps, ens.dim
    vel = ens.velocities()
    delta = ens.deltas_per_particle()
    lam = ens.game.params.lam
    pos = ens.positions

    z = np.empty((n, m, d))
    midpos = 0.5 * (pos[:, :-1, :] + pos[:, 1:, :])
    for k in range(m):
        fb = macro_fields_batch(ens, k, midpos[:, k, :], where="midpoint")
        z[:, k] = delta[:, None] * vel[:, k] + lam * fb.a[:, None] * (
            vel[:, k] - fb.u)

    residuals = np.zeros((n, max(m - 1, 0), d))
    for k in range(1, m):
        x = pos[:, k, :]
        fb0 = macro_fields_batch(ens, k - 1, x, where="node",
                                 velocities=vel[:, k - 1, :], need_grads=True)
        fb1 = macro_fields_batch(ens, k, x, where="node", need_grads=True)
        a = 0.5 * (fb0.a + fb1.a)
        ga = 0.5 * (fb0.grad_a + fb1.grad_a)
        u = 0.5 * (fb0.u + fb1.u)
        ju = 0.5 * (fb0.ju + fb1.ju)
        gsig = 0.5 * (fb0.grad_sigma + fb1.grad_sigma)
        v = 0.5 * (vel[:, k - 1] + vel[:, k])
        dev = v - u
        dev2 = np.sum(dev * dev, axis=-1)
        rhs = 0.5 * lam * (
            ga * dev2[:, None]
            + 2.0 * a[:, None] * np.einsum("sab,sa->sb", ju, u - v)
            + gsig
        )
        residuals[:, k - 1] = (z[:, k] - z[:, k - 1]) / ens.dt - rhs

    _, gpsi = ens.terminal_values_grads()
    transversality = z[:, m - 1] + gpsi
    res_norm = (np.linalg.norm(residuals, axis=-1) if m > 1
                else np.zeros((n, 0)))
    return ELReport(
        z=z,
        residuals=residuals,
        transversality=transversality,
        sup_residual=float(res_norm.max()) if res_norm.size else 0.0,
        sup_transversality=float(np.linalg.norm(transversality, axis=-1).max()),
        z_sup=float(np.linalg.norm(z, axis=-1).max()),
    )


def el_residual(i: int, ens: Ensemble):
    """Residual series and transversality residual for one particle."""
    rep = el_residual_all(ens)
    return rep.residuals[i], rep.transversality[i]


# ---------------------------------------------------------------------------
# Bound audits


class AuditError(AssertionError):
    pass


@dataclass
class AuditRow:
    name: str
    worst_lhs: float
    bound_at_worst: float
    passed: bool
    location: tuple  # (interval index, evaluation point) of the worst sample

    def to_dict(self):
        loc = self.location
        return {
            "name": self.name,
            "worst_lhs": self.worst_lhs,
            "bound_at_worst": self.bound_at_worst,
            "passed": self.passed,
            "location": [int(loc[0]), np.atleast_1d(loc[1]).tolist()],
        }


_RTOL = 1e-9
_ATOL = 1e-12


def _audit_row(name, lhs, rhs, ks, xs):
    margin = lhs - rhs * (1.0 + _RTOL) - _ATOL
    worst = int(np.argmax(margin))
    return AuditRow(
        name=name,
        worst_lhs=float(lhs[worst]),
        bound_at_worst=float(rhs[worst]),
        passed=bool(margin[worst] <= 0.0),
        location=(int(ks[worst]), np.asarray(xs[worst])),
    )


def _sample_points(ens, samples, rng):
    d = ens.dim
    if ens.game.domain.is_torus:
        p = np.asarray(ens.game.domain.periods)
        return rng.uniform(0.0, 1.0, size=(samples, d)) * p
    lo = ens.positions.min(axis=(0, 1))
    hi = ens.positions.max(axis=(0, 1))
    pad = ens.game.kernel.length_scale
    return rng.uniform(lo - pad, hi + pad, size=(samples, d))


def bounds_audit(ens: Ensemble, samples: int = 1000, seed: int = 0,
                 strict: bool = False) -> list[AuditRow]:
    """Check the field bounds with explicit constants at random samples.

    With A = sup eta, W = total mass, C the kernel's gradient-ratio constant
    and (M1, M2) the velocity moments at the sampled interval:

        a <= A W,  |au| <= A M1,  a|u|^2 <= A M2,  sigma <= A M2,
        |grad a| <= C a,  a ||grad u||^2 <= 4 C^2 A M2.

    Gradient rows are skipped when the kernel admits no finite C (gaussian).
    The speed-bound row checks that the fastest observed velocity is at most
    ||z||_inf / delta of the particle attaining it.  ``strict`` raises
    AuditError naming the first violated inequality and its location.
    """
    rng = np.random.default_rng([seed, 176])
    ks = rng.integers(0, ens.steps, size=samples)
    xs = _sample_points(ens, samples, rng)
    mom = moments(ens)
    amp = ens.game.kernel.amplitude
    mass = ens.total_mass
    c_eta = ens.game.kernel.grad_ratio_bound
    need_grads = c_eta is not None

    a = np.empty(samples)
    au_norm = np.empty(samples)
    u2 = np.empty(samples)
    sig = np.empty(samples)
    ga_norm = np.empty(samples)
    ju_norm = np.empty(samples)
    for k in np.unique(ks):
        sel = ks == k
        fb = macro_fields_batch(ens, int(k), xs[sel], need_grads=need_grads)
        a[sel] = fb.a
        au_norm[sel] = np.linalg.norm(fb.au, axis=-1)
        u2[sel] = np.sum(fb.u**2, axis=-1)
        sig[sel] = fb.sigma
        if need_grads:
            ga_norm[sel] = np.linalg.norm(fb.grad_a, axis=-1)
            ju_norm[sel] = np.linalg.norm(fb.ju, ord=2, axis=(1, 2))

    m1k = mom.m1[ks]
    m2k = mom.m2[ks]
    rows = [
        _audit_row("a <= A*W", a, np.full(samples, amp * mass), ks, xs),
        _audit_row("|au| <= A*M1", au_norm, amp * m1k, ks, xs),
        _audit_row("a|u|^2 <= A*M2", a * u2, amp * m2k, ks, xs),
        _audit_row("sigma <= A*M2", sig, amp * m2k, ks, xs),
    ]
    if need_grads:
        rows.append(_audit_row("|grad a| <= C*a", ga_norm, c_eta * a, ks, xs))
        rows.append(_audit_row(
            "a|grad u|^2 <= 4*C^2*A*M2", a * ju_norm**2,
            4.0 * c_eta**2 * amp * m2k, ks, xs))

    # speed bound from the adjoint series
    el = el_residual_all(ens)
    speeds = np.linalg.norm(ens.velocities(), axis=-1)
    i_star, k_star = np.unravel_index(np.argmax(speeds), speeds.shape)
    delta_star = ens.deltas_per_particle()[i_star]
    rows.append(AuditRow(
        name="max speed <= ||z||_inf/delta",
        worst_lhs=float(speeds[i_star, k_star]),
        bound_at_worst=float(el.z_sup / delta_star),
        passed=bool(speeds[i_star, k_star]
                    <= el.z_sup / delta_star * (1.0 + _RTOL) + _ATOL),
        location=(int(k_star), ens.positions[i_star, k_star]),
    ))

    if strict:
        for row in rows:
            if not row.passed:
                raise AuditError(
                    f"{row.name} violated at interval {row.location[0]}, "
                    f"x={row.location[1]}: lhs={row.worst_lhs}, "
                    f"bound={row.bound_at_worst}"
                )
    return rows


# ---------------------------------------------------------------------------
# Monokineticity, uniqueness, segregation


def node_velocities(ens: Ensemble) -> np.ndarray:
    """Velocities attached to nodes 1..M: adjacent-interval average inside,
    the single adjacent interval at the final node.  Shape (N, M, d)."""
    vel = ens.velocities()
    out = np.empty_like(vel)
    out[:, : ens.steps - 1] = 0.5 * (vel[:, :-1] + vel[:, 1:])
    out[:, ens.steps - 1] = vel[:, -1]
    return out


def monokineticity_index(ens: Ensemble, radius: float,
                         same_population: bool = True) -> float:
    """Largest node-velocity mismatch among particle pairs within ``radius``.

    Times run over nodes 1..M (the initial time carries no claim).  By
    default only same-population pairs count: each population has its own
    velocity field.  Returns 0 when no pair qualifies.
    """
    if radius <= 0:
        raise ValueError("radius must be > 0")
    nv = node_velocities(ens)
    dom = ens.game.domain
    worst = 0.0
    n = ens.n_particles
    same_pop = ens.pops[:, None] == ens.pops[None, :]
    eye = np.eye(n, dtype=bool)
    for k in range(1, ens.steps + 1):
        x = ens.positions[:, k, :]
        dist = np.linalg.norm(dom.displacement(x[:, None], x[None, :]), axis=-1)
        mask = (dist <= radius) & ~eye
        if same_population:
            mask &= same_pop
        if not mask.any():
            continue
        dv = np.linalg.norm(nv[:, k - 1][:, None] - nv[:, k - 1][None, :],
                            axis=-1)
        worst = max(worst, float(dv[mask].max()))
    return worst


def uniqueness_probe(ens: Ensemble, particle: int = 0, n_starts: int = 10,
                     cfg: SolveConfig | None = None, spread: float = 0.5,
                     seed: int = 0) -> float:
    """Best responses from scattered random starts: max pairwise sup-node
    distance of the minimizers (0 means one basin)."""
    if n_starts < 2:
        raise ValueError("need at least 2 starts")
    cfg = cfg or SolveConfig(grad_tol=1e-12)
    rng = np.random.default_rng([seed, particle])
    incumbent = ens.positions[particle]
    minimizers = []
    for _ in range(n_starts):
        nodes0 = incumbent.copy()
        nodes0[1:] += spread * rng.standard_normal(nodes0[1:].shape)
        nodes, _, _ = _solve_own(ens, particle, nodes0, cfg)
        minimizers.append(nodes)
    worst = 0.0
    for ia in range(n_starts):
        for ib in range(ia + 1, n_starts):
            gap = np.linalg.norm(minimizers[ia] - minimizers[ib], axis=-1)
            worst = max(worst, float(gap.max()))
    return worst


def segregation_index(ens: Ensemble, k: int, radius: float) -> float:
    """Mass-weighted mean of (same - other)/(same + other) neighbor mass
    within ``radius`` at node time k; isolated particles contribute 0."""
    if ens.game.params.n_pops < 2:
        raise ValueError("segregation needs at least two populations")
    if radius <= 0:
        raise ValueError("radius must be > 0")
    x = ens.positions[:, k, :]
    dom = ens.game.domain
    dist = np.linalg.norm(dom.displacement(x[:, None], x[None, :]), axis=-1)
    near = (dist <= radius) & ~np.eye(ens.n_particles, dtype=bool)
    same_pop = ens.pops[:, None] == ens.pops[None, :]
    w = ens.weights
    same = (near & same_pop) @ w
    other = (near & ~same_pop) @ w
    tot = same + other
    with np.errstate(invalid="ignore", divide="ignore"):
        contrib = np.where(tot > 0, (same - other) / np.where(tot > 0, tot, 1.0),
                           0.0)
    return float(np.sum(w * contrib) / np.sum(w))


# ---------------------------------------------------------------------------
# Assembled report


@dataclass
class DiagnosticsReport:
    exploitability: ExploitabilityReport | None = None
    el: ELReport | None = None
    audit: list | None = None
    monokineticity: float | None = None
    monokineticity_radius: float | None = None
    uniqueness_dispersion: float | None = None
    energy: float | None = None

    def to_dict(self):
        out = {}
        if self.exploitability is not None:
            out["exploitability"] = self.exploitability.to_dict()
        if self.el is not None:
            out["euler_lagrange"] = self.el.to_dict()
        if self.audit is not None:
            out["bounds_audit"] = [row.to_dict() for row in self.audit]
        if self.monokineticity is not None:
            out["monokineticity_index"] = self.monokineticity
            out["monokineticity_radius"] = self.monokineticity_radius
        if self.uniqueness_dispersion is not None:
            out["uniqueness_dispersion"] = self.uniqueness_dispersion
        if self.energy is not None:
            out["energy"] = self.energy
        return out
