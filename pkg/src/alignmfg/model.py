"""Domains, interaction kernels, terminal costs and game parameters.

Everything here is a pure function of its inputs; arrays are accepted with
arbitrary leading batch dimensions and the trailing axis holding coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Domain",
    "Kernel",
    "TerminalCost",
    "LinearTerm",
    "QuadraticWellTerm",
    "GameParams",
    "Game",
    "displacement",
    "kernel_eval_grad",
    "terminal_eval_grad",
]


class ModelError(ValueError):
    """Invalid model data (bad dimension, non-positive parameter, ...)."""


# ---------------------------------------------------------------------------
# Domain


@dataclass(frozen=True)
class Domain:
    """Flat space the agents move in: all of R^d or a flat torus.

    ``periods`` is required (and only allowed) for the torus; all entries
    must be strictly positive.
    """

    kind: str  # "euclidean" | "flat-torus"
    dim: int
    periods: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("euclidean", "flat-torus"):
            raise ModelError(f"unknown domain kind {self.kind!r}")
        if self.dim < 1:
            raise ModelError("domain dimension must be >= 1")
        if self.kind == "flat-torus":
            if self.periods is None or len(self.periods) != self.dim:
                raise ModelError("flat-torus needs one period per dimension")
            if any(p <= 0 for p in self.periods):
                raise ModelError("torus periods must be strictly positive")
        elif self.periods is not None:
            raise ModelError("euclidean domain takes no periods")

    @property
    def is_torus(self) -> bool:
        return self.kind == "flat-torus"

    def displacement(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Shortest vector from ``y`` to ``x`` (componentwise wrap on a torus).

        Wrapped components lie in [-period/2, period/2).  Antisymmetric:
        displacement(x, y) == -displacement(y, x) up to the half-period
        boundary set.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape[-1] != self.dim or y.shape[-1] != self.dim:
            raise ModelError(
                f"dimension mismatch: domain is {self.dim}-d, "
                f"got shapes {x.shape} and {y.shape}"
            )
        d = x - y
        if self.is_torus:
            p = np.asarray(self.periods)
            d = d - np.round(d / p) * p
            # round(0.5) ties-to-even would leave +p/2; fold it to -p/2
            half = p / 2
            d = np.where(d >= half, d - p, d)
            d = np.where(d < -half, d + p, d)
        return d

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Map points into the fundamental cell [0, period)^d (torus only)."""
        x = np.asarray(x, dtype=float)
        if not self.is_torus:
            return x
        p = np.asarray(self.periods)
        return np.mod(x, p)

    def min_period(self) -> float:
        return float(min(self.periods)) if self.is_torus else np.inf


def displacement(domain: Domain, x, y) -> np.ndarray:
    return domain.displacement(x, y)


# ---------------------------------------------------------------------------
# Interaction kernels

_KERNEL_FAMILIES = ("smoothed-exponential", "gaussian", "constant")


@dataclass(frozen=True)
class Kernel:
    """Radial interaction weight eta(z): positive, bounded by ``amplitude``.

    Families:
      smoothed-exponential  A * exp(-sqrt(|z|^2 + s^2) / eps)
      gaussian              A * exp(-|z|^2 / (2 eps^2))
      constant              A

    The smoothed-exponential satisfies |grad eta| <= eta / eps everywhere,
    which the bound audits rely on; the gaussian does not admit any such
    constant, the constant kernel trivially has 0.
    """

    family: str = "smoothed-exponential"
    amplitude: float = 1.0
    length_scale: float = 1.0
    smoothing: float = 0.0  # only meaningful for smoothed-exponential

    def __post_init__(self):
        if self.family not in _KERNEL_FAMILIES:
            raise ModelError(f"unknown kernel family {self.family!r}")
        if self.amplitude <= 0:
            raise ModelError("kernel amplitude must be > 0")
        if self.length_scale <= 0:
            raise ModelError("kernel length scale must be > 0")
        if self.smoothing < 0:
            raise ModelError("kernel smoothing must be >= 0")

    @property
    def grad_ratio_bound(self) -> float | None:
        """C with |grad eta| <= C eta everywhere, or None if no finite C."""
        if self.family == "smoothed-exponential":
            return 1.0 / self.length_scale
        if self.family == "constant":
            return 0.0
        return None

    def eval(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        r2 = np.sum(z * z, axis=-1)
        if self.family == "constant":
            return np.full(r2.shape, self.amplitude)
        if self.family == "gaussian":
            return self.amplitude * np.exp(-r2 / (2.0 * self.length_scale**2))
        rs = np.sqrt(r2 + self.smoothing**2)
        return self.amplitude * np.exp(-rs / self.length_scale)

    def eval_grad(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (eta(z), grad eta(z)); gradient at the symmetry point is 0."""
        z = np.asarray(z, dtype=float)
        val = self.eval(z)
        if self.family == "constant":
            return val, np.zeros_like(z)
        if self.family == "gaussian":
            grad = -(z / self.length_scale**2) * val[..., None]
            return val, grad
        r2 = np.sum(z * z, axis=-1)
        rs = np.sqrt(r2 + self.smoothing**2)
        # direction z/rs is well defined unless r2 == s == 0; there the kernel
        # has a radial symmetry point and we take gradient 0
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(rs > 0.0, val / (self.length_scale * rs), 0.0)
        grad = -z * scale[..., None]
        return val, grad


def kernel_eval_grad(kernel: Kernel, z) -> tuple[np.ndarray, np.ndarray]:
    return kernel.eval_grad(z)


# ---------------------------------------------------------------------------
# Terminal costs


@dataclass(frozen=True)
class LinearTerm:
    """g . x — drives agents down the gradient direction ``g``."""

    gradient: tuple[float, ...]

    def eval_grad(self, x, domain):
        g = np.asarray(self.gradient, dtype=float)
        if g.shape[-1] != x.shape[-1]:
            raise ModelError("linear term gradient has wrong dimension")
        val = np.sum(x * g, axis=-1)
        grad = np.broadcast_to(g, x.shape).copy()
        return val, grad

    def lipschitz_bound(self, lo, hi):
        return float(np.linalg.norm(self.gradient))


@dataclass(frozen=True)
class QuadraticWellTerm:
    """kappa/2 * dist(x, center)^2 with the domain's (wrapped) distance.

    ``kappa`` may be a per-axis tuple for anisotropic confinement.
    """

    center: tuple[float, ...]
    kappa: float | tuple[float, ...]

    def __post_init__(self):
        k = np.atleast_1d(np.asarray(self.kappa, dtype=float))
        if np.any(k < 0):
            raise ModelError("quadratic well kappa must be >= 0")

    def _kvec(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.kappa, dtype=float))

    def eval_grad(self, x, domain):
        c = np.asarray(self.center, dtype=float)
        k = self._kvec()
        d = domain.displacement(x, c)
        val = 0.5 * np.sum(k * d * d, axis=-1)
        grad = k * d
        return val, grad

    def lipschitz_bound(self, lo, hi):
        c = np.asarray(self.center, dtype=float)
        corner = np.maximum(np.abs(lo - c), np.abs(hi - c))
        return float(np.linalg.norm(self._kvec() * corner))


@dataclass(frozen=True)
class TerminalCost:
    """Sum of linear and quadratic-well terms; the empty sum is 0."""

    terms: tuple = ()

    def eval_grad(self, x, domain: Domain) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        val = np.zeros(x.shape[:-1])
        grad = np.zeros_like(x)
        for term in self.terms:
            v, g = term.eval_grad(x, domain)
            val = val + v
            grad = grad + g
        return val, grad

    def lipschitz_bound(self, lo, hi) -> float:
        """Lipschitz constant of the sum on the box [lo, hi]."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        return float(sum(t.lipschitz_bound(lo, hi) for t in self.terms))

    @property
    def has_linear_term(self) -> bool:
        return any(isinstance(t, LinearTerm) for t in self.terms)


def terminal_eval_grad(psi: TerminalCost, x, domain: Domain | None = None):
    if domain is None:
        x = np.asarray(x, dtype=float)
        domain = Domain("euclidean", x.shape[-1])
    return psi.eval_grad(x, domain)


# ---------------------------------------------------------------------------
# Game parameters


@dataclass(frozen=True)
class GameParams:
    """Weights and discretization of the game.

    ``deltas`` and ``masses`` are per population; masses need not sum to 1
    (multipopulation measures are not normalizable to probabilities).
    """

    lam: float
    horizon: float
    steps: int
    deltas: tuple[float, ...]
    masses: tuple[float, ...]

    def __post_init__(self):
        if self.lam <= 0:
            raise ModelError("interaction weight lambda must be > 0")
        if self.horizon <= 0:
            raise ModelError("horizon T must be > 0")
        if self.steps < 1:
            raise ModelError("time step count M must be >= 1")
        if len(self.deltas) != len(self.masses) or not self.deltas:
            raise ModelError("need one (delta, mass) pair per population")
        if any(d <= 0 for d in self.deltas):
            raise ModelError("mobility weights delta must be > 0")
        if any(m <= 0 for m in self.masses):
            raise ModelError("population masses must be > 0")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def n_pops(self) -> int:
        return len(self.deltas)

    @property
    def total_mass(self) -> float:
        return float(sum(self.masses))


@dataclass(frozen=True)
class Game:
    """A full game instance minus the initial distribution."""

    domain: Domain
    kernel: Kernel
    params: GameParams
    terminal_costs: tuple[TerminalCost, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.terminal_costs) != self.params.n_pops:
            raise ModelError("need one terminal cost per population")
        if self.domain.is_torus:
            for q, psi in enumerate(self.terminal_costs):
                if psi.has_linear_term:
                    raise ModelError(
                        f"population {q}: linear terminal cost is not periodic "
                        "on a torus"
                    )
