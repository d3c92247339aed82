"""Latent laws for the per-example correctness probability Q.

Three concrete representations are supported: finitely many atoms
(:class:`DiscreteLaw`), a piecewise-linear density on a grid
(:class:`GridDensity`), and a two-part mixture of the two
(:class:`HybridLaw`).  All of them are immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from . import _quad

WEIGHT_TOL = 1e-12
DENSITY_TOL = 1e-10
DEFAULT_R_GRID = 1025

FIGURE1_LAWS = {
    "constant": ((0.0, 0.25), (1.0, 0.75)),
    "fast drop": ((0.3488, 0.3839066), (1.0, 0.6160934)),
    "dip then surpass": ((0.1690, 0.2072827), (0.6043333, 0.1964989), (1.0, 0.5962184)),
    "rise then fall": ((0.38, 0.315067), (0.92, 0.683229), (1.0, 0.001704)),
    "slow rise": ((0.5095, 0.509684), (1.0, 0.490316)),
}


class LawValidationError(ValueError):
    """A latent law violates one of its representation invariants."""


@dataclass(frozen=True, eq=False)
class DiscreteLaw:
    q: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if q.shape != w.shape:
            raise LawValidationError("atom locations and weights differ in length")
        # merge atoms at identical q
        uq, inv = np.unique(q, return_inverse=True)
        merged = np.zeros_like(uq)
        np.add.at(merged, inv, w)
        object.__setattr__(self, "q", uq)
        object.__setattr__(self, "weights", merged)

    @classmethod
    def from_atoms(cls, atoms):
        atoms = list(atoms)
        if not atoms:
            return cls(np.array([]), np.array([]))
        q, w = zip(*atoms)
        return cls(np.array(q), np.array(w))

    @property
    def atoms(self):
        return list(zip(self.q.tolist(), self.weights.tolist()))

    def __repr__(self):
        return f"DiscreteLaw({self.atoms})"


@dataclass(frozen=True, eq=False)
class GridDensity:
    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float).ravel())
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).ravel())
        if self.nodes.shape != self.values.shape:
            raise LawValidationError("density nodes and values differ in length")

    def __call__(self, q):
        return np.interp(q, self.nodes, self.values)

    def total_mass(self):
        return float(np.trapezoid(self.values, self.nodes))

    def __repr__(self):
        return f"GridDensity({self.nodes.size} nodes)"


@dataclass(frozen=True, eq=False)
class HybridLaw:
    """``discrete_weight * discrete + (1 - discrete_weight) * density``."""

    discrete: DiscreteLaw
    density: GridDensity
    discrete_weight: float


Law = Union[DiscreteLaw, GridDensity, HybridLaw]


@dataclass(frozen=True, eq=False)
class BranchDecomposition:
    """Branch asymmetry ``g`` and branch-symmetric part ``s`` on an r-grid."""

    r_nodes: np.ndarray
    g_values: np.ndarray
    s_values: np.ndarray
    u_nodes: np.ndarray = field(repr=False)


def validate(law: Law) -> None:
    """Raise :class:`LawValidationError` unless every invariant of ``law`` holds."""
    if isinstance(law, DiscreteLaw):
        if law.q.size == 0:
            raise LawValidationError("discrete law has no atoms")
        if np.any((law.q < 0) | (law.q > 1)):
            bad = law.q[(law.q < 0) | (law.q > 1)][0]
            raise LawValidationError(f"atom location {float(bad)!r} outside [0, 1]")
        if np.any(law.weights <= 0):
            raise LawValidationError(f"nonpositive atom weight {float(law.weights.min())!r}")
        total = law.weights.sum()
        if abs(total - 1.0) > WEIGHT_TOL:
            raise LawValidationError(f"weights sum to {float(total)!r}, not 1")
    elif isinstance(law, GridDensity):
        x, v = law.nodes, law.values
        if x.size < 2 or x[0] != 0.0 or x[-1] != 1.0:
            raise LawValidationError("density nodes must start at 0 and end at 1")
        if np.any(np.diff(x) <= 0):
            raise LawValidationError("density nodes must be strictly increasing")
        if np.any(v < 0):
            raise LawValidationError(f"negative density value {float(v.min())!r}")
        mass = law.total_mass()
        if abs(mass - 1.0) > DENSITY_TOL:
            raise LawValidationError(f"density integrates to {mass!r}, not 1")
    elif isinstance(law, HybridLaw):
        if not 0.0 <= law.discrete_weight <= 1.0:
            raise LawValidationError(f"discrete_weight {float(law.discrete_weight)!r} outside [0, 1]")
        validate(law.discrete)
        validate(law.density)
    else:
        raise TypeError(f"not a latent law: {type(law).__name__}")


def expect(law: Law, func: Callable, budget: int | None = None) -> float:
    """``E[func(Q)]``.

    Densities are integrated with a composite Gauss-Legendre rule on the
    density's own grid, so polynomial ``func`` of moderate degree is exact.
    Passing ``budget`` adds panels around q = 1/2 at the transition width of
    ``P_budget``.
    """
    if isinstance(law, DiscreteLaw):
        return float(np.dot(law.weights, func(law.q)))
    if isinstance(law, GridDensity):
        breaks = law.nodes
        if budget is not None and budget > 0:
            breaks = np.concatenate([breaks, _quad.refine_near(0.5, _quad.budget_scale(budget))])
        x, w = _quad.composite_rule(breaks)
        return float(np.dot(w, func(x) * law(x)))
    if isinstance(law, HybridLaw):
        p = law.discrete_weight
        return p * expect(law.discrete, func, budget) + (1 - p) * expect(law.density, func, budget)
    raise TypeError(f"not a latent law: {type(law).__name__}")


def mean(law: Law) -> float:
    return expect(law, lambda q: q)


def _density_mass(f: GridDensity, lo, hi):
    lo, hi = max(lo, 0.0), min(hi, 1.0)
    if hi <= lo:
        return 0.0
    inner = f.nodes[(f.nodes > lo) & (f.nodes < hi)]
    x = np.concatenate([[lo], inner, [hi]])
    return float(np.trapezoid(f(x), x))


def margin_mass(law: Law, t: float) -> float:
    """``Pi(|Q - 1/2| <= t)``."""
    if isinstance(law, DiscreteLaw):
        return float(law.weights[np.abs(law.q - 0.5) <= t].sum())
    if isinstance(law, GridDensity):
        return _density_mass(law, 0.5 - t, 0.5 + t)
    if isinstance(law, HybridLaw):
        p = law.discrete_weight
        return p * margin_mass(law.discrete, t) + (1 - p) * margin_mass(law.density, t)
    raise TypeError(f"not a latent law: {type(law).__name__}")


def upper_mass(law: Law) -> float:
    """``Pi((1/2, 1]) + Pi({1/2})/2``, the infinite-budget majority accuracy."""
    if isinstance(law, DiscreteLaw):
        w, q = law.weights, law.q
        return float(w[q > 0.5].sum() + 0.5 * w[q == 0.5].sum())
    if isinstance(law, GridDensity):
        return _density_mass(law, 0.5, 1.0)
    if isinstance(law, HybridLaw):
        p = law.discrete_weight
        return p * upper_mass(law.discrete) + (1 - p) * upper_mass(law.density)
    raise TypeError(f"not a latent law: {type(law).__name__}")


def u_grid(size: int = DEFAULT_R_GRID, extra=()) -> np.ndarray:
    """Grid on u = sqrt(1 - 4r) in [0, 1]: ``size`` uniform nodes plus ``extra``."""
    u = np.linspace(0.0, 1.0, size)
    extra = np.asarray(extra, dtype=float)
    return np.unique(np.clip(np.concatenate([u, extra]), 0.0, 1.0))


def u_to_r(u):
    return 0.25 * (1.0 - np.asarray(u) ** 2)


def branch_decompose(f: GridDensity, r_grid_size: int = DEFAULT_R_GRID) -> BranchDecomposition:
    """Sample ``g(r) = f(q_+) - f(q_-)`` and ``s(r) = f(q_+) + f(q_-)``.

    The grid is uniform in ``u = sqrt(1-4r)``, augmented with the radii of
    the density's grid nodes so that ``g`` and ``s`` are exactly piecewise
    linear in ``u`` between consecutive nodes.
    """
    u = u_grid(r_grid_size, np.abs(2.0 * f.nodes - 1.0))
    qp, qm = 0.5 * (1.0 + u), 0.5 * (1.0 - u)
    fp, fm = f(qp), f(qm)
    return BranchDecomposition(r_nodes=u_to_r(u)[::-1].copy(), g_values=(fp - fm)[::-1].copy(),
                               s_values=(fp + fm)[::-1].copy(), u_nodes=u[::-1].copy())


# --- named constructions -------------------------------------------------------------


def oscillation_atoms(j_max: int):
    """Radii, exact ``1-4r`` and unnormalized weights of the oscillating law, j = 1..j_max."""
    j = np.arange(1, j_max + 1, dtype=float)
    one_minus_4r = -np.expm1(-(2.0 ** -j))
    r = 0.25 * np.exp(-(2.0 ** -j))
    raw = np.exp(-j * j) / np.sqrt(one_minus_4r)
    return j.astype(int), r, one_minus_4r, raw


def _oscillation(j_max: int) -> DiscreteLaw:
    if j_max < 1:
        raise LawValidationError("oscillation needs j_max >= 1")
    j, _, one_minus_4r, raw = oscillation_atoms(j_max)
    u = np.sqrt(one_minus_4r)
    q = np.where(j % 2 == 0, 0.5 * (1.0 + u), 0.5 * (1.0 - u))
    return DiscreteLaw(q, raw / raw.sum())


def _margin_worst_case(C: float, kappa: float, t0: float) -> HybridLaw:
    if not (C > 0 and kappa > 0 and 0 < t0 <= 0.5):
        raise LawValidationError(f"margin parameters out of range: C={C}, kappa={kappa}, t0={t0}")
    a = min(0.5, C * t0**kappa / 2.0)
    jump = 1e-12
    if kappa == 1.0:
        t = np.array([0.0, jump, t0])
        v = np.full(3, 1.0 / t0)
        v[0] = 0.0
    elif kappa == 2.0:
        t = np.array([0.0, t0])
        v = np.array([0.0, 2.0 / t0])
    else:
        # kappa t^(kappa-1) / t0^kappa on a grid clustered at t = 0
        t = t0 * np.linspace(0.0, 1.0, 2001) ** 3
        with np.errstate(divide="ignore"):
            v = kappa * t ** (kappa - 1.0) / t0**kappa
        v[0] = 0.0
        if kappa < 1:
            # singular at t = 0: size the first cell's ramp to carry its exact mass (t1/t0)^kappa
            v[1] = 2.0 * (t[1] / t0) ** kappa / t[1]
    nodes = [0.0] + list(0.5 + t)
    values = [0.0] + list(v)
    if t0 < 0.5:
        nodes += [0.5 + t0 + jump]
        values += [0.0]
    if nodes[-1] < 1.0:
        nodes.append(1.0)
        values.append(0.0)
    dens = GridDensity(np.array(nodes), np.array(values))
    dens = GridDensity(dens.nodes, dens.values / dens.total_mass())
    return HybridLaw(DiscreteLaw([1.0], [1.0]), dens, 1.0 - a)


def make_named(kind: str, **params) -> Law:
    """Build one of the named constructions.

    ``oscillation(j_max=10)``, ``margin_worst_case(C, kappa, t0)`` or
    ``figure1(name)``.
    """
    if kind == "oscillation":
        return _oscillation(int(params.get("j_max", 10)))
    if kind == "margin_worst_case":
        return _margin_worst_case(float(params["C"]), float(params["kappa"]), float(params["t0"]))
    if kind == "figure1":
        name = params["name"]
        if name not in FIGURE1_LAWS:
            raise LawValidationError(
                f"unknown figure1 curve {name!r}; expected one of {sorted(FIGURE1_LAWS)}"
            )
        return DiscreteLaw.from_atoms(FIGURE1_LAWS[name])
    raise LawValidationError(f"unknown named law kind {kind!r}")


def uniform_density() -> GridDensity:
    return GridDensity([0.0, 1.0], [1.0, 1.0])


def density_from_function(func: Callable, size: int = 2049) -> GridDensity:
    """Piecewise-linear interpolant of ``func`` on a uniform grid, renormalized."""
    x = np.linspace(0.0, 1.0, size)
    v = np.asarray(func(x), dtype=float)
    return GridDensity(x, v / np.trapezoid(v, x))


def margin_mass_bound_holds(law: Law, C: float, kappa: float, t0: float, n_grid: int = 200) -> bool:
    """Check ``Pi(|Q-1/2| <= t) <= C t^kappa`` on a grid of ``t`` in (0, t0)."""
    ts = t0 * np.linspace(0.0, 1.0, n_grid + 2)[1:-1]
    return all(margin_mass(law, t) <= C * t**kappa * (1 + 1e-12) for t in ts)
