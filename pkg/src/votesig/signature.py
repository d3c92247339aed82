"""Signed voting signature and its moment equivalence with the voting curve.

A latent law of Q is pushed forward to a finite signed measure on
[0, 1/4] via ``q -> q(1-q)`` with orientation weight ``2q - 1``.  The odd
budget voting curve and the signed Hausdorff moment sequence of this
measure determine each other.

Densities on [0, 1/4] are stored against ``u = sqrt(1 - 4r)``: they are
piecewise linear in ``u`` and every r-integral is evaluated in u-space,
where ``dr = -(u/2) du`` and the endpoint kernel ``(1-4r)^{-1/2} = 1/u``
cancels against the Jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

from . import _quad
from .kernel import DIRECT_MAX_N, log_binom, majority_accuracy, psi_kernel
from .laws import (
    DEFAULT_R_GRID,
    DiscreteLaw,
    GridDensity,
    HybridLaw,
    Law,
    branch_decompose,
    expect,
    upper_mass,
    u_to_r,
)

MERGE_TOL = 1e-14
DROP_TOL = 1e-15
REALIZABLE_TOL = 1e-10


class SignatureError(ValueError):
    """A signed measure cannot be a voting signature (or an integral diverges)."""


@dataclass(frozen=True, eq=False)
class SignedSignature:
    """Signed atoms on [0, 1/4] plus an optional density piecewise linear in u."""

    atom_r: np.ndarray = field(default_factory=lambda: np.array([]))
    atom_w: np.ndarray = field(default_factory=lambda: np.array([]))
    g_u: np.ndarray = field(default_factory=lambda: np.array([]))
    g_values: np.ndarray = field(default_factory=lambda: np.array([]))

    def __post_init__(self):
        r = np.asarray(self.atom_r, dtype=float).ravel()
        w = np.asarray(self.atom_w, dtype=float).ravel()
        r, w = _merge_atoms(r, w)
        gu = np.asarray(self.g_u, dtype=float).ravel()
        gv = np.asarray(self.g_values, dtype=float).ravel()
        if gu.shape != gv.shape:
            raise SignatureError("density nodes and values differ in length")
        order = np.argsort(gu)
        object.__setattr__(self, "atom_r", r)
        object.__setattr__(self, "atom_w", w)
        object.__setattr__(self, "g_u", gu[order])
        object.__setattr__(self, "g_values", gv[order])

    @classmethod
    def from_r_grid(cls, atom_r=(), atom_w=(), g_nodes=(), g_values=()):
        """Build from a density sampled on radii rather than on u."""
        g_nodes = np.asarray(g_nodes, dtype=float)
        return cls(atom_r, atom_w, np.sqrt(np.maximum(1.0 - 4.0 * g_nodes, 0.0)), g_values)

    @property
    def has_density(self) -> bool:
        return self.g_u.size > 1

    @property
    def g_nodes(self) -> np.ndarray:
        """Density nodes as radii, increasing."""
        return u_to_r(self.g_u[::-1])

    @property
    def g_values_by_r(self) -> np.ndarray:
        return self.g_values[::-1]

    def g(self, u):
        return np.interp(u, self.g_u, self.g_values)

    def total_variation(self) -> float:
        tv = float(np.abs(self.atom_w).sum())
        if self.has_density:
            tv += _density_integral(self, lambda u: 0.5 * u, absolute=True)
        return tv

    def scaled(self, factor: float) -> "SignedSignature":
        return SignedSignature(self.atom_r, factor * self.atom_w, self.g_u, factor * self.g_values)

    def __add__(self, other: "SignedSignature") -> "SignedSignature":
        if self.has_density and other.has_density:
            u = np.union1d(self.g_u, other.g_u)
            gu, gv = u, self.g(u) + other.g(u)
        elif self.has_density:
            gu, gv = self.g_u, self.g_values
        else:
            gu, gv = other.g_u, other.g_values
        return SignedSignature(np.concatenate([self.atom_r, other.atom_r]),
                               np.concatenate([self.atom_w, other.atom_w]), gu, gv)

    def __repr__(self):
        atoms = list(zip(self.atom_r.tolist(), self.atom_w.tolist()))
        dens = f", density on {self.g_u.size} nodes" if self.has_density else ""
        return f"SignedSignature({atoms}{dens})"


@dataclass(frozen=True, eq=False)
class VotingCurve:
    values: np.ndarray
    endpoint: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @property
    def n_max(self) -> int:
        return self.values.size - 1

    def increments(self) -> np.ndarray:
        return np.diff(self.values)


@dataclass(frozen=True, eq=False)
class MomentPrefix:
    """Signed moments ``s_0..s_L`` with optional covariance of the estimate."""

    s: np.ndarray
    covariance: np.ndarray | None = None
    depth: int | None = None
    n_examples: int | None = None

    @property
    def stderr(self):
        if self.covariance is None:
            return None
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


def _merge_atoms(r, w):
    if r.size == 0:
        return r, w
    order = np.argsort(r, kind="stable")
    r, w = r[order], w[order]
    group = np.concatenate([[0], np.cumsum(np.diff(r) > MERGE_TOL)])
    n = group[-1] + 1
    rr = np.zeros(n)
    ww = np.zeros(n)
    cnt = np.zeros(n)
    gross = np.zeros(n)
    np.add.at(ww, group, w)
    np.add.at(gross, group, np.abs(w))
    np.add.at(rr, group, r)
    np.add.at(cnt, group, 1)
    rr /= cnt
    # drop cancellation residue only; genuinely tiny atoms survive
    keep = (np.abs(ww) >= DROP_TOL * gross) & (ww != 0)
    return rr[keep], ww[keep]


# --- density quadrature in u ------------------------------------------------------------


def _u_rule(sig: SignedSignature, k_hint: float = 0.0, extra=()):
    breaks = [sig.g_u, extra]
    if k_hint > 0:
        breaks.append(_quad.refine_near(0.0, 1.0 / np.sqrt(k_hint + 1.0), 0.0, 1.0))
    return _quad.composite_rule(np.concatenate(breaks))


def _sign_changes(sig):
    gu, gv = sig.g_u, sig.g_values
    flips = np.nonzero(gv[:-1] * gv[1:] < 0)[0]
    return gu[flips] - gv[flips] * (gu[flips + 1] - gu[flips]) / (gv[flips + 1] - gv[flips])


def _density_integral(sig: SignedSignature, weight_u, k_hint=0.0, absolute=False):
    """``int_0^1 weight_u(u) g(u) du`` (``|g|`` if ``absolute``)."""
    extra = _sign_changes(sig) if absolute else ()
    x, w = _u_rule(sig, k_hint, extra)
    gx = sig.g(x)
    if absolute:
        gx = np.abs(gx)
    return float(np.dot(w, weight_u(x) * gx))


# --- forward map -------------------------------------------------------------------------


def pushforward(law: Law, r_grid_size: int = DEFAULT_R_GRID) -> SignedSignature:
    """Signed voting signature of ``law``."""
    if isinstance(law, DiscreteLaw):
        q, w = law.q, law.weights
        return SignedSignature(q * (1.0 - q), w * (2.0 * q - 1.0))
    if isinstance(law, GridDensity):
        dec = branch_decompose(law, r_grid_size)
        return SignedSignature(g_u=dec.u_nodes, g_values=dec.g_values)
    if isinstance(law, HybridLaw):
        p = law.discrete_weight
        return pushforward(law.discrete).scaled(p) + pushforward(law.density, r_grid_size).scaled(1 - p)
    raise TypeError(f"not a latent law: {type(law).__name__}")


def moment(sig: SignedSignature, k: int) -> float:
    """``int r^k omega(dr)``."""
    total = float(np.dot(sig.atom_w, np.power(sig.atom_r, k)))
    if sig.has_density:
        total += _density_integral(sig, lambda u: np.power(u_to_r(u), k) * 0.5 * u, k_hint=k)
    return total


def moments(sig: SignedSignature, k_max: int) -> np.ndarray:
    return np.array([moment(sig, k) for k in range(k_max + 1)])


def _atom_increments(sig, n_max):
    """``C(2n+1, n+1) sum_i w_i r_i^{n+1}`` for n = 0..n_max-1."""
    n = np.arange(n_max, dtype=float)
    if sig.atom_r.size == 0 or n_max == 0:
        return np.zeros(n_max)
    with np.errstate(divide="ignore"):
        logr = np.log(sig.atom_r)
    logc = log_binom(2 * n + 1, n + 1)
    mag = np.exp(logc[:, None] + (n[:, None] + 1.0) * logr[None, :])
    return mag @ sig.atom_w


def _density_increments(sig, n_max, chunk=256):
    if not sig.has_density or n_max == 0:
        return np.zeros(n_max)
    x, w = _u_rule(sig, k_hint=min(n_max, 1.0e6))
    gw = w * sig.g(x) * 0.5 * x
    with np.errstate(divide="ignore"):
        logr = np.log(u_to_r(x))
    out = np.empty(n_max)
    for start in range(0, n_max, chunk):
        n = np.arange(start, min(n_max, start + chunk), dtype=float)
        logc = log_binom(2 * n + 1, n + 1)
        mag = np.exp(logc[:, None] + (n[:, None] + 1.0) * logr[None, :])
        out[start:start + n.size] = mag @ gw
    return out


def curve_from_signature(sig: SignedSignature, n_max: int) -> VotingCurve:
    """Voting curve from ``V_0 = (1 + omega[0,1/4])/2`` and the moment increments."""
    v0 = 0.5 * (1.0 + moment(sig, 0))
    inc = _atom_increments(sig, n_max) + _density_increments(sig, n_max)
    values = np.concatenate([[v0], v0 + np.cumsum(inc)])
    try:
        end = endpoint(sig)
    except SignatureError:
        end = None
    return VotingCurve(values, end)


def _discrete_curve(law: DiscreteLaw, n_max: int) -> np.ndarray:
    values = np.empty(n_max + 1)
    small = min(n_max, DIRECT_MAX_N)
    for n in range(small + 1):
        values[n] = np.dot(law.weights, majority_accuracy(law.q, n))
    if n_max > DIRECT_MAX_N:
        n = np.arange(DIRECT_MAX_N + 1, n_max + 1, dtype=float)[:, None]
        q = law.q[None, :]
        lower = q <= 0.5
        # reflection keeps P_n(q) + P_n(1-q) = 1 to rounding
        p = np.where(lower, betainc(n + 1, n + 1, np.where(lower, q, 0.5)),
                     1.0 - betainc(n + 1, n + 1, np.where(lower, 0.5, 1.0 - q)))
        values[DIRECT_MAX_N + 1:] = p @ law.weights
    return values


def curve(law: Law, n_max: int, r_grid_size: int = DEFAULT_R_GRID) -> VotingCurve:
    """Odd-budget voting curve ``V_0..V_{n_max}`` and its endpoint.

    Atoms are summed exactly through the kernel; densities go through the
    moment increments of their branch asymmetry.
    """
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    if isinstance(law, DiscreteLaw):
        return VotingCurve(_discrete_curve(law, n_max), upper_mass(law))
    if isinstance(law, GridDensity):
        dens = curve_from_signature(pushforward(law, r_grid_size), n_max)
        return VotingCurve(dens.values, upper_mass(law))
    if isinstance(law, HybridLaw):
        p = law.discrete_weight
        values = p * _discrete_curve(law.discrete, n_max)
        values = values + (1 - p) * curve(law.density, n_max, r_grid_size).values
        return VotingCurve(values, upper_mass(law))
    raise TypeError(f"not a latent law: {type(law).__name__}")


def curve_direct(law: Law, n_list) -> np.ndarray:
    """``V_n = E P_n(Q)`` by quadrature against the law, for each n in ``n_list``."""
    return np.array([expect(law, lambda q, n=n: majority_accuracy(q, n), budget=n) for n in n_list])


def level_value(sig: SignedSignature, n: int) -> float:
    """``V_n = 1/2 + (1/2) int psi_n(r) omega(dr)``."""
    total = float(np.dot(sig.atom_w, psi_kernel(sig.atom_r, n))) if sig.atom_r.size else 0.0
    if sig.has_density:
        total += _density_integral(sig, lambda u: psi_kernel(u_to_r(u), n) * 0.5 * u, k_hint=n)
    return 0.5 + 0.5 * total


def curve_level(law_or_sig, n_list, r_grid_size: int = DEFAULT_R_GRID) -> np.ndarray:
    sig = law_or_sig if isinstance(law_or_sig, SignedSignature) else pushforward(law_or_sig, r_grid_size)
    return np.array([level_value(sig, n) for n in n_list])


# --- inverse map -------------------------------------------------------------------------


def recover_moments(curve: VotingCurve | np.ndarray) -> MomentPrefix:
    """``s_0 = 2 V_0 - 1`` and ``s_k = (V_k - V_{k-1}) / C(2k-1, k)``."""
    v = curve.values if isinstance(curve, VotingCurve) else np.asarray(curve, dtype=float)
    if v.size < 1:
        raise ValueError("curve needs at least V_0")
    k = np.arange(1, v.size, dtype=float)
    s = np.concatenate([[2.0 * v[0] - 1.0], np.diff(v) / np.exp(log_binom(2 * k - 1, k))])
    return MomentPrefix(s)


# --- endpoint ----------------------------------------------------------------------------


def _inv_sqrt_kernel(r):
    w = 1.0 - 4.0 * np.asarray(r, dtype=float)
    w = np.where(w < 0, 0.0, w)
    with np.errstate(divide="ignore"):
        return 1.0 / np.sqrt(w)


def endpoint(obj) -> float:
    """Infinite-budget accuracy ``V_inf`` from a law or from its signature."""
    if not isinstance(obj, SignedSignature):
        return upper_mass(obj)
    sig = obj
    singular = sig.atom_r >= 0.25
    if np.any(singular & (np.abs(sig.atom_w) > 0)):
        raise SignatureError("signature has an atom at r = 1/4; the endpoint integral diverges")
    total = float(np.dot(sig.atom_w, _inv_sqrt_kernel(sig.atom_r))) if sig.atom_r.size else 0.0
    if sig.has_density:
        # (1-4r)^{-1/2} g(r) dr = (1/u) g (u/2) du
        total += 0.5 * _density_integral(sig, np.ones_like)
    if not np.isfinite(total):
        raise SignatureError("endpoint integral diverges")
    return 0.5 + 0.5 * total


# --- realizability -----------------------------------------------------------------------


def realizability_integral(mu: SignedSignature) -> float:
    """``int (1-4r)^{-1/2} |mu|(dr)`` over [0, 1/4)."""
    total = float(np.dot(np.abs(mu.atom_w), _inv_sqrt_kernel(mu.atom_r))) if mu.atom_r.size else 0.0
    if mu.has_density:
        total += 0.5 * _density_integral(mu, np.ones_like, absolute=True)
    return total


def check_realizable(mu: SignedSignature) -> tuple[bool, float]:
    """Whether ``mu`` is the signature of some latent law, and the unused slack."""
    at_quarter = (mu.atom_r >= 0.25) & (np.abs(mu.atom_w) > 0)
    if np.any(at_quarter):
        return False, -np.inf
    integral = realizability_integral(mu)
    slack = 1.0 - integral
    return bool(slack >= -REALIZABLE_TOL), slack


def realize(mu: SignedSignature) -> Law:
    """A latent law whose signature is ``mu``.

    Positive atoms go on the upper branch and negative atoms on the lower
    branch, each with weight ``|w| / sqrt(1-4r)``; a density part is realized
    in its saturated form; leftover mass sits at q = 1/2.
    """
    feasible, slack = check_realizable(mu)
    if not feasible:
        raise SignatureError(f"signature is not realizable (slack {slack:.3g})")
    slack = max(slack, 0.0)
    u = np.sqrt(np.maximum(1.0 - 4.0 * mu.atom_r, 0.0))
    q = np.where(mu.atom_w > 0, 0.5 * (1.0 + u), 0.5 * (1.0 - u))
    wq = np.abs(mu.atom_w) / np.where(u > 0, u, 1.0)
    if slack > 0:
        q = np.append(q, 0.5)
        wq = np.append(wq, slack)
    if not mu.has_density:
        wq = wq / wq.sum()
        return DiscreteLaw(q, wq)
    q_d, v_d = _branch_density(mu.g_u, mu.g_values, np.zeros_like(mu.g_values))
    dens = GridDensity(q_d, v_d)
    d_mass = dens.total_mass()
    dens = GridDensity(q_d, v_d / d_mass)
    disc_mass = float(wq.sum())
    if disc_mass <= 0:
        return dens
    return HybridLaw(DiscreteLaw(q, wq / disc_mass), dens, disc_mass / (disc_mass + d_mass))


def _branch_density(u, g, h):
    """Unnormalized grid density with ``f(q_+-(u)) = (|g| + h +- g)/2``; ``u`` ascending."""
    fp = 0.5 * (np.abs(g) + h + g)
    fm = 0.5 * (np.abs(g) + h - g)
    if u[0] == 0.0:
        # both branches meet at q = 1/2
        mid = 0.5 * (fp[0] + fm[0])
        q = np.concatenate([0.5 * (1.0 - u[:0:-1]), [0.5], 0.5 * (1.0 + u[1:])])
        vals = np.concatenate([fm[:0:-1], [mid], fp[1:]])
    else:
        q = np.concatenate([0.5 * (1.0 - u[::-1]), 0.5 * (1.0 + u)])
        vals = np.concatenate([fm[::-1], fp])
    if q[0] > 0.0:
        q, vals = np.concatenate([[0.0], q]), np.concatenate([[vals[0]], vals])
    if q[-1] < 1.0:
        q, vals = np.concatenate([q, [1.0]]), np.concatenate([vals, [vals[-1]]])
    return q, vals


def realize_density(r_nodes, g, h, u_nodes: bool = False, tol: float = 1e-8) -> GridDensity:
    """Density with branch values ``f(q_+-) = (|g| + h +- g)/2``.

    ``g`` and ``h`` are sampled on ``r_nodes`` (or on u-nodes when
    ``u_nodes`` is set) and interpolated linearly in u.  ``h`` must make the
    total mass one: ``int (|g|+h)/sqrt(1-4r) dr = 1``.
    """
    x = np.asarray(r_nodes, dtype=float)
    u = x if u_nodes else np.sqrt(np.maximum(1.0 - 4.0 * x, 0.0))
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    order = np.argsort(u)
    u, g, h = u[order], g[order], h[order]
    if np.any(h < 0):
        raise SignatureError(f"slack function must be nonnegative (min {h.min():.3g})")
    # in u-space both integrals are trapezoid sums of the piecewise-linear interpolant
    g_integral = 0.5 * np.trapezoid(np.abs(g), u)
    if g_integral > 1.0 + tol:
        raise SignatureError(f"branch asymmetry is not realizable: integral {g_integral:.6g} > 1")
    total = g_integral + 0.5 * np.trapezoid(h, u)
    if abs(total - 1.0) > tol:
        raise SignatureError(f"slack integral mismatch: total mass {total:.10g}, need 1")
    dens = GridDensity(*_branch_density(u, g, h))
    return GridDensity(dens.nodes, dens.values / dens.total_mass())
