"""Variation and endpoint bounds, shape classification, and the oscillation check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma, logsumexp

from .kernel import log_binom
from .laws import Law, make_named, oscillation_atoms, upper_mass
from .signature import SignedSignature, curve_direct, pushforward

SIGN_TOL = 1e-12
SERIES_CUTOFF_NATS = 80.0
OSCILLATION_J_CAP = 14
EPS = np.finfo(float).eps


class PrecisionExhausted(ArithmeticError):
    """Double precision cannot certify the requested sign."""


@dataclass(frozen=True)
class MarginCondition:
    C: float
    kappa: float
    t0: float

    def __post_init__(self):
        if not (self.C > 0 and self.kappa > 0 and 0 < self.t0 <= 0.5):
            raise ValueError(f"invalid margin condition: {self}")


# --- finite-budget variation ---------------------------------------------------------------


def variation_bound(sig_tv: float, n: int, m: int) -> tuple[float, float]:
    """Distribution-free bounds on ``|V_m - V_n|``.

    Returns ``(sum_form, closed_form)``: the telescoped kernel sum and its
    ``(sqrt(m) - sqrt(n)) / sqrt(pi)`` relaxation, both clamped at 1.
    """
    if not 0 <= n < m:
        raise ValueError("need 0 <= n < m")
    if not 0 <= sig_tv <= 1 + 1e-12:
        raise ValueError("total variation of a voting signature lies in [0, 1]")
    k = np.arange(n, m, dtype=float)
    terms = np.exp(log_binom(2 * k + 1, k + 1) - (k + 1) * math.log(4.0))
    total = float(math.fsum(terms))
    sum_form = min(1.0, sig_tv * total)
    closed = min(1.0, sig_tv * (math.sqrt(m) - math.sqrt(n)) / math.sqrt(math.pi))
    return sum_form, closed


def near_zero_bound(sig_tv: float, a: float, n: int) -> float:
    """Exponential bound on ``|V_m - V_n|`` (any m > n, or m = inf) when supp(omega) is in [0, a]."""
    if not 0 < a < 0.25:
        raise ValueError("support radius a must lie in (0, 1/4)")
    return 2.0 * a / (1.0 - 4.0 * a) * sig_tv * (4.0 * a) ** n


# --- endpoint bridges ----------------------------------------------------------------------


def bridge_bound(cond: MarginCondition, n: int) -> float:
    """``|V_n - V_inf|`` bound under ``Pi(|Q-1/2| <= t) <= C t^kappa`` for t < t0."""
    M = 2 * n + 1
    return math.exp(-2.0 * M * cond.t0**2) + cond.C * gamma(1.0 + cond.kappa / 2.0) * (2.0 * M) ** (-cond.kappa / 2.0)


def gap_bridge_bound(delta: float, n: int) -> float:
    """Bound when no latent mass lies within ``delta`` of 1/2."""
    return math.exp(-2.0 * (2 * n + 1) * delta**2)


def density_bridge_bound(B: float, n: int) -> float:
    """Bound when Q has a density bounded by ``B``."""
    M = 2 * n + 1
    return math.exp(-M / 2.0) + B * math.sqrt(math.pi / (2.0 * M))


def signature_support_radius(sig: SignedSignature) -> float:
    """Largest radius carrying signature mass."""
    top = float(sig.atom_r.max()) if sig.atom_r.size else 0.0
    if sig.has_density:
        nz = np.nonzero(sig.g_values)[0]
        if nz.size:
            # piecewise-linear support reaches the next node toward r = 1/4
            lo = max(nz.min() - 1, 0)
            top = max(top, 0.25 * (1.0 - sig.g_u[lo] ** 2))
    return top


# --- rate sharpness ------------------------------------------------------------------------


@dataclass
class ProbeResult:
    slope: float
    votes: np.ndarray
    gaps: np.ndarray
    used: np.ndarray
    polynomial: bool
    meta: dict = field(default_factory=dict)


def _fit_block(votes, gaps, floor):
    ok = gaps > floor
    # largest contiguous block above the noise floor
    best, start = (0, 0), None
    for i, flag in enumerate(list(ok) + [False]):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    return np.arange(best[0], best[1])


def rate_sharpness_probe(cond: MarginCondition, n_list, law: Law | None = None,
                         floor: float = 1e-12) -> ProbeResult:
    """Least-squares slope of ``log |V_n - V_inf|`` against ``log M``.

    With no ``law`` the worst-case margin construction for ``cond`` is used.
    ``polynomial`` is False when the local slopes keep steepening, which is
    the signature of faster-than-polynomial decay.
    """
    n_arr = np.asarray(sorted(set(int(n) for n in n_list)))
    votes = 2 * n_arr + 1
    if votes.max() < 100 * votes.min():
        raise ValueError("budgets must span at least two decades of M")
    if law is None:
        law = make_named("margin_worst_case", C=cond.C, kappa=cond.kappa, t0=cond.t0)
    v_inf = upper_mass(law)
    gaps = np.abs(curve_direct(law, n_arr) - v_inf)
    idx = _fit_block(votes, gaps, floor)
    if idx.size < 3:
        raise ValueError(f"degenerate fit: only {idx.size} budgets with gap above {floor:g}")
    x, y = np.log(votes[idx]), np.log(gaps[idx])
    slope = float(np.polyfit(x, y, 1)[0])
    local = np.diff(y) / np.diff(x)
    polynomial = bool(local[-1] > local[0] - 1.0)
    meta = {"smallest_usable_M": int(votes[idx[0]]), "largest_usable_M": int(votes[idx[-1]]),
            "expected_slope": -cond.kappa / 2.0, "local_slopes": local.tolist()}
    return ProbeResult(slope, votes, gaps, idx, polynomial, meta)


# --- shape ---------------------------------------------------------------------------------


def classify_shape(sig: SignedSignature, tol: float = SIGN_TOL) -> str:
    """``monotone_up`` if omega >= 0, ``monotone_down`` if omega <= 0, else ``mixed``."""
    w = np.concatenate([sig.atom_w, sig.g_values if sig.has_density else []])
    if w.size == 0 or np.all(np.abs(w) <= tol):
        return "monotone_up"
    if np.all(w >= -tol):
        return "monotone_up"
    if np.all(w <= tol):
        return "monotone_down"
    return "mixed"


# --- oscillation ---------------------------------------------------------------------------


def _series_sign(k: float):
    """Sign of ``sum_{l>=1} (-1)^l exp(-l^2 - k 2^{-l})`` and the dominance ratio."""
    phis = [1.0 + k / 2.0]
    ell = 1
    # phi is convex in l: once it rises past the cutoff it never returns
    while not (phis[-1] - min(phis) > SERIES_CUTOFF_NATS and len(phis) > 1 and phis[-1] > phis[-2]):
        ell += 1
        phis.append(ell * ell + k * 2.0 ** (-ell))
    phis = np.array(phis)
    lead = int(np.argmin(phis))
    rest = np.delete(phis, lead) - phis[lead]
    rest = rest[rest <= SERIES_CUTOFF_NATS]
    ratio = float(np.exp(logsumexp(-rest))) if rest.size else 0.0
    sign = 1 if (lead + 1) % 2 == 0 else -1
    return sign, ratio, lead + 1


def _moment_sign(r_log, weights, k):
    """Sign of ``sum_i w_i r_i^k`` evaluated with the largest term factored out."""
    logs = np.log(np.abs(weights)) + k * r_log
    top = logs.max()
    return float(np.sign(np.dot(np.sign(weights), np.exp(logs - top))))


def oscillation_signs(j_max: int):
    """Signs of the oscillating law's signed moments at ``k_j = 3 j 2^j`` for j = 2..j_max.

    Returns a list of ``(j, k_j, sign)``.  Each sign is certified by a
    dominant-term argument in log space and cross-checked against the
    signed moment of the truncated law's atoms.
    """
    if not 2 <= j_max <= OSCILLATION_J_CAP:
        raise ValueError(f"j_max must lie in [2, {OSCILLATION_J_CAP}]")
    jj, r, _, raw = oscillation_atoms(j_max + 2)
    w = raw / raw.sum() * np.where(jj % 2 == 0, 1.0, -1.0) * np.sqrt(-np.expm1(-(2.0 ** -jj.astype(float))))
    # log r_j exactly, rather than through q(1-q)
    r_log = math.log(0.25) - 2.0 ** -jj.astype(float)
    out = []
    for j in range(2, j_max + 1):
        k = 3 * j * 2**j
        sign, ratio, lead = _series_sign(k)
        margin = 1.0 - ratio
        if margin < 1e3 * EPS * (j * j + 3 * j):
            raise PrecisionExhausted(f"j={j}: dominance margin {margin:.3g} is at the round-off level")
        if _moment_sign(r_log, w, k) != sign:
            raise PrecisionExhausted(f"j={j}: series sign and moment sign disagree")
        out.append((j, k, sign))
    return out


def increment_signs(sig: SignedSignature, n_max: int) -> np.ndarray:
    """Signs of ``V_{n} - V_{n-1}`` for n = 1..n_max, from atom moments in log space."""
    if sig.has_density:
        raise ValueError("increment_signs works on atomic signatures")
    with np.errstate(divide="ignore"):
        r_log = np.log(sig.atom_r)
    return np.array([_moment_sign(r_log, sig.atom_w, k) for k in range(1, n_max + 1)])


def oscillation_sign_changes(j_lo: int = 2, j_hi: int = 8, j_max: int = 10):
    """For each consecutive pair ``k_j, k_{j+1}``, whether the full increment sequence flips sign between them."""
    sig = pushforward(make_named("oscillation", j_max=j_max))
    k = [3 * j * 2**j for j in range(j_lo, j_hi + 1)]
    signs = increment_signs(sig, k[-1])
    result = []
    for a, b in zip(k[:-1], k[1:]):
        seg = signs[a - 1:b]
        result.append((a, b, bool(np.any(seg[1:] != seg[:-1]))))
    return result
