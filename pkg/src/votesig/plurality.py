"""Multiclass plurality voting with uniform tie-breaking.

Class 0 is the correct answer.  ``A_{m,K}(p)`` is the probability that the
correct class wins a plurality vote over ``m`` iid categorical calls, with
ties among the top classes broken uniformly at random.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .laws import DiscreteLaw, GridDensity, HybridLaw, Law
from ._quad import composite_rule

MAX_STATES = 10**7
MC_BLOCK = 1 << 16


class StateSpaceTooLarge(ValueError):
    pass


def _check_p(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise ValueError("need a categorical vector with at least 2 classes")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError(f"categorical vector must be nonnegative and sum to 1, got {p.tolist()}")
    return p


def n_states(m: int, K: int) -> int:
    return math.comb(m + K - 1, K - 1)


def _compositions(m: int, K: int) -> np.ndarray:
    """All count vectors of length K summing to m, as rows."""
    if K == 1:
        return np.array([[m]], dtype=np.int64)
    blocks = []
    for first in range(m + 1):
        rest = _compositions(m - first, K - 1)
        blocks.append(np.column_stack([np.full(len(rest), first, dtype=np.int64), rest]))
    return np.vstack(blocks)


def _win_share(counts: np.ndarray) -> np.ndarray:
    top = counts.max(axis=1)
    ties = (counts == top[:, None]).sum(axis=1)
    return (counts[:, 0] == top) / ties


def plurality_accuracy(p, m: int) -> float:
    """Exact ``A_{m,K}(p)`` by enumerating every multinomial outcome."""
    p = _check_p(p)
    if m < 1:
        raise ValueError("vote budget m must be >= 1")
    # classes with zero probability are never sampled
    p = np.concatenate([p[:1], p[1:][p[1:] > 0]])
    K = p.size
    if n_states(m, K) > MAX_STATES:
        raise StateSpaceTooLarge(
            f"{n_states(m, K)} multinomial states for m={m}, K={K}; use Monte Carlo mode"
        )
    if K == 1:
        return 1.0
    counts = _compositions(m, K)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = np.log(p)
        logp_term = np.where(counts > 0, counts * logp[None, :], 0.0)
    logpmf = gammaln(m + 1) - gammaln(counts + 1).sum(axis=1) + logp_term.sum(axis=1)
    return float(np.dot(np.exp(logpmf), _win_share(counts)))


def plurality_accuracy_mc(p, m: int, reps: int, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate of ``A_{m,K}(p)`` and its standard error."""
    p = _check_p(p)
    ss = np.random.SeedSequence(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    for b, child in enumerate(ss.spawn((reps + MC_BLOCK - 1) // MC_BLOCK)):
        size = min(MC_BLOCK, reps - done)
        rng = np.random.Generator(np.random.Philox(child))
        share = _win_share(rng.multinomial(m, p, size=size))
        total += share.sum()
        total_sq += (share * share).sum()
        done += size
    mean = total / reps
    var = max(total_sq / reps - mean * mean, 0.0) * reps / max(reps - 1, 1)
    return mean, math.sqrt(var / reps)


def plurality_endpoint(p) -> float:
    """``lim_m A_{m,K}(p)``: 1{p_0 is maximal} / (number of maximal classes)."""
    p = _check_p(p)
    top = p.max()
    ties = int(np.sum(p == top))
    return (1.0 if p[0] == top else 0.0) / ties


def q_not_enough_witness(q: float, K: int = 3):
    """Three-vote accuracies of a concentrated and a diffuse wrong-answer split with the same ``p_0``.

    Returns ``(A_conc, A_diff, (endpoint_conc, endpoint_diff))``.
    """
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    if K < 3:
        raise ValueError("need K >= 3")
    pad = [0.0] * (K - 3)
    conc = [q, 1 - q, 0.0] + pad
    diff = [q, (1 - q) / 2, (1 - q) / 2] + pad
    return (plurality_accuracy(conc, 3), plurality_accuracy(diff, 3),
            (plurality_endpoint(conc), plurality_endpoint(diff)))


def symmetric_wrong_vector(q: float, K: int) -> np.ndarray:
    return np.array([q] + [(1 - q) / (K - 1)] * (K - 1))


def symmetric_wrong_accuracy(q, m: int, K: int):
    q_arr = np.atleast_1d(np.asarray(q, dtype=float))
    out = np.array([plurality_accuracy(symmetric_wrong_vector(x, K), m) for x in q_arr])
    return out.reshape(np.shape(q)) if np.ndim(q) else float(out[0])


def symmetric_wrong_endpoint(q: float, K: int) -> float:
    if q > 1 / K:
        return 1.0
    if q == 1 / K:
        return 1 / K
    return 0.0


def symmetric_wrong_curve(law: Law, K: int, m_list) -> list[float]:
    """``V^sym_{m,K} = E A^sym_{m,K}(Q)`` for every m in ``m_list``."""
    if K < 2:
        raise ValueError("need K >= 2")
    return [_expect_sym(law, K, int(m)) for m in m_list]


def _expect_sym(law: Law, K: int, m: int) -> float:
    if isinstance(law, DiscreteLaw):
        return float(np.dot(law.weights, symmetric_wrong_accuracy(law.q, m, K)))
    if isinstance(law, GridDensity):
        # A^sym is a degree-m polynomial in q; the density is linear per panel
        order = max(4, m // 2 + 2)
        x, w = composite_rule(law.nodes, order=order)
        return float(np.dot(w, symmetric_wrong_accuracy(x, m, K) * law(x)))
    if isinstance(law, HybridLaw):
        a = law.discrete_weight
        return a * _expect_sym(law.discrete, K, m) + (1 - a) * _expect_sym(law.density, K, m)
    raise TypeError(f"not a latent law: {type(law).__name__}")
