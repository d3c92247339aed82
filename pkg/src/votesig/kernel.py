"""Fixed-q binomial majority kernel.

``P_n(q)`` is the probability that a strict majority of ``2n+1`` iid
Bernoulli(q) votes is correct.  Everything here is vectorized over ``q``;
the budget index ``n`` is a plain integer.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import betainc, gammaln

# Direct tail summation is used up to this budget index, incomplete beta above.
DIRECT_MAX_N = 64

# Below this value of 1 - 4r, psi_n switches to its series about r = 1/4.
PSI_SERIES_CUTOFF = 1e-8


def log_binom(n, k):
    """log C(n, k) via log-gamma; never forms factorials."""
    return gammaln(np.add(n, 1.0)) - gammaln(np.add(k, 1.0)) - gammaln(np.subtract(n, k) + 1.0)


def binom(n, k):
    return np.exp(log_binom(n, k))


def _as_q(q):
    q = np.asarray(q, dtype=float)
    if np.any((q < 0.0) | (q > 1.0)):
        raise ValueError("q must lie in [0, 1]")
    return q


def _log_q_terms(q):
    with np.errstate(divide="ignore"):
        return np.log(q), np.log1p(-q)


def _tail_direct(q, total, start):
    """P{Bin(total, q) >= start} by summing pmf terms."""
    lq, lp = _log_q_terms(q)
    p = 1.0 - q
    out = np.zeros_like(q)
    for j in range(start, total + 1):
        # exact integer coefficient and pow() keep each term within a few ulp;
        # exp of a log near -90 would cost ~1e-14 relative
        linear = float(math.comb(total, j)) * (np.power(q, j) * np.power(p, total - j))
        with np.errstate(invalid="ignore"):
            # 0 * -inf -> nan at the endpoints; those terms are handled below
            log_term = log_binom(total, j) + j * lq + (total - j) * lp
        out += np.where(linear > 1e-280, linear, np.exp(np.nan_to_num(log_term, nan=-np.inf)))
    # pmf mass at the endpoints q in {0, 1} is exact
    out = np.where(q == 0.0, 0.0 if start > 0 else 1.0, out)
    out = np.where(q == 1.0, 1.0, out)
    return out


def _majority_direct(q, n):
    # sum only the small tail: above 1/2 use P_n(q) = 1 - P_n(1 - q)
    upper = q > 0.5
    tail = _tail_direct(np.where(upper, 1.0 - q, q), 2 * n + 1, n + 1)
    return np.where(upper, 1.0 - tail, tail)


def _majority_beta(q, n):
    # P{Bin(2n+1, q) >= n+1} = I_q(n+1, n+1).  The upper half is computed by
    # reflection so that P_n(q) + P_n(1-q) = 1 holds to rounding.
    lower = q <= 0.5
    out = np.empty_like(q)
    out[lower] = betainc(n + 1.0, n + 1.0, q[lower])
    out[~lower] = 1.0 - betainc(n + 1.0, n + 1.0, 1.0 - q[~lower])
    return out


def majority_accuracy(q, n: int, method: str = "auto"):
    """Odd-budget majority accuracy ``P_n(q) = P{Bin(2n+1, q) >= n+1}``.

    Parameters
    ----------
    q : float or array_like
        Per-call correctness probability, in [0, 1].
    n : int
        Budget index; the vote budget is ``2n+1``.
    method : {"auto", "direct", "beta"}
        ``auto`` sums the tail directly for ``n <= 64`` and uses the
        regularized incomplete beta function ``I_q(n+1, n+1)`` above.
    """
    if n < 0:
        raise ValueError("budget index n must be nonnegative")
    qa = np.atleast_1d(_as_q(q)).astype(float)
    if method == "auto":
        method = "direct" if n <= DIRECT_MAX_N else "beta"
    if n == 0:
        out = qa.copy()
    elif method == "direct":
        out = _majority_direct(qa, n)
    elif method == "beta":
        out = _majority_beta(qa, n)
    else:
        raise ValueError(f"unknown method {method!r}")
    # symmetry fixes P_n(1/2) = 1/2 exactly; the tail sums only reach it to rounding
    out = np.where(qa == 0.5, 0.5, np.clip(out, 0.0, 1.0))
    return out.reshape(np.shape(q)) if np.ndim(q) else float(out[0])


def majority_increment(q, n: int):
    """``P_{n+1}(q) - P_n(q) = C(2n+1, n+1) (q(1-q))^{n+1} (2q-1)``."""
    q = _as_q(q)
    r = q * (1.0 - q)
    with np.errstate(divide="ignore"):
        mag = np.exp(log_binom(2 * n + 1, n + 1) + (n + 1) * np.log(r))
    out = mag * (2.0 * q - 1.0)
    return float(out) if np.ndim(out) == 0 else out


def even_majority_accuracy(q, n: int):
    """Fair-tie accuracy with ``2n`` votes: ``P{Bin(2n,q) > n} + P{Bin(2n,q) = n}/2``."""
    if n < 1:
        raise ValueError("even budget index must be >= 1")
    qa = np.atleast_1d(_as_q(q)).astype(float)
    if n <= DIRECT_MAX_N:
        # P{Bin(2n,q) > n} = 1 - P{Bin(2n,1-q) >= n}
        upper = qa > 0.5
        strict = qa.copy()
        strict[upper] = 1.0 - _tail_direct(1.0 - qa[upper], 2 * n, n)
        strict[~upper] = _tail_direct(qa[~upper], 2 * n, n + 1)
    else:
        strict = betainc(n + 1.0, float(n), qa)
    lq, lp = _log_q_terms(qa)
    with np.errstate(invalid="ignore"):
        tie = np.exp(np.nan_to_num(log_binom(2 * n, n) + n * (lq + lp), nan=-np.inf))
    out = np.where(qa == 0.5, 0.5, strict + 0.5 * tie)
    return out.reshape(np.shape(q)) if np.ndim(q) else float(out[0])


def kernel_derivative(q, n: int):
    """``P_n'(q) = (2n+1) C(2n, n) (q(1-q))^n``."""
    q = _as_q(q)
    if n == 0:
        out = np.ones_like(q, dtype=float)
    else:
        r = q * (1.0 - q)
        with np.errstate(divide="ignore"):
            out = np.exp(np.log(2 * n + 1) + log_binom(2 * n, n) + n * np.log(r))
    return float(out) if np.ndim(out) == 0 else out


def branch_points(r):
    """Upper and lower roots of ``q(1-q) = r``, returned as ``(q_plus, q_minus)``."""
    r = np.asarray(r, dtype=float)
    u = np.sqrt(np.maximum(1.0 - 4.0 * r, 0.0))
    qp, qm = 0.5 * (1.0 + u), 0.5 * (1.0 - u)
    if qp.ndim == 0:
        return float(qp), float(qm)
    return qp, qm


def _psi_series(x, n: int):
    # psi_n = (c/x) * int_0^x (1/4 - t^2)^n dt with c = (2n+1) C(2n,n)
    #       = c 4^{-n} sum_k C(n,k) (-4x^2)^k / (2k+1)
    lead = np.exp(np.log(2 * n + 1) + log_binom(2 * n, n) - n * np.log(4.0))
    z = -4.0 * x * x
    total = np.ones_like(x)
    coef = np.ones_like(x)
    for k in range(1, n + 1):
        coef = coef * (n - k + 1) / k * z
        term = coef / (2 * k + 1)
        total = total + term
        if np.all(np.abs(term) < 1e-18 * np.abs(total)):
            break
    return lead * total


def psi_kernel(r, n: int):
    """Level-formula kernel ``(2 P_n(q_+(r)) - 1) / sqrt(1 - 4r)``.

    Continuous on [0, 1/4]; the value at ``r = 1/4`` is the removable limit
    ``P_n'(1/2)``.
    """
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    w = np.maximum(1.0 - 4.0 * r_arr, 0.0)
    out = np.empty_like(r_arr)
    near = w < PSI_SERIES_CUTOFF
    if np.any(near):
        out[near] = _psi_series(0.5 * np.sqrt(w[near]), n)
    far = ~near
    if np.any(far):
        u = np.sqrt(w[far])
        out[far] = (2.0 * majority_accuracy(0.5 * (1.0 + u), n) - 1.0) / u
    return out.reshape(np.shape(r)) if np.ndim(r) else float(out[0])
