"""Signed-moment estimation from grouped repeated-call counts.

Each example i is queried ``J`` times and only the number of correct calls
``C_i ~ Bin(J, Q_i)`` is kept.  Falling-factorial moments of the counts are
unbiased for the raw moments ``E Q^l`` (l <= J), which in turn give the
signed moments ``s_0..s_L`` with ``L = floor((J-1)/2)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr
from scipy.special import gammaln

from .kernel import log_binom
from .laws import DiscreteLaw
from .signature import MomentPrefix, SignedSignature

EXACT_FACTORIAL_MAX_J = 60


class CountsError(ValueError):
    """Malformed grouped-count input."""


@dataclass(frozen=True, eq=False)
class GroupedSample:
    depth: int
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.size == 0:
            raise CountsError("grouped sample is empty")
        if not np.issubdtype(c.dtype, np.integer):
            if not np.all(np.equal(np.mod(c, 1), 0)):
                raise CountsError("counts must be integers")
            c = c.astype(np.int64)
        if self.depth < 1:
            raise CountsError("repeat depth must be >= 1")
        if c.min() < 0 or c.max() > self.depth:
            raise CountsError(f"counts must lie in [0, {self.depth}]; saw {c.min()}..{c.max()}")
        object.__setattr__(self, "counts", c.ravel())

    @property
    def n_examples(self) -> int:
        return int(self.counts.size)

    def histogram(self) -> np.ndarray:
        return np.bincount(self.counts, minlength=self.depth + 1)


def _falling_ratio_table(J: int) -> np.ndarray:
    """``T[c, l] = (c)_l / (J)_l`` for c, l in 0..J."""
    T = np.zeros((J + 1, J + 1))
    if J <= EXACT_FACTORIAL_MAX_J:
        for l in range(J + 1):
            den = math.perm(J, l)
            for c in range(l, J + 1):
                T[c, l] = math.perm(c, l) / den
        return T
    c = np.arange(J + 1, dtype=float)[:, None]
    l = np.arange(J + 1, dtype=float)[None, :]
    valid = c >= l
    logT = gammaln(c + 1) - gammaln(np.where(valid, c - l, 0) + 1) - gammaln(J + 1) + gammaln(J - l + 1)
    T[valid] = np.exp(logT[valid])
    return T


def factorial_moment(sample: GroupedSample, l: int) -> float:
    """``a_l = mean (C_i)_l / (J)_l``, unbiased for ``E Q^l``."""
    if not 0 <= l <= sample.depth:
        raise ValueError(f"factorial moment order {l} outside [0, {sample.depth}]")
    if l == 0:
        return 1.0
    T = _falling_ratio_table(sample.depth)
    return float(np.dot(sample.histogram(), T[:, l]) / sample.n_examples)


def prefix_length(J: int) -> int:
    """Number of identified signed moments at depth ``J``: ``floor((J-1)/2) + 1``."""
    return (J - 1) // 2 + 1


def _signed_transform(J: int) -> np.ndarray:
    """Matrix ``A[c, k]``: per-example transformed value of count c for ``s_k``."""
    T = _falling_ratio_table(J)
    L = prefix_length(J)
    A = np.zeros((J + 1, L))
    for k in range(L):
        for l in range(k + 1):
            A[:, k] += (-1) ** l * math.comb(k, l) * (2.0 * T[:, k + l + 1] - T[:, k + l])
    return A


def signed_prefix(sample: GroupedSample) -> MomentPrefix:
    """Unbiased estimates of ``s_0..s_L`` with the covariance of their mean.

    The covariance is the sample covariance (N-1 denominator) of the
    per-example transformed count vector, divided by N.
    """
    J, N = sample.depth, sample.n_examples
    A = _signed_transform(J)
    hist = sample.histogram().astype(float)
    s = hist @ A / N
    if N > 1:
        d = A - s[None, :]
        cov = (d.T * hist) @ d / (N - 1) / N
    else:
        cov = np.zeros((A.shape[1], A.shape[1]))
    return MomentPrefix(s=s, covariance=0.5 * (cov + cov.T), depth=J, n_examples=N)


def exact_prefix(pmf) -> np.ndarray:
    """Signed moments implied by an exact count distribution over 0..J."""
    pmf = np.asarray(pmf, dtype=float)
    return pmf @ _signed_transform(pmf.size - 1)


def prefix_to_increments(prefix: MomentPrefix | np.ndarray):
    """``[(k, V_k - V_{k-1})]`` with ``V_k - V_{k-1} = C(2k-1, k) s_k``."""
    s = prefix.s if isinstance(prefix, MomentPrefix) else np.asarray(prefix, dtype=float)
    if s.size < 2:
        raise ValueError("need at least s_0 and s_1")
    return [(k, math.comb(2 * k - 1, k) * float(s[k])) for k in range(1, s.size)]


def plugin_signature(sample: GroupedSample) -> SignedSignature:
    """Empirical signed pushforward of ``q_i = C_i / J``."""
    J = sample.depth
    hist = sample.histogram()
    c = np.nonzero(hist)[0]
    # r computed from integers so that c and J - c land on the same radius
    r = c * (J - c) / float(J * J)
    w = hist[c] / sample.n_examples * (2.0 * c - J) / J
    return SignedSignature(r, w)


def plugin_error_bound(phi_sup: float, phi_lip: float, N: int, J: int) -> float:
    """Bound on the expected error of a Lipschitz test-function integral under the plug-in measure."""
    return phi_sup / math.sqrt(N) + (2.0 * phi_sup + phi_lip) / (2.0 * math.sqrt(J))


# --- nonidentification ---------------------------------------------------------------------


def count_pmf(law: DiscreteLaw, J: int) -> np.ndarray:
    """Distribution of ``C ~ Bin(J, Q)`` under a discrete latent law."""
    c = np.arange(J + 1, dtype=float)[:, None]
    q = law.q[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = log_binom(J, c) + c * np.log(q) + (J - c) * np.log1p(-q)
    p = np.exp(np.nan_to_num(logp, nan=-np.inf))
    p = np.where((q == 0) & (c == 0), 1.0, p)
    p = np.where((q == 1) & (c == J), 1.0, p)
    return p @ law.weights


def support_points(J: int) -> np.ndarray:
    """``J + 2`` Chebyshev points on [0.05, 0.9], deliberately not mirror-symmetric about 1/2."""
    # a grid symmetric about 1/2 gives a nullspace vector whose signed pushforward cancels
    i = np.arange(J + 2)
    lo, hi = 0.05, 0.9
    return 0.5 * (lo + hi) - 0.5 * (hi - lo) * np.cos((2 * i + 1) * np.pi / (2 * (J + 2)))


def nonident_pair(J: int, min_weight: float = 0.01):
    """Two latent laws with identical ``Bin(J, Q)`` count laws but different signatures.

    Returns ``(law_1, law_2, k_witness)`` where the signed moments first
    beyond the identified prefix, ``s_{k_witness}``, differ.
    """
    if J < 1:
        raise ValueError("repeat depth must be >= 1")
    x = support_points(J)
    V = np.vander(x, J + 1, increasing=True).T  # rows: x^0..x^J
    Qm, _ = qr(V.T, mode="full")
    alpha = Qm[:, -1]
    resid = np.abs(V @ alpha).max()
    if resid > 1e-10:
        raise ArithmeticError(f"nullspace residual {resid:.3g} at support points {x.tolist()}")
    k = J // 2 + 1
    h = (2 * x - 1) * (x * (1 - x)) ** k
    if alpha @ h < 0:
        alpha = -alpha
    base = 1.0 / (J + 2)
    floor = min(min_weight, 0.5 * base)
    eps = 0.5 * (base - floor) / np.abs(alpha).max()
    w1 = base + eps * alpha
    w2 = base - eps * alpha
    # remove the rounding drift from the weight sum
    w1, w2 = w1 / w1.sum(), w2 / w2.sum()
    law1, law2 = DiscreteLaw(x, w1), DiscreteLaw(x, w2)
    if abs(alpha @ h) < 1e-8 * np.abs(alpha * h).sum():
        raise ArithmeticError(f"signed-moment difference lost to cancellation at support points {x.tolist()}")
    return law1, law2, k


# --- counts CSV ----------------------------------------------------------------------------


def read_counts_csv(path, depth: int) -> GroupedSample:
    """Read ``example_id,count`` rows; blank lines are skipped, bad rows raise."""
    counts = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header_seen = False
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if not header_seen:
                header_seen = True
                if [c.strip() for c in row] == ["example_id", "count"]:
                    continue
                raise CountsError(f"{path}:{lineno}: expected header 'example_id,count'")
            if len(row) != 2:
                raise CountsError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                c = int(row[1])
            except ValueError:
                raise CountsError(f"{path}:{lineno}: count {row[1]!r} is not an integer") from None
            if not 0 <= c <= depth:
                raise CountsError(f"{path}:{lineno}: count {c} outside [0, {depth}] for depth {depth}")
            counts.append(c)
    if not counts:
        raise CountsError(f"{path}: no count rows")
    return GroupedSample(depth, np.array(counts, dtype=np.int64))


def write_counts_csv(path_or_fh, sample: GroupedSample):
    own = isinstance(path_or_fh, (str, bytes)) or hasattr(path_or_fh, "__fspath__")
    fh = open(path_or_fh, "w", newline="") if own else path_or_fh
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["example_id", "count"])
        for i, c in enumerate(sample.counts.tolist()):
            w.writerow([i, c])
    finally:
        if own:
            fh.close()
