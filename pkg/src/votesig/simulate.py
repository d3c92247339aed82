"""Exchangeable sampling oracle.

Each example draws a latent ``Q`` from the law and then iid Bernoulli(Q)
votes.  Randomness is counter-based: examples are cut into fixed blocks of
``BLOCK`` ids, and block ``b`` always uses the Philox stream keyed by
``SeedSequence(seed, spawn_key=(b,))``.  Results therefore do not depend on
how many workers process the blocks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .estimation import GroupedSample
from .kernel import majority_accuracy
from .laws import DiscreteLaw, GridDensity, HybridLaw, Law

BLOCK = 1 << 16
RNG_ALGORITHM = "numpy.Philox4x64-10; SeedSequence(seed, spawn_key=(block,)); block=65536"


@dataclass(frozen=True)
class SimConfig:
    seed: int
    n_examples: int
    repeat_depth: int = 1
    workers: int = 1

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.n_examples < 1 or self.repeat_depth < 1:
            raise ValueError("n_examples and repeat_depth must be >= 1")


@dataclass
class MCCurve:
    values: np.ndarray
    stderr: np.ndarray
    rb_values: np.ndarray
    rb_stderr: np.ndarray
    n_examples: int
    seed: int
    meta: dict = field(default_factory=lambda: {"rng": RNG_ALGORITHM})


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _blocks(n: int):
    return [(b, b * BLOCK, min(n, (b + 1) * BLOCK)) for b in range((n + BLOCK - 1) // BLOCK)]


def _map_blocks(cfg: SimConfig, fn):
    blocks = _blocks(cfg.n_examples)
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            return list(pool.map(lambda blk: fn(*blk), blocks))
    return [fn(*blk) for blk in blocks]


# --- inverse CDFs ------------------------------------------------------------------------


def _discrete_icdf(law: DiscreteLaw, u):
    cum = np.cumsum(law.weights)
    idx = np.searchsorted(cum, u * cum[-1], side="right")
    return law.q[np.minimum(idx, law.q.size - 1)]


def _density_icdf(f: GridDensity, u):
    x, v = f.nodes, f.values
    h = np.diff(x)
    F = np.concatenate([[0.0], np.cumsum(0.5 * h * (v[:-1] + v[1:]))])
    target = u * F[-1]
    i = np.clip(np.searchsorted(F, target, side="right") - 1, 0, h.size - 1)
    c = target - F[i]
    a = (v[i + 1] - v[i]) / (2.0 * h[i])
    b = v[i]
    # stable root of a t^2 + b t - c = 0
    disc = np.sqrt(np.maximum(b * b + 4.0 * a * c, 0.0))
    denom = b + disc
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(denom > 0, 2.0 * c / denom, 0.0)
    return np.clip(x[i] + np.clip(t, 0.0, h[i]), 0.0, 1.0)


def latent_icdf(law: Law, u):
    """Map uniforms to latent draws by inverse CDF."""
    u = np.asarray(u, dtype=float)
    if isinstance(law, DiscreteLaw):
        return _discrete_icdf(law, u)
    if isinstance(law, GridDensity):
        return _density_icdf(law, u)
    if isinstance(law, HybridLaw):
        p = law.discrete_weight
        low = u < p
        out = np.empty_like(u)
        out[low] = _discrete_icdf(law.discrete, u[low] / p) if p > 0 else 0.0
        if np.any(~low):
            out[~low] = _density_icdf(law.density, (u[~low] - p) / (1.0 - p))
        return out
    raise TypeError(f"not a latent law: {type(law).__name__}")


# --- simulators --------------------------------------------------------------------------


def sample_latents(law: Law, cfg: SimConfig) -> np.ndarray:
    """``n_examples`` draws of Q; deterministic for a fixed seed."""
    parts = _map_blocks(cfg, lambda b, lo, hi: latent_icdf(law, block_rng(cfg.seed, b).random(hi - lo)))
    return np.concatenate(parts)


def simulate_counts(law: Law, cfg: SimConfig) -> GroupedSample:
    """Per example: draw Q, then ``C ~ Bin(repeat_depth, Q)``."""

    def block(b, lo, hi):
        rng = block_rng(cfg.seed, b)
        q = latent_icdf(law, rng.random(hi - lo))
        return rng.binomial(cfg.repeat_depth, q)

    return GroupedSample(cfg.repeat_depth, np.concatenate(_map_blocks(cfg, block)).astype(np.int64))


def mc_curve(law: Law, n_max: int, cfg: SimConfig) -> MCCurve:
    """Simulated majority accuracy at every odd prefix 1, 3, ..., 2 n_max + 1.

    Also returns the Rao-Blackwellized estimate, the average of ``P_n(Q_i)``
    over the sampled latents.
    """

    def block(b, lo, hi):
        rng = block_rng(cfg.seed, b)
        q = latent_icdf(law, rng.random(hi - lo))
        running = np.zeros(hi - lo, dtype=np.int64)
        hits = np.zeros(n_max + 1)
        for t in range(1, 2 * n_max + 2):
            running += rng.random(hi - lo) < q
            if t % 2 == 1:
                n = t // 2
                hits[n] = np.count_nonzero(running >= n + 1)
        rb = np.array([majority_accuracy(q, n) for n in range(n_max + 1)])
        return hits, rb.sum(axis=1), (rb * rb).sum(axis=1)

    parts = _map_blocks(cfg, block)
    N = cfg.n_examples
    hits = sum(p[0] for p in parts)
    rb_sum = sum(p[1] for p in parts)
    rb_sq = sum(p[2] for p in parts)
    values = hits / N
    # indicator sample variance with the N-1 denominator
    stderr = np.sqrt(values * (1.0 - values) * N / max(N - 1, 1) / N)
    rb_values = rb_sum / N
    rb_var = np.maximum(rb_sq / N - rb_values**2, 0.0) * N / max(N - 1, 1)
    return MCCurve(values, stderr, rb_values, np.sqrt(rb_var / N), N, cfg.seed)


def mc_even_accuracy(law: Law, n: int, cfg: SimConfig) -> tuple[float, float]:
    """Simulated accuracy with ``2n`` votes and a fair coin on ties, with its standard error."""
    if n < 1:
        raise ValueError("even budget index must be >= 1")

    def block(b, lo, hi):
        rng = block_rng(cfg.seed, b)
        q = latent_icdf(law, rng.random(hi - lo))
        votes = rng.binomial(2 * n, q)
        coin = rng.random(hi - lo) < 0.5
        return np.count_nonzero((votes > n) | ((votes == n) & coin))

    N = cfg.n_examples
    p = sum(_map_blocks(cfg, block)) / N
    return p, float(np.sqrt(p * (1 - p) / max(N - 1, 1)))
