"""Composite Gauss-Legendre rules on explicit breakpoints."""

from __future__ import annotations

import numpy as np

GL_ORDER = 16

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl(order):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def composite_rule(breaks, order=GL_ORDER):
    """Nodes and weights of a Gauss-Legendre rule on every panel of ``breaks``."""
    b = np.unique(np.asarray(breaks, dtype=float))
    lo, hi = b[:-1], b[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    x, w = _gl(order)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def refine_near(center, scale, lo=0.0, hi=1.0, reach=14.0, per_scale=4):
    """Extra breakpoints of spacing ``scale/per_scale`` within ``reach*scale`` of ``center``."""
    if scale <= 0:
        return np.array([])
    step = scale / per_scale
    count = int(np.ceil(reach * per_scale))
    pts = center + step * np.arange(-count, count + 1)
    return pts[(pts > lo) & (pts < hi)]


def budget_scale(n):
    """Width of the transition region of ``P_n`` around q = 1/2."""
    return 1.0 / np.sqrt(2 * n + 1)
