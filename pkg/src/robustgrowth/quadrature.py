"""Composite Gauss-Legendre quadrature on truncated boxes.

Panels are explicit edge arrays, so callers can grade them toward short-scale
features (graded_edges), spread them geometrically over fat polynomial tails,
or place them uniformly in log space for positive coordinates (log_edges).
All integrand callables are vectorized: they take points of shape (..., k)
for tensor rules, or plain (...,) arrays for one-dimensional rules.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss


def panel_nodes(edges, nodes_per_panel: int = 8):
    """Nodes and weights of composite Gauss-Legendre quadrature on [edges[0], edges[-1]].

    edges must be strictly increasing; each consecutive pair bounds one panel.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError("edges must be a 1-D array with at least two entries")
    if np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be strictly increasing")
    ref_x, ref_w = leggauss(nodes_per_panel)
    lo = edges[:-1][:, None]
    hi = edges[1:][:, None]
    half = 0.5 * (hi - lo)
    x = (0.5 * (hi + lo) + half * ref_x[None, :]).ravel()
    w = (half * ref_w[None, :]).ravel()
    return x, w


def refine_edges(edges):
    """Insert panel midpoints (doubles the panel count)."""
    edges = np.asarray(edges, dtype=float)
    mids = 0.5 * (edges[:-1] + edges[1:])
    out = np.empty(edges.size + mids.size)
    out[0::2] = edges
    out[1::2] = mids
    return out


def uniform_edges(lo: float, hi: float, n_panels: int):
    return np.linspace(lo, hi, n_panels + 1)


def graded_edges(lo: float, hi: float, n_panels_side: int, growth: float = 1.25,
                 center: float = 0.0):
    """Edges symmetric-ish about `center`, panel widths growing geometrically outward.

    Useful for integrands with a short central scale and slow polynomial tails.
    """
    if not (lo < center < hi):
        raise ValueError("center must lie strictly inside (lo, hi)")
    ratios = growth ** np.arange(n_panels_side)
    cum = np.concatenate([[0.0], np.cumsum(ratios)]) / np.sum(ratios)
    right = center + (hi - center) * cum
    left = center - (center - lo) * cum
    return np.concatenate([left[::-1][:-1], right])


def log_edges(lo: float, hi: float, n_panels: int):
    """Geometric edges for positive coordinates (uniform in log space)."""
    if lo <= 0 or hi <= lo:
        raise ValueError("log_edges needs 0 < lo < hi")
    return np.geomspace(lo, hi, n_panels + 1)


def integrate_1d(fn, edges, nodes_per_panel: int = 8) -> float:
    x, w = panel_nodes(edges, nodes_per_panel)
    return float(np.sum(w * np.asarray(fn(x), dtype=float)))


def integrate_box(fn, axes_edges, nodes_per_panel: int = 8) -> float:
    """Tensor-product composite Gauss-Legendre integral over a box.

    axes_edges: one edge array per coordinate; fn takes points (..., k).
    """
    nodes, weights = [], []
    for edges in axes_edges:
        x, w = panel_nodes(edges, nodes_per_panel)
        nodes.append(x)
        weights.append(w)
    mesh = np.meshgrid(*nodes, indexing="ij")
    pts = np.stack(mesh, axis=-1)
    vals = np.asarray(fn(pts), dtype=float)
    wtot = weights[0]
    for w in weights[1:]:
        wtot = np.multiply.outer(wtot, w)
    return float(np.sum(vals * wtot))


def integrate_box_refined(fn, axes_edges, nodes_per_panel: int = 8):
    """Integral plus a doubled-panel estimate, for convergence diagnostics."""
    coarse = integrate_box(fn, axes_edges, nodes_per_panel)
    fine = integrate_box(fn, [refine_edges(e) for e in axes_edges], nodes_per_panel)
    return fine, abs(fine - coarse)
