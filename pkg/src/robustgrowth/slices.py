"""Numeric verification layer for the optimality structure: the per-slice
solve of the optimizer, growth-rate functionals by direct quadrature, and
the stationarity (Euler-Lagrange) defect

    div_x(c_X (grad_phi - ell_X) p) - div_y(c_Y ell_Y p)

which vanishes exactly at the optimizer.  For a single tradable coordinate
the optimizer restricted to a factor slice y is

    grad_phi_star(x, y) = xi(x, y) = ell_X + u / (c_X p)

with u the cumulative integral of div_y(c_Y ell_Y p) in x; the integration
constant of the divergence-form first integral c_X (grad_phi - xi) p is zero
because the flux must decay at both ends of E.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import quadrature as quad
from .errors import DomainError, UnsupportedDimensionError
from .inputs import (ModelInputs, _density, assemble_xi, div_y_flux, eval_ell,
                     solve_u_1d)


@dataclass
class SliceSolution:
    """Optimizer on one factor slice: grad_phi_star sampled over x_grid, the
    u values used to assemble it, and the max stationarity defect."""

    y: np.ndarray
    x_grid: np.ndarray
    grad_phi_star: np.ndarray
    residual: float
    u: np.ndarray
    ell_x: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        if not (np.all(np.isfinite(self.grad_phi_star))
                and np.isfinite(self.residual)):
            raise DomainError("slice solution contains non-finite values")


def _theta_fn(theta):
    return theta.fn if hasattr(theta, "fn") else theta


def solve_slice(inputs: ModelInputs, u, y, x_grid,
                nodes_per_panel: int = 8,
                fd_step: Optional[float] = None) -> SliceSolution:
    """Optimizer slice for d = 1.  When u is None it is solved numerically by
    cumulative quadrature from the left truncation boundary; a callable u
    (closed form) is sampled instead.  The attached residual is the max
    Euler-Lagrange defect on the interior of the grid, with the difference
    step tied to the grid spacing unless fd_step is given.
    """
    if inputs.domain.d != 1:
        raise UnsupportedDimensionError("solve_slice requires d = 1")
    m = inputs.domain.m
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (m,):
        raise DomainError(f"slice point must have shape ({m},)")
    x_grid = np.asarray(x_grid, dtype=float)
    if x_grid.ndim != 1 or x_grid.size < 3 or np.any(np.diff(x_grid) <= 0):
        raise DomainError("x_grid must be strictly increasing with >= 3 points")

    z = np.concatenate([x_grid[:, None],
                        np.broadcast_to(y, (x_grid.size, m))], axis=-1)
    if callable(u):
        u_vals = np.asarray(u(z), dtype=float)[..., 0]
    elif u is None:
        u_vals = solve_u_1d(inputs, y, x_grid, nodes_per_panel=nodes_per_panel)
    else:
        u_vals = np.asarray(u, dtype=float)
        if u_vals.shape != x_grid.shape:
            raise DomainError("sampled u must match the x_grid shape")

    grad = assemble_xi(inputs, u_vals[:, None], z)[..., 0]
    ell_x, _ = eval_ell(inputs, z)
    pvals = _density(inputs, z)

    h = fd_step if fd_step is not None else float(np.min(np.diff(x_grid)))
    interior = z[1:-1]
    grad_interp = _LinearSliceInterp(x_grid, grad)
    defects = euler_lagrange_residual(inputs, None, grad_interp, interior, h=h,
                                      reduce_max=False)
    return SliceSolution(y=y, x_grid=x_grid, grad_phi_star=grad,
                         residual=float(np.max(np.abs(defects))),
                         u=u_vals, ell_x=ell_x[..., 0], density=pvals)


class _LinearSliceInterp:
    """Linear interpolation of sampled grad_phi values along x (fixed y),
    used to finite-difference a sampled slice."""

    def __init__(self, x_grid, values):
        self.x_grid = np.asarray(x_grid, dtype=float)
        self.values = np.asarray(values, dtype=float)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return np.interp(z[..., 0], self.x_grid, self.values)[..., None]


def lambda_p_quadrature(inputs: ModelInputs, strategy,
                        nodes_per_panel: int = 8,
                        stability_tol: float = 1e-9) -> float:
    """1/2 integral of theta' c_X theta p over the truncation window: the
    robust growth rate when theta is the trusted-factor optimizer.  Warns
    when doubling the quadrature panels moves the value by more than
    stability_tol (relative)."""
    fn = _theta_fn(strategy)
    d = inputs.domain.d

    def integrand(z):
        th = np.asarray(fn(z), dtype=float)
        c_x = np.asarray(inputs.c(z), dtype=float)[..., :d, :d]
        return 0.5 * np.einsum("...i,...ij,...j->...", th, c_x, th) \
            * _density(inputs, z)

    fine, change = quad.integrate_box_refined(integrand, inputs.quad_edges(),
                                              nodes_per_panel)
    if change > stability_tol * max(abs(fine), 1.0):
        warnings.warn(f"growth-rate quadrature unstable under panel doubling "
                      f"(change {change:.3e}); refine the truncation edges")
    return fine


def growth_gap_quadrature(inputs: ModelInputs, theta_star, theta_hat,
                          nodes_per_panel: int = 8,
                          stability_tol: float = 1e-9) -> float:
    """1/2 integral of (theta*-theta_hat)' c_X (theta*-theta_hat) p: the
    price of factor-drift uncertainty as a weighted quadratic distance
    between the two optimizers."""
    fa, fb = _theta_fn(theta_star), _theta_fn(theta_hat)
    d = inputs.domain.d

    def integrand(z):
        diff = np.asarray(fa(z), dtype=float) - np.asarray(fb(z), dtype=float)
        c_x = np.asarray(inputs.c(z), dtype=float)[..., :d, :d]
        return 0.5 * np.einsum("...i,...ij,...j->...", diff, c_x, diff) \
            * _density(inputs, z)

    fine, change = quad.integrate_box_refined(integrand, inputs.quad_edges(),
                                              nodes_per_panel)
    if change > stability_tol * max(abs(fine), 1.0):
        warnings.warn(f"growth-gap quadrature unstable under panel doubling "
                      f"(change {change:.3e}); refine the truncation edges")
    return fine


def euler_lagrange_residual(inputs: ModelInputs, u, grad_phi, grid,
                            h: float = 1e-3, reduce_max: bool = True):
    """Stationarity defect |div_x(c_X (grad_phi - ell_X) p) - div_y(c_Y ell_Y p)|
    with the x-divergence by central differences of fixed step h.

    grad_phi may be a StrategyField or plain callable; when grad_phi is None
    the left side is taken to be div_x u for the supplied u field (the two
    agree exactly when grad_phi = xi assembled from u).  For the true
    optimizer the defect is pure finite-difference error and decays at
    second order in h.
    """
    z = np.atleast_2d(np.asarray(grid, dtype=float))
    d = inputs.domain.d

    if grad_phi is not None:
        fn = _theta_fn(grad_phi)

        def flux_x(w):
            th = np.asarray(fn(w), dtype=float)
            ell_x, _ = eval_ell(inputs, w)
            c_x = np.asarray(inputs.c(w), dtype=float)[..., :d, :d]
            vec = (c_x @ (th - ell_x)[..., None])[..., 0]
            return vec * _density(inputs, w)[..., None]
    elif u is not None:
        def flux_x(w):
            return np.asarray(u(w), dtype=float)
    else:
        raise DomainError("need u or grad_phi to evaluate the defect")

    div = np.zeros(z.shape[:-1])
    for j in range(d):
        zp = z.copy()
        zp[..., j] += h
        zm = z.copy()
        zm[..., j] -= h
        div = div + (flux_x(zp)[..., j] - flux_x(zm)[..., j]) / (2.0 * h)
    defect = div - div_y_flux(inputs, z)
    return float(np.max(np.abs(defect))) if reduce_max else defect
