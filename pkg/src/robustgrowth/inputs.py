"""Model input triple (c, p, b_Y) and the coefficient fields built from it.

The state z = (x, y) lives on F = E x D with dim E = d (tradable components)
and dim D = m (factors).  A model is specified by the instantaneous covariance
field c(z), the target invariant density p(z), and the factor drift field
b_Y(z).  From these the library assembles the drift coefficient fields

    ell_X = 1/2 [ (c^{-1} div c)_X + grad_x log p
                  + (c_X)^{-1} c_XY ((c^{-1} div c)_Y + grad_y log p) ]
    ell_Y = 1/2 [ (c^{-1} div c)_Y + grad_y log p
                  + (c_Y)^{-1} c_YX ((c^{-1} div c)_X + grad_x log p) ] - b_Y

where div c is the row-wise divergence (div c)_i = sum_j d_j c_ij.  The factor
drift is admissible when the column flux c_Y ell_Y p has vanishing total
x-divergence of its y-divergence in the sense

    integral over E of div_y(c_Y ell_Y p) dx = 0   for a.e. y,

and the tradable correction u solves div_x u(., y) = div_y(c_Y ell_Y p).
For d = 1 that solve is a cumulative quadrature from the left truncation
boundary, with the additive constant fixed to zero there.

All fields are vectorized: points of shape (..., d+m) map to (...,) scalars,
(..., k) vectors or (..., k, k) matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import quadrature as quad
from .errors import (DensityUnderflowError, DomainError, SingularInputError,
                     UnsupportedDimensionError)
from .strategy import StrategyField

DENSITY_FLOOR = 1e-300
FD_STEP_BASE = 1e-5


# ---------------------------------------------------------------------------
# domain and inputs containers


@dataclass
class DomainBox:
    """Product domain F = E x D with finite quadrature truncation per axis.

    e_bounds / d_bounds are the declared (possibly infinite) coordinate
    bounds; truncation holds the finite (lo, hi) quadrature window per
    coordinate, strictly inside the declared bounds.
    """

    d: int
    m: int
    e_bounds: tuple
    d_bounds: tuple
    truncation: tuple

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise DomainError("need d >= 1 tradable and m >= 1 factor coordinates")
        self.e_bounds = tuple((float(a), float(b)) for a, b in self.e_bounds)
        self.d_bounds = tuple((float(a), float(b)) for a, b in self.d_bounds)
        self.truncation = tuple((float(a), float(b)) for a, b in self.truncation)
        if len(self.e_bounds) != self.d or len(self.d_bounds) != self.m:
            raise DomainError("bounds lists do not match (d, m)")
        if len(self.truncation) != self.d + self.m:
            raise DomainError("need one truncation interval per coordinate")
        for (lo, hi), (blo, bhi) in zip(self.truncation, self.bounds):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise DomainError("truncation intervals must be finite with lo < hi")
            if lo < blo or hi > bhi:
                raise DomainError("truncation must lie inside the declared bounds")

    @property
    def bounds(self):
        return self.e_bounds + self.d_bounds

    @property
    def dim(self):
        return self.d + self.m

    def enlarged(self, factor: float = 2.0) -> "DomainBox":
        """Grow each truncation interval toward the declared bounds.

        Infinite sides scale the offset from zero by `factor`; finite sides
        halve the remaining gap to the bound.  Used by the integrability
        divergence diagnostic.
        """
        new = []
        for (lo, hi), (blo, bhi) in zip(self.truncation, self.bounds):
            if np.isfinite(blo):
                nlo = blo + (lo - blo) / factor
            else:
                nlo = lo * factor if lo < 0 else lo / factor
            if np.isfinite(bhi):
                nhi = bhi - (bhi - hi) / factor
            else:
                nhi = hi * factor if hi > 0 else hi / factor
            new.append((nlo, nhi))
        return DomainBox(self.d, self.m, self.e_bounds, self.d_bounds, tuple(new))


def default_edge_builder(n_panels: int = 64):
    def build(box: DomainBox):
        return [quad.uniform_edges(lo, hi, n_panels) for lo, hi in box.truncation]

    return build


@dataclass
class ModelInputs:
    """Covariance field, invariant density and factor drift, plus optional
    analytic derivative providers (finite differences are the fallback).

    div_y_flux, when given, must equal div_y(c_Y ell_Y p) analytically; it is
    what the compatibility, divergence and slice solvers integrate, so an
    analytic provider removes all finite-difference noise from those paths.
    """

    domain: DomainBox
    c: Callable
    p: Callable
    b_y: Callable
    div_c: Optional[Callable] = None
    grad_log_p: Optional[Callable] = None
    div_y_flux_fn: Optional[Callable] = None
    edge_builder: Callable = field(default_factory=default_edge_builder)
    name: str = "custom"

    def quad_edges(self, box: Optional[DomainBox] = None):
        return self.edge_builder(box if box is not None else self.domain)


def replace_b_y(inputs: ModelInputs, b_y: Callable, name: Optional[str] = None) -> ModelInputs:
    """New inputs with a different factor drift; drops the analytic flux
    divergence, which encoded the old b_Y."""
    return replace(inputs, b_y=b_y, div_y_flux_fn=None,
                   name=name if name is not None else inputs.name)


# ---------------------------------------------------------------------------
# derivative plumbing


def _require_spd(cmat, what: str = "c(z)"):
    cmat = np.asarray(cmat, dtype=float)
    sym_err = float(np.max(np.abs(cmat - np.swapaxes(cmat, -1, -2))))
    scale = float(np.max(np.abs(cmat)))
    if not np.all(np.isfinite(cmat)):
        raise SingularInputError(f"{what} has non-finite entries")
    if sym_err > 1e-10 * max(scale, 1e-30):
        raise SingularInputError(f"{what} is not symmetric (max asymmetry {sym_err:.3e})")
    try:
        np.linalg.cholesky(cmat)
    except np.linalg.LinAlgError:
        ev = float(np.min(np.linalg.eigvalsh(cmat)))
        raise SingularInputError(
            f"{what} is not positive definite (min eigenvalue {ev:.6e})") from None


def _fd_steps(z):
    return FD_STEP_BASE * (1.0 + np.abs(z))


def fd_div_c(c_fn, z):
    """Row-wise divergence of a matrix field by central differences,
    step 1e-5 * (1 + |coordinate|) per coordinate."""
    z = np.asarray(z, dtype=float)
    n = z.shape[-1]
    h = _fd_steps(z)
    out = np.zeros(z.shape)
    for j in range(n):
        zp = z.copy()
        zp[..., j] += h[..., j]
        zm = z.copy()
        zm[..., j] -= h[..., j]
        dc = (np.asarray(c_fn(zp), float) - np.asarray(c_fn(zm), float)) \
            / (2.0 * h[..., j])[..., None, None]
        out += dc[..., :, j]
    return out


def fd_grad(scalar_fn, z):
    """Central-difference gradient of a scalar field, same step rule."""
    z = np.asarray(z, dtype=float)
    n = z.shape[-1]
    h = _fd_steps(z)
    out = np.zeros(z.shape)
    for j in range(n):
        zp = z.copy()
        zp[..., j] += h[..., j]
        zm = z.copy()
        zm[..., j] -= h[..., j]
        out[..., j] = (np.asarray(scalar_fn(zp), float) - np.asarray(scalar_fn(zm), float)) \
            / (2.0 * h[..., j])
    return out


def _density(inputs, z):
    pval = np.asarray(inputs.p(z), dtype=float)
    if np.any(~np.isfinite(pval)) or np.any(pval <= 0.0):
        raise DomainError("invariant density is non-positive or non-finite "
                          "at an evaluation point")
    return pval


# ---------------------------------------------------------------------------
# coefficient fields


def eval_ell(inputs: ModelInputs, z):
    """The drift coefficient fields (ell_X, ell_Y) at z, shapes (..., d) and (..., m)."""
    z = np.asarray(z, dtype=float)
    d = inputs.domain.d
    cmat = np.asarray(inputs.c(z), dtype=float)
    _require_spd(cmat)
    _density(inputs, z)

    divc = np.asarray(inputs.div_c(z), float) if inputs.div_c is not None \
        else fd_div_c(inputs.c, z)
    if inputs.grad_log_p is not None:
        glp = np.asarray(inputs.grad_log_p(z), float)
    else:
        glp = fd_grad(lambda w: np.log(_density(inputs, w)), z)

    w = np.linalg.solve(cmat, divc[..., None])[..., 0]
    sx = w[..., :d] + glp[..., :d]
    sy = w[..., d:] + glp[..., d:]
    c_x = cmat[..., :d, :d]
    c_y = cmat[..., d:, d:]
    c_xy = cmat[..., :d, d:]
    c_yx = cmat[..., d:, :d]

    ell_x = 0.5 * (sx + np.linalg.solve(c_x, (c_xy @ sy[..., None]))[..., 0])
    bracket_y = 0.5 * (sy + np.linalg.solve(c_y, (c_yx @ sx[..., None]))[..., 0])
    b = np.asarray(inputs.b_y(z), dtype=float)
    if b.shape != bracket_y.shape:
        b = np.broadcast_to(b, bracket_y.shape)
    return ell_x, bracket_y - b


def explicit_compatible_b_y(inputs: ModelInputs) -> Callable:
    """The factor drift that makes ell_Y vanish identically:
    b_Y = 1/2 [ (c^{-1} div c)_Y + grad_y log p + (c_Y)^{-1} c_YX ((c^{-1} div c)_X + grad_x log p) ].

    Compatibility is then automatic (the flux c_Y ell_Y p is zero).
    The returned callable only uses inputs.c and inputs.p (plus their
    analytic derivative providers, when present).
    """
    d = inputs.domain.d

    def b_y(z):
        z = np.asarray(z, dtype=float)
        cmat = np.asarray(inputs.c(z), dtype=float)
        divc = np.asarray(inputs.div_c(z), float) if inputs.div_c is not None \
            else fd_div_c(inputs.c, z)
        if inputs.grad_log_p is not None:
            glp = np.asarray(inputs.grad_log_p(z), float)
        else:
            glp = fd_grad(lambda w: np.log(_density(inputs, w)), z)
        w = np.linalg.solve(cmat, divc[..., None])[..., 0]
        sx = w[..., :d] + glp[..., :d]
        sy = w[..., d:] + glp[..., d:]
        c_y = cmat[..., d:, d:]
        c_yx = cmat[..., d:, :d]
        return 0.5 * (sy + np.linalg.solve(c_y, (c_yx @ sx[..., None]))[..., 0])

    return b_y


def factor_flux(inputs: ModelInputs, z):
    """c_Y ell_Y p at z, shape (..., m).

    The flux carries a factor of the density, so points where p underflows to
    zero get a zero flux rather than poisoning the coefficient assembly."""
    z = np.asarray(z, dtype=float)
    d, m = inputs.domain.d, inputs.domain.m
    pval = np.asarray(inputs.p(z), dtype=float)
    out = np.zeros(z.shape[:-1] + (m,))
    mask = pval > 0.0
    if np.any(mask):
        zm = z[mask]
        _, ell_y = eval_ell(inputs, zm)
        c_y = np.asarray(inputs.c(zm), dtype=float)[..., d:, d:]
        out[mask] = (c_y @ ell_y[..., None])[..., 0] * pval[mask][..., None]
    return out


def div_y_flux(inputs: ModelInputs, z):
    """div_y(c_Y ell_Y p) at z; analytic provider when available, else central
    differences of the assembled flux."""
    z = np.asarray(z, dtype=float)
    if inputs.div_y_flux_fn is not None:
        return np.asarray(inputs.div_y_flux_fn(z), dtype=float)
    d, m = inputs.domain.d, inputs.domain.m
    h = _fd_steps(z)
    out = np.zeros(z.shape[:-1])
    for j in range(m):
        zp = z.copy()
        zp[..., d + j] += h[..., d + j]
        zm = z.copy()
        zm[..., d + j] -= h[..., d + j]
        out += (factor_flux(inputs, zp)[..., j] - factor_flux(inputs, zm)[..., j]) \
            / (2.0 * h[..., d + j])
    return out


# ---------------------------------------------------------------------------
# compatibility check


@dataclass
class CompatibilityReport:
    y_grid: np.ndarray
    residuals: np.ndarray
    changes: np.ndarray
    tol: float
    passed: bool
    reliable: bool

    @property
    def max_abs_residual(self) -> float:
        return float(np.max(np.abs(self.residuals)))

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        rel = "" if self.reliable else " (quadrature unreliable: refine panels)"
        return (f"compatibility {status}: max |integral| = "
                f"{self.max_abs_residual:.3e} over {len(self.residuals)} factor "
                f"points, tol {self.tol:.1e}{rel}")


def check_compatibility(inputs: ModelInputs, y_grid, tol: float = 1e-6,
                        nodes_per_panel: int = 8) -> CompatibilityReport:
    """Quadrature of div_y(c_Y ell_Y p) over the truncated E, per factor point.

    The admissibility condition requires the integral to vanish for every y.
    Each integral is recomputed with doubled panels; if that changes any value
    by more than tol the report is flagged unreliable.
    """
    d, m = inputs.domain.d, inputs.domain.m
    ys = np.asarray(y_grid, dtype=float)
    if ys.ndim == 1 and m == 1:
        ys = ys[:, None]
    if ys.ndim != 2 or ys.shape[1] != m:
        raise DomainError(f"y_grid must have shape (n, {m})")

    x_edges = inputs.quad_edges()[:d]
    residuals = np.empty(len(ys))
    changes = np.empty(len(ys))
    for i, y in enumerate(ys):
        def integrand(pts):
            pts = np.asarray(pts, dtype=float)
            z = np.concatenate(
                [pts, np.broadcast_to(y, pts.shape[:-1] + (m,))], axis=-1)
            return div_y_flux(inputs, z)

        if d == 1:
            fn = lambda x: integrand(x[..., None])
            coarse = quad.integrate_1d(fn, x_edges[0], nodes_per_panel)
            fine = quad.integrate_1d(fn, quad.refine_edges(x_edges[0]), nodes_per_panel)
        else:
            coarse = quad.integrate_box(integrand, x_edges, nodes_per_panel)
            fine = quad.integrate_box(integrand, [quad.refine_edges(e) for e in x_edges],
                                      nodes_per_panel)
        residuals[i] = fine
        changes[i] = abs(fine - coarse)

    passed = bool(np.max(np.abs(residuals)) < tol)
    reliable = bool(np.max(changes) <= tol)
    return CompatibilityReport(y_grid=ys, residuals=residuals, changes=changes,
                               tol=tol, passed=passed, reliable=reliable)


# ---------------------------------------------------------------------------
# divergence solve (d = 1), xi assembly, gradient strategy


def solve_u_1d(inputs: ModelInputs, y, x_grid, nodes_per_panel: int = 8,
               head_panels: int = 64):
    """Solve div_x u(., y) = div_y(c_Y ell_Y p) for d = 1 on a sample grid.

    u(x) = integral from the left truncation boundary to x of the right-hand
    side; the additive constant is zero at the boundary.  The prefix from the
    boundary to x_grid[0] (when the grid starts inside the truncation window)
    and each interval between grid points are integrated with composite
    Gauss-Legendre panels, so accuracy is set by the smoothness of the flux
    divergence, not by the grid spacing.
    """
    d, m = inputs.domain.d, inputs.domain.m
    if d != 1:
        raise UnsupportedDimensionError("solve_u_1d requires d = 1")
    x_grid = np.asarray(x_grid, dtype=float)
    if x_grid.ndim != 1 or x_grid.size < 2 or np.any(np.diff(x_grid) <= 0):
        raise DomainError("x_grid must be strictly increasing with >= 2 points")
    lo, hi = inputs.domain.truncation[0]
    if x_grid[0] < lo - 1e-12 or x_grid[-1] > hi + 1e-12:
        raise DomainError("x_grid must lie inside the truncation window")
    y = np.atleast_1d(np.asarray(y, dtype=float))

    def g(x):
        x = np.asarray(x, dtype=float)
        z = np.concatenate([x[..., None],
                            np.broadcast_to(y, x.shape + (m,))], axis=-1)
        return div_y_flux(inputs, z)

    head = 0.0
    if x_grid[0] > lo:
        head = quad.integrate_1d(g, quad.uniform_edges(lo, x_grid[0], head_panels),
                                 nodes_per_panel)
    nodes, weights = quad.panel_nodes(x_grid, nodes_per_panel)
    vals = (weights * g(nodes)).reshape(x_grid.size - 1, nodes_per_panel).sum(axis=1)
    return head + np.concatenate([[0.0], np.cumsum(vals)])


def assemble_xi(inputs: ModelInputs, u, z):
    """xi = ell_X + (c_X)^{-1} u / p at z.

    u may be a vectorized callable, an array broadcastable to (..., d), or a
    scalar (0 gives xi = ell_X).  Points where p underflows below 1e-300 are
    refused with an error, never silently zeroed.
    """
    z = np.asarray(z, dtype=float)
    d = inputs.domain.d
    ell_x, _ = eval_ell(inputs, z)
    pval = np.asarray(inputs.p(z), dtype=float)
    if np.any(pval < DENSITY_FLOOR):
        n_bad = int(np.sum(pval < DENSITY_FLOOR))
        raise DensityUnderflowError(
            f"density below {DENSITY_FLOOR:g} at {n_bad} evaluation point(s); "
            "xi is not defined there (shrink the grid to the truncation window)")
    if callable(u):
        uval = np.asarray(u(z), dtype=float)
    else:
        uval = np.asarray(u, dtype=float)
    uval = np.broadcast_to(uval, z.shape[:-1] + (d,))
    c_x = np.asarray(inputs.c(z), dtype=float)[..., :d, :d]
    corr = np.linalg.solve(c_x, (uval / pval[..., None])[..., None])[..., 0]
    return ell_x + corr


def gradient_strategy(inputs: ModelInputs, u, name: str = "theta_star",
                      gradient_certified: bool = False) -> StrategyField:
    """The candidate optimizer theta(z) = xi(z), valid whenever xi is a
    gradient in x.  For d = 1 that is automatic; for d >= 2 the caller must
    certify it (gradient_certified=True), otherwise the construction refuses.
    """
    d = inputs.domain.d
    if d > 1 and not gradient_certified:
        raise UnsupportedDimensionError(
            "xi is only known to be a gradient for d = 1; pass "
            "gradient_certified=True if the model guarantees it")
    return StrategyField(fn=lambda z: assemble_xi(inputs, u, z),
                         name=name, d=d, family=inputs.name,
                         coefficients={}, gradient_form=True)


# ---------------------------------------------------------------------------
# integrability diagnostics


@dataclass
class IntegrabilityReport:
    drift_integral: float
    u_integral: float
    drift_change: float
    u_change: float
    drift_diverged: bool
    u_diverged: bool
    rel_tol: float

    def __str__(self):
        def fmt(v, c, flag):
            s = f"{v:.6e} (doubled-window change {c:.2e})"
            return s + (" DIVERGENT" if flag else "")
        return ("integrability: drift integral " +
                fmt(self.drift_integral, self.drift_change, self.drift_diverged) +
                "; u integral " +
                fmt(self.u_integral, self.u_change, self.u_diverged))


def integrability_report(inputs: ModelInputs, u=None, nodes_per_panel: int = 8,
                         rel_tol: float = 0.05) -> IntegrabilityReport:
    """Truncated quadrature of the two admissibility integrals

        I_drift = integral (ell_X' c_X ell_X + ell_Y' c_Y ell_Y) p
        I_u     = integral u' (c_X)^{-1} u / p

    over the truncation window, with a divergence flag per integral: the
    window is enlarged toward the declared bounds (factor 2) and a relative
    change above rel_tol marks the integral as not converged (divergent or
    under-truncated).
    """
    d = inputs.domain.d

    # Both integrands vanish with the density, so window corners where p
    # underflows to zero contribute nothing; evaluate only where p > 0.
    def drift_integrand(z):
        z = np.asarray(z, dtype=float)
        pval = np.asarray(inputs.p(z), dtype=float)
        out = np.zeros(pval.shape)
        mask = pval > 0.0
        if np.any(mask):
            zm = z[mask]
            ell_x, ell_y = eval_ell(inputs, zm)
            cmat = np.asarray(inputs.c(zm), dtype=float)
            c_x = cmat[..., :d, :d]
            c_y = cmat[..., d:, d:]
            qx = np.einsum("...i,...ij,...j->...", ell_x, c_x, ell_x)
            qy = np.einsum("...i,...ij,...j->...", ell_y, c_y, ell_y)
            out[mask] = (qx + qy) * pval[mask]
        return out

    def u_integrand(z):
        z = np.asarray(z, dtype=float)
        pval = np.asarray(inputs.p(z), dtype=float)
        out = np.zeros(pval.shape)
        mask = pval > 0.0
        if np.any(mask):
            zm = z[mask]
            uval = np.asarray(u(zm), dtype=float)
            c_x = np.asarray(inputs.c(zm), dtype=float)[..., :d, :d]
            w = np.linalg.solve(c_x, uval[..., None])[..., 0]
            out[mask] = np.einsum("...i,...i->...", uval, w) / pval[mask]
        return out

    def both(box):
        edges = inputs.quad_edges(box)
        i1 = quad.integrate_box(drift_integrand, edges, nodes_per_panel)
        i2 = quad.integrate_box(u_integrand, edges, nodes_per_panel) \
            if u is not None else 0.0
        return i1, i2

    base1, base2 = both(inputs.domain)
    big1, big2 = both(inputs.domain.enlarged(2.0))
    ch1 = abs(big1 - base1)
    ch2 = abs(big2 - base2)
    div1 = bool(ch1 > rel_tol * max(abs(base1), 1e-30))
    div2 = bool(u is not None and ch2 > rel_tol * max(abs(base2), 1e-30))
    return IntegrabilityReport(drift_integral=base1, u_integral=base2,
                               drift_change=ch1, u_change=ch2,
                               drift_diverged=div1, u_diverged=div2,
                               rel_tol=rel_tol)


def verify_divergence(u_field, inputs: ModelInputs, grid, h: float = 1e-3) -> float:
    """Max over the grid of |div_x u - div_y(c_Y ell_Y p)|, with div_x u by
    central differences of step h.  Decreases at second order in h for smooth
    closed-form u until rounding noise dominates."""
    z = np.atleast_2d(np.asarray(grid, dtype=float))
    d = inputs.domain.d
    div = np.zeros(z.shape[:-1])
    for j in range(d):
        zp = z.copy()
        zp[..., j] += h
        zm = z.copy()
        zm[..., j] -= h
        div = div + (np.asarray(u_field(zp), float)[..., j]
                     - np.asarray(u_field(zm), float)[..., j]) / (2.0 * h)
    rhs = div_y_flux(inputs, z)
    return float(np.max(np.abs(div - rhs)))
