"""Closed-form solver for the Gaussian environment.

Constant covariance c, invariant law N(0, Sigma) and linear factor drift
b_Y(z) = 1/2 beta z with beta = [beta_X beta_Y]: beta_X is free and beta_Y is
pinned by compatibility.  Everything downstream (optimal strategy, robust
growth rates, worst-case dynamics, the explicit divergence solution u) is
linear algebra on the blocks

    A = S_X  + (c_X)^{-1} c_XY S_YX          B = S_XY + (c_X)^{-1} c_XY S_Y
    C = S_YX + (c_Y)^{-1} c_YX S_X + beta_X
    beta_Y = -(S_Y + (c_Y)^{-1} c_YX S_XY + C Sig_XY (Sig_Y)^{-1})
    D = S_Y  + (c_Y)^{-1} c_YX S_XY + beta_Y

with S = Sigma^{-1} (block subscripts are blocks of S, not inverses of
blocks of Sigma, except where written as (Sig_X)^{-1}).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import quadrature as quad
from .errors import ConfigError, SingularInputError
from .inputs import DomainBox, ModelInputs
from .strategy import StrategyField, linear_strategy

COND_WARN = 1e10
STABILITY_TOL = 1e-12


def _as_spd(mat, what: str):
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if mat.shape[0] != mat.shape[1]:
        raise SingularInputError(f"{what} must be square, got {mat.shape}")
    asym = float(np.max(np.abs(mat - mat.T)))
    if asym > 1e-10 * max(float(np.max(np.abs(mat))), 1e-30):
        raise SingularInputError(f"{what} is not symmetric (max asymmetry {asym:.3e})")
    ev = np.linalg.eigvalsh(mat)
    if ev[0] <= 0.0:
        raise SingularInputError(
            f"{what} is not positive definite (min eigenvalue {ev[0]:.6e})")
    return mat


def spd_sqrt(mat):
    """Symmetric positive-definite square root via the spectral decomposition."""
    w, v = np.linalg.eigh(np.asarray(mat, dtype=float))
    if np.min(w) <= 0:
        raise SingularInputError(
            f"matrix square root needs positive eigenvalues (min {np.min(w):.6e})")
    return (v * np.sqrt(w)) @ v.T


@dataclass
class LinearDynamics:
    """dZ = K Z dt + c^{1/2} dW with constant coefficients."""

    K: np.ndarray
    c: np.ndarray
    c_half: np.ndarray
    name: str = "linear"
    stationary_sigma: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.K.shape[0]

    def drift(self, z):
        return np.asarray(z, dtype=float) @ self.K.T

    @property
    def max_real_eigenvalue(self) -> float:
        return float(np.max(np.real(np.linalg.eigvals(self.K))))

    @property
    def is_stable(self) -> bool:
        return self.max_real_eigenvalue < -STABILITY_TOL

    def lyapunov_residual(self, Sigma=None) -> float:
        """Frobenius norm of K Sigma + Sigma K' + c; zero iff N(0, Sigma) is
        the stationary law of these dynamics."""
        S = self.stationary_sigma if Sigma is None else np.asarray(Sigma, float)
        if S is None:
            raise ConfigError("no stationary covariance attached or supplied")
        return float(np.linalg.norm(self.K @ S + S @ self.K.T + self.c))


@dataclass
class GaussianModel:
    c: np.ndarray
    Sigma: np.ndarray
    beta_x: np.ndarray
    d: int
    m: int
    # derived blocks
    S: np.ndarray = field(repr=False, default=None)
    A: np.ndarray = field(repr=False, default=None)
    B: np.ndarray = field(repr=False, default=None)
    C: np.ndarray = field(repr=False, default=None)
    D: np.ndarray = field(repr=False, default=None)
    beta_y: np.ndarray = field(repr=False, default=None)
    M_x: np.ndarray = field(repr=False, default=None)
    M_y: np.ndarray = field(repr=False, default=None)
    conditioning: dict = field(default_factory=dict)

    # -- block views -------------------------------------------------------
    @property
    def c_x(self):
        return self.c[: self.d, : self.d]

    @property
    def c_y(self):
        return self.c[self.d:, self.d:]

    @property
    def c_xy(self):
        return self.c[: self.d, self.d:]

    @property
    def c_yx(self):
        return self.c[self.d:, : self.d]

    @property
    def sig_x(self):
        return self.Sigma[: self.d, : self.d]

    @property
    def sig_y(self):
        return self.Sigma[self.d:, self.d:]

    @property
    def sig_xy(self):
        return self.Sigma[: self.d, self.d:]

    @property
    def sig_yx(self):
        return self.Sigma[self.d:, : self.d]

    @property
    def beta(self):
        return np.concatenate([self.beta_x, self.beta_y], axis=1)

    # -- strategies and growth rates ---------------------------------------
    def theta_star(self) -> StrategyField:
        """Robust optimizer for the known-factor-drift class:
        theta*(z) = -1/2 (M_X x + M_Y y)."""
        G = -0.5 * np.concatenate([self.M_x, self.M_y], axis=1)
        return linear_strategy(G, name="theta_star", family="gaussian",
                               M_x=self.M_x.tolist(), M_y=self.M_y.tolist())

    def theta_hat(self) -> StrategyField:
        """Robust optimizer when the factor drift is also adversarial:
        theta_hat(z) = -1/2 (Sig_X)^{-1} x.  Depends on Sigma_X only."""
        G = np.concatenate([-0.5 * np.linalg.inv(self.sig_x),
                            np.zeros((self.d, self.m))], axis=1)
        return linear_strategy(G, name="theta_hat", family="gaussian")

    def lambda_p(self) -> float:
        """Robust growth rate with trusted factor drift (trace form)."""
        cx = self.c_x
        t1 = np.trace(self.M_x.T @ cx @ self.M_x @ self.sig_x) / 8.0
        t2 = np.trace(self.M_x.T @ cx @ self.M_y @ self.sig_yx) / 4.0
        t3 = np.trace(self.M_y.T @ cx @ self.M_y @ self.sig_y) / 8.0
        return float(t1 + t2 + t3)

    def lambda_p_moment(self) -> float:
        """Same rate via exact Gaussian second moments of the strategy,
        1/2 E[theta*' c_X theta*]; independent route used as a cross-check."""
        G = -0.5 * np.concatenate([self.M_x, self.M_y], axis=1)
        return 0.5 * float(np.trace(G.T @ self.c_x @ G @ self.Sigma))

    def lambda_pi(self) -> float:
        """Robust growth rate with adversarial factor drift:
        1/8 tr((Sig_X)^{-1} c_X)."""
        return float(np.trace(np.linalg.solve(self.sig_x, self.c_x))) / 8.0

    def growth_gap(self) -> float:
        """Price of factor-drift uncertainty, lambda_P - lambda_Pi (>= 0)."""
        return self.lambda_p() - self.lambda_pi()

    def growth_theta_star_under_hat(self) -> float:
        """Growth rate of theta* under the adversarial-factor worst case:
        1/4 tr(M_X' c_X) + 1/4 tr(M_Y' c_X (Sig_X)^{-1} Sig_XY) - lambda_P.
        Can be negative: overtrusting the factor drift costs growth."""
        t1 = np.trace(self.M_x.T @ self.c_x) / 4.0
        t2 = np.trace(self.M_y.T @ self.c_x @ np.linalg.solve(self.sig_x, self.sig_xy)) / 4.0
        return float(t1 + t2) - self.lambda_p()

    # -- worst-case measures -------------------------------------------------
    def worst_case_star(self) -> LinearDynamics:
        """Saddle dynamics for the trusted-factor class:
        drift rows (-1/2 c_X M_X, -1/2 c_X M_Y; 1/2 c_Y beta_X, 1/2 c_Y beta_Y)."""
        top = np.concatenate([-0.5 * self.c_x @ self.M_x,
                              -0.5 * self.c_x @ self.M_y], axis=1)
        bot = np.concatenate([0.5 * self.c_y @ self.beta_x,
                              0.5 * self.c_y @ self.beta_y], axis=1)
        K = np.concatenate([top, bot], axis=0)
        dyn = LinearDynamics(K=K, c=self.c, c_half=spd_sqrt(self.c),
                             name="worst_case_star", stationary_sigma=self.Sigma)
        if not dyn.is_stable:
            warnings.warn("worst-case drift matrix is not strictly stable "
                          f"(max Re eigenvalue {dyn.max_real_eigenvalue:.3e})")
        return dyn

    def worst_case_hat(self) -> LinearDynamics:
        """Saddle dynamics for the adversarial-factor class.  The tradable
        block decouples: dX = -1/2 c_X (Sig_X)^{-1} X dt + noise."""
        S_y = self.S[self.d:, self.d:]
        S_x = self.S[: self.d, : self.d]
        S_xy = self.S[: self.d, self.d:]
        C0 = self.C - self.beta_x
        D0 = self.D - self.beta_y
        top = np.concatenate([-0.5 * self.c_x @ np.linalg.inv(self.sig_x),
                              np.zeros((self.d, self.m))], axis=1)
        back = np.linalg.solve(S_y, self.B.T @ self.c_x)
        bot = np.concatenate([-0.5 * (self.c_y @ C0 + back @ S_x),
                              -0.5 * (self.c_y @ D0 + back @ S_xy)], axis=1)
        K = np.concatenate([top, bot], axis=0)
        dyn = LinearDynamics(K=K, c=self.c, c_half=spd_sqrt(self.c),
                             name="worst_case_hat", stationary_sigma=self.Sigma)
        if not dyn.is_stable:
            warnings.warn("worst-case drift matrix is not strictly stable "
                          f"(max Re eigenvalue {dyn.max_real_eigenvalue:.3e})")
        return dyn

    def degenerate_beta_x(self):
        """The beta_X for which factor uncertainty is free: rebuilt with this
        value, M_Y = 0, theta* = theta_hat and the growth gap vanishes."""
        S_x = self.S[: self.d, : self.d]
        S_y = self.S[self.d:, self.d:]
        S_yx = self.S[self.d:, : self.d]
        t1 = np.linalg.solve(self.c_y, self.c_yx @ S_x)
        t2 = np.linalg.solve(self.c_y, np.linalg.solve(S_y, self.B.T @ self.c_x @ S_x))
        return -S_yx - t1 - t2

    # -- fields ---------------------------------------------------------------
    def density(self, z):
        z = np.asarray(z, dtype=float)
        n = self.d + self.m
        quad_form = np.einsum("...i,ij,...j->...", z, self.S, z)
        det = np.linalg.det(self.Sigma)
        return np.exp(-0.5 * quad_form) / np.sqrt((2.0 * np.pi) ** n * det)

    def grad_log_density(self, z):
        return -np.asarray(z, dtype=float) @ self.S

    def u(self, z):
        """Explicit divergence solution
        u(z) = -1/2 (S_X)^{-1} C' c_Y (S_YX x + S_Y y) p(z), shape (..., d)."""
        z = np.asarray(z, dtype=float)
        S_x = self.S[: self.d, : self.d]
        M = np.linalg.solve(S_x, self.C.T @ self.c_y)
        lin = z @ self.S[:, self.d:]          # (S_YX x + S_Y y) as row form
        vec = lin @ M.T
        return -0.5 * vec * self.density(z)[..., None]

    def div_y_flux(self, z):
        """Analytic div_y(c_Y ell_Y p) for the Gaussian fields."""
        z = np.asarray(z, dtype=float)
        CD = np.concatenate([self.C, self.D], axis=1)
        w = z @ (self.c_y @ CD).T
        grad_y_log = -(z @ self.S)[..., self.d:]
        trace_term = -0.5 * np.trace(self.c_y @ self.D)
        return (trace_term - 0.5 * np.einsum("...i,...i->...", w, grad_y_log)) \
            * self.density(z)

    def compatibility_residual(self, y):
        """Exact x-integrated compatibility integrand at factor points y:
        integral over E of div_y(c_Y ell_Y p) dx reduces to
        -1/2 div_y(c_Y R y p_Y) with R = C Sig_XY (Sig_Y)^{-1} + D, which the
        construction of beta_Y makes vanish identically."""
        y = np.asarray(y, dtype=float)
        if y.ndim == 1 and self.m == 1:
            y = y[:, None]
        R = self.C @ self.sig_xy @ np.linalg.inv(self.sig_y) + self.D
        cyR = self.c_y @ R
        sig_y_inv = np.linalg.inv(self.sig_y)
        p_y = np.exp(-0.5 * np.einsum("...i,ij,...j->...", y, sig_y_inv, y)) \
            / np.sqrt((2.0 * np.pi) ** self.m * np.linalg.det(self.sig_y))
        lin = y @ cyR.T
        return -0.5 * p_y * (np.trace(cyR)
                             - np.einsum("...i,...i->...", lin, y @ sig_y_inv))

    def b_y_field(self, z):
        return 0.5 * np.asarray(z, dtype=float) @ self.beta.T

    def to_model_inputs(self, n_sigmas: float = 8.0, n_panels: int = 64,
                        name: str = "gaussian") -> ModelInputs:
        """Wrap the closed-form fields as generic model inputs with analytic
        derivative providers, truncated at n_sigmas marginal deviations."""
        n = self.d + self.m
        sd = np.sqrt(np.diag(self.Sigma))
        trunc = tuple((-n_sigmas * s, n_sigmas * s) for s in sd)
        box = DomainBox(d=self.d, m=self.m,
                        e_bounds=((-np.inf, np.inf),) * self.d,
                        d_bounds=((-np.inf, np.inf),) * self.m,
                        truncation=trunc)
        cmat = self.c

        def c_field(z):
            z = np.asarray(z, dtype=float)
            return np.broadcast_to(cmat, z.shape[:-1] + (n, n))

        def edge_builder(b):
            return [quad.uniform_edges(lo, hi, n_panels) for lo, hi in b.truncation]

        return ModelInputs(domain=box, c=c_field, p=self.density,
                           b_y=self.b_y_field,
                           div_c=lambda z: np.zeros(np.asarray(z, float).shape),
                           grad_log_p=self.grad_log_density,
                           div_y_flux_fn=self.div_y_flux,
                           edge_builder=edge_builder,
                           name=name)


def build_gaussian_model(c, Sigma, beta_x, d: Optional[int] = None) -> GaussianModel:
    """Assemble the solver from (c, Sigma, beta_X).

    beta_x has shape (m, d), which also fixes the block split of c and Sigma.
    Near-singular inputs (condition number above 1e10) are reported with a
    warning; non-SPD inputs are refused with the offending eigenvalue.
    """
    c = np.atleast_2d(np.asarray(c, dtype=float))
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    beta_x = np.atleast_2d(np.asarray(beta_x, dtype=float))
    m, d_bx = beta_x.shape
    if d is None:
        d = d_bx
    if d != d_bx:
        raise ConfigError(f"beta_x shape {beta_x.shape} inconsistent with d={d}")
    n = d + m
    if c.shape != (n, n) or Sigma.shape != (n, n):
        raise ConfigError(f"c and Sigma must be {n}x{n}, got {c.shape} and {Sigma.shape}")
    _as_spd(c, "c")
    _as_spd(Sigma, "Sigma")

    conditioning = {"sigma": float(np.linalg.cond(Sigma)),
                    "c": float(np.linalg.cond(c))}
    for key, val in conditioning.items():
        if val > COND_WARN:
            warnings.warn(f"{key} is near-singular (condition number {val:.3e}); "
                          "derived quantities may lose precision")

    S = np.linalg.inv(Sigma)
    S = 0.5 * (S + S.T)
    S_x, S_xy = S[:d, :d], S[:d, d:]
    S_yx, S_y = S[d:, :d], S[d:, d:]
    c_x, c_xy = c[:d, :d], c[:d, d:]
    c_yx, c_y = c[d:, :d], c[d:, d:]
    sig_xy, sig_y = Sigma[:d, d:], Sigma[d:, d:]

    A = S_x + np.linalg.solve(c_x, c_xy @ S_yx)
    B = S_xy + np.linalg.solve(c_x, c_xy @ S_y)
    C = S_yx + np.linalg.solve(c_y, c_yx @ S_x) + beta_x
    beta_y = -(S_y + np.linalg.solve(c_y, c_yx @ S_xy)
               + C @ sig_xy @ np.linalg.inv(sig_y))
    D = S_y + np.linalg.solve(c_y, c_yx @ S_xy) + beta_y

    corr = np.linalg.solve(c_x, np.linalg.solve(S_x, C.T @ c_y))
    M_x = A + corr @ S_yx
    M_y = B + corr @ S_y

    return GaussianModel(c=c, Sigma=Sigma, beta_x=beta_x, d=d, m=m, S=S,
                         A=A, B=B, C=C, D=D, beta_y=beta_y,
                         M_x=M_x, M_y=M_y, conditioning=conditioning)


def linear_growth_rate(G, K, c, Sigma, d: int) -> float:
    """Almost-sure growth rate of the linear strategy theta = G z under the
    ergodic linear dynamics dZ = K Z dt + c^{1/2} dW with stationary
    covariance Sigma:  tr(G' K_X Sigma) - 1/2 tr(G' c_X G Sigma)."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    K = np.asarray(K, dtype=float)
    c = np.asarray(c, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    K_x = K[:d, :]
    c_x = c[:d, :d]
    return float(np.trace(G.T @ K_x @ Sigma) - 0.5 * np.trace(G.T @ c_x @ G @ Sigma))


# ---------------------------------------------------------------------------
# structured-text export / import (matrices row-major, labeled blocks)


def save_gaussian_model(path, model: GaussianModel):
    lines = ["# gaussian environment model: labeled blocks, matrices row-major",
             f"d {model.d}",
             f"m {model.m}",
             "c " + " ".join(repr(float(v)) for v in model.c.ravel()),
             "sigma " + " ".join(repr(float(v)) for v in model.Sigma.ravel()),
             "beta_x " + " ".join(repr(float(v)) for v in model.beta_x.ravel())]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_gaussian_model(path) -> GaussianModel:
    fields = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, rest = line.partition(" ")
            fields[key] = rest.split()
    try:
        d = int(fields["d"][0])
        m = int(fields["m"][0])
        n = d + m
        c = np.array([float(v) for v in fields["c"]]).reshape(n, n)
        Sigma = np.array([float(v) for v in fields["sigma"]]).reshape(n, n)
        beta_x = np.array([float(v) for v in fields["beta_x"]]).reshape(m, d)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"malformed gaussian model file {path}: {exc}") from None
    return build_gaussian_model(c, Sigma, beta_x, d=d)
