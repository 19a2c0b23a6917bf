"""The three worked factor models for spread trading.

* CTOU: a co-trending pair whose log-price spread X reverts to a stochastic
  trend Y, itself an OU process.  Gaussian environment, fully closed form.
* TDIST: same covariance structure but a bivariate Student-t invariant law,
  showing how heavy tails bend the optimizer away from linearity.
* STOCHVOL: a square-root stochastic-variance factor (Gaussian-given-variance
  state, gamma factor law), showing a degenerate, state-dependent covariance.

Each family provides generic model inputs (with analytic derivative
providers), the explicit divergence solution u, and both robust strategies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import betainc, gammaincinv, gammaln, kv

from . import quadrature as quad
from .errors import DomainError, FellerConditionError, RobustGrowthError
from .gaussian import GaussianModel, build_gaussian_model
from .inputs import DomainBox, ModelInputs
from .strategy import StrategyField, scalar_strategy


# ---------------------------------------------------------------------------
# Student-t helpers (regularized incomplete beta backs the CDF)


def t_pdf(s, k):
    s = np.asarray(s, dtype=float)
    logc = gammaln(0.5 * (k + 1.0)) - gammaln(0.5 * k) - 0.5 * np.log(k * np.pi)
    return np.exp(logc - 0.5 * (k + 1.0) * np.log1p(s * s / k))

def t_pdf_prime(s, k):
    s = np.asarray(s, dtype=float)
    return -t_pdf(s, k) * (k + 1.0) * s / (k + s * s)

def t_cdf(s, k):
    s = np.asarray(s, dtype=float)
    tail = 0.5 * betainc(0.5 * k, 0.5, k / (k + s * s))
    return np.where(s >= 0.0, 1.0 - tail, tail)


# ---------------------------------------------------------------------------
# co-trending OU pair


@dataclass(frozen=True)
class CtouParams:
    """Spread X reverts to trend Y at rate kappa_x; Y reverts to 0 at kappa_y.
    c_x, c_y are the (constant) instantaneous variances."""

    c_x: float = 0.04
    c_y: float = 0.0225
    kappa_x: float = 1.0
    kappa_y: float = 0.5

    def __post_init__(self):
        for name in ("c_x", "c_y", "kappa_x", "kappa_y"):
            if not (getattr(self, name) > 0.0 and np.isfinite(getattr(self, name))):
                raise DomainError(f"CTOU parameter {name} must be positive and finite")


def ctou_sigma(params: CtouParams):
    """Stationary covariance of the pair (X, Y).

    The cross term c_y kappa_x / (2 kappa_y (kappa_x + kappa_y)) is the
    variance the trend feeds into the spread; as kappa_y grows the trend
    pins to zero and Sigma collapses to the independent OU diagonal.
    """
    cx, cy, kx, ky = params.c_x, params.c_y, params.kappa_x, params.kappa_y
    cross = cy * kx / (2.0 * ky * (kx + ky))
    return np.array([[cx / (2.0 * kx) + cross, cross],
                     [cross, cy / (2.0 * ky)]])


def ctou_generator(params: CtouParams):
    """Drift matrix of the data-generating dynamics themselves:
    dX = -kappa_x (X - Y) dt + ..., dY = -kappa_y Y dt + ..."""
    return np.array([[-params.kappa_x, params.kappa_x],
                     [0.0, -params.kappa_y]])


def ctou_model(params: CtouParams) -> GaussianModel:
    """Gaussian environment for the CTOU pair: c = diag(c_x, c_y),
    Sigma = ctou_sigma, beta_X = 0.  The compatibility-pinned beta_Y must
    reproduce the OU factor drift b_Y(y) = -(kappa_y / c_y) y."""
    Sigma = ctou_sigma(params)
    c = np.diag([params.c_x, params.c_y])
    model = build_gaussian_model(c, Sigma, beta_x=np.zeros((1, 1)))
    implied = 0.5 * params.c_y * model.beta_y[0, 0]
    if abs(implied + params.kappa_y) > 1e-9 * max(params.kappa_y, 1.0):
        raise RobustGrowthError(
            f"compatibility-pinned factor drift {implied:.12g} does not match "
            f"-kappa_y = {-params.kappa_y:.12g}")
    return model


def ctou_p_hat_coefficients(params: CtouParams) -> dict:
    """Closed-form coefficient set printed for the adversarial-factor saddle
    in mean-reversion-parameter form.  Reported for comparison with the
    marginal-variance form; the two disagree in the tradable row (see the
    discrimination experiment in the CTOU report)."""
    cx, cy, kx, ky = params.c_x, params.c_y, params.kappa_x, params.kappa_y
    den_x = cx * (kx + ky) + cy * ky
    den_y = cy * kx * kx + cx * ky * (kx + ky)
    theta_hat = -kx * (kx + ky) / den_x
    return {
        "theta_hat_coeff": theta_hat,
        "x_drift_coeff": cx * theta_hat,
        "y_drift_x_coeff": cy * kx * kx * (kx + ky) / den_y,
        "y_drift_y_coeff": -(kx + ky) * (cy * kx * kx + cx * ky * ky) / den_y,
    }


def spread_to_holdings(theta, wealth, a, b):
    """Convert a spread position theta into share counts for the two legs of
    X = log S1 - (b/a) log S2 scaled by a: q1 = a theta V units of the first
    asset and q2 = -(b/a) q1 of the second (self-financing pair)."""
    if a == 0.0:
        raise DomainError("hedge coefficient a must be nonzero")
    q1 = a * theta * wealth
    q2 = -(b / a) * q1
    return q1, q2


class CtouFamily:
    name = "ctou"

    def __init__(self, params: Optional[CtouParams] = None):
        self.params = params if params is not None else CtouParams()
        self.model = ctou_model(self.params)
        self._star = self.model.theta_star()
        self._hat = self.model.theta_hat()

    def params_dict(self):
        return {"c_x": self.params.c_x, "c_y": self.params.c_y,
                "kappa_x": self.params.kappa_x, "kappa_y": self.params.kappa_y}

    def inputs(self) -> ModelInputs:
        return self.model.to_model_inputs(name="ctou")

    def theta_star_xy(self, x, y):
        G = -0.5 * np.concatenate([self.model.M_x, self.model.M_y], axis=1)[0]
        return G[0] * np.asarray(x, float) + G[1] * np.asarray(y, float)

    def theta_hat_x(self, x):
        return -0.5 * np.asarray(x, float) / self.model.sig_x[0, 0]

    def theta_star_field(self) -> StrategyField:
        return self._star

    def theta_hat_field(self) -> StrategyField:
        return self._hat

    def u_field(self):
        return self.model.u

    def default_y_values(self):
        return np.linspace(-2.0, 2.0, 11)

    def default_x_grid(self):
        return np.linspace(-3.0, 3.0, 241)


# ---------------------------------------------------------------------------
# Student-t pair


@dataclass(frozen=True)
class TDistParams:
    """Bivariate Student-t invariant law with nu degrees of freedom and
    covariance-scale matrix Sigma (nu > 2 keeps Sigma interpretable as the
    stationary covariance scale); constant diagonal c."""

    nu: float = 3.0
    sigma_xx: float = 0.035
    sigma_xy: float = 0.015
    sigma_yy: float = 0.0225
    c_x: float = 0.04
    c_y: float = 0.0225

    def __post_init__(self):
        if not self.nu > 2.0:
            raise DomainError("degrees of freedom nu must exceed 2")
        det = self.sigma_xx * self.sigma_yy - self.sigma_xy ** 2
        if not (self.sigma_xx > 0 and det > 0):
            raise DomainError("Sigma scale matrix must be positive definite")
        if not (self.c_x > 0 and self.c_y > 0):
            raise DomainError("c_x and c_y must be positive")

    @property
    def sigma(self):
        return np.array([[self.sigma_xx, self.sigma_xy],
                         [self.sigma_xy, self.sigma_yy]])


class TDistFamily:
    name = "tdist"

    def __init__(self, params: Optional[TDistParams] = None):
        self.params = params if params is not None else TDistParams()
        p = self.params
        self.S = np.linalg.inv(p.sigma)
        self.det = float(np.linalg.det(p.sigma))
        nu = p.nu
        self._log_norm = (gammaln(0.5 * (nu + 2.0)) - gammaln(0.5 * nu)
                          - np.log(nu * np.pi) - 0.5 * np.log(self.det))
        self._log_norm_y = (gammaln(0.5 * (nu + 1.0)) - gammaln(0.5 * nu)
                            - 0.5 * np.log(nu * np.pi * p.sigma_yy))

    def params_dict(self):
        p = self.params
        return {"nu": p.nu, "sigma_xx": p.sigma_xx, "sigma_xy": p.sigma_xy,
                "sigma_yy": p.sigma_yy, "c_x": p.c_x, "c_y": p.c_y}

    # -- density and derivatives -----------------------------------------
    def _q(self, x, y):
        S = self.S
        return S[0, 0] * x * x + 2.0 * S[0, 1] * x * y + S[1, 1] * y * y

    def density(self, z):
        z = np.asarray(z, dtype=float)
        x, y = z[..., 0], z[..., 1]
        nu = self.params.nu
        return np.exp(self._log_norm
                      - 0.5 * (nu + 2.0) * np.log1p(self._q(x, y) / nu))

    def grad_log_density(self, z):
        z = np.asarray(z, dtype=float)
        nu = self.params.nu
        x, y = z[..., 0], z[..., 1]
        r = nu + self._q(x, y)
        return -(nu + 2.0) / r[..., None] * (z @ self.S)

    def marginal_y(self, y):
        y = np.asarray(y, dtype=float)
        nu, syy = self.params.nu, self.params.sigma_yy
        return np.exp(self._log_norm_y
                      - 0.5 * (nu + 1.0) * np.log1p(y * y / (nu * syy)))

    def b_y(self, y):
        """Half the score of the factor marginal: the unique compatible
        factor drift whose flux vanishes after integrating out x."""
        y = np.asarray(y, dtype=float)
        nu, syy = self.params.nu, self.params.sigma_yy
        return -(nu + 1.0) * y / (2.0 * (nu * syy + y * y))

    def _b_y_prime(self, y):
        nu, syy = self.params.nu, self.params.sigma_yy
        w = nu * syy + y * y
        return -(nu + 1.0) * (nu * syy - y * y) / (2.0 * w * w)

    def div_y_flux(self, z):
        """Analytic div_y(c_Y ell_Y p) = c_y (p_yy / 2 - b' p - b p_y)."""
        z = np.asarray(z, dtype=float)
        x, y = z[..., 0], z[..., 1]
        nu = self.params.nu
        S = self.S
        q = self._q(x, y)
        r = nu + q
        q_y = 2.0 * (S[1, 0] * x + S[1, 1] * y)
        q_yy = 2.0 * S[1, 1]
        L_y = -0.5 * (nu + 2.0) * q_y / r
        L_yy = -0.5 * (nu + 2.0) * (q_yy * r - q_y * q_y) / (r * r)
        p = self.density(z)
        p_y = p * L_y
        p_yy = p * (L_y * L_y + L_yy)
        b = self.b_y(y)
        return self.params.c_y * (0.5 * p_yy - self._b_y_prime(y) * p - b * p_y)

    # -- conditional-CDF machinery for u ----------------------------------
    def _d_field(self, x, y):
        """D = d/dy [ p_Y(y) dF(x|y)/dy ] where F is the conditional CDF of
        x given y (a Student-t with nu+1 dof, location mu(y), scale tau(y))."""
        p = self.params
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        nu, syy, sxy = p.nu, p.sigma_yy, p.sigma_xy
        k = nu + 1.0
        kappa0 = self.det / (k * syy * syy)
        w = y * y + nu * syy
        tau = np.sqrt(kappa0 * w)
        tau_p = kappa0 * y / tau
        tau_pp = (kappa0 - tau_p * tau_p) / tau
        mu_p = sxy / syy
        s = (x - mu_p * y) / tau
        s_y = -(mu_p + s * tau_p) / tau
        s_yy = -(2.0 * s_y * tau_p + s * tau_pp) / tau
        f = t_pdf(s, k)
        fp = t_pdf_prime(s, k)
        p_y_val = self.marginal_y(y)
        p_y_prime = p_y_val * (-k * y / w)
        return p_y_prime * f * s_y + p_y_val * (fp * s_y * s_y + f * s_yy)

    def conditional_cdf(self, x, y):
        p = self.params
        k = p.nu + 1.0
        kappa0 = self.det / (k * p.sigma_yy ** 2)
        tau = np.sqrt(kappa0 * (np.asarray(y, float) ** 2 + p.nu * p.sigma_yy))
        mu = (p.sigma_xy / p.sigma_yy) * np.asarray(y, float)
        return t_cdf((np.asarray(x, float) - mu) / tau, k)

    def u_xy(self, x, y):
        return 0.5 * self.params.c_y * self._d_field(x, y)

    def u_field(self):
        def u(z):
            z = np.asarray(z, dtype=float)
            return self.u_xy(z[..., 0], z[..., 1])[..., None]
        return u

    # -- strategies ---------------------------------------------------------
    def theta_star_xy(self, x, y):
        """Half the x-score plus the (c_X)^{-1} u / p correction, in the
        conditional-CDF closed form."""
        z = np.stack(np.broadcast_arrays(np.asarray(x, float),
                                         np.asarray(y, float)), axis=-1)
        glp_x = self.grad_log_density(z)[..., 0]
        ratio = self._d_field(z[..., 0], z[..., 1]) / self.density(z)
        return 0.5 * glp_x + (self.params.c_y / (2.0 * self.params.c_x)) * ratio

    def theta_hat_x(self, x):
        """Half the score of the heavy-tailed x-marginal: position peaks at
        x = sqrt(nu Sigma_X) and decays to zero, unlike the Gaussian line."""
        x = np.asarray(x, dtype=float)
        nu, sxx = self.params.nu, self.params.sigma_xx
        return -(nu + 1.0) * x / (2.0 * (nu * sxx + x * x))

    def theta_hat_peak(self):
        nu, sxx = self.params.nu, self.params.sigma_xx
        x_peak = np.sqrt(nu * sxx)
        return x_peak, (nu + 1.0) / (4.0 * x_peak)

    def theta_star_field(self) -> StrategyField:
        return scalar_strategy(self.theta_star_xy, "theta_star", family=self.name)

    def theta_hat_field(self) -> StrategyField:
        return scalar_strategy(lambda x, y: self.theta_hat_x(x), "theta_hat",
                               family=self.name)

    # -- generic inputs -----------------------------------------------------
    def truncation_radius(self, axis: int, floor: float = 1e-12):
        """Coordinate radius where the joint density falls below `floor`."""
        nu = self.params.nu
        qmax = nu * ((np.exp(self._log_norm) / floor) ** (2.0 / (nu + 2.0)) - 1.0)
        return float(np.sqrt(qmax / self.S[axis, axis]))

    def inputs(self) -> ModelInputs:
        p = self.params
        rx = self.truncation_radius(0)
        ry = self.truncation_radius(1)
        box = DomainBox(d=1, m=1,
                        e_bounds=((-np.inf, np.inf),),
                        d_bounds=((-np.inf, np.inf),),
                        truncation=((-rx, rx), (-ry, ry)))
        cmat = np.diag([p.c_x, p.c_y])

        def c_field(z):
            z = np.asarray(z, dtype=float)
            return np.broadcast_to(cmat, z.shape[:-1] + (2, 2))

        def edge_builder(b):
            return [quad.graded_edges(lo, hi, n_panels_side=44, growth=1.35)
                    for lo, hi in b.truncation]

        return ModelInputs(
            domain=box, c=c_field, p=self.density,
            b_y=lambda z: self.b_y(np.asarray(z, float)[..., 1])[..., None],
            div_c=lambda z: np.zeros(np.asarray(z, float).shape),
            grad_log_p=self.grad_log_density,
            div_y_flux_fn=self.div_y_flux,
            edge_builder=edge_builder, name=self.name)

    def default_y_values(self):
        return np.linspace(-3.0, 3.0, 11)

    def default_x_grid(self):
        return np.linspace(-3.0, 3.0, 241)


# ---------------------------------------------------------------------------
# stochastic-volatility factor


@dataclass(frozen=True)
class StochVolParams:
    """Square-root variance factor dY = kappa (nu - Y) dt + sigma sqrt(Y) dW,
    state X Gaussian given Y, optional leverage correlation rho.
    Requires the Feller condition 2 kappa nu > sigma^2 (else the factor hits
    zero and the gamma law degenerates)."""

    kappa: float = 5.0
    nu: float = 0.04
    sigma: float = 0.6
    rho: float = 0.0

    def __post_init__(self):
        if not (self.kappa > 0 and self.nu > 0 and self.sigma > 0):
            raise DomainError("kappa, nu, sigma must be positive")
        if not abs(self.rho) < 1.0:
            raise DomainError("|rho| must be < 1")
        if not 2.0 * self.kappa * self.nu > self.sigma ** 2:
            raise FellerConditionError(
                f"Feller condition violated: 2*kappa*nu = "
                f"{2.0 * self.kappa * self.nu:.6g} <= sigma^2 = {self.sigma ** 2:.6g}")

    @property
    def alpha(self):
        return 2.0 * self.kappa * self.nu / self.sigma ** 2

    @property
    def beta(self):
        return 2.0 * self.kappa / self.sigma ** 2


def gamma_normal_marginal(x, alpha, beta, n_panels: int = 120,
                          nodes_per_panel: int = 8):
    """Marginal density of x when x | y ~ N(0, y) and y ~ Gamma(alpha, beta),
    by Gauss-Legendre quadrature over log y."""
    x = np.asarray(x, dtype=float)
    lo = float(gammaincinv(alpha, 1e-16)) / beta
    hi = float(gammaincinv(alpha, 1.0 - 1e-14)) / beta
    # for large |x| the integrand peaks near y = |x| / sqrt(2 beta), which can
    # sit beyond the gamma quantile; widen the window so the peak is covered
    if x.size:
        hi = max(hi, 2.0 * float(np.max(np.abs(x))) / np.sqrt(2.0 * beta) + hi)
    t_edges = np.log(quad.log_edges(lo, hi, n_panels))
    tt, ww = quad.panel_nodes(t_edges, nodes_per_panel)
    yy = np.exp(tt)
    logw = (alpha * np.log(beta) - gammaln(alpha) - 0.5 * np.log(2.0 * np.pi)
            + (alpha - 0.5) * tt - beta * yy)
    expo = logw[None, :] - 0.5 * (x.reshape(-1, 1) ** 2) / yy[None, :]
    vals = np.exp(expo) @ ww
    return vals.reshape(x.shape)


def gamma_normal_marginal_bessel(x, alpha, beta):
    """Same marginal in closed Bessel-K form (x != 0); quadrature oracle."""
    x = np.abs(np.asarray(x, dtype=float))
    nu_ord = alpha - 0.5
    logc = alpha * np.log(beta) - gammaln(alpha) - 0.5 * np.log(2.0 * np.pi)
    return 2.0 * np.exp(logc + nu_ord * np.log(x / np.sqrt(2.0 * beta))) \
        * kv(nu_ord, np.sqrt(2.0 * beta) * x)


class _CachedMarginal:
    """Marginal density cached on a uniform x-grid with cubic interpolation;
    near the origin (where the density has a weak |x|^(2 alpha - 1) kink) it
    falls back to direct quadrature."""

    def __init__(self, alpha, beta, x_max, n_grid: int = 4097, x_core: float = 0.05):
        self.alpha, self.beta = alpha, beta
        self.x_core = x_core
        grid = np.linspace(-x_max, x_max, n_grid)
        self._spline = CubicSpline(grid, gamma_normal_marginal(grid, alpha, beta))
        self.x_max = x_max

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        near = np.abs(x) < self.x_core
        far = ~near
        if np.any(near):
            out[near] = gamma_normal_marginal(x[near], self.alpha, self.beta)
        if np.any(far):
            out[far] = self._spline(np.clip(x[far], -self.x_max, self.x_max))
        return out


class StochVolFamily:
    name = "stochvol"

    def __init__(self, params: Optional[StochVolParams] = None):
        self.params = params if params is not None else StochVolParams()
        p = self.params
        self.alpha = p.alpha
        self.beta = p.beta
        self.y_lo = float(gammaincinv(self.alpha, 1e-10)) / self.beta
        self.y_hi = float(gammaincinv(self.alpha, 1.0 - 1e-10)) / self.beta
        self.x_max = 8.0 * np.sqrt(self.y_hi)
        self._marg = None
        self._marg1 = None

    def params_dict(self):
        p = self.params
        return {"kappa": p.kappa, "nu": p.nu, "sigma": p.sigma, "rho": p.rho,
                "alpha": self.alpha, "beta": self.beta}

    # -- density and derivatives -----------------------------------------
    def log_density(self, z):
        z = np.asarray(z, dtype=float)
        x, y = z[..., 0], z[..., 1]
        if np.any(y <= 0.0):
            raise DomainError("stochvol factor must stay positive")
        a, b = self.alpha, self.beta
        return (-0.5 * np.log(2.0 * np.pi * y) - 0.5 * x * x / y
                + a * np.log(b) - gammaln(a) + (a - 1.0) * np.log(y) - b * y)

    def density(self, z):
        return np.exp(self.log_density(z))

    def grad_log_density(self, z):
        z = np.asarray(z, dtype=float)
        x, y = z[..., 0], z[..., 1]
        gx = -x / y
        gy = -0.5 / y + 0.5 * x * x / (y * y) + (self.alpha - 1.0) / y - self.beta
        return np.stack([gx, gy], axis=-1)

    def c_field(self, z):
        z = np.asarray(z, dtype=float)
        y = z[..., 1]
        p = self.params
        out = np.empty(z.shape[:-1] + (2, 2))
        out[..., 0, 0] = y
        out[..., 0, 1] = p.rho * p.sigma * y
        out[..., 1, 0] = p.rho * p.sigma * y
        out[..., 1, 1] = p.sigma ** 2 * y
        return out

    def div_c(self, z):
        z = np.asarray(z, dtype=float)
        p = self.params
        out = np.empty(z.shape)
        out[..., 0] = p.rho * p.sigma
        out[..., 1] = p.sigma ** 2
        return out

    def b_y(self, y):
        p = self.params
        y = np.asarray(y, dtype=float)
        return p.kappa * (p.nu - y) / (p.sigma ** 2 * y)

    def ell_x_xy(self, x, y):
        p = self.params
        k, nu, s, r = p.kappa, p.nu, p.sigma, p.rho
        return (r * s * x * x / (4.0 * y * y) - x / (2.0 * y)
                + (4.0 * k * nu * r - r * s * s) / (4.0 * s * y) - k * r / s)

    def ell_y_xy(self, x, y):
        p = self.params
        return (x * x / (4.0 * y * y) - 1.0 / (4.0 * y)
                - p.rho * x / (2.0 * p.sigma * y))

    def div_y_flux(self, z):
        """v = c_y ell_Y p = (s^2 x^2/(4y) - s^2/4 - rho s x / 2) p;
        d_y v = -s^2 x^2/(4 y^2) p + v d_y log p."""
        z = np.asarray(z, dtype=float)
        x, y = z[..., 0], z[..., 1]
        s = self.params.sigma
        p = self.density(z)
        bracket = s * s * x * x / (4.0 * y) - 0.25 * s * s \
            - 0.5 * self.params.rho * s * x
        gy = self.grad_log_density(z)[..., 1]
        return (-s * s * x * x / (4.0 * y * y)) * p + bracket * gy * p

    # -- closed forms -------------------------------------------------------
    def u_xy(self, x, y):
        p = self.params
        k, nu, s, r = p.kappa, p.nu, p.sigma, p.rho
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        num = (-s ** 3 * x ** 3 + 2.0 * r * s * s * x * x * y
               + 4.0 * k * s * x * y * y + (3.0 * s ** 3 - 4.0 * k * nu * s) * x * y
               - 8.0 * k * r * y ** 3 + (8.0 * k * nu * r - 2.0 * r * s * s) * y * y)
        z = np.stack(np.broadcast_arrays(x, y), axis=-1)
        return num / (8.0 * s * y * y) * self.density(z)

    def u_field(self):
        def u(z):
            z = np.asarray(z, dtype=float)
            return self.u_xy(z[..., 0], z[..., 1])[..., None]
        return u

    def theta_star_xy(self, x, y):
        p = self.params
        k, nu, s, r = p.kappa, p.nu, p.sigma, p.rho
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        num = (-s ** 3 * x ** 3 + 4.0 * r * s * s * x * x * y
               + 4.0 * s * (k - 1.0) * x * y * y
               + (3.0 * s ** 3 - 4.0 * k * nu * s) * x * y
               - 16.0 * k * r * y ** 3 + (16.0 * k * nu * r - 4.0 * r * s * s) * y * y)
        return num / (8.0 * s * y ** 3)

    # -- marginal-based adversarial-factor strategy -----------------------
    def _marginals(self):
        if self._marg is None:
            self._marg = _CachedMarginal(self.alpha, self.beta, self.x_max)
            self._marg1 = _CachedMarginal(self.alpha + 1.0, self.beta, self.x_max)
        return self._marg, self._marg1

    def theta_hat_x(self, x):
        """-(alpha/2 beta) x times the ratio of the x-marginals at shapes
        alpha and alpha+1; saturates at -+ alpha^2 / (sqrt(2) beta^(3/2))."""
        m0, m1 = self._marginals()
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        nz = x != 0.0
        if np.any(nz):
            out[nz] = -(self.alpha / (2.0 * self.beta)) * x[nz] * m0(x[nz]) / m1(x[nz])
        return out

    def theta_hat_limit(self):
        return self.alpha ** 2 / (np.sqrt(2.0) * self.beta ** 1.5)

    def theta_star_field(self) -> StrategyField:
        return scalar_strategy(self.theta_star_xy, "theta_star", family=self.name)

    def theta_hat_field(self) -> StrategyField:
        return scalar_strategy(lambda x, y: self.theta_hat_x(x), "theta_hat",
                               family=self.name)

    # -- generic inputs -----------------------------------------------------
    def inputs(self) -> ModelInputs:
        box = DomainBox(d=1, m=1,
                        e_bounds=((-np.inf, np.inf),),
                        d_bounds=((0.0, np.inf),),
                        truncation=((-self.x_max, self.x_max),
                                    (self.y_lo, self.y_hi)))

        def edge_builder(b):
            (xlo, xhi), (ylo, yhi) = b.truncation
            pos = np.geomspace(1e-2 * np.sqrt(ylo), xhi, 57)
            x_edges = np.concatenate([-pos[::-1], pos])
            y_edges = quad.log_edges(ylo, yhi, 80)
            return [x_edges, y_edges]

        return ModelInputs(
            domain=box, c=self.c_field, p=self.density,
            b_y=lambda z: self.b_y(np.asarray(z, float)[..., 1])[..., None],
            div_c=self.div_c,
            grad_log_p=self.grad_log_density,
            div_y_flux_fn=self.div_y_flux,
            edge_builder=edge_builder, name=self.name)

    def default_y_values(self):
        return np.linspace(0.0225, 0.0575, 11)

    def default_x_grid(self):
        return np.linspace(-1.0, 1.0, 241)


# ---------------------------------------------------------------------------
# slice tables


@dataclass
class SliceTable:
    family: str
    params: dict
    x_grid: np.ndarray
    y_values: np.ndarray
    theta_hat: np.ndarray
    theta_star: np.ndarray  # shape (len(y_values), len(x_grid))


def slice_table(family, x_grid, y_values) -> SliceTable:
    """Tabulate theta*(x, y) for each factor slice y and theta_hat(x) on a
    shared x-grid."""
    x_grid = np.asarray(x_grid, dtype=float)
    y_values = np.asarray(y_values, dtype=float)
    if family.name == "stochvol" and np.any(y_values <= 0.0):
        raise DomainError("stochvol slices need positive factor values")
    theta_star = np.stack([np.asarray(family.theta_star_xy(x_grid, yv), float)
                           for yv in y_values])
    theta_hat = np.asarray(family.theta_hat_x(x_grid), dtype=float)
    return SliceTable(family=family.name, params=family.params_dict(),
                      x_grid=x_grid, y_values=y_values,
                      theta_hat=theta_hat, theta_star=theta_star)


FAMILY_CLASSES = {"ctou": CtouFamily, "tdist": TDistFamily,
                  "stochvol": StochVolFamily}


def make_family(name: str, params=None):
    try:
        cls = FAMILY_CLASSES[name]
    except KeyError:
        raise DomainError(f"unknown example family {name!r}; "
                          f"choose from {sorted(FAMILY_CLASSES)}") from None
    return cls(params)
