"""Prebuilt experiment wiring: saddle dynamics per example family, growth
reference values, ergodic check definitions, and the discrimination
experiment that settles which adversarial-factor candidate is the optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError
from .gaussian import GaussianModel, LinearDynamics, linear_growth_rate, spd_sqrt
from .pairs import CtouFamily, StochVolFamily, TDistFamily, ctou_p_hat_coefficients
from .simulate import (DynamicsSpec, ErgodicReport, GrowthReport, SimConfig,
                       linear_spec, simulate_ergodic_averages, simulate_growth)
from .strategy import linear_strategy, zero_strategy


# ---------------------------------------------------------------------------
# saddle dynamics


def star_dynamics(family) -> DynamicsSpec:
    """State dynamics under the trusted-factor saddle: the invariant density
    of these dynamics is the model's p, and theta* is growth-optimal."""
    if isinstance(family, CtouFamily):
        return linear_spec(family.model.worst_case_star(), d=1, name="star")
    if isinstance(family, TDistFamily):
        p = family.params
        fac = np.diag([np.sqrt(p.c_x), np.sqrt(p.c_y)])
        cmat = np.diag([p.c_x, p.c_y])
        shape = np.array([[p.sigma_xx, p.sigma_xy], [p.sigma_xy, p.sigma_yy]])
        chol = np.linalg.cholesky(shape)

        def drift(z):
            z = np.asarray(z, dtype=float)
            dx = p.c_x * family.theta_star_xy(z[..., 0], z[..., 1])
            dy = p.c_y * family.b_y(z[..., 1])
            return np.stack([dx, dy], axis=-1)

        def init_sampler(rng, n):
            g = rng.standard_normal((n, 2)) @ chol.T
            scale = np.sqrt(p.nu / rng.chisquare(p.nu, size=n))
            return g * scale[:, None]

        return DynamicsSpec(name="star", d=1, dim=2, drift=drift,
                            diffusion_factor=fac, c_x=cmat[:1, :1],
                            c_full=cmat, z0=np.zeros(2),
                            init_sampler=init_sampler)
    if isinstance(family, StochVolFamily):
        raise DomainError(
            "the stochvol saddle state dynamics are not simulated: the "
            "optimizer's quadratic variation density is non-integrable near "
            "y = 0, so explicit stepping is unstable there; use "
            "stochvol_factor_dynamics for the factor ergodic check")
    raise DomainError(f"no saddle dynamics wired for {type(family).__name__}")


def hat_dynamics(family) -> DynamicsSpec:
    """State dynamics under the adversarial-factor saddle (Gaussian only)."""
    if isinstance(family, CtouFamily):
        return linear_spec(family.model.worst_case_hat(), d=1, name="hat")
    raise DomainError("the adversarial-factor saddle is only available in "
                      "closed form for the Gaussian families")


def stochvol_factor_dynamics(family: StochVolFamily) -> DynamicsSpec:
    """Factor-only dynamics dY = kappa (nu - Y) dt + sigma sqrt(Y) dW under
    the saddle (the factor drift is the same under p); full-truncation floor
    at 1e-12."""
    p = family.params

    def drift(z):
        return p.kappa * (p.nu - np.asarray(z, dtype=float))

    def factor(z):
        y = np.asarray(z, dtype=float)[..., 0]
        return (p.sigma * np.sqrt(np.maximum(y, 0.0)))[..., None, None]

    def c_full(z):
        y = np.asarray(z, dtype=float)[..., 0]
        return (p.sigma ** 2 * y)[..., None, None]

    gamma_shape = 2.0 * p.kappa * p.nu / p.sigma ** 2
    gamma_scale = p.sigma ** 2 / (2.0 * p.kappa)

    def init_sampler(rng, n):
        return rng.gamma(gamma_shape, gamma_scale, size=(n, 1))

    return DynamicsSpec(name="stochvol_factor", d=0, dim=1, drift=drift,
                        diffusion_factor=factor, c_full=c_full,
                        guard_lower=np.array([1e-12]), z0=np.array([p.nu]),
                        scheme="cir-full-truncation",
                        init_sampler=init_sampler)


# ---------------------------------------------------------------------------
# references and strategy menus


def ctou_references(model: GaussianModel) -> dict:
    return {"lambda_p": model.lambda_p(),
            "lambda_pi": model.lambda_pi(),
            "growth_gap": model.growth_gap(),
            "g_star_under_hat": model.growth_theta_star_under_hat()}


def strategy_menu(family, keys) -> list:
    """Map short strategy keys (star, hat, zero) to strategy fields."""
    out = []
    for key in keys:
        key = key.strip().lower()
        if key == "star":
            out.append(family.theta_star_field())
        elif key == "hat":
            out.append(family.theta_hat_field())
        elif key == "zero":
            out.append(zero_strategy(1, 2))
        else:
            raise DomainError(f"unknown strategy {key!r} (choose star, hat, zero)")
    return out


def growth_experiment(family, measure: str, strategy_keys, cfg: SimConfig) -> GrowthReport:
    """Simulate wealth growth for the family under the chosen saddle."""
    if measure == "star":
        dyn = star_dynamics(family)
    elif measure == "hat":
        dyn = hat_dynamics(family)
    else:
        raise DomainError(f"unknown measure {measure!r} (choose star or hat)")
    refs = ctou_references(family.model) if isinstance(family, CtouFamily) else {}
    return simulate_growth(dyn, strategy_menu(family, strategy_keys), cfg,
                           references=refs, measure=measure)


def snapshot_growth_config(n_paths: int = 10000, dt: float = 1e-3,
                           seed: int = 812970) -> SimConfig:
    """Boxplot experiment: one run to T = 30 with snapshots at 10, 20, 30."""
    return SimConfig(t_horizon=30.0, dt=dt, n_paths=n_paths, seed=seed,
                     snapshot_times=(10.0, 20.0, 30.0))


# ---------------------------------------------------------------------------
# ergodic checks


def ctou_ergodic(family: CtouFamily, t_horizon: float = 200.0, dt: float = 1e-3,
                 n_paths: int = 8, seed: int = 812970) -> ErgodicReport:
    """Time averages of x^2, y^2, xy under the trusted-factor saddle against
    the stationary covariance entries."""
    model = family.model
    dyn = star_dynamics(family)
    cfg = SimConfig(t_horizon=t_horizon, dt=dt, n_paths=n_paths, seed=seed)
    obs = [("x^2", lambda z: z[:, 0] ** 2, model.sig_x[0, 0]),
           ("y^2", lambda z: z[:, 1] ** 2, model.sig_y[0, 0]),
           ("x*y", lambda z: z[:, 0] * z[:, 1], model.sig_xy[0, 0])]
    return simulate_ergodic_averages(dyn, cfg, obs)


def stochvol_ergodic(family: StochVolFamily, t_horizon: float = 200.0,
                     dt: float = 1e-3, n_paths: int = 8,
                     seed: int = 812970) -> ErgodicReport:
    """Time average of the variance factor against its gamma mean nu."""
    dyn = stochvol_factor_dynamics(family)
    cfg = SimConfig(t_horizon=t_horizon, dt=dt, n_paths=n_paths, seed=seed)
    obs = [("y", lambda z: z[:, 0], family.params.nu)]
    return simulate_ergodic_averages(dyn, cfg, obs)


# ---------------------------------------------------------------------------
# the adversarial-factor candidate discrimination experiment


def ctou_alt_hat_dynamics(family: CtouFamily) -> LinearDynamics:
    """Adversarial-factor saddle built from the mean-reversion-form
    coefficient set instead of the marginal-variance form.  Attached
    stationary covariance is the model Sigma, so lyapunov_residual measures
    whether these dynamics actually keep p invariant."""
    coeffs = ctou_p_hat_coefficients(family.params)
    K = np.array([[coeffs["x_drift_coeff"], 0.0],
                  [coeffs["y_drift_x_coeff"], coeffs["y_drift_y_coeff"]]])
    c = family.model.c
    return LinearDynamics(K=K, c=c, c_half=spd_sqrt(c), name="hat_alt",
                          stationary_sigma=family.model.Sigma)


@dataclass
class CandidateResult:
    name: str
    coefficient: float
    sample_mean: float
    sample_se: float
    z_score: float
    attains_target: bool
    predicted_growth: float


@dataclass
class DiscriminationReport:
    target: float
    candidates: list
    growth_report: GrowthReport
    alt_lyapunov_residual: float
    statement: str

    @property
    def winner(self) -> Optional[str]:
        hits = [c.name for c in self.candidates if c.attains_target]
        return hits[0] if len(hits) == 1 else None


def discriminate_theta_hat(family: CtouFamily, cfg: Optional[SimConfig] = None,
                           n_se: float = 3.0) -> DiscriminationReport:
    """Simulate both closed-form candidates for the adversarial-factor
    optimizer under the trusted-factor saddle and check which one's growth
    matches lambda_pi.  The verdict is read off the samples, not assumed.

    Candidates: the marginal-variance form theta(x) = -1/2 (Sigma_X)^{-1} x
    and the mean-reversion form theta(x) = -kx(kx+ky)/(cx(kx+ky)+cy ky) x.
    """
    model = family.model
    if cfg is None:
        cfg = SimConfig(t_horizon=30.0, dt=1e-3, n_paths=10000, seed=812970)
    coeff_margin = -0.5 / model.sig_x[0, 0]
    coeff_meanrev = ctou_p_hat_coefficients(family.params)["theta_hat_coeff"]
    cands = [("hat_marginal_variance", coeff_margin),
             ("hat_mean_reversion", coeff_meanrev)]
    strategies = [linear_strategy([[w, 0.0]], name=nm, family="ctou")
                  for nm, w in cands]

    star = model.worst_case_star()
    dyn = linear_spec(star, d=1, name="star")
    target = model.lambda_pi()
    report = simulate_growth(dyn, strategies, cfg, measure="star",
                             references={"lambda_pi": target})

    results = []
    for nm, w in cands:
        mean, se = report.mean_se(nm)
        z = abs(mean - target) / se
        predicted = linear_growth_rate(np.array([[w, 0.0]]), star.K, model.c,
                                       model.Sigma, d=1)
        results.append(CandidateResult(name=nm, coefficient=w, sample_mean=mean,
                                       sample_se=se, z_score=z,
                                       attains_target=bool(z <= n_se),
                                       predicted_growth=predicted))

    alt_res = ctou_alt_hat_dynamics(family).lyapunov_residual()
    lines = [f"target growth rate lambda_pi = {target:.9g}; "
             f"T = {cfg.t_horizon:g}, {cfg.n_paths} paths under the "
             "trusted-factor saddle"]
    for r in results:
        verdict = "attains" if r.attains_target else "does NOT attain"
        lines.append(
            f"candidate {r.name} (coefficient {r.coefficient:.6f}): sample "
            f"mean {r.sample_mean:.6f} (SE {r.sample_se:.2g}, {r.z_score:.2f} "
            f"SE from target) -> {verdict} the target; analytic rate under "
            f"this saddle {r.predicted_growth:.6f}")
    hits = [r for r in results if r.attains_target]
    if len(hits) == 1:
        lines.append(
            f"outcome: {hits[0].name} is the adversarial-factor optimizer; "
            "the mean-reversion coefficient set is also not stationary for "
            f"the model law (Lyapunov residual {alt_res:.3g}, vs ~1e-16 for "
            "the marginal-variance saddle)")
    elif not hits:
        lines.append("outcome: NEITHER candidate attains the target; "
                     "investigate before trusting either closed form")
    else:
        lines.append("outcome: INCONCLUSIVE, both candidates within "
                     f"{n_se:g} SE; increase n_paths or T")
    return DiscriminationReport(target=target, candidates=results,
                                growth_report=report,
                                alt_lyapunov_residual=alt_res,
                                statement="\n".join(lines))
