"""Randomized verification battery over Gaussian factor models.

Draws well-conditioned random models of mixed dimensions (tradable block d,
factor block m) and checks, for each model:

- ``compatibility``: the x-integrated factor-flux residual vanishes,
- ``divergence``: finite-difference div_x of the closed-form u matches the
  analytic factor flux div_y(c_Y ell_Y p),
- ``lyapunov_star``: the saddle dynamics leave the stationary covariance
  invariant, K Sigma + Sigma K' + c = 0,
- ``degenerate_m_y`` / ``degenerate_gap``: rebuilding the model with the
  degeneracy-inducing beta_X kills the factor-feedback block of the optimal
  strategy and collapses the growth gap to zero,
- ``trace_vs_moment``: two independent routes to the robust growth rate
  (block traces vs. stationary second moments) agree.

The battery is deterministic given its seed and is reused verbatim by the
``gaussian-suite`` CLI command and the acceptance tests.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .gaussian import GaussianModel, build_gaussian_model
from .simulate import DEFAULT_SEED

THRESHOLDS = {
    "compatibility": 1e-6,
    "divergence": 1e-5,
    "lyapunov_star": 1e-8,
    "degenerate_m_y": 1e-9,
    "degenerate_gap": 1e-9,
    "trace_vs_moment": 1e-10,
}


@dataclass(frozen=True)
class SuiteCheck:
    name: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value < self.threshold)


@dataclass(frozen=True)
class ModelRecord:
    model_id: int
    d: int
    m: int
    star_stable: bool
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


@dataclass(frozen=True)
class SuiteReport:
    n_models: int
    seed: int
    max_dim: int
    records: list

    @property
    def n_failed(self) -> int:
        return sum(1 for r in self.records if not r.passed)

    @property
    def all_passed(self) -> bool:
        return self.n_failed == 0

    def worst(self) -> dict:
        """Largest observed residual per check name across all models."""
        out = {}
        for rec in self.records:
            for chk in rec.checks:
                out[chk.name] = max(out.get(chk.name, 0.0), chk.value)
        return out

    def rows(self):
        for rec in self.records:
            for chk in rec.checks:
                yield [rec.model_id, rec.d, rec.m, chk.name, chk.value,
                       chk.threshold, chk.passed]

    def __str__(self):
        lines = [f"gaussian suite: {self.n_models} models, seed {self.seed}, "
                 f"dims up to {self.max_dim}"]
        for name, value in sorted(self.worst().items()):
            status = "PASS" if value < THRESHOLDS[name] else "FAIL"
            lines.append(f"  {status}  {name:<16s} worst {value:.3e}  "
                         f"(tol {THRESHOLDS[name]:.0e})")
        lines.append(f"  models failed: {self.n_failed} / {self.n_models}")
        return "\n".join(lines)


def random_orthogonal(rng, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_spd(rng, n: int, eig_low: float = 0.5,
               eig_high: float = 2.0) -> np.ndarray:
    """Random SPD matrix with eigenvalues in [eig_low, eig_high]; the O(1),
    well-conditioned scaling keeps finite-difference residual budgets tight."""
    q = random_orthogonal(rng, n)
    eigs = rng.uniform(eig_low, eig_high, size=n)
    return q @ np.diag(eigs) @ q.T


def random_gaussian_model(rng, max_dim: int = 3) -> GaussianModel:
    d = int(rng.integers(1, max_dim + 1))
    m = int(rng.integers(1, max_dim + 1))
    n = d + m
    c = random_spd(rng, n)
    Sigma = random_spd(rng, n)
    beta_x = 0.5 * rng.standard_normal((m, d))
    return build_gaussian_model(c, Sigma, beta_x, d=d)


def divergence_residual(model: GaussianModel, points, h: float = 1e-3) -> float:
    """max |FD div_x u - div_y(c_Y ell_Y p)| over the given points."""
    z = np.atleast_2d(np.asarray(points, dtype=float))
    div = np.zeros(z.shape[0])
    for i in range(model.d):
        zp = z.copy()
        zp[:, i] += h
        zm = z.copy()
        zm[:, i] -= h
        div += (model.u(zp)[:, i] - model.u(zm)[:, i]) / (2.0 * h)
    return float(np.max(np.abs(div - model.div_y_flux(z))))


def check_model(model: GaussianModel, rng, model_id: int = 0,
                n_points: int = 40, fd_step: float = 1e-3) -> ModelRecord:
    n = model.d + model.m
    half = np.linalg.cholesky(model.Sigma)
    z = rng.standard_normal((n_points, n)) @ half.T
    y = z[:, model.d:]

    compat = float(np.max(np.abs(model.compatibility_residual(y))))
    diver = divergence_residual(model, z, h=fd_step)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        dyn_star = model.worst_case_star()
    lyap = dyn_star.lyapunov_residual(model.Sigma)

    degen = build_gaussian_model(model.c, model.Sigma,
                                 model.degenerate_beta_x(), d=model.d)
    degen_m_y = float(np.max(np.abs(degen.M_y)))
    degen_gap = abs(degen.growth_gap())

    trace_vs_moment = abs(model.lambda_p() - model.lambda_p_moment())

    checks = [
        SuiteCheck("compatibility", compat, THRESHOLDS["compatibility"]),
        SuiteCheck("divergence", diver, THRESHOLDS["divergence"]),
        SuiteCheck("lyapunov_star", lyap, THRESHOLDS["lyapunov_star"]),
        SuiteCheck("degenerate_m_y", degen_m_y, THRESHOLDS["degenerate_m_y"]),
        SuiteCheck("degenerate_gap", degen_gap, THRESHOLDS["degenerate_gap"]),
        SuiteCheck("trace_vs_moment", trace_vs_moment,
                   THRESHOLDS["trace_vs_moment"]),
    ]
    return ModelRecord(model_id=model_id, d=model.d, m=model.m,
                       star_stable=bool(dyn_star.is_stable), checks=checks)


def run_suite(n_models: int = 200, seed: int = DEFAULT_SEED,
              max_dim: int = 3) -> SuiteReport:
    rng = np.random.default_rng(np.random.Philox(seed))
    records = []
    for k in range(n_models):
        model = random_gaussian_model(rng, max_dim=max_dim)
        records.append(check_model(model, rng, model_id=k))
    return SuiteReport(n_models=n_models, seed=seed, max_dim=max_dim,
                       records=records)
