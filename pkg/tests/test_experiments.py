"""Prebuilt experiment wiring: saddle dynamics against their defining linear
coefficients, reference growth rates as exact rationals, menu mapping, and
the candidate-discrimination experiment read off actual samples."""

import fractions

import numpy as np
import pytest

from robustgrowth.errors import DomainError
from robustgrowth.experiments import (ctou_alt_hat_dynamics, ctou_references,
                                      discriminate_theta_hat,
                                      growth_experiment, hat_dynamics,
                                      snapshot_growth_config, star_dynamics,
                                      stochvol_factor_dynamics, strategy_menu)
from robustgrowth.simulate import SimConfig


def frac(a, b):
    return float(fractions.Fraction(a, b))


class TestReferences:
    def test_exact_rationals(self, ctou):
        refs = ctou_references(ctou.model)
        assert refs["lambda_p"] == pytest.approx(frac(11, 32), abs=1e-12)
        assert refs["lambda_pi"] == pytest.approx(frac(1, 7), abs=1e-12)
        assert refs["growth_gap"] == pytest.approx(frac(45, 224), abs=1e-12)
        assert refs["g_star_under_hat"] == pytest.approx(frac(-13, 224),
                                                         abs=1e-12)


class TestStrategyMenu:
    def test_mapping(self, ctou):
        fields = strategy_menu(ctou, ("star", "HAT ", "zero"))
        assert [f.name for f in fields] == ["theta_star", "theta_hat", "zero"]
        z = np.array([[0.2, 0.1]])
        assert fields[2](z)[0, 0] == 0.0

    def test_unknown_key(self, ctou):
        with pytest.raises(DomainError, match="unknown strategy"):
            strategy_menu(ctou, ("star", "kelly"))


class TestSaddleDynamics:
    def test_trusted_saddle_is_worst_case_star(self, ctou, rng):
        spec = star_dynamics(ctou)
        assert spec.d == 1 and spec.dim == 2 and spec.name == "star"
        z = rng.normal(size=(20, 2))
        K = ctou.model.worst_case_star().K
        assert np.allclose(spec.drift(z), z @ K.T, atol=1e-14)
        assert spec.init_sampler is not None
        assert spec.factor_residual(z) < 1e-14

    def test_adversarial_saddle_is_worst_case_hat(self, ctou, rng):
        spec = hat_dynamics(ctou)
        z = rng.normal(size=(20, 2))
        K = ctou.model.worst_case_hat().K
        assert np.allclose(spec.drift(z), z @ K.T, atol=1e-14)

    def test_heavy_tail_saddle_drift_and_start(self, tdist, rng):
        spec = star_dynamics(tdist)
        p = tdist.params
        z = rng.normal(scale=0.3, size=(25, 2))
        expect = np.stack([p.c_x * tdist.theta_star_xy(z[:, 0], z[:, 1]),
                           p.c_y * tdist.b_y(z[:, 1])], axis=-1)
        assert np.allclose(spec.drift(z), expect, atol=1e-13)
        assert spec.factor_residual(z) < 1e-15
        # stationary start: covariance of the start law is nu/(nu-2) Sigma
        draws = spec.init_sampler(np.random.default_rng(11), 200000)
        target = p.nu / (p.nu - 2.0) * p.sigma
        assert np.allclose(np.cov(draws.T), target, atol=0.02)

    def test_square_root_saddle_not_simulated(self, stochvol):
        with pytest.raises(DomainError, match="not simulated"):
            star_dynamics(stochvol)

    @pytest.mark.parametrize("fam_name", ["tdist", "stochvol"])
    def test_adversarial_saddle_linear_only(self, request, fam_name):
        with pytest.raises(DomainError):
            hat_dynamics(request.getfixturevalue(fam_name))

    def test_factor_only_dynamics(self, stochvol):
        spec = stochvol_factor_dynamics(stochvol)
        p = stochvol.params
        assert spec.d == 0 and spec.dim == 1
        assert spec.guard_lower[0] == 1e-12
        y = np.array([[0.02], [0.08]])
        assert np.allclose(spec.drift(y), p.kappa * (p.nu - y), atol=1e-15)
        assert spec.factor_residual(y) < 1e-15
        draws = spec.init_sampler(np.random.default_rng(3), 200000)
        assert float(np.mean(draws)) == pytest.approx(p.nu, abs=2e-3)
        # gamma moments: var = alpha / beta^2
        assert float(np.var(draws)) == pytest.approx(p.alpha / p.beta ** 2,
                                                     rel=0.05)


class TestAltSaddle:
    def test_mean_reversion_form_is_not_stationary(self, ctou):
        # the alternative coefficient set does not preserve the model law:
        # its Lyapunov residual against Sigma is visibly nonzero, while the
        # wired saddle's residual is roundoff
        alt = ctou_alt_hat_dynamics(ctou)
        assert alt.lyapunov_residual() == pytest.approx(0.019798293164654167,
                                                        rel=1e-10)
        assert ctou.model.worst_case_hat().lyapunov_residual() < 1e-14


class TestGrowthExperiment:
    def test_snapshot_config_defaults(self):
        cfg = snapshot_growth_config()
        assert cfg.t_horizon == 30.0 and cfg.dt == 1e-3
        assert cfg.n_paths == 10000 and cfg.seed == 812970
        assert tuple(cfg.snapshot_times) == (10.0, 20.0, 30.0)

    def test_smoke_with_references(self, ctou):
        cfg = SimConfig(t_horizon=0.5, dt=0.01, n_paths=32, seed=7)
        rep = growth_experiment(ctou, "star", ("star", "hat"), cfg)
        assert rep.strategy_names == ["theta_star", "theta_hat"]
        assert rep.measure == "star"
        assert rep.references["lambda_p"] == pytest.approx(frac(11, 32))
        assert rep.samples.shape == (2, 1, 32)
        assert rep.n_excluded == 0

    def test_unknown_measure(self, ctou):
        with pytest.raises(DomainError, match="unknown measure"):
            growth_experiment(ctou, "worst", ("star",),
                              SimConfig(t_horizon=0.1, dt=0.01, n_paths=4))


class TestDiscrimination:
    def test_small_run_discriminates(self, ctou):
        cfg = SimConfig(t_horizon=10.0, dt=1e-3, n_paths=1000, seed=812970)
        rep = discriminate_theta_hat(ctou, cfg)
        names = [c.name for c in rep.candidates]
        assert names == ["hat_marginal_variance", "hat_mean_reversion"]
        coeffs = [c.coefficient for c in rep.candidates]
        assert coeffs[0] == pytest.approx(frac(-100, 7), abs=1e-12)
        assert coeffs[1] == pytest.approx(frac(-400, 19), abs=1e-12)
        # analytic rates under the trusted saddle, exact rationals
        assert rep.candidates[0].predicted_growth == pytest.approx(
            frac(1, 7), abs=1e-12)
        assert rep.candidates[1].predicted_growth == pytest.approx(
            frac(40, 361), abs=1e-12)
        assert rep.target == pytest.approx(frac(1, 7), abs=1e-12)
        # the verdict comes from the samples
        assert rep.winner == "hat_marginal_variance"
        assert rep.candidates[0].attains_target
        assert not rep.candidates[1].attains_target
        assert "outcome:" in rep.statement
        assert "is the adversarial-factor optimizer" in rep.statement
        assert rep.alt_lyapunov_residual == pytest.approx(
            0.019798293164654167, rel=1e-10)
