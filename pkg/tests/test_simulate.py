"""Monte-Carlo engine: counter-based reproducibility (bit-identical under
re-blocking and path-count changes), config validation, exclusion
bookkeeping, ergodic averaging, and the guarded square-root step."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustgrowth.errors import DomainError, SimulationError
from robustgrowth.experiments import star_dynamics
from robustgrowth.gaussian import LinearDynamics
from robustgrowth.simulate import (DynamicsSpec, SimConfig, boxplot_stats,
                                   cir_guarded_step, linear_spec, path_rng,
                                   simulate_ergodic_averages, simulate_growth)
from robustgrowth.strategy import StrategyField


class TestPathRng:
    def test_keyed_streams(self):
        a = path_rng(7, 3).standard_normal(8)
        b = path_rng(7, 3).standard_normal(8)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, path_rng(7, 4).standard_normal(8))
        assert not np.array_equal(a, path_rng(8, 3).standard_normal(8))


class TestSimConfig:
    @pytest.mark.parametrize("kw", [dict(t_horizon=1.0, dt=0.0),
                                    dict(t_horizon=1e-4, dt=1e-3),
                                    dict(t_horizon=1.0, n_paths=0),
                                    dict(t_horizon=1.0, seed=2 ** 64)])
    def test_validation(self, kw):
        with pytest.raises(DomainError):
            SimConfig(**kw)

    def test_horizon_must_be_step_multiple(self):
        with pytest.raises(DomainError):
            SimConfig(t_horizon=1.0005, dt=1e-3).n_steps()
        assert SimConfig(t_horizon=2.0, dt=1e-3).n_steps() == 2000

    def test_snapshots(self):
        cfg = SimConfig(t_horizon=3.0, dt=0.5, snapshot_times=(1.0, 3.0))
        assert cfg.snapshot_steps() == {2: 0, 6: 1}
        with pytest.raises(DomainError):
            SimConfig(t_horizon=3.0, dt=0.5,
                      snapshot_times=(1.25,)).snapshot_steps()
        with pytest.raises(DomainError):
            SimConfig(t_horizon=3.0, dt=0.5,
                      snapshot_times=(4.0,)).snapshot_steps()
        with pytest.raises(DomainError):
            SimConfig(t_horizon=3.0, dt=0.5,
                      snapshot_times=(1.0, 1.0)).snapshot_steps()


class TestBoxplotStats:
    def test_reference_with_outlier(self):
        b = boxplot_stats([1.0, 2.0, 3.0, 4.0, 100.0])
        assert (b.whisker_lo, b.q1, b.median, b.q3, b.whisker_hi, b.mean) == \
            (1.0, 2.0, 3.0, 4.0, 4.0, 22.0)

    def test_needs_five(self):
        with pytest.raises(DomainError):
            boxplot_stats([1.0, 2.0, 3.0, 4.0])

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-100, 100), min_size=5, max_size=60))
    def test_invariants(self, xs):
        b = boxplot_stats(xs)
        assert b.whisker_lo <= b.q1 <= b.median <= b.q3 <= b.whisker_hi
        assert min(xs) <= b.whisker_lo and b.whisker_hi <= max(xs)
        assert min(xs) <= b.mean <= max(xs)


@pytest.fixture(scope="module")
def ctou_star(ctou):
    return star_dynamics(ctou)


class TestGrowthDigest:
    CFG = dict(t_horizon=1.0, dt=0.01, seed=424242)

    def test_frozen_digest(self, ctou, ctou_star):
        cfg = SimConfig(n_paths=64, **self.CFG)
        rep = simulate_growth(ctou_star, [ctou.theta_star_field()], cfg)
        s = rep.growth_samples("theta_star")
        assert float(np.mean(s)) == pytest.approx(0.4626105528640631,
                                                  rel=1e-14)
        assert float(s[0]) == pytest.approx(0.7496368045506718, rel=1e-14)

    def test_prefix_subset_invariance(self, ctou, ctou_star):
        big = simulate_growth(ctou_star, [ctou.theta_star_field()],
                              SimConfig(n_paths=64, **self.CFG))
        small = simulate_growth(ctou_star, [ctou.theta_star_field()],
                                SimConfig(n_paths=32, **self.CFG))
        assert np.array_equal(small.samples[0, 0],
                              big.samples[0, 0, :32])

    def test_blocking_invariance(self, ctou, ctou_star):
        base = simulate_growth(ctou_star, [ctou.theta_star_field()],
                               SimConfig(n_paths=64, **self.CFG))
        odd = simulate_growth(ctou_star, [ctou.theta_star_field()],
                              SimConfig(n_paths=64, path_block=7,
                                        time_chunk=13, **self.CFG))
        assert np.array_equal(base.samples, odd.samples)

    def test_common_random_numbers(self, ctou, ctou_star):
        # the same strategy under two names differs by exactly zero pathwise
        star = ctou.theta_star_field()
        twin = StrategyField(fn=star.fn, name="twin", d=1)
        rep = simulate_growth(ctou_star, [star, twin],
                              SimConfig(n_paths=16, **self.CFG))
        mean, se = rep.diff_mean_se("theta_star", "twin")
        assert mean == 0.0 and se == 0.0

    def test_missing_snapshot_rejected(self, ctou, ctou_star):
        rep = simulate_growth(ctou_star, [ctou.theta_star_field()],
                              SimConfig(n_paths=8, **self.CFG))
        with pytest.raises(DomainError):
            rep.growth_samples("theta_star", t=0.5)
        with pytest.raises(ValueError):
            rep.growth_samples("nope")

    def test_duplicate_strategy_names_rejected(self, ctou, ctou_star):
        star = ctou.theta_star_field()
        with pytest.raises(DomainError):
            simulate_growth(ctou_star, [star, star],
                            SimConfig(n_paths=8, **self.CFG))


class TestInitialStates:
    def test_explicit_point_is_tiled(self, ctou_star):
        gens = [path_rng(1, i) for i in range(5)]
        z = ctou_star.initial_states(gens, explicit_z0=[0.3, -0.1])
        assert z.shape == (5, 2)
        assert np.array_equal(z, np.tile([0.3, -0.1], (5, 1)))

    def test_sampler_draws_differ_per_path(self, ctou_star):
        gens = [path_rng(1, i) for i in range(6)]
        z = ctou_star.initial_states(gens)
        assert z.shape == (6, 2)
        assert len({tuple(row) for row in z}) == 6

    def test_guard_floor_applies(self):
        spec = DynamicsSpec(name="g", d=0, dim=1,
                            drift=lambda z: np.zeros_like(z),
                            diffusion_factor=np.eye(1),
                            guard_lower=np.array([0.5]),
                            z0=np.array([1.0]),
                            init_sampler=lambda rng, n: np.full((n, 1), -3.0))
        z = spec.initial_states([path_rng(0, 0)])
        assert z[0, 0] == 0.5
        with pytest.raises(DomainError):
            spec.initial_states([path_rng(0, 0)], explicit_z0=[0.2])

    def test_guarded_default_point_validated(self):
        with pytest.raises(DomainError):
            DynamicsSpec(name="g", d=0, dim=1,
                         drift=lambda z: np.zeros_like(z),
                         diffusion_factor=np.eye(1),
                         guard_lower=np.array([0.5]), z0=np.array([0.0]))


class TestLinearSpec:
    def test_stationary_sampler_covariance(self, ctou):
        spec = linear_spec(ctou.model.worst_case_star(), d=1)
        assert spec.init_sampler is not None
        draws = spec.init_sampler(np.random.default_rng(5), 40000)
        cov = np.cov(draws.T)
        assert np.allclose(cov, ctou.model.Sigma, atol=2e-3)
        assert spec.factor_residual(draws[:10]) < 1e-14

    def test_no_sampler_without_sigma(self):
        dyn = LinearDynamics(K=-np.eye(2), c=np.eye(2), c_half=np.eye(2),
                             name="plain")
        assert linear_spec(dyn, d=1).init_sampler is None

    def test_explicit_start_suppresses_sampler(self, ctou):
        spec = linear_spec(ctou.model.worst_case_star(), d=1,
                           z0=[0.0, 0.0])
        assert spec.init_sampler is None
        assert np.array_equal(spec.z0, [0.0, 0.0])


class TestExclusion:
    def _blowup(self):
        return StrategyField(
            fn=lambda z: np.where(z[:, :1] > 0.4, np.inf, 1.0),
            name="blow", d=1)

    def test_partial_exclusion_tolerated(self, ctou_star):
        cfg = SimConfig(t_horizon=1.0, dt=0.01, n_paths=64, seed=424242,
                        max_excluded_fraction=0.9)
        rep = simulate_growth(ctou_star, [self._blowup()], cfg)
        assert rep.n_excluded == 7
        s = rep.growth_samples("blow")
        assert s.size == 64 - 7 and np.all(np.isfinite(s))

    def test_budget_breach_aborts(self, ctou_star):
        cfg = SimConfig(t_horizon=1.0, dt=0.01, n_paths=64, seed=424242)
        with pytest.raises(SimulationError, match="exclusion budget"):
            simulate_growth(ctou_star, [self._blowup()], cfg)


class TestErgodic:
    def test_ctou_ensemble(self, ctou):
        from robustgrowth.experiments import ctou_ergodic
        rep = ctou_ergodic(ctou, t_horizon=50.0, dt=0.01, n_paths=4)
        assert rep.method == "path ensemble"
        assert [r.name for r in rep.rows] == ["x^2", "y^2", "x*y"]
        assert [r.target for r in rep.rows] == [0.035, 0.0225, 0.015]
        assert rep.all_within(3.0)

    def test_square_root_factor_single_path_batches(self):
        from robustgrowth.experiments import (stochvol_ergodic)
        from robustgrowth.pairs import StochVolFamily
        rep = stochvol_ergodic(StochVolFamily(), t_horizon=100.0, dt=0.01,
                               n_paths=1)
        assert rep.method == "20 time batches"
        assert rep.rows[0].target == 0.04
        assert rep.all_within(3.0)
        assert "time average" in str(rep)

    def test_needs_observables(self, ctou_star):
        with pytest.raises(DomainError):
            simulate_ergodic_averages(ctou_star,
                                      SimConfig(t_horizon=1.0, dt=0.1), [])


class TestCirGuardedStep:
    def test_floor_and_clamped_evaluation(self):
        seen = []

        def drift(y):
            seen.append(np.min(y))
            return np.zeros_like(y)

        y = np.array([-0.5, 0.04])
        out = cir_guarded_step(y, drift, lambda y: np.sqrt(y),
                               dw=np.array([0.0, 0.0]), dt=0.01)
        # coefficients never see the negative state, output is floored
        assert min(seen) == 0.0
        assert out[0] == 1e-12
        assert out[1] == pytest.approx(0.04)

    def test_reflecting_floor_value(self):
        out = cir_guarded_step(np.array([0.01]), lambda y: -np.ones_like(y),
                               lambda y: np.zeros_like(y),
                               dw=np.array([0.0]), dt=1.0)
        assert out[0] == 1e-12


class TestDiscretizationBias:
    def test_paired_refinement(self, ctou):
        # the same Brownian paths stepped at dt and dt/2 give growth samples
        # whose mean difference is within Euler-bias scale of zero
        model = ctou.model
        star = model.worst_case_star()
        theta = ctou.theta_star_field()
        rng = np.random.default_rng(99)
        n, t_hor, dt = 400, 2.0, 2e-3
        n_fine = int(round(t_hor / (dt / 2)))
        chol = np.linalg.cholesky(model.Sigma)
        z0 = rng.standard_normal((n, 2)) @ chol.T
        dw_fine = rng.standard_normal((n, n_fine, 2)) * np.sqrt(dt / 2)
        dw_coarse = dw_fine[:, ::2] + dw_fine[:, 1::2]

        def run(dw, step):
            z = z0.copy()
            logv = np.zeros(n)
            fac_t = star.c_half.T
            for i in range(dw.shape[1]):
                th = np.asarray(theta(z))
                dz = z @ star.K.T * step + dw[:, i] @ fac_t
                logv += th[:, 0] * dz[:, 0] \
                    - 0.5 * th[:, 0] ** 2 * model.c[0, 0] * step
                z = z + dz
            return logv / t_hor

        diff = run(dw_fine, dt / 2) - run(dw_coarse, dt)
        assert abs(float(np.mean(diff))) < 5e-3
