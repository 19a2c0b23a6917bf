"""Coefficient-field assembly and admissibility checks, tested against the
linear-Gaussian closed forms (where every field has an exact expression) and
against independently computed constants."""

import numpy as np
import pytest

from robustgrowth.errors import (DensityUnderflowError, DomainError,
                                 UnsupportedDimensionError)
from robustgrowth.inputs import (DomainBox, ModelInputs, assemble_xi,
                                 check_compatibility, default_edge_builder,
                                 eval_ell, explicit_compatible_b_y,
                                 gradient_strategy, integrability_report,
                                 replace_b_y, solve_u_1d, verify_divergence)
from robustgrowth.pairs import ctou_model, CtouParams


@pytest.fixture(scope="module")
def gm():
    return ctou_model(CtouParams())


@pytest.fixture(scope="module")
def gm_inputs(gm):
    return gm.to_model_inputs()


class TestDomainBox:
    def test_validation(self):
        with pytest.raises(DomainError):
            DomainBox(d=0, m=1, e_bounds=(), d_bounds=((-1, 1),),
                      truncation=((-1, 1),))
        with pytest.raises(DomainError):
            DomainBox(d=1, m=1, e_bounds=((-1, 1),), d_bounds=((-1, 1),),
                      truncation=((-2, 1), (-1, 1)))  # outside bounds
        with pytest.raises(DomainError):
            DomainBox(d=1, m=1, e_bounds=((-1, 1),), d_bounds=((-1, 1),),
                      truncation=((-1, 1),))  # one interval missing

    def test_bounds_and_enlarged(self):
        box = DomainBox(d=1, m=1, e_bounds=((-np.inf, np.inf),),
                        d_bounds=((0.0, np.inf),),
                        truncation=((-2.0, 2.0), (0.5, 1.5)))
        assert box.dim == 2
        assert box.bounds == ((-np.inf, np.inf), (0.0, np.inf))
        big = box.enlarged(2.0)
        # doubled half-width about each interval center, clipped to bounds
        assert big.truncation[0] == (-4.0, 4.0)
        lo, hi = big.truncation[1]
        assert lo >= 0.0 and hi > 1.5

    def test_edge_builder(self):
        box = DomainBox(d=1, m=1, e_bounds=((-np.inf, np.inf),),
                        d_bounds=((-np.inf, np.inf),),
                        truncation=((-1.0, 1.0), (-2.0, 2.0)))
        axes = default_edge_builder(16)(box)
        assert len(axes) == 2
        assert axes[0][0] == -1.0 and axes[0][-1] == 1.0
        assert axes[1][0] == -2.0 and axes[1][-1] == 2.0


class TestEvalEll:
    def test_gaussian_closed_form(self, gm, gm_inputs):
        # for constant diagonal c the scaled coefficient fields are
        # ell_X = -(1/2)(Sigma^{-1} z)_x and
        # ell_Y = -(1/2)(Sigma^{-1} z)_y - b_y with b_y = -kappa_y y / c_y
        rng = np.random.default_rng(1)
        z = rng.normal(scale=0.15, size=(40, 2))
        ell_x, ell_y = eval_ell(gm_inputs, z)
        s = -np.linalg.solve(gm.Sigma, z.T).T
        b_y = gm_inputs.b_y(z)
        assert np.allclose(ell_x[:, 0], 0.5 * s[:, 0], atol=1e-12)
        assert np.allclose(ell_y[:, 0], 0.5 * s[:, 1] - b_y[:, 0], atol=1e-12)

    def test_negative_density_rejected(self):
        box = DomainBox(d=1, m=1, e_bounds=((-np.inf, np.inf),),
                        d_bounds=((-np.inf, np.inf),),
                        truncation=((-1.0, 1.0), (-1.0, 1.0)))
        bad = ModelInputs(domain=box, c=lambda z: np.broadcast_to(
            np.eye(2), z.shape[:-1] + (2, 2)),
            p=lambda z: -np.ones(z.shape[:-1]),
            b_y=lambda z: np.zeros(z.shape[:-1] + (1,)))
        with pytest.raises(DomainError):
            eval_ell(bad, np.array([0.0, 0.0]))


class TestCompatibility:
    def test_gaussian_passes(self, gm_inputs):
        rep = check_compatibility(gm_inputs, np.linspace(-0.8, 0.8, 7))
        assert rep.passed and rep.reliable
        assert rep.max_abs_residual < 1e-12

    def test_incompatible_drift_fails(self, gm_inputs):
        base_b_y = gm_inputs.b_y
        shifted = replace_b_y(
            gm_inputs, lambda z: base_b_y(z) + 0.01)
        rep = check_compatibility(shifted, np.linspace(-0.8, 0.8, 7))
        assert not rep.passed
        # measured once at this perturbation size; linear in the shift
        assert rep.max_abs_residual == pytest.approx(1.4605e-3, rel=0.05)

    def test_y_grid_shape_validation(self, gm_inputs):
        with pytest.raises(DomainError):
            check_compatibility(gm_inputs, np.zeros((3, 2)))


class TestExplicitCompatibleBY:
    def test_zero_flux_everywhere(self, gm, gm_inputs):
        b_y = explicit_compatible_b_y(gm_inputs)
        made = replace_b_y(gm_inputs, b_y, name="zero-flux")
        rep = check_compatibility(made, np.linspace(-0.8, 0.8, 5))
        assert rep.passed
        assert rep.max_abs_residual < 1e-12
        # and the coefficient field itself vanishes, not only its integral
        z = np.random.default_rng(2).normal(scale=0.1, size=(30, 2))
        _, ell_y = eval_ell(made, z)
        assert np.max(np.abs(ell_y)) < 1e-10


class TestSolveU:
    def test_matches_closed_form(self, gm, gm_inputs):
        xg = np.linspace(-1.0, 1.0, 301)
        u_num = solve_u_1d(gm_inputs, 0.1, xg)
        z = np.column_stack([xg, np.full_like(xg, 0.1)])
        u_closed = gm.u(z)[:, 0]
        assert u_num.shape == (301,)
        assert np.max(np.abs(u_num - u_closed)) < 1e-12

    def test_requires_d_equal_one(self, rng):
        box = DomainBox(d=2, m=1,
                        e_bounds=((-np.inf, np.inf),) * 2,
                        d_bounds=((-np.inf, np.inf),),
                        truncation=((-1, 1), (-1, 1), (-1, 1)))
        ident = ModelInputs(domain=box, c=lambda z: np.broadcast_to(
            np.eye(3), z.shape[:-1] + (3, 3)),
            p=lambda z: np.exp(-0.5 * np.sum(z * z, axis=-1)),
            b_y=lambda z: np.zeros(z.shape[:-1] + (1,)))
        with pytest.raises(UnsupportedDimensionError):
            solve_u_1d(ident, 0.0, np.linspace(-0.5, 0.5, 11))

    def test_grid_inside_window(self, gm_inputs):
        with pytest.raises(DomainError):
            solve_u_1d(gm_inputs, 0.1, np.linspace(-5.0, 5.0, 11))


class TestDivergence:
    def test_closed_u_residual_and_decay(self, gm, gm_inputs):
        grid = np.array([[x, y] for x in np.linspace(-1.0, 1.0, 9)
                         for y in (-0.4, -0.1, 0.2, 0.5)])
        r1 = verify_divergence(gm.u, gm_inputs, grid, h=1e-3)
        r2 = verify_divergence(gm.u, gm_inputs, grid, h=2e-3)
        assert r1 < 1e-4
        assert r2 / r1 == pytest.approx(4.0, abs=0.3)


class TestXiAssembly:
    def test_xi_equals_linear_optimizer(self, gm, gm_inputs):
        z = np.random.default_rng(3).normal(scale=0.2, size=(50, 2))
        xi = assemble_xi(gm_inputs, gm.u, z)
        closed = -25.0 * (z[:, 0] - z[:, 1])
        assert np.max(np.abs(xi[:, 0] - closed)) < 1e-9

    def test_scalar_zero_u_gives_ell_x(self, gm_inputs):
        z = np.array([[0.2, -0.1]])
        xi = assemble_xi(gm_inputs, 0.0, z)
        ell_x, _ = eval_ell(gm_inputs, z)
        assert np.allclose(xi, ell_x, atol=1e-15)

    def test_underflow_refused(self, gm, gm_inputs):
        # p(6, 0) ~ 1e-312: positive but below the assembly floor
        with pytest.raises(DensityUnderflowError):
            assemble_xi(gm_inputs, gm.u, np.array([[6.0, 0.0]]))

    def test_gradient_strategy_d1_and_refusal(self, gm, gm_inputs):
        th = gradient_strategy(gm_inputs, gm.u)
        assert th.name == "theta_star" and th.gradient_form
        val = th.fn(np.array([[0.1, 0.3]]))
        assert val[0, 0] == pytest.approx(-25.0 * (0.1 - 0.3), abs=1e-10)

        box = DomainBox(d=2, m=1,
                        e_bounds=((-np.inf, np.inf),) * 2,
                        d_bounds=((-np.inf, np.inf),),
                        truncation=((-1, 1), (-1, 1), (-1, 1)))
        plain = ModelInputs(domain=box, c=lambda z: np.broadcast_to(
            np.eye(3), z.shape[:-1] + (3, 3)),
            p=lambda z: np.exp(-0.5 * np.sum(z * z, axis=-1)),
            b_y=lambda z: np.zeros(z.shape[:-1] + (1,)))
        with pytest.raises(UnsupportedDimensionError):
            gradient_strategy(plain, 0.0)


class TestIntegrability:
    def test_gaussian_values(self, gm, gm_inputs):
        rep = integrability_report(gm_inputs, u=gm.u)
        assert not rep.drift_diverged and not rep.u_diverged

        # closed forms under the N(0, Sigma) law: the scaled fields are
        # linear, ell(z) = A z, so each quadratic-form average is a trace
        sig_inv = np.linalg.inv(gm.Sigma)
        a_x = -0.5 * sig_inv[0]
        a_y = -0.5 * sig_inv[1].copy()
        a_y[1] += 0.5 / gm.c[1, 1]  # minus b_y row, b_y = -kappa_y y / c_y
        i_drift = (gm.c[0, 0] * a_x @ gm.Sigma @ a_x
                   + gm.c[1, 1] * a_y @ gm.Sigma @ a_y)
        assert rep.drift_integral == pytest.approx(i_drift, rel=1e-9)
        assert i_drift == pytest.approx(0.5, abs=1e-12)

        # I_u = c_X E[(xi - ell_X)^2] with xi - ell_X = -5x + (35/3) y
        diff = np.array([-5.0, 35.0 / 3.0])
        i_u = gm.c[0, 0] * diff @ gm.Sigma @ diff
        assert rep.u_integral == pytest.approx(i_u, rel=1e-6)
        assert i_u == pytest.approx(0.0875, abs=1e-12)

    def test_replace_b_y_keeps_fd_path_working(self, gm_inputs):
        base_b_y = gm_inputs.b_y
        swapped = replace_b_y(gm_inputs, lambda z: base_b_y(z), name="copy")
        assert swapped.name == "copy"
        assert swapped.div_y_flux_fn is None
        rep = check_compatibility(swapped, np.linspace(-0.5, 0.5, 3))
        assert rep.passed
