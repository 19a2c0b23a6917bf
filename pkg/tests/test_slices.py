"""Per-slice optimizer solves and growth-rate quadratures, checked against
linear-model closed forms, grid-refinement invariance, and the second-order
decay of the stationarity defect."""

import dataclasses
import fractions
import warnings

import numpy as np
import pytest

from robustgrowth.errors import DomainError, UnsupportedDimensionError
from robustgrowth.inputs import DomainBox, ModelInputs, default_edge_builder
from robustgrowth.slices import (SliceSolution, euler_lagrange_residual,
                                 growth_gap_quadrature, lambda_p_quadrature,
                                 solve_slice)
from robustgrowth.strategy import StrategyField


def frac(a, b):
    return float(fractions.Fraction(a, b))


@pytest.fixture(scope="module")
def el_grid():
    gx, gy = np.meshgrid(np.linspace(-1.0, 1.0, 9),
                         np.array([-0.4, -0.1, 0.2, 0.5]))
    return np.column_stack([gx.ravel(), gy.ravel()])


class TestSolveSlice:
    def test_matches_linear_closed_form_numeric_u(self, ctou):
        xg = np.linspace(-1.0, 1.0, 401)
        sol = solve_slice(ctou.inputs(), None, [0.1], xg)
        assert np.max(np.abs(sol.grad_phi_star - (-25.0 * (xg - 0.1)))) < 1e-7
        assert sol.residual < 1e-3
        assert sol.u.shape == xg.shape and sol.density.shape == xg.shape

    def test_matches_linear_closed_form_sampled_u(self, ctou):
        xg = np.linspace(-1.0, 1.0, 401)
        sol = solve_slice(ctou.inputs(), ctou.u_field(), [0.1], xg)
        assert np.max(np.abs(sol.grad_phi_star - (-25.0 * (xg - 0.1)))) < 1e-12

    def test_residual_shrinks_under_refinement(self, ctou):
        coarse = solve_slice(ctou.inputs(), None, [0.1],
                             np.linspace(-1.0, 1.0, 401))
        fine = solve_slice(ctou.inputs(), None, [0.1],
                           np.linspace(-1.0, 1.0, 2049))
        assert fine.residual < 0.1 * coarse.residual

    def test_array_u_accepted_and_shape_checked(self, ctou):
        xg = np.linspace(-1.0, 1.0, 101)
        z = np.column_stack([xg, np.full_like(xg, 0.1)])
        u_vals = ctou.u_field()(z)[:, 0]
        sol = solve_slice(ctou.inputs(), u_vals, [0.1], xg)
        assert np.max(np.abs(sol.grad_phi_star - (-25.0 * (xg - 0.1)))) < 1e-12
        with pytest.raises(DomainError):
            solve_slice(ctou.inputs(), u_vals[:-1], [0.1], xg)

    @pytest.mark.parametrize("family_name,window,y,bound", [
        ("ctou", (-1.0, 1.0), [0.1], 1e-7),
        ("tdist", (-1.5, 1.5), [0.1], 1e-11),
        ("stochvol", (-0.5, 0.5), [0.04], 1e-11),
    ])
    def test_grid_doubling_invariance(self, request, family_name, window, y,
                                      bound):
        fam = request.getfixturevalue(family_name)
        g1 = np.linspace(*window, 1025)
        g2 = np.linspace(*window, 2049)
        s1 = solve_slice(fam.inputs(), None, y, g1)
        s2 = solve_slice(fam.inputs(), None, y, g2)
        assert np.max(np.abs(s1.grad_phi_star - s2.grad_phi_star[::2])) < bound

    def test_validation(self, ctou):
        xg = np.linspace(-1.0, 1.0, 11)
        with pytest.raises(DomainError):
            solve_slice(ctou.inputs(), None, [0.1, 0.2], xg)  # wrong m
        with pytest.raises(DomainError):
            solve_slice(ctou.inputs(), None, [0.1], xg[::-1])
        with pytest.raises(DomainError):
            solve_slice(ctou.inputs(), None, [0.1], xg[:2])

        box = DomainBox(d=2, m=1,
                        e_bounds=((-np.inf, np.inf),) * 2,
                        d_bounds=((-np.inf, np.inf),),
                        truncation=((-1, 1), (-1, 1), (-1, 1)))
        flat = ModelInputs(domain=box, c=lambda z: np.broadcast_to(
            np.eye(3), z.shape[:-1] + (3, 3)),
            p=lambda z: np.exp(-0.5 * np.sum(z * z, axis=-1)),
            b_y=lambda z: np.zeros(z.shape[:-1] + (1,)))
        with pytest.raises(UnsupportedDimensionError):
            solve_slice(flat, None, [0.0], xg)

    def test_non_finite_solution_refused(self):
        xg = np.linspace(-1.0, 1.0, 5)
        with pytest.raises(DomainError):
            SliceSolution(y=np.array([0.0]), x_grid=xg,
                          grad_phi_star=np.array([0.0, np.nan, 0, 0, 0]),
                          residual=0.0, u=np.zeros(5), ell_x=np.zeros(5),
                          density=np.ones(5))


class TestEulerLagrange:
    def test_optimizer_defect_small_and_second_order(self, ctou, el_grid):
        inp = ctou.inputs()
        star = ctou.theta_star_field()
        r1 = euler_lagrange_residual(inp, None, star, el_grid, h=1e-3)
        r2 = euler_lagrange_residual(inp, None, star, el_grid, h=2e-3)
        assert r1 < 1e-4
        assert 3.8 < r2 / r1 < 4.2

    @pytest.mark.parametrize("family_name,window,y,bound", [
        ("ctou", (-1.0, 1.0), 0.1, 1e-5),
        ("tdist", (-1.0, 1.0), 0.1, 1e-4),
        # the square-root-factor flux is steep, so the finite-difference
        # truncation term is larger; the decay check shows it is pure FD error
        ("stochvol", (-0.5, 0.5), 0.04, 5e-3),
    ])
    def test_defect_small_for_all_families(self, request, family_name,
                                           window, y, bound):
        fam = request.getfixturevalue(family_name)
        grid = np.column_stack([np.linspace(*window, 9), np.full(9, y)])
        star = fam.theta_star_field()
        r1 = euler_lagrange_residual(fam.inputs(), None, star, grid, h=1e-3)
        r2 = euler_lagrange_residual(fam.inputs(), None, star, grid, h=2e-3)
        assert r1 < bound
        assert 3.8 < r2 / r1 < 4.2

    def test_grad_and_u_routes_agree_at_optimizer(self, ctou, el_grid):
        # theta* equals the assembled xi, so the two flux routes coincide
        inp = ctou.inputs()
        d_grad = euler_lagrange_residual(inp, None, ctou.theta_star_field(),
                                         el_grid, reduce_max=False)
        d_u = euler_lagrange_residual(inp, ctou.u_field(), None, el_grid,
                                      reduce_max=False)
        assert np.max(np.abs(d_grad - d_u)) < 1e-12

    def test_perturbed_strategy_has_visible_defect(self, ctou, el_grid):
        star = ctou.theta_star_field()
        bumped = StrategyField(fn=lambda z: np.asarray(star(z)) + 0.1,
                               name="bumped", d=1)
        defect = euler_lagrange_residual(ctou.inputs(), None, bumped, el_grid)
        assert defect > 0.05

    def test_needs_u_or_grad(self, ctou, el_grid):
        with pytest.raises(DomainError):
            euler_lagrange_residual(ctou.inputs(), None, None, el_grid)


class TestGrowthQuadratures:
    def test_lambda_p_linear_reference(self, ctou):
        val = lambda_p_quadrature(ctou.inputs(), ctou.theta_star_field())
        assert val == pytest.approx(frac(11, 32), abs=1e-12)

    def test_lambda_p_zero_strategy(self, ctou):
        zero = StrategyField(fn=lambda z: np.zeros(z.shape[:-1] + (1,)),
                             name="zero", d=1)
        assert lambda_p_quadrature(ctou.inputs(), zero) == 0.0

    def test_lambda_p_heavy_tail_regression(self, tdist):
        val = lambda_p_quadrature(tdist.inputs(), tdist.theta_star_field())
        assert val == pytest.approx(0.272437613732839, rel=1e-12)

    def test_default_edges_are_stable(self, ctou, tdist):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            lambda_p_quadrature(ctou.inputs(), ctou.theta_star_field())
            lambda_p_quadrature(tdist.inputs(), tdist.theta_star_field())
            growth_gap_quadrature(ctou.inputs(), ctou.theta_star_field(),
                                  ctou.theta_hat_field())

    def test_unstable_quadrature_warns(self, ctou):
        coarse = dataclasses.replace(ctou.inputs(),
                                     edge_builder=default_edge_builder(2))
        with pytest.warns(UserWarning, match="unstable under panel doubling"):
            lambda_p_quadrature(coarse, ctou.theta_star_field(),
                                nodes_per_panel=2)

    def test_gap_linear_reference(self, ctou):
        gap = growth_gap_quadrature(ctou.inputs(), ctou.theta_star_field(),
                                    ctou.theta_hat_field())
        assert gap == pytest.approx(frac(45, 224), abs=1e-12)

    def test_gap_symmetric_and_zero_on_self(self, ctou):
        star, hat = ctou.theta_star_field(), ctou.theta_hat_field()
        ab = growth_gap_quadrature(ctou.inputs(), star, hat)
        ba = growth_gap_quadrature(ctou.inputs(), hat, star)
        assert ab == pytest.approx(ba, rel=1e-13)
        assert growth_gap_quadrature(ctou.inputs(), star, star) == 0.0
