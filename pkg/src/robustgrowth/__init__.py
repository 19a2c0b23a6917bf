"""Robust growth-optimal investment under factor-drift uncertainty.

Numerical library and command line for long-run growth optimization when the
drift of the tradable asset is unknown but its volatility structure and the
stationary law of an ergodic state process are trusted.  Two uncertainty
classes are covered: factor dynamics trusted (growth rate ``lambda_p``) and
factor dynamics adversarial (``lambda_pi``), together with the closed-form
linear-Gaussian theory, three pairs-trading example families, per-slice
numerical solves, saddle-measure Monte Carlo, and artifact reporting.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, DensityUnderflowError, DomainError,
                     FellerConditionError, RobustGrowthError,
                     SimulationError, SingularInputError,
                     UnsupportedDimensionError)
from .inputs import (CompatibilityReport, DomainBox, IntegrabilityReport,
                     ModelInputs, assemble_xi, check_compatibility, eval_ell,
                     explicit_compatible_b_y, gradient_strategy,
                     integrability_report, solve_u_1d, verify_divergence)
from .gaussian import (GaussianModel, LinearDynamics, build_gaussian_model,
                       linear_growth_rate, load_gaussian_model,
                       save_gaussian_model)
from .pairs import (CtouFamily, CtouParams, SliceTable, StochVolFamily,
                    StochVolParams, TDistFamily, TDistParams, ctou_model,
                    ctou_p_hat_coefficients, ctou_sigma, make_family,
                    slice_table, spread_to_holdings)
from .slices import (SliceSolution, euler_lagrange_residual,
                     growth_gap_quadrature, lambda_p_quadrature, solve_slice)
from .simulate import (DEFAULT_SEED, BoxplotStats, DynamicsSpec,
                       ErgodicReport, GrowthReport, SimConfig, boxplot_stats,
                       simulate_ergodic_averages, simulate_growth)
from .strategy import StrategyField, linear_strategy, scalar_strategy, \
    zero_strategy
from .experiments import (DiscriminationReport, ctou_ergodic,
                          discriminate_theta_hat, growth_experiment,
                          snapshot_growth_config, stochvol_ergodic)
from .checks import CheckReport, run_checks
from .suite import SuiteReport, run_suite

__all__ = [name for name in dir() if not name.startswith("_")]
