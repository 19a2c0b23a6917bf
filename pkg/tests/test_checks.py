"""Invariant batteries: each family's checks pass on the genuine inputs and
the compatibility check visibly fails once the factor drift is shifted, so
the battery cannot be satisfied vacuously."""

import pytest

from robustgrowth.checks import (CheckReport, CheckResult,
                                 perturbed_compatibility, run_checks)
from robustgrowth.errors import DomainError

EXPECTED_NAMES = {
    "ctou": ["density_norm", "compatibility", "divergence", "euler_lagrange",
             "theta_consistency", "slice_gradient", "slice_residual",
             "integrability", "lyapunov_star", "lyapunov_hat"],
    "tdist": ["density_norm", "compatibility", "divergence", "euler_lagrange",
              "theta_consistency", "slice_gradient", "slice_residual",
              "integrability"],
    "stochvol": ["density_norm", "compatibility", "divergence",
                 "euler_lagrange", "theta_consistency", "slice_gradient",
                 "slice_residual", "integrability", "feller"],
}

# compatibility residual with the factor drift shifted by +0.01, pinned to
# catch silent changes in the check grids or the residual definition
PERTURBED_RESIDUAL = {"ctou": 2.187e-3, "tdist": 7.715e-4, "stochvol": 7.176e-2}


@pytest.mark.parametrize("fam_name", ["ctou", "tdist", "stochvol"])
class TestBatteries:
    def test_battery_passes(self, request, fam_name):
        rep = run_checks(request.getfixturevalue(fam_name))
        assert rep.example == fam_name
        assert [r.name for r in rep.results] == EXPECTED_NAMES[fam_name]
        assert rep.passed, str(rep)
        assert rep.failures == []
        assert "all checks passed" in str(rep)

    def test_shifted_drift_fails_compatibility(self, request, fam_name):
        rep = run_checks(request.getfixturevalue(fam_name), perturb_by=0.01)
        assert not rep.passed
        (res,) = rep.results
        assert res.name == "compatibility"
        assert res.value == pytest.approx(PERTURBED_RESIDUAL[fam_name],
                                          rel=0.2)
        assert "+0.01" in res.note
        assert "FAILED checks: compatibility" in str(rep)

    def test_negative_shift_also_fails(self, request, fam_name):
        res = perturbed_compatibility(request.getfixturevalue(fam_name),
                                      -0.02)
        assert not res.passed and res.value > res.tolerance


class TestReportFormatting:
    def test_result_line(self):
        ok = CheckResult("density_norm", True, 3.0e-15, 1e-6)
        bad = CheckResult("compatibility", False, 2.2e-3, 1e-6, "shifted")
        assert ok.line().startswith("PASS  density_norm")
        assert "value 3.000e-15" in ok.line() and "tol 1.0e-06" in ok.line()
        assert bad.line().startswith("FAIL  compatibility")
        assert bad.line().endswith("[shifted]")

    def test_report_failures(self):
        rep = CheckReport(example="x", results=[
            CheckResult("a", True, 0.0, 1.0),
            CheckResult("b", False, 2.0, 1.0)])
        assert not rep.passed and rep.failures == ["b"]

    def test_unknown_family(self):
        class Fake:
            name = "heston"

        with pytest.raises(DomainError, match="no check battery"):
            run_checks(Fake())
