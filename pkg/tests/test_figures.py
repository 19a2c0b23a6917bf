"""Figure rendering: every report figure writes a real PNG and the bytes are
reproducible within a process (fixed metadata, no timestamps)."""

import numpy as np
import pytest

from robustgrowth.experiments import (ctou_ergodic, growth_experiment,
                                      stochvol_ergodic)
from robustgrowth.figures import (ergodic_figure, growth_boxplot_figure,
                                  slice_figure)
from robustgrowth.pairs import slice_table
from robustgrowth.simulate import SimConfig

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@pytest.fixture(scope="module")
def growth_report(ctou):
    cfg = SimConfig(t_horizon=1.0, dt=0.01, n_paths=32, seed=99,
                    snapshot_times=(0.5, 1.0))
    return growth_experiment(ctou, "star", ("star", "hat"), cfg)


@pytest.fixture(scope="module")
def ergodic_report(ctou):
    return ctou_ergodic(ctou, t_horizon=10.0, dt=0.01, n_paths=2, seed=7)


def render_twice(render, tmp_path):
    a = render(tmp_path / "a.png")
    b = render(tmp_path / "b.png")
    raw_a, raw_b = a.read_bytes(), b.read_bytes()
    assert raw_a[:8] == PNG_MAGIC
    assert len(raw_a) > 5000
    assert raw_a == raw_b
    return raw_a


class TestGrowthBoxplot:
    def test_renders_deterministically(self, growth_report, tmp_path):
        render_twice(
            lambda p: growth_boxplot_figure(growth_report, p,
                                            title="growth under star"),
            tmp_path)

    def test_reference_lines_change_the_figure(self, growth_report, tmp_path):
        full = growth_boxplot_figure(growth_report, tmp_path / "full.png")
        bare = growth_boxplot_figure(growth_report, tmp_path / "bare.png",
                                     reference_keys=())
        assert full.read_bytes() != bare.read_bytes()


class TestSliceFigure:
    def test_linear_family(self, ctou, tmp_path):
        table = slice_table(ctou, np.linspace(-2, 2, 61),
                            np.linspace(-1, 1, 5))
        render_twice(lambda p: slice_figure(table, p, title="slices"),
                     tmp_path)

    def test_saturation_limit_lines(self, stochvol, tmp_path):
        table = slice_table(stochvol, np.linspace(-2, 2, 41),
                            np.array([0.02, 0.04, 0.08]))
        limit = stochvol.theta_hat_limit()
        with_limit = slice_figure(table, tmp_path / "lim.png",
                                  hat_limit=limit)
        without = slice_figure(table, tmp_path / "nolim.png")
        assert with_limit.read_bytes()[:8] == PNG_MAGIC
        assert with_limit.read_bytes() != without.read_bytes()


class TestErgodicFigure:
    def test_renders_deterministically(self, ergodic_report, tmp_path):
        render_twice(
            lambda p: ergodic_figure(ergodic_report, p,
                                     title="time average vs target"),
            tmp_path)

    def test_single_observable(self, stochvol, tmp_path):
        rep = stochvol_ergodic(stochvol, t_horizon=5.0, dt=0.01, n_paths=2,
                               seed=7)
        out = ergodic_figure(rep, tmp_path / "sv.png")
        assert out.read_bytes()[:8] == PNG_MAGIC
