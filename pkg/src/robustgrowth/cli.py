"""Command-line front end.

Commands
--------
ctou-report     analytic report for the linear two-factor pairs model plus
                growth-distribution simulation artifacts
gaussian-suite  randomized verification battery over Gaussian factor models
slices          strategy slice tables (CSV) and figures for an example family
simulate        growth-rate simulation under a saddle measure
check           invariant battery for one family; exit 0 iff all checks pass
replay          re-run a recorded manifest and verify artifacts byte-for-byte

Configuration
-------------
Values resolve with precedence: built-in defaults < config file < flags.
The config file is INI-style with sections [run], [ctou], [tdist],
[stochvol], [simulation], [ergodic], [slices], [suite]; unknown sections or
keys are rejected.  The output directory resolves from --outdir, else the
ROBUSTGROWTH_OUTDIR environment variable, else ./robustgrowth_artifacts.

Every artifact-producing run writes a manifest.json recording the command,
the fully resolved configuration, the seed, and SHA-256 checksums of every
artifact; ``replay --manifest`` re-runs it and verifies the delimited and
JSON artifacts reproduce byte-identically (figures are compared too but
mismatches there are reported as warnings only).

Exit codes: 0 success, 1 check/invariant failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checks import (run_checks, slice_verification_geometry, CheckResult,
                     CheckReport)
from .errors import (ConfigError, DomainError, FellerConditionError,
                     RobustGrowthError)
from .experiments import (ctou_alt_hat_dynamics, ctou_references,
                          growth_experiment, stochvol_ergodic)
from .figures import ergodic_figure, growth_boxplot_figure, slice_figure
from .gaussian import load_gaussian_model
from .pairs import (CtouParams, StochVolParams, TDistParams,
                    ctou_p_hat_coefficients, make_family, slice_table,
                    SliceTable)
from .reporting import (load_manifest, sha256_file, write_ergodic_csv,
                        write_growth_csv, write_json, write_manifest,
                        write_slice_csv, write_table)
from .simulate import SimConfig, simulate_growth, linear_spec
from .slices import solve_slice
from .strategy import zero_strategy
from .suite import run_suite

OUTDIR_ENV = "ROBUSTGROWTH_OUTDIR"
DEFAULT_OUTDIR = "robustgrowth_artifacts"

CONFIG_DEFAULTS = {
    "run": {"seed": 812970, "outdir": "", "plots": True},
    "ctou": {"c_x": 0.04, "c_y": 0.0225, "kappa_x": 1.0, "kappa_y": 0.5},
    "tdist": {"nu": 3.0, "c_x": 0.04, "c_y": 0.0225,
              "sigma_xx": 0.035, "sigma_xy": 0.015, "sigma_yy": 0.0225},
    "stochvol": {"kappa": 5.0, "nu": 0.04, "sigma": 0.6, "rho": 0.0},
    "simulation": {"n_paths": 10000, "dt": 0.001, "t_horizon": 30.0,
                   "snapshots": "10,20,30"},
    "ergodic": {"t_horizon": 200.0, "dt": 0.001, "n_paths": 8},
    "slices": {"n_x": 241, "n_y": 11, "numeric_points": 4097},
    "suite": {"n_models": 200, "max_dim": 3},
}


# ---------------------------------------------------------------------------
# configuration plumbing


def _coerce(text: str, default):
    if isinstance(default, bool):
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {text!r}")
    try:
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"could not parse {text!r} as "
                          f"{type(default).__name__}") from None
    return text


def load_config(path=None) -> dict:
    """Defaults, overlaid with the INI file at ``path`` when given.  Unknown
    sections or keys are configuration errors."""
    cfg = {sec: dict(vals) for sec, vals in CONFIG_DEFAULTS.items()}
    if not path:
        return cfg
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    for section in parser.sections():
        if section not in cfg:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in cfg[section]:
                raise ConfigError(f"unknown config key {key!r} in [{section}]")
            cfg[section][key] = _coerce(raw, CONFIG_DEFAULTS[section][key])
    return cfg


_FLAG_MAP = {
    "seed": ("run", "seed"),
    "n_paths": ("simulation", "n_paths"),
    "dt": ("simulation", "dt"),
    "t_horizon": ("simulation", "t_horizon"),
    "snapshots": ("simulation", "snapshots"),
    "n_models": ("suite", "n_models"),
    "max_dim": ("suite", "max_dim"),
    "n_x": ("slices", "n_x"),
    "n_y": ("slices", "n_y"),
}


def apply_flag_overrides(cfg: dict, args) -> None:
    for attr, (sec, key) in _FLAG_MAP.items():
        value = getattr(args, attr, None)
        if value is not None:
            cfg[sec][key] = value
    if getattr(args, "outdir", None):
        cfg["run"]["outdir"] = str(args.outdir)
    if getattr(args, "no_plots", False):
        cfg["run"]["plots"] = False


def resolve_outdir(cfg: dict) -> Path:
    target = cfg["run"]["outdir"] or os.environ.get(OUTDIR_ENV, "") \
        or DEFAULT_OUTDIR
    out = Path(target)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _family_raw(cfg: dict, example: str):
    """Family from config without exception translation; ``check`` treats
    some validation failures as named check outcomes, not config errors."""
    if example == "ctou":
        c = cfg["ctou"]
        params = CtouParams(c_x=c["c_x"], c_y=c["c_y"],
                            kappa_x=c["kappa_x"], kappa_y=c["kappa_y"])
    elif example == "tdist":
        c = cfg["tdist"]
        params = TDistParams(nu=c["nu"], sigma_xx=c["sigma_xx"],
                             sigma_xy=c["sigma_xy"], sigma_yy=c["sigma_yy"],
                             c_x=c["c_x"], c_y=c["c_y"])
    elif example == "stochvol":
        c = cfg["stochvol"]
        params = StochVolParams(kappa=c["kappa"], nu=c["nu"],
                                sigma=c["sigma"], rho=c["rho"])
    else:
        raise ConfigError(f"unknown example {example!r}")
    return make_family(example, params)


def _build_family(cfg: dict, example: str):
    try:
        return _family_raw(cfg, example)
    except (DomainError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _sim_config(cfg: dict) -> SimConfig:
    sim = cfg["simulation"]
    snap = str(sim["snapshots"]).strip()
    snapshot_times = None
    if snap:
        try:
            snapshot_times = tuple(float(s) for s in snap.split(",") if s.strip())
        except ValueError:
            raise ConfigError(f"could not parse snapshots {snap!r}") from None
    try:
        return SimConfig(t_horizon=float(sim["t_horizon"]),
                         dt=float(sim["dt"]), n_paths=int(sim["n_paths"]),
                         seed=int(cfg["run"]["seed"]),
                         snapshot_times=snapshot_times)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def _print_growth_summary(report) -> None:
    print(f"growth simulation under {report.measure}: "
          f"{report.n_paths} paths, dt={report.dt:g}, seed={report.seed}, "
          f"excluded={report.n_excluded}")
    for name in report.strategy_names:
        for t in report.snapshot_times:
            mean, se = report.mean_se(name, t)
            line = f"  {name:<12s} T={t:<6g} mean {mean:+.6f}  se {se:.6f}"
            print(line)


# ---------------------------------------------------------------------------
# command runners (pure: options dict + config dict + outdir)


def run_ctou_report(opts: dict, cfg: dict, outdir: Path) -> int:
    family = _build_family(cfg, "ctou")
    model = family.model
    plots = cfg["run"]["plots"]

    star_dyn = model.worst_case_star()
    hat_dyn = model.worst_case_hat()
    alt_dyn = ctou_alt_hat_dynamics(family)
    hat_coeffs = ctou_p_hat_coefficients(family.params)

    theta_hat_normative = float(-0.5 / model.sig_x[0, 0])
    theta_hat_alternative = float(hat_coeffs["theta_hat_coeff"])

    report = {
        "params": family.params_dict(),
        "lambda_p": model.lambda_p(),
        "lambda_pi": model.lambda_pi(),
        "growth_gap": model.growth_gap(),
        "g_star_under_hat": model.growth_theta_star_under_hat(),
        "theta_star_coefficients": {
            "x": float(-0.5 * model.M_x[0, 0]),
            "y": float(-0.5 * model.M_y[0, 0]),
        },
        "theta_hat_candidates": {
            "marginal_variance_form": theta_hat_normative,
            "mean_reversion_form": theta_hat_alternative,
            "mean_reversion_form_coefficients": hat_coeffs,
        },
        "lyapunov_residuals": {
            "worst_case_star": star_dyn.lyapunov_residual(model.Sigma),
            "worst_case_hat": hat_dyn.lyapunov_residual(model.Sigma),
            "mean_reversion_form_hat": alt_dyn.lyapunov_residual(model.Sigma),
        },
        "stable": {
            "worst_case_star": star_dyn.is_stable,
            "worst_case_hat": hat_dyn.is_stable,
            "mean_reversion_form_hat": alt_dyn.is_stable,
        },
    }

    print("analytic report (linear two-factor pairs model)")
    for key in ("lambda_p", "lambda_pi", "growth_gap", "g_star_under_hat"):
        print(f"  {key:<18s} = {report[key]:.6f}")
    print(f"  theta* coefficients: ({report['theta_star_coefficients']['x']:.6f}, "
          f"{report['theta_star_coefficients']['y']:.6f})")
    print(f"  theta_hat candidates: marginal-variance {theta_hat_normative:.6f}, "
          f"mean-reversion {theta_hat_alternative:.6f}")
    lr = report["lyapunov_residuals"]
    print(f"  stationarity residuals: star {lr['worst_case_star']:.2e}, "
          f"hat {lr['worst_case_hat']:.2e}, "
          f"mean-reversion hat {lr['mean_reversion_form_hat']:.2e}")

    artifacts = [write_json(outdir / "ctou_report.json", report)]

    if not opts.get("no_sim", False):
        simcfg = _sim_config(cfg)
        ref_keys = {"star": ("lambda_p", "lambda_pi"),
                    "hat": ("g_star_under_hat", "lambda_pi")}
        for measure in ("star", "hat"):
            rep = growth_experiment(family, measure, ("star", "hat"), simcfg)
            _print_growth_summary(rep)
            artifacts.append(
                write_growth_csv(outdir / f"growth_{measure}.csv", rep))
            artifacts.append(
                write_json(outdir / f"growth_{measure}_summary.json",
                           rep.summary()))
            if plots:
                artifacts.append(growth_boxplot_figure(
                    rep, outdir / f"growth_{measure}.png",
                    title=f"realized growth under the {measure} saddle",
                    reference_keys=ref_keys[measure]))

    write_manifest(outdir, "ctou-report", opts, cfg, artifacts)
    return 0


def run_gaussian_suite(opts: dict, cfg: dict, outdir: Path) -> int:
    suite_cfg = cfg["suite"]
    rep = run_suite(n_models=int(suite_cfg["n_models"]),
                    seed=int(cfg["run"]["seed"]),
                    max_dim=int(suite_cfg["max_dim"]))
    print(str(rep))
    artifacts = [
        write_json(outdir / "gaussian_suite.json", {
            "n_models": rep.n_models, "seed": rep.seed,
            "max_dim": rep.max_dim, "n_failed": rep.n_failed,
            "worst_residuals": rep.worst(),
        }),
    ]
    artifacts.append(write_table(
        outdir / "gaussian_suite.csv",
        ["model_id", "d", "m", "check", "value", "threshold", "passed"],
        rep.rows()))
    write_manifest(outdir, "gaussian-suite", opts, cfg, artifacts)
    return 0 if rep.all_passed else 1


def _resampled_grids(family, cfg: dict):
    base_x = family.default_x_grid()
    base_y = family.default_y_values()
    n_x = int(cfg["slices"]["n_x"])
    n_y = int(cfg["slices"]["n_y"])
    x_grid = np.linspace(base_x[0], base_x[-1], n_x)
    y_values = np.linspace(base_y[0], base_y[-1], n_y)
    return x_grid, y_values


def run_slices(opts: dict, cfg: dict, outdir: Path) -> int:
    example = opts["example"]
    plots = cfg["run"]["plots"]
    artifacts = []

    if example == "custom":
        table, hat_limit, family = _custom_slice_table(opts, cfg)
    else:
        family = _build_family(cfg, example)
        x_grid, y_values = _resampled_grids(family, cfg)
        table = slice_table(family, x_grid, y_values)
        hat_limit = family.theta_hat_limit() if example == "stochvol" else None

    artifacts.append(write_slice_csv(outdir / f"slices_{example}.csv", table))
    print(f"slice table for {example}: {table.y_values.size} factor slices, "
          f"{table.x_grid.size} x-points")
    if plots:
        artifacts.append(slice_figure(
            table, outdir / f"slices_{example}.png", hat_limit=hat_limit,
            title=f"strategy slices: {example}"))

    if opts.get("numeric", False) and example != "custom":
        summary = _numeric_slice_verification(family, table, cfg, outdir,
                                              artifacts)
        print(f"  numeric verification: worst relative gradient difference "
              f"{summary['max_rel_diff']:.3e}")

    write_manifest(outdir, "slices", opts, cfg, artifacts)
    return 0


def _custom_slice_table(opts: dict, cfg: dict):
    path = opts.get("model_file")
    if not path:
        raise ConfigError("slices --example custom requires --model-file")
    model = load_gaussian_model(path)
    if model.d != 1 or model.m != 1:
        raise ConfigError("custom slice tables support d = m = 1 models only")
    sd_y = float(np.sqrt(model.sig_y[0, 0]))
    sd_x = float(np.sqrt(model.sig_x[0, 0]))
    n_x = int(cfg["slices"]["n_x"])
    n_y = int(cfg["slices"]["n_y"])
    x_grid = np.linspace(-3.0 * sd_x / 0.187, 3.0 * sd_x / 0.187, n_x) \
        if sd_x > 0 else np.linspace(-3.0, 3.0, n_x)
    y_values = np.linspace(-2.0 * sd_y, 2.0 * sd_y, n_y)
    star = model.theta_star()
    hat = model.theta_hat()
    z = np.stack(np.meshgrid(x_grid, y_values, indexing="xy"), axis=-1)
    theta_star = star(z.reshape(-1, 2)).reshape(n_y, n_x)
    zx = np.column_stack([x_grid, np.zeros_like(x_grid)])
    theta_hat = hat(zx)[:, 0]
    table = SliceTable(family="custom",
                       params={"d": model.d, "m": model.m},
                       x_grid=x_grid, y_values=y_values,
                       theta_hat=theta_hat, theta_star=theta_star)
    return table, None, None


def _numeric_slice_verification(family, table, cfg, outdir, artifacts):
    """Re-derive the strategy gradient numerically (divergence integral plus
    coefficient assembly) on a dense, well-conditioned slice and compare to
    the closed form.  The solve recovers the strategy as a ratio of
    density-scaled quantities, so the comparison runs on the family's
    conditioned core slice rather than the full table range."""
    inputs = family.inputs()
    n_dense = int(cfg["slices"]["numeric_points"])
    y0, (x_lo, x_hi) = slice_verification_geometry(family.name)
    x_dense = np.linspace(x_lo, x_hi, n_dense)
    sol = solve_slice(inputs, None, y0, x_dense)
    closed = np.asarray(family.theta_star_xy(x_dense, y0), float)
    max_rel = float(np.max(np.abs(sol.grad_phi_star - closed))
                    / max(np.max(np.abs(closed)), 1e-300))
    rows = [{"y": y0, "rel_diff": max_rel, "residual": sol.residual}]
    numeric_table = SliceTable(
        family=table.family, params=table.params, x_grid=x_dense,
        y_values=np.array([y0]),
        theta_hat=np.asarray(family.theta_hat_x(x_dense), float),
        theta_star=sol.grad_phi_star[None, :])
    artifacts.append(write_slice_csv(
        outdir / f"slices_{table.family}_numeric.csv", numeric_table))
    summary = {"max_rel_diff": max_rel, "slices": rows}
    artifacts.append(write_json(
        outdir / f"slices_{table.family}_numeric.json", summary))
    return summary


def run_simulate(opts: dict, cfg: dict, outdir: Path) -> int:
    example = opts["example"]
    plots = cfg["run"]["plots"]
    artifacts = []

    if example == "stochvol":
        family = _build_family(cfg, example)
        print("growth simulation under the stochastic-volatility saddle is "
              "not supported: the strategy's quadratic variation is not "
              "integrable near the zero-volatility boundary.  Running the "
              "factor-level stationarity check instead.")
        erg = cfg["ergodic"]
        t_horizon = opts.get("t_horizon")
        dt = opts.get("dt")
        n_paths = opts.get("n_paths")
        rep = stochvol_ergodic(
            family,
            t_horizon=float(erg["t_horizon"] if t_horizon is None else t_horizon),
            dt=float(erg["dt"] if dt is None else dt),
            n_paths=int(erg["n_paths"] if n_paths is None else n_paths),
            seed=int(cfg["run"]["seed"]))
        print(str(rep))
        artifacts.append(write_ergodic_csv(outdir / "ergodic_stochvol.csv", rep))
        artifacts.append(write_json(outdir / "ergodic_stochvol.json", {
            "rows": [{"name": r.name, "time_average": r.time_average,
                      "target": r.target, "se": r.se, "z_score": r.z_score}
                     for r in rep.rows],
            "t_horizon": rep.t_horizon, "dt": rep.dt,
            "n_paths": rep.n_paths, "seed": rep.seed}))
        if plots:
            artifacts.append(ergodic_figure(
                rep, outdir / "ergodic_stochvol.png",
                title="factor stationarity: time average vs target"))
        write_manifest(outdir, "simulate", opts, cfg, artifacts)
        return 0 if rep.all_within(3.0) else 1

    measure = opts.get("measure", "star")
    strategy_keys = [s for s in opts.get("strategies", "star,hat").split(",")
                     if s.strip()]
    simcfg = _sim_config(cfg)

    if example == "custom":
        rep = _simulate_custom(opts, measure, strategy_keys, simcfg)
    else:
        family = _build_family(cfg, example)
        try:
            rep = growth_experiment(family, measure, strategy_keys, simcfg)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    _print_growth_summary(rep)
    stem = f"growth_{example}_{measure}"
    artifacts.append(write_growth_csv(outdir / f"{stem}.csv", rep))
    artifacts.append(write_json(outdir / f"{stem}_summary.json", rep.summary()))
    if plots:
        artifacts.append(growth_boxplot_figure(
            rep, outdir / f"{stem}.png",
            title=f"{example}: realized growth under the {measure} saddle"))
    write_manifest(outdir, "simulate", opts, cfg, artifacts)
    return 0


def _simulate_custom(opts: dict, measure: str, strategy_keys, simcfg):
    path = opts.get("model_file")
    if not path:
        raise ConfigError("simulate --example custom requires --model-file")
    model = load_gaussian_model(path)
    dyn_lin = model.worst_case_star() if measure == "star" \
        else model.worst_case_hat()
    spec = linear_spec(dyn_lin, model.d)
    strategies = []
    for key in strategy_keys:
        key = key.strip().lower()
        if key == "star":
            strategies.append(model.theta_star())
        elif key == "hat":
            strategies.append(model.theta_hat())
        elif key == "zero":
            from .strategy import zero_strategy
            strategies.append(zero_strategy(model.d, model.d + model.m))
        else:
            raise ConfigError(f"unknown strategy {key!r}")
    refs = ctou_references(model)
    return simulate_growth(spec, strategies, simcfg, references=refs,
                           measure=measure)


def run_check(opts: dict, cfg: dict, outdir: Path) -> int:
    example = opts["example"]
    perturb = float(opts.get("perturb_by", 0.0) or 0.0)
    try:
        family = _family_raw(cfg, example)
    except FellerConditionError as exc:
        report = CheckReport(example=example, results=[
            CheckResult("feller", False, float("nan"), 0.0, str(exc))])
        print(str(report))
        artifacts = [write_json(outdir / f"check_{example}.json",
                                _check_payload(report))]
        write_manifest(outdir, "check", opts, cfg, artifacts)
        return 1
    except (DomainError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    report = run_checks(family, perturb_by=perturb)
    print(str(report))
    artifacts = [write_json(outdir / f"check_{example}.json",
                            _check_payload(report))]
    write_manifest(outdir, "check", opts, cfg, artifacts)
    return 0 if report.passed else 1


def _check_payload(report: CheckReport) -> dict:
    return {"example": report.example, "passed": report.passed,
            "failures": report.failures,
            "results": [{"name": r.name, "passed": r.passed,
                         "value": r.value, "tolerance": r.tolerance,
                         "note": r.note} for r in report.results]}


def run_replay(opts: dict, cfg_unused: dict, outdir: Path) -> int:
    manifest_path = opts["manifest"]
    man = load_manifest(manifest_path)
    command = man["command"]
    if command not in _RUNNERS or command == "replay":
        raise ConfigError(f"manifest records unknown command {command!r}")
    cfg = man["config"]
    rerun_dir = outdir / "replay"
    rerun_dir.mkdir(parents=True, exist_ok=True)
    print(f"replaying {command} into {rerun_dir}")
    _RUNNERS[command](man["options"], cfg, rerun_dir)

    strict_ok = True
    for name, recorded in sorted(man["artifacts"].items()):
        target = rerun_dir / name
        if not target.exists():
            print(f"  MISSING  {name}")
            strict_ok = False
            continue
        actual = sha256_file(target)
        same = actual == recorded
        strict = target.suffix in (".csv", ".json")
        tag = "identical" if same else ("DIFFERS" if strict else
                                        "differs (figure, tolerated)")
        print(f"  {tag:<28s} {name}")
        if strict and not same:
            strict_ok = False
    print("replay result: " + ("byte-identical" if strict_ok
                               else "MISMATCH in delimited/JSON artifacts"))
    return 0 if strict_ok else 1


_RUNNERS = {
    "ctou-report": run_ctou_report,
    "gaussian-suite": run_gaussian_suite,
    "slices": run_slices,
    "simulate": run_simulate,
    "check": run_check,
}


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robustgrowth",
        description="Robust growth-optimal investment under factor-drift "
                    "uncertainty: analytic reports, slice tables, and "
                    "saddle-measure simulations.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--outdir", help=f"output directory (default: "
                                         f"${OUTDIR_ENV} or {DEFAULT_OUTDIR})")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--no-plots", action="store_true",
                        help="skip figure rendering")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ctou-report", parents=[common],
                       help="analytic report and growth-distribution runs "
                            "for the linear two-factor pairs model")
    p.add_argument("--no-sim", action="store_true",
                   help="analytic report only")
    p.add_argument("--n-paths", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-horizon", type=float)
    p.add_argument("--snapshots", help="comma-separated snapshot times")

    p = sub.add_parser("gaussian-suite", parents=[common],
                       help="randomized verification battery over Gaussian "
                            "factor models")
    p.add_argument("--n-models", type=int)
    p.add_argument("--max-dim", type=int)

    p = sub.add_parser("slices", parents=[common],
                       help="strategy slice tables per example family")
    p.add_argument("--example", required=True,
                   choices=["ctou", "tdist", "stochvol", "custom"])
    p.add_argument("--model-file", help="saved Gaussian model (custom)")
    p.add_argument("--n-x", type=int)
    p.add_argument("--n-y", type=int)
    p.add_argument("--numeric", action="store_true",
                   help="re-derive slices numerically and compare")

    p = sub.add_parser("simulate", parents=[common],
                       help="growth simulation under a saddle measure")
    p.add_argument("--example", required=True,
                   choices=["ctou", "tdist", "stochvol", "custom"])
    p.add_argument("--measure", choices=["star", "hat"], default="star")
    p.add_argument("--strategies", default="star,hat",
                   help="comma-separated keys: star, hat, zero")
    p.add_argument("--model-file", help="saved Gaussian model (custom)")
    p.add_argument("--n-paths", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-horizon", type=float)
    p.add_argument("--snapshots", help="comma-separated snapshot times")

    p = sub.add_parser("check", parents=[common],
                       help="invariant battery for one example family")
    p.add_argument("--example", required=True,
                   choices=["ctou", "tdist", "stochvol"])
    p.add_argument("--perturb-by", type=float, default=0.0,
                   help="shift the factor drift by a constant and re-check "
                        "compatibility (a nonzero shift must fail)")

    p = sub.add_parser("replay", parents=[common],
                       help="re-run a manifest and verify artifact checksums")
    p.add_argument("--manifest", required=True)

    return parser


_OPTION_ATTRS = {
    "ctou-report": ("no_sim",),
    "gaussian-suite": (),
    "slices": ("example", "model_file", "numeric"),
    "simulate": ("example", "measure", "strategies", "model_file",
                 "n_paths", "dt", "t_horizon"),
    "check": ("example", "perturb_by"),
    "replay": ("manifest",),
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(getattr(args, "config", None))
        apply_flag_overrides(cfg, args)
        outdir = resolve_outdir(cfg)
        opts = {attr: getattr(args, attr, None)
                for attr in _OPTION_ATTRS[args.command]}
        if args.command == "replay":
            return run_replay(opts, cfg, outdir)
        return _RUNNERS[args.command](opts, cfg, outdir)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except RobustGrowthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
