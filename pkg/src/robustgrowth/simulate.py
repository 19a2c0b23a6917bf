"""Monte-Carlo engine: Euler-Maruyama paths of the state Z = (X, Y),
pathwise log-wealth for feedback strategies, growth-rate reports, and
time-average vs space-average ergodic checks.

Randomness is counter-based: path i of a run seeded s draws from an
independent Philox stream keyed (s, i), so results are bit-identical for a
fixed seed no matter how paths are blocked, and all strategies in a run share
the same Brownian increments (common random numbers).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, SimulationError
from .gaussian import LinearDynamics

DEFAULT_SEED = 812970


def path_rng(seed: int, path_index: int) -> np.random.Generator:
    """Philox stream for one path, keyed by (run seed, path index)."""
    key = np.array([seed, path_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class DynamicsSpec:
    """Drift and diffusion of dZ = drift(Z) dt + factor(Z) dW on F = E x D.

    diffusion_factor and c_x may be constant arrays or callables on state
    batches of shape (n, dim).  guard_lower, when set, floors each state
    coordinate after every step (full-truncation handling of one-sided
    domains like the square-root variance factor); coefficients are then only
    ever evaluated at floored states.  d = 0 is allowed for factor-only
    dynamics (no tradable coordinates, ergodic checks only).

    init_sampler, when set, draws each path's initial state from the
    dynamics' invariant law, (rng, n) -> (n, dim); it is used whenever the run
    config does not pin an explicit initial point.  Growth-rate targets are
    stationary expectations, and a deterministic start adds an O(1/T)
    relaxation bias to (1/T) log V_T that a stationary start removes.  Each
    path draws from its own stream, so runs stay reproducible and
    block-invariant.
    """

    name: str
    d: int
    dim: int
    drift: Callable
    diffusion_factor: object
    c_x: object = None
    c_full: object = None
    guard_lower: Optional[np.ndarray] = None
    z0: Optional[np.ndarray] = None
    scheme: str = "euler"
    init_sampler: Optional[Callable] = None

    def initial_states(self, gens, explicit_z0=None) -> np.ndarray:
        """Initial state block for the paths behind `gens`: the explicit
        point when given, else one invariant-law draw per path, else the
        default point."""
        if explicit_z0 is not None:
            z0 = np.asarray(explicit_z0, dtype=float).reshape(self.dim)
            if self.guard_lower is not None and np.any(z0 < self.guard_lower):
                raise DomainError("initial state violates the domain guard")
            return np.tile(z0, (len(gens), 1))
        if self.init_sampler is not None:
            z = np.empty((len(gens), self.dim))
            for j, g in enumerate(gens):
                z[j] = np.asarray(self.init_sampler(g, 1),
                                  dtype=float).reshape(self.dim)
            if self.guard_lower is not None:
                np.maximum(z, self.guard_lower, out=z)
            return z
        return np.tile(self.z0, (len(gens), 1))

    def __post_init__(self):
        if self.d < 0 or self.dim < max(self.d, 1):
            raise DomainError("need dim >= max(d, 1) and d >= 0")
        if self.z0 is None:
            self.z0 = np.zeros(self.dim)
        self.z0 = np.asarray(self.z0, dtype=float).reshape(self.dim)
        if self.guard_lower is not None:
            self.guard_lower = np.asarray(self.guard_lower, dtype=float).reshape(self.dim)
            if np.any(self.z0 < self.guard_lower):
                raise DomainError("initial state violates the domain guard")

    def factor_residual(self, z_batch) -> float:
        """Max |factor factor' - c| over the batch; needs c_full."""
        if self.c_full is None:
            raise DomainError("no full covariance attached to this spec")
        z = np.atleast_2d(np.asarray(z_batch, dtype=float))
        fac = self.diffusion_factor(z) if callable(self.diffusion_factor) \
            else np.broadcast_to(self.diffusion_factor, z.shape[:-1] + (self.dim, self.dim))
        cc = self.c_full(z) if callable(self.c_full) \
            else np.broadcast_to(self.c_full, z.shape[:-1] + (self.dim, self.dim))
        return float(np.max(np.abs(fac @ np.swapaxes(fac, -1, -2) - cc)))


def linear_spec(dyn: LinearDynamics, d: int, z0=None,
                name: Optional[str] = None) -> DynamicsSpec:
    """Wrap constant-coefficient dynamics dZ = K Z dt + c^{1/2} dW.

    Stable dynamics with an attached stationary covariance get an
    invariant-law initial sampler (mean-zero Gaussian); an explicit z0
    suppresses it."""
    dim = dyn.dim
    sampler = None
    if z0 is None and dyn.stationary_sigma is not None and dyn.is_stable:
        chol = np.linalg.cholesky(np.asarray(dyn.stationary_sigma, float))

        def sampler(rng, n, _l=chol):
            return rng.standard_normal((n, dim)) @ _l.T

    return DynamicsSpec(name=name if name is not None else dyn.name,
                        d=d, dim=dim,
                        drift=lambda z: np.asarray(z, float) @ dyn.K.T,
                        diffusion_factor=dyn.c_half,
                        c_x=dyn.c[:d, :d] if d > 0 else None,
                        c_full=dyn.c, z0=z0, init_sampler=sampler)


@dataclass
class SimConfig:
    """T and dt in years; snapshot_times are report times (default (T,)),
    each an integer multiple of dt."""

    t_horizon: float
    dt: float = 1e-3
    n_paths: int = 10000
    seed: int = DEFAULT_SEED
    z0: Optional[np.ndarray] = None
    snapshot_times: Optional[Sequence[float]] = None
    path_block: int = 4096
    time_chunk: int = 256
    max_excluded_fraction: float = 1e-3

    def __post_init__(self):
        if not (self.dt > 0 and self.t_horizon >= self.dt):
            raise DomainError("need dt > 0 and t_horizon >= dt")
        if self.n_paths < 1:
            raise DomainError("need n_paths >= 1")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise DomainError("seed must fit in 64 bits")

    def n_steps(self) -> int:
        n = int(round(self.t_horizon / self.dt))
        if abs(n * self.dt - self.t_horizon) > 1e-9 * max(1.0, self.t_horizon):
            raise DomainError("t_horizon must be an integer multiple of dt")
        return n

    def snapshot_steps(self) -> dict:
        times = self.snapshot_times if self.snapshot_times is not None \
            else (self.t_horizon,)
        n = self.n_steps()
        out = {}
        for i, t in enumerate(sorted(float(t) for t in times)):
            s = int(round(t / self.dt))
            if abs(s * self.dt - t) > 1e-9 * max(1.0, t) or not 1 <= s <= n:
                raise DomainError(
                    f"snapshot time {t} is not a step multiple within (0, T]")
            out[s] = i
        if len(out) != len(times):
            raise DomainError("snapshot times must be distinct")
        return out


@dataclass
class BoxplotStats:
    """Five-number summary with 1.5 IQR whiskers, plus the mean."""

    whisker_lo: float
    q1: float
    median: float
    q3: float
    whisker_hi: float
    mean: float


def boxplot_stats(samples) -> BoxplotStats:
    s = np.asarray(samples, dtype=float).ravel()
    if s.size < 5:
        raise DomainError("boxplot summary needs at least 5 samples")
    q1, med, q3 = np.percentile(s, [25.0, 50.0, 75.0])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = s[(s >= lo_fence) & (s <= hi_fence)]
    return BoxplotStats(whisker_lo=float(np.min(inside)), q1=float(q1),
                        median=float(med), q3=float(q3),
                        whisker_hi=float(np.max(inside)),
                        mean=float(np.mean(s)))


# ---------------------------------------------------------------------------
# growth simulation


@dataclass
class GrowthReport:
    """Per-path growth samples (1/t) log V_t for each strategy and snapshot
    time, with exclusion bookkeeping and analytic reference values."""

    measure: str
    strategy_names: list
    snapshot_times: np.ndarray
    dt: float
    n_paths: int
    seed: int
    samples: np.ndarray          # (n_strategies, n_snapshots, n_paths)
    excluded: np.ndarray         # (n_paths,) bool
    z_terminal: np.ndarray       # (n_paths, dim)
    references: dict = field(default_factory=dict)

    @property
    def n_excluded(self) -> int:
        return int(np.sum(self.excluded))

    def _index(self, strategy: str, t: float):
        si = self.strategy_names.index(strategy)
        ti = int(np.argmin(np.abs(self.snapshot_times - t)))
        if abs(self.snapshot_times[ti] - t) > 1e-9 * max(1.0, t):
            raise DomainError(f"no snapshot at t = {t}")
        return si, ti

    def growth_samples(self, strategy: str, t: Optional[float] = None):
        si, ti = self._index(strategy, self.snapshot_times[-1] if t is None else t)
        return self.samples[si, ti, ~self.excluded]

    def mean_se(self, strategy: str, t: Optional[float] = None):
        s = self.growth_samples(strategy, t)
        return float(np.mean(s)), float(np.std(s, ddof=1) / np.sqrt(s.size))

    def diff_mean_se(self, strategy_a: str, strategy_b: str,
                     t: Optional[float] = None):
        """Common-random-number estimate of the growth difference a - b."""
        da = self.growth_samples(strategy_a, t)
        db = self.growth_samples(strategy_b, t)
        diff = da - db
        return float(np.mean(diff)), float(np.std(diff, ddof=1) / np.sqrt(diff.size))

    def box(self, strategy: str, t: Optional[float] = None) -> BoxplotStats:
        return boxplot_stats(self.growth_samples(strategy, t))

    def summary(self) -> dict:
        rows = []
        for name in self.strategy_names:
            for t in self.snapshot_times:
                mean, se = self.mean_se(name, t)
                b = self.box(name, t)
                rows.append({"strategy": name, "t": float(t), "mean": mean,
                             "se": se, "q1": b.q1, "median": b.median,
                             "q3": b.q3, "whisker_lo": b.whisker_lo,
                             "whisker_hi": b.whisker_hi})
        return {"measure": self.measure, "dt": self.dt,
                "n_paths": self.n_paths, "seed": self.seed,
                "n_excluded": self.n_excluded,
                "references": dict(self.references), "rows": rows}


def _strategy_name(s, i):
    return getattr(s, "name", None) or f"strategy{i}"


def simulate_growth(dynamics: DynamicsSpec, strategies, cfg: SimConfig,
                    references: Optional[dict] = None,
                    measure: Optional[str] = None) -> GrowthReport:
    """Euler-Maruyama on Z with pathwise log-wealth
    d log V = theta(Z)' dX - 1/2 theta(Z)' c_X(Z) theta(Z) dt (left endpoint).

    All strategies see the same increments.  Paths whose state or growth
    turns non-finite are flagged and excluded from statistics; the run aborts
    if more than cfg.max_excluded_fraction of paths are flagged.
    """
    if dynamics.d < 1:
        raise DomainError("growth simulation needs at least one tradable coordinate")
    strategies = list(strategies)
    if not strategies:
        raise DomainError("need at least one strategy")
    names = [_strategy_name(s, i) for i, s in enumerate(strategies)]
    if len(set(names)) != len(names):
        raise DomainError(f"strategy names must be distinct, got {names}")

    n_steps = cfg.n_steps()
    snap = cfg.snapshot_steps()
    n_snap = len(snap)
    n_paths, d, dim = cfg.n_paths, dynamics.d, dynamics.dim

    const_fac = not callable(dynamics.diffusion_factor)
    fac_T = np.asarray(dynamics.diffusion_factor, float).T if const_fac else None
    const_cx = not callable(dynamics.c_x)
    cx_const = np.asarray(dynamics.c_x, float) if const_cx else None

    samples = np.empty((len(strategies), n_snap, n_paths))
    z_term = np.empty((n_paths, dim))
    excluded = np.zeros(n_paths, dtype=bool)
    sqrt_dt = np.sqrt(cfg.dt)

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for lo in range(0, n_paths, cfg.path_block):
            hi = min(lo + cfg.path_block, n_paths)
            nb = hi - lo
            gens = [path_rng(int(cfg.seed), i) for i in range(lo, hi)]
            Z = dynamics.initial_states(gens, cfg.z0)
            logv = np.zeros((len(strategies), nb))
            step = 0
            while step < n_steps:
                chunk = min(cfg.time_chunk, n_steps - step)
                dw = np.empty((nb, chunk, dim))
                for j, g in enumerate(gens):
                    dw[j] = g.standard_normal((chunk, dim))
                dw *= sqrt_dt
                for t in range(chunk):
                    mu = dynamics.drift(Z)
                    if const_fac:
                        dB = dw[:, t, :] @ fac_T
                    else:
                        dB = np.einsum("nij,nj->ni",
                                       dynamics.diffusion_factor(Z), dw[:, t, :])
                    dZ = mu * cfg.dt + dB
                    dX = dZ[:, :d]
                    cx = cx_const if const_cx else dynamics.c_x(Z)
                    for k, strat in enumerate(strategies):
                        th = np.asarray(strat(Z), dtype=float)
                        drift_term = np.einsum("ni,ni->n", th, dX)
                        if const_cx:
                            quad_term = np.einsum("ni,ij,nj->n", th, cx, th)
                        else:
                            quad_term = np.einsum("ni,nij,nj->n", th, cx, th)
                        logv[k] += drift_term - 0.5 * quad_term * cfg.dt
                    Z = Z + dZ
                    if dynamics.guard_lower is not None:
                        np.maximum(Z, dynamics.guard_lower, out=Z)
                    step += 1
                    si = snap.get(step)
                    if si is not None:
                        samples[:, si, lo:hi] = logv / (step * cfg.dt)
            z_term[lo:hi] = Z
            bad = ~np.all(np.isfinite(Z), axis=1)
            bad |= ~np.all(np.isfinite(samples[:, :, lo:hi]), axis=(0, 1))
            excluded[lo:hi] = bad

    frac = excluded.mean()
    if frac > cfg.max_excluded_fraction:
        raise SimulationError(
            f"{int(excluded.sum())} of {n_paths} paths "
            f"({100 * frac:.3f}%) went non-finite; exceeded the "
            f"{100 * cfg.max_excluded_fraction:.3f}% exclusion budget")

    times = np.array(sorted(s * cfg.dt for s in snap))
    return GrowthReport(measure=measure if measure is not None else dynamics.name,
                        strategy_names=names, snapshot_times=times,
                        dt=cfg.dt, n_paths=n_paths, seed=int(cfg.seed),
                        samples=samples, excluded=excluded, z_terminal=z_term,
                        references=dict(references or {}))


# ---------------------------------------------------------------------------
# ergodic averages


@dataclass
class ErgodicRow:
    name: str
    time_average: float
    target: float
    se: float

    @property
    def z_score(self) -> float:
        return abs(self.time_average - self.target) / self.se if self.se > 0 \
            else np.inf

    def __str__(self):
        return (f"{self.name}: time average {self.time_average:.6g}, target "
                f"{self.target:.6g} ({self.z_score:.2f} SE)")


@dataclass
class ErgodicReport:
    rows: list
    t_horizon: float
    dt: float
    n_paths: int
    seed: int
    method: str
    per_path: dict

    def all_within(self, n_se: float = 3.0) -> bool:
        return all(r.z_score <= n_se for r in self.rows)

    def __str__(self):
        head = (f"ergodic check: T={self.t_horizon:g}, dt={self.dt:g}, "
                f"{self.n_paths} path(s), SE by {self.method}")
        return "\n".join([head] + ["  " + str(r) for r in self.rows])


def simulate_ergodic_averages(dynamics: DynamicsSpec, cfg: SimConfig,
                              observables, n_batches: int = 20) -> ErgodicReport:
    """Time averages (1/T) integral h(Z_t) dt for scalar observables, against
    their space averages under p.

    observables: list of (name, fn, target) with fn mapping state batches
    (n, dim) -> (n,).  Standard errors come from dispersion across paths
    (ensemble runs) or across time batches (single path).
    """
    obs = [(str(n), f, float(tgt)) for n, f, tgt in observables]
    if not obs:
        raise DomainError("need at least one observable")
    n_steps = cfg.n_steps()
    n_paths, dim = cfg.n_paths, dynamics.dim
    n_batches = max(1, min(n_batches, n_steps))
    batch_len = n_steps / n_batches

    const_fac = not callable(dynamics.diffusion_factor)
    fac_T = np.asarray(dynamics.diffusion_factor, float).T if const_fac else None
    seg_sums = np.zeros((len(obs), n_paths, n_batches))
    sqrt_dt = np.sqrt(cfg.dt)
    excluded = np.zeros(n_paths, dtype=bool)

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for lo in range(0, n_paths, cfg.path_block):
            hi = min(lo + cfg.path_block, n_paths)
            nb = hi - lo
            gens = [path_rng(int(cfg.seed), i) for i in range(lo, hi)]
            Z = dynamics.initial_states(gens, cfg.z0)
            step = 0
            while step < n_steps:
                chunk = min(cfg.time_chunk, n_steps - step)
                dw = np.empty((nb, chunk, dim))
                for j, g in enumerate(gens):
                    dw[j] = g.standard_normal((chunk, dim))
                dw *= sqrt_dt
                for t in range(chunk):
                    seg = min(int(step / batch_len), n_batches - 1)
                    for k, (_, fn, _) in enumerate(obs):
                        seg_sums[k, lo:hi, seg] += np.asarray(fn(Z), float) * cfg.dt
                    mu = dynamics.drift(Z)
                    if const_fac:
                        dB = dw[:, t, :] @ fac_T
                    else:
                        dB = np.einsum("nij,nj->ni",
                                       dynamics.diffusion_factor(Z), dw[:, t, :])
                    Z = Z + mu * cfg.dt + dB
                    if dynamics.guard_lower is not None:
                        np.maximum(Z, dynamics.guard_lower, out=Z)
                    step += 1
            excluded[lo:hi] = ~np.all(np.isfinite(Z), axis=1)

    if np.any(excluded) and excluded.mean() > cfg.max_excluded_fraction:
        raise SimulationError(f"{int(excluded.sum())} path(s) went non-finite "
                              "during the ergodic run")

    path_avgs = seg_sums.sum(axis=2) / cfg.t_horizon
    rows = []
    per_path = {}
    if n_paths >= 2:
        method = "path ensemble"
        for k, (name, _, tgt) in enumerate(obs):
            vals = path_avgs[k][~excluded]
            se = float(np.std(vals, ddof=1) / np.sqrt(vals.size))
            rows.append(ErgodicRow(name, float(np.mean(vals)), tgt, se))
            per_path[name] = vals
    else:
        method = f"{n_batches} time batches"
        for k, (name, _, tgt) in enumerate(obs):
            batches = seg_sums[k, 0, :] * (n_batches / cfg.t_horizon)
            se = float(np.std(batches, ddof=1)
                       / np.sqrt(n_batches)) if n_batches > 1 else np.inf
            rows.append(ErgodicRow(name, float(path_avgs[k, 0]), tgt, se))
            per_path[name] = path_avgs[k]
    return ErgodicReport(rows=rows, t_horizon=cfg.t_horizon, dt=cfg.dt,
                         n_paths=n_paths, seed=int(cfg.seed),
                         method=method, per_path=per_path)


# ---------------------------------------------------------------------------
# CIR step


def cir_guarded_step(y, drift_fn, vol_fn, dw, dt, floor: float = 1e-12):
    """One full-truncation Euler step of a one-sided factor: the drift and
    volatility arguments are clamped at max(y, 0) and the output is floored
    at `floor`, so the square-root diffusion never sees a negative state."""
    y = np.asarray(y, dtype=float)
    y_eval = np.maximum(y, 0.0)
    y_next = y + np.asarray(drift_fn(y_eval), float) * dt \
        + np.asarray(vol_fn(y_eval), float) * np.asarray(dw, float)
    return np.maximum(y_next, floor)
