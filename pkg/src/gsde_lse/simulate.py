"""Euler simulation of SDEs driven by a G-Brownian motion.

The model is ``dX = a(theta0, X) dt + b(X) d<B> + dB`` with ``d<B> = sigma^2 dt``.
Under a fixed scenario the recursion is

    X_i = X_{i-1} + a(theta0, X_{i-1}) dt + b(X_{i-1}) sigma^2 dt + dB_i,

with ``dB_i ~ Normal(0, sigma^2 dt)``.  ``simulate_path`` runs it for one path;
``simulate_batch`` runs it for many paths at once in time chunks, using the
same arithmetic so both routes give identical floats.
"""

from dataclasses import dataclass
import csv
import itertools
import math

import numpy as np

from .errors import ConfigError, SimulationDiverged, UsageError
from .sublinear import GNormalSpec, VarianceInterval, build_scenario_grid

DIVERGENCE_BOUND = 1e12


@dataclass(frozen=True)
class ModelSpec:
    """Drift ``a(theta, x)``, quadratic-variation drift ``b(x)`` and the noise law.

    ``drift`` and ``qv_drift`` must accept numpy arrays for ``x``.  ``qv_drift``
    may be ``None`` for ``b == 0``, which skips the term entirely.
    ``var_interval`` is the variance interval of the driving G-Brownian motion.
    """

    drift: object
    true_theta: float
    theta_set: tuple
    var_interval: VarianceInterval
    initial_law: GNormalSpec
    qv_drift: object = None
    name: str = "custom"

    def __post_init__(self):
        lo, hi = self.theta_set
        if not lo < hi:
            raise ConfigError(f"parameter set must satisfy theta_min < theta_max, got {self.theta_set}")
        if not lo <= self.true_theta <= hi:
            raise ConfigError(f"true theta {self.true_theta} outside parameter set {self.theta_set}")

    def a(self, theta, x):
        return self.drift(theta, x)

    def b(self, x):
        if self.qv_drift is None:
            return np.zeros_like(np.asarray(x, dtype=float))
        return self.qv_drift(x)

    @property
    def is_ou(self):
        return self.name == "ou"


def _ou_drift(theta, x):
    return -theta * x


def ou_model(theta0=1.0, var_interval=None, initial_interval=None, theta_set=(0.1, 5.0)):
    """Ornstein-Uhlenbeck model ``dX = -theta0 X dt + dB``.

    Defaults: ``<B>`` rate in ``[0.5, 1]`` and ``X_0 ~ N(0, [0.4/theta0, 0.6/theta0])``.
    """
    if var_interval is None:
        var_interval = VarianceInterval(0.5, 1.0)
    if initial_interval is None:
        initial_interval = VarianceInterval(0.4 / theta0, 0.6 / theta0)
    return ModelSpec(
        drift=_ou_drift,
        true_theta=theta0,
        theta_set=tuple(theta_set),
        var_interval=var_interval,
        initial_law=GNormalSpec(initial_interval),
        name="ou",
    )


@dataclass(frozen=True)
class GridConfig:
    n: int
    dt: float
    m: int = 10
    J: int = 512
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError(f"n must be a positive integer, got {self.n}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if int(self.m) != self.m or self.m < 2:
            raise ConfigError(f"m must be >= 2, got {self.m}")
        if int(self.J) != self.J or self.J < 1:
            raise ConfigError(f"J must be >= 1, got {self.J}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed}")

    @property
    def T(self):
        return self.n * self.dt

    def times(self):
        return np.arange(self.n + 1) * self.dt


@dataclass(frozen=True)
class ScenarioPath:
    """Volatility trajectory of one round.

    ``init_var`` is the variance used for the initial condition in this round.
    """

    scenario_var: float
    per_step_var: np.ndarray
    init_var: float = None

    @classmethod
    def constant(cls, scenario_var, n, init_var=None):
        return cls(float(scenario_var), np.full(n, float(scenario_var)), init_var)

    @property
    def n(self):
        return len(self.per_step_var)

    def check(self, iv):
        v = np.asarray(self.per_step_var)
        if np.any(v < iv.lower_var) or np.any(v > iv.upper_var):
            raise ConfigError("scenario variances leave the model's variance interval")


@dataclass(frozen=True)
class SamplePath:
    times: np.ndarray
    values: np.ndarray
    increments_B: np.ndarray
    scenario: ScenarioPath

    def __post_init__(self):
        n = len(self.values) - 1
        if n < 1:
            raise UsageError("a sample path needs at least two observations")
        if len(self.times) != n + 1 or len(self.increments_B) != n or self.scenario.n != n:
            raise UsageError(
                f"inconsistent path lengths: times={len(self.times)}, values={n + 1}, "
                f"increments={len(self.increments_B)}, scenario={self.scenario.n}"
            )

    @property
    def n(self):
        return len(self.values) - 1

    @property
    def T(self):
        return float(self.times[-1] - self.times[0])

    @property
    def dt(self):
        return self.T / self.n

    @classmethod
    def from_observations(cls, values, dt, sigma2=1.0):
        """Wrap externally observed data on a uniform grid.

        ``sigma2`` is the constant variance weight attached to every step;
        increments of ``B`` are unknown and stored as NaN.
        """
        values = np.asarray(values, dtype=float)
        n = len(values) - 1
        return cls(
            times=np.arange(n + 1) * float(dt),
            values=values,
            increments_B=np.full(n, np.nan),
            scenario=ScenarioPath.constant(sigma2, n),
        )


def scenario_paths(model, m, n):
    """One constant-volatility scenario per grid point, paired with the matching
    initial-condition variance from an equally sized grid over the initial law."""
    grid = build_scenario_grid(model.var_interval, m)
    init_grid = build_scenario_grid(model.initial_law.var_interval, m)
    return [ScenarioPath.constant(v, n, v0) for v, v0 in zip(grid, init_grid)]


def simulate_increments(scenario_var, cfg, rng, n=None):
    """``n`` (default ``cfg.n``) i.i.d. ``Normal(0, scenario_var * dt)`` draws."""
    if not scenario_var > 0:
        raise ConfigError(f"scenario variance must be positive, got {scenario_var}")
    n = cfg.n if n is None else n
    return rng.standard_normal(n) * math.sqrt(scenario_var * cfg.dt)


def euler_step(model, x, var, dt, dB):
    nxt = x + model.a(model.true_theta, x) * dt
    if model.qv_drift is not None:
        nxt = nxt + model.qv_drift(x) * var * dt
    return nxt + dB


def _initial_value(model, scenario, rng):
    v0 = scenario.init_var
    if v0 is None:
        iv = model.initial_law.var_interval
        v0 = min(max(scenario.scenario_var, iv.lower_var), iv.upper_var)
    z = rng.standard_normal()
    return float(z) * math.sqrt(v0)


def simulate_path(model, scenario, cfg, rng, *, x0=None, increments=None):
    """Simulate one path under ``scenario``.

    The initial value is drawn first from ``rng`` (unless ``x0`` is given),
    then the ``n`` increments (unless ``increments`` is given).  Raises
    :class:`SimulationDiverged` when the state becomes non-finite or exceeds
    ``DIVERGENCE_BOUND`` in absolute value.
    """
    if scenario.n != cfg.n:
        raise UsageError(f"scenario has {scenario.n} steps, grid has {cfg.n}")
    scenario.check(model.var_interval)
    if x0 is None:
        x0 = _initial_value(model, scenario, rng)
    if increments is None:
        if np.all(scenario.per_step_var == scenario.scenario_var):
            increments = simulate_increments(scenario.scenario_var, cfg, rng)
        else:
            increments = rng.standard_normal(cfg.n) * np.sqrt(scenario.per_step_var * cfg.dt)
    increments = np.asarray(increments, dtype=float)
    if increments.shape != (cfg.n,):
        raise UsageError(f"expected {cfg.n} increments, got shape {increments.shape}")

    values = np.empty(cfg.n + 1)
    values[0] = x = float(x0)
    var = scenario.per_step_var
    for i in range(cfg.n):
        x = euler_step(model, x, var[i], cfg.dt, increments[i])
        if not abs(x) <= DIVERGENCE_BOUND:
            raise SimulationDiverged(i + 1, x)
        values[i + 1] = x
    return SamplePath(cfg.times(), values, increments, scenario)


def simulate_batch(model, scenario, cfg, rngs, on_chunk=None, chunk=4096):
    """Simulate ``len(rngs)`` independent paths under one constant scenario.

    Each path consumes its own generator exactly as :func:`simulate_path`
    would, so path ``j`` here equals ``simulate_path(..., rngs[j])``.  Paths are
    advanced in time chunks; ``on_chunk(x_prev, x_next)`` receives arrays of
    shape ``(len(rngs), L)`` holding ``X_{i-1}`` and ``X_i`` for each chunk.
    Returns the terminal states.
    """
    var = scenario.scenario_var
    if not np.all(scenario.per_step_var == var):
        raise UsageError("simulate_batch requires a constant scenario")
    x = np.array([_initial_value(model, scenario, r) for r in rngs])
    scale = math.sqrt(var * cfg.dt)
    done = 0
    while done < cfg.n:
        L = min(chunk, cfg.n - done)
        dB = np.stack([r.standard_normal(L) for r in rngs]) * scale
        xs = np.empty((len(rngs), L + 1))
        xs[:, 0] = x
        for i in range(L):
            x = euler_step(model, x, var, cfg.dt, dB[:, i])
            xs[:, i + 1] = x
        bad = ~(np.abs(xs[:, 1:]) <= DIVERGENCE_BOUND)
        if bad.any():
            j, i = np.argwhere(bad)[0]
            raise SimulationDiverged(done + i + 1, xs[j, i + 1], {"path": int(j)})
        if on_chunk is not None:
            on_chunk(xs[:, :-1], xs[:, 1:])
        done += L
    return x


@dataclass
class AssumptionReport:
    lipschitz_a: float
    lipschitz_b: float
    growth_a: float
    growth_b: float
    theta_lipschitz: float
    bound: float
    growth_trend: float
    flagged: bool
    messages: list


def _pairwise_quotient(x, fx):
    x = np.asarray(x, dtype=float)
    fx = np.asarray(fx, dtype=float)
    dx = np.abs(x[:, None] - x[None, :])
    df = np.abs(fx[:, None] - fx[None, :])
    mask = dx > 0
    return float(np.max(df[mask] / dx[mask])) if mask.any() else 0.0


def validate_assumptions(model, probe_points, bound=10.0, trend_factor=2.0):
    """Probe Lipschitz and linear-growth conditions on a grid of ``(theta, x)``.

    Advisory only: reports maximal Lipschitz quotients of ``a`` (in ``x``, per
    theta), of ``b``, and of ``a`` in ``theta``; maximal growth ratios
    ``f^2 / (1 + x^2)``; and ``growth_trend``, the ratio of the largest growth
    ratio over the outer half of ``|x|`` to the one over the inner half.  The
    model is flagged when any quantity exceeds ``bound`` or the trend exceeds
    ``trend_factor`` (growth ratio still increasing, i.e. superlinear drift).
    """
    pts = np.asarray(list(probe_points), dtype=float)
    if pts.size == 0:
        raise UsageError("empty probe grid")
    thetas, xs = pts[:, 0], pts[:, 1]
    lip_a = 0.0
    growth = np.empty(len(pts))
    for th in np.unique(thetas):
        sel = thetas == th
        fa = np.asarray(model.a(th, xs[sel]), dtype=float) * np.ones(sel.sum())
        lip_a = max(lip_a, _pairwise_quotient(xs[sel], fa))
        growth[sel] = fa**2 / (1.0 + xs[sel] ** 2)
    ux = np.unique(xs)
    fb = np.asarray(model.b(ux), dtype=float) * np.ones(len(ux))
    lip_b = _pairwise_quotient(ux, fb)
    growth_b = float(np.max(fb**2 / (1.0 + ux**2)))

    lip_theta = 0.0
    for x in ux:
        sel = xs == x
        if sel.sum() > 1:
            fa = np.array([model.a(th, x) for th in thetas[sel]], dtype=float)
            lip_theta = max(lip_theta, _pairwise_quotient(thetas[sel], fa))

    ax = np.abs(xs)
    half = ax.max() / 2
    inner, outer = growth[ax <= half], growth[ax > half]
    if inner.size and outer.size and inner.max() > 0:
        trend = float(outer.max() / inner.max())
    else:
        trend = 1.0

    msgs = []
    for label, val in [("Lipschitz(a)", lip_a), ("Lipschitz(b)", lip_b),
                       ("growth(a)", float(growth.max())), ("growth(b)", growth_b)]:
        if val > bound:
            msgs.append(f"{label} = {val:.4g} exceeds bound {bound}")
    if trend > trend_factor:
        msgs.append(f"growth ratio of a still increasing with |x| (trend {trend:.3g}); linear growth likely violated")
    return AssumptionReport(
        lipschitz_a=lip_a, lipschitz_b=lip_b, growth_a=float(growth.max()), growth_b=growth_b,
        theta_lipschitz=lip_theta, bound=bound, growth_trend=trend, flagged=bool(msgs), messages=msgs,
    )


PATH_CSV_HEADER = ["k", "j", "i", "t_i", "x_i", "dB_i", "sigma2_i"]


def write_paths_csv(fh, paths):
    """Write ``((k, j), SamplePath)`` pairs, one row per grid point.

    Row ``i = 0`` carries the initial value with empty ``dB_i``/``sigma2_i``;
    row ``i >= 1`` carries the increment and variance of step ``i``.  Floats are
    written with ``repr`` so they round-trip exactly.
    """
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(PATH_CSV_HEADER)
    for (k, j), p in paths:
        w.writerow([k, j, 0, repr(float(p.times[0])), repr(float(p.values[0])), "", ""])
        for i in range(1, p.n + 1):
            w.writerow([k, j, i, repr(float(p.times[i])), repr(float(p.values[i])),
                        repr(float(p.increments_B[i - 1])), repr(float(p.scenario.per_step_var[i - 1]))])


def read_paths_csv(fh):
    """Inverse of :func:`write_paths_csv`; returns ``{(k, j): SamplePath}``."""
    rows = list(csv.DictReader(fh))
    out = {}
    for (k, j), grp in itertools.groupby(rows, key=lambda r: (int(r["k"]), int(r["j"]))):
        grp = sorted(grp, key=lambda r: int(r["i"]))
        t = np.array([float(r["t_i"]) for r in grp])
        x = np.array([float(r["x_i"]) for r in grp])
        dB = np.array([float(r["dB_i"]) for r in grp[1:]])
        v = np.array([float(r["sigma2_i"]) for r in grp[1:]])
        out[(k, j)] = SamplePath(t, x, dB, ScenarioPath(float(v[0]), v))
    return out
