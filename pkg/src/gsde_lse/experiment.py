"""Scenario-grid Monte Carlo experiments.

For every scenario ``k`` on an ``m``-point volatility grid, ``J`` replicate paths
are simulated and the drift parameter is estimated on each.  The round means of
``|theta_hat|`` are folded into an envelope (min, max) per schedule entry.

Path ``(k, j)`` of the experiment with ``n`` steps and ``J`` replicates draws
from its own counter-based substream, so results do not depend on the number
of worker threads or on the order tasks finish.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
import ast
import logging
import math

import numpy as np

from .errors import ConfigError, SimulationDiverged
from .estimators import EstimateRecord, argmin_lse, round_mean_abs
from .simulate import GridConfig, ModelSpec, ou_model, scenario_paths, simulate_batch, simulate_path
from .streams import path_stream
from .sublinear import GNormalSpec, VarianceInterval, envelope_over_scenarios

log = logging.getLogger(__name__)

DEFAULT_SEED = 2024
TABLE1_N = (10_000, 20_000, 30_000, 40_000, 50_000)
TABLE2_J = (8, 16, 32, 64, 128)
BATCH = 512


@dataclass
class ExperimentConfig:
    model: str = "ou"
    theta0: float = 1.0
    theta_min: float = 0.1
    theta_max: float = 5.0
    sigma2_lo: float = 0.5
    sigma2_hi: float = 1.0
    init_lo: float = None  # default 0.4 / theta0
    init_hi: float = None  # default 0.6 / theta0
    drift: str = None  # expression in theta and x, for model = "expr"
    qv_drift: str = None  # expression in x, for model = "expr"
    dt: float = 0.01
    T: float = None  # table2 horizon; n = T / dt
    n_values: tuple = TABLE1_N
    J_values: tuple = TABLE2_J
    m: int = 10
    J: int = 512
    seed: int = DEFAULT_SEED
    threads: int = 1
    estimator: str = "auto"  # auto | closed_form | argmin
    tol: float = 1e-8
    time_scaling: str = "linear"  # linear: T = n dt; sqrt: T = dt * sqrt(n)

    def __post_init__(self):
        self.n_values = tuple(int(v) for v in self.n_values)
        self.J_values = tuple(int(v) for v in self.J_values)
        if self.estimator not in ("auto", "closed_form", "argmin"):
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if self.time_scaling not in ("linear", "sqrt"):
            raise ConfigError(f"unknown time scaling {self.time_scaling!r}")
        if self.model not in ("ou", "expr"):
            raise ConfigError(f"unknown model {self.model!r}")
        if int(self.threads) != self.threads or self.threads < 1:
            raise ConfigError("threads must be a positive integer")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if any(v < 1 for v in self.n_values + self.J_values):
            raise ConfigError("schedule entries must be positive")

    @classmethod
    def from_mapping(cls, data):
        known = {f.name for f in fields(cls)}
        flat = {}
        for key, val in data.items():
            if isinstance(val, dict):  # [model] / [experiment] sections
                flat.update(val)
            else:
                flat[key] = val
        unknown = set(flat) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**flat)

    def build_model(self):
        iv = VarianceInterval(self.sigma2_lo, self.sigma2_hi)
        init = VarianceInterval(
            self.init_lo if self.init_lo is not None else 0.4 / self.theta0,
            self.init_hi if self.init_hi is not None else 0.6 / self.theta0,
        )
        theta_set = (self.theta_min, self.theta_max)
        if self.model == "ou":
            return ou_model(self.theta0, iv, init, theta_set)
        if not self.drift:
            raise ConfigError("model 'expr' needs a drift expression")
        return ModelSpec(
            drift=compile_expression(self.drift, ("theta", "x")),
            qv_drift=compile_expression(self.qv_drift, ("x",)) if self.qv_drift else None,
            true_theta=self.theta0,
            theta_set=theta_set,
            var_interval=iv,
            initial_law=GNormalSpec(init),
            name="expr",
        )

    def grid(self, n, J):
        dt = self.dt if self.time_scaling == "linear" else self.dt / math.sqrt(n)
        return GridConfig(n=n, dt=dt, m=self.m, J=J, seed=self.seed)


_EXPR_FUNCS = {
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "sin": np.sin, "cos": np.cos,
    "tanh": np.tanh, "abs": np.abs, "arctan": np.arctan, "pi": math.pi,
}
_EXPR_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd,
)


def compile_expression(src, argnames):
    """Compile an arithmetic expression such as ``-theta * x + 0.1 * sin(x)``.

    Only arithmetic, the listed argument names and a few numpy functions are
    accepted.
    """
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {src!r}: {exc}") from None
    for node in ast.walk(tree):
        if not isinstance(node, _EXPR_NODES):
            raise ConfigError(f"disallowed syntax {type(node).__name__} in {src!r}")
        if isinstance(node, ast.Name) and node.id not in argnames and node.id not in _EXPR_FUNCS:
            raise ConfigError(f"unknown name {node.id!r} in {src!r}")
        if isinstance(node, ast.Call) and not isinstance(node.func, ast.Name):
            raise ConfigError(f"only plain function calls allowed in {src!r}")
    code = compile(tree, "<expr>", "eval")

    def fn(*args):
        env = dict(_EXPR_FUNCS)
        env.update(zip(argnames, args))
        out = eval(code, {"__builtins__": {}}, env)
        return out + np.zeros_like(np.asarray(args[-1], dtype=float))

    fn.source = src
    return fn


@dataclass
class EnvelopeRow:
    n: int
    T: float
    m: int
    J: int
    seed: int
    lower: float
    upper: float
    per_scenario_means: tuple
    per_scenario_se: tuple
    records: list = field(default=None, repr=False)

    @property
    def gap(self):
        return self.upper - self.lower

    @property
    def se_gap(self):
        """Standard error of ``gap`` from the two extreme rounds' standard errors."""
        lo = self.per_scenario_se[int(np.argmin(self.per_scenario_means))]
        hi = self.per_scenario_se[int(np.argmax(self.per_scenario_means))]
        return math.hypot(lo, hi)


def _closed_form_round(model, scenario, grid, k):
    thetas = np.empty(grid.J)
    for start in range(0, grid.J, BATCH):
        js = range(start, min(start + BATCH, grid.J))
        rngs = [path_stream(grid.seed, grid.n, grid.J, k, j) for j in js]
        num = np.zeros(len(rngs))
        den = np.zeros(len(rngs))

        def acc(xp, xn):
            num[:] += np.sum(xp * (xn - xp), axis=1)
            den[:] += np.sum(xp * xp * grid.dt, axis=1)

        try:
            simulate_batch(model, scenario, grid, rngs, on_chunk=acc)
        except SimulationDiverged as exc:
            j = start + exc.context.get("path", 0)
            raise SimulationDiverged(exc.step, exc.value, {"n": grid.n, "k": k, "j": j}) from None
        thetas[start:start + len(rngs)] = -num / den
    return [EstimateRecord(k, j, float(t)) for j, t in enumerate(thetas)]


def _argmin_round(model, scenario, grid, k, tol):
    out = []
    for j in range(grid.J):
        rng = path_stream(grid.seed, grid.n, grid.J, k, j)
        try:
            path = simulate_path(model, scenario, grid, rng)
        except SimulationDiverged as exc:
            raise SimulationDiverged(exc.step, exc.value, {"n": grid.n, "k": k, "j": j}) from None
        out.append(EstimateRecord(k, j, argmin_lse(model, path, tol)))
    return out


def run_point(model, grid, estimator="auto", threads=1, tol=1e-8, keep_records=False):
    """Envelope of round means of ``|theta_hat|`` for one ``(n, J)`` setting."""
    if estimator == "auto":
        estimator = "closed_form" if model.is_ou else "argmin"
    if estimator == "closed_form" and not model.is_ou:
        raise ConfigError("closed-form estimator applies to the OU model only")
    scenarios = scenario_paths(model, grid.m, grid.n)

    def task(k):
        if estimator == "closed_form":
            return _closed_form_round(model, scenarios[k], grid, k)
        return _argmin_round(model, scenarios[k], grid, k, tol)

    log.info("n=%d J=%d m=%d dt=%g estimator=%s", grid.n, grid.J, grid.m, grid.dt, estimator)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rounds = list(pool.map(task, range(grid.m)))
    else:
        rounds = [task(k) for k in range(grid.m)]

    means = [round_mean_abs(r) for r in rounds]
    ses = []
    for r in rounds:
        a = np.abs([rec.theta_hat for rec in r])
        ses.append(float(np.std(a, ddof=1) / math.sqrt(len(a))) if len(a) > 1 else 0.0)
    env = envelope_over_scenarios(means)
    return EnvelopeRow(
        n=grid.n, T=grid.T, m=grid.m, J=grid.J, seed=grid.seed,
        lower=env.lower, upper=env.upper,
        per_scenario_means=env.per_scenario_means, per_scenario_se=tuple(ses),
        records=[rec for r in rounds for rec in r] if keep_records else None,
    )


def run_table1(cfg, keep_records=False):
    """Envelope rows over the ``n`` schedule with ``J`` fixed."""
    if not cfg.n_values:
        raise ConfigError("empty n schedule")
    model = cfg.build_model()
    return [run_point(model, cfg.grid(n, cfg.J), cfg.estimator, cfg.threads, cfg.tol, keep_records)
            for n in cfg.n_values]


def run_table2(cfg, keep_records=False):
    """Envelope rows over the ``J`` schedule at fixed horizon (default ``T = 50``)."""
    if not cfg.J_values:
        raise ConfigError("empty J schedule")
    T = 50.0 if cfg.T is None else cfg.T
    n = int(round(T / cfg.dt))
    if n < 1 or not math.isclose(n * cfg.dt, T, rel_tol=1e-9):
        raise ConfigError(f"T={T} is not a whole number of steps dt={cfg.dt}")
    model = cfg.build_model()
    return [run_point(model, cfg.grid(n, J), cfg.estimator, cfg.threads, cfg.tol, keep_records)
            for J in cfg.J_values]


def run_custom(cfg, keep_records=True):
    """Same pipeline as :func:`run_table1` with the numerical argmin estimator."""
    return run_table1(replace(cfg, estimator="argmin"), keep_records)


def format_table(rows, key="n"):
    head = f"{key:>8} {'T':>9} {'upper':>9} {'lower':>9} {'gap':>9}"
    lines = [head]
    for r in rows:
        lines.append(f"{getattr(r, key):>8} {r.T:>9.4g} {r.upper:>9.4f} {r.lower:>9.4f} {r.gap:>9.4f}")
    return "\n".join(lines)
