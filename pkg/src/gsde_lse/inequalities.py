"""Monte Carlo checks of the probabilistic inequalities behind the estimator.

Upper expectations and capacities are approximated by the maximum over a
constant-volatility scenario grid of the per-scenario empirical quantity.  This
is a lower bound on the true supremum over adapted volatility processes, so a
check that passes here is necessary but not sufficient.
"""

from dataclasses import asdict, dataclass, field
import json
import math

import numpy as np

from .errors import DomainError, EstimationError, UsageError
from .simulate import euler_step, scenario_paths
from .streams import (TAG_BDG, TAG_ERGODIC, TAG_ERGODIC_ORACLE, TAG_EXP_MARTINGALE,
                      TAG_INCREMENTS, substream)
from .sublinear import build_scenario_grid


@dataclass
class InequalityReport:
    name: str
    trials: int
    statistic: float  # violation rate, moment ratio or fitted exponent
    bound: float
    passed: bool
    kind: str = "upper"  # statistic <= bound ("upper") or >= bound ("lower")
    slack: float = 0.0  # allowance added to the bound before comparing
    details: dict = field(default_factory=dict)

    def recompute_passed(self):
        if self.kind == "upper":
            return bool(self.statistic <= self.bound + self.slack)
        if self.kind == "lower":
            return bool(self.statistic >= self.bound - self.slack)
        if self.kind == "band":
            return bool(abs(self.statistic) <= self.bound + self.slack)
        raise ValueError(self.kind)

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, default=float)

    def summary(self):
        flag = "PASS" if self.passed else "FAIL"
        rel = {"upper": "<=", "lower": ">=", "band": "|.|<="}[self.kind]
        sign = "-" if self.kind == "lower" else "+"
        extra = f" {sign} {self.slack:.3g}" if self.slack else ""
        return f"[{flag}] {self.name}: {self.statistic:.5g} {rel} {self.bound:.5g}{extra} ({self.trials} trials)"


def _report(name, trials, statistic, bound, kind="upper", slack=0.0, **details):
    rep = InequalityReport(name, trials, float(statistic), float(bound), False, kind, float(slack), details)
    rep.passed = rep.recompute_passed()
    return rep


def drifted_bm_sup_probability(var, alpha, beta, T):
    """``P(sup_{t<=T} [sigma W_t - alpha t / 2] > beta)`` by the reflection principle.

    Closed form for ``g == 1``; used as an independent oracle.
    """
    from statistics import NormalDist

    Phi = NormalDist().cdf
    s = math.sqrt(var)
    mu = -alpha / (2.0 * s)  # drift of W after dividing by sigma
    a = beta / s
    rt = math.sqrt(T)
    return Phi((-a + mu * T) / rt) + math.exp(2.0 * mu * a) * Phi((-a - mu * T) / rt)


def verify_exp_martingale(iv, g, T, alpha, beta, trials, seed=0, m=5, steps=1000, chunk=5_000):
    """Empirical capacity of ``{sup_t [int_0^t g dB - alpha/2 int_0^t g^2 ds] > beta}``.

    ``g`` is a deterministic integrand ``g(t)`` (vectorised over ``t``).  For
    each variance on an ``m``-point grid the supremum is taken over a grid of
    ``steps`` points on ``[0, T]``.  Passes iff the largest empirical rate is at
    most ``exp(-alpha beta / upper_var)`` plus three binomial standard errors.
    """
    if trials < 1:
        raise UsageError("trials must be positive")
    if not (alpha > 0 and beta > 0 and T > 0):
        raise DomainError("alpha, beta and T must be positive")
    dt = T / steps
    t_left = np.arange(steps) * dt
    gv = np.asarray(g(t_left), dtype=float) * np.ones(steps)
    if not np.all(np.isfinite(gv)):
        raise DomainError("integrand must be finite on [0, T]")
    comp = np.cumsum(0.5 * alpha * gv * gv * dt)

    grid = build_scenario_grid(iv, m) if not iv.degenerate else [iv.upper_var]
    rates = []
    for k, var in enumerate(grid):
        rng = substream(seed, TAG_EXP_MARTINGALE, k)
        hits = 0
        for start in range(0, trials, chunk):
            L = min(chunk, trials - start)
            dB = rng.standard_normal((L, steps)) * math.sqrt(var * dt)
            mart = np.cumsum(gv * dB, axis=1) - comp
            hits += int(np.count_nonzero(mart.max(axis=1) > beta))
        rates.append(hits / trials)
    worst = max(rates)
    bound = math.exp(-alpha * beta / iv.upper_var)
    se = math.sqrt(max(bound * (1.0 - bound), 0.0) / trials)
    return _report(
        "exponential martingale inequality", trials, worst, bound, slack=3.0 * se,
        scenario_vars=list(map(float, grid)), rates=rates, alpha=alpha, beta=beta, T=T, steps=steps,
    )


def bdg_constant(p):
    """Upper BDG constant ``(p^(p+1) / (2 (p-1)^(p-1)))^(p/2)`` for ``p >= 2``.

    ``E sup|int z dW|^p <= c_p E(int z^2 dt)^(p/2)``; ``c_2 = 4`` (Doob).
    """
    if p < 2:
        raise DomainError("BDG constant needs p >= 2")
    return (p ** (p + 1) / (2.0 * (p - 1) ** (p - 1))) ** (p / 2.0)


def verify_bdg_moment(model, p, interval, trials, seed=0, m=5, steps=1000, zeta=1.0, chunk=5_000):
    """Upper expectation of ``sup_{s<=u<=t} |int_s^u zeta dB|^p`` against the BDG bound.

    With constant ``zeta`` the bound is ``c_p upper_var^(p/2) |zeta|^p (t-s)^(p/2)``.
    The reported statistic is the ratio moment / bound; passes iff it is at
    most one.
    """
    if p < 2:
        raise DomainError(f"p must be >= 2, got {p}")
    s, t = interval
    if not s < t:
        raise UsageError("interval must satisfy s < t")
    if trials < 1:
        raise UsageError("trials must be positive")
    h = t - s
    dt = h / steps
    grid = build_scenario_grid(model.var_interval, m) if not model.var_interval.degenerate \
        else [model.var_interval.upper_var]
    moments = []
    for k, var in enumerate(grid):
        rng = substream(seed, TAG_BDG, k)
        tot = 0.0
        for start in range(0, trials, chunk):
            L = min(chunk, trials - start)
            dB = rng.standard_normal((L, steps)) * math.sqrt(var * dt)
            sup = np.abs(np.cumsum(zeta * dB, axis=1)).max(axis=1)
            tot += float(np.sum(sup**p))
        moments.append(tot / trials)
    upper = max(moments)
    C2 = bdg_constant(p) * model.var_interval.upper_var ** (p / 2.0)
    rhs = C2 * abs(zeta) ** p * h ** (p / 2.0)
    ratio = upper / rhs if rhs > 0 else 0.0
    return _report(
        f"BDG moment bound (p={p})", trials, ratio, 1.0,
        upper_moment=upper, moments=moments, scenario_vars=list(map(float, grid)),
        C2=C2, interval=[s, t], advisory=p > 2,
    )


def fit_loglog_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    return float(coef[0])


def verify_increment_moments(model, q, gaps, trials, seed=0, m=5, fine_dt=1e-3, slack=0.15):
    """Scaling of ``E^[|X(t) - X(s)|^(2q)]`` with ``|t - s|``.

    Each trial simulates ``X`` from the initial law with Euler steps of
    ``fine_dt`` up to the largest ``t``; the upper expectation per gap is the
    max over the scenario grid.  The log-log slope over the positive gaps must
    be at least ``q - slack``.
    """
    if q < 1:
        raise DomainError("q must be >= 1")
    gaps = [(float(s), float(t)) for s, t in gaps]
    if any(abs(t - s) >= 1 for s, t in gaps):
        raise DomainError("gaps must be shorter than one time unit")
    if any(min(s, t) < 0 for s, t in gaps):
        raise DomainError("gap endpoints must be non-negative")
    sizes = sorted({round(abs(t - s), 12) for s, t in gaps if t != s})
    if len(sizes) < 3:
        raise UsageError("need at least three distinct positive gap sizes")
    if trials < 1:
        raise UsageError("trials must be positive")

    idx = [(int(round(min(s, t) / fine_dt)), int(round(max(s, t) / fine_dt))) for s, t in gaps]
    for (s, t), (i0, i1) in zip(gaps, idx):
        if abs(i1 - i0 - abs(t - s) / fine_dt) > 1e-6:
            raise UsageError(f"gap ({s}, {t}) is not a multiple of fine_dt={fine_dt}")
    nsteps = max(i1 for _, i1 in idx)

    scen = scenario_paths(model, m, nsteps)
    per_gap = np.zeros((len(scen), len(gaps)))
    for k, sc in enumerate(scen):
        rng = substream(seed, TAG_INCREMENTS, k)
        x = rng.standard_normal(trials) * math.sqrt(sc.init_var)
        dB = rng.standard_normal((nsteps, trials)) * math.sqrt(sc.scenario_var * fine_dt)
        path = np.empty((nsteps + 1, trials))
        path[0] = x
        for i in range(nsteps):
            x = euler_step(model, x, sc.scenario_var, fine_dt, dB[i])
            path[i + 1] = x
        for g, (i0, i1) in enumerate(idx):
            per_gap[k, g] = float(np.mean(np.abs(path[i1] - path[i0]) ** (2 * q)))
    upper = per_gap.max(axis=0)
    h = np.array([abs(t - s) for s, t in gaps])
    pos = h > 0
    slope = fit_loglog_slope(h[pos], upper[pos])
    return _report(
        f"increment moment scaling (q={q})", trials, slope, float(q), kind="lower", slack=slack,
        gaps=gaps, upper_moments=upper.tolist(), per_scenario=per_gap.tolist(),
        scenario_vars=[sc.scenario_var for sc in scen],
    )


def verify_ergodic_envelope(model, cfg, statistic, seed=None, tolerance=0.03,
                            oracle_paths=2000, burn_in=20.0, chunk=20_000):
    """Time averages of ``statistic(X)`` against the stationary-mean envelope.

    For each of the ``cfg.m`` scenarios one path of horizon ``cfg.T`` is
    simulated and ``T^-1 sum statistic(X_{i-1}) dt`` computed.  The stationary
    mean of each scenario is estimated independently as an ensemble average
    over ``oracle_paths`` paths run for ``burn_in`` time units.  Passes iff every
    time average lies in ``[min, max]`` of the stationary means widened by
    ``tolerance``.
    """
    seed = cfg.seed if seed is None else seed
    scen = scenario_paths(model, cfg.m, cfg.n)

    def stat(x):
        v = np.asarray(statistic(x), dtype=float) * np.ones_like(x)
        if not np.all(np.isfinite(v)):
            raise EstimationError("statistic is not finite along the path")
        return v

    # All scenarios advance together, one column each.
    vars_ = np.array([s.scenario_var for s in scen])
    rngs = [substream(seed, TAG_ERGODIC, k) for k in range(len(scen))]
    x = np.array([r.standard_normal() * math.sqrt(s.init_var) for r, s in zip(rngs, scen)])
    acc = np.zeros(len(scen))
    done = 0
    while done < cfg.n:
        L = min(chunk, cfg.n - done)
        dB = np.stack([r.standard_normal(L) for r in rngs], axis=1) * np.sqrt(vars_ * cfg.dt)
        for i in range(L):
            acc += stat(x) * cfg.dt
            x = euler_step(model, x, vars_, cfg.dt, dB[i])
        if not np.all(np.isfinite(x)):
            raise EstimationError("path diverged in ergodic check")
        done += L
    time_avg = acc / cfg.T

    n_burn = max(int(round(burn_in / cfg.dt)), 1)
    stationary = []
    for k, s in enumerate(scen):
        rng = substream(seed, TAG_ERGODIC_ORACLE, k)
        y = rng.standard_normal(oracle_paths) * math.sqrt(s.init_var)
        for _ in range(n_burn):
            y = euler_step(model, y, s.scenario_var, cfg.dt,
                           rng.standard_normal(oracle_paths) * math.sqrt(s.scenario_var * cfg.dt))
        stationary.append(float(np.mean(stat(y))))
    lo, hi = min(stationary), max(stationary)
    # distance outside [lo, hi]; zero when inside
    excess = np.maximum(np.maximum(lo - time_avg, time_avg - hi), 0.0)
    return _report(
        "ergodic envelope", int(cfg.m), float(excess.max()), 0.0, kind="band", slack=tolerance,
        time_averages=time_avg.tolist(), stationary_means=stationary,
        scenario_vars=vars_.tolist(), T=cfg.T, dt=cfg.dt,
    )


def dump_reports(reports, fh):
    json.dump([json.loads(r.to_json()) for r in reports], fh, indent=2, sort_keys=True)
    fh.write("\n")
