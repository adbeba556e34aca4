"""Least-squares drift estimation from discrete observations.

``objective`` is the weighted residual sum

    S(theta) = sum_i |dX_i - a(theta, X_{i-1}) dt - b(X_{i-1}) s2_{i-1} dt|^2 / (s2_{i-1} dt),

``argmin_lse`` minimises it over the parameter interval and ``ou_closed_form``
is the explicit minimiser for the Ornstein-Uhlenbeck drift ``a = -theta x``.
"""

from dataclasses import dataclass
import csv
import math

import numpy as np

from .errors import DegeneratePathError, DomainError, EstimationError, UsageError

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SCAN_POINTS = 64


@dataclass(frozen=True)
class EstimateRecord:
    k: int
    j: int
    theta_hat: float

    def __post_init__(self):
        if not math.isfinite(self.theta_hat):
            raise EstimationError(f"non-finite estimate for round k={self.k}, replicate j={self.j}")


@dataclass(frozen=True)
class LseObjectiveValue:
    theta: float
    value: float


def _check_path(path):
    dts = np.diff(path.times)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=0.0):
        raise UsageError("observation times must be uniformly spaced")
    if not dts[0] > 0:
        raise UsageError("observation times must be increasing")
    return float(dts[0])


def _residuals(model, path, theta):
    dt = _check_path(path)
    x = path.values[:-1]
    s2 = path.scenario.per_step_var
    r = np.diff(path.values) - model.a(theta, x) * dt
    if model.qv_drift is not None:
        r = r - model.qv_drift(x) * s2 * dt
    return r, s2 * dt


def objective(model, path, theta, weight=None):
    """Least-squares error ``S(theta)`` of ``path`` under ``model``.

    With ``weight`` given, every squared residual is multiplied by that constant
    instead of ``1 / (sigma^2 dt)``; use it when the volatility behind external
    data is unknown.
    """
    lo, hi = model.theta_set
    if not lo <= theta <= hi:
        raise DomainError(f"theta={theta} outside parameter set [{lo}, {hi}]")
    r, scale = _residuals(model, path, theta)
    if weight is None:
        return float(np.sum(r * r / scale))
    if not weight > 0:
        raise DomainError("weight must be positive")
    return float(weight * np.sum(r * r))


def objective_value(model, path, theta, weight=None):
    return LseObjectiveValue(theta, objective(model, path, theta, weight))


def q_function(model, path, theta, weight=None):
    """``(S(theta) - S(theta0)) / T``; diagnostic only, uses the model's true theta."""
    s = objective(model, path, theta, weight)
    s0 = objective(model, path, model.true_theta, weight)
    return (s - s0) / path.T


def argmin_lse(model, path, tol=1e-8, weight=None):
    """Minimise ``S`` over ``model.theta_set``.

    A 64-point scan brackets the global minimum (ties go to the smaller theta),
    golden-section search narrows the bracket to ``tol`` and a final three-point
    parabolic step removes the floating-point plateau golden section cannot
    resolve.  The result is clamped to the parameter set.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    lo, hi = model.theta_set

    def f(th):
        v = objective(model, path, th, weight)
        if not math.isfinite(v):
            raise EstimationError(f"non-finite objective at theta={th}")
        return v

    grid = np.linspace(lo, hi, SCAN_POINTS)
    vals = [f(float(t)) for t in grid]
    i = int(np.argmin(vals))  # first minimiser, i.e. smallest theta on ties
    a = float(grid[max(i - 1, 0)])
    b = float(grid[min(i + 1, SCAN_POINTS - 1)])

    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    best = 0.5 * (a + b)
    return min(max(_parabolic_polish(f, best, lo, hi), lo), hi)


def _vertex_step(f, x, h):
    fm, f0, fp = f(x - h), f(x), f(x + h)
    curv = fp - 2.0 * f0 + fm
    if not curv > 0:
        return None
    return 0.5 * h * (fm - fp) / curv


def _parabolic_polish(f, x, lo, hi):
    # A three-point vertex is exact for quadratic objectives.  For a general
    # drift its bias is O(h^2); combining half-widths h and h/2 (Richardson)
    # cancels that term.
    h = 1e-3 * (hi - lo)
    if x - h < lo or x + h > hi:
        return x
    s1 = _vertex_step(f, x, h)
    s2 = _vertex_step(f, x, 0.5 * h)
    if s1 is None or s2 is None:
        return x
    step = (4.0 * s2 - s1) / 3.0
    # The vertex is only trusted inside the probing window.
    if abs(step) > 0.5 * h:
        return x
    return x + step


def ou_closed_form(path, weighted=True):
    """Explicit least-squares estimate for ``a(theta, x) = -theta x``, ``b = 0``.

    ``-sum X_{i-1} dX_i / s2_{i-1}  /  sum X_{i-1}^2 dt / s2_{i-1}``.  With
    ``weighted=False`` the variances are dropped, giving the per-round form used
    in the scenario experiment; both agree when the variance is constant.
    """
    dt = _check_path(path)
    x = path.values[:-1]
    dx = np.diff(path.values)
    w = 1.0 / path.scenario.per_step_var if weighted else 1.0
    den = float(np.sum(x * x * dt * w))
    if den == 0.0:
        raise DegeneratePathError("closed-form LSE undefined for an all-zero path")
    return -float(np.sum(x * dx * w)) / den


def round_mean_abs(records):
    """Mean of ``|theta_hat|`` over the replicates of one round."""
    records = list(records)
    if not records:
        raise UsageError("no estimates in round")
    ks = {r.k for r in records}
    if len(ks) != 1:
        raise UsageError(f"records span several rounds: {sorted(ks)}")
    return float(np.mean([abs(r.theta_hat) for r in records]))


ESTIMATES_HEADER = ["k", "j", "theta_hat"]
ENVELOPE_HEADER = ["n", "T", "m", "J", "seed", "lower", "upper", "gap"]


def write_estimates_csv(fh, records):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(ESTIMATES_HEADER)
    for r in records:
        w.writerow([r.k, r.j, repr(float(r.theta_hat))])


def write_envelope_csv(fh, rows):
    """``rows`` are objects with ``n, T, m, J, seed, lower, upper, gap`` attributes."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(ENVELOPE_HEADER)
    for r in rows:
        w.writerow([r.n, repr(float(r.T)), r.m, r.J, r.seed,
                    repr(float(r.lower)), repr(float(r.upper)), repr(float(r.gap))])


def read_estimates_csv(fh):
    return [EstimateRecord(int(r["k"]), int(r["j"]), float(r["theta_hat"])) for r in csv.DictReader(fh)]
