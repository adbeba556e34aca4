"""Variance intervals, scenario grids, G-normal sampling and envelopes.

A one-dimensional G-Brownian motion is characterised by the interval
``[lower_var, upper_var]`` its quadratic-variation rate may take.  Fixing one
variance from that interval selects a single classical probability measure (a
*scenario*); sublinear (upper) and lower expectations are then approximated by
the max and min of per-scenario Monte Carlo means.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ConfigError, UsageError


@dataclass(frozen=True)
class VarianceInterval:
    lower_var: float
    upper_var: float

    def __post_init__(self):
        lo, hi = self.lower_var, self.upper_var
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ConfigError(f"variance bounds must be finite, got [{lo}, {hi}]")
        if not 0.0 < lo <= hi:
            raise ConfigError(f"need 0 < lower_var <= upper_var, got [{lo}, {hi}]")

    @property
    def lower_sd(self):
        return math.sqrt(self.lower_var)

    @property
    def upper_sd(self):
        return math.sqrt(self.upper_var)

    @property
    def degenerate(self):
        return self.lower_var == self.upper_var

    def __contains__(self, var):
        return self.lower_var <= var <= self.upper_var

    def scaled(self, factor):
        return VarianceInterval(self.lower_var * factor, self.upper_var * factor)


@dataclass(frozen=True)
class ScenarioGrid:
    """Variances ``points[0] < ... < points[m-1]`` with equally spaced square roots."""

    points: tuple
    interval: VarianceInterval

    @property
    def m(self):
        return len(self.points)

    @property
    def sds(self):
        return tuple(math.sqrt(v) for v in self.points)

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def __getitem__(self, k):
        return self.points[k]


@dataclass(frozen=True)
class GNormalSpec:
    var_interval: VarianceInterval
    mean: float = 0.0

    def __post_init__(self):
        if self.mean != 0.0:
            raise ConfigError("only centred G-normal laws are supported")


@dataclass(frozen=True)
class EnvelopeEstimate:
    lower: float
    upper: float
    per_scenario_means: tuple = field(default=())

    @property
    def gap(self):
        return self.upper - self.lower

    @property
    def argmin(self):
        return int(np.argmin(self.per_scenario_means))

    @property
    def argmax(self):
        return int(np.argmax(self.per_scenario_means))


def g_function(alpha, iv):
    """Generator ``G(alpha) = (upper_var * alpha^+ - lower_var * alpha^-) / 2``."""
    return 0.5 * (iv.upper_var * max(alpha, 0.0) - iv.lower_var * max(-alpha, 0.0))


def build_scenario_grid(iv, m):
    """Return ``m`` variances whose standard deviations are equally spaced.

    The endpoints are the interval's bounds bit for bit; interior points are
    squares of ``linspace(lower_sd, upper_sd, m)``.
    """
    if int(m) != m or m < 2:
        raise ConfigError(f"scenario grid needs m >= 2, got {m}")
    m = int(m)
    sds = np.linspace(iv.lower_sd, iv.upper_sd, m)
    pts = [float(s) ** 2 for s in sds]
    pts[0] = iv.lower_var
    pts[-1] = iv.upper_var
    # Squaring sqrt(v) can land a ulp outside the interval.
    pts = [min(max(p, iv.lower_var), iv.upper_var) for p in pts]
    return ScenarioGrid(tuple(pts), iv)


def sample_g_normal(spec, scenario_var, rng, size=None):
    """Draw from the G-normal law under the scenario ``Normal(0, scenario_var)``.

    ``scenario_var`` must lie in ``spec.var_interval``.  With ``size=None`` a
    float is returned, otherwise an array.
    """
    if scenario_var not in spec.var_interval:
        raise ConfigError(
            f"scenario variance {scenario_var} outside "
            f"[{spec.var_interval.lower_var}, {spec.var_interval.upper_var}]"
        )
    z = rng.standard_normal(size)
    return z * math.sqrt(scenario_var) if size is not None else float(z) * math.sqrt(scenario_var)


def envelope_over_scenarios(per_scenario_means):
    means = tuple(float(v) for v in per_scenario_means)
    if not means:
        raise UsageError("envelope of an empty sequence")
    return EnvelopeEstimate(lower=min(means), upper=max(means), per_scenario_means=means)
