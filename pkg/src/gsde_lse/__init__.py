"""Least-squares drift estimation for SDEs driven by G-Brownian motion."""

from .errors import (ConfigError, DegeneratePathError, DomainError, EstimationError, GsdeError,
                     SimulationDiverged, UsageError)
from .estimators import (EstimateRecord, argmin_lse, objective, ou_closed_form, q_function,
                         round_mean_abs)
from .experiment import ExperimentConfig, run_custom, run_point, run_table1, run_table2
from .inequalities import (InequalityReport, verify_bdg_moment, verify_ergodic_envelope,
                           verify_exp_martingale, verify_increment_moments)
from .simulate import (GridConfig, ModelSpec, SamplePath, ScenarioPath, ou_model, simulate_increments,
                       simulate_path, validate_assumptions)
from .sublinear import (EnvelopeEstimate, GNormalSpec, ScenarioGrid, VarianceInterval,
                        build_scenario_grid, envelope_over_scenarios, g_function, sample_g_normal)

__version__ = "0.1.0"
