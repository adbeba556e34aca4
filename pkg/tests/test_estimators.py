import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_path
from gsde_lse.errors import DegeneratePathError, DomainError, EstimationError, UsageError
from gsde_lse.estimators import (EstimateRecord, argmin_lse, objective, ou_closed_form, q_function,
                                 read_estimates_csv, round_mean_abs, write_envelope_csv,
                                 write_estimates_csv)
from gsde_lse.experiment import EnvelopeRow
from gsde_lse.simulate import (GridConfig, ModelSpec, SamplePath, ScenarioPath, ou_model, simulate_path)
from gsde_lse.streams import substream
from gsde_lse.sublinear import GNormalSpec, VarianceInterval


def ou_path(seed, n=1000, dt=0.01, var=1.0, model=None):
    model = model or ou_model(1.0, VarianceInterval(0.5, 1.0))
    return simulate_path(model, ScenarioPath.constant(var, n, 0.5), GridConfig(n=n, dt=dt), substream(seed))


def test_objective_noiseless_zero(ou):
    p = simulate_path(ou, ScenarioPath.constant(1.0, 50), GridConfig(n=50, dt=0.1), None,
                      x0=1.0, increments=np.zeros(50))
    assert objective(ou, p, 1.0) == pytest.approx(0.0, abs=1e-28)


def test_objective_single_step(ou):
    assert objective(ou, make_path([1.0, 0.9], 0.1), 1.0) == pytest.approx(0.0, abs=1e-28)


def test_objective_hand_arithmetic(ou):
    # residuals 0 - (-0.5)(1)(0.1) = 0.05 and -0.1 + 0.05 = -0.05; each 0.0025 / 0.05
    p = make_path([1.0, 1.0, 0.9], 0.1, sigma2=0.5)
    assert objective(ou, p, 0.5) == pytest.approx(0.1, rel=1e-12)


def test_objective_domain_and_grid(ou):
    p = make_path([1.0, 1.0, 0.9], 0.1)
    with pytest.raises(DomainError):
        objective(ou, p, 6.0)
    bad = SamplePath(np.array([0.0, 0.1, 0.3]), p.values, p.increments_B, p.scenario)
    with pytest.raises(UsageError):
        objective(ou, bad, 1.0)


def test_objective_exactly_quadratic(ou):
    p = ou_path(1)
    th = np.array([0.5, 1.5, 3.0])
    coef = np.polyfit(th, [objective(ou, p, t) for t in th], 2)
    for t in np.linspace(0.1, 5.0, 17):
        f = objective(ou, p, t)
        assert abs(np.polyval(coef, t) - f) < 1e-10 * max(1.0, f)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), theta=st.floats(0.1, 5.0))
def test_objective_nonnegative_and_q_identity(seed, theta):
    model = ou_model(1.0, VarianceInterval(0.5, 1.0))
    p = ou_path(seed, n=200)
    s, s0 = objective(model, p, theta), objective(model, p, 1.0)
    assert s >= 0
    assert s - s0 == pytest.approx(p.T * q_function(model, p, theta), rel=1e-9, abs=1e-9 * s0)


def test_q_function_at_truth_and_noiseless(ou):
    p = ou_path(2)
    assert q_function(ou, p, 1.0) == 0.0
    clean = simulate_path(ou, ScenarioPath.constant(1.0, 100), GridConfig(n=100, dt=0.1), None,
                          x0=1.0, increments=np.zeros(100))
    for th in (0.3, 1.0, 2.0):
        phi2 = np.sum(((th - 1.0) * clean.values[:-1]) ** 2 * 0.1 / 1.0)
        assert q_function(ou, clean, th) == pytest.approx(phi2 / clean.T, rel=1e-9, abs=1e-15)
        assert q_function(ou, clean, th) >= 0


def test_q_function_shifted_theta(ou):
    p = ou_path(3, var=0.5)
    dt = p.dt
    v = p.scenario.per_step_var
    x = p.values[:-1]
    resid0 = np.diff(p.values) + 1.0 * x * dt
    # direct expansion of S(theta0 + 0.1) - S(theta0)
    direct = np.sum(((resid0 + 0.1 * x * dt) ** 2 - resid0**2) / (v * dt)) / p.T
    approx_term = np.sum((0.1 * x) ** 2 * dt / v) / p.T
    q = q_function(ou, p, 1.1)
    assert q == pytest.approx(direct, rel=1e-9)
    assert q == pytest.approx(approx_term, abs=0.05)


def test_argmin_noiseless(ou):
    p = simulate_path(ou, ScenarioPath.constant(1.0, 200), GridConfig(n=200, dt=0.05), None,
                      x0=2.0, increments=np.zeros(200))
    assert argmin_lse(ou, p, 1e-8) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_argmin_matches_closed_form(ou, seed):
    p = ou_path(10 + seed)
    cf = ou_closed_form(p)
    assert 0.1 <= cf <= 5.0
    assert abs(argmin_lse(ou, p, 1e-8) - cf) <= 1e-8


def test_argmin_weight_scaling_invariance(ou):
    p = ou_path(4, var=0.7)
    w = 1.0 / (0.7 * p.dt)
    base = argmin_lse(ou, p, weight=w)
    assert argmin_lse(ou, p, weight=4.0 * w) == base  # power-of-two scaling is exact in floating point
    assert argmin_lse(ou, p, weight=3.0 * w) == pytest.approx(base, abs=1e-10)
    assert argmin_lse(ou, p) == pytest.approx(base, abs=1e-10)


def test_argmin_clamps_to_parameter_set():
    model = ou_model(3.0, VarianceInterval(0.5, 1.0), theta_set=(2.0, 5.0))
    p = ou_path(5)
    assert ou_closed_form(p) < 2.0
    assert argmin_lse(model, p) == pytest.approx(2.0, abs=1e-8)


def test_argmin_nonlinear_drift():
    iv = VarianceInterval(1.0, 1.0)
    model = ModelSpec(drift=lambda th, x: -th * np.tanh(x), true_theta=1.0, theta_set=(0.1, 4.0),
                      var_interval=iv, initial_law=GNormalSpec(iv))
    p = simulate_path(model, ScenarioPath.constant(1.0, 2000, 1.0), GridConfig(n=2000, dt=0.01), substream(6))
    th = argmin_lse(model, p)
    # drift linear in theta: explicit weighted LS solution
    x, dx = p.values[:-1], np.diff(p.values)
    exact = -np.sum(np.tanh(x) * dx) / np.sum(np.tanh(x) ** 2 * p.dt)
    assert th == pytest.approx(exact, abs=1e-8)


def test_argmin_drift_nonlinear_in_theta():
    from scipy.optimize import brentq

    iv = VarianceInterval(1.0, 1.0)
    model = ModelSpec(drift=lambda th, x: -(th + th**3 / 10.0) * x, true_theta=1.0, theta_set=(0.1, 4.0),
                      var_interval=iv, initial_law=GNormalSpec(iv))
    p = simulate_path(model, ScenarioPath.constant(1.0, 3000, 1.0), GridConfig(n=3000, dt=0.01), substream(16))
    # the OU closed form estimates beta = theta + theta^3/10; invert the monotone map
    beta = ou_closed_form(p)
    exact = brentq(lambda t: t + t**3 / 10.0 - beta, 0.1, 4.0, xtol=1e-14)
    assert argmin_lse(model, p) == pytest.approx(exact, abs=1e-8)


def test_argmin_nonfinite_objective():
    iv = VarianceInterval(1.0, 1.0)
    model = ModelSpec(drift=lambda th, x: np.where(th > 1.0, np.inf, -th * x), true_theta=1.0,
                      theta_set=(0.1, 4.0), var_interval=iv, initial_law=GNormalSpec(iv))
    with pytest.raises(EstimationError):
        argmin_lse(model, make_path([1.0, 0.9, 0.8], 0.1))


def test_argmin_rejects_bad_tol(ou):
    with pytest.raises(DomainError):
        argmin_lse(ou, make_path([1.0, 0.9], 0.1), tol=0)


def test_closed_form_examples():
    assert ou_closed_form(make_path([1.0, 0.9, 0.81], 0.1)) == pytest.approx(1.0, abs=1e-14)
    assert ou_closed_form(make_path([1.0, 0.9, 0.8], 0.1)) == pytest.approx(0.19 / 0.181, rel=1e-13)
    with pytest.raises(DegeneratePathError):
        ou_closed_form(make_path([0.0, 0.0, 0.0], 0.1))


def test_closed_form_weighted_equals_unweighted_constant_sigma():
    p = ou_path(7, var=0.6)
    assert ou_closed_form(p) == pytest.approx(ou_closed_form(p, weighted=False), rel=1e-12)


def test_external_observations_constant_weight():
    p = ou_path(8)
    ext = SamplePath.from_observations(p.values, p.dt)
    model = ou_model(1.0)
    assert argmin_lse(model, ext, weight=1.0) == pytest.approx(ou_closed_form(p), abs=1e-8)


def test_round_mean_abs():
    assert round_mean_abs([EstimateRecord(0, 0, 1.0), EstimateRecord(0, 1, -1.0)]) == 1.0
    assert round_mean_abs([EstimateRecord(2, 0, -0.7)]) == 0.7
    with pytest.raises(UsageError):
        round_mean_abs([EstimateRecord(0, 0, 1.0), EstimateRecord(1, 0, 1.0)])
    with pytest.raises(UsageError):
        round_mean_abs([])
    with pytest.raises(EstimationError):
        EstimateRecord(0, 0, float("nan"))


def test_estimates_csv_roundtrip():
    recs = [EstimateRecord(0, j, 1.0 + j / 3.0) for j in range(4)]
    buf = io.StringIO()
    write_estimates_csv(buf, recs)
    assert buf.getvalue().splitlines()[0] == "k,j,theta_hat"
    assert read_estimates_csv(io.StringIO(buf.getvalue())) == recs


def test_envelope_csv_header():
    row = EnvelopeRow(100, 1.0, 2, 3, 7, 0.9, 1.1, (0.9, 1.1), (0.0, 0.0))
    buf = io.StringIO()
    write_envelope_csv(buf, [row])
    head, line = buf.getvalue().splitlines()
    assert head == "n,T,m,J,seed,lower,upper,gap"
    assert line.split(",")[:5] == ["100", "1.0", "2", "3", "7"]
    assert float(line.split(",")[-1]) == row.gap
