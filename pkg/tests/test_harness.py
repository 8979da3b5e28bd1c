"""Closed-loop harness: reference signals, scenario checks, runs, metrics."""

import dataclasses
import math

import numpy as np
import pytest

from delaysync.errors import (
    DimensionMismatch,
    DivergenceDetected,
    EmptyTrace,
    SingularWeight,
    ValidationError,
)
from delaysync.adaptive import ControllerConfig
from delaysync.harness import (
    ReferenceSignal,
    Scenario,
    SimTrace,
    lyapunov_monitor,
    metrics,
    run_scenario,
    validate_scenario,
)
from delaysync.plant import AgentDynamics, LeaderModel
from delaysync.topology import Topology

P_BLOCK = np.array([[0.25, 0.05], [0.05, 0.05]])


def tiny_scenario(**over):
    """One scalar agent pinned to a scalar leader; cheap enough to run in
    a fraction of a second."""
    base = dict(
        fleet=[AgentDynamics(a=[[-2.0]], a_zeta=[[0.1]], b=[[1.0]])],
        leader=LeaderModel(a_m=[[-1.0]], b_m=[[1.0]]),
        topology=Topology(1, np.zeros((1, 1)), np.ones(1), 0.1),
        gamma_theta=np.eye(1),
        gamma_phi=np.eye(1),
        q_tilde=np.eye(1),
        theta0=np.zeros((1, 3, 1)),
        phi_phi0=np.zeros((1, 1, 1)),
        r_signs=np.array([1.0]),
        tau_x=1.0,
        tau_u=2.0,
        step=0.01,
        duration=5.0,
        reference=ReferenceSignal(kind="constant"),
        x0=np.zeros(1),
        xm0=np.zeros(1),
        xa0=np.zeros(1),
        name="tiny",
    )
    base.update(over)
    return Scenario(**base)


# The ideal gains of the tiny plant, solvable by hand: a + b*tx = a_m gives
# tx = 1, tz = -0.1, tr = 1, and the input scale is 1.
TINY_THETA_STAR = np.array([[[1.0], [-0.1], [1.0]]])
TINY_PHI_STAR = np.ones((1, 1, 1))


# ------------------------------------------------------------------ signals


def test_reference_is_zero_before_start():
    for kind in ("constant", "sine", "square"):
        assert ReferenceSignal(kind=kind)(-0.001) == 0.0


def test_reference_constant_level():
    r = ReferenceSignal(kind="constant", amplitude=2.0, offset=-0.5)
    assert r(0.0) == 1.5
    assert r(1000.0) == 1.5


def test_reference_sine_values():
    r = ReferenceSignal(kind="sine", amplitude=2.0, period=8.0)
    assert abs(r(2.0) - 2.0) < 1e-12
    assert abs(r(4.0)) < 1e-12
    assert abs(r(6.0) + 2.0) < 1e-12


def test_reference_square_levels():
    r = ReferenceSignal(kind="square", amplitude=1.0, period=40.0)
    assert r(0.0) == 1.0
    assert r(19.99) == 1.0
    assert r(20.0) == -1.0
    assert r(39.0) == -1.0
    assert r(40.0) == 1.0


def test_reference_square_snaps_rounded_edges():
    """Arguments a float-rounding away from a switching instant must read
    the post-switch level, exactly like the instant itself."""
    r = ReferenceSignal(kind="square", amplitude=1.0, period=40.0)
    assert r(20.0 - 1e-10) == -1.0
    assert r(20.0 + 1e-10) == -1.0
    assert r(19.9999) == 1.0


def test_reference_flatness_flags():
    assert ReferenceSignal(kind="constant").piecewise_constant
    assert ReferenceSignal(kind="square").piecewise_constant
    assert not ReferenceSignal(kind="sine").piecewise_constant


def test_reference_validation():
    with pytest.raises(ValidationError):
        ReferenceSignal(kind="triangle")
    with pytest.raises(ValidationError):
        ReferenceSignal(kind="square", period=0.0)
    ReferenceSignal(kind="constant", period=0.0)  # period unused, accepted


# --------------------------------------------------------------- validation


def test_scenario_rejects_delay_disorder():
    with pytest.raises(ValidationError):
        tiny_scenario(tau_x=3.0, tau_u=2.0)


def test_scenario_rejects_non_dividing_step():
    with pytest.raises(ValidationError):
        tiny_scenario(step=0.3)


def test_scenario_rejects_fractional_signs():
    with pytest.raises(ValidationError):
        tiny_scenario(r_signs=np.array([0.5]))


def test_scenario_rejects_wrong_gain_shape():
    with pytest.raises(DimensionMismatch):
        tiny_scenario(theta0=np.zeros((1, 4, 1)))


def test_validator_names_and_results():
    checks = validate_scenario(tiny_scenario())
    assert [c.name for c in checks] == [
        "balanced",
        "threshold(0.1)",
        "reachable",
        "lyapunov_residual",
        "matching",
    ]
    assert all(c.passed for c in checks)


def test_validator_catches_declared_sign_conflict():
    sc = tiny_scenario(r_signs=np.array([-1.0]))
    failed = {c.name for c in validate_scenario(sc) if not c.passed}
    assert failed == {"matching"}
    with pytest.raises(ValidationError):
        run_scenario(sc)


def test_validator_reports_unstable_leader():
    sc = tiny_scenario(leader=LeaderModel(a_m=[[1.0]], b_m=[[1.0]]))
    bad = [c for c in validate_scenario(sc) if not c.passed]
    assert any(c.name == "lyapunov_residual" and "Hurwitz" in c.detail for c in bad)


def test_validator_applies_connectivity_threshold():
    sc = tiny_scenario(topology=Topology(1, np.zeros((1, 1)), np.ones(1), 2.0))
    failed = {c.name for c in validate_scenario(sc) if not c.passed}
    assert failed == {"threshold(2)"}


# --------------------------------------------------------------------- runs


def test_quiescent_scenario_stays_identically_zero():
    """No excitation, zero initial data: every dynamic signal is exactly
    zero and the (nonzero) gains never move."""
    theta0 = np.full((1, 3, 1), 0.5)
    sc = tiny_scenario(reference=ReferenceSignal(kind="constant", amplitude=0.0), theta0=theta0)
    trace = run_scenario(sc)
    for field in (trace.x, trace.x_m, trace.x_a, trace.e, trace.e_a, trace.u, trace.u_aux, trace.phi):
        assert np.array_equal(field, np.zeros_like(field))
    assert np.array_equal(trace.theta, np.broadcast_to(theta0, trace.theta.shape))
    assert np.array_equal(trace.phi_phi, np.zeros_like(trace.phi_phi))
    assert np.all(trace.v_d == trace.v_d[0])


def test_matched_gains_keep_zero_error():
    sc = tiny_scenario(
        theta0=TINY_THETA_STAR,
        phi_phi0=TINY_PHI_STAR,
        reference=ReferenceSignal(kind="square", amplitude=1.0, period=4.0),
        duration=8.0,
    )
    trace = run_scenario(sc)
    assert np.max(np.abs(trace.x - trace.x_m[:, None, :])) < 1e-9
    assert np.max(np.abs(trace.e_a)) < 1e-9
    assert np.max(np.abs(trace.theta - TINY_THETA_STAR[None])) < 1e-9


def test_trace_internal_consistency():
    sc = tiny_scenario(duration=4.0)
    trace = run_scenario(sc)
    rows = trace.num_rows
    assert rows == 401
    assert np.array_equal(trace.times, np.arange(rows) * sc.step)
    assert np.array_equal(trace.e, trace.e_a - trace.x_a)
    assert np.array_equal(trace.u_aux, np.einsum("tipj,tij->tip", trace.phi_phi, trace.phi))
    for field in (trace.x, trace.theta, trace.v_d):
        assert np.all(np.isfinite(field))


def test_reruns_match_bitwise():
    sc = tiny_scenario(reference=ReferenceSignal(kind="square", amplitude=1.0, period=4.0))
    a = run_scenario(sc)
    b = run_scenario(dataclasses.replace(sc))
    for name in ("times", "x", "x_m", "x_a", "e", "e_a", "u", "u_aux", "phi", "theta", "phi_phi", "v_d"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_divergence_reports_offending_time():
    # the applied input switches on at tau_u; enormous frozen gains then
    # kick the fleet past the plausible-state limit within a step or two
    sc = tiny_scenario(
        theta0=np.full((1, 3, 1), 1e8),
        gamma_theta=np.zeros((1, 1)),
        gamma_phi=np.zeros((1, 1)),
        duration=5.0,
    )
    with pytest.raises(DivergenceDetected) as info:
        run_scenario(sc)
    assert info.value.time is not None
    assert info.value.time >= sc.tau_u


def test_divergence_catches_bad_initial_state():
    with pytest.raises(DivergenceDetected) as info:
        run_scenario(tiny_scenario(x0=np.array([2e6])))
    assert info.value.time == 0.0


# ------------------------------------------------------------------ monitor


def monitor_config(r_weight):
    return ControllerConfig(
        gamma_theta=np.eye(1),
        gamma_phi=np.eye(1),
        p_matrix=P_BLOCK,
        r_sign=np.array([-1.0]),
        tau_x=3.0,
        tau_u=5.0,
        r_weight=np.asarray(r_weight, dtype=float),
    )


def test_monitor_zero_at_equilibrium():
    cfg = monitor_config([2.0 / 3.0])
    assert lyapunov_monitor(cfg, np.zeros(2), np.zeros((1, 5, 1)), np.zeros((1, 1, 1))) == 0.0


def test_monitor_weights_gain_error_by_inverse_reference_gain():
    cfg = monitor_config([2.0 / 3.0])
    theta_err = np.zeros((1, 5, 1))
    theta_err[0, 0, 0] = 1.0
    v = lyapunov_monitor(cfg, np.zeros(2), theta_err, np.zeros((1, 1, 1)))
    assert abs(v - 1.5) < 1e-12


def test_monitor_quadratic_term():
    cfg = monitor_config([2.0 / 3.0])
    v = lyapunov_monitor(cfg, np.array([1.0, 0.0]), np.zeros((1, 5, 1)), np.zeros((1, 1, 1)))
    assert v == 0.25


def test_monitor_rejects_vanishing_weight():
    cfg = monitor_config([0.0])
    with pytest.raises(SingularWeight):
        lyapunov_monitor(cfg, np.zeros(2), np.zeros((1, 5, 1)), np.zeros((1, 1, 1)))


def test_monitor_requires_weight_vector():
    cfg = ControllerConfig(
        gamma_theta=np.eye(1),
        gamma_phi=np.eye(1),
        p_matrix=P_BLOCK,
        r_sign=np.array([-1.0]),
        tau_x=3.0,
        tau_u=5.0,
    )
    with pytest.raises(ValidationError):
        lyapunov_monitor(cfg, np.zeros(2), np.zeros((1, 5, 1)), np.zeros((1, 1, 1)))


def test_monitor_frozen_channel_must_carry_no_error():
    cfg = ControllerConfig(
        gamma_theta=np.zeros((1, 1)),
        gamma_phi=np.eye(1),
        p_matrix=P_BLOCK,
        r_sign=np.array([-1.0]),
        tau_x=3.0,
        tau_u=5.0,
        r_weight=np.array([2.0 / 3.0]),
    )
    ok = lyapunov_monitor(cfg, np.zeros(2), np.zeros((1, 5, 1)), np.zeros((1, 1, 1)))
    assert ok == 0.0
    bad = np.zeros((1, 5, 1))
    bad[0, 1, 0] = 0.1
    with pytest.raises(SingularWeight):
        lyapunov_monitor(cfg, np.zeros(2), bad, np.zeros((1, 1, 1)))


# ------------------------------------------------------------------ metrics


def synthetic_trace(norms, times, tau_u=1.0):
    rows = times.shape[0]
    zeros_ln = np.zeros((rows, 1, 1))
    return SimTrace(
        times=times,
        x=zeros_ln.copy(),
        x_m=np.zeros((rows, 1)),
        x_a=zeros_ln.copy(),
        e=norms.reshape(rows, 1, 1),
        e_a=norms.reshape(rows, 1, 1),
        u=zeros_ln.copy(),
        u_aux=zeros_ln.copy(),
        phi=np.zeros((rows, 1)).reshape(rows, 1, 1),
        theta=np.zeros((rows, 1, 3, 1)),
        phi_phi=np.zeros((rows, 1, 1, 1)),
        v_d=norms**2,
        tau_x=0.5,
        tau_u=tau_u,
    )


def test_metrics_of_quiescent_run_are_zero():
    sc = tiny_scenario(reference=ReferenceSignal(kind="constant", amplitude=0.0))
    m = metrics(run_scenario(sc))
    assert m.peak_error == 0.0
    assert m.final_window_mean == 0.0
    assert m.settling_time == 0.0
    assert m.max_vd_slope == 0.0


def test_metrics_settling_time_of_exponential_decay():
    times = np.arange(1001) * 0.01
    m = metrics(synthetic_trace(np.exp(-times), times))
    assert m.peak_error == 1.0
    # crosses 5% of peak at ln(20) ~ 2.9957; first grid time past that is 3.0
    assert abs(m.settling_time - 3.0) < 1e-12
    assert m.settling_time - math.log(20.0) < 0.01
    assert m.final_window_mean < 1e-3
    assert m.max_vd_slope <= 0.0


def test_metrics_settling_never_reached_is_infinite():
    times = np.arange(101) * 0.01
    m = metrics(synthetic_trace(np.ones(101), times))
    assert m.settling_time == math.inf


def test_metrics_reject_empty_trace():
    with pytest.raises(EmptyTrace):
        metrics(synthetic_trace(np.zeros(0), np.zeros(0)))


def test_metrics_expose_final_gains():
    sc = tiny_scenario(duration=3.0)
    trace = run_scenario(sc)
    m = metrics(trace)
    assert np.array_equal(m.theta_final, trace.theta[-1])
    assert np.array_equal(m.phi_phi_final, trace.phi_phi[-1])
