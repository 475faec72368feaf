import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adsim.kinematics import (AgentState, DegenerateGeometryError, GuidanceCommand,
                              InvalidStateError, los_accel_DP, los_accel_EP, propagate,
                              relative_state, state_derivative, wrap_angle)

angles = st.floats(-10.0, 10.0, allow_nan=False)
coords = st.floats(-2e4, 2e4, allow_nan=False)
speeds = st.floats(10.0, 800.0, allow_nan=False)


def straight(s: AgentState, t: float) -> AgentState:
    return AgentState(s.x + s.v * math.cos(s.gamma) * t, s.y + s.v * math.sin(s.gamma) * t,
                      s.gamma, s.v)


# -- angle wrapping ---------------------------------------------------------

@settings(deadline=None)
@given(angles)
def test_wrap_angle_range_and_equivalence(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-12)
    assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-12)


def test_wrap_angle_pi_maps_to_pi():
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)


# -- state objects ----------------------------------------------------------

def test_agent_state_rejects_nonpositive_speed():
    with pytest.raises(InvalidStateError):
        AgentState(0.0, 0.0, 0.0, 0.0)
    with pytest.raises(InvalidStateError):
        AgentState(0.0, 0.0, 0.0, math.nan)


def test_agent_state_wraps_heading():
    assert AgentState(0, 0, 3 * math.pi / 2, 1.0).gamma == pytest.approx(-math.pi / 2)


def test_command_from_total_splits_perpendicular_to_los():
    cmd = GuidanceCommand.from_total(10.0, math.radians(30))
    assert cmd.a_lateral == pytest.approx(10 * math.cos(math.radians(30)))
    assert cmd.a_radial == pytest.approx(5.0)
    assert cmd.a_total == pytest.approx(10.0)


def test_state_derivative_values():
    s = AgentState(1.0, 2.0, math.pi / 2, 200.0)
    dx, dy, dg, dv = state_derivative(s, GuidanceCommand(40.0, -3.0))
    assert dx == pytest.approx(0.0, abs=1e-12)
    assert dy == pytest.approx(200.0)
    assert dg == pytest.approx(0.2)
    assert dv == -3.0


# -- relative geometry ------------------------------------------------------

def test_relative_state_head_on():
    d = AgentState(0, 0, 0.0, 400.0)
    p = AgentState(10000, 0, math.pi, 375.0)
    pr = relative_state(d, p)
    assert pr.r == pytest.approx(10000)
    assert pr.lam == pytest.approx(0.0)
    assert pr.r_dot == pytest.approx(-775.0)
    assert pr.lam_dot == pytest.approx(0.0, abs=1e-12)
    assert pr.delta_ij == pytest.approx(0.0)
    assert abs(pr.delta_ji) == pytest.approx(math.pi)


def test_relative_state_coincident_raises():
    a = AgentState(5.0, 5.0, 0.0, 1.0)
    with pytest.raises(DegenerateGeometryError):
        relative_state(a, AgentState(5.0, 5.0, 1.0, 2.0))


@settings(max_examples=200, deadline=None)
@given(coords, coords, angles, speeds, coords, coords, angles, speeds)
def test_range_and_los_rates_match_finite_differences(x1, y1, g1, v1, x2, y2, g2, v2):
    a, b = AgentState(x1, y1, g1, v1), AgentState(x2, y2, g2, v2)
    pr = relative_state(a, b) if math.hypot(x2 - x1, y2 - y1) > 500 else None
    if pr is None:
        return
    h = 1e-3
    fwd = relative_state(straight(a, h), straight(b, h))
    bwd = relative_state(straight(a, -h), straight(b, -h))
    r_dot_fd = (fwd.r - bwd.r) / (2 * h)
    lam_dot_fd = wrap_angle(fwd.lam - bwd.lam) / (2 * h)
    assert r_dot_fd == pytest.approx(pr.r_dot, abs=1e-4 * max(1.0, abs(pr.r_dot)))
    assert lam_dot_fd == pytest.approx(pr.lam_dot, rel=1e-5, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(coords, coords, angles, speeds, coords, coords, angles, speeds, angles)
def test_relative_state_rotation_invariance(x1, y1, g1, v1, x2, y2, g2, v2, phi):
    if math.hypot(x2 - x1, y2 - y1) < 1.0:
        return
    c, s = math.cos(phi), math.sin(phi)
    rot = lambda x, y, g, v: AgentState(c * x - s * y, s * x + c * y, g + phi, v)
    base = relative_state(AgentState(x1, y1, g1, v1), AgentState(x2, y2, g2, v2))
    turned = relative_state(rot(x1, y1, g1, v1), rot(x2, y2, g2, v2))
    assert turned.r == pytest.approx(base.r, rel=1e-9)
    assert turned.r_dot == pytest.approx(base.r_dot, abs=1e-7 * (v1 + v2))
    assert turned.lam_dot == pytest.approx(base.lam_dot, abs=1e-9 * (v1 + v2))
    assert math.cos(turned.lam - base.lam - phi) == pytest.approx(1.0, abs=1e-9)
    assert math.cos(turned.delta_ij - base.delta_ij) == pytest.approx(1.0, abs=1e-9)


# -- second derivative of the LOS angle --------------------------------------

def _lam_dot_after(a, ca, b, cb, h):
    return relative_state(propagate(a, ca, h), propagate(b, cb, h)).lam_dot


@pytest.mark.parametrize("a_d, a_p", [(0.0, 0.0), (120.0, -80.0), (-300.0, 250.0)])
def test_los_accel_dp_matches_finite_difference(a_d, a_p):
    d = AgentState(0.0, 0.0, math.radians(20), 400.0)
    p = AgentState(9000.0, -4000.0, math.radians(160), 375.0)
    pr = relative_state(d, p)
    cmd_d = GuidanceCommand.from_total(a_d, pr.delta_ij)
    cmd_p = GuidanceCommand(a_p)
    h = 1e-3
    fd = (_lam_dot_after(d, cmd_d, p, cmd_p, h) - _lam_dot_after(d, cmd_d, p, cmd_p, -h)) / (2 * h)
    closed = los_accel_DP(pr, a_d, a_p, pr.delta_ji)
    assert fd == pytest.approx(closed, abs=1e-4)


@pytest.mark.parametrize("a_e, a_p", [(0.0, 0.0), (40.0, -200.0), (-49.0, 390.0)])
def test_los_accel_ep_matches_finite_difference(a_e, a_p):
    e = AgentState(0.0, 0.0, math.radians(30), 100.0)
    p = AgentState(10606.6, -10606.6, math.radians(165), 375.0)
    pr = relative_state(e, p)
    ce, cp = GuidanceCommand(a_e), GuidanceCommand(a_p)
    h = 1e-3
    fd = (_lam_dot_after(e, ce, p, cp, h) - _lam_dot_after(e, ce, p, cp, -h)) / (2 * h)
    closed = los_accel_EP(pr, a_e, a_p, pr.delta_ij, pr.delta_ji)
    assert fd == pytest.approx(closed, abs=1e-4)


# -- integration -------------------------------------------------------------

def test_straight_line_is_exact():
    s = AgentState(1.0, -2.0, 0.7, 250.0)
    out = propagate(s, GuidanceCommand(0.0), 0.5)
    ref = straight(s, 0.5)
    assert (out.x, out.y, out.v) == pytest.approx((ref.x, ref.y, ref.v), abs=1e-9)


def _circle(s: AgentState, a: float, t: float) -> tuple[float, float]:
    rho = s.v * s.v / a
    w = a / s.v
    g = s.gamma + w * t
    return (s.x + rho * (math.sin(g) - math.sin(s.gamma)),
            s.y - rho * (math.cos(g) - math.cos(s.gamma)))


def _arc_error(method, dt, t_end=2.0):
    s = AgentState(0.0, 0.0, 0.3, 300.0)
    cmd = GuidanceCommand(150.0)
    for _ in range(round(t_end / dt)):
        s = propagate(s, cmd, dt, method)
    x, y = _circle(AgentState(0.0, 0.0, 0.3, 300.0), 150.0, t_end)
    return math.hypot(s.x - x, s.y - y)


def test_rk4_follows_circular_arc():
    assert _arc_error("rk4", 1e-3) < 1e-6


def test_integrator_convergence_orders():
    e_rk = [_arc_error("rk4", dt) for dt in (0.04, 0.02)]
    e_eu = [_arc_error("euler", dt) for dt in (0.02, 0.01)]
    assert 12.0 < e_rk[0] / e_rk[1] < 20.0
    assert 1.7 < e_eu[0] / e_eu[1] < 2.3


@settings(max_examples=100, deadline=None)
@given(angles, speeds, st.floats(-400.0, 400.0))
def test_lateral_only_command_conserves_speed(g, v, a):
    s = AgentState(0.0, 0.0, g, v)
    for _ in range(50):
        s = propagate(s, GuidanceCommand(a), 1e-2)
    assert s.v == v


def test_radial_command_changes_speed_linearly():
    s = AgentState(0.0, 0.0, 0.0, 300.0)
    out = propagate(s, GuidanceCommand(0.0, -20.0), 0.5)
    assert out.v == pytest.approx(290.0)
    assert out.x == pytest.approx(300 * 0.5 - 0.5 * 20 * 0.25)


def test_propagate_rejects_nonfinite_result():
    s = AgentState(0.0, 0.0, 0.0, 1.0)
    with pytest.raises(InvalidStateError):
        propagate(s, GuidanceCommand(math.inf), 0.1)
