"""Planar agent kinematics and pairwise line-of-sight geometry.

Every angle is stored in radians, wrapped into (-pi, pi]. The line of sight of
an ordered pair (i, j) points from agent i toward agent j, so for the pairs
used throughout the package (E, P), (D, E) and (D, P) the first letter is the
observer.

The numerical work lives in small ``numba`` kernels operating on plain floats
so the simulation loop and the public dataclass API share one implementation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from numba import njit

G0 = 9.81  # m/s^2, converts g-unit limits
TWO_PI = 2.0 * math.pi
R_DEGENERATE = 1e-6  # m; below this the LOS is undefined


class DegenerateGeometryError(ValueError):
    """Two agents coincide, so the line of sight is undefined."""


class InvalidStateError(ValueError):
    """An agent state cannot be propagated (non-positive speed, NaN, ...)."""


@njit(cache=True)
def wrap_angle(a):
    w = a % TWO_PI
    if w > math.pi:
        w -= TWO_PI
    return w


@njit(cache=True)
def pair_geometry(xi, yi, gi, vi, xj, yj, gj, vj):
    """Return (r, lam, r_dot, lam_dot, delta_ij, delta_ji) for the pair (i, j).

    ``lam_dot`` is NaN when the agents coincide.
    """
    dx = xj - xi
    dy = yj - yi
    r = math.hypot(dx, dy)
    lam = wrap_angle(math.atan2(dy, dx))
    d_ij = wrap_angle(gi - lam)
    d_ji = wrap_angle(gj - lam)
    r_dot = vj * math.cos(d_ji) - vi * math.cos(d_ij)
    v_perp = vj * math.sin(d_ji) - vi * math.sin(d_ij)
    if r < R_DEGENERATE:
        lam_dot = math.nan
    else:
        lam_dot = v_perp / r
    return r, lam, r_dot, lam_dot, d_ij, d_ji


@njit(cache=True)
def los_accel_dp_kernel(r, r_dot, lam_dot, a_d, a_p, delta_pd):
    return (-2.0 * r_dot * lam_dot - a_d + a_p * math.cos(delta_pd)) / r


@njit(cache=True)
def los_accel_ep_kernel(r, r_dot, lam_dot, a_e, a_p, delta_ep, delta_pe):
    return (-2.0 * r_dot * lam_dot
            - math.cos(delta_ep) * a_e
            + math.cos(delta_pe) * a_p) / r


@njit(cache=True)
def rk4_agent(x, y, g, v, a_lat, a_rad, dt):
    """Advance one agent by ``dt`` with the commands held constant.

    The heading is left unwrapped; callers wrap once per step.
    """
    k1x = v * math.cos(g)
    k1y = v * math.sin(g)
    k1g = a_lat / v
    k1v = a_rad

    v2 = v + 0.5 * dt * k1v
    g2 = g + 0.5 * dt * k1g
    k2x = v2 * math.cos(g2)
    k2y = v2 * math.sin(g2)
    k2g = a_lat / v2
    k2v = a_rad

    v3 = v + 0.5 * dt * k2v
    g3 = g + 0.5 * dt * k2g
    k3x = v3 * math.cos(g3)
    k3y = v3 * math.sin(g3)
    k3g = a_lat / v3
    k3v = a_rad

    v4 = v + dt * k3v
    g4 = g + dt * k3g
    k4x = v4 * math.cos(g4)
    k4y = v4 * math.sin(g4)
    k4g = a_lat / v4
    k4v = a_rad

    h = dt / 6.0
    return (x + h * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
            y + h * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
            g + h * (k1g + 2.0 * k2g + 2.0 * k3g + k4g),
            v + h * (k1v + 2.0 * k2v + 2.0 * k3v + k4v))


@njit(cache=True)
def euler_agent(x, y, g, v, a_lat, a_rad, dt):
    return (x + dt * v * math.cos(g),
            y + dt * v * math.sin(g),
            g + dt * a_lat / v,
            v + dt * a_rad)


@dataclass(frozen=True)
class AgentState:
    """Position (m), heading (rad) and speed (m/s) of one vehicle."""

    x: float
    y: float
    gamma: float
    v: float

    def __post_init__(self):
        if not self.v > 0.0:
            raise InvalidStateError(f"speed must be positive, got {self.v}")
        object.__setattr__(self, "gamma", float(wrap_angle(self.gamma)))


@dataclass(frozen=True)
class PairState:
    r: float
    lam: float
    r_dot: float
    lam_dot: float
    delta_ij: float
    delta_ji: float


@dataclass(frozen=True)
class GuidanceCommand:
    """Acceleration request for one agent.

    ``a_lateral`` turns the velocity vector. ``a_radial`` changes speed and is
    only nonzero for the defender, whose total acceleration is
    ``hypot(a_lateral, a_radial)``.
    """

    a_lateral: float
    a_radial: float = 0.0

    @property
    def a_total(self) -> float:
        if self.a_radial == 0.0:
            return abs(self.a_lateral)
        return math.hypot(self.a_lateral, self.a_radial)

    @classmethod
    def from_total(cls, a_total: float, delta: float) -> "GuidanceCommand":
        """Split a signed total acceleration applied perpendicular to the LOS.

        ``delta`` is the agent's bearing relative to the LOS.
        """
        return cls(a_total * math.cos(delta), a_total * math.sin(delta))


def relative_state(a: AgentState, b: AgentState) -> PairState:
    """Relative range/LOS quantities of the ordered pair (a, b).

    Raises DegenerateGeometryError when the two positions coincide.
    """
    out = pair_geometry(a.x, a.y, a.gamma, a.v, b.x, b.y, b.gamma, b.v)
    if out[0] < R_DEGENERATE:
        raise DegenerateGeometryError("agents coincide; line of sight undefined")
    return PairState(*out)


def state_derivative(s: AgentState, cmd: GuidanceCommand) -> tuple[float, float, float, float]:
    """Time derivative (x_dot, y_dot, gamma_dot, v_dot) under ``cmd``."""
    if not s.v > 0.0:
        raise InvalidStateError(f"speed must be positive, got {s.v}")
    return (s.v * math.cos(s.gamma), s.v * math.sin(s.gamma),
            cmd.a_lateral / s.v, cmd.a_radial)


def _check_range(r: float) -> None:
    if not r >= R_DEGENERATE:
        raise DegenerateGeometryError(f"range {r} too small for LOS dynamics")


def los_accel_DP(pair: PairState, a_D_total: float, a_P: float, delta_PD: float) -> float:
    """Second derivative of the defender-pursuer LOS angle.

    The defender's acceleration acts perpendicular to the LOS, which is why
    only its total magnitude appears.
    """
    _check_range(pair.r)
    return los_accel_dp_kernel(pair.r, pair.r_dot, pair.lam_dot, a_D_total, a_P, delta_PD)


def los_accel_EP(pair: PairState, a_E: float, a_P: float,
                 delta_EP: float, delta_PE: float) -> float:
    """Second derivative of the evader-pursuer LOS angle."""
    _check_range(pair.r)
    return los_accel_ep_kernel(pair.r, pair.r_dot, pair.lam_dot, a_E, a_P, delta_EP, delta_PE)


def propagate(s: AgentState, cmd: GuidanceCommand, dt: float, method: str = "rk4") -> AgentState:
    """Advance a single agent by ``dt`` with ``cmd`` held constant."""
    if not s.v > 0.0:
        raise InvalidStateError(f"speed must be positive, got {s.v}")
    fn = rk4_agent if method == "rk4" else euler_agent
    x, y, g, v = fn(s.x, s.y, s.gamma, s.v, cmd.a_lateral, cmd.a_radial, dt)
    if not all(math.isfinite(q) for q in (x, y, g, v)):
        raise InvalidStateError(f"non-finite state after step from {s}")
    return AgentState(x, y, g, v)
