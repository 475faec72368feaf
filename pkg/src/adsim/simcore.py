"""Fixed-step closed-loop propagation of the pursuer/evader/defender engagement.

Commands are computed once per step from the pre-step state and held over the
step (zero-order hold); the three agents are then advanced together with RK4
or forward Euler. Interception instants are refined by linear interpolation of
the range between the bracketing steps.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numba import njit

from . import guidance as gd
from .kinematics import (AgentState, GuidanceCommand, euler_agent,
                         pair_geometry, rk4_agent, wrap_angle)

# trace columns, in export order
COLUMNS = (
    "t",
    "x_P", "y_P", "gamma_P", "v_P",
    "x_E", "y_E", "gamma_E", "v_E",
    "x_D", "y_D", "gamma_D", "v_D",
    "r_EP", "lambda_EP", "r_dot_EP", "lambda_dot_EP",
    "r_DE", "lambda_DE", "r_dot_DE", "lambda_dot_DE",
    "r_DP", "lambda_DP", "r_dot_DP", "lambda_dot_DP",
    "a_P", "a_E", "a_Dt", "a_Dr", "a_D",
    "s1", "s2", "tgo_EP", "tgo_DP",
    "eps1", "eps_D", "eps1_ok", "eps_D_ok", "fallback",
)
COL = {name: i for i, name in enumerate(COLUMNS)}
NCOL = len(COLUMNS)

# kernel status codes
RUNNING, DEFENDER_WINS, PURSUER_WINS, TIMEOUT, NONFINITE, DEGENERATE = range(6)
RK4, EULER = 0, 1


class Verdict(str, Enum):
    DEFENDER_WINS = "DefenderWins"
    PURSUER_WINS = "PursuerWins"
    TIMEOUT = "Timeout"
    DEGENERATE = "Degenerate"


class PropagationError(RuntimeError):
    """The state became non-finite; ``snapshot`` holds the last good row."""

    def __init__(self, msg, snapshot=None):
        super().__init__(msg)
        self.snapshot = snapshot


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    t_max: float = 120.0
    capture_radius: float = 3.0
    integrator: str = "rk4"
    record_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if not self.t_max > self.dt:
            raise ValueError("t_max must exceed dt")
        if not self.capture_radius > 0.0:
            raise ValueError("capture_radius must be positive")
        if self.integrator not in ("rk4", "euler"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if int(self.record_stride) < 1:
            raise ValueError("record_stride must be >= 1")


@dataclass
class Outcome:
    verdict: Verdict
    t_intercept: float | None = None
    achieved_margin: float | None = None
    min_r_DP: float = math.inf
    min_r_EP: float = math.inf
    t_end: float = 0.0
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "t_intercept": self.t_intercept,
            "achieved_margin": self.achieved_margin,
            "min_r_DP": self.min_r_DP,
            "min_r_EP": self.min_r_EP,
            "t_end": self.t_end,
            "message": self.message,
        }


@dataclass
class SimTrace:
    """Recorded rows; ``data[:, COL[name]]`` or ``trace[name]`` gives a column."""

    data: np.ndarray = field(repr=False)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[:, COL[name]]

    def __len__(self) -> int:
        return self.data.shape[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in self.data:
            w.writerow([f"{v:.9g}" for v in row])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _commands(s, p):
    """Guidance for one step.

    Returns a tuple of commands and diagnostics:
    (a_P, a_E, a_Dt, a_Dr, a_D, s1, s2, tgo_EP, tgo_DP, eps1, epsD,
     eps1_ok, epsD_ok, fallback, pairs...).
    """
    xp, yp, gp, vp = s[0], s[1], s[2], s[3]
    xe, ye, ge, ve = s[4], s[5], s[6], s[7]
    xd, yd, gdd, vd = s[8], s[9], s[10], s[11]
    r_ep, l_ep, rd_ep, ld_ep, d_ep, d_pe = pair_geometry(xe, ye, ge, ve, xp, yp, gp, vp)
    r_dp, l_dp, rd_dp, ld_dp, d_dp, d_pd = pair_geometry(xd, yd, gdd, vd, xp, yp, gp, vp)

    req1, req2, req3 = gd.epsilon_bounds_kernel(r_dp, r_ep, vp, ve, vd, p.c,
                                                p.a_p_max, p.a_e_max, p.r_floor)
    req_d = req2 if p.with_access == 1 else req3
    eps1 = req1 * p.eps_safety if math.isnan(p.eps_e) else p.eps_e
    eps_d = req_d * p.eps_safety if math.isnan(p.eps_d) else p.eps_d

    a_e = gd.evader_kernel(r_ep, rd_ep, ld_ep, d_ep, p.ze, p.xe, p.ae, p.be, p.ke,
                           eps1, p.width, p.cos_floor, p.a_e_max)
    a_p = gd.pursuer_kernel(p.strategy, p.n_nav, p.k_p, p.apn_sign, vp, rd_ep, ld_ep,
                            a_e, p.a_p_max)

    t_ep = gd.tgo_ep_kernel(r_ep, d_ep, d_pe, ve, vp)
    t_dp = gd.tgo_dp_kernel(r_dp, d_dp, d_pd, vd, vp, rd_dp, p.c)
    s2 = t_dp - t_ep + p.tau
    fallback = 0.0
    if math.isfinite(t_ep) and math.isfinite(t_dp):
        lead, los_term, a_e_term, sw = gd.defender_terms_kernel(
            r_dp, rd_dp, ld_dp, d_dp, r_ep, rd_ep, ld_ep, d_ep, a_e, s2, p.c,
            p.zd, p.xd, p.ad, p.bd, p.kd, eps_d, p.width, p.lam_dot_floor, p.cos_floor)
        a_d = lead + los_term + sw
        if p.with_access == 1:
            a_d += a_e_term
    else:
        a_d = p.c * ld_dp
        fallback = 1.0
    a_d = gd.clamp(a_d, -p.a_d_max, p.a_d_max)
    a_dt = a_d * math.cos(d_dp)
    a_dr = a_d * math.sin(d_dp)
    eps1_ok = 1.0 if eps1 > req1 else 0.0
    epsd_ok = 1.0 if eps_d > req_d else 0.0
    return (a_p, a_e, a_dt, a_dr, a_d, ld_ep, s2, t_ep, t_dp, eps1, eps_d,
            eps1_ok, epsd_ok, fallback)


@njit(cache=True)
def _agent_step(x, y, g, v, a_lat, a_rad, dt, integrator):
    if integrator == 0:
        return rk4_agent(x, y, g, v, a_lat, a_rad, dt)
    return euler_agent(x, y, g, v, a_lat, a_rad, dt)


@njit(cache=True)
def _advance(s, a_p, a_e, a_dt, a_dr, dt, integrator, v_d_min, v_d_max):
    out = np.empty(12)
    # pursuer and evader speeds are constants of motion; copy them verbatim
    x, y, g, _ = _agent_step(s[0], s[1], s[2], s[3], a_p, 0.0, dt, integrator)
    out[0], out[1], out[2], out[3] = x, y, wrap_angle(g), s[3]
    x, y, g, _ = _agent_step(s[4], s[5], s[6], s[7], a_e, 0.0, dt, integrator)
    out[4], out[5], out[6], out[7] = x, y, wrap_angle(g), s[7]
    x, y, g, v = _agent_step(s[8], s[9], s[10], s[11], a_dt, a_dr, dt, integrator)
    out[8], out[9], out[10] = x, y, wrap_angle(g)
    out[11] = min(max(v, v_d_min), v_d_max)
    return out


@njit(cache=True)
def _record(buf, row, t, s, cmd):
    buf[row, 0] = t
    for i in range(12):
        buf[row, 1 + i] = s[i]
    pr = pair_geometry(s[4], s[5], s[6], s[7], s[0], s[1], s[2], s[3])
    buf[row, 13], buf[row, 14], buf[row, 15], buf[row, 16] = pr[0], pr[1], pr[2], pr[3]
    pr = pair_geometry(s[8], s[9], s[10], s[11], s[4], s[5], s[6], s[7])
    buf[row, 17], buf[row, 18], buf[row, 19], buf[row, 20] = pr[0], pr[1], pr[2], pr[3]
    pr = pair_geometry(s[8], s[9], s[10], s[11], s[0], s[1], s[2], s[3])
    buf[row, 21], buf[row, 22], buf[row, 23], buf[row, 24] = pr[0], pr[1], pr[2], pr[3]
    for i in range(14):
        buf[row, 25 + i] = cmd[i]


@njit(cache=True)
def _ranges(s):
    r_ep = math.hypot(s[0] - s[4], s[1] - s[5])
    r_dp = math.hypot(s[0] - s[8], s[1] - s[9])
    return r_ep, r_dp


@njit(cache=True)
def _segment_hit(ax, ay, bx, by, radius):
    """Earliest f in [0, 1] with |a + f(b - a)| <= radius (2.0 if none), and the
    minimum distance along the segment.

    Relative motion is treated as linear within one step so that fast closures
    cannot tunnel through a small capture radius.
    """
    dx = bx - ax
    dy = by - ay
    aa = dx * dx + dy * dy
    ad = ax * dx + ay * dy
    fm = 0.0
    if aa > 0.0:
        fm = min(max(-ad / aa, 0.0), 1.0)
    r_min = math.hypot(ax + fm * dx, ay + fm * dy)
    c0 = ax * ax + ay * ay - radius * radius
    if c0 <= 0.0:
        return 0.0, r_min
    if r_min > radius:
        return 2.0, r_min
    disc = max(ad * ad - aa * c0, 0.0)
    f = (-ad - math.sqrt(disc)) / aa
    return min(max(f, 0.0), 1.0), r_min


@njit(cache=True)
def _finite(s):
    for i in range(12):
        if not math.isfinite(s[i]):
            return False
    return True


@njit(cache=True)
def run_kernel(s0, p, dt, t_max, capture_radius, integrator, stride, record):
    """Closed-loop run. Returns (buf, n_rows, status, t_event, margin, min_r_dp, min_r_ep, t_end)."""
    n_max = int(math.ceil(t_max / dt - 1e-9))
    if record:
        buf = np.empty((n_max // stride + 2, 39))
    else:
        buf = np.empty((1, 39))
    n_rows = 0
    s = s0.copy()
    r_ep, r_dp = _ranges(s)
    min_r_dp, min_r_ep = r_dp, r_ep
    status = RUNNING
    t_event = math.nan
    margin = math.nan
    k = 0
    prev, prev_tgo = s, math.nan

    if r_ep < 1e-6 or r_dp < 1e-6:
        status = DEGENERATE
    while status == RUNNING:
        t = k * dt
        r_ep, r_dp = _ranges(s)
        cmd = _commands(s, p)
        tgo = cmd[7]
        if k == 0:
            f_dp = 0.0 if r_dp <= capture_radius else 2.0
            f_ep = 0.0 if r_ep <= capture_radius else 2.0
            seg_dp, seg_ep = r_dp, r_ep
        else:
            f_dp, seg_dp = _segment_hit(prev[0] - prev[8], prev[1] - prev[9],
                                        s[0] - s[8], s[1] - s[9], capture_radius)
            f_ep, seg_ep = _segment_hit(prev[0] - prev[4], prev[1] - prev[5],
                                        s[0] - s[4], s[1] - s[5], capture_radius)
        min_r_dp = min(min_r_dp, seg_dp)
        min_r_ep = min(min_r_ep, seg_ep)
        dp_hit = f_dp <= 1.0
        ep_hit = f_ep <= 1.0
        if dp_hit or ep_hit:
            if dp_hit and (not ep_hit or f_dp < f_ep):
                status = DEFENDER_WINS
                t_event = (k - 1 + f_dp) * dt if k > 0 else 0.0
                if k > 0 and math.isfinite(prev_tgo) and math.isfinite(tgo):
                    margin = prev_tgo + f_dp * (tgo - prev_tgo)
                elif math.isfinite(tgo):
                    margin = tgo
                else:
                    margin = prev_tgo
            else:
                status = PURSUER_WINS
                t_event = (k - 1 + f_ep) * dt if k > 0 else 0.0
        elif not (_finite(s) and math.isfinite(cmd[0]) and math.isfinite(cmd[1])
                  and math.isfinite(cmd[4])):
            status = NONFINITE
        elif r_ep < 1e-6 or r_dp < 1e-6:
            status = DEGENERATE
        elif k >= n_max:
            status = TIMEOUT
        if record and (k % stride == 0) and status != NONFINITE:
            _record(buf, n_rows, t, s, cmd)
            n_rows += 1
        if status != RUNNING:
            break
        prev, prev_tgo = s, tgo
        s = _advance(s, cmd[0], cmd[1], cmd[2], cmd[3], dt, integrator, p.v_d_min, p.v_d_max)
        k += 1
    return buf, n_rows, status, t_event, margin, min_r_dp, min_r_ep, k * dt


# ---------------------------------------------------------------------------
# Python surface
# ---------------------------------------------------------------------------

def pack_states(states) -> np.ndarray:
    """(P, E, D) AgentStates -> flat kernel state vector."""
    return np.array([q for s in states for q in (s.x, s.y, s.gamma, s.v)], dtype=float)


def unpack_states(vec) -> tuple[AgentState, AgentState, AgentState]:
    return tuple(AgentState(*(float(q) for q in vec[4 * i:4 * i + 4])) for i in range(3))


def apply_saturation(cmd: GuidanceCommand, limit: float) -> GuidanceCommand:
    """Clamp the total magnitude to ``limit`` keeping the direction."""
    if not limit > 0.0:
        raise ValueError("limit must be positive")
    mag = cmd.a_total
    if mag <= limit:
        return cmd
    scale = limit / mag
    return GuidanceCommand(cmd.a_lateral * scale, cmd.a_radial * scale)


def compute_commands(states, cfg: gd.GuidanceConfig) -> dict:
    """Guidance commands and diagnostics for one (P, E, D) state triple."""
    out = _commands(pack_states(states), gd.law_params(cfg))
    return dict(zip(COLUMNS[25:], out))


def step(states, cfg: gd.GuidanceConfig, dt: float, integrator: str = "rk4"):
    """Advance (P, E, D) by one step with commands held from the current state."""
    s = pack_states(states)
    p = gd.law_params(cfg)
    cmd = _commands(s, p)
    new = _advance(s, cmd[0], cmd[1], cmd[2], cmd[3], dt,
                   RK4 if integrator == "rk4" else EULER, p.v_d_min, p.v_d_max)
    if not np.all(np.isfinite(new)):
        raise PropagationError("non-finite state after step",
                               snapshot=dict(zip(COLUMNS[1:13], s.tolist())))
    return unpack_states(new)


_STATUS = {
    DEFENDER_WINS: Verdict.DEFENDER_WINS,
    PURSUER_WINS: Verdict.PURSUER_WINS,
    TIMEOUT: Verdict.TIMEOUT,
    DEGENERATE: Verdict.DEGENERATE,
}


def simulate_states(states, cfg: gd.GuidanceConfig, sim: SimConfig,
                    record: bool = True) -> tuple[SimTrace, Outcome]:
    """Run the closed loop from explicit initial states (P, E, D)."""
    s0 = pack_states(states)
    buf, n_rows, status, t_ev, margin, min_dp, min_ep, t_end = run_kernel(
        s0, gd.law_params(cfg), float(sim.dt), float(sim.t_max), float(sim.capture_radius),
        RK4 if sim.integrator == "rk4" else EULER, int(sim.record_stride), record)
    trace = SimTrace(buf[:n_rows].copy())
    if status == NONFINITE:
        snap = dict(zip(COLUMNS, buf[n_rows - 1].tolist())) if n_rows else None
        raise PropagationError(f"non-finite state near t={t_end:.6g} s", snapshot=snap)
    verdict = _STATUS[status]
    out = Outcome(verdict, min_r_DP=float(min_dp), min_r_EP=float(min_ep), t_end=float(t_end))
    if verdict in (Verdict.DEFENDER_WINS, Verdict.PURSUER_WINS):
        out.t_intercept = float(t_ev)
    if verdict is Verdict.DEFENDER_WINS and math.isfinite(margin):
        out.achieved_margin = float(margin)
    if verdict is Verdict.DEGENERATE:
        out.message = "coincident agents; line of sight undefined"
    return trace, out
