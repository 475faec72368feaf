"""Cooperative evader/defender guidance laws and pursuer PN variants.

The evader nulls its LOS rate to the pursuer (manifold ``s1 = lam_dot_EP``),
which makes the pursuer's capture time predictable. The defender flies true
proportional navigation with a correction that drives

    s2 = tgo_DP - (tgo_EP - tau)

to zero, so the pursuer is intercepted ``tau`` seconds before it would reach
the evader. Both corrections use the fixed-time reaching law
``(zeta |s|^alpha + xi |s|^beta)^kappa`` plus a robustness term ``epsilon``.

Kernels take plain floats and are compiled with numba; the dataclass wrappers
at the bottom of the module are the convenient public surface.
"""

from __future__ import annotations

import math
import warnings
from collections import namedtuple
from dataclasses import dataclass, field, replace

from numba import njit

from .kinematics import G0, DegenerateGeometryError, GuidanceCommand, PairState

PURSUER_STRATEGIES = ("pure-PN", "realistic-TPN", "augmented-PN", "none")
DEFENDER_MODES = ("with-evader-access", "without-evader-access")

# kernel-level enums
PURE_PN, RTPN, APN, NO_GUIDANCE = 0, 1, 2, 3


class GainConditionError(ValueError):
    """Exponents violate alpha*kappa < 1 < beta*kappa."""


# ---------------------------------------------------------------------------
# scalar kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def smooth_sign_kernel(s, width):
    if width <= 0.0:
        if s > 0.0:
            return 1.0
        if s < 0.0:
            return -1.0
        return 0.0
    q = s / width
    if q > 1.0:
        return 1.0
    if q < -1.0:
        return -1.0
    return q


@njit(cache=True)
def floor_signed(x, floor):
    """Keep the sign of ``x`` but lift its magnitude to at least ``floor``."""
    if abs(x) >= floor:
        return x
    if x < 0.0:
        return -floor
    return floor


@njit(cache=True)
def clamp(x, lo, hi):
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


@njit(cache=True)
def reaching_term(s, zeta, xi, alpha, beta, kappa):
    a = abs(s)
    return (zeta * a ** alpha + xi * a ** beta) ** kappa


@njit(cache=True)
def tgo_ep_kernel(r, d_ep, d_pe, v_e, v_p):
    """Collision-course capture time; +inf when the pursuer is not closing."""
    den = v_e * math.cos(d_ep) - v_p * math.cos(d_pe)
    if den <= 0.0:
        return math.inf
    return r / den


@njit(cache=True)
def tgo_dp_kernel(r, d_dp, d_pd, v_d, v_p, r_dot, c):
    """True-PN interception time; NaN when the denominator vanishes."""
    den = (v_d * v_d + v_p * v_p - 2.0 * v_p * v_d * math.cos(d_pd - d_dp)
           + 2.0 * c * r_dot)
    if abs(den) < 1e-9 * (v_d + v_p) ** 2:
        return math.nan
    return -r * (v_p * math.cos(d_pd) - v_d * math.cos(d_dp) + 2.0 * c) / den


@njit(cache=True)
def epsilon_bounds_kernel(r_dp, r_ep, v_p, v_e, v_d, c, a_p_max, a_e_max, r_floor):
    """Right-hand sides of the three epsilon gain conditions at one instant."""
    r_ep_f = max(r_ep, r_floor)
    eps1 = a_p_max / r_ep_f
    spd = v_p + v_d
    ep_term = r_ep / (v_p + v_e) ** 2
    eps2 = ((spd * spd + 4.0 * r_dp * c * c + r_dp * v_d * (4.0 * c + v_d + v_p))
            / (2.0 * spd * spd + 2.0 * c * spd) ** 2 + ep_term) * a_p_max
    # term grouping of the without-access bound is kept exactly as derived
    eps3 = ((r_dp * spd * spd + 4.0 * c * c * r_dp + (4.0 * c + spd) * r_dp)
            / ((1.0 + r_dp) * spd * spd + 2.0 * c * spd) ** 2 + ep_term) * a_p_max \
        + ep_term * a_e_max
    return eps1, eps2, eps3


@njit(cache=True)
def evader_kernel(r, r_dot, lam_dot, d_ep, zeta, xi, alpha, beta, kappa, eps,
                  width, cos_floor, a_max):
    """Evader lateral acceleration, saturated to +-a_max."""
    s1 = lam_dot
    cd = floor_signed(math.cos(d_ep), cos_floor)
    sw = smooth_sign_kernel(s1, width)
    a = -2.0 * r_dot * lam_dot / cd
    if sw != 0.0:
        a += (r / cd) * (reaching_term(s1, zeta, xi, alpha, beta, kappa) + eps / cd) * sw
    return clamp(a, -a_max, a_max)


@njit(cache=True)
def defender_terms_kernel(r_dp, r_dot_dp, lam_dot_dp, d_dp,
                          r_ep, r_dot_ep, lam_dot_ep, d_ep,
                          a_e, s2, c, zeta, xi, alpha, beta, kappa, eps,
                          width, lam_dot_floor, cos_floor):
    """Unsaturated defender law split into its four additive terms.

    Returns (lead, los_term, a_e_term, switching). The a_E feed-through is
    returned separately so callers without evader information can drop it.
    """
    lam_reg = floor_signed(lam_dot_dp, lam_dot_floor)
    den_c = floor_signed(r_dot_dp + 2.0 * c, lam_dot_floor * 2.0 * c)
    w = r_dot_dp * r_dot_dp + r_dp * r_dp * lam_dot_dp * lam_dot_dp + 2.0 * c * r_dot_dp
    # the printed r_PD^2 in the a_E term is read as r_DP^2; the range is symmetric
    k = w * w / (2.0 * r_dp * r_dp * lam_reg * den_c)
    rdep2 = r_dot_ep * r_dot_ep
    lead = c * lam_dot_dp
    los_term = -(r_ep * r_ep / rdep2) * k * lam_dot_ep * lam_dot_ep
    a_e_term = -(r_ep * math.sin(d_ep) / rdep2) * k * a_e
    sw = smooth_sign_kernel(s2, width)
    switching = 0.0
    if sw != 0.0:
        cd = floor_signed(math.cos(d_dp), cos_floor)
        switching = k * (reaching_term(s2, zeta, xi, alpha, beta, kappa) + eps / cd) * sw
    return lead, los_term, a_e_term, switching


@njit(cache=True)
def pursuer_kernel(strategy, n_nav, k_p, apn_sign, v_p, r_dot_ep, lam_dot_ep, a_e, a_max):
    if strategy == PURE_PN:
        a = n_nav * v_p * lam_dot_ep
    elif strategy == RTPN:
        a = -n_nav * r_dot_ep * lam_dot_ep
    elif strategy == APN:
        a = apn_sign * n_nav * v_p * lam_dot_ep + k_p * a_e
    else:
        a = 0.0
    return clamp(a, -a_max, a_max)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GainSet:
    """Reaching-law gains for one sliding manifold.

    ``epsilon=None`` means the robustness gain is re-evaluated every step from
    its sufficient condition (times ``GuidanceConfig.eps_safety``).
    """

    zeta: float
    xi: float
    alpha: float
    beta: float
    kappa: float = 1.0
    epsilon: float | None = None

    def __post_init__(self):
        for name in ("zeta", "xi", "alpha", "beta", "kappa"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.epsilon is not None and self.epsilon < 0.0:
            raise ValueError("epsilon must be non-negative")

    @property
    def fixed_time_ok(self) -> bool:
        return self.alpha * self.kappa < 1.0 < self.beta * self.kappa

    def condition_findings(self, label: str) -> list[str]:
        out = []
        if not self.alpha * self.kappa < 1.0:
            out.append(f"{label}: alpha*kappa = {self.alpha * self.kappa:g} >= 1 "
                       "violates the fixed-time premise")
        if not self.beta * self.kappa > 1.0:
            out.append(f"{label}: beta*kappa = {self.beta * self.kappa:g} <= 1 "
                       "violates the fixed-time premise")
        return out


@dataclass(frozen=True)
class GuidanceConfig:
    evader_gains: GainSet = field(default_factory=lambda: GainSet(0.05, 0.005, 0.3, 2.0, 1.0))
    defender_gains: GainSet = field(default_factory=lambda: GainSet(0.05, 1.2, 0.3, 2.0, 1.0))
    c: float = 1550.0
    tau: float = 5.0
    N: float = 5.0
    k_P: float = 1.0
    apn_sign: float = 1.0  # -1 selects the caption form of augmented PN
    a_E_max: float = 5.0 * G0
    a_P_max: float = 40.0 * G0
    a_D_max: float = 40.0 * G0
    sign_boundary_layer: float = 1e-3
    lambda_dot_floor: float = 1e-4
    cos_floor: float = 1e-3
    eps_safety: float = 1.2
    r_floor: float = 10.0
    v_D_min: float = 50.0
    v_D_max: float = 600.0
    defender_mode: str = "with-evader-access"
    pursuer_strategy: str = "pure-PN"

    def __post_init__(self):
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")
        if not self.c > 0.0:
            raise ValueError("c must be positive")
        for name in ("a_E_max", "a_P_max", "a_D_max"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.sign_boundary_layer < 0.0:
            raise ValueError("sign_boundary_layer must be >= 0")
        if not 0.0 < self.v_D_min < self.v_D_max:
            raise ValueError("need 0 < v_D_min < v_D_max")
        if self.defender_mode not in DEFENDER_MODES:
            raise ValueError(f"unknown defender_mode {self.defender_mode!r}")
        if self.pursuer_strategy not in PURSUER_STRATEGIES:
            raise ValueError(f"unknown pursuer_strategy {self.pursuer_strategy!r}")
        if self.apn_sign not in (1.0, -1.0):
            raise ValueError("apn_sign must be +1 or -1")
        for label, g in (("evader", self.evader_gains), ("defender", self.defender_gains)):
            for msg in g.condition_findings(label):
                warnings.warn(msg, GainConditionWarning, stacklevel=3)

    def replace(self, **kw) -> "GuidanceConfig":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", GainConditionWarning)
            return replace(self, **kw)

    @property
    def with_access(self) -> bool:
        return self.defender_mode == "with-evader-access"


class GainConditionWarning(UserWarning):
    pass


LawParams = namedtuple("LawParams", [
    "ze", "xe", "ae", "be", "ke", "eps_e",
    "zd", "xd", "ad", "bd", "kd", "eps_d",
    "c", "tau", "n_nav", "k_p", "apn_sign",
    "a_e_max", "a_p_max", "a_d_max",
    "width", "lam_dot_floor", "cos_floor", "eps_safety", "r_floor",
    "v_d_min", "v_d_max", "with_access", "strategy",
])


def law_params(cfg: GuidanceConfig) -> LawParams:
    """Flatten a config into the float/int tuple consumed by the kernels."""
    e, d = cfg.evader_gains, cfg.defender_gains
    nan = math.nan
    return LawParams(
        float(e.zeta), float(e.xi), float(e.alpha), float(e.beta), float(e.kappa),
        nan if e.epsilon is None else float(e.epsilon),
        float(d.zeta), float(d.xi), float(d.alpha), float(d.beta), float(d.kappa),
        nan if d.epsilon is None else float(d.epsilon),
        float(cfg.c), float(cfg.tau), float(cfg.N), float(cfg.k_P), float(cfg.apn_sign),
        float(cfg.a_E_max), float(cfg.a_P_max), float(cfg.a_D_max),
        float(cfg.sign_boundary_layer), float(cfg.lambda_dot_floor), float(cfg.cos_floor),
        float(cfg.eps_safety), float(cfg.r_floor),
        float(cfg.v_D_min), float(cfg.v_D_max),
        1 if cfg.with_access else 0,
        PURSUER_STRATEGIES.index(cfg.pursuer_strategy),
    )


# ---------------------------------------------------------------------------
# public surface
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifoldSnapshot:
    s1: float
    s2: float
    tgo_EP: float
    tgo_DP: float


def manifolds(pair_EP: PairState, tgo_EP: float, tgo_DP: float, tau: float) -> ManifoldSnapshot:
    return ManifoldSnapshot(pair_EP.lam_dot, tgo_DP - tgo_EP + tau, tgo_EP, tgo_DP)


def smooth_sign(s: float, boundary_layer: float) -> float:
    """sign(s) with sign(0) = 0, or a linear ramp of half-width ``boundary_layer``."""
    if boundary_layer < 0.0:
        raise ValueError("boundary_layer must be >= 0")
    return smooth_sign_kernel(s, boundary_layer)


def tgo_EP(pair_EP: PairState, v_E: float, v_P: float) -> float:
    """Evader capture time on a collision course (+inf if not closing)."""
    return tgo_ep_kernel(pair_EP.r, pair_EP.delta_ij, pair_EP.delta_ji, v_E, v_P)


def tgo_DP(pair_DP: PairState, v_D: float, v_P: float, c: float) -> float:
    """True-PN defender interception time (NaN at a singular denominator)."""
    return tgo_dp_kernel(pair_DP.r, pair_DP.delta_ij, pair_DP.delta_ji,
                         v_D, v_P, pair_DP.r_dot, c)


def settling_bound(g: GainSet) -> float:
    """Upper bound on the fixed-time settling instant of the reaching law."""
    ak, bk = g.alpha * g.kappa, g.beta * g.kappa
    if not (ak < 1.0 < bk):
        raise GainConditionError(f"need alpha*kappa < 1 < beta*kappa, got {ak:g}, {bk:g}")
    return 1.0 / (g.zeta ** g.kappa * (1.0 - ak)) + 1.0 / (g.xi ** g.kappa * (bk - 1.0))


def epsilon_bounds(pair_DP: PairState, pair_EP: PairState, v_P: float, v_E: float,
                   v_D: float, c: float, a_P_max: float, a_E_max: float,
                   r_floor: float = 10.0) -> tuple[float, float, float]:
    """Minimum epsilon for the evader law, the defender law with and without a_E."""
    return epsilon_bounds_kernel(pair_DP.r, pair_EP.r, v_P, v_E, v_D, c,
                                 a_P_max, a_E_max, r_floor)


def tau_feasible(r_DP0: float, v_D_max: float, v_P: float, tgo_EP0: float,
                 t2: float, tau: float) -> bool:
    """Conservative admissibility test for the time margin."""
    return tau < min(r_DP0 / (v_D_max + v_P), tgo_EP0 - t2)


def _resolve_eps(fixed, required, safety):
    return required * safety if fixed is None else fixed


def evader_accel(pair_EP: PairState, gains: GainSet, a_P_max: float, *,
                 a_E_max: float = 5.0 * G0, boundary_layer: float = 0.0,
                 cos_floor: float = 1e-3, eps_safety: float = 1.2,
                 r_floor: float = 10.0) -> GuidanceCommand:
    """LOS-rate nulling evader command (lateral only, saturated)."""
    if not pair_EP.r > 0.0:
        raise DegenerateGeometryError("r_EP must be positive")
    eps = _resolve_eps(gains.epsilon, a_P_max / max(pair_EP.r, r_floor), eps_safety)
    a = evader_kernel(pair_EP.r, pair_EP.r_dot, pair_EP.lam_dot, pair_EP.delta_ij,
                      gains.zeta, gains.xi, gains.alpha, gains.beta, gains.kappa, eps,
                      boundary_layer, cos_floor, a_E_max)
    return GuidanceCommand(a)


def pursuer_accel(pair_EP: PairState, a_E: float, cfg: GuidanceConfig,
                  v_P: float) -> GuidanceCommand:
    """Selected PN-family pursuer command, saturated to a_P_max."""
    a = pursuer_kernel(PURSUER_STRATEGIES.index(cfg.pursuer_strategy), cfg.N, cfg.k_P,
                       cfg.apn_sign, v_P, pair_EP.r_dot, pair_EP.lam_dot, a_E, cfg.a_P_max)
    return GuidanceCommand(a)


def defender_total(pair_DP: PairState, pair_EP: PairState, a_E: float,
                   cfg: GuidanceConfig, v_P: float, v_E: float, v_D: float,
                   with_access: bool, *, boundary_layer: float | None = None,
                   saturate: bool = True) -> tuple[float, bool]:
    """Signed total defender acceleration and whether the TPN fallback fired."""
    if not pair_DP.r > 0.0:
        raise DegenerateGeometryError("r_DP must be positive")
    width = cfg.sign_boundary_layer if boundary_layer is None else boundary_layer
    t_ep = tgo_EP(pair_EP, v_E, v_P)
    t_dp = tgo_DP(pair_DP, v_D, v_P, cfg.c)
    if not (math.isfinite(t_ep) and math.isfinite(t_dp)):
        a = cfg.c * pair_DP.lam_dot
        fallback = True
    else:
        s2 = t_dp - t_ep + cfg.tau
        _, eps2, eps3 = epsilon_bounds(pair_DP, pair_EP, v_P, v_E, v_D, cfg.c,
                                       cfg.a_P_max, cfg.a_E_max, cfg.r_floor)
        eps = _resolve_eps(cfg.defender_gains.epsilon, eps2 if with_access else eps3,
                           cfg.eps_safety)
        g = cfg.defender_gains
        lead, los_term, a_e_term, sw = defender_terms_kernel(
            pair_DP.r, pair_DP.r_dot, pair_DP.lam_dot, pair_DP.delta_ij,
            pair_EP.r, pair_EP.r_dot, pair_EP.lam_dot, pair_EP.delta_ij,
            a_E, s2, cfg.c, g.zeta, g.xi, g.alpha, g.beta, g.kappa, eps,
            width, cfg.lambda_dot_floor, cfg.cos_floor)
        a = lead + los_term + sw + (a_e_term if with_access else 0.0)
        fallback = False
    if saturate:
        a = clamp(a, -cfg.a_D_max, cfg.a_D_max)
    return a, fallback


def defender_accel_with_access(pair_DP: PairState, pair_EP: PairState, a_E: float,
                               cfg: GuidanceConfig, v_P: float, v_E: float,
                               v_D: float) -> GuidanceCommand:
    """Defender command using the evader's acceleration, split along the LOS normal."""
    a, _ = defender_total(pair_DP, pair_EP, a_E, cfg, v_P, v_E, v_D, True)
    return GuidanceCommand.from_total(a, pair_DP.delta_ij)


def defender_accel_without_access(pair_DP: PairState, pair_EP: PairState,
                                  cfg: GuidanceConfig, v_P: float, v_E: float,
                                  v_D: float) -> GuidanceCommand:
    """Defender command when the evader's acceleration is not shared."""
    a, _ = defender_total(pair_DP, pair_EP, 0.0, cfg, v_P, v_E, v_D, False)
    return GuidanceCommand.from_total(a, pair_DP.delta_ij)
