"""Random feasible engagements with gains that satisfy the fixed-time premise."""

import numpy as np

from adsim.experiments import ScenarioConfig, validate
from adsim.guidance import GainSet, GuidanceConfig
from adsim.simcore import SimConfig

EVADER = GainSet(0.05, 0.005, 0.3, 2.0, 1.0)
DEFENDER = GainSet(0.05, 1.2, 0.3, 2.0, 1.0)
S1_BAND = 1e-3  # rad/s
S2_BAND = 0.1  # s


def random_scenario(rng: np.random.Generator) -> ScenarioConfig:
    lam_ep = rng.uniform(-60.0, -30.0)
    v_d = rng.uniform(350.0, 420.0)
    return ScenarioConfig(
        r_EP=rng.uniform(18000.0, 26000.0), lambda_EP_deg=lam_ep,
        r_DE=rng.uniform(500.0, 3000.0), lambda_DE_deg=rng.uniform(0.0, 90.0),
        gamma_E_deg=rng.uniform(-10.0, 40.0),
        gamma_P_deg=lam_ep + 180.0 + rng.uniform(-20.0, 20.0),
        gamma_D_deg=lam_ep + rng.uniform(-30.0, 30.0), v_D=v_d,
        guidance=GuidanceConfig(evader_gains=EVADER, defender_gains=DEFENDER, c=v_d + 375.0),
        sim=SimConfig(dt=1e-3, t_max=120.0))


def feasible_scenarios(n: int, seed: int) -> list[ScenarioConfig]:
    """``n`` draws that pass static validation (closing pursuer, admissible tau)."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        s = random_scenario(rng)
        if not validate(s):
            out.append(s)
    return out


def first_entry(t: np.ndarray, s: np.ndarray, band: float) -> float | None:
    inside = np.abs(s) < band
    return float(t[np.argmax(inside)]) if inside.any() else None
