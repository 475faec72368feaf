"""Scenario definitions, the six published case studies, and Monte-Carlo batches.

Scenario geometry is given the way the case studies quote it: the evader sits
at the origin, the pursuer at range ``r_EP`` along the evader-to-pursuer LOS
angle ``lambda_EP_deg``, and the defender at range ``r_DE`` *behind* the
defender-to-evader LOS angle ``lambda_DE_deg``. Angles are degrees in configs
and radians everywhere else.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import statistics
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .guidance import (GainConditionWarning, GainSet, GuidanceConfig, settling_bound,
                       tau_feasible, tgo_EP)
from .kinematics import G0, AgentState, relative_state
from .simcore import Outcome, PropagationError, SimConfig, SimTrace, Verdict, simulate_states

D2R = math.pi / 180.0
MIN_SEPARATION = 1.0  # m; zero-range draws are nudged out to this


@dataclass(frozen=True)
class ScenarioConfig:
    r_EP: float = 15000.0
    lambda_EP_deg: float = -45.0
    r_DE: float = 1000.0
    lambda_DE_deg: float = 45.0
    gamma_E_deg: float = 30.0
    gamma_P_deg: float = 165.0
    gamma_D_deg: float = 0.0
    v_E: float = 100.0
    v_P: float = 375.0
    v_D: float = 400.0
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    sim: SimConfig = field(default_factory=SimConfig)

    def __post_init__(self):
        for name in ("v_E", "v_P", "v_D"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        for name in ("r_EP", "r_DE"):
            if not getattr(self, name) >= 0.0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("lambda_EP_deg", "lambda_DE_deg", "gamma_E_deg", "gamma_P_deg",
                     "gamma_D_deg"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def initial_states(self) -> tuple[AgentState, AgentState, AgentState]:
        """(P, E, D) at t = 0."""
        r_de = max(self.r_DE, MIN_SEPARATION)
        r_ep = max(self.r_EP, MIN_SEPARATION)
        le, ld = self.lambda_EP_deg * D2R, self.lambda_DE_deg * D2R
        e = AgentState(0.0, 0.0, self.gamma_E_deg * D2R, self.v_E)
        p = AgentState(r_ep * math.cos(le), r_ep * math.sin(le), self.gamma_P_deg * D2R, self.v_P)
        d = AgentState(-r_de * math.cos(ld), -r_de * math.sin(ld), self.gamma_D_deg * D2R, self.v_D)
        return p, e, d

    def replace(self, **kw) -> "ScenarioConfig":
        """Copy with changes; keys naming guidance or sim fields are routed there."""
        g_kw = {k: kw.pop(k) for k in list(kw) if k in _GUIDANCE_FIELDS}
        s_kw = {k: kw.pop(k) for k in list(kw) if k in _SIM_FIELDS}
        if g_kw:
            kw["guidance"] = self.guidance.replace(**g_kw)
        if s_kw:
            kw["sim"] = dataclasses.replace(self.sim, **s_kw)
        return dataclasses.replace(self, **kw)

    # -- serialisation ----------------------------------------------------
    def to_dict(self) -> dict:
        scen = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)
                if f.name not in ("guidance", "sim")}
        g = dataclasses.asdict(self.guidance)
        return {"scenario": scen, "guidance": g, "sim": dataclasses.asdict(self.sim)}

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        unknown = set(doc) - {"scenario", "guidance", "sim"}
        if unknown:
            raise ValueError(f"unknown top-level keys: {sorted(unknown)}")
        scen = dict(doc.get("scenario", {}))
        _check_keys("scenario", scen, _SCENARIO_FIELDS)
        g = dict(doc.get("guidance", {}))
        _check_keys("guidance", g, _GUIDANCE_FIELDS)
        for key in ("evader_gains", "defender_gains"):
            if key in g:
                _check_keys(f"guidance.{key}", g[key], _GAIN_FIELDS)
                g[key] = GainSet(**g[key])
        sim = dict(doc.get("sim", {}))
        _check_keys("sim", sim, _SIM_FIELDS)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", GainConditionWarning)
            guidance = GuidanceConfig(**g)
        return cls(**scen, guidance=guidance, sim=SimConfig(**sim))


_SCENARIO_FIELDS = {f.name for f in dataclasses.fields(ScenarioConfig)} - {"guidance", "sim"}
_GUIDANCE_FIELDS = {f.name for f in dataclasses.fields(GuidanceConfig)}
_SIM_FIELDS = {f.name for f in dataclasses.fields(SimConfig)}
_GAIN_FIELDS = {f.name for f in dataclasses.fields(GainSet)}


def _check_keys(section, got, allowed):
    extra = set(got) - allowed
    if extra:
        raise ValueError(f"{section}: unknown keys {sorted(extra)}")


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return ScenarioConfig.from_dict(json.load(fh))


def simulate(scenario: ScenarioConfig, record: bool = True) -> tuple[SimTrace, Outcome]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GainConditionWarning)
        return simulate_states(scenario.initial_states(), scenario.guidance, scenario.sim,
                               record=record)


# ---------------------------------------------------------------------------
# published case studies
# ---------------------------------------------------------------------------

# Values the case studies leave open; see README "Assumed parameters".
DEFENDER_EPSILON = 0.3
T_MAX = 90.0


def _guidance(strategy, mode, zeta2, xi2, beta2, alpha2, v_d, v_p=375.0):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GainConditionWarning)
        return GuidanceConfig(
            evader_gains=GainSet(zeta=0.05, xi=0.005, alpha=0.3, beta=2.0, kappa=1.0),
            defender_gains=GainSet(zeta=zeta2, xi=xi2, alpha=alpha2, beta=beta2, kappa=1.0,
                                   epsilon=DEFENDER_EPSILON),
            c=v_d + v_p, tau=5.0, N=5.0, k_P=1.0,
            a_E_max=5 * G0, a_P_max=40 * G0, a_D_max=40 * G0,
            defender_mode=mode, pursuer_strategy=strategy)


def _case(strategy, mode, *, zeta2, xi2, alpha2=0.3, beta2=2.0, v_d, r_de, lam_de,
          g_e, g_d):
    return ScenarioConfig(
        r_EP=15000.0, lambda_EP_deg=-45.0, r_DE=r_de, lambda_DE_deg=lam_de,
        gamma_E_deg=g_e, gamma_P_deg=165.0, gamma_D_deg=g_d,
        v_E=100.0, v_P=375.0, v_D=v_d,
        guidance=_guidance(strategy, mode, zeta2, xi2, beta2, alpha2, v_d),
        sim=SimConfig(dt=1e-3, t_max=T_MAX, capture_radius=3.0))


WITH, WITHOUT = "with-evader-access", "without-evader-access"

PRESETS = {
    "ppn-with-access": lambda: _case(
        "pure-PN", WITH, zeta2=0.05, xi2=0.05, beta2=0.8, v_d=400.0,
        r_de=1000.0, lam_de=45.0, g_e=30.0, g_d=0.0),
    "rtpn-with-access": lambda: _case(
        "realistic-TPN", WITH, zeta2=0.05, xi2=1.2, beta2=2.0, v_d=370.0,
        r_de=3000.0, lam_de=0.0, g_e=-5.0, g_d=-30.0),
    "apn-with-access": lambda: _case(
        "augmented-PN", WITH, zeta2=0.01, xi2=0.07, alpha2=0.99, v_d=370.0,
        r_de=0.0, lam_de=45.0, g_e=60.0, g_d=-15.0),
    "ppn-without-access": lambda: _case(
        "pure-PN", WITHOUT, zeta2=0.05, xi2=0.99, v_d=400.0,
        r_de=2000.0, lam_de=60.0, g_e=30.0, g_d=-15.0),
    "rtpn-without-access": lambda: _case(
        "realistic-TPN", WITHOUT, zeta2=0.1275, xi2=1.8, v_d=400.0,
        r_de=1500.0, lam_de=110.0, g_e=-5.0, g_d=0.0),
    "apn-without-access": lambda: _case(
        "augmented-PN", WITHOUT, zeta2=0.01, xi2=0.06, v_d=400.0,
        r_de=500.0, lam_de=45.0, g_e=60.0, g_d=-15.0),
}


def preset(name: str) -> ScenarioConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def validate(scenario: ScenarioConfig) -> list[tuple[str, str]]:
    """Static checks: (severity, message) pairs, severity in {"error", "warning"}."""
    out: list[tuple[str, str]] = []
    g = scenario.guidance
    for label, gains in (("evader gains", g.evader_gains), ("defender gains", g.defender_gains)):
        out += [("warning", m) for m in gains.condition_findings(label)]
    p, e, d = scenario.initial_states()
    pair_ep = relative_state(e, p)
    pair_dp = relative_state(d, p)
    t_ep0 = tgo_EP(pair_ep, e.v, p.v)
    if not math.isfinite(t_ep0):
        out.append(("warning", "pursuer is not closing on the evader at t=0"))
    if g.defender_gains.fixed_time_ok:
        t2 = settling_bound(g.defender_gains)
        if math.isfinite(t_ep0) and not tau_feasible(pair_dp.r, g.v_D_max, p.v, t_ep0, t2, g.tau):
            bound = min(pair_dp.r / (g.v_D_max + p.v), t_ep0 - t2)
            out.append(("warning", f"tau = {g.tau:g} s exceeds the conservative margin bound "
                                   f"min(r_DP(0)/(v_D_max+v_P), tgo_EP(0)-t2) = {bound:.3g} s"))
    if not g.v_D_min <= scenario.v_D <= g.v_D_max:
        out.append(("error", f"v_D = {scenario.v_D} outside [{g.v_D_min}, {g.v_D_max}]"))
    if scenario.r_DE < MIN_SEPARATION:
        out.append(("warning", f"r_DE = {scenario.r_DE} m nudged to {MIN_SEPARATION} m"))
    return out


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class McParam:
    name: str
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"{self.name}: need lo < hi")


@dataclass(frozen=True)
class McSpec:
    n_runs: int
    seed: int
    params: tuple[McParam, ...]
    base: ScenarioConfig = field(default_factory=ScenarioConfig)
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if int(self.n_runs) < 1:
            raise ValueError("n_runs must be >= 1")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")
        allowed = _SCENARIO_FIELDS | {"tau"}
        for prm in self.params:
            if prm.name not in allowed:
                raise ValueError(f"cannot sample {prm.name!r}")

    def to_dict(self) -> dict:
        return {"n_runs": self.n_runs, "seed": self.seed,
                "params": [dataclasses.asdict(q) for q in self.params],
                "base": self.base.to_dict(), "notes": list(self.notes)}

    @classmethod
    def from_dict(cls, doc: dict) -> "McSpec":
        _check_keys("mc spec", doc, {"n_runs", "seed", "params", "base", "notes"})
        return cls(n_runs=int(doc["n_runs"]), seed=int(doc["seed"]),
                   params=tuple(McParam(**q) for q in doc["params"]),
                   base=ScenarioConfig.from_dict(doc.get("base", {})),
                   notes=tuple(doc.get("notes", ())))


def draw(spec: McSpec, index: int) -> dict[str, float]:
    """Sampled values of run ``index``; a pure function of (seed, index)."""
    gen = np.random.Generator(np.random.Philox(key=int(spec.seed), counter=int(index)))
    u = gen.random(len(spec.params))
    return {q.name: q.lo + (q.hi - q.lo) * float(x) for q, x in zip(spec.params, u)}


def sample(spec: McSpec) -> list[ScenarioConfig]:
    return [spec.base.replace(**draw(spec, i)) for i in range(spec.n_runs)]


@dataclass
class RunRecord:
    index: int
    values: dict
    verdict: str
    t_intercept: float | None
    achieved_margin: float | None
    min_r_DP: float
    min_r_EP: float


@dataclass
class McReport:
    n_runs: int
    wins: int
    runs: list[RunRecord]
    notes: tuple[str, ...] = ()

    @property
    def win_rate(self) -> float:
        return self.wins / self.n_runs

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.wins, self.n_runs)

    def summary(self) -> dict:
        lo, hi = self.interval
        counts = {v.value: 0 for v in Verdict}
        for r in self.runs:
            counts[r.verdict] += 1
        return {"n_runs": self.n_runs, "wins": self.wins, "win_rate": self.win_rate,
                "wilson95": [lo, hi], "verdicts": counts, "notes": list(self.notes)}

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        names = list(self.runs[0].values) if self.runs else []
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", *names, "verdict", "t_intercept", "achieved_margin",
                    "min_r_DP", "min_r_EP"])
        fmt = lambda v: "" if v is None else f"{v:.9g}"
        for r in self.runs:
            w.writerow([r.index, *(fmt(r.values[n]) for n in names), r.verdict,
                        fmt(r.t_intercept), fmt(r.achieved_margin),
                        fmt(r.min_r_DP), fmt(r.min_r_EP)])
        return buf.getvalue()


def wilson_interval(k: int, n: int, conf: float = 0.95) -> tuple[float, float]:
    z = statistics.NormalDist().inv_cdf(0.5 + conf / 2.0)
    p = k / n
    den = 1.0 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


def _run_one(spec: McSpec, index: int) -> RunRecord:
    values = draw(spec, index)
    scen = spec.base.replace(**values)
    try:
        _, out = simulate(scen, record=False)
    except PropagationError as exc:
        out = Outcome(Verdict.DEGENERATE, message=str(exc))
    return RunRecord(index, values, out.verdict.value, out.t_intercept, out.achieved_margin,
                     out.min_r_DP, out.min_r_EP)


def _run_chunk(spec: McSpec, indices: list[int]) -> list[RunRecord]:
    return [_run_one(spec, i) for i in indices]


def default_jobs() -> int:
    env = os.environ.get("AD_SIM_THREADS")
    return max(1, int(env)) if env else 1


def run_batch(spec: McSpec, jobs: int | None = None) -> McReport:
    """Run every draw of ``spec``; any worker count yields the same report."""
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    idx = list(range(spec.n_runs))
    if jobs == 1:
        runs = _run_chunk(spec, idx)
    else:
        chunks = [idx[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_chunk, [spec] * jobs, chunks))
        runs = sorted((r for part in parts for r in part), key=lambda r: r.index)
    wins = sum(r.verdict == Verdict.DEFENDER_WINS.value for r in runs)
    return McReport(spec.n_runs, wins, runs, spec.notes)


def _mc_base() -> ScenarioConfig:
    base = preset("ppn-with-access")
    gains = dataclasses.replace(base.guidance.defender_gains, epsilon=None)
    return base.replace(gamma_E_deg=-5.0, defender_gains=gains)


MC_NOTES = (
    "pursuer strategy: pure PN (not stated for the Monte-Carlo studies)",
    "lambda_DE = 45 deg and unsampled defender settings follow the first case study",
    "defender epsilon is scaled online from its sufficiency bound",
)

MC_PRESETS = {
    "mc1": lambda: McSpec(1100, 1, (McParam("r_DE", 0.0, 3300.0),
                                     McParam("gamma_D_deg", -120.0, 15.0)),
                          _mc_base(), MC_NOTES),
    "mc2": lambda: McSpec(1100, 2, (McParam("r_EP", 7000.0, 15000.0),
                                     McParam("gamma_P_deg", 120.0, 220.0)),
                          _mc_base(), MC_NOTES),
    "mc3": lambda: McSpec(1100, 3, (McParam("r_DE", 0.0, 3000.0),
                                     McParam("tau", 3.0, 6.0)),
                          _mc_base(), MC_NOTES),
}


def mc_preset(name: str) -> McSpec:
    try:
        return MC_PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown Monte-Carlo preset {name!r}; choose from {sorted(MC_PRESETS)}") from None
