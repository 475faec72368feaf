import dataclasses
import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adsim.experiments import (MC_PRESETS, PRESETS, McParam, McSpec, ScenarioConfig, draw,
                               load_config, mc_preset, preset, run_batch, sample, simulate,
                               validate, wilson_interval)
from adsim.guidance import GainSet


def test_presets_build_and_are_distinct():
    assert len(PRESETS) == 6
    configs = [preset(n) for n in PRESETS]
    assert len({json.dumps(c.to_dict(), sort_keys=True) for c in configs}) == 6


def test_unknown_preset_raises():
    with pytest.raises(KeyError):
        preset("nope")
    with pytest.raises(KeyError):
        mc_preset("mc9")


def test_initial_states_geometry():
    s = ScenarioConfig(r_EP=10000.0, lambda_EP_deg=-45.0, r_DE=1000.0, lambda_DE_deg=45.0)
    p, e, d = s.initial_states()
    assert (e.x, e.y) == (0.0, 0.0)
    assert math.hypot(p.x, p.y) == pytest.approx(10000.0)
    assert math.degrees(math.atan2(p.y, p.x)) == pytest.approx(-45.0)
    # LOS from the defender to the evader points along lambda_DE
    assert math.degrees(math.atan2(e.y - d.y, e.x - d.x)) == pytest.approx(45.0)
    assert math.hypot(d.x, d.y) == pytest.approx(1000.0)


def test_zero_range_is_nudged():
    p, e, d = ScenarioConfig(r_DE=0.0).initial_states()
    assert math.hypot(d.x - e.x, d.y - e.y) == pytest.approx(1.0)


def test_replace_routes_fields():
    s = ScenarioConfig().replace(tau=3.0, dt=2e-3, v_D=350.0)
    assert s.guidance.tau == 3.0 and s.sim.dt == 2e-3 and s.v_D == 350.0


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_config_round_trip(name, tmp_path):
    s = preset(name)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(s.to_dict()))
    assert load_config(path) == s


@pytest.mark.parametrize("doc", [{"extra": {}}, {"scenario": {"r_ep": 1.0}},
                                 {"guidance": {"gain": 1}}, {"sim": {"step": 1}},
                                 {"guidance": {"evader_gains": {"zeta": 1, "q": 2}}}])
def test_config_rejects_unknown_keys(doc):
    with pytest.raises(ValueError):
        ScenarioConfig.from_dict(doc)


def test_validate_flags_case_one_exponent():
    msgs = validate(preset("ppn-with-access"))
    assert any("beta*kappa = 0.8" in m and sev == "warning" for sev, m in msgs)


def test_validate_consistent_config_is_clean():
    s = ScenarioConfig(r_EP=25000.0, r_DE=1000.0, gamma_E_deg=0.0, gamma_P_deg=135.0,
                       lambda_EP_deg=-45.0, lambda_DE_deg=45.0)
    assert validate(s) == []


def test_validate_flags_excessive_tau():
    s = ScenarioConfig(r_EP=25000.0, gamma_E_deg=0.0, gamma_P_deg=135.0).replace(tau=30.0)
    assert any("tau" in m for _, m in validate(s))


def test_validate_flags_defender_speed():
    s = ScenarioConfig().replace(v_D=700.0)
    assert any(sev == "error" for sev, _ in validate(s))


# -- sampling ----------------------------------------------------------------

SPEC = McSpec(6, 11, (McParam("r_DE", 0.0, 3300.0), McParam("gamma_D_deg", -120.0, 15.0)),
              preset("ppn-with-access").replace(t_max=45.0))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(0, 10 ** 6))
def test_draw_is_pure_and_in_bounds(seed, index):
    spec = dataclasses.replace(SPEC, seed=seed)
    a, b = draw(spec, index), draw(spec, index)
    assert a == b
    for q in spec.params:
        assert q.lo <= a[q.name] <= q.hi


def test_draws_differ_between_indices_and_seeds():
    assert draw(SPEC, 0) != draw(SPEC, 1)
    assert draw(SPEC, 0) != draw(dataclasses.replace(SPEC, seed=12), 0)


def test_sample_applies_draws():
    scen = sample(SPEC)
    assert [s.r_DE for s in scen] == [draw(SPEC, i)["r_DE"] for i in range(SPEC.n_runs)]


def test_sampling_tau_routes_to_guidance():
    spec = McSpec(2, 1, (McParam("tau", 3.0, 6.0),), ScenarioConfig())
    assert 3.0 <= sample(spec)[0].guidance.tau <= 6.0


def test_spec_validation():
    with pytest.raises(ValueError):
        McParam("r_DE", 5.0, 1.0)
    with pytest.raises(ValueError):
        McSpec(0, 1, ())
    with pytest.raises(ValueError):
        McSpec(1, 1, (McParam("bogus", 0.0, 1.0),))


def test_spec_round_trip():
    spec = mc_preset("mc2")
    assert McSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec


def test_mc_presets_cover_the_three_studies():
    assert set(MC_PRESETS) == {"mc1", "mc2", "mc3"}
    for name in MC_PRESETS:
        spec = mc_preset(name)
        assert spec.n_runs == 1100
        assert spec.base.guidance.pursuer_strategy == "pure-PN"


# -- statistics and batches -----------------------------------------------------

def test_wilson_interval_reference_values():
    # textbook 95% Wilson score interval for 50/100
    lo, hi = wilson_interval(50, 100)
    assert (lo, hi) == pytest.approx((0.40383, 0.59617), abs=1e-5)
    lo, hi = wilson_interval(20, 20)
    assert hi == 1.0 and lo == pytest.approx(0.83887, abs=1e-5)


def test_batch_is_independent_of_worker_count():
    serial = run_batch(SPEC, jobs=1)
    parallel = run_batch(SPEC, jobs=3)
    assert serial.to_json() == parallel.to_json()
    assert serial.to_csv() == parallel.to_csv()


def test_batch_report_contents():
    rep = run_batch(SPEC, jobs=1)
    summary = json.loads(rep.to_json())
    assert summary["n_runs"] == 6
    assert sum(summary["verdicts"].values()) == 6
    assert summary["wins"] == summary["verdicts"]["DefenderWins"]
    lines = rep.to_csv().splitlines()
    assert lines[0].startswith("index,r_DE,gamma_D_deg,verdict")
    assert len(lines) == 7


def test_batch_runs_match_single_simulations():
    rep = run_batch(SPEC, jobs=1)
    for rec, scen in zip(rep.runs, sample(SPEC)):
        _, out = simulate(scen, record=False)
        assert rec.verdict == out.verdict.value
        assert rec.t_intercept == out.t_intercept


def test_case_gains_follow_published_values():
    g = preset("rtpn-without-access").guidance
    assert g.defender_gains.zeta == 0.1275 and g.defender_gains.xi == 1.8
    assert g.evader_gains == GainSet(0.05, 0.005, 0.3, 2.0, 1.0)
    assert g.pursuer_strategy == "realistic-TPN"
    assert g.defender_mode == "without-evader-access"
