import warnings
from pathlib import Path

import pytest

from acosim.engine import Thresholds
from acosim.scenario import (
    ScenarioError,
    ScenarioWarning,
    load_scenario,
    parse_scenario,
    serialize_scenario,
)
from acosim.sim import (
    STANDARD_FAULTS,
    Fault,
    FaultKind,
    FaultSpec,
    SimulationConfig,
    standard_config,
)

STANDARD_INI = Path(__file__).resolve().parents[1] / "scenarios" / "standard.ini"


def test_empty_text_is_the_default_scenario():
    scen = parse_scenario("")
    cfg = scen.config
    assert cfg == SimulationConfig()
    assert cfg.n_cells == 21 and cfg.window == 3
    th = cfg.thresholds
    assert (th.partial_d, th.epsilon_cov, th.delta_p_db, th.epsilon_rot_deg) == (2.1, 0.4, 1.0, 15.0)
    assert (th.tau_rsrp_dbm, th.tau_traffic_gb, th.tau_user) == (-80.0, 25.0, 9)
    assert len(scen.faults) == 0


def test_bad_overshoot_factor_is_reported():
    with pytest.raises(ScenarioError, match="∂ must exceed 1"):
        parse_scenario("[thresholds]\npartial_d = 0.3\n")


def test_values_are_typed_by_field():
    scen = parse_scenario(
        "[network]\nisd_m = 650  # metres\nwraparound = no\nring_splits = 1, 2\nseed = 9\n"
        "[thresholds]\ntau_user = 4\n")
    cfg = scen.config
    assert cfg.isd_m == 650.0 and isinstance(cfg.isd_m, float)
    assert cfg.wraparound is False
    assert cfg.ring_splits == (1, 2)
    assert cfg.seed == 9 and cfg.thresholds.tau_user == 4


@pytest.mark.parametrize("cfg, faults", [
    (SimulationConfig(), FaultSpec()),
    (standard_config(seed=4), STANDARD_FAULTS),
    (SimulationConfig(isd_m=0.1 + 0.2, shadow_std_db=1 / 3, thresholds=Thresholds(partial_d=2.25)),
     FaultSpec((Fault(3, FaultKind.ROTATED, 27.5), Fault(3, FaultKind.POWER_HOLE)))),
])
def test_round_trip(cfg, faults):
    text = serialize_scenario(cfg, faults)
    scen = parse_scenario(text)
    assert scen.config == cfg
    assert scen.faults == faults
    assert serialize_scenario(scen.config, scen.faults) == text


def test_shipped_standard_scenario_matches_code():
    scen = load_scenario(STANDARD_INI)
    assert scen.config == standard_config()
    assert scen.faults == STANDARD_FAULTS


def test_unknown_key_strict_and_lenient():
    text = "[network]\nisd_m = 500\nbogus = 1\n"
    with pytest.raises(ScenarioError, match="line 3: unknown key 'bogus'"):
        parse_scenario(text)
    with pytest.warns(ScenarioWarning, match="bogus"):
        scen = parse_scenario(text, strict=False)
    assert scen.config.isd_m == 500.0


def test_unknown_section():
    with pytest.raises(ScenarioError, match=r"line 2: unknown section \[radio\]"):
        parse_scenario("\n[radio]\nx = 1\n")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        parse_scenario("[radio]\nx = 1\n", strict=False)
    assert any(issubclass(w.category, ScenarioWarning) for w in caught)


@pytest.mark.parametrize("text, line, fragment", [
    ("isd_m = 1\n", 1, "before the first"),
    ("[network]\n\nisd_m = abc\n", 3, "expects a number"),
    ("[network]\nseed = 1.5\n", 2, "expects an integer"),
    ("[network]\nwraparound = maybe\n", 2, "expects a boolean"),
    ("[network]\nseed = 1\nseed = 2\n", 3, "repeated"),
    ("[network]\n[network]\n", 2, "appears twice"),
    ("[network]\njust words\n", 2, "unparseable"),
    ("[faults]\n\n\nx = PowerHole\n", 4, "not a cell id"),
    ("[faults]\n2 = Meltdown\n", 2, "unknown fault kind"),
    ("[faults]\n2 = Rotated:abc\n", 2, "not a number"),
    ("[faults]\n1 = PowerHole\n40 = PowerHole\n", 3, "cell ids run 0..20"),
])
def test_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ScenarioError, match=fragment) as info:
        parse_scenario(text)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")


def test_fault_lines():
    scen = parse_scenario("[faults]\n0 = OvershootTilt\n7 = limitedtilt:20\n14 = PowerHole, Rotated:30\n")
    assert list(scen.faults) == [
        Fault(0, FaultKind.OVERSHOOT_TILT), Fault(7, FaultKind.LIMITED_TILT, 20.0),
        Fault(14, FaultKind.POWER_HOLE), Fault(14, FaultKind.ROTATED, 30.0)]


def test_semantic_errors_are_wrapped():
    with pytest.raises(ScenarioError, match="invalid scenario"):
        parse_scenario("[network]\nn_cells = 20\n")
