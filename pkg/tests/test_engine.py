import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from acosim.engine import (
    Action,
    ActionKind,
    ActionWindow,
    CellState,
    CellWindowStats,
    Classification,
    Thresholds,
    apply,
    classify,
    gate,
    run_cell_round,
    summarize_window,
    tilt_correction,
)
from acosim.geometry import CellGeometry, CoverageMap, RingSpec

TH = Thresholds()
GEOM = CellGeometry(0.0, 0.0, 90.0)


def state(tilt=8, p=15.0, **kw):
    return CellState(0, tilt, 0, 20, p, 0.0, 18.0, GEOM, 200.0, **kw)


def stats(**kw):
    base = dict(r_md_avg_m=200.0, r_md_gamma_m=150.0, rsrp_cov_dbm=-95.0,
                v_traffic_gb=40.0, n_user=12, gamma_majority=1.0, aod_left=6, aod_right=6)
    base.update(kw)
    return CellWindowStats(**base)


def test_threshold_defaults_and_invariants():
    assert (TH.tau_rsrp_dbm, TH.tau_traffic_gb, TH.tau_user) == (-80.0, 25.0, 9)
    assert (TH.partial_d, TH.epsilon_cov, TH.delta_p_db, TH.epsilon_rot_deg) == (2.1, 0.4, 1.0, 15.0)
    with pytest.raises(ValueError, match="∂ must exceed 1"):
        Thresholds(partial_d=0.3)
    with pytest.raises(ValueError):
        Thresholds(epsilon_cov=1.2)
    with pytest.raises(ValueError):
        Thresholds(delta_p_db=0.0)


def test_gate_reasons_in_order():
    assert gate(stats(), TH).proceed
    assert str(gate(stats(n_mr=0), TH)) == "Gated(no-data)"
    assert gate(stats(rsrp_cov_dbm=-79.9), TH).reason == "coverage-adequate"
    assert gate(stats(rsrp_cov_dbm=-80.0), TH).proceed
    assert gate(stats(v_traffic_gb=24.9, n_user=3), TH).reason == "traffic"
    assert gate(stats(n_user=8), TH).reason == "users"


def test_classify_boundaries():
    assert classify(stats(r_md_avg_m=420.0), 200.0, TH) is Classification.NORMAL
    assert classify(stats(r_md_avg_m=420.1), 200.0, TH) is Classification.OVERSHOOT
    assert classify(stats(r_md_avg_m=80.0), 200.0, TH) is Classification.NORMAL
    assert classify(stats(r_md_avg_m=79.9), 200.0, TH) is Classification.LIMITED


@pytest.mark.parametrize("d_prime, expected", [
    (100.0, 8),      # atan(28.5 / 200) = 8.11 deg
    (47.675, 16),    # R_exp/4 of the default plan: 16.64 deg
    (1000.0, 0),     # 0.82 deg floors to zero
    (14.25, 45),     # atan(1) exactly
])
def test_tilt_correction_values(d_prime, expected):
    assert tilt_correction(30.0, 1.5, d_prime) == expected


def test_tilt_correction_rejects_nonpositive():
    with pytest.raises(ValueError):
        tilt_correction(30.0, 1.5, 0.0)


def test_apply_clamps_and_flags():
    s, a = apply(state(tilt=18), Action(ActionKind.DOWN_TILT, 5.0))
    assert s.tilt_deg == 20 and a.clamped
    s, a = apply(state(tilt=3), Action(ActionKind.UP_TILT, 2.0))
    assert s.tilt_deg == 1 and not a.clamped
    s, a = apply(state(p=17.5), Action(ActionKind.POWER_UP, 1.0))
    assert s.p_rs_dbm == 18.0 and a.clamped
    s, a = apply(state(), Action(ActionKind.ROTATE_BEAM, 15.0, sign=-1))
    assert s.rotation_deg == -15.0
    s, a = apply(state(), Action(ActionKind.ROTATE_BEAM, 75.0, sign=1))
    assert s.rotation_deg == 60.0 and a.clamped


def test_action_validation_and_text():
    with pytest.raises(ValueError):
        Action(ActionKind.DOWN_TILT, 0.0)
    with pytest.raises(ValueError):
        Action(ActionKind.NOOP, 1.0)
    assert Action(ActionKind.UP_TILT, 3.0).describe() == "UpTilt(3)"
    assert Action(ActionKind.ROTATE_BEAM, 15.0, sign=-1).describe() == "RotateBeam(15,left)"
    assert Action.noop(note="users").describe() == "NoOp(users)"


def test_cell_state_bounds():
    with pytest.raises(ValueError):
        state(tilt=21)
    with pytest.raises(ValueError):
        state(p=19.0)
    with pytest.raises(ValueError):
        state(rotation_deg=61.0)


def test_window_keeps_last_w():
    w = ActionWindow(3)
    for k in range(5):
        w.push(Action(ActionKind.POWER_UP, float(k + 1)))
    assert [a.magnitude for a in w.history] == [3.0, 4.0, 5.0]
    with pytest.raises(ValueError):
        ActionWindow(0)


def test_summarize_window_hand_values():
    ranges = [50.0, 60.0, 300.0, 400.0]
    rsrp = [-70.0, -80.0, -90.0, -100.0]
    st_ = summarize_window(ranges, rsrp, 30.0, 4, 200.0, TH,
                           faulty_mask=[False, False, True, True], aod_offsets_deg=[-5.0, 3.0, 10.0])
    assert st_.r_md_avg_m == pytest.approx(202.5)
    assert st_.r_md_gamma_m == pytest.approx(350.0)   # median over the faulty pair
    assert st_.gamma_majority == 1.0
    # RSRP met by 75% of samples: 25th percentile, linear interpolation
    assert st_.rsrp_cov_dbm == pytest.approx(np.percentile(rsrp, 25))
    assert (st_.aod_left, st_.aod_right, st_.n_mr) == (1, 2, 4)


def test_summarize_empty_window():
    st_ = summarize_window([], [], 0.0, 0, 200.0, TH)
    assert math.isnan(st_.r_md_avg_m) and st_.n_mr == 0
    assert gate(st_, TH).reason == "no-data"


def test_run_cell_round_records_and_pushes():
    w = ActionWindow(3)
    agg = CoverageMap(0, RingSpec.uniform(200.0, (2, 4, 8, 8))).snapshot()
    new, dec = run_cell_round(state(tilt=4), w, stats(r_md_avg_m=600.0), agg, TH, round_id=7)
    # d' = 400: atan(28.5 / 800) = 2.04 -> 2 degrees
    assert new.tilt_deg == 6
    assert dec.record()["applied_action"] == "DownTilt(2)"
    assert dec.record()["round"] == 7
    assert w.history[-1].window_id == 7


@given(st.integers(0, 20), st.floats(0.0, 18.0),
       st.sampled_from(list(ActionKind)), st.floats(0.5, 30.0), st.sampled_from([-1, 1]))
def test_apply_never_leaves_bounds(tilt, p, kind, mag, sign):
    a = Action.noop() if kind is ActionKind.NOOP else Action(kind, mag, sign=sign)
    s, _ = apply(state(tilt=tilt, p=p), a)
    assert 0 <= s.tilt_deg <= 20
    assert 0.0 <= s.p_rs_dbm <= 18.0
    assert abs(s.rotation_deg) <= 60.0
