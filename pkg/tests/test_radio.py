import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acosim.radio import (
    TA_STEP_M,
    AntennaPattern,
    ChannelParams,
    LinkBudget,
    RsConfig,
    gold_sequence,
    measure_ta,
    pathloss_db,
    rs_cinit,
    rs_interferes,
    rs_sinr,
    rs_waveform,
    rsrp,
    spatial_channel,
)


def reference_gold(c_init, length):
    """Bit-by-bit pseudo-random sequence generator on Python lists."""
    nc = 1600
    x1 = [1] + [0] * 30
    x2 = [(c_init >> i) & 1 for i in range(31)]
    while len(x1) < nc + length:
        n = len(x1) - 31
        x1.append((x1[n + 3] + x1[n]) % 2)
        x2.append((x2[n + 3] + x2[n + 2] + x2[n + 1] + x2[n]) % 2)
    return [(x1[n + nc] + x2[n + nc]) % 2 for n in range(length)]


@pytest.mark.parametrize("c_init", [0, 1, 8193, 2**31 - 1, 123456789])
def test_gold_matches_reference(c_init):
    assert gold_sequence(c_init, 200).tolist() == reference_gold(c_init, 200)


def test_gold_zero_length():
    assert gold_sequence(5, 0).size == 0
    with pytest.raises(ValueError):
        gold_sequence(5, -1)


def test_rs_cinit_hand_values():
    # 2^10 * (7 * 1 + 0 + 1) * 1 + 0 + 1
    assert rs_cinit(0, 0, 0) == 8193
    # PCI 10, slot 3, symbol 4, extended CP: 1024 * 33 * 21 + 20
    assert rs_cinit(10, 3, 4, normal_cp=False) == 1024 * 33 * 21 + 20


def test_rs_waveform_qpsk_points():
    sym = rs_waveform([0, 0, 0, 1, 1, 0, 1, 1], 4)
    s = 1 / math.sqrt(2)
    np.testing.assert_allclose(sym, [s + 1j * s, s - 1j * s, -s + 1j * s, -s - 1j * s])


def test_rs_waveform_needs_enough_bits():
    with pytest.raises(ValueError, match="need 8 bits"):
        rs_waveform([0, 1, 0], 4)


def test_rs_config_bounds_and_groups():
    assert RsConfig(pci=7).pci_group == 1
    with pytest.raises(ValueError):
        RsConfig(p_rs_dbm=20.0)
    assert rs_interferes(1, 4, 3)
    assert not rs_interferes(1, 5, 3)


def test_received_power_and_sinr_by_hand():
    serving = LinkBudget(500.0, 100.0, noise_dbm=-120.0)
    interferer = LinkBudget(900.0, 110.0)
    # signal -85 dBm, interference -95 dBm, noise -120 dBm
    expected = 10 ** -8.5 / (10 ** -12.0 + 10 ** -9.5)
    assert serving.received_dbm(15.0) == pytest.approx(-85.0)
    assert rs_sinr(serving, 15.0, [(interferer, 15.0)]) == pytest.approx(expected)
    assert rs_sinr(serving, 15.0) == pytest.approx(10 ** 3.5)


def test_rsrp_zero_gain_floor():
    assert rsrp(15.0, LinkBudget(100.0, 80.0, h_mc=0.0)) == -200.0
    assert rsrp(15.0, LinkBudget(100.0, 80.0)) == pytest.approx(-65.0)


def test_pathloss_reference_points():
    assert pathloss_db(1000.0) == pytest.approx(128.1)
    assert pathloss_db(10.0) == pytest.approx(pathloss_db(35.0))
    # with a 1 m clamp the free-space floor takes over at 10 m, 2 GHz
    fs = 20 + 20 * math.log10(2e9) - 147.55
    assert pathloss_db(10.0, 2e9, min_distance_m=1.0) == pytest.approx(fs)


@given(st.floats(35.0, 2e4), st.floats(1.0, 1e3))
def test_pathloss_monotone(d, extra):
    assert pathloss_db(d + extra) >= pathloss_db(d)


def test_antenna_pattern_cuts():
    ant = AntennaPattern()
    assert ant.gain_db(0.0, 8.0, 8.0) == pytest.approx(17.0)
    assert ant.horizontal_db(35.0) == pytest.approx(-3.0)
    assert ant.horizontal_db(395.0) == pytest.approx(-3.0)
    assert ant.vertical_db(13.0, 8.0) == pytest.approx(-3.0)
    assert ant.horizontal_db(180.0) == -25.0
    assert ant.vertical_db(80.0, 0.0) == -20.0
    # combined attenuation is capped by the front-back floor
    assert ant.gain_db(180.0, 80.0, 0.0) == pytest.approx(17.0 - 25.0)


def test_channel_single_path_phase_and_doppler():
    p = ChannelParams(aod_deg=[30.0], aoa_deg=[0.0], phases=[0.5], path_power=4.0,
                      speed_mps=2.0, direction_deg=0.0, wavenumber=2 * math.pi)
    h0 = spatial_channel(p, 0.0, d_s=0.25)
    assert abs(h0) == pytest.approx(2.0)
    assert np.angle(h0) == pytest.approx(2 * math.pi * 0.25 * 0.5 + 0.5)
    # Doppler advance k v t cos(0) = 2 pi * 2 * 0.1
    h1 = spatial_channel(p, 0.1, d_s=0.25)
    assert h1 / h0 == pytest.approx(np.exp(1j * 2 * math.pi * 0.2))
    ht = spatial_channel(p, np.array([0.0, 0.1]), d_s=0.25)
    np.testing.assert_allclose(ht, [h0, h1])


def test_channel_params_validation():
    with pytest.raises(ValueError):
        ChannelParams([1.0, 2.0], [1.0], [0.0])
    with pytest.raises(ValueError):
        ChannelParams([1.0], [1.0], [2 * math.pi])
    with pytest.raises(ValueError):
        ChannelParams([1.0], [1.0], [0.0], path_power=-1.0)


def test_ta_hand_values():
    assert TA_STEP_M == 78.125
    assert measure_ta(0.0) == (0, 0.0)
    assert measure_ta(39.0) == (0, 0.0)
    assert measure_ta(40.0) == (1, 78.125)
    assert measure_ta(1000.0) == (13, 13 * 78.125)
    with pytest.raises(ValueError):
        measure_ta(-1.0)


@settings(max_examples=300)
@given(st.floats(0.0, 1e5, allow_nan=False))
def test_ta_error_bound(d):
    _, reported = measure_ta(d)
    assert abs(reported - d) <= TA_STEP_M / 2
