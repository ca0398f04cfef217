"""
Downlink radio ground truth: cell-specific reference signals, link budget,
RS SINR/RSRP, the per-path spatial channel and timing-advance measurement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
SAMPLE_RATE_HZ = 30.72e6
TA_STEP_SAMPLES = 16
# 16 Ts of round-trip time, halved for one-way range: 78.125 m per TA unit
TA_STEP_M = TA_STEP_SAMPLES / SAMPLE_RATE_HZ * 3.0e8 / 2.0
RSRP_FLOOR_DBM = -200.0
GOLD_NC = 1600


def gold_sequence(c_init: int, length: int) -> np.ndarray:
    """Length-31 Gold sequence c(n), n = 0..length-1, as 0/1 integers.

    x1 starts as 1,0,...,0; x2 is loaded with the 31 bits of ``c_init``
    (LSB first); the output is offset by Nc = 1600.
    """
    if length < 0:
        raise ValueError("length must be non-negative")
    total = length + GOLD_NC + 31
    x1 = np.zeros(total, dtype=np.uint8)
    x2 = np.zeros(total, dtype=np.uint8)
    x1[0] = 1
    for i in range(31):
        x2[i] = (int(c_init) >> i) & 1
    for n in range(total - 31):
        x1[n + 31] = x1[n + 3] ^ x1[n]
        x2[n + 31] = x2[n + 3] ^ x2[n + 2] ^ x2[n + 1] ^ x2[n]
    return (x1[GOLD_NC:GOLD_NC + length] ^ x2[GOLD_NC:GOLD_NC + length]).astype(np.int64)


def rs_cinit(pci: int, slot: int, symbol: int, normal_cp: bool = True) -> int:
    """Cell-specific RS scrambling seed for (PCI, slot, OFDM symbol)."""
    n_cp = 1 if normal_cp else 0
    return (2 ** 10 * (7 * (slot + 1) + symbol + 1) * (2 * pci + 1) + 2 * pci + n_cp) % (2 ** 31)


def rs_waveform(bits: Sequence[int] | np.ndarray, count: int) -> np.ndarray:
    """QPSK reference-signal symbols from a pseudo-random bit sequence.

    Symbol m is ((1 - 2 c(2m)) + j (1 - 2 c(2m+1))) / sqrt(2).
    """
    c = np.asarray(bits, dtype=np.int64)
    if c.size < 2 * count:
        raise ValueError(f"need {2 * count} bits for {count} symbols, got {c.size}")
    c = c[: 2 * count]
    return ((1 - 2 * c[0::2]) + 1j * (1 - 2 * c[1::2])) / math.sqrt(2.0)


@dataclass(frozen=True)
class RsConfig:
    p_rs_dbm: float = 15.0
    p_rs_max_dbm: float = 18.0
    p_rs_min_dbm: float = 0.0
    pci: int = 0
    reuse: int = 3

    def __post_init__(self):
        if not self.p_rs_min_dbm <= self.p_rs_dbm <= self.p_rs_max_dbm:
            raise ValueError(
                f"P_RS {self.p_rs_dbm} dBm outside [{self.p_rs_min_dbm}, {self.p_rs_max_dbm}]"
            )
        if self.reuse < 1:
            raise ValueError("PCI reuse factor must be >= 1")

    @property
    def pci_group(self) -> int:
        return self.pci % self.reuse


def rs_interferes(pci_a: int, pci_b: int, reuse: int) -> bool:
    """Cells share RS resource elements (and so interfere) iff PCI mod reuse match."""
    return pci_a % reuse == pci_b % reuse


@dataclass(frozen=True)
class LinkBudget:
    distance_m: float
    pathloss_db: float
    g_mc_db: float = 0.0
    g_ms_db: float = 0.0
    h_mc: float = 1.0
    noise_dbm: float = -123.2

    def received_dbm(self, p_dbm: float) -> float:
        if self.h_mc <= 0.0:
            return -math.inf
        return p_dbm - self.pathloss_db + self.g_mc_db + self.g_ms_db + 10.0 * math.log10(self.h_mc)


def db_to_lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin_to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(x, dtype=float))


def rs_sinr(
    serving: LinkBudget,
    p_rs_dbm: float,
    interferers: Sequence[tuple[LinkBudget, float]] = (),
) -> float:
    """RS SINR in the linear domain.

    ``interferers`` holds (link, P_d dBm) pairs for cells sharing the serving
    cell's RS pattern; callers filter by PCI group beforehand.
    """
    signal = 10.0 ** (serving.received_dbm(p_rs_dbm) / 10.0)
    noise = 10.0 ** (serving.noise_dbm / 10.0)
    interference = sum(10.0 ** (link.received_dbm(p) / 10.0) for link, p in interferers)
    return signal / (noise + interference)


def sinr_db(sinr_linear: float) -> float:
    return float(lin_to_db(sinr_linear))


def rsrp(p_rs_dbm: float, link: LinkBudget) -> float:
    """RSRP in dBm; a zero channel gain maps to the deep-outage floor."""
    value = link.received_dbm(p_rs_dbm)
    return max(value, RSRP_FLOOR_DBM)


def free_space_pathloss_db(d_m, freq_hz):
    d = np.maximum(np.asarray(d_m, dtype=float), 1.0)
    return 20.0 * np.log10(d) + 20.0 * np.log10(freq_hz) - 147.55


def pathloss_db(d3d_m, freq_hz: float = 2.0e9, min_distance_m: float = 35.0):
    """Macro log-distance pathloss 128.1 + 37.6 log10(d_km), never below free space."""
    d = np.maximum(np.asarray(d3d_m, dtype=float), min_distance_m)
    pl = 128.1 + 37.6 * np.log10(d / 1000.0)
    return np.maximum(pl, free_space_pathloss_db(d, freq_hz))


@dataclass(frozen=True)
class AntennaPattern:
    """Sector antenna: parabolic horizontal and vertical cuts.

    ``empirical_correction`` adds the height/range/beamwidth gain term from
    :func:`acosim.geometry.empirical_gain` wherever it is defined.
    """
    g_max_dbi: float = 17.0
    hpbw_h_deg: float = 70.0
    front_back_db: float = 25.0
    hpbw_v_deg: float = 10.0
    sla_v_db: float = 20.0
    empirical_correction: bool = False
    verb_deg: float = 6.5

    def horizontal_db(self, offset_deg):
        phi = (np.asarray(offset_deg, dtype=float) + 180.0) % 360.0 - 180.0
        return -np.minimum(12.0 * (phi / self.hpbw_h_deg) ** 2, self.front_back_db)

    def vertical_db(self, elevation_deg, tilt_deg):
        off = np.asarray(elevation_deg, dtype=float) - tilt_deg
        return -np.minimum(12.0 * (off / self.hpbw_v_deg) ** 2, self.sla_v_db)

    def gain_db(self, offset_deg, elevation_deg, tilt_deg, h_bs=None, d2d_m=None):
        att = -(self.horizontal_db(offset_deg) + self.vertical_db(elevation_deg, tilt_deg))
        g = self.g_max_dbi - np.minimum(att, self.front_back_db)
        if self.empirical_correction and h_bs is not None and d2d_m is not None:
            arg = h_bs - np.asarray(d2d_m, dtype=float) ** 0.8
            with np.errstate(invalid="ignore", divide="ignore"):
                corr = 3.0 * np.log(arg) * math.log10(self.verb_deg)
            g = g + np.where(arg > 0.0, corr, 0.0)
        return g


# 3GPP SCM sub-path offsets (degrees) for a 2 degree BS angular spread
SCM_SUBPATH_OFFSETS_DEG = np.array(
    [0.0894, 0.2826, 0.4984, 0.7431, 1.0257, 1.3594, 1.7688, 2.2961, 3.0389, 4.3101]
)


@dataclass(frozen=True)
class ChannelParams:
    """One propagation path of the spatial channel, split into M sub-paths."""
    aod_deg: np.ndarray
    aoa_deg: np.ndarray
    phases: np.ndarray
    path_power: float = 1.0
    shadow_gain: float = 1.0
    speed_mps: float = 0.0
    direction_deg: float = 0.0
    wavenumber: float = 2.0 * math.pi
    bs_gain: np.ndarray | None = field(default=None)
    ms_gain: np.ndarray | None = field(default=None)

    def __post_init__(self):
        aod = np.atleast_1d(np.asarray(self.aod_deg, dtype=float))
        aoa = np.atleast_1d(np.asarray(self.aoa_deg, dtype=float))
        ph = np.atleast_1d(np.asarray(self.phases, dtype=float))
        if not (aod.size == aoa.size == ph.size) or aod.size < 1:
            raise ValueError("AoD, AoA and phase arrays must share a length >= 1")
        if self.path_power < 0:
            raise ValueError("sub-path power must be non-negative")
        if np.any(ph < 0) or np.any(ph >= 2 * math.pi):
            raise ValueError("random phases must lie in [0, 2pi)")
        object.__setattr__(self, "aod_deg", aod)
        object.__setattr__(self, "aoa_deg", aoa)
        object.__setattr__(self, "phases", ph)
        for name in ("bs_gain", "ms_gain"):
            g = getattr(self, name)
            g = np.ones(aod.size) if g is None else np.broadcast_to(np.asarray(g, float), aod.shape)
            object.__setattr__(self, name, g)

    @property
    def n_subpaths(self) -> int:
        return self.aod_deg.size


def spatial_channel(params: ChannelParams, t, d_u: float = 0.0, d_s: float = 0.0):
    """Channel coefficient between BS element at ``d_s`` and UE element at
    ``d_u`` (positions in meters along each array axis) at time(s) ``t``.
    """
    p = params
    k = p.wavenumber
    aod = np.deg2rad(p.aod_deg)
    aoa = np.deg2rad(p.aoa_deg)
    v_dir = math.radians(p.direction_deg)
    t = np.asarray(t, dtype=float)
    per_path = (
        np.sqrt(p.bs_gain) * np.exp(1j * (k * d_s * np.sin(aod) + p.phases))
        * np.sqrt(p.ms_gain) * np.exp(1j * k * d_u * np.sin(aoa))
    )
    doppler = np.exp(1j * k * p.speed_mps * np.multiply.outer(t, np.cos(aoa - v_dir)))
    scale = math.sqrt(p.path_power * p.shadow_gain / p.n_subpaths)
    return scale * (doppler @ per_path) if t.ndim else scale * complex(doppler @ per_path)


def measure_ta(distance_m) -> tuple:
    """Timing advance in 16 Ts units and the range it reports, rounded to nearest."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    ta = np.floor(d / TA_STEP_M + 0.5).astype(np.int64)
    reported = ta * TA_STEP_M
    if ta.ndim == 0:
        return int(ta), float(reported)
    return ta, reported
