"""
Cluster-scale LTE downlink simulator driving the optimization loop.

A hexagonal macro cluster (7 sites x 3 sectors by default) is wrapped
toroidally. Each round drops fresh UEs, produces one window of localized
measurement reports per cell, runs the optimizer on cells whose schedule is
due and records area KPIs.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from . import array as arr
from .engine import (
    ActionWindow,
    CellDecision,
    CellState,
    CellWindowStats,
    Classification,
    Thresholds,
    classify,
    run_cell_round,
    summarize_window,
)
from .geometry import (
    AggregatedMap,
    CellGeometry,
    CoverageMap,
    MeasurementReport,
    OutOfSectorError,
    RingSpec,
    ideal_coverage,
)
from .radio import (
    SCM_SUBPATH_OFFSETS_DEG,
    SPEED_OF_LIGHT,
    AntennaPattern,
    ChannelParams,
    measure_ta,
    pathloss_db,
    spatial_channel,
)

log = logging.getLogger(__name__)

# RNG stream tags; each stream is keyed by (seed, tag, round, entity)
_DROP, _SHADOW, _CHANNEL, _TRAFFIC = 1, 2, 3, 4
SECTOR_BORESIGHTS = (30.0, 150.0, 270.0)
# hexagonal cluster sizes with their wraparound (i, j) lattice shifts
_CLUSTER_SHIFT = {7: (2, 1), 19: (3, 2)}


class FaultKind(str, enum.Enum):
    OVERSHOOT_TILT = "OvershootTilt"
    LIMITED_TILT = "LimitedTilt"
    POWER_HOLE = "PowerHole"
    ROTATED = "Rotated"


@dataclass(frozen=True)
class Fault:
    cell_id: int
    kind: FaultKind
    value: float | None = None


@dataclass(frozen=True)
class FaultSpec:
    faults: tuple[Fault, ...] = ()

    def __iter__(self):
        return iter(self.faults)

    def __len__(self):
        return len(self.faults)


@dataclass(frozen=True)
class SimulationConfig:
    n_cells: int = 21
    ues_per_cell: int = 10
    isd_m: float = 500.0
    wraparound: bool = True
    h_bs: float = 30.0
    h_ms: float = 1.5
    theta_geo: float = 2.0
    theta_verb: float = 6.5
    tilt_min: int = 0
    tilt_max: int = 20
    p_rs_dbm: float = 15.0
    p_rs_min_dbm: float = 0.0
    p_rs_max_dbm: float = 18.0
    f_ul_hz: float = 1747.5e6
    f_dl_hz: float = 1842.5e6
    bs_antennas: int = 4
    ue_antennas: int = 2
    element_spacing: float = 0.5
    g_max_dbi: float = 17.0
    hpbw_h_deg: float = 70.0
    hpbw_v_deg: float = 10.0
    sla_v_db: float = 20.0
    front_back_db: float = 25.0
    empirical_gain: bool = False
    g_ms_dbi: float = 0.0
    noise_dbm: float = -123.2
    shadow_std_db: float = 8.0
    pci_reuse: int = 3
    ul_snr_db: float = 20.0
    n_snapshots: int = 64
    snapshot_period_s: float = 5e-3
    angular_spread_scale: float = 0.3
    ue_speed_mps: float = 0.83
    aod_mode: str = "identity"
    capon_step_deg: float = 0.5
    traffic_mean_gb: float = 3.0
    traffic_sigma: float = 0.25
    ring_splits: tuple[int, ...] = (2, 4, 8, 8)
    ring_margin: float = 1.0
    linear_rsrp_average: bool = False
    kpi_grid_m: float = 25.0
    t_mr_min: float = 15.0
    t_eopt_rounds: int = 1
    t_eopt_max_rounds: int = 8
    window: int = 3
    seed: int = 1
    thresholds: Thresholds = field(default_factory=Thresholds)

    def __post_init__(self):
        if self.n_cells % 3:
            raise ValueError("cell count must be a multiple of 3 (three sectors per site)")
        if self.n_cells // 3 not in (1, *_CLUSTER_SHIFT):
            raise ValueError("supported layouts: 1, 7 or 19 sites (3, 21 or 57 cells)")
        if self.ues_per_cell < 0:
            raise ValueError("UEs per cell must be non-negative")
        if not self.tilt_min <= self.tilt_max:
            raise ValueError("tilt_min must not exceed tilt_max")
        if not self.p_rs_min_dbm <= self.p_rs_dbm <= self.p_rs_max_dbm:
            raise ValueError("nominal P_RS outside its bounds")
        if self.aod_mode not in ("identity", "phi"):
            raise ValueError("aod_mode must be 'identity' or 'phi'")
        if self.window < 1 or self.t_eopt_rounds < 1:
            raise ValueError("window size and t_eOPT must be >= 1")
        if not 1 <= self.t_eopt_rounds <= self.t_eopt_max_rounds:
            raise ValueError("t_eOPT must lie within [1, t_eopt_max_rounds]")
        if self.bs_antennas < 2:
            raise ValueError("BS array needs at least 2 elements")
        RingSpec.uniform(1.0, self.ring_splits)  # validates progressive splits

    @property
    def n_sites(self) -> int:
        return self.n_cells // 3

    @property
    def array(self) -> arr.ArrayConfig:
        return arr.ArrayConfig(self.bs_antennas, self.element_spacing, self.f_ul_hz,
                               self.f_dl_hz, self.f_dl_hz)

    @property
    def antenna(self) -> AntennaPattern:
        return AntennaPattern(self.g_max_dbi, self.hpbw_h_deg, self.front_back_db,
                              self.hpbw_v_deg, self.sla_v_db, self.empirical_gain,
                              self.theta_verb)

    @property
    def planned_tilt(self) -> int:
        return int(round(self.theta_geo + self.theta_verb))


@dataclass
class Cell:
    cell_id: int
    site: int
    geometry: CellGeometry
    pci: int
    state: CellState
    window: ActionWindow
    cmap: CoverageMap
    physical_offset_deg: float = 0.0
    period: int = 1
    next_round: int = 1
    gated_streak: int = 0

    @property
    def pattern_azimuth(self) -> float:
        return self.geometry.boresight_deg + self.physical_offset_deg + self.state.rotation_deg


@dataclass
class Network:
    cfg: SimulationConfig
    sites: np.ndarray
    shifts: np.ndarray
    cells: list[Cell]
    round: int = 0
    ue_xy: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    ue_home: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def states(self) -> list[CellState]:
        return [c.state for c in self.cells]


@dataclass(frozen=True)
class WindowResult:
    round_id: int
    stats: list[CellWindowStats]
    maps: list[AggregatedMap]
    reports: list[MeasurementReport]
    serving: np.ndarray
    aoa_error_deg: np.ndarray
    dropped: int


@dataclass(frozen=True)
class KpiReport:
    round_id: int
    rsrp_samples_dbm: np.ndarray
    coverage_85: float
    coverage_80: float
    hole_count: int
    throughput_proxy: float
    rrc_failure_proxy: float
    cell_throughput: np.ndarray
    grid_shape: tuple[int, int] = (0, 0)
    grid_rsrp: np.ndarray | None = field(default=None, repr=False)
    grid_sinr_db: np.ndarray | None = field(default=None, repr=False)

    def summary(self) -> dict:
        return {
            "round": self.round_id,
            "coverage_prob_85dbm": self.coverage_85,
            "coverage_prob_80dbm": self.coverage_80,
            "coverage_hole_count": self.hole_count,
            "throughput_proxy_bps_hz": self.throughput_proxy,
            "rrc_failure_proxy": self.rrc_failure_proxy,
        }


# ---------------------------------------------------------------- layout

def hex_sites(n_sites: int, isd: float) -> np.ndarray:
    """Site centres on a hexagonal lattice, centre site first, then rings."""
    pts = [(0.0, 0.0)]
    rings = {1: 0, 7: 1, 19: 2}[n_sites]
    dirs = [np.array([math.cos(math.radians(60 * k)), math.sin(math.radians(60 * k))])
            for k in range(6)]
    for ring in range(1, rings + 1):
        p = ring * dirs[4] * isd
        for side in range(6):
            for _ in range(ring):
                pts.append(tuple(p))
                p = p + dirs[side] * isd
    return np.array(pts)


def wrap_shifts(n_sites: int, isd: float, wraparound: bool) -> np.ndarray:
    """Image offsets (including the zero shift) for toroidal wraparound."""
    if not wraparound or n_sites == 1:
        return np.zeros((1, 2))
    i, j = _CLUSTER_SHIFT[n_sites]
    a1 = np.array([isd, 0.0])
    a2 = np.array([isd / 2.0, isd * math.sqrt(3) / 2.0])
    v = i * a1 + j * a2
    out = [np.zeros(2)]
    for k in range(6):
        c, s = math.cos(math.radians(60 * k)), math.sin(math.radians(60 * k))
        out.append(np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]]))
    return np.array(out)


def lattice_vectors(cfg: SimulationConfig) -> np.ndarray:
    return wrap_shifts(cfg.n_sites, cfg.isd_m, cfg.wraparound)[1:]


def wrapped_offsets(points: np.ndarray, sites: np.ndarray, shifts: np.ndarray) -> np.ndarray:
    """Shortest displacement site->point over all wraparound images, (P, S, 2)."""
    raw = points[:, None, :] - sites[None, :, :]
    if shifts.shape[0] > 1:
        # reduce into the lattice cell first so the one-ring image search is exact
        basis = np.column_stack([shifts[1], shifts[2]])
        coef = np.rint(np.linalg.solve(basis, raw.reshape(-1, 2).T)).T.reshape(raw.shape)
        raw = raw - coef @ basis.T
    diff = raw[:, :, None, :] - shifts[None, None, :, :]
    d2 = np.einsum("psik,psik->psi", diff, diff)
    best = np.argmin(d2, axis=2)
    return np.take_along_axis(diff, best[:, :, None, None], axis=2)[:, :, 0, :]


# ---------------------------------------------------------------- network

def _cell_state(cfg: SimulationConfig, cell_id: int, geom: CellGeometry, r_exp: float) -> CellState:
    tilt = min(max(cfg.planned_tilt, cfg.tilt_min), cfg.tilt_max)
    return CellState(cell_id, tilt, cfg.tilt_min, cfg.tilt_max, cfg.p_rs_dbm,
                     cfg.p_rs_min_dbm, cfg.p_rs_max_dbm, geom, r_exp)


def drop_network(cfg: SimulationConfig, faults: FaultSpec = FaultSpec()) -> Network:
    sites = hex_sites(cfg.n_sites, cfg.isd_m)
    shifts = wrap_shifts(cfg.n_sites, cfg.isd_m, cfg.wraparound)
    cells = []
    for s, (x, y) in enumerate(sites):
        for k, bore in enumerate(SECTOR_BORESIGHTS):
            cid = 3 * s + k
            geom = CellGeometry(float(x), float(y), bore, cfg.h_bs, cfg.h_ms,
                                cfg.theta_geo, cfg.theta_verb)
            ideal = ideal_coverage(geom, len(cfg.ring_splits))
            rings = RingSpec.uniform(ideal.r_exp, cfg.ring_splits, cfg.ring_margin)
            cells.append(Cell(
                cell_id=cid, site=s, geometry=geom, pci=cid,
                state=_cell_state(cfg, cid, geom, ideal.r_exp),
                window=ActionWindow(cfg.window),
                cmap=CoverageMap(cid, rings, cfg.linear_rsrp_average),
                period=cfg.t_eopt_rounds, next_round=1,
            ))
    net = Network(cfg, sites, shifts, cells)
    for f in faults:
        apply_fault(net, f)
    return net


def apply_fault(net: Network, fault: Fault):
    if not 0 <= fault.cell_id < len(net.cells):
        raise ValueError(f"fault targets unknown cell {fault.cell_id}")
    cfg = net.cfg
    cell = net.cells[fault.cell_id]
    st = cell.state
    if fault.kind is FaultKind.OVERSHOOT_TILT:
        tilt = cfg.tilt_min if fault.value is None else int(fault.value)
        cell.state = replace(st, tilt_deg=min(max(tilt, st.tilt_min), st.tilt_max))
    elif fault.kind is FaultKind.LIMITED_TILT:
        tilt = cfg.tilt_max if fault.value is None else int(fault.value)
        cell.state = replace(st, tilt_deg=min(max(tilt, st.tilt_min), st.tilt_max))
    elif fault.kind is FaultKind.POWER_HOLE:
        p = st.p_rs_min if fault.value is None else float(fault.value)
        cell.state = replace(st, p_rs_dbm=min(max(p, st.p_rs_min), st.p_rs_max))
    elif fault.kind is FaultKind.ROTATED:
        cell.physical_offset_deg = 30.0 if fault.value is None else float(fault.value)
    else:  # pragma: no cover
        raise ValueError(f"unknown fault {fault.kind}")


def _rng(cfg: SimulationConfig, tag: int, round_id: int, entity: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, tag, round_id, entity])


def drop_ues(net: Network, round_id: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform drops inside each cell's rhombus (one third of its site hexagon)."""
    cfg = net.cfg
    radius = cfg.isd_m / math.sqrt(3.0)
    xy, home = [], []
    for cell in net.cells:
        rng = _rng(cfg, _DROP, round_id, cell.cell_id)
        b = math.radians(cell.geometry.boresight_deg)
        u = radius * np.array([math.cos(b - math.pi / 3), math.sin(b - math.pi / 3)])
        v = radius * np.array([math.cos(b + math.pi / 3), math.sin(b + math.pi / 3)])
        pts = []
        while len(pts) < cfg.ues_per_cell:
            a, c = rng.random(2)
            p = a * u + c * v
            if math.hypot(*p) >= 35.0:
                pts.append(p + net.sites[cell.site])
        xy.extend(pts)
        home.extend([cell.cell_id] * cfg.ues_per_cell)
    return np.array(xy, dtype=float).reshape(-1, 2), np.array(home, dtype=int)


# ---------------------------------------------------------------- link budget

def link_geometry(net: Network, points: np.ndarray):
    """Per (point, cell): 2D distance, azimuth (deg) and elevation (deg)."""
    off = wrapped_offsets(points, net.sites, net.shifts)  # (P, S, 2)
    site_of = np.array([c.site for c in net.cells])
    off = off[:, site_of, :]
    d2d = np.hypot(off[..., 0], off[..., 1])
    az = np.degrees(np.arctan2(off[..., 1], off[..., 0]))
    elev = np.degrees(np.arctan2(net.cfg.h_bs - net.cfg.h_ms, d2d))
    return d2d, az, elev


def received_power_dbm(net: Network, d2d, az, elev, shadow_db=None):
    """RSRP (dBm) from each cell at each point, shape (P, C)."""
    cfg = net.cfg
    pattern = cfg.antenna
    bore = np.array([c.pattern_azimuth for c in net.cells])
    tilt = np.array([c.state.tilt_deg for c in net.cells], dtype=float)
    p_rs = np.array([c.state.p_rs_dbm for c in net.cells])
    d3d = np.hypot(d2d, cfg.h_bs - cfg.h_ms)
    pl = pathloss_db(d3d, cfg.f_dl_hz)
    g = pattern.gain_db(az - bore[None, :], elev, tilt[None, :], cfg.h_bs, d2d)
    rx = p_rs[None, :] + g + cfg.g_ms_dbi - pl
    if shadow_db is not None:
        rx = rx + shadow_db
    return rx


def attach(rsrp_dbm: np.ndarray) -> np.ndarray:
    """Strongest-RSRP serving cell per row; argmax keeps the lowest id on ties."""
    return np.argmax(rsrp_dbm, axis=1)


def rs_sinr_grid(net: Network, rsrp_dbm: np.ndarray, serving: np.ndarray) -> np.ndarray:
    """Linear RS SINR per point; only cells in the server's PCI group interfere."""
    cfg = net.cfg
    group = np.array([c.pci % cfg.pci_reuse for c in net.cells])
    lin = 10.0 ** (rsrp_dbm / 10.0)
    idx = np.arange(len(serving))
    sig = lin[idx, serving]
    same = group[None, :] == group[serving][:, None]
    interf = np.where(same, lin, 0.0).sum(axis=1) - sig
    return sig / (10.0 ** (cfg.noise_dbm / 10.0) + interf)


# ---------------------------------------------------------------- measurements

def _snapshots(cfg: SimulationConfig, aoa_deg: float, rng: np.random.Generator) -> arr.SnapshotSet:
    """UL sounding snapshots at the serving array through the sub-path channel."""
    offsets = cfg.angular_spread_scale * SCM_SUBPATH_OFFSETS_DEG
    sub = aoa_deg + np.concatenate([offsets, -offsets])
    params = ChannelParams(
        aod_deg=sub, aoa_deg=sub,
        phases=rng.uniform(0.0, 2 * math.pi, sub.size),
        speed_mps=cfg.ue_speed_mps,
        direction_deg=rng.uniform(-180.0, 180.0),
        wavenumber=2 * math.pi * cfg.f_ul_hz / SPEED_OF_LIGHT,
    )
    lam0 = SPEED_OF_LIGHT / cfg.f_dl_hz
    t = np.arange(cfg.n_snapshots) * cfg.snapshot_period_s
    # element axis runs so that the channel phase matches the steering convention
    h = np.stack([spatial_channel(params, t, d_s=-s * cfg.element_spacing * lam0)
                  for s in range(cfg.bs_antennas)])
    sym = np.exp(1j * (math.pi / 4 + math.pi / 2 * rng.integers(0, 4, cfg.n_snapshots)))
    p_sig = float(np.mean(np.abs(h) ** 2))
    sigma = math.sqrt(p_sig / 10 ** (cfg.ul_snr_db / 10.0) / 2.0)
    noise = sigma * (rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape))
    return arr.SnapshotSet(h * sym[None, :] + noise)


def estimate_aoa(cfg: SimulationConfig, true_offset_deg: float, rng: np.random.Generator) -> float:
    snaps = _snapshots(cfg, true_offset_deg, rng)
    return arr.capon_estimate(snaps, cfg.array, cfg.capon_step_deg).argmax_deg


def simulate_window(net: Network, round_id: int | None = None,
                    ue_xy: np.ndarray | None = None) -> WindowResult:
    """One measurement window. ``ue_xy`` replaces the random drop when given."""
    cfg = net.cfg
    th = cfg.thresholds
    round_id = net.round if round_id is None else round_id
    if ue_xy is None:
        ue_xy, home = drop_ues(net, round_id)
    else:
        ue_xy = np.asarray(ue_xy, dtype=float).reshape(-1, 2)
        home = np.full(len(ue_xy), -1)
    net.ue_xy, net.ue_home = ue_xy, home
    n_ue, n_cell = len(ue_xy), len(net.cells)

    # one shadowing value per (UE, site): co-sited sectors share the path
    site_of = np.array([c.site for c in net.cells])
    shadow = np.zeros((n_ue, n_cell))
    traffic = np.zeros(n_ue)
    for u in range(n_ue):
        per_site = _rng(cfg, _SHADOW, round_id, u).normal(0.0, cfg.shadow_std_db, cfg.n_sites)
        shadow[u] = per_site[site_of]
        mu = math.log(cfg.traffic_mean_gb) - cfg.traffic_sigma ** 2 / 2.0
        traffic[u] = _rng(cfg, _TRAFFIC, round_id, u).lognormal(mu, cfg.traffic_sigma)

    d2d, az, elev = link_geometry(net, ue_xy) if n_ue else (np.zeros((0, n_cell)),) * 3
    rx = received_power_dbm(net, d2d, az, elev, shadow) if n_ue else np.zeros((0, n_cell))
    serving = attach(rx) if n_ue else np.zeros(0, dtype=int)

    phi = arr.calibrate_phi(cfg.array) if cfg.aod_mode == "phi" else None
    t0 = round_id * cfg.t_mr_min * 60.0
    reports, aoa_err = [], np.full(n_ue, np.nan)
    per_cell = [[] for _ in range(n_cell)]
    for u in range(n_ue):
        c = int(serving[u])
        cell = net.cells[c]
        physical = cell.geometry.boresight_deg + cell.physical_offset_deg
        true_off = (az[u, c] - physical + 180.0) % 360.0 - 180.0
        rng = _rng(cfg, _CHANNEL, round_id, u)
        if abs(true_off) < 90.0:
            aoa = estimate_aoa(cfg, true_off, rng)
            aoa_err[u] = aoa - true_off
        else:
            # behind the array: a ULA folds the direction into its front half
            aoa = estimate_aoa(cfg, math.copysign(180.0, true_off) - true_off, rng)
        aod = arr.ul_to_dl_angle(aoa, cfg.array, phi, cfg.capon_step_deg)
        d3d = math.hypot(d2d[u, c], cfg.h_bs - cfg.h_ms)
        ta, rng_m = measure_ta(d3d)
        mr = MeasurementReport(
            cell_id=c, rsrp_dbm=float(rx[u, c]), range_m=rng_m,
            azimuth_deg=(cell.geometry.boresight_deg + aod) % 360.0,
            timestamp=t0, ta=ta, ue_id=u,
        )
        reports.append(mr)
        per_cell[c].append(u)

    dropped = 0
    stats, maps = [], []
    for cell in net.cells:
        ues = per_cell[cell.cell_id]
        located = {}
        for u in ues:
            mr = reports[u]
            try:
                located[u] = cell.cmap.project(cell.geometry, mr)
            except OutOfSectorError as exc:
                dropped += 1
                log.debug("dropping MR of UE %d: %s", u, exc)
        agg = cell.cmap.snapshot()
        cell.cmap.reset()
        faulty = set(agg.faulty_subareas(th.x_rsrp_dbm))
        mrs = [reports[u] for u in ues]
        offsets = [cell.geometry.azimuth_offset(reports[u].azimuth_deg) for u in located]
        st = summarize_window(
            ranges_m=[m.range_m for m in mrs],
            rsrp_dbm=[m.rsrp_dbm for m in mrs],
            traffic_gb=float(traffic[ues].sum()) if ues else 0.0,
            n_user=len(ues),
            r_exp=cell.state.r_exp,
            th=th,
            faulty_mask=[located.get(u) in faulty for u in ues],
            aod_offsets_deg=offsets,
        )
        stats.append(st)
        maps.append(agg)
    return WindowResult(round_id, stats, maps, reports, serving, aoa_err, dropped)


# ---------------------------------------------------------------- optimization loop

def optimize_round(net: Network, window: WindowResult) -> list[CellDecision]:
    """Run the optimizer on every cell whose t_eOPT schedule is due."""
    cfg = net.cfg
    th = cfg.thresholds
    decisions = []
    for cell in net.cells:
        if window.round_id < cell.next_round:
            continue
        new_state, dec = run_cell_round(cell.state, cell.window, window.stats[cell.cell_id],
                                        window.maps[cell.cell_id], th, window.round_id)
        cell.state = new_state
        if dec.gate.proceed:
            cell.gated_streak = 0
            cell.period = cfg.t_eopt_rounds
        else:
            cell.gated_streak += 1
            if cell.gated_streak >= 2:
                cell.period = min(cell.period * 2, cfg.t_eopt_max_rounds)
                cell.gated_streak = 0
        cell.next_round = window.round_id + cell.period
        decisions.append(dec)
    return decisions


@dataclass
class RunResult:
    network: Network
    kpis: list[KpiReport]
    log: list[dict]
    windows: list[WindowResult]


def run_rounds(net: Network, rounds: int, kpi_grid_m: float | None = None) -> RunResult:
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    kpis = [kpi(net, kpi_grid_m, round_id=net.round)]
    records, windows = [], []
    for _ in range(rounds):
        net.round += 1
        w = simulate_window(net, net.round)
        windows.append(w)
        for dec in optimize_round(net, w):
            rec = dec.record()
            st = w.stats[dec.cell_id]
            rec["r_md_avg_m"] = st.r_md_avg_m
            rec["n_user"] = st.n_user
            records.append(rec)
        kpis.append(kpi(net, kpi_grid_m, round_id=net.round))
    return RunResult(net, kpis, records, windows)


def classify_all(net: Network, window: WindowResult) -> list[Classification | None]:
    th = net.cfg.thresholds
    out = []
    for cell, st in zip(net.cells, window.stats):
        out.append(None if st.n_mr == 0 else classify(st, cell.state.r_exp, th))
    return out


# ---------------------------------------------------------------- KPIs

def area_grid(net: Network, step_m: float):
    """Grid points covering the cluster's fundamental region.

    Returns the points kept, their (row, col) indices and the grid shape.
    """
    sites, shifts = net.sites, net.shifts
    reach = np.abs(sites).max() + net.cfg.isd_m / math.sqrt(3.0)
    n = int(math.ceil(2 * reach / step_m))
    axis = -reach + step_m * (np.arange(n) + 0.5)
    gx, gy = np.meshgrid(axis, axis)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    # inside the region iff the nearest site image is an unshifted site
    diff = pts[:, None, None, :] - (sites[None, :, None, :] + shifts[None, None, :, :])
    d2 = np.einsum("psik,psik->psi", diff, diff)
    flat = d2.reshape(len(pts), -1)
    nearest = np.argmin(flat, axis=1) % shifts.shape[0]
    own = np.sqrt(d2[:, :, 0].min(axis=1))
    keep = (nearest == 0) & (own <= reach)
    if shifts.shape[0] == 1:
        keep &= own <= net.cfg.isd_m / math.sqrt(3.0) * 1.0001
        keep &= _inside_hexes(pts, sites, net.cfg.isd_m)
    rows, cols = np.divmod(np.flatnonzero(keep), n)
    return pts[keep], rows, cols, (n, n)


def _inside_hexes(pts, sites, isd):
    """Inside the union of the sites' hexagons (no wraparound)."""
    inside = np.zeros(len(pts), dtype=bool)
    apothem = isd / 2.0
    for s in sites:
        d = pts - s
        ok = np.ones(len(pts), dtype=bool)
        for k in range(6):
            n = np.array([math.cos(math.radians(60 * k)), math.sin(math.radians(60 * k))])
            ok &= d @ n <= apothem + 1e-9
        inside |= ok
    return inside


def kpi(net: Network, step_m: float | None = None, round_id: int | None = None) -> KpiReport:
    cfg = net.cfg
    step = cfg.kpi_grid_m if step_m is None else step_m
    pts, rows, cols, shape = area_grid(net, step)
    d2d, az, elev = link_geometry(net, pts)
    rx = received_power_dbm(net, d2d, az, elev)
    serving = attach(rx)
    best = rx[np.arange(len(pts)), serving]
    sinr = rs_sinr_grid(net, rx, serving)
    sinr_db = 10.0 * np.log10(sinr)
    se = np.minimum(np.log2(1.0 + sinr), 6.0)
    n_cell = len(net.cells)
    cell_tp = np.array([se[serving == c].mean() if np.any(serving == c) else 0.0
                        for c in range(n_cell)])
    grid = np.full(shape, np.nan)
    grid[rows, cols] = best
    sgrid = np.full(shape, np.nan)
    sgrid[rows, cols] = sinr_db
    holes = np.zeros(shape, dtype=bool)
    holes[rows, cols] = best < -110.0
    _, n_holes = ndimage.label(holes)
    return KpiReport(
        round_id=net.round if round_id is None else round_id,
        rsrp_samples_dbm=np.sort(best),
        coverage_85=float(np.mean(best >= -85.0)),
        coverage_80=float(np.mean(best >= -80.0)),
        hole_count=int(n_holes),
        throughput_proxy=float(cell_tp.mean()),
        rrc_failure_proxy=float(np.mean(sinr_db < -6.0)),
        cell_throughput=cell_tp,
        grid_shape=shape,
        grid_rsrp=grid,
        grid_sinr_db=sgrid,
    )


# ---------------------------------------------------------------- standard scenario

STANDARD_FAULTS = FaultSpec((
    Fault(0, FaultKind.OVERSHOOT_TILT),
    Fault(7, FaultKind.LIMITED_TILT),
    Fault(14, FaultKind.POWER_HOLE),
))


def standard_config(seed: int = 1) -> SimulationConfig:
    """Reference fault scenario: 21 cells, 11 degree planned tilt, 600 m ISD.

    The plan is steep enough that an uptilted sector leaves a hole near its
    own site, and the UE density keeps every sector above the user gate.
    """
    return SimulationConfig(
        isd_m=600.0, theta_geo=4.5, theta_verb=6.5, hpbw_v_deg=6.5,
        sla_v_db=30.0, front_back_db=30.0, ues_per_cell=30, kpi_grid_m=30.0,
        p_rs_min_dbm=6.0, seed=seed,
    )
