"""
Autonomous coverage optimization decision logic.

Each optimization round a cell goes through:

    gate -> classify -> (overshoot | limited | angular) action
         -> progressive filter -> apply

Everything here is a pure function of its inputs except
:class:`ActionWindow`, which each cell owns and appends to once per round.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import AggregatedMap, CellGeometry


class ActionKind(str, enum.Enum):
    DOWN_TILT = "DownTilt"
    UP_TILT = "UpTilt"
    POWER_DOWN = "PowerDown"
    POWER_UP = "PowerUp"
    ROTATE_BEAM = "RotateBeam"
    NOOP = "NoOp"


class Cause(str, enum.Enum):
    OVERSHOOT = "Overshoot"
    LIMITED_MAJORITY = "LimitedMajority"
    LIMITED_OUTER = "LimitedOuter"
    LIMITED_INNER = "LimitedInner"
    ANGULAR_SKEW = "AngularSkew"
    GATED = "Gated"
    NONE = "None"


class Classification(str, enum.Enum):
    OVERSHOOT = "Overshoot"
    LIMITED = "Limited"
    NORMAL = "Normal"


TILTS = (ActionKind.DOWN_TILT, ActionKind.UP_TILT)


@dataclass(frozen=True)
class Thresholds:
    tau_rsrp_dbm: float = -80.0
    tau_traffic_gb: float = 25.0
    tau_user: int = 9
    partial_d: float = 2.1
    epsilon_cov: float = 0.4
    delta_p_db: float = 1.0
    gamma_pct: float = 50.0
    x_rsrp_dbm: float = -85.0
    epsilon_rot_deg: float = 15.0
    coverage_pct: float = 75.0
    rotation_majority: float = 0.8
    branch_majority: float = 0.6

    def __post_init__(self):
        if not self.partial_d > 1.0:
            raise ValueError(f"∂ must exceed 1 (partial_d = {self.partial_d})")
        if not 0.0 < self.epsilon_cov < 1.0:
            raise ValueError(f"epsilon_cov (ε) must lie in (0, 1), got {self.epsilon_cov}")
        if self.partial_d < 2.0 * self.epsilon_cov:
            raise ValueError("partial_d (∂) must be at least 2 x epsilon_cov (ε)")
        if not self.delta_p_db > 0.0:
            raise ValueError("delta_p (Δ) must be positive")
        if not 0.0 <= self.gamma_pct <= 100.0 or not 0.0 <= self.coverage_pct <= 100.0:
            raise ValueError("percentiles must lie in [0, 100]")
        if not 0.5 <= self.rotation_majority <= 1.0 or not 0.5 <= self.branch_majority <= 1.0:
            raise ValueError("majority fractions must lie in [0.5, 1]")
        if not 0.0 <= self.epsilon_rot_deg <= 60.0:
            raise ValueError("epsilon_rot must lie in [0, 60] degrees")


@dataclass(frozen=True)
class CellState:
    cell_id: int
    tilt_deg: int
    tilt_min: int
    tilt_max: int
    p_rs_dbm: float
    p_rs_min: float
    p_rs_max: float
    geometry: CellGeometry
    r_exp: float
    rotation_deg: float = 0.0

    def __post_init__(self):
        if not self.tilt_min <= self.tilt_deg <= self.tilt_max:
            raise ValueError(f"tilt {self.tilt_deg} outside [{self.tilt_min}, {self.tilt_max}]")
        if not self.p_rs_min <= self.p_rs_dbm <= self.p_rs_max:
            raise ValueError(f"P_RS {self.p_rs_dbm} outside [{self.p_rs_min}, {self.p_rs_max}]")
        if abs(self.rotation_deg) > 60.0:
            raise ValueError("beam rotation beyond the 60 degree half-sector")

    @property
    def can_down_tilt(self) -> bool:
        return self.tilt_deg < self.tilt_max

    @property
    def can_up_tilt(self) -> bool:
        return self.tilt_deg > self.tilt_min

    @property
    def can_power_down(self) -> bool:
        return self.p_rs_dbm > self.p_rs_min

    @property
    def can_power_up(self) -> bool:
        return self.p_rs_dbm < self.p_rs_max


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    magnitude: float = 0.0
    cause: Cause = Cause.NONE
    window_id: int = 0
    sign: int = 0
    note: str = ""
    clamped: bool = False

    def __post_init__(self):
        if self.kind is ActionKind.NOOP:
            if self.magnitude != 0:
                raise ValueError("NoOp carries no magnitude")
        elif not self.magnitude > 0:
            raise ValueError(f"{self.kind.value} needs a positive magnitude")

    @classmethod
    def noop(cls, cause: Cause = Cause.NONE, note: str = "", window_id: int = 0) -> "Action":
        return cls(ActionKind.NOOP, 0.0, cause, window_id, note=note)

    @property
    def is_tilt(self) -> bool:
        return self.kind in TILTS

    def describe(self) -> str:
        if self.kind is ActionKind.NOOP:
            return "NoOp" + (f"({self.note})" if self.note else "")
        if self.kind is ActionKind.ROTATE_BEAM:
            side = "left" if self.sign < 0 else "right"
            return f"RotateBeam({self.magnitude:g},{side})"
        return f"{self.kind.value}({self.magnitude:g})"


class ActionWindow:
    """Last ``size`` applied actions of one cell, oldest first."""

    def __init__(self, size: int = 3):
        if size < 1:
            raise ValueError("window size must be >= 1")
        self.size = size
        self._items: deque[Action] = deque(maxlen=size)

    def push(self, action: Action):
        self._items.append(action)

    @property
    def history(self) -> list[Action]:
        return list(self._items)

    def __len__(self):
        return len(self._items)


@dataclass(frozen=True)
class CellWindowStats:
    """One cell's measurement-window summary.

    ``rsrp_cov_dbm`` is the RSRP level met or exceeded by the probe share
    (75%) of the window's reports. ``r_md_gamma_m`` is the gamma-th percentile
    of reported ranges of users in faulty sub-areas (all users when no
    sub-area is faulty); ``gamma_majority`` is the share of those users on the
    same side of R_exp/2 as that percentile.
    """
    r_md_avg_m: float
    r_md_gamma_m: float
    rsrp_cov_dbm: float
    v_traffic_gb: float
    n_user: int
    gamma_majority: float = 1.0
    aod_left: int = 0
    aod_right: int = 0
    n_mr: int = -1

    @property
    def has_reports(self) -> bool:
        return self.n_mr != 0 and self.n_user > 0


@dataclass(frozen=True)
class GateResult:
    proceed: bool
    reason: str = ""

    def __str__(self):
        return "Proceed" if self.proceed else f"Gated({self.reason})"


PROCEED = GateResult(True)


def gate(stats: CellWindowStats, th: Thresholds) -> GateResult:
    """Proceed only for substandard coverage backed by enough traffic and users."""
    if not stats.has_reports:
        return GateResult(False, "no-data")
    if not stats.rsrp_cov_dbm <= th.tau_rsrp_dbm:
        return GateResult(False, "coverage-adequate")
    if not stats.v_traffic_gb >= th.tau_traffic_gb:
        return GateResult(False, "traffic")
    if not stats.n_user >= th.tau_user:
        return GateResult(False, "users")
    return PROCEED


def classify(stats: CellWindowStats, r_exp: float, th: Thresholds) -> Classification:
    if stats.r_md_avg_m > th.partial_d * r_exp:
        return Classification.OVERSHOOT
    if stats.r_md_avg_m < th.epsilon_cov * r_exp:
        return Classification.LIMITED
    return Classification.NORMAL


def tilt_correction(h_bs: float, h_ms: float, d_prime: float) -> int:
    """floor(atan((H_bs - h_ms) / 2d')) in whole degrees."""
    if not d_prime > 0:
        raise ValueError("d' must be positive")
    return int(math.floor(math.degrees(math.atan((h_bs - h_ms) / (2.0 * d_prime)))))


def _power_step(state: CellState, down: bool, th: Thresholds, cause: Cause) -> Action:
    if down and state.can_power_down:
        return Action(ActionKind.POWER_DOWN, th.delta_p_db, cause)
    if not down and state.can_power_up:
        return Action(ActionKind.POWER_UP, th.delta_p_db, cause)
    return Action.noop(cause, "exhausted")


def _tilt_or_power(state: CellState, down: bool, d_prime: float, th: Thresholds,
                   cause: Cause) -> Action:
    """Tilt by the corrected angle; fall back to the matching power step when
    the tilt is pinned at its limit or the correction floors to zero."""
    g = state.geometry
    step = tilt_correction(g.h_bs, g.h_ms, d_prime)
    headroom = state.can_down_tilt if down else state.can_up_tilt
    if step >= 1 and headroom:
        kind = ActionKind.DOWN_TILT if down else ActionKind.UP_TILT
        return Action(kind, float(step), cause)
    return _power_step(state, down, th, cause)


def overshoot_action(state: CellState, stats: CellWindowStats, th: Thresholds) -> Action:
    d_prime = stats.r_md_avg_m - state.r_exp
    return _tilt_or_power(state, True, d_prime, th, Cause.OVERSHOOT)


def limited_action(state: CellState, agg: AggregatedMap, stats: CellWindowStats,
                   th: Thresholds) -> Action:
    if agg.total_count == 0 or not stats.has_reports:
        return Action.noop(Cause.LIMITED_MAJORITY, "no-data")
    half = state.r_exp / 2.0
    inner_d, outer_d = state.r_exp / 4.0, state.r_exp / 2.0 + state.r_exp / 4.0
    if stats.gamma_majority >= th.branch_majority:
        down = stats.r_md_gamma_m < half
        return _tilt_or_power(state, down, inner_d if down else outer_d, th,
                              Cause.LIMITED_MAJORITY)
    c_a, c_b = faulty_counts(agg, half, th.x_rsrp_dbm)
    if c_a > c_b:
        return _tilt_or_power(state, False, outer_d, th, Cause.LIMITED_OUTER)
    return _tilt_or_power(state, True, inner_d, th, Cause.LIMITED_INNER)


def faulty_counts(agg: AggregatedMap, half_range: float, x_rsrp_dbm: float) -> tuple[int, int]:
    """(C_a, C_b): faulty sub-areas whose radial midpoint lies beyond / within ``half_range``."""
    c_a = c_b = 0
    rings = agg.rings
    for ring, _ in agg.faulty_subareas(x_rsrp_dbm):
        mid = 0.5 * (rings.inner_radius(ring) + rings.boundaries[ring])
        if mid > half_range:
            c_a += 1
        elif mid < half_range:
            c_b += 1
    return c_a, c_b


def angular_action(stats: CellWindowStats, th: Thresholds) -> Action:
    left, right = stats.aod_left, stats.aod_right
    total = left + right
    if total == 0 or th.epsilon_rot_deg == 0:
        return Action.noop()
    heavy, sign = (left, -1) if left > right else (right, 1)
    if heavy / total >= th.rotation_majority:
        return Action(ActionKind.ROTATE_BEAM, th.epsilon_rot_deg, Cause.ANGULAR_SKEW, sign=sign)
    return Action.noop()


def progressive_filter(window: ActionWindow, proposed: Action, state: CellState,
                       th: Thresholds) -> Action:
    """Swap a tilt for the matching power step when the previous W-1 applied
    actions were all tilts in the same direction."""
    if not proposed.is_tilt:
        return proposed
    streak = window.size - 1
    history = window.history
    if streak < 1 or len(history) < streak:
        return proposed
    if all(a.kind is proposed.kind for a in history[-streak:]):
        return _power_step(state, proposed.kind is ActionKind.DOWN_TILT, th, proposed.cause)
    return proposed


def apply(state: CellState, action: Action) -> tuple[CellState, Action]:
    """Update the cell's controls, clamping to bounds. Returns the new state
    and the action annotated with whether it was clamped."""
    k = action.kind
    if k is ActionKind.NOOP:
        return state, action
    if k in TILTS:
        delta = int(action.magnitude) * (1 if k is ActionKind.DOWN_TILT else -1)
        target = state.tilt_deg + delta
        new = min(max(target, state.tilt_min), state.tilt_max)
        return replace(state, tilt_deg=new), replace(action, clamped=new != target)
    if k in (ActionKind.POWER_DOWN, ActionKind.POWER_UP):
        delta = action.magnitude * (-1 if k is ActionKind.POWER_DOWN else 1)
        target = state.p_rs_dbm + delta
        new = min(max(target, state.p_rs_min), state.p_rs_max)
        return replace(state, p_rs_dbm=new), replace(action, clamped=new != target)
    # beam rotation is an absolute offset of +-epsilon from the DL directions
    target = action.sign * action.magnitude
    new = min(max(target, -60.0), 60.0)
    return replace(state, rotation_deg=new), replace(action, clamped=new != target)


@dataclass(frozen=True)
class CellDecision:
    round_id: int
    cell_id: int
    gate: GateResult
    classification: Classification | None
    proposed: Action
    applied: Action
    state: CellState = field(repr=False)

    def record(self) -> dict:
        s = self.state
        return {
            "round": self.round_id,
            "cell_id": self.cell_id,
            "gate_result": str(self.gate),
            "classification": self.classification.value if self.classification else None,
            "proposed_action": self.proposed.describe(),
            "applied_action": self.applied.describe(),
            "cause": self.applied.cause.value,
            "tilt_deg": s.tilt_deg,
            "p_rs_dbm": s.p_rs_dbm,
            "rotation_deg": s.rotation_deg,
            "clamped": self.applied.clamped,
        }


def decide(state: CellState, window: ActionWindow, stats: CellWindowStats,
           agg: AggregatedMap, th: Thresholds) -> tuple[GateResult, Classification | None, Action]:
    """Gate, classify and propose, without touching the window."""
    g = gate(stats, th)
    if not g.proceed:
        return g, None, Action.noop(Cause.GATED, g.reason)
    cls = classify(stats, state.r_exp, th)
    if cls is Classification.OVERSHOOT:
        return g, cls, overshoot_action(state, stats, th)
    if cls is Classification.LIMITED:
        return g, cls, limited_action(state, agg, stats, th)
    return g, cls, angular_action(stats, th)


def run_cell_round(state: CellState, window: ActionWindow, stats: CellWindowStats,
                   agg: AggregatedMap, th: Thresholds, round_id: int = 0
                   ) -> tuple[CellState, CellDecision]:
    g, cls, proposed = decide(state, window, stats, agg, th)
    proposed = replace(proposed, window_id=round_id)
    filtered = progressive_filter(window, proposed, state, th)
    filtered = replace(filtered, window_id=round_id)
    new_state, applied = apply(state, filtered)
    window.push(applied)
    return new_state, CellDecision(round_id, state.cell_id, g, cls, proposed, applied, new_state)


def summarize_window(ranges_m, rsrp_dbm, traffic_gb, n_user: int, r_exp: float,
                     th: Thresholds, faulty_mask=None, aod_offsets_deg=()) -> CellWindowStats:
    """Build :class:`CellWindowStats` from one window's per-report samples.

    ``faulty_mask`` flags reports that landed in a faulty sub-area; the
    gamma percentile runs over those when any exist.
    """
    ranges = np.asarray(ranges_m, dtype=float)
    rsrp_s = np.asarray(rsrp_dbm, dtype=float)
    aod = np.asarray(aod_offsets_deg, dtype=float)
    left = int(np.count_nonzero(aod < 0))
    right = int(aod.size - left)
    if ranges.size == 0:
        return CellWindowStats(math.nan, math.nan, math.nan, float(traffic_gb), int(n_user),
                               0.0, left, right, 0)
    sample = ranges
    if faulty_mask is not None and np.any(faulty_mask):
        sample = ranges[np.asarray(faulty_mask, dtype=bool)]
    r_gamma = float(np.percentile(sample, th.gamma_pct))
    below = float(np.mean(sample < r_exp / 2.0))
    majority = below if r_gamma < r_exp / 2.0 else 1.0 - below
    rsrp_cov = float(np.percentile(rsrp_s, 100.0 - th.coverage_pct))
    return CellWindowStats(
        r_md_avg_m=float(ranges.mean()),
        r_md_gamma_m=r_gamma,
        rsrp_cov_dbm=rsrp_cov,
        v_traffic_gb=float(traffic_gb),
        n_user=int(n_user),
        gamma_majority=majority,
        aod_left=left,
        aod_right=right,
        n_mr=int(ranges.size),
    )
