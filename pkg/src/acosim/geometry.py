"""
Per-cell ideal coverage and the angle-distance virtual coverage map.

Measurement reports are projected onto sub-areas laid out as distance rings
around the site, each ring split into equal angular bins across the 120
degree sector. Ring angle splits grow (never shrink) with distance.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

SECTOR_WIDTH_DEG = 120.0
HALF_SECTOR_DEG = SECTOR_WIDTH_DEG / 2.0


class DegenerateGeometryError(ValueError):
    pass


class OutOfSectorError(ValueError):
    pass


@dataclass(frozen=True)
class CellGeometry:
    x_m: float
    y_m: float
    boresight_deg: float
    h_bs: float = 30.0
    h_ms: float = 1.5
    theta_geo: float = 2.0
    theta_verb: float = 6.5
    sector_width_deg: float = SECTOR_WIDTH_DEG

    def __post_init__(self):
        if not self.h_bs > self.h_ms > 0:
            raise DegenerateGeometryError(
                f"need H_BS > h_MS > 0, got H_BS={self.h_bs}, h_MS={self.h_ms}"
            )
        tilt = self.theta_geo + self.theta_verb
        if not 0.0 < tilt < 90.0:
            raise DegenerateGeometryError(f"total tilt {tilt} deg outside (0, 90)")

    @property
    def theta_tilt(self) -> float:
        return self.theta_geo + self.theta_verb

    def azimuth_offset(self, azimuth_deg: float) -> float:
        """Signed angle from boresight, wrapped into [-180, 180)."""
        return (azimuth_deg - self.boresight_deg + 180.0) % 360.0 - 180.0


@dataclass(frozen=True)
class IdealCoverage:
    theta_tilt: float
    r_exp: float
    d: float
    n_d: int


def ideal_coverage(geom: CellGeometry, n_d: int) -> IdealCoverage:
    """Planned cell range from antenna height and total downtilt.

    >>> cov = ideal_coverage(CellGeometry(0, 0, 30, 30.0, 1.5, 2.0, 6.5), 4)
    >>> round(cov.r_exp, 1), round(cov.d, 1)
    (190.7, 47.7)
    """
    if n_d < 1:
        raise ValueError("n_d must be >= 1")
    tilt = geom.theta_geo + geom.theta_verb
    if not 0.0 < tilt < 90.0:
        raise DegenerateGeometryError(f"total tilt {tilt} deg outside (0, 90)")
    r_exp = (geom.h_bs - geom.h_ms) / math.tan(math.radians(tilt))
    if not r_exp > 0.0:
        raise DegenerateGeometryError("ideal range must be positive")
    return IdealCoverage(theta_tilt=tilt, r_exp=r_exp, d=r_exp / n_d, n_d=n_d)


def empirical_gain(h_bs: float, r_exp: float, theta_verb: float) -> float:
    """3 ln(H_BS - R_exp^0.8) log10(theta_VerB).

    Only defined while H_BS exceeds R_exp^0.8; callers outside that range
    either clamp the range or skip the correction.
    """
    arg = h_bs - r_exp ** 0.8
    if arg <= 0.0:
        raise ValueError(f"H_BS - R_exp^0.8 = {arg:.3f} <= 0, empirical gain undefined")
    if theta_verb <= 1.0:
        raise ValueError("theta_VerB must exceed 1 degree")
    return 3.0 * math.log(arg) * math.log10(theta_verb)


@dataclass(frozen=True)
class RingSpec:
    """Ring outer radii and per-ring angular split counts.

    Ring i covers ranges (boundaries[i-1], boundaries[i]]; ring 0 starts at 0.
    """
    splits: tuple[int, ...]
    boundaries: tuple[float, ...]

    def __post_init__(self):
        splits = tuple(int(s) for s in self.splits)
        bounds = tuple(float(b) for b in self.boundaries)
        object.__setattr__(self, "splits", splits)
        object.__setattr__(self, "boundaries", bounds)
        if len(splits) < 1:
            raise ValueError("at least one ring is required")
        if len(bounds) != len(splits):
            raise ValueError(
                f"n_d mismatch: {len(splits)} split counts vs {len(bounds)} ring boundaries"
            )
        if any(s < 1 for s in splits):
            raise ValueError("every ring needs at least one angle bin")
        if any(b < a for a, b in zip(splits, splits[1:])):
            raise ValueError(f"angle splits must be non-decreasing with distance: {splits}")
        if bounds[0] <= 0 or any(b <= a for a, b in zip(bounds, bounds[1:])):
            raise ValueError(f"ring boundaries must be positive and strictly increasing: {bounds}")

    @classmethod
    def uniform(cls, r_exp: float, splits, margin: float = 1.0) -> "RingSpec":
        n_d = len(splits)
        outer = r_exp * margin
        return cls(tuple(splits), tuple(outer * (i + 1) / n_d for i in range(n_d)))

    @property
    def n_d(self) -> int:
        return len(self.splits)

    @property
    def n_subareas(self) -> int:
        return sum(self.splits)

    def ring_of(self, range_m: float) -> int:
        for i, b in enumerate(self.boundaries):
            if range_m <= b:
                return i
        return self.n_d - 1

    def bin_of(self, ring: int, offset_deg: float) -> int:
        k = self.splits[ring]
        width = SECTOR_WIDTH_DEG / k
        return min(int(math.floor((offset_deg + HALF_SECTOR_DEG) / width)), k - 1)

    def inner_radius(self, ring: int) -> float:
        return 0.0 if ring == 0 else self.boundaries[ring - 1]

    def angle_bounds(self, ring: int, angle_bin: int) -> tuple[float, float]:
        width = SECTOR_WIDTH_DEG / self.splits[ring]
        start = -HALF_SECTOR_DEG + angle_bin * width
        return start, start + width

    def subareas(self):
        """(ring, angle_bin) pairs in storage order."""
        return [(r, a) for r, k in enumerate(self.splits) for a in range(k)]

    def flat_index(self, ring: int, angle_bin: int) -> int:
        return sum(self.splits[:ring]) + angle_bin

    def centroid(self, ring: int, angle_bin: int) -> tuple[float, float]:
        """Area centroid of an annular sector as (range m, offset deg)."""
        r0, r1 = self.inner_radius(ring), self.boundaries[ring]
        a0, a1 = self.angle_bounds(ring, angle_bin)
        r_c = 2.0 / 3.0 * (r1 ** 3 - r0 ** 3) / (r1 ** 2 - r0 ** 2)
        return r_c, 0.5 * (a0 + a1)


@dataclass(frozen=True)
class MeasurementReport:
    cell_id: int
    rsrp_dbm: float
    range_m: float
    azimuth_deg: float
    timestamp: float = 0.0
    ta: int | None = None
    ue_id: int | None = None


@dataclass(frozen=True)
class AggregatedMap:
    """Frozen per-window sub-area statistics; NaN means no data."""
    cell_id: int
    rings: RingSpec
    count: np.ndarray
    mean_rsrp_dbm: np.ndarray
    mean_range_m: np.ndarray
    t_start: float = math.nan
    t_end: float = math.nan

    def has_data(self, ring: int, angle_bin: int) -> bool:
        return self.count[self.rings.flat_index(ring, angle_bin)] > 0

    @property
    def total_count(self) -> int:
        return int(self.count.sum())

    def faulty_subareas(self, x_rsrp_dbm: float) -> list[tuple[int, int]]:
        """Sub-areas with data whose mean RSRP falls below ``x_rsrp_dbm``."""
        out = []
        for idx, (r, a) in enumerate(self.rings.subareas()):
            if self.count[idx] > 0 and self.mean_rsrp_dbm[idx] < x_rsrp_dbm:
                out.append((r, a))
        return out

    def rows(self):
        for idx, (r, a) in enumerate(self.rings.subareas()):
            start, end = self.rings.angle_bounds(r, a)
            n = int(self.count[idx])
            yield {
                "cell_id": self.cell_id,
                "ring": r,
                "angle_bin": a,
                "inner_radius_m": self.rings.inner_radius(r),
                "outer_radius_m": self.rings.boundaries[r],
                "start_deg": start,
                "end_deg": end,
                "count": n,
                "mean_rsrp_dbm": float(self.mean_rsrp_dbm[idx]) if n else None,
                "mean_range_m": float(self.mean_range_m[idx]) if n else None,
            }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=MAP_CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows():
            writer.writerow({k: ("" if v is None else _fmt(v)) for k, v in row.items()})
        return buf.getvalue()


MAP_CSV_FIELDS = [
    "cell_id", "ring", "angle_bin", "inner_radius_m", "outer_radius_m",
    "start_deg", "end_deg", "count", "mean_rsrp_dbm", "mean_range_m",
]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def read_map_csv(text: str) -> list[dict]:
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        parsed = {}
        for k, v in row.items():
            if k in ("cell_id", "ring", "angle_bin", "count"):
                parsed[k] = int(v)
            else:
                parsed[k] = None if v == "" else float(v)
        rows.append(parsed)
    return rows


@dataclass
class CoverageMap:
    """Mutable per-cell accumulator for the current measurement window.

    Single writer per cell; readers take :meth:`snapshot` copies.
    """
    cell_id: int
    rings: RingSpec
    linear_rsrp: bool = False
    _count: np.ndarray = field(init=False, repr=False)
    _rsrp_acc: np.ndarray = field(init=False, repr=False)
    _range_acc: np.ndarray = field(init=False, repr=False)
    t_start: float = field(init=False, default=math.nan)
    t_end: float = field(init=False, default=math.nan)

    def __post_init__(self):
        self.reset()

    def reset(self):
        n = self.rings.n_subareas
        self._count = np.zeros(n, dtype=np.int64)
        self._rsrp_acc = np.zeros(n)
        self._range_acc = np.zeros(n)
        self.t_start = math.nan
        self.t_end = math.nan

    @property
    def n_subareas(self) -> int:
        return self.rings.n_subareas

    def locate(self, geom: CellGeometry, range_m: float, azimuth_deg: float) -> tuple[int, int]:
        if range_m < 0:
            raise ValueError("MR range must be non-negative")
        offset = geom.azimuth_offset(azimuth_deg)
        if abs(offset) > HALF_SECTOR_DEG:
            raise OutOfSectorError(
                f"cell {self.cell_id}: azimuth {azimuth_deg:.2f} deg is {offset:.2f} deg off boresight"
            )
        ring = self.rings.ring_of(range_m)
        return ring, self.rings.bin_of(ring, offset)

    def project(self, geom: CellGeometry, mr: MeasurementReport) -> tuple[int, int]:
        ring, ab = self.locate(geom, mr.range_m, mr.azimuth_deg)
        idx = self.rings.flat_index(ring, ab)
        self._count[idx] += 1
        self._rsrp_acc[idx] += 10.0 ** (mr.rsrp_dbm / 10.0) if self.linear_rsrp else mr.rsrp_dbm
        self._range_acc[idx] += mr.range_m
        self.t_start = mr.timestamp if math.isnan(self.t_start) else min(self.t_start, mr.timestamp)
        self.t_end = mr.timestamp if math.isnan(self.t_end) else max(self.t_end, mr.timestamp)
        return ring, ab

    def snapshot(self) -> AggregatedMap:
        n = self._count
        with np.errstate(invalid="ignore", divide="ignore"):
            mean_rsrp = np.where(n > 0, self._rsrp_acc / np.maximum(n, 1), np.nan)
            if self.linear_rsrp:
                mean_rsrp = np.where(n > 0, 10.0 * np.log10(mean_rsrp), np.nan)
            mean_range = np.where(n > 0, self._range_acc / np.maximum(n, 1), np.nan)
        return AggregatedMap(
            cell_id=self.cell_id,
            rings=self.rings,
            count=n.copy(),
            mean_rsrp_dbm=mean_rsrp,
            mean_range_m=mean_range,
            t_start=self.t_start,
            t_end=self.t_end,
        )


def build_map(ideal: IdealCoverage, rings: RingSpec, cell_id: int = 0,
              linear_rsrp: bool = False) -> CoverageMap:
    if rings.n_d != ideal.n_d:
        raise ValueError(f"RingSpec has {rings.n_d} rings but the ideal coverage uses n_d={ideal.n_d}")
    return CoverageMap(cell_id=cell_id, rings=rings, linear_rsrp=linear_rsrp)


def project_mr(cmap: CoverageMap, geom: CellGeometry, mr: MeasurementReport) -> tuple[int, int]:
    return cmap.project(geom, mr)


def window_average(cmap: CoverageMap) -> AggregatedMap:
    """Freeze the window's statistics and clear the accumulators."""
    snap = cmap.snapshot()
    cmap.reset()
    return snap
