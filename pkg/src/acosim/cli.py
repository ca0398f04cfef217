"""
Command-line entry point.

    acosim run --scenario s.ini --rounds 2 --seed 7 --out results/
    acosim validate --scenario s.ini
    acosim defaults > base.ini

Set ACOSIM_LOG_LEVEL (DEBUG, INFO, ...) to change log verbosity.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import shutil
import sys
import tempfile
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .scenario import ScenarioError, ScenarioWarning, load_scenario, serialize_scenario
from .sim import RunResult, SimulationConfig, drop_network, run_rounds

log = logging.getLogger("acosim")

LOG_ENV = "ACOSIM_LOG_LEVEL"
KPI_CSV_FIELDS = [
    "round", "coverage_prob_85dbm", "coverage_prob_80dbm", "coverage_hole_count",
    "throughput_proxy_bps_hz", "rrc_failure_proxy",
]
GRID_CSV_FIELDS = ["row", "col", "rsrp_dbm", "sinr_db"]


@dataclass(frozen=True)
class RunManifest:
    scenario: str
    out: str
    rounds: int
    seed: int | None = None
    emit_heatmaps: bool = False
    emit_maps: bool = False
    emit_actions: bool = True
    lenient: bool = False
    version: str = __version__

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")


def fmt(value) -> str:
    """Text form shared by CSV fields and the stdout summary."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def rsrp_to_gray(rsrp_dbm):
    """gray = clamp((rsrp + 140) / 70, 0, 1) * 255, rounded; NaN bins map to 0."""
    x = np.clip((np.asarray(rsrp_dbm, dtype=float) + 140.0) / 70.0, 0.0, 1.0)
    gray = np.rint(x * 255.0)
    return np.where(np.isnan(gray), 0, gray).astype(np.uint8)


def pgm_bytes(gray: np.ndarray) -> bytes:
    h, w = gray.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(gray, np.uint8).tobytes()


def kpi_csv(summary: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(KPI_CSV_FIELDS)
    writer.writerow([fmt(summary[k]) for k in KPI_CSV_FIELDS])
    return buf.getvalue()


def grid_csv(rsrp: np.ndarray, sinr: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(GRID_CSV_FIELDS)
    for r, c in zip(*np.nonzero(~np.isnan(rsrp))):
        writer.writerow([r, c, fmt(rsrp[r, c]), fmt(sinr[r, c])])
    return buf.getvalue()


def _json_safe(rec: dict) -> dict:
    out = {}
    for k, v in rec.items():
        if isinstance(v, (float, np.floating)):
            v = None if math.isnan(v) else float(v)
        elif isinstance(v, np.integer):
            v = int(v)
        out[k] = v
    return out


def artifacts(result: RunResult, manifest: RunManifest) -> dict[str, bytes]:
    """Every output file of a run, keyed by file name."""
    files: dict[str, bytes] = {}
    for rep in result.kpis:
        files[f"kpi_round_{rep.round_id}.csv"] = kpi_csv(rep.summary()).encode()
        if manifest.emit_heatmaps and rep.grid_rsrp is not None:
            files[f"heatmap_round_{rep.round_id}.pgm"] = pgm_bytes(rsrp_to_gray(rep.grid_rsrp))
            files[f"heatmap_round_{rep.round_id}.csv"] = grid_csv(rep.grid_rsrp, rep.grid_sinr_db).encode()
    if manifest.emit_actions:
        lines = [json.dumps(_json_safe(r), sort_keys=True) for r in result.log]
        files["actions.jsonl"] = ("\n".join(lines) + ("\n" if lines else "")).encode()
    if manifest.emit_maps:
        for w in result.windows:
            for agg in w.maps:
                files[f"map_cell_{agg.cell_id}_round_{w.round_id}.csv"] = agg.to_csv().encode()
    return files


def write_atomic(out_dir: Path, files: dict[str, bytes]):
    """Write into a sibling temp directory, then rename it into place."""
    out_dir = Path(out_dir)
    if out_dir.exists() and (not out_dir.is_dir() or any(out_dir.iterdir())):
        raise FileExistsError(f"output directory {out_dir} exists and is not empty")
    parent = out_dir.parent
    parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.", dir=parent))
    try:
        for name, data in sorted(files.items()):
            (tmp / name).write_bytes(data)
        if out_dir.exists():
            out_dir.rmdir()
        os.replace(tmp, out_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def summary_table(result: RunResult) -> str:
    rows = [("round", "coverage_prob_85dbm", "coverage_hole_count")]
    for rep in result.kpis:
        s = rep.summary()
        rows.append((fmt(s["round"]), fmt(s["coverage_prob_85dbm"]), fmt(s["coverage_hole_count"])))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows)


def run(manifest: RunManifest) -> RunResult:
    scen = load_scenario(manifest.scenario, strict=not manifest.lenient)
    cfg = scen.config if manifest.seed is None else replace(scen.config, seed=manifest.seed)
    log.info("running %d rounds on %d cells (seed %d)", manifest.rounds, cfg.n_cells, cfg.seed)
    result = run_rounds(drop_network(cfg, scen.faults), manifest.rounds)
    write_atomic(Path(manifest.out), artifacts(result, manifest))
    return result


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="acosim", description="Autonomous coverage optimization simulator")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate optimization rounds and write artifacts")
    p.add_argument("--scenario", required=True, help="scenario INI file")
    p.add_argument("--rounds", type=int, default=2)
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out", required=True, help="output directory (must be new or empty)")
    p.add_argument("--emit-heatmaps", action="store_true", help="write PGM and CSV area grids")
    p.add_argument("--emit-maps", action="store_true", help="write per-cell coverage maps")
    p.add_argument("--lenient", action="store_true", help="warn on unknown keys instead of failing")

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--lenient", action="store_true")

    sub.add_parser("defaults", help="print the default scenario")
    return ap


def _setup_logging():
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always", ScenarioWarning)
            warnings.showwarning = lambda msg, *a, **k: print(f"warning: {msg}", file=sys.stderr)
            if args.command == "defaults":
                sys.stdout.write(serialize_scenario(SimulationConfig()))
                return 0
            if args.command == "validate":
                scen = load_scenario(args.scenario, strict=not args.lenient)
                print(f"ok: {scen.config.n_cells} cells, {len(scen.faults)} faults")
                return 0
            manifest = RunManifest(args.scenario, args.out, args.rounds, args.seed,
                                   args.emit_heatmaps, args.emit_maps, lenient=args.lenient)
            result = run(manifest)
            print(summary_table(result))
            return 0
    except ScenarioError as exc:
        print(f"error: {args.scenario}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
