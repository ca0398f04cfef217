import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from acosim import cli
from acosim.cli import (
    KPI_CSV_FIELDS,
    RunManifest,
    artifacts,
    main,
    pgm_bytes,
    rsrp_to_gray,
    write_atomic,
)
from acosim.scenario import parse_scenario
from acosim.sim import SimulationConfig


@pytest.fixture()
def default_ini(tmp_path):
    path = tmp_path / "default.ini"
    path.write_text("")
    return path


def read_csv(path):
    return list(csv.DictReader(io.StringIO(Path(path).read_text())))


def test_run_writes_kpis_and_action_log(default_ini, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--scenario", str(default_ini), "--rounds", "2", "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["actions.jsonl", "kpi_round_0.csv", "kpi_round_1.csv", "kpi_round_2.csv"]

    lines = (out / "actions.jsonl").read_text().splitlines()
    records = [json.loads(line) for line in lines]
    assert {r["round"] for r in records} <= {1, 2}
    assert all(0 <= r["cell_id"] < 21 for r in records)

    # summary table values equal the CSV fields
    table = capsys.readouterr().out.splitlines()
    assert table[0].split() == ["round", "coverage_prob_85dbm", "coverage_hole_count"]
    for k, row in enumerate(table[1:]):
        (kpi,) = read_csv(out / f"kpi_round_{k}.csv")
        assert list(kpi) == KPI_CSV_FIELDS
        assert row.split() == [kpi["round"], kpi["coverage_prob_85dbm"], kpi["coverage_hole_count"]]
        assert 0.0 <= float(kpi["coverage_prob_85dbm"]) <= 1.0


def test_seeded_runs_are_byte_identical(default_ini, tmp_path):
    outs = [tmp_path / "a", tmp_path / "b", tmp_path / "c"]
    for out, seed in zip(outs, ["7", "7", "8"]):
        assert main(["run", "--scenario", str(default_ini), "--rounds", "1", "--seed", seed,
                     "--out", str(out), "--emit-heatmaps", "--emit-maps"]) == 0

    def contents(d):
        return {p.name: p.read_bytes() for p in sorted(d.iterdir())}

    assert contents(outs[0]) == contents(outs[1])
    assert contents(outs[0]) != contents(outs[2])


def test_heatmap_and_map_outputs(default_ini, tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--scenario", str(default_ini), "--rounds", "1", "--out", str(out),
                 "--emit-heatmaps", "--emit-maps"]) == 0
    pgm = (out / "heatmap_round_1.pgm").read_bytes()
    magic, dims, maxval, _ = pgm.split(b"\n", 3)
    w, h = map(int, dims.split())
    assert (magic, maxval) == (b"P5", b"255")
    assert len(pgm) == len(b"\n".join([magic, dims, maxval])) + 1 + w * h
    rows = read_csv(out / "heatmap_round_1.csv")
    assert rows and set(rows[0]) == {"row", "col", "rsrp_dbm", "sinr_db"}
    # each CSV bin maps onto the documented gray level
    body = np.frombuffer(pgm[-w * h:], np.uint8).reshape(h, w)
    for r in rows[:50]:
        expected = round(min(max((float(r["rsrp_dbm"]) + 140.0) / 70.0, 0.0), 1.0) * 255.0)
        assert body[int(r["row"]), int(r["col"])] == expected
    assert len(list(out.glob("map_cell_*_round_1.csv"))) == 21


def test_rsrp_gray_mapping():
    g = rsrp_to_gray([-150.0, -140.0, -105.0, -70.0, -20.0, np.nan])
    assert g.tolist() == [0, 0, 128, 255, 255, 0]
    assert pgm_bytes(np.zeros((2, 3), np.uint8)) == b"P5\n3 2\n255\n" + bytes(6)


def test_unwritable_output_fails_cleanly(default_ini, tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code = main(["run", "--scenario", str(default_ini), "--rounds", "1", "--out", str(blocker / "out")])
    assert code != 0
    assert "error" in capsys.readouterr().err
    assert sorted(p.name for p in tmp_path.iterdir()) == ["default.ini", "file"]


def test_interrupted_write_leaves_nothing(tmp_path, monkeypatch):
    calls = []
    real = Path.write_bytes

    def flaky(self, data):
        calls.append(self)
        if len(calls) == 2:
            raise OSError("disk full")
        return real(self, data)

    monkeypatch.setattr(Path, "write_bytes", flaky)
    with pytest.raises(OSError, match="disk full"):
        write_atomic(tmp_path / "out", {"a.csv": b"1", "b.csv": b"2", "c.csv": b"3"})
    assert list(tmp_path.iterdir()) == []


def test_non_empty_output_is_refused(default_ini, tmp_path):
    out = tmp_path / "out"
    out.mkdir()
    (out / "keep.txt").write_text("mine")
    assert main(["run", "--scenario", str(default_ini), "--rounds", "1", "--out", str(out)]) == 1
    assert [p.name for p in out.iterdir()] == ["keep.txt"]


def test_bad_scenario_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[thresholds]\npartial_d = 0.3\n")
    assert main(["run", "--scenario", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "∂ must exceed 1" in capsys.readouterr().err
    assert main(["validate", "--scenario", str(bad)]) == 2
    assert not (tmp_path / "o").exists()


def test_validate_and_lenient(tmp_path, capsys):
    path = tmp_path / "s.ini"
    path.write_text("[network]\nextra = 1\n[faults]\n3 = PowerHole\n")
    assert main(["validate", "--scenario", str(path)]) == 2
    assert main(["validate", "--scenario", str(path), "--lenient"]) == 0
    captured = capsys.readouterr()
    assert "ok: 21 cells, 1 faults" in captured.out
    assert "warning:" in captured.err and "extra" in captured.err


def test_defaults_command_round_trips(capsys):
    assert main(["defaults"]) == 0
    assert parse_scenario(capsys.readouterr().out).config == SimulationConfig()


def test_manifest_rejects_zero_rounds():
    with pytest.raises(ValueError):
        RunManifest("s.ini", "out", 0)


def test_artifacts_without_action_log(tmp_path, default_ini):
    manifest = RunManifest(str(default_ini), str(tmp_path / "o"), 1, emit_actions=False)
    result = cli.run(manifest)
    assert "actions.jsonl" not in artifacts(result, manifest)
    assert not (tmp_path / "o" / "actions.jsonl").exists()
