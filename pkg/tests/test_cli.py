from __future__ import annotations

import csv
import json

import pytest

from killedwalk import cli
from killedwalk.environment import WalkParams
from killedwalk.quenched import TruncationPolicy, quenched_speed_mc


def _run(args, capsys):
    code = cli.main(args)
    return code, capsys.readouterr()


def test_usage_errors(capsys):
    assert _run(["quenched", "--p", "abc"], capsys)[0] == 2
    assert _run(["validate", "nonexistent"], capsys)[0] == 2
    assert _run(["frobnicate"], capsys)[0] == 2
    assert _run(["quenched", "--p", "0.1,0.2"], capsys)[0] == 2


def test_validate_exit_codes(capsys):
    code, out = _run(["validate", "closed-forms"], capsys)
    assert code == 0 and "[PASS]" in out.out
    code, out = _run(["validate", "sandwiches"], capsys)
    assert code == 1 and "[FAIL]" in out.out


def test_quenched_json(capsys):
    code, out = _run(["quenched", "--p", "0.5", "--M", "2", "--n", "2000", "--seed", "3", "--format", "json"], capsys)
    assert code == 0
    rec = json.loads(out.out)[0]
    ref = quenched_speed_mc(WalkParams(0.5, 2.0), 2000, TruncationPolicy.for_params(WalkParams(0.5, 2.0)), seed=3)
    assert float(rec["inverse"]) == ref.inverse


def test_sweep_reproducible_and_single_cell(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sweep", "--p", "0.3", "--M", "0.5,2", "--n", "2000", "--y", "8", "--seed", "9",
            "--methods", "quenched-mc,annealed-exact"]
    assert cli.main([*args, "--out", str(a), "--threads", "1"]) == 0
    assert cli.main([*args, "--out", str(b), "--threads", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.DictReader(open(a)))
    assert [r["method"] for r in rows] == ["ergodic-mc", "ergodic-mc", "exact-enumeration", "exact-enumeration"]
    first = rows[0]
    direct = quenched_speed_mc(
        WalkParams(0.3, 0.5), 2000, TruncationPolicy.for_params(WalkParams(0.3, 0.5)), seed=int(first["seed"])
    )
    assert first["inverse"] == repr(direct.inverse)
    assert not (tmp_path / "a.csv.partial").exists()


def test_sweep_resume(tmp_path):
    out = tmp_path / "r.csv"
    spec = cli.SweepSpec((0.3,), (0.5, 1.0), 8, 1000, ("annealed-exact",), 1, str(out))
    cells = spec.cells()
    k, row = cli.run_cell(cells[0])
    with open(str(out) + ".partial", "w") as fh:
        fh.write(json.dumps({"cell": k, "row": row}) + "\n")
    rows = cli.run_sweep(spec, resume=True)
    assert len(rows) == 2
    fresh = tmp_path / "f.csv"
    cli.run_sweep(cli.SweepSpec((0.3,), (0.5, 1.0), 8, 1000, ("annealed-exact",), 1, str(fresh)))
    assert out.read_bytes() == fresh.read_bytes()


def test_sweep_svg_and_config(tmp_path):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text("# sweep settings\np = 0.3\nM = 0.5,1,2\nn = 1000\ny = 8\nmethods = quenched-mc,annealed-exact\n")
    out = tmp_path / "curve.svg"
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(out), "--threads", "1"]) == 0
    assert out.read_text().lstrip().startswith("<?xml")
    rows = list(csv.DictReader(open(tmp_path / "curve.csv")))
    assert len(rows) == 6


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert _run(["quenched", "--config", str(cfg)], capsys)[0] == 2


def test_unwritable_output(capsys):
    code, _ = _run(["sweep", "--p", "0.3", "--M", "1", "--n", "500", "--methods", "annealed-exact",
                    "--out", "/nonexistent/dir/x.csv"], capsys)
    assert code == 2


@pytest.mark.parametrize("cmd", [
    ["annealed-exact", "--p", "0.5", "--M", "1", "--y", "4,6"],
    ["annealed-exact", "--p", "0.5", "--M", "1", "--y", "4", "--table"],
    ["annealed-mc", "--p", "0.5", "--M", "1", "--y", "6", "--n", "1000"],
    ["lyapunov", "--p", "0.5", "--M", "1", "--y", "2000"],
    ["sample-paths", "--p", "0.5", "--M", "1", "--y", "10", "--n", "3"],
])
def test_commands_run(cmd, capsys):
    code, out = _run(cmd, capsys)
    assert code == 0 and out.out.strip()
