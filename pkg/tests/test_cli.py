import csv
import io
import json
import math
from pathlib import Path

import pytest

from mixcomp import info_measures as im
from mixcomp.cli import SCHEMAS, SIMULATE_COLUMNS, main
from mixcomp.ensemble import TRINE_CONFIG

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(text):
    lines = text.splitlines()
    return lines[0], list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def test_info_trine(capsys):
    code, out, _ = run(capsys, "info", "--ensemble", "trine", "--format", "jsonl")
    assert code == 0
    vals = {r["measure"]: r["value"] for r in map(json.loads, out.splitlines())}
    assert vals["H(Q)"] == pytest.approx(math.log2(3), abs=1e-9)
    assert vals["I(P,W)"] == pytest.approx(2 / 3, abs=1e-9)
    assert vals["S(rho)"] == pytest.approx(1, abs=1e-9)
    assert 0.2555 <= vals["chi"] <= 0.2565


def test_info_text_from_file(capsys):
    code, out, _ = run(capsys, "info", "--ensemble", str(CONFIGS / "trine.ini"))
    assert code == 0 and out.splitlines()[0].startswith("H(Q)")


def test_simulate_deterministic(capsys, tmp_path):
    args = ["simulate", "--ensemble", "two-coins:w=0.1", "--n", "6,8", "--rate", "0.4,0.8", "--trials", "40"]
    outs = []
    for i in range(2):
        path = tmp_path / f"s{i}.csv"
        assert main(args + ["--seed", "3", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    schema, rows = read_csv(outs[0].decode())
    assert schema == SCHEMAS["simulate"]
    assert list(rows[0]) == SIMULATE_COLUMNS
    assert len(rows) == 4 and all(r["status"] == "ok" for r in rows)


def test_simulate_fidelity_increases_with_rate(capsys):
    mi = im.mutual_information([0.5, 0.5], [[0.9, 0.1], [0.1, 0.9]])
    rates = ",".join(str(mi + d) for d in (-0.3, -0.1, 0.1, 0.3))
    code, out, _ = run(capsys, "simulate", "--ensemble", "two-coins:w=0.1", "--n", "40", "--rate", rates,
                       "--trials", "10")
    assert code == 0
    _, rows = read_csv(out)
    exact = [float(r["exact_fidelity"]) for r in rows]
    assert all(b >= a - 1e-12 for a, b in zip(exact, exact[1:]))
    for r in rows:
        assert float(r["exact_fidelity"]) >= float(r["fidelity_bound"]) - 1e-12


def test_flag_beats_env_seed(capsys, monkeypatch):
    args = ["simulate", "--ensemble", "trine", "--n", "4", "--rate", "0.5", "--trials", "30"]
    monkeypatch.setenv("MIXCOMP_SEED", "99")
    _, from_env, _ = run(capsys, *args)
    _, from_flag, _ = run(capsys, *args, "--seed", "99")
    _, other, _ = run(capsys, *args, "--seed", "1")
    assert from_env == from_flag
    assert other != from_flag


def test_cover_report(capsys, tmp_path):
    path = tmp_path / "code.json"
    code, out, _ = run(capsys, "cover", "--ensemble", "two-coins:w=0.25", "--n", "8", "--format", "jsonl",
                       "--out", str(path))
    assert code == 0
    rep = json.loads(out)
    assert rep["verified"] is True
    assert rep["jsl_lower"] <= rep["size"] <= rep["jsl_upper"]
    assert len(json.loads(path.read_text())["members"]) == rep["size"]


def test_rd_starts_at_source_entropy(capsys):
    code, out, _ = run(capsys, "rd", "--ensemble", "two-coins:w=0.25", "--points", "5")
    assert code == 0
    schema, rows = read_csv(out)
    assert schema == SCHEMAS["rd"]
    assert float(rows[0]["R"]) == pytest.approx(1, abs=1e-6)
    assert float(rows[-1]["R"]) == pytest.approx(0, abs=1e-9)


def test_validate_passes(capsys):
    code, out, _ = run(capsys, "validate", "--seed", "0")
    assert code == 0
    assert "FAIL" not in out


def test_corrupted_config_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text(TRINE_CONFIG.replace("row0 = 2/3 1/3 0", "row0 = 0.5 0.1 0"))
    code, out, err = run(capsys, "info", "--ensemble", str(bad))
    assert code == 2 and out == ""
    assert "sums to" in err


def test_guard_reports_bound(capsys):
    code, _, err = run(capsys, "cover", "--ensemble", "trine", "--n", "40")
    assert code == 2
    assert "bound=" in err
