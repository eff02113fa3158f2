import csv
import io
import json
from pathlib import Path

import pytest

from invsq.cli import run

SPECS = Path(__file__).resolve().parents[1] / "specs"


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_zero_potential_counts_are_zero(tmp_path):
    out = tmp_path / "c.csv"
    assert run(["count", "--potential", str(SPECS / "zero.json"), "--E-grid", "1e-2,1e-4,1e-6",
                "--out", str(out)]) == 0
    rows = _rows(out.read_text())
    assert len(rows) == 3 and all(r["total"] == "0" for r in rows)
    manifest = json.loads(Path(str(out) + ".manifest.json").read_text())
    assert manifest["command"] == "count" and "versions" in manifest and "tolerances" in manifest


def test_output_is_deterministic(tmp_path):
    texts = []
    for k in range(2):
        out = tmp_path / f"run{k}.csv"
        assert run(["count", "--potential", str(SPECS / "constant_minus5.json"),
                    "--E-grid", "1e-2,1e-4", "--out", str(out)]) == 0
        texts.append(out.read_bytes())
    assert texts[0] == texts[1]
    totals = {r["E"]: int(r["total"]) for r in _rows(texts[0].decode())}
    assert totals == {"0.01": 5, "0.0001": 9}


def test_slope_roundtrip(tmp_path):
    out = tmp_path / "c.csv"
    assert run(["count", "--potential", str(SPECS / "constant_minus5.json"),
                "--E-grid", "1e-2,1e-4,1e-6,1e-8,1e-10", "--out", str(out)]) == 0
    fit = tmp_path / "fit.json"
    assert run(["slope", "--in", str(out), "--out", str(fit)]) == 0
    res = json.loads(fit.read_text())
    assert res["n_points"] == 5 and res["slope"] > 0
    assert res["predicted_slope"] == pytest.approx(1.13866, rel=1e-4)


def test_malformed_spec_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"angular": {"kind": "hemisphere", "parameters": {"epsilon": 0.5,
                                                                                "parity": "even"}}}))
    assert run(["angular", "--potential", str(bad)]) == 2
    assert "angular.parameters.epsilon" in capsys.readouterr().err


def test_usage_errors_exit_2(tmp_path):
    assert run(["count"]) == 2
    assert run(["nonsense"]) == 2
    assert run(["count", "--potential", str(tmp_path / "missing.json")]) == 2
    assert run(["count", "--potential", str(SPECS / "zero.json"), "--E-grid", "2"]) == 2
    assert run(["count", "--potential", str(SPECS / "zero.json"), "--threads", "0"]) == 2


def test_domain_error_exit_1():
    # a non-oscillating mode and lam <= 0 are a value error
    assert run(["exterior", "--mu", "5", "--lam", "-1"]) == 1


def test_angular_and_exterior_outputs(capsys):
    assert run(["angular", "--potential", str(SPECS / "constant_minus5.json"), "--basis", "8"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert rows[0]["critical"] == "true" and float(rows[0]["mu"]) == pytest.approx(5.0)
    assert run(["exterior", "--mu", "5", "--lam", "1", "--n", "20"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert len(rows) == 20
    assert max(abs(float(r["ode_residual"])) for r in rows) < 1e-6


def test_plot_dir_header_only(tmp_path):
    assert run(["count", "--potential", str(SPECS / "zero.json"), "--E-grid", "1e-2,1e-3",
                "--plot-dir", str(tmp_path), "--out", str(tmp_path / "c.csv")]) == 0
    assert (tmp_path / "count_vs_log_inv_E.csv").read_text().count("\n") == 3
    assert (tmp_path / "ladder_log_lambda.csv").read_text() == "n,log_lambda\n"
    assert (tmp_path / "residual_vs_lambda.csv").read_text() == "lambda,ratio\n"


def test_ladder_ratio_column(capsys):
    assert run(["ladder", "--n-max", "8"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert [int(r["n"]) for r in rows] == list(range(1, 9))
    ratios = [float(r["ratio"]) for r in rows if r["ratio"]]
    assert abs(ratios[-1] - 2.0) < abs(ratios[0] - 2.0)


def test_ladder_rejects_nonspectral():
    assert run(["ladder", "--potential", str(SPECS / "constant_minus5.json"), "--n-max", "3"]) == 2
