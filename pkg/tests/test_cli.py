import csv
import dataclasses
import json

import numpy as np
import pytest

from miurakdv import catalog
from miurakdv.cli import main
from miurakdv.config import ConfigError, parse_config
from miurakdv.hankel import lambda_rule
from miurakdv.scattering import build_table, dump_table


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


DELTA = {"kind": "delta", "params": {"c": 1.0}}


def test_reflection_table(tmp_path):
    cfg = write(tmp_path, {"profile": DELTA, "reflection": {"h": 1.0, "n_nodes": 16}})
    out = tmp_path / "r.csv"
    assert main(["reflection", "--config", cfg, "--out", str(out), "--workers", "1"]) == 0
    rows = read_csv(out)
    assert list(rows[0]) == ["lambda", "h", "re_R", "im_R", "abs_R"]
    assert len(rows) == 16
    assert all(float(r["abs_R"]) <= 1 for r in rows)
    lam = float(rows[3]["lambda"])
    R = complex(float(rows[3]["re_R"]), float(rows[3]["im_R"]))
    assert R == pytest.approx(1 / (2j * (lam + 1j) - 1), abs=1e-12)


def test_reflection_zero_profile(tmp_path):
    cfg = write(tmp_path, {"profile": {"kind": "zero"}})
    out = tmp_path / "r.csv"
    assert main(["reflection", "--config", cfg, "--out", str(out)]) == 0
    assert all(float(r["re_R"]) == 0 == float(r["im_R"]) for r in read_csv(out))


@pytest.mark.parametrize("cfg,key", [
    ({"profile": DELTA, "bogus": 1}, "bogus"),
    ({"profile": DELTA, "quadrature": {"nodes": 3}}, "nodes"),
    ({"profile": {"kind": "delta", "params": {"c": 1}, "shape": 2}}, "shape"),
    ({"profile": DELTA, "x": {"start": 0, "stop": 1, "count": 3}}, "count"),
])
def test_unknown_keys_exit_2(tmp_path, capsys, cfg, key):
    path = write(tmp_path, cfg)
    assert main(["solve", "--config", path]) == 2
    assert key in capsys.readouterr().err


@pytest.mark.parametrize("bad", [
    {"t": -1}, {"h": 0}, {"quadrature": {"n_nodes": 2.5}}, {"output": {"format": "xml"}},
    {"validate": {"window": [1, -1]}}, {"quadrature": {"rule_check": "yes"}},
])
def test_invalid_values_rejected(bad):
    with pytest.raises(ConfigError):
        parse_config({"profile": DELTA, **bad})


def test_rule_check_option_reaches_solver():
    cfg = parse_config({"profile": DELTA, "quadrature": {"rule_check": True}})
    assert cfg.solve_options().rule_check
    assert not parse_config({"profile": DELTA}).solve_options().rule_check


def test_missing_config_exit_2(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "none.json")]) == 2


def test_solve_grid_is_ordered_and_deterministic(tmp_path):
    cfg = write(tmp_path, {"profile": DELTA, "t": 0.1,
                           "x": {"start": -4, "stop": 4, "num": 101},
                           "output": {"companion": str(tmp_path / "curve")}})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["solve", "--config", cfg, "--out", str(a), "--workers", "1"]) == 0
    assert main(["solve", "--config", cfg, "--out", str(b), "--workers", "1"]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = read_csv(a)
    assert list(rows[0]) == ["x", "t", "q", "logdet", "norm_bound", "fd_crosscheck_error",
                             "nodes_used", "error"]
    xs = [float(r["x"]) for r in rows]
    assert len(rows) == 101 and xs == sorted(xs)
    assert all(r["error"] == "" and float(r["fd_crosscheck_error"]) < 1e-6 for r in rows)
    curve = np.loadtxt(tmp_path / "curve_t0.dat")
    assert curve.shape == (101, 2)
    assert np.allclose(curve[:, 1], [float(r["q"]) for r in rows], rtol=0, atol=0)


def test_solve_zero_profile_json(tmp_path):
    cfg = write(tmp_path, {"profile": {"kind": "zero"}, "t": [0.1, 0.5], "x": [-1, 0, 1]})
    out = tmp_path / "s.json"
    assert main(["solve", "--config", cfg, "--format", "json", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["command"] == "solve" and len(doc["rows"]) == 6
    assert all(r["q"] == 0 for r in doc["rows"])


def test_solve_failure_rows(tmp_path, capsys):
    # t below t_min: every point fails, rows are explicit and numeric fields empty
    cfg = write(tmp_path, {"profile": DELTA, "t": 1e-5, "x": [0.0, 1.0]})
    out = tmp_path / "f.csv"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 1
    rows = read_csv(out)
    assert len(rows) == 2 and all(r["q"] == "" and "t_min" in r["error"] for r in rows)


def test_certify_delta_and_zero(tmp_path):
    for spec in (DELTA, {"kind": "zero"}):
        cfg = write(tmp_path, {"profile": spec})
        out = tmp_path / "c.csv"
        assert main(["certify", "--config", cfg, "--out", str(out)]) == 0
        rows = read_csv(out)
        assert len(rows) == 9 and all(r["passed"] == "true" for r in rows)


def test_certify_corrupted_table(tmp_path, capsys):
    table = build_table(catalog("delta", c=1.0), 1.0, lambda_rule(0.0, 1.0, 1.0, 21))
    values = table.values.copy()
    values[3] = 1.5 + 0.5j
    path = tmp_path / "bad_table.txt"
    dump_table(dataclasses.replace(table, values=values), path)
    cfg = write(tmp_path, {"profile": DELTA, "certify": {"table": str(path)}})
    out = tmp_path / "c.csv"
    assert main(["certify", "--config", cfg, "--out", str(out)]) == 1
    rows = {r["invariant"]: r for r in read_csv(out)}
    assert rows["reflection_bound"]["passed"] == "false"
    assert "reflection_bound" in capsys.readouterr().err


def test_validate_zero_profile(tmp_path):
    for study in ("reference", "mollified"):
        cfg = write(tmp_path, {"profile": {"kind": "zero"}, "validate": {"study": study}})
        out = tmp_path / "v.csv"
        assert main(["validate", "--config", cfg, "--out", str(out)]) == 0
        assert all(float(r["discrepancy"]) == 0 for r in read_csv(out))


@pytest.mark.slow
def test_validate_mollified_delta(tmp_path):
    cfg = write(tmp_path, {"profile": DELTA, "validate": {"study": "mollified", "num": 31}})
    out = tmp_path / "v.csv"
    assert main(["validate", "--config", cfg, "--out", str(out)]) == 0
    gaps = [float(r["discrepancy"]) for r in read_csv(out)]
    assert [int(r["n"]) for r in read_csv(out)] == [4, 8, 16]
    assert gaps[0] > gaps[1] > gaps[2]
